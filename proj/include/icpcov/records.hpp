#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "icpcov/liegroup.hpp"
#include "icpcov/mc_dataset.hpp"

namespace icpcov {

// Dataset files are JSON Lines, one ScanSample per line:
//   {"scan_id", "scenario", "gt_pose": [12], "cov_lower": [21], "n_samples", "n_converged", "scan_path"}
// Units are metres and radians; cov_lower is the row-major lower triangle.

std::string to_json_line(const ScanSample& s);
/// Throws ParseError on malformed records.
ScanSample from_json_line(const std::string& line);

void write_dataset(std::ostream& os, const std::vector<ScanSample>& samples);
void write_dataset(const std::filesystem::path& path, const std::vector<ScanSample>& samples);
/// Blank lines are skipped; errors carry the 1-based line number.
std::vector<ScanSample> read_dataset(std::istream& is);
std::vector<ScanSample> read_dataset(const std::filesystem::path& path);

/// A covariance keyed by scan id, as written by `predict`.
struct CovRecord {
  std::int64_t scan_id = 0;
  Cov6 cov = Cov6::Zero();
  std::string scan_path;
};

/// Accepts prediction files and dataset files alike (cov_lower is the only
/// covariance field either carries).
std::vector<CovRecord> read_cov_records(const std::filesystem::path& path);
void write_cov_records(const std::filesystem::path& path, const std::vector<CovRecord>& records);

}  // namespace icpcov
