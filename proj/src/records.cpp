#include "icpcov/records.hpp"

#include <fstream>
#include <array>
#include <nlohmann/json.hpp>
#include <sstream>

#include "icpcov/error.hpp"

namespace icpcov {

namespace {

using nlohmann::json;

json doubles(const auto& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

template <std::size_t N>
std::array<double, N> fixed_array(const json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != N) {
    throw Error(ErrorCode::ParseError, std::string(key) + " must hold " + std::to_string(N) + " numbers");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = a[i].get<double>();
  return out;
}

Cov6 cov_from_json(const json& j) {
  return from_lower21(fixed_array<21>(j, "cov_lower"));
}

template <class Fn>
auto parse_line(const std::string& line, Fn&& fn) {
  try {
    return fn(json::parse(line));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

template <class Fn>
void for_each_line(std::istream& is, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(line);
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return is;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  return os;
}

}  // namespace

std::string to_json_line(const ScanSample& s) {
  json j;
  j["scan_id"] = s.scan_id;
  j["scenario"] = to_string(s.scenario);
  j["gt_pose"] = doubles(to_row12(s.gt_pose));
  j["cov_lower"] = doubles(to_lower21(s.label));
  j["n_samples"] = s.n_samples;
  j["n_converged"] = s.n_converged;
  j["scan_path"] = s.scan_path;
  return j.dump();
}

ScanSample from_json_line(const std::string& line) {
  return parse_line(line, [](const json& j) {
    ScanSample s;
    s.scan_id = j.at("scan_id").get<std::int64_t>();
    s.scenario = parse_scenario(j.at("scenario").get<std::string>());
    s.gt_pose = from_row12(fixed_array<12>(j, "gt_pose"));
    s.label = cov_from_json(j);
    s.n_samples = j.at("n_samples").get<int>();
    s.n_converged = j.at("n_converged").get<int>();
    s.scan_path = j.value("scan_path", std::string{});
    if (s.n_converged > s.n_samples || s.n_converged < 0) {
      throw Error(ErrorCode::ParseError, "n_converged exceeds n_samples");
    }
    return s;
  });
}

void write_dataset(std::ostream& os, const std::vector<ScanSample>& samples) {
  for (const auto& s : samples) os << to_json_line(s) << '\n';
  if (!os) throw Error(ErrorCode::IoError, "failed to write dataset");
}

void write_dataset(const std::filesystem::path& path, const std::vector<ScanSample>& samples) {
  auto os = open_out(path);
  write_dataset(os, samples);
}

std::vector<ScanSample> read_dataset(std::istream& is) {
  std::vector<ScanSample> out;
  for_each_line(is, [&](const std::string& line) { out.push_back(from_json_line(line)); });
  return out;
}

std::vector<ScanSample> read_dataset(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_dataset(is);
}

std::vector<CovRecord> read_cov_records(const std::filesystem::path& path) {
  auto is = open_in(path);
  std::vector<CovRecord> out;
  for_each_line(is, [&](const std::string& line) {
    out.push_back(parse_line(line, [](const json& j) {
      CovRecord r;
      r.scan_id = j.at("scan_id").get<std::int64_t>();
      r.cov = cov_from_json(j);
      r.scan_path = j.value("scan_path", std::string{});
      return r;
    }));
  });
  return out;
}

void write_cov_records(const std::filesystem::path& path, const std::vector<CovRecord>& records) {
  auto os = open_out(path);
  for (const auto& r : records) {
    json j;
    j["scan_id"] = r.scan_id;
    j["cov_lower"] = doubles(to_lower21(r.cov));
    j["scan_path"] = r.scan_path;
    os << j.dump() << '\n';
  }
  if (!os) throw Error(ErrorCode::IoError, "failed to write " + path.string());
}

}  // namespace icpcov
