#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "icpcov/error.hpp"
#include "icpcov/predictor.hpp"

// Model container, all integers u32 and all reals f64, little-endian:
//   "ICPCOVM1" | version | sectors | normal_neighbors | epsilon | input_dim
//   | mean[input_dim] | std[input_dim] | n_layers | (rows | cols | W row-major | b[rows])*
//   | n_history | history[n_history]

namespace icpcov {

namespace {

constexpr char kMagic[8] = {'I', 'C', 'P', 'C', 'O', 'V', 'M', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(b, 4);
}

void put_f64(std::ostream& os, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  os.write(b, 8);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorCode::MalformedFile, "truncated model file");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw Error(ErrorCode::MalformedFile, "truncated model file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return std::bit_cast<double>(v);
}

std::uint32_t checked_size(std::uint32_t v, std::uint32_t limit, const char* what) {
  if (v > limit) throw Error(ErrorCode::MalformedFile, std::string("implausible ") + what);
  return v;
}

}  // namespace

void save_model(std::ostream& os, const ModelParams& p) {
  os.write(kMagic, sizeof(kMagic));
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(p.features.sectors));
  put_u32(os, static_cast<std::uint32_t>(p.features.normal_neighbors));
  put_f64(os, p.epsilon);
  put_u32(os, static_cast<std::uint32_t>(p.feature_mean.size()));
  for (double v : p.feature_mean) put_f64(os, v);
  for (double v : p.feature_std) put_f64(os, v);
  put_u32(os, static_cast<std::uint32_t>(p.layers.size()));
  for (const auto& l : p.layers) {
    put_u32(os, static_cast<std::uint32_t>(l.W.rows()));
    put_u32(os, static_cast<std::uint32_t>(l.W.cols()));
    for (Eigen::Index r = 0; r < l.W.rows(); ++r)
      for (Eigen::Index c = 0; c < l.W.cols(); ++c) put_f64(os, l.W(r, c));
    for (double v : l.b) put_f64(os, v);
  }
  put_u32(os, static_cast<std::uint32_t>(p.loss_history.size()));
  for (double v : p.loss_history) put_f64(os, v);
  if (!os) throw Error(ErrorCode::IoError, "failed to write model");
}

void save_model(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  save_model(os, params);
}

ModelParams load_model(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw Error(ErrorCode::MalformedFile, "not a model file");
  }
  const std::uint32_t version = get_u32(is);
  if (version != kVersion) throw Error(ErrorCode::MalformedFile, "unsupported model version " + std::to_string(version));
  constexpr std::uint32_t kLimit = 1u << 20;
  ModelParams p;
  p.features.sectors = static_cast<int>(checked_size(get_u32(is), 4096, "sector count"));
  p.features.normal_neighbors = static_cast<int>(checked_size(get_u32(is), 4096, "neighbour count"));
  p.epsilon = get_f64(is);
  const std::uint32_t dim = checked_size(get_u32(is), kLimit, "input dimension");
  p.feature_mean.resize(dim);
  p.feature_std.resize(dim);
  for (auto& v : p.feature_mean) v = get_f64(is);
  for (auto& v : p.feature_std) v = get_f64(is);
  const std::uint32_t n_layers = checked_size(get_u32(is), 64, "layer count");
  std::uint32_t expected_in = dim;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const std::uint32_t rows = checked_size(get_u32(is), kLimit, "layer rows");
    const std::uint32_t cols = checked_size(get_u32(is), kLimit, "layer cols");
    if (cols != expected_in) throw Error(ErrorCode::MalformedFile, "layer shapes do not chain");
    DenseLayer l;
    l.W.resize(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) l.W(r, c) = get_f64(is);
    l.b.resize(rows);
    for (auto& v : l.b) v = get_f64(is);
    p.layers.push_back(std::move(l));
    expected_in = rows;
  }
  if (p.layers.empty() || expected_in != 21) throw Error(ErrorCode::MalformedFile, "model must end in 21 outputs");
  if (static_cast<int>(dim) != p.features.dimension()) {
    throw Error(ErrorCode::MalformedFile, "input dimension does not match the feature extractor");
  }
  const std::uint32_t n_hist = checked_size(get_u32(is), kLimit, "history length");
  p.loss_history.resize(n_hist);
  for (auto& v : p.loss_history) v = get_f64(is);
  return p;
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return load_model(is);
}

}  // namespace icpcov
