#pragma once

#include <cmath>

#include "icpcov/error.hpp"

namespace icpcov {

template <class T>
Split<T> split_dataset(const std::vector<T>& items, double r_train, double r_test, double r_eval) {
  if (r_train < 0 || r_test < 0 || r_eval < 0 || std::abs(r_train + r_test + r_eval - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "split ratios must be non-negative and sum to 1");
  }
  const auto n = static_cast<double>(items.size());
  const auto a = static_cast<std::size_t>(std::llround(n * r_train));
  const auto b = std::max(a, std::min(items.size(), static_cast<std::size_t>(std::llround(n * (r_train + r_test)))));
  Split<T> out;
  out.train.assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(a));
  out.test.assign(items.begin() + static_cast<std::ptrdiff_t>(a), items.begin() + static_cast<std::ptrdiff_t>(b));
  out.eval.assign(items.begin() + static_cast<std::ptrdiff_t>(b), items.end());
  return out;
}

}  // namespace icpcov
