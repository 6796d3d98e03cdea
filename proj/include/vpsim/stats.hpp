#pragma once

#include <cstddef>
#include <span>

namespace vpsim {

/// Mean and sample (n-1) standard deviation; std is 0 for a single value.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};

/// Throws vpsim::Error on empty input.
MeanStd mean_std(std::span<const double> values);

}  // namespace vpsim
