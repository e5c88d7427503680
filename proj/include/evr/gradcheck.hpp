#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace evr {

struct ProbeResult {
  size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<ProbeResult> probes;
  double max_rel_error = 0.0;
};

/// |a - n| / (max(|a|, |n|) + 1e-12).
double relative_error(double analytic, double numeric);

/// Central differences (f(theta + h e_i) - f(theta - h e_i)) / 2h at each
/// probe index, compared with analytic[i]. `theta` is restored on return.
GradCheckReport finite_difference_check(const std::function<double(std::span<const double>)>& f,
                                        std::vector<double> theta, std::span<const double> analytic,
                                        std::span<const size_t> probes, double h);

}  // namespace evr
