#include "evr/gradcheck.hpp"

#include "evr/errors.hpp"

#include <algorithm>
#include <cmath>

namespace evr {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / (std::max(std::abs(analytic), std::abs(numeric)) + 1e-12);
}

GradCheckReport finite_difference_check(const std::function<double(std::span<const double>)>& f,
                                        std::vector<double> theta, std::span<const double> analytic,
                                        std::span<const size_t> probes, double h) {
  if (!(h > 0.0)) throw ArgumentError("finite_difference_check: step must be positive");
  if (analytic.size() != theta.size()) throw ArgumentError("finite_difference_check: gradient length mismatch");
  GradCheckReport report;
  for (size_t i : probes) {
    if (i >= theta.size()) throw RangeError("finite_difference_check: probe index out of range");
    const double saved = theta[i];
    theta[i] = saved + h;
    const double up = f(theta);
    theta[i] = saved - h;
    const double down = f(theta);
    theta[i] = saved;
    ProbeResult r{i, analytic[i], (up - down) / (2.0 * h), 0.0};
    r.rel_error = relative_error(r.analytic, r.numeric);
    report.max_rel_error = std::max(report.max_rel_error, r.rel_error);
    report.probes.push_back(r);
  }
  return report;
}

}  // namespace evr
