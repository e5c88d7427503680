#include "evr/loss.hpp"

#include "evr/errors.hpp"

namespace evr {

double mean_squared_error(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ArgumentError("loss: image shapes differ");
  if (a.size() == 0) return 0.0;
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double e = a.data()[i] - b.data()[i];
    sum += e * e;
  }
  return sum / static_cast<double>(a.size());
}

Image mean_squared_error_grad(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ArgumentError("loss: image shapes differ");
  Image g(a.height(), a.width(), a.channels());
  const double scale = 2.0 / static_cast<double>(a.size());
  for (size_t i = 0; i < a.size(); ++i) g.data()[i] = scale * (a.data()[i] - b.data()[i]);
  return g;
}

double loss_total(double render, double inter, double perceptual, double lambda) {
  if (!(lambda >= 0.0)) throw ArgumentError("loss_total: lambda must be non-negative");
  return render + inter + lambda * perceptual;
}

}  // namespace evr
