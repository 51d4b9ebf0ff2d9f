#include "cartanlab/kernels.hpp"

namespace cartanlab {
namespace kern {
namespace scalar {

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void muladd(double c, const double* x, const double* y, double* out,
            std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += c * (x[i] * y[i]);
}

void acc_diff(double s, const double* p, const double* m, double* out,
              std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += s * (p[i] - m[i]);
}

void acc_sq(const double* x, double* buf, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) buf[i] += x[i] * x[i];
}

// Stripe s holds the partial sum of elements s, s+8, s+16, ...  The final
// combine order must match the AVX2 path exactly.
double reduce8(const double acc[8]) {
  const double t0 = acc[0] + acc[1];
  const double t1 = acc[2] + acc[3];
  const double t2 = acc[4] + acc[5];
  const double t3 = acc[6] + acc[7];
  return (t0 + t1) + (t2 + t3);
}

double dot(const double* x, const double* y, std::size_t n) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) acc[i & 7] += x[i] * y[i];
  return reduce8(acc);
}

double sum(const double* x, std::size_t n) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) acc[i & 7] += x[i];
  return reduce8(acc);
}

}  // namespace scalar

const Ops& scalar_ops() {
  static const Ops table = {
      &scalar::axpy, &scalar::scale,  &scalar::muladd, &scalar::acc_diff,
      &scalar::acc_sq, &scalar::dot,  &scalar::sum,
  };
  return table;
}

}  // namespace kern
}  // namespace cartanlab
