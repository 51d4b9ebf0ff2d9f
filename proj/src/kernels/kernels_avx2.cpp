// Compiled with -mavx2; entered only after the runtime CPU check in
// kernels_dispatch.cpp.  No FMA anywhere: each element must see the same
// mul-then-add rounding sequence as the scalar path.

#ifdef __AVX2__

#include <immintrin.h>

#include "cartanlab/kernels.hpp"

namespace cartanlab {
namespace kern {
namespace avx2 {

void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale(double a, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= a;
}

void muladd(double c, const double* x, const double* y, double* out,
            std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod =
        _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    __m256d vo = _mm256_loadu_pd(out + i);
    vo = _mm256_add_pd(vo, _mm256_mul_pd(vc, prod));
    _mm256_storeu_pd(out + i, vo);
  }
  for (; i < n; ++i) out[i] += c * (x[i] * y[i]);
}

void acc_diff(double s, const double* p, const double* m, double* out,
              std::size_t n) {
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d =
        _mm256_sub_pd(_mm256_loadu_pd(p + i), _mm256_loadu_pd(m + i));
    __m256d vo = _mm256_loadu_pd(out + i);
    vo = _mm256_add_pd(vo, _mm256_mul_pd(vs, d));
    _mm256_storeu_pd(out + i, vo);
  }
  for (; i < n; ++i) out[i] += s * (p[i] - m[i]);
}

void acc_sq(const double* x, double* buf, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vx = _mm256_loadu_pd(x + i);
    __m256d vb = _mm256_loadu_pd(buf + i);
    vb = _mm256_add_pd(vb, _mm256_mul_pd(vx, vx));
    _mm256_storeu_pd(buf + i, vb);
  }
  for (; i < n; ++i) buf[i] += x[i] * x[i];
}

// Stripes 0..3 live in acc0 lanes, 4..7 in acc1 lanes; the tail joins its
// stripe and the combine tree matches the scalar path.
double dot(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(
        acc0, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(_mm256_loadu_pd(x + i + 4),
                                             _mm256_loadu_pd(y + i + 4)));
  }
  alignas(32) double a[4];
  alignas(32) double b[4];
  _mm256_store_pd(a, acc0);
  _mm256_store_pd(b, acc1);
  for (std::size_t j = i; j < n; ++j) {
    const std::size_t s = j & 7;
    if (s < 4)
      a[s] += x[j] * y[j];
    else
      b[s - 4] += x[j] * y[j];
  }
  const double t0 = a[0] + a[1];
  const double t1 = a[2] + a[3];
  const double t2 = b[0] + b[1];
  const double t3 = b[2] + b[3];
  return (t0 + t1) + (t2 + t3);
}

double sum(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
  }
  alignas(32) double a[4];
  alignas(32) double b[4];
  _mm256_store_pd(a, acc0);
  _mm256_store_pd(b, acc1);
  for (std::size_t j = i; j < n; ++j) {
    const std::size_t s = j & 7;
    if (s < 4)
      a[s] += x[j];
    else
      b[s - 4] += x[j];
  }
  const double t0 = a[0] + a[1];
  const double t1 = a[2] + a[3];
  const double t2 = b[0] + b[1];
  const double t3 = b[2] + b[3];
  return (t0 + t1) + (t2 + t3);
}

}  // namespace avx2

const Ops* avx2_ops_table() {
  static const Ops table = {
      &avx2::axpy, &avx2::scale,  &avx2::muladd, &avx2::acc_diff,
      &avx2::acc_sq, &avx2::dot,  &avx2::sum,
  };
  return &table;
}

}  // namespace kern
}  // namespace cartanlab

#else

#include "cartanlab/kernels.hpp"

namespace cartanlab {
namespace kern {
const Ops* avx2_ops_table() { return nullptr; }
}  // namespace kern
}  // namespace cartanlab

#endif
