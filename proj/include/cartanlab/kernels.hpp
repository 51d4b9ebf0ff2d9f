#pragma once

#include <cstddef>
#include <string>

namespace cartanlab {
namespace kern {

/// Flat-array kernels used by all lattice field operations.
///
/// Every kernel has a scalar reference implementation and, on x86 with AVX2,
/// a vector implementation selected once at startup.  The two paths are
/// bitwise-identical by construction: reductions accumulate into eight
/// stripes (element i feeds stripe i mod 8) and the stripes are combined in
/// one fixed pairwise order, so the floating-point operation sequence per
/// stripe does not depend on the instruction set.
struct Ops {
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // x[i] *= a
  void (*scale)(double a, double* x, std::size_t n);
  // out[i] += c * x[i] * y[i]
  void (*muladd)(double c, const double* x, const double* y, double* out,
                 std::size_t n);
  // out[i] += s * (p[i] - m[i])   (stencil difference, pre-divided by h)
  void (*acc_diff)(double s, const double* p, const double* m, double* out,
                   std::size_t n);
  // buf[i] += x[i] * x[i]
  void (*acc_sq)(const double* x, double* buf, std::size_t n);
  // striped-8 deterministic reductions
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
};

/// Kernels for the current process.  Dispatch happens on first use; the
/// environment variable CARTANLAB_SIMD=scalar forces the reference path.
const Ops& ops();

/// Reference path, always available (used by equivalence tests).
const Ops& scalar_ops();

/// AVX2 path, or nullptr when the CPU or build lacks it.
const Ops* avx2_ops();

/// "scalar" or "avx2", after dispatch.
std::string active_path();

}  // namespace kern
}  // namespace cartanlab
