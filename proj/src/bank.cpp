#include "cartanlab/bank.hpp"

#include <cmath>
#include <numbers>

#include "cartanlab/errors.hpp"
#include "cartanlab/kernels.hpp"
#include "cartanlab/rng.hpp"

namespace cartanlab {
namespace {

constexpr std::size_t pow5(int n) {
  std::size_t r = 1;
  for (int i = 0; i < n; ++i) r *= 5;
  return r;
}

// Basis function t at coordinate x on a circle of circumference L.
double basis_value(int t, double x, double L) {
  const double w = 2.0 * std::numbers::pi * x / L;
  switch (t) {
    case 0: return 1.0;
    case 1: return std::cos(w);
    case 2: return std::sin(w);
    case 3: return std::cos(2.0 * w);
    default: return std::sin(2.0 * w);
  }
}

}  // namespace

TrigPolyForm::TrigPolyForm(int n, int degree, AlgebraPtr algebra)
    : n_(n), degree_(degree), algebra_(std::move(algebra)) {
  if (n < 1 || n > 4) throw ArgumentError("TrigPolyForm: dimension must be in 1..4");
  if (degree < 0 || degree > n) throw DegreeError("TrigPolyForm: degree out of range");
  if (!algebra_) throw ArgumentError("TrigPolyForm: null algebra");
  ncomp_ = binom(n, degree);
  tensor_size_ = pow5(n);
  coefs_.assign(static_cast<std::size_t>(ncomp_) * algebra_->dim() * tensor_size_, 0.0);
}

std::size_t TrigPolyForm::slot_offset(int comp, int coeff) const {
  return (static_cast<std::size_t>(comp) * algebra_->dim() + coeff) * tensor_size_;
}

double& TrigPolyForm::coef(int comp, int coeff, const int* t) {
  std::size_t idx = 0;
  for (int l = 0; l < n_; ++l) idx = idx * kBasisPerAxis + t[l];
  return coefs_[slot_offset(comp, coeff) + idx];
}

double TrigPolyForm::coef(int comp, int coeff, const int* t) const {
  return const_cast<TrigPolyForm*>(this)->coef(comp, coeff, t);
}

double TrigPolyForm::l2_norm() const {
  double total = 0.0;
  for (std::size_t i = 0; i < coefs_.size(); ++i) {
    const double c = coefs_[i];
    if (c == 0.0) continue;
    double w = 1.0;
    std::size_t rest = i % tensor_size_;
    for (int l = n_ - 1; l >= 0; --l) {
      if (rest % kBasisPerAxis != 0) w *= 0.5;
      rest /= kBasisPerAxis;
    }
    total += c * c * w;
  }
  return std::sqrt(total);
}

void TrigPolyForm::scale(double c) {
  for (double& v : coefs_) v *= c;
}

TrigPolyForm TrigPolyForm::random(int n, int degree, AlgebraPtr algebra,
                                  std::uint64_t seed) {
  TrigPolyForm f(n, degree, std::move(algebra));
  Rng rng(seed);
  for (double& v : f.coefs_) v = rng.symm();
  const double nrm = f.l2_norm();
  f.scale(1.0 / nrm);
  return f;
}

Form TrigPolyForm::sample(const Grid& g) const {
  if (g.n() != n_) throw ArgumentError("TrigPolyForm::sample: grid dimension mismatch");
  Form out(g, degree_, algebra_);
  const auto& K = kern::ops();

  // Per-axis basis tables evaluated on the grid.
  std::vector<std::vector<double>> table(static_cast<std::size_t>(n_) * kBasisPerAxis);
  for (int ax = 0; ax < n_; ++ax) {
    const int N = g.size(ax);
    for (int t = 0; t < kBasisPerAxis; ++t) {
      auto& col = table[static_cast<std::size_t>(ax) * kBasisPerAxis + t];
      col.resize(N);
      for (int i = 0; i < N; ++i) col[i] = basis_value(t, g.coord(ax, i), g.period(ax));
    }
  }

  // Output strides per axis (last axis fastest, matching Grid).
  std::vector<std::size_t> out_stride(n_);
  {
    std::size_t s = 1;
    for (int ax = n_ - 1; ax >= 0; --ax) {
      out_stride[ax] = s;
      s *= g.size(ax);
    }
  }

  // Scratch for partially contracted coefficient blocks, one per level.
  std::vector<std::vector<double>> scratch(n_);
  for (int l = 0; l + 1 < n_; ++l) scratch[l].resize(pow5(n_ - 1 - l));

  // Contract the coefficient tensor against the axis tables one axis at a
  // time; the innermost axis becomes five axpy calls over a contiguous run.
  auto eval = [&](auto&& self, int level, const double* coef, double* dst) -> void {
    const auto* tab = &table[static_cast<std::size_t>(level) * kBasisPerAxis];
    const int N = g.size(level);
    if (level == n_ - 1) {
      for (int t = 0; t < kBasisPerAxis; ++t)
        if (coef[t] != 0.0) K.axpy(coef[t], tab[t].data(), dst, static_cast<std::size_t>(N));
      return;
    }
    const std::size_t block = pow5(n_ - 1 - level);
    auto& red = scratch[level];
    for (int i = 0; i < N; ++i) {
      for (std::size_t j = 0; j < block; ++j) {
        double acc = 0.0;
        for (int t = 0; t < kBasisPerAxis; ++t) acc += tab[t][static_cast<std::size_t>(i)] * coef[t * block + j];
        red[j] = acc;
      }
      self(self, level + 1, red.data(), dst + static_cast<std::size_t>(i) * out_stride[level]);
    }
  };

  for (int comp = 0; comp < ncomp_; ++comp)
    for (int coeff = 0; coeff < algebra_->dim(); ++coeff)
      eval(eval, 0, coefs_.data() + slot_offset(comp, coeff), out.field(comp, coeff));
  return out;
}

std::vector<TrigPolyForm> make_test_bank(int n, int degree, AlgebraPtr algebra,
                                         int count, std::uint64_t seed) {
  if (count < 1) throw ArgumentError("make_test_bank: count must be positive");
  std::vector<TrigPolyForm> bank;
  bank.reserve(count);
  for (int i = 0; i < count; ++i)
    bank.push_back(TrigPolyForm::random(n, degree, algebra, seed + static_cast<std::uint64_t>(i)));
  return bank;
}

}  // namespace cartanlab
