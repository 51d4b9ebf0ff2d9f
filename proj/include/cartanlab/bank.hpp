#pragma once

#include <cstdint>
#include <vector>

#include "cartanlab/forms.hpp"

namespace cartanlab {

// Band-limited analytic k-form on the unit torus: every (component, algebra
// coefficient) slot holds a separable trigonometric polynomial with per-axis
// basis {1, cos 2pix, sin 2pix, cos 4pix, sin 4pix}. Such forms evaluate
// exactly on any grid, which lets experiments pair fields living on different
// grids against one common bank.
class TrigPolyForm {
 public:
  static constexpr int kBasisPerAxis = 5;

  TrigPolyForm(int n, int degree, AlgebraPtr algebra);

  // Unit-L2 form with uniformly random coefficients drawn from `seed`.
  static TrigPolyForm random(int n, int degree, AlgebraPtr algebra,
                             std::uint64_t seed);

  int n() const { return n_; }
  int degree() const { return degree_; }
  int components() const { return ncomp_; }
  const AlgebraPtr& algebra() const { return algebra_; }

  // Coefficient of the separable basis function prod_l basis[t[l]](x_l) in
  // component slot (comp, coeff). t has n entries in [0,5).
  double& coef(int comp, int coeff, const int* t);
  double coef(int comp, int coeff, const int* t) const;

  // Exact L2 norm over the unit torus (constant weighs 1, each oscillatory
  // factor 1/2).
  double l2_norm() const;
  void scale(double c);

  // Sampled values on an arbitrary grid; cost O(npoints) per slot.
  Form sample(const Grid& g) const;

 private:
  int n_, degree_, ncomp_;
  AlgebraPtr algebra_;
  std::vector<double> coefs_;  // [comp][coeff][5^n], last index fastest
  std::size_t tensor_size_;

  std::size_t slot_offset(int comp, int coeff) const;
};

// Deterministic bank of `count` unit-norm random forms of the given degree.
// Bank member i uses seed `seed + i`, so banks are reproducible and stable
// under extension.
std::vector<TrigPolyForm> make_test_bank(int n, int degree, AlgebraPtr algebra,
                                         int count, std::uint64_t seed);

}  // namespace cartanlab
