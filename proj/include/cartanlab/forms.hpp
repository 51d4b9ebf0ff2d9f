#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cartanlab/algebra.hpp"

namespace cartanlab {

/// Flat periodic lattice on the torus T^n, n in 1..4.  Point index is
/// row-major with the last axis fastest, so stride(n-1) == 1.
class Grid {
 public:
  Grid() = default;
  Grid(int n, std::vector<int> sizes, std::vector<double> periods = {});

  int n() const { return n_; }
  int size(int axis) const { return sizes_[axis]; }
  const std::vector<int>& sizes() const { return sizes_; }
  double period(int axis) const { return periods_[axis]; }
  double spacing(int axis) const { return spacing_[axis]; }
  std::size_t npoints() const { return npoints_; }
  std::size_t stride(int axis) const { return strides_[axis]; }
  double cell_volume() const { return cell_volume_; }
  /// Coordinate of grid point index i along `axis` (i in 0..N-1).
  double coord(int axis, int i) const { return spacing_[axis] * i; }

  bool operator==(const Grid& o) const {
    return n_ == o.n_ && sizes_ == o.sizes_ && periods_ == o.periods_;
  }
  bool operator!=(const Grid& o) const { return !(*this == o); }

 private:
  int n_ = 0;
  std::vector<int> sizes_;
  std::vector<double> periods_;
  std::vector<double> spacing_;
  std::vector<std::size_t> strides_;
  std::size_t npoints_ = 0;
  double cell_volume_ = 1.0;
};

int binom(int n, int k);

/// Strictly increasing multi-indices of length k from {0..n-1}, lexicographic.
const std::vector<std::vector<int>>& multi_indices(int n, int k);
int multi_index_rank(int n, const std::vector<int>& idx);

/// Lie-algebra-valued k-form sampled at grid points.  Storage is field-major:
/// for each (component I, algebra coefficient a) a contiguous scalar lattice
/// field, so stencil and reduction kernels stream over plain arrays.
class Form {
 public:
  Form() = default;
  Form(Grid grid, int degree, AlgebraPtr algebra);  // zero-filled

  const Grid& grid() const { return grid_; }
  int degree() const { return degree_; }
  int ncomp() const { return ncomp_; }
  const AlgebraPtr& algebra() const { return algebra_; }
  int alg_dim() const { return algebra_->dim(); }
  std::size_t field_len() const { return grid_.npoints(); }
  int field_count() const { return ncomp_ * algebra_->dim(); }

  double* field(int comp, int coeff) {
    return data_.data() + (static_cast<std::size_t>(comp) * algebra_->dim() + coeff) *
                              grid_.npoints();
  }
  const double* field(int comp, int coeff) const {
    return data_.data() + (static_cast<std::size_t>(comp) * algebra_->dim() + coeff) *
                              grid_.npoints();
  }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Form& o) const {
    return grid_ == o.grid_ && degree_ == o.degree_ &&
           algebra_->label() == o.algebra_->label();
  }

 private:
  Grid grid_;
  int degree_ = 0;
  int ncomp_ = 0;
  AlgebraPtr algebra_;
  std::vector<double> data_;
};

/// Forward-difference exterior derivative; d(d(x)) == 0 exactly.
Form exterior_derivative(const Form& a);

/// Exact matrix adjoint of exterior_derivative under the discrete inner
/// product (backward differences with signs).
Form codifferential(const Form& a);

/// Pointwise index permutation with orientation sign for the flat metric:
/// *(dx^I) = sign(I, I^c) dx^{I^c}.
Form hodge_star(const Form& a);

/// Shuffle-sum wedge with values combined through the bracket.
Form wedge_bracket(const Form& a, const Form& b);

/// Discrete integral of the pointwise inner product, times cell volume.
double pairing(const Form& a, const Form& b);

/// Discrete L^p norm of the pointwise magnitude |a|; p = infinity allowed.
double lp_norm(const Form& a, double p);

/// || d[a^b] - [da^b] - (-1)^{pq} [a^db] ||_L2 (O(h), not exact).
double leibniz_residual(const Form& a, const Form& b);

// In-place linear algebra over the raw coefficient arrays.
void form_axpy(double c, const Form& x, Form& y);
void form_scale(double c, Form& x);
Form form_add(const Form& a, const Form& b);
Form form_sub(const Form& a, const Form& b);
/// Unweighted dot over all stored values (pairing == dot * cell volume).
double form_dot(const Form& a, const Form& b);
double form_l2(const Form& a);

/// Per-field means, index order (component, coefficient).
std::vector<double> component_means(const Form& a);
Form componentwise_mean_form(const Form& a);
void subtract_component_means(Form& a);

/// buf[p] = sum over fields of value^2 at point p.
std::vector<double> pointwise_magnitude_sq(const Form& a);

/// Componentwise forward difference along one axis, scaled 1/h; degree is
/// unchanged (this is a per-field stencil, not the exterior derivative).
Form componentwise_diff(const Form& a, int axis);

/// out.field(comp,coeff) += c * prod_axis table[axis][x_axis]; tables are
/// per-axis profiles of length N_axis.  Lets generators build separable
/// fields in O(npoints).
void add_separable(Form& out, int comp, int coeff, double c,
                   const std::vector<std::vector<double>>& axis_tables);

}  // namespace cartanlab
