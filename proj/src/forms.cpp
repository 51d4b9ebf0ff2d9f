#include "cartanlab/forms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cartanlab/errors.hpp"
#include "cartanlab/kernels.hpp"

namespace cartanlab {

Grid::Grid(int n, std::vector<int> sizes, std::vector<double> periods)
    : n_(n), sizes_(std::move(sizes)), periods_(std::move(periods)) {
  if (n_ < 1 || n_ > 4) throw ArgumentError("grid dimension must be 1..4");
  if (static_cast<int>(sizes_.size()) != n_)
    throw ArgumentError("grid sizes length does not match dimension");
  for (int s : sizes_)
    if (s < 4) throw ArgumentError("grid needs at least 4 cells per axis");
  if (periods_.empty()) periods_.assign(n_, 1.0);
  if (static_cast<int>(periods_.size()) != n_)
    throw ArgumentError("grid periods length does not match dimension");
  for (double L : periods_)
    if (!(L > 0.0)) throw ArgumentError("grid periods must be positive");

  spacing_.resize(n_);
  strides_.assign(n_, 1);
  npoints_ = 1;
  cell_volume_ = 1.0;
  for (int i = 0; i < n_; ++i) {
    spacing_[i] = periods_[i] / sizes_[i];
    cell_volume_ *= spacing_[i];
    npoints_ *= static_cast<std::size_t>(sizes_[i]);
  }
  for (int i = n_ - 2; i >= 0; --i)
    strides_[i] = strides_[i + 1] * static_cast<std::size_t>(sizes_[i + 1]);
}

int binom(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
  return static_cast<int>(r);
}

namespace {

struct MultiIndexTables {
  // [n][k], n in 0..4
  std::vector<std::vector<int>> tab[5][5];
  MultiIndexTables() {
    for (int n = 0; n <= 4; ++n)
      for (int k = 0; k <= n; ++k) {
        std::vector<std::vector<int>>& list = tab[n][k];
        std::vector<int> idx(k);
        // lexicographic enumeration
        std::vector<int> cur(k);
        for (int i = 0; i < k; ++i) cur[i] = i;
        if (k == 0) {
          list.push_back({});
          continue;
        }
        while (true) {
          list.push_back(cur);
          int pos = k - 1;
          while (pos >= 0 && cur[pos] == n - k + pos) --pos;
          if (pos < 0) break;
          ++cur[pos];
          for (int i = pos + 1; i < k; ++i) cur[i] = cur[i - 1] + 1;
        }
      }
  }
};

const MultiIndexTables& tables() {
  static const MultiIndexTables t;
  return t;
}

// parity of the permutation that sorts (I, J) concatenated; requires
// disjoint increasing I and J
int merge_sign(const std::vector<int>& I, const std::vector<int>& J) {
  int inversions = 0;
  for (int a : I)
    for (int b : J)
      if (a > b) ++inversions;
  return (inversions % 2 == 0) ? 1 : -1;
}

}  // namespace

const std::vector<std::vector<int>>& multi_indices(int n, int k) {
  if (n < 0 || n > 4 || k < 0 || k > n)
    throw ArgumentError("multi_indices: degree out of range");
  return tables().tab[n][k];
}

int multi_index_rank(int n, const std::vector<int>& idx) {
  const auto& list = multi_indices(n, static_cast<int>(idx.size()));
  for (std::size_t r = 0; r < list.size(); ++r)
    if (list[r] == idx) return static_cast<int>(r);
  throw ArgumentError("multi_index_rank: not an increasing multi-index");
}

Form::Form(Grid grid, int degree, AlgebraPtr algebra)
    : grid_(std::move(grid)), degree_(degree), algebra_(std::move(algebra)) {
  if (!algebra_) throw ArgumentError("form needs an algebra");
  if (degree_ < 0 || degree_ > grid_.n())
    throw DegreeError("form degree out of range 0..n");
  ncomp_ = binom(grid_.n(), degree_);
  data_.assign(static_cast<std::size_t>(ncomp_) * algebra_->dim() * grid_.npoints(),
               0.0);
}

namespace {

// out += s * forward difference of in along axis (s carries the 1/h factor)
void acc_forward_diff(const Grid& g, int axis, double s, const double* in,
                      double* out) {
  const auto& K = kern::ops();
  const std::size_t stride = g.stride(axis);
  const std::size_t N = static_cast<std::size_t>(g.size(axis));
  const std::size_t block = N * stride;
  const std::size_t nblocks = g.npoints() / block;
  for (std::size_t b = 0; b < nblocks; ++b) {
    const std::size_t base = b * block;
    K.acc_diff(s, in + base + stride, in + base, out + base, (N - 1) * stride);
    K.acc_diff(s, in + base, in + base + (N - 1) * stride,
               out + base + (N - 1) * stride, stride);
  }
}

// out += s * backward difference of in along axis
void acc_backward_diff(const Grid& g, int axis, double s, const double* in,
                       double* out) {
  const auto& K = kern::ops();
  const std::size_t stride = g.stride(axis);
  const std::size_t N = static_cast<std::size_t>(g.size(axis));
  const std::size_t block = N * stride;
  const std::size_t nblocks = g.npoints() / block;
  for (std::size_t b = 0; b < nblocks; ++b) {
    const std::size_t base = b * block;
    K.acc_diff(s, in + base + stride, in + base, out + base + stride,
               (N - 1) * stride);
    K.acc_diff(s, in + base, in + base + (N - 1) * stride, out + base, stride);
  }
}

}  // namespace

Form exterior_derivative(const Form& a) {
  const Grid& g = a.grid();
  const int n = g.n();
  const int k = a.degree();
  if (k >= n) throw DegreeError("exterior_derivative: degree is already top");
  Form out(g, k + 1, a.algebra());
  const int d = a.alg_dim();
  const auto& outs = multi_indices(n, k + 1);
  for (std::size_t Jc = 0; Jc < outs.size(); ++Jc) {
    const std::vector<int>& J = outs[Jc];
    for (int m = 0; m <= k; ++m) {
      const int axis = J[m];
      std::vector<int> I;
      I.reserve(k);
      for (int t = 0; t <= k; ++t)
        if (t != m) I.push_back(J[t]);
      const int Ic = multi_index_rank(n, I);
      const double s = ((m % 2 == 0) ? 1.0 : -1.0) / g.spacing(axis);
      for (int c = 0; c < d; ++c)
        acc_forward_diff(g, axis, s, a.field(Ic, c),
                         out.field(static_cast<int>(Jc), c));
    }
  }
  return out;
}

Form codifferential(const Form& a) {
  const Grid& g = a.grid();
  const int n = g.n();
  const int k = a.degree();
  if (k < 1) throw DegreeError("codifferential: degree must be >= 1");
  Form out(g, k - 1, a.algebra());
  const int d = a.alg_dim();
  const auto& outs = multi_indices(n, k - 1);
  for (std::size_t Ic = 0; Ic < outs.size(); ++Ic) {
    const std::vector<int>& I = outs[Ic];
    for (int axis = 0; axis < n; ++axis) {
      if (std::find(I.begin(), I.end(), axis) != I.end()) continue;
      std::vector<int> J = I;
      J.insert(std::upper_bound(J.begin(), J.end(), axis), axis);
      const int pos = static_cast<int>(
          std::find(J.begin(), J.end(), axis) - J.begin());
      const int Jc = multi_index_rank(n, J);
      const double s = -((pos % 2 == 0) ? 1.0 : -1.0) / g.spacing(axis);
      for (int c = 0; c < d; ++c)
        acc_backward_diff(g, axis, s, a.field(Jc, c),
                          out.field(static_cast<int>(Ic), c));
    }
  }
  return out;
}

Form hodge_star(const Form& a) {
  const Grid& g = a.grid();
  const int n = g.n();
  const int k = a.degree();
  Form out(g, n - k, a.algebra());
  const int d = a.alg_dim();
  const auto& ins = multi_indices(n, k);
  const auto& K = kern::ops();
  for (std::size_t Ic = 0; Ic < ins.size(); ++Ic) {
    const std::vector<int>& I = ins[Ic];
    std::vector<int> comp;
    comp.reserve(n - k);
    for (int axis = 0; axis < n; ++axis)
      if (std::find(I.begin(), I.end(), axis) == I.end()) comp.push_back(axis);
    const int sign = merge_sign(I, comp);
    const int Oc = multi_index_rank(n, comp);
    for (int c = 0; c < d; ++c)
      K.axpy(sign, a.field(static_cast<int>(Ic), c), out.field(Oc, c),
             g.npoints());
  }
  return out;
}

Form wedge_bracket(const Form& a, const Form& b) {
  if (a.grid() != b.grid() || a.algebra()->label() != b.algebra()->label())
    throw ArgumentError("wedge_bracket: grid or algebra mismatch");
  const Grid& g = a.grid();
  const int n = g.n();
  const int p = a.degree();
  const int q = b.degree();
  if (p + q > n) throw ArgumentError("wedge_bracket: degree overflow");
  Form out(g, p + q, a.algebra());
  const auto& terms = a.algebra()->terms();
  if (terms.empty()) return out;  // abelian
  const auto& Is = multi_indices(n, p);
  const auto& Js = multi_indices(n, q);
  const auto& K = kern::ops();
  for (std::size_t Ic = 0; Ic < Is.size(); ++Ic) {
    for (std::size_t Jc = 0; Jc < Js.size(); ++Jc) {
      const std::vector<int>& I = Is[Ic];
      const std::vector<int>& J = Js[Jc];
      bool disjoint = true;
      for (int x : I)
        if (std::find(J.begin(), J.end(), x) != J.end()) {
          disjoint = false;
          break;
        }
      if (!disjoint) continue;
      std::vector<int> merged(I);
      merged.insert(merged.end(), J.begin(), J.end());
      std::sort(merged.begin(), merged.end());
      const int sign = merge_sign(I, J);
      const int Kc = multi_index_rank(n, merged);
      for (const BracketTerm& t : terms)
        K.muladd(sign * t.c, a.field(static_cast<int>(Ic), t.i),
                 b.field(static_cast<int>(Jc), t.j), out.field(Kc, t.k),
                 g.npoints());
    }
  }
  return out;
}

double pairing(const Form& a, const Form& b) {
  if (!a.same_shape(b)) throw ArgumentError("pairing: operand shape mismatch");
  const auto& K = kern::ops();
  double s = 0.0;
  const int nf = a.field_count();
  for (int f = 0; f < nf; ++f)
    s += K.dot(a.data().data() + static_cast<std::size_t>(f) * a.field_len(),
               b.data().data() + static_cast<std::size_t>(f) * b.field_len(),
               a.field_len());
  return s * a.grid().cell_volume();
}

std::vector<double> pointwise_magnitude_sq(const Form& a) {
  std::vector<double> buf(a.field_len(), 0.0);
  const auto& K = kern::ops();
  const int nf = a.field_count();
  for (int f = 0; f < nf; ++f)
    K.acc_sq(a.data().data() + static_cast<std::size_t>(f) * a.field_len(),
             buf.data(), a.field_len());
  return buf;
}

double lp_norm(const Form& a, double p) {
  if (!(p >= 1.0)) throw ArgumentError("lp_norm: p must be >= 1");
  std::vector<double> buf = pointwise_magnitude_sq(a);
  if (std::isinf(p)) {
    double mx = 0.0;
    for (double v : buf) mx = std::max(mx, v);
    return std::sqrt(mx);
  }
  const double half_p = 0.5 * p;
  for (double& v : buf) v = std::pow(v, half_p);
  const double total = kern::ops().sum(buf.data(), buf.size());
  return std::pow(total * a.grid().cell_volume(), 1.0 / p);
}

double leibniz_residual(const Form& a, const Form& b) {
  const int p = a.degree();
  const int q = b.degree();
  Form lhs = exterior_derivative(wedge_bracket(a, b));
  Form r1 = wedge_bracket(exterior_derivative(a), b);
  Form r2 = wedge_bracket(a, exterior_derivative(b));
  const double sgn = (((p * q) % 2) == 0) ? 1.0 : -1.0;
  form_axpy(-1.0, r1, lhs);
  form_axpy(-sgn, r2, lhs);
  return lp_norm(lhs, 2.0);
}

void form_axpy(double c, const Form& x, Form& y) {
  if (!x.same_shape(y)) throw ArgumentError("form_axpy: shape mismatch");
  kern::ops().axpy(c, x.data().data(), y.data().data(), x.data().size());
}

void form_scale(double c, Form& x) {
  kern::ops().scale(c, x.data().data(), x.data().size());
}

Form form_add(const Form& a, const Form& b) {
  Form out = a;
  form_axpy(1.0, b, out);
  return out;
}

Form form_sub(const Form& a, const Form& b) {
  Form out = a;
  form_axpy(-1.0, b, out);
  return out;
}

double form_dot(const Form& a, const Form& b) {
  if (!a.same_shape(b)) throw ArgumentError("form_dot: shape mismatch");
  return kern::ops().dot(a.data().data(), b.data().data(), a.data().size());
}

double form_l2(const Form& a) {
  return std::sqrt(std::max(0.0, form_dot(a, a)));
}

std::vector<double> component_means(const Form& a) {
  const auto& K = kern::ops();
  std::vector<double> means(a.field_count());
  for (int f = 0; f < a.field_count(); ++f)
    means[f] =
        K.sum(a.data().data() + static_cast<std::size_t>(f) * a.field_len(),
              a.field_len()) /
        static_cast<double>(a.field_len());
  return means;
}

Form componentwise_mean_form(const Form& a) {
  Form out(a.grid(), a.degree(), a.algebra());
  const std::vector<double> means = component_means(a);
  for (int f = 0; f < a.field_count(); ++f) {
    double* dst = out.data().data() + static_cast<std::size_t>(f) * a.field_len();
    std::fill(dst, dst + a.field_len(), means[f]);
  }
  return out;
}

void subtract_component_means(Form& a) {
  const std::vector<double> means = component_means(a);
  for (int f = 0; f < a.field_count(); ++f) {
    double* dst = a.data().data() + static_cast<std::size_t>(f) * a.field_len();
    const double m = means[f];
    for (std::size_t i = 0; i < a.field_len(); ++i) dst[i] -= m;
  }
}

Form componentwise_diff(const Form& a, int axis) {
  const Grid& g = a.grid();
  if (axis < 0 || axis >= g.n()) throw ArgumentError("componentwise_diff: bad axis");
  Form out(g, a.degree(), a.algebra());
  const double s = 1.0 / g.spacing(axis);
  for (int c = 0; c < a.ncomp(); ++c)
    for (int d = 0; d < a.alg_dim(); ++d)
      acc_forward_diff(g, axis, s, a.field(c, d), out.field(c, d));
  return out;
}

namespace {

void add_separable_rec(double* out, const Grid& g, int axis, double c,
                       const std::vector<std::vector<double>>& tabs,
                       std::size_t base) {
  const int n = g.n();
  if (axis == n - 1) {
    kern::ops().axpy(c, tabs[axis].data(), out + base,
                     static_cast<std::size_t>(g.size(axis)));
    return;
  }
  for (int i = 0; i < g.size(axis); ++i)
    add_separable_rec(out, g, axis + 1, c * tabs[axis][i], tabs,
                      base + g.stride(axis) * static_cast<std::size_t>(i));
}

}  // namespace

void add_separable(Form& out, int comp, int coeff, double c,
                   const std::vector<std::vector<double>>& axis_tables) {
  const Grid& g = out.grid();
  if (static_cast<int>(axis_tables.size()) != g.n())
    throw ArgumentError("add_separable: need one table per axis");
  for (int i = 0; i < g.n(); ++i)
    if (static_cast<int>(axis_tables[i].size()) != g.size(i))
      throw ArgumentError("add_separable: table length mismatch");
  add_separable_rec(out.field(comp, coeff), g, 0, c, axis_tables, 0);
}

}  // namespace cartanlab
