#include "cartanlab/hodge.hpp"

#include <cmath>
#include <utility>

#include "cartanlab/errors.hpp"
#include "cartanlab/kernels.hpp"

namespace cartanlab {
namespace {

Form apply_operator(const Form& x, double shift) {
  Form out = laplacian(x);
  if (shift != 0.0) form_axpy(shift, x, out);
  return out;
}

int default_max_iter(const Form& rhs) {
  const std::size_t dof = rhs.field_count() * rhs.field_len();
  const std::size_t cap = 10 * dof;
  return cap > 1000000 ? 1000000 : static_cast<int>(cap);
}

}  // namespace

Form laplacian(const Form& a) {
  const int k = a.degree();
  const int n = a.grid().n();
  if (k == 0) return codifferential(exterior_derivative(a));
  if (k == n) return exterior_derivative(codifferential(a));
  Form out = codifferential(exterior_derivative(a));
  Form dd = exterior_derivative(codifferential(a));
  form_axpy(1.0, dd, out);
  return out;
}

Form solve_laplace(const Form& rhs, const HodgeSolveConfig& cfg) {
  if (cfg.rel_tol <= 0.0) throw ArgumentError("solve_laplace: rel_tol must be positive");
  Form b = rhs;
  if (cfg.shift == 0.0) subtract_component_means(b);

  const double bnorm = std::sqrt(form_dot(b, b));
  Form x(rhs.grid(), rhs.degree(), rhs.algebra());
  if (bnorm == 0.0) return x;

  const int max_iter = cfg.max_iter > 0 ? cfg.max_iter : default_max_iter(rhs);
  Form r = b;
  Form p = r;
  double rs = form_dot(r, r);
  double final_res = std::sqrt(rs);
  for (int it = 0; it < max_iter; ++it) {
    Form ap = apply_operator(p, cfg.shift);
    const double denom = form_dot(p, ap);
    if (denom <= 0.0)
      throw SolverError("solve_laplace: operator lost positivity", final_res / bnorm, it);
    const double alpha = rs / denom;
    form_axpy(alpha, p, x);
    form_axpy(-alpha, ap, r);
    const double rs_new = form_dot(r, r);
    final_res = std::sqrt(rs_new);
    if (final_res <= cfg.rel_tol * bnorm) return x;
    form_scale(rs_new / rs, p);
    form_axpy(1.0, r, p);
    rs = rs_new;
  }
  throw SolverError("solve_laplace: no convergence", final_res / bnorm, max_iter);
}

HodgeDecomposition hodge_decompose(const Form& a, const HodgeSolveConfig& cfg) {
  const int k = a.degree();
  const int n = a.grid().n();
  if (k < 1) throw DegreeError("hodge_decompose: degree must be >= 1");

  HodgeDecomposition dec;
  dec.harmonic = componentwise_mean_form(a);
  Form ap = form_sub(a, dec.harmonic);

  Form w = solve_laplace(ap, cfg);
  dec.psi = codifferential(w);
  if (k < n) {
    dec.rho = codifferential(exterior_derivative(w));
  } else {
    dec.rho = Form(a.grid(), k, a.algebra());
  }

  Form recon = exterior_derivative(dec.psi);
  form_axpy(1.0, dec.rho, recon);
  form_axpy(1.0, dec.harmonic, recon);
  Form diff = form_sub(a, recon);
  dec.reconstruction_residual = std::sqrt(form_dot(diff, diff) * a.grid().cell_volume());
  return dec;
}

double neg_sobolev_norm(const Form& a, const HodgeSolveConfig& cfg) {
  HodgeSolveConfig shifted = cfg;
  shifted.shift = 1.0;
  Form x = solve_laplace(a, shifted);
  const double q = pairing(a, x);
  return q > 0.0 ? std::sqrt(q) : 0.0;
}

}  // namespace cartanlab
