#include "cartanlab/gauge.hpp"

#include <cmath>

#include "cartanlab/errors.hpp"
#include "cartanlab/serialize.hpp"

namespace cartanlab {

ConnectionField::ConnectionField(Form f) : a(std::move(f)) {
  if (a.degree() != 1) throw DegreeError("ConnectionField: the potential must be a 1-form");
}

Form curvature(const ConnectionField& A) {
  if (A.a.grid().n() < 2) throw DegreeError("curvature: needs n >= 2");
  Form omega = exterior_derivative(A.a);
  Form br = wedge_bracket(A.a, A.a);
  form_axpy(0.5, br, omega);
  return omega;
}

Form covariant_derivative(const ConnectionField& A, const Form& w) {
  Form out = exterior_derivative(w);
  Form br = wedge_bracket(A.a, w);
  form_axpy(1.0, br, out);
  return out;
}

Form covariant_coderivative(const ConnectionField& A, const Form& w) {
  const int k = w.degree();
  const int n = w.grid().n();
  if (k < 1) throw DegreeError("covariant_coderivative: degree must be >= 1");
  Form out = codifferential(w);
  Form tw = hodge_star(wedge_bracket(A.a, hodge_star(w)));
  const int exp = (n - k) * (k - 1);
  const double sign = (exp % 2 == 0) ? 1.0 : -1.0;
  form_axpy(-sign, tw, out);
  return out;
}

double ym_energy(const ConnectionField& A) {
  const double nrm = lp_norm(curvature(A), 2.0);
  return nrm * nrm;
}

Form ym_residual_strong(const ConnectionField& A) {
  return covariant_coderivative(A, curvature(A));
}

double ym_residual_weak(const ConnectionField& A,
                        const std::vector<TrigPolyForm>& bank) {
  if (bank.empty()) throw ArgumentError("ym_residual_weak: empty test bank");
  const Form omega = curvature(A);
  double worst = 0.0;
  for (const TrigPolyForm& tp : bank) {
    if (tp.degree() != 1) throw ArgumentError("ym_residual_weak: bank must hold 1-forms");
    Form phi = tp.sample(A.a.grid());
    if (phi.algebra()->label() != A.a.algebra()->label())
      throw ArgumentError("ym_residual_weak: algebra mismatch");
    const double num = std::fabs(pairing(omega, covariant_derivative(A, phi)));
    const double den = w12_norm(phi);
    if (den > 0.0 && num / den > worst) worst = num / den;
  }
  return worst;
}

double bianchi_residual(const ConnectionField& A) {
  if (A.a.grid().n() < 3) return 0.0;
  return lp_norm(covariant_derivative(A, curvature(A)), 1.0);
}

double asd_defect(const ConnectionField& A) {
  if (A.a.grid().n() != 4) throw DegreeError("asd_defect: needs n = 4");
  Form omega = curvature(A);
  Form starred = hodge_star(omega);
  form_axpy(1.0, omega, starred);
  return lp_norm(starred, 2.0);
}

double w12_norm(const Form& a) {
  const double vol = a.grid().cell_volume();
  double total = form_dot(a, a) * vol;
  for (int axis = 0; axis < a.grid().n(); ++axis) {
    Form da = componentwise_diff(a, axis);
    total += form_dot(da, da) * vol;
  }
  return std::sqrt(total);
}

std::pair<ConnectionField, FlowTrace> ym_relax(const ConnectionField& A0,
                                               const RelaxConfig& cfg) {
  if (cfg.max_steps < 1) throw ArgumentError("ym_relax: max_steps must be >= 1");
  const double vol = A0.a.grid().cell_volume();

  ConnectionField A = A0;
  FlowTrace trace;
  double energy = ym_energy(A);

  // Stencil bound on the quadratic part of the energy Hessian. Steps beyond
  // 1/lam_ub can pass the aggregate Armijo test while still amplifying the
  // grid's stiffest modes, which slowly pumps rounding noise into the field;
  // capping the trial step keeps every mode in the contractive regime.
  double lam_ub = 0.0;
  for (int ax = 0; ax < A0.a.grid().n(); ++ax) {
    const double ih = 2.0 / A0.a.grid().spacing(ax);
    lam_ub += ih * ih;
  }
  const double t_start = std::min(cfg.step0, 1.0 / lam_ub);

  for (int step = 0; step < cfg.max_steps; ++step) {
    Form grad = ym_residual_strong(A);
    const double grad_sq = form_dot(grad, grad) * vol;
    const double grad_norm = std::sqrt(grad_sq);
    if (grad_norm <= cfg.grad_tol) {
      trace.steps.push_back({step, energy, grad_norm, 0.0});
      trace.converged = true;
      return {A, trace};
    }

    // E(A - t*grad) has slope -2*grad_sq at t = 0.
    double t = t_start;
    bool accepted = false;
    for (int h = 0; h <= cfg.max_halvings; ++h, t *= 0.5) {
      Form cand = A.a;
      form_axpy(-t, grad, cand);
      ConnectionField Ac(std::move(cand));
      const double cand_energy = ym_energy(Ac);
      if (cand_energy <= energy - cfg.armijo_c * t * 2.0 * grad_sq) {
        A = std::move(Ac);
        energy = cand_energy;
        trace.steps.push_back({step, energy, grad_norm, t});
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      std::vector<double> energies;
      energies.reserve(trace.steps.size() + 1);
      energies.push_back(ym_energy(A0));
      for (const FlowStep& s : trace.steps) energies.push_back(s.energy);
      throw FlowError("ym_relax: line search failed", std::move(energies));
    }
  }
  return {A, trace};
}

void save_connection(const ConnectionField& A, const std::string& path) {
  write_form_binary(A.a, path);
  write_algebra_sidecar(path, A.a.algebra()->label());
}

ConnectionField load_connection(const std::string& path) {
  AlgebraPtr alg = LieAlgebra::make(read_algebra_sidecar(path));
  return ConnectionField(read_form_binary(path, std::move(alg)));
}

}  // namespace cartanlab
