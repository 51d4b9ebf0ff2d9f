#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cartanlab/bank.hpp"
#include "cartanlab/forms.hpp"

namespace cartanlab {

// g-valued 1-form describing covariant differentiation relative to the fixed
// trivial reference connection d. No gauge orbits anywhere: fields transform
// only under the identity trivialization.
struct ConnectionField {
  Form a;
  explicit ConnectionField(Form f);
};

// Omega = dA + 1/2 [A ^ A]; reduces to dA for abelian coefficients.
Form curvature(const ConnectionField& A);

// D_A w = dw + [A ^ w].
Form covariant_derivative(const ConnectionField& A, const Form& w);

// D*_A w = delta w - (-1)^{(n-k)(k-1)} * [A ^ *w]; the discrete adjoint of
// D_A up to the bracket term's quadrature defect.
Form covariant_coderivative(const ConnectionField& A, const Form& w);

// Integral of |Omega|^2.
double ym_energy(const ConnectionField& A);

// Strong Yang-Mills residual D*_A Omega_A (a 1-form).
Form ym_residual_strong(const ConnectionField& A);

// max over bank phi of |<Omega_A, D_A phi>| / ||phi||_{W^{1,2}}; the bank is
// sampled on A's grid.
double ym_residual_weak(const ConnectionField& A,
                        const std::vector<TrigPolyForm>& bank);

// L1 norm of D_A Omega_A; zero by degree on n = 2.
double bianchi_residual(const ConnectionField& A);

// ||*Omega + Omega||_{L2} on n = 4 (anti-self-dual convention *Omega = -Omega).
double asd_defect(const ConnectionField& A);

// Sobolev W^{1,2} norm: (||a||_2^2 + sum_axis ||D_axis a||_2^2)^{1/2} with
// componentwise forward differences.
double w12_norm(const Form& a);

struct FlowStep {
  int step;
  double energy;
  double residual_norm;
  double step_size;
};

struct FlowTrace {
  std::vector<FlowStep> steps;
  bool converged = false;
};

struct RelaxConfig {
  int max_steps = 500;
  double grad_tol = 1e-8;
  // Initial line-search step, reset every descent step; trials are further
  // capped at the inverse stencil bound of the energy Hessian so accepted
  // steps stay in the regime where every mode contracts.
  double step0 = 0.1;
  double armijo_c = 1e-4;    // sufficient-decrease fraction of the linear model
  int max_halvings = 60;
};

// Gradient descent on ym_energy with Armijo backtracking. The descent
// direction is -ym_residual_strong(A), which is the exact discrete
// half-gradient; decrease is still checked numerically each step. Energy is
// non-increasing across accepted steps. Throws FlowError when the line
// search exhausts its halvings.
std::pair<ConnectionField, FlowTrace> ym_relax(const ConnectionField& A0,
                                               const RelaxConfig& cfg = {});

// Forms binary snapshot plus algebra-label sidecar.
void save_connection(const ConnectionField& A, const std::string& path);
ConnectionField load_connection(const std::string& path);

}  // namespace cartanlab
