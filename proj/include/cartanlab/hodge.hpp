#pragma once

#include "cartanlab/forms.hpp"

namespace cartanlab {

struct HodgeSolveConfig {
  double rel_tol = 1e-10;
  // 0 selects the dimension-based default (10x the stored scalar count),
  // which is a hard cap; CG needs far fewer iterations in practice.
  int max_iter = 0;
  // lambda in (lambda I + Delta) x = rhs. 0 solves the singular Laplace
  // problem on mean-free fields.
  double shift = 0.0;
};

struct HodgeDecomposition {
  Form psi;       // (k-1)-form potential of the exact part d(psi)
  Form rho;       // co-exact part
  Form harmonic;  // constant-component part
  double reconstruction_residual = 0.0;
};

// d(delta a) + delta(d a), with the undefined half dropped at k = 0 and
// k = n. Acts componentwise as the (2n+1)-point second-difference stencil;
// kernel = constant-component forms.
Form laplacian(const Form& a);

// Conjugate gradients for (shift I + Delta) x = rhs. With shift = 0 the
// right-hand side is projected onto mean-free fields and the solution is
// returned mean-free. Throws SolverError on non-convergence.
Form solve_laplace(const Form& rhs, const HodgeSolveConfig& cfg = {});

// a = d(psi) + rho + harmonic with rho co-exact and the three parts mutually
// orthogonal. Requires 1 <= k <= n.
HodgeDecomposition hodge_decompose(const Form& a, const HodgeSolveConfig& cfg = {});

// Discrete H^{-1} surrogate: pairing(a, (I + Delta)^{-1} a)^{1/2}. The unit
// shift sidesteps the harmonic kernel; equivalent to the mean-free W^{-1,2}
// norm, not equal.
double neg_sobolev_norm(const Form& a, const HodgeSolveConfig& cfg = {});

}  // namespace cartanlab
