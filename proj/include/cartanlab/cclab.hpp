#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cartanlab/bank.hpp"
#include "cartanlab/forms.hpp"
#include "cartanlab/gauge.hpp"

namespace cartanlab {

// Geometric schedule eps_k = eps0 * ratio^k, strictly decreasing.
struct EpsilonSchedule {
  double eps0 = 0.25;
  double ratio = 0.5;
  int count = 6;
  std::vector<double> values() const;
};

// Grid refinement coupled to the oscillation scale: N(eps) = max(base,
// ceil(cells_per_eps / eps)), constrained to resolve at least 8 cells per
// oscillation period.
struct GridPolicy {
  int base = 16;
  double cells_per_eps = 16.0;
  int resolve(double eps) const;
};

// base + sin(2 pi x_axis / eps) * amplitude sampled on g. The wavelength must
// divide the period and the grid must resolve it per the 8-cell rule.
Form gen_oscillatory(const TrigPolyForm& base, const TrigPolyForm& amplitude,
                     int axis, double eps, const Grid& g);

// eps^{-n/p} bump((x - center)/eps) in one (comp, coeff) slot, with
// bump(y) = prod_l cos^2(pi y_l) supported on the centered eps-cube. The L^p
// norm is eps-independent by construction.
Form gen_concentration(const Grid& g, int degree, AlgebraPtr algebra, int comp,
                       int coeff, double eps, double p,
                       const std::vector<double>& center);

// A family A_eps = base + sum_t eps^{power_t} sin(2 pi x_{axis_t}/eps) amp_t
// with weak limit `base`. Band-limited parts evaluate exactly on any grid.
struct OscTerm {
  TrigPolyForm amplitude;
  int axis = 0;
  double eps_power = 0.0;
};

class SequenceFamily {
 public:
  static SequenceFamily constant(TrigPolyForm base);
  static SequenceFamily oscillatory(TrigPolyForm base, TrigPolyForm amplitude,
                                    int axis, double eps_power = 0.0);
  SequenceFamily& add_term(TrigPolyForm amplitude, int axis, double eps_power = 0.0);

  Form member(double eps, const Grid& g) const;
  Form limit(const Grid& g) const;

  int n() const { return base_.n(); }
  int degree() const { return base_.degree(); }
  const AlgebraPtr& algebra() const { return base_.algebra(); }
  const std::vector<OscTerm>& terms() const { return terms_; }

 private:
  explicit SequenceFamily(TrigPolyForm base) : base_(std::move(base)) {}
  TrigPolyForm base_;
  std::vector<OscTerm> terms_;
};

// Shared result shape for the limit experiments. "Weak convergence" is
// operationalized as convergence of pairings against a fixed finite
// band-limited bank; every emitted report states that surrogate explicitly.
struct LimitReport {
  std::vector<double> epsilons;
  std::vector<int> grid_sizes;
  std::vector<std::vector<double>> pairings;  // [eps][bank member]
  std::vector<double> targets;                // [bank member]
  std::vector<double> fitted;                 // [bank member]
  std::vector<double> gaps;                   // [bank member]
  std::vector<double> surrogate_norms;        // [eps]
  std::vector<double> lp_bounds;              // [eps]
  std::vector<double> member_residuals;       // [eps], ym-weak only
  double limit_residual = 0.0;                // ym-weak only
  double max_gap = 0.0;
  double scale = 0.0;
  double fit_residual = 0.0;
  bool hypothesis_ok = true;
  std::string verdict;  // CONVERGES | FAILS | PASS
  std::string note;
};

// Least-squares intercept of vals ~ a + b*eps over the last `points` entries;
// returns {a, rms residual}.
std::pair<double, double> linear_eps_fit(const std::vector<double>& eps,
                                         const std::vector<double>& vals,
                                         int points);

// Fills fitted/gaps/max_gap/scale/fit_residual from epsilons, pairings and
// targets; scale is the largest pairing or target magnitude (floored).
void fit_report_columns(LimitReport& rep, int fit_points);

// True when no entry exceeds 1.5x the head of the sequence (round-off floor).
bool bounded_norm_sequence(const std::vector<double>& v);

// Runs fn(0), ..., fn(count-1) across up to `threads` workers.  Jobs must
// write only their own slot so results are deterministic for any thread
// count; the first exception is rethrown on the caller.
void run_indexed_jobs(int count, int threads, const std::function<void(int)>& fn);

struct ExperimentConfig {
  EpsilonSchedule schedule;
  GridPolicy policy;
  double tol_rel = 0.05;  // gap tolerance as a fraction of the pairing scale
  int fit_points = 4;
  int threads = 1;
};

// Pairings of [A_eps ^ B_eps] against the bank vs. the bracket of the limits;
// confinement surrogate is the negative-Sobolev norm of d(member - limit),
// worst factor. Verdict CONVERGES requires small gaps AND satisfied
// hypothesis surrogates (bounded norms, decaying confinement).
LimitReport div_curl_experiment(const SequenceFamily& famA,
                                const SequenceFamily& famB,
                                const std::vector<TrigPolyForm>& bank,
                                const ExperimentConfig& cfg);

// Pairings of the curvature functional <A_eps, delta phi> +
// 1/2 <[A_eps ^ A_eps], phi> vs. the same functional at the limit; the
// measure-bound surrogate is the L1 norm of the member curvature.
LimitReport curvature_weak_limit_experiment(const SequenceFamily& fam,
                                            const std::vector<TrigPolyForm>& bank,
                                            const ExperimentConfig& cfg);

struct YmWeakConfig {
  EpsilonSchedule schedule{0.125, 0.5, 4};
  GridPolicy policy{64, 8.0};
  int base_grid = 8;     // restriction target for limit extraction
  int relax_steps = 15;  // partial re-relaxation per member
  double relax_step0 = 0.05;
  double tol_abs = 1e-4;
  int fit_points = 4;
  int threads = 1;
};

// Members are fam.member(eps) re-relaxed for a configured number of steps;
// the limit connection is extracted by box-restriction to the base grid and
// a linear-in-eps fit. PASS iff the limit's weak residual is at most
// max(2 * worst member residual, tol_abs).
LimitReport ym_weak_continuity_experiment(const SequenceFamily& fam,
                                          const std::vector<TrigPolyForm>& bank,
                                          const YmWeakConfig& cfg);

// Box average onto a coarser grid; every coarse cell averages the matching
// block of fine cells. Sizes must divide.
Form restrict_box(const Form& fine, const Grid& coarse);

struct EquiIntCurve {
  std::vector<double> fractions;
  std::vector<double> mass;  // top |S| <= s*|M| cell mass of |a|^p
};

// rho(s) = max over cell sets S, |S| <= s |M|, of the |a|^p mass on S;
// computed exactly by descending sort and prefix sums.
EquiIntCurve equi_integrability_modulus(const Form& a, double p,
                                        const std::vector<double>& fractions);

}  // namespace cartanlab
