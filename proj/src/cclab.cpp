#include "cartanlab/cclab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

#include "cartanlab/errors.hpp"
#include "cartanlab/hodge.hpp"
#include "cartanlab/kernels.hpp"

namespace cartanlab {
namespace {

constexpr double kTwoPi = 6.28318530717958647692528676655900577;

// Deterministic regardless of thread count: job i writes only slot i.
void run_indexed(int count, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  int k = std::min(threads, count);
  pool.reserve(k);
  for (int t = 0; t < k; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Multiplies every field of `a` pointwise by profile[x_axis].
void scale_by_axis_profile(Form& a, int axis, const std::vector<double>& profile) {
  const Grid& g = a.grid();
  const std::size_t stride = g.stride(axis);
  const int nax = g.size(axis);
  const std::size_t block = stride * static_cast<std::size_t>(nax);
  const std::size_t nblocks = g.npoints() / block;
  const auto& K = kern::ops();
  for (int f = 0; f < a.field_count(); ++f) {
    double* base = a.data().data() + static_cast<std::size_t>(f) * g.npoints();
    for (std::size_t b = 0; b < nblocks; ++b)
      for (int i = 0; i < nax; ++i)
        K.scale(profile[i], base + b * block + i * stride, stride);
  }
}

std::vector<double> oscillation_profile(const Grid& g, int axis, double eps) {
  if (axis < 0 || axis >= g.n()) throw ArgumentError("oscillation axis out of range");
  if (!(eps > 0.0)) throw ConfigError("oscillation scale must be positive");
  const double waves = g.period(axis) / eps;
  if (std::abs(waves - std::round(waves)) > 1e-9 * waves)
    throw ConfigError("oscillation wavelength must divide the period");
  if (g.size(axis) * eps < 8.0 * g.period(axis) - 1e-9)
    throw ConfigError("grid does not resolve the oscillation (need 8 cells per wave)");
  std::vector<double> profile(g.size(axis));
  for (int i = 0; i < g.size(axis); ++i)
    profile[i] = std::sin(kTwoPi * g.coord(axis, i) / eps);
  return profile;
}

double column_max_abs(const std::vector<std::vector<double>>& rows, int col) {
  double m = 0.0;
  for (const auto& r : rows) m = std::max(m, std::abs(r[col]));
  return m;
}

// Bounded-sequence surrogate: no later entry grows past 1.5x the head of the
// sequence (plus a round-off floor).
bool bounded_sequence(const std::vector<double>& v) {
  if (v.empty()) return true;
  double head = v[0];
  if (v.size() > 1) head = std::max(head, v[1]);
  const double cap = 1.5 * head + 1e-12;
  for (double x : v)
    if (x > cap) return false;
  return true;
}

// Decay surrogate for confinement norms: the tail must drop to half the head.
bool decaying_sequence(const std::vector<double>& v) {
  if (v.size() < 2) return true;
  return v.back() <= 0.5 * v.front() + 1e-12;
}

std::string format_gap_note(double max_gap, double scale, double tol_rel) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "max pairing gap %.3g vs tolerance %.3g (%.0f%% of scale %.3g)",
                max_gap, tol_rel * scale, 100.0 * tol_rel, scale);
  return std::string(buf);
}

void fit_columns(LimitReport& rep, int fit_points) {
  const int nb = static_cast<int>(rep.targets.size());
  rep.fitted.assign(nb, 0.0);
  rep.gaps.assign(nb, 0.0);
  rep.fit_residual = 0.0;
  for (int j = 0; j < nb; ++j) {
    std::vector<double> col(rep.epsilons.size());
    for (std::size_t i = 0; i < rep.epsilons.size(); ++i) col[i] = rep.pairings[i][j];
    auto [limit, rms] = linear_eps_fit(rep.epsilons, col, fit_points);
    rep.fitted[j] = limit;
    rep.gaps[j] = std::abs(limit - rep.targets[j]);
    rep.fit_residual = std::max(rep.fit_residual, rms);
  }
  rep.max_gap = 0.0;
  for (double gp : rep.gaps) rep.max_gap = std::max(rep.max_gap, gp);
  rep.scale = 1e-12;
  for (double t : rep.targets) rep.scale = std::max(rep.scale, std::abs(t));
  for (int j = 0; j < nb; ++j) rep.scale = std::max(rep.scale, column_max_abs(rep.pairings, j));
}

void check_bank(const std::vector<TrigPolyForm>& bank, int n, int degree,
                const AlgebraPtr& algebra) {
  if (bank.empty()) throw ArgumentError("test bank is empty");
  for (const auto& phi : bank) {
    if (phi.n() != n || phi.degree() != degree)
      throw ArgumentError("test bank member has mismatched shape");
    if (phi.algebra()->label() != algebra->label())
      throw ArgumentError("test bank member has mismatched coefficients");
  }
}

// Confinement of the exact parts: H^{-1}-type norm of d(member - limit),
// or of the plain difference at top degree.
double confinement_surrogate(const Form& member, const Form& limit) {
  Form diff = form_sub(member, limit);
  if (diff.degree() < diff.grid().n()) diff = exterior_derivative(diff);
  return neg_sobolev_norm(diff);
}

}  // namespace

void fit_report_columns(LimitReport& rep, int fit_points) { fit_columns(rep, fit_points); }

void run_indexed_jobs(int count, int threads, const std::function<void(int)>& fn) {
  run_indexed(count, threads, fn);
}

bool bounded_norm_sequence(const std::vector<double>& v) { return bounded_sequence(v); }

std::vector<double> EpsilonSchedule::values() const {
  if (!(eps0 > 0.0)) throw ConfigError("schedule eps0 must be positive");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("schedule ratio must lie in (0,1)");
  if (count < 1) throw ConfigError("schedule needs at least one term");
  std::vector<double> v(count);
  double e = eps0;
  for (int k = 0; k < count; ++k, e *= ratio) v[k] = e;
  return v;
}

int GridPolicy::resolve(double eps) const {
  if (!(eps > 0.0)) throw ConfigError("epsilon must be positive");
  if (base < 4) throw ConfigError("grid policy base must be at least 4");
  double need = cells_per_eps / eps;
  int n = base;
  if (need > n) n = static_cast<int>(std::ceil(need - 1e-9));
  if (n * eps < 8.0 - 1e-9)
    throw ConfigError("grid policy leaves the oscillation unresolved (N*eps < 8)");
  return n;
}

Form gen_oscillatory(const TrigPolyForm& base, const TrigPolyForm& amplitude,
                     int axis, double eps, const Grid& g) {
  return SequenceFamily::oscillatory(base, amplitude, axis).member(eps, g);
}

Form gen_concentration(const Grid& g, int degree, AlgebraPtr algebra, int comp,
                       int coeff, double eps, double p,
                       const std::vector<double>& center) {
  if (!algebra) throw ArgumentError("gen_concentration: null algebra");
  Form out(g, degree, std::move(algebra));
  if (comp < 0 || comp >= out.ncomp()) throw ArgumentError("gen_concentration: component out of range");
  if (coeff < 0 || coeff >= out.alg_dim()) throw ArgumentError("gen_concentration: coefficient out of range");
  if (static_cast<int>(center.size()) != g.n())
    throw ArgumentError("gen_concentration: center dimension mismatch");
  if (!(eps > 0.0)) throw ConfigError("gen_concentration: eps must be positive");
  if (!(p >= 1.0)) throw ArgumentError("gen_concentration: p must be at least 1");
  for (int ax = 0; ax < g.n(); ++ax)
    if (eps > g.period(ax)) throw ConfigError("gen_concentration: bump wider than the torus");

  std::vector<std::vector<double>> tables(g.n());
  for (int ax = 0; ax < g.n(); ++ax) {
    const double per = g.period(ax);
    tables[ax].resize(g.size(ax));
    for (int i = 0; i < g.size(ax); ++i) {
      double y = g.coord(ax, i) - center[ax];
      y -= per * std::floor(y / per + 0.5);  // wrap to [-per/2, per/2)
      const double z = y / eps;
      const double c = std::cos(std::acos(-1.0) * z);
      tables[ax][i] = (std::abs(z) <= 0.5) ? c * c : 0.0;
    }
  }
  add_separable(out, comp, coeff, std::pow(eps, -static_cast<double>(g.n()) / p), tables);
  return out;
}

SequenceFamily SequenceFamily::constant(TrigPolyForm base) {
  return SequenceFamily(std::move(base));
}

SequenceFamily SequenceFamily::oscillatory(TrigPolyForm base, TrigPolyForm amplitude,
                                           int axis, double eps_power) {
  SequenceFamily fam(std::move(base));
  fam.add_term(std::move(amplitude), axis, eps_power);
  return fam;
}

SequenceFamily& SequenceFamily::add_term(TrigPolyForm amplitude, int axis,
                                         double eps_power) {
  if (amplitude.n() != base_.n() || amplitude.degree() != base_.degree())
    throw ArgumentError("sequence family: amplitude shape mismatch");
  if (amplitude.algebra()->label() != base_.algebra()->label())
    throw ArgumentError("sequence family: amplitude coefficient mismatch");
  if (axis < 0 || axis >= base_.n())
    throw ArgumentError("sequence family: oscillation axis out of range");
  terms_.push_back(OscTerm{std::move(amplitude), axis, eps_power});
  return *this;
}

Form SequenceFamily::member(double eps, const Grid& g) const {
  Form out = base_.sample(g);
  for (const auto& t : terms_) {
    Form amp = t.amplitude.sample(g);
    scale_by_axis_profile(amp, t.axis, oscillation_profile(g, t.axis, eps));
    form_axpy(std::pow(eps, t.eps_power), amp, out);
  }
  return out;
}

Form SequenceFamily::limit(const Grid& g) const { return base_.sample(g); }

std::pair<double, double> linear_eps_fit(const std::vector<double>& eps,
                                         const std::vector<double>& vals, int points) {
  if (eps.size() != vals.size() || eps.empty())
    throw ArgumentError("linear_eps_fit: mismatched samples");
  const int m = std::min<int>(points < 1 ? 1 : points, static_cast<int>(eps.size()));
  const std::size_t lo = eps.size() - m;
  if (m == 1) return {vals.back(), 0.0};
  double xm = 0.0, ym = 0.0;
  for (std::size_t i = lo; i < eps.size(); ++i) {
    xm += eps[i];
    ym += vals[i];
  }
  xm /= m;
  ym /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = lo; i < eps.size(); ++i) {
    sxx += (eps[i] - xm) * (eps[i] - xm);
    sxy += (eps[i] - xm) * (vals[i] - ym);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  const double intercept = ym - slope * xm;
  double ss = 0.0;
  for (std::size_t i = lo; i < eps.size(); ++i) {
    const double r = vals[i] - intercept - slope * eps[i];
    ss += r * r;
  }
  return {intercept, std::sqrt(ss / m)};
}

LimitReport div_curl_experiment(const SequenceFamily& famA, const SequenceFamily& famB,
                                const std::vector<TrigPolyForm>& bank,
                                const ExperimentConfig& cfg) {
  const int n = famA.n();
  if (famB.n() != n) throw ArgumentError("div_curl: factor dimension mismatch");
  if (famA.algebra()->label() != famB.algebra()->label())
    throw ArgumentError("div_curl: factor coefficient mismatch");
  const int pq = famA.degree() + famB.degree();
  if (pq > n) throw ArgumentError("div_curl: bracket degree exceeds the dimension");
  check_bank(bank, n, pq, famA.algebra());

  LimitReport rep;
  rep.epsilons = cfg.schedule.values();
  const int ne = static_cast<int>(rep.epsilons.size());
  const int nb = static_cast<int>(bank.size());
  rep.grid_sizes.assign(ne, 0);
  rep.pairings.assign(ne, std::vector<double>(nb, 0.0));
  rep.surrogate_norms.assign(ne, 0.0);
  rep.lp_bounds.assign(ne, 0.0);

  run_indexed(ne, cfg.threads, [&](int i) {
    const double eps = rep.epsilons[i];
    const int N = cfg.policy.resolve(eps);
    rep.grid_sizes[i] = N;
    Grid g(n, std::vector<int>(n, N));
    Form A = famA.member(eps, g);
    Form B = famB.member(eps, g);
    Form W = wedge_bracket(A, B);
    for (int j = 0; j < nb; ++j) rep.pairings[i][j] = pairing(W, bank[j].sample(g));
    const double sA = confinement_surrogate(A, famA.limit(g));
    const double sB = confinement_surrogate(B, famB.limit(g));
    rep.surrogate_norms[i] = std::max(sA, sB);
    rep.lp_bounds[i] = std::max(lp_norm(A, 2.0), lp_norm(B, 2.0));
  });

  {
    const int NT = cfg.policy.resolve(rep.epsilons.back());
    Grid gt(n, std::vector<int>(n, NT));
    Form WT = wedge_bracket(famA.limit(gt), famB.limit(gt));
    rep.targets.assign(nb, 0.0);
    for (int j = 0; j < nb; ++j) rep.targets[j] = pairing(WT, bank[j].sample(gt));
  }

  fit_columns(rep, cfg.fit_points);
  const bool bounded = bounded_sequence(rep.lp_bounds);
  const bool confined = decaying_sequence(rep.surrogate_norms);
  rep.hypothesis_ok = bounded && confined;
  const bool gaps_ok = rep.max_gap <= cfg.tol_rel * rep.scale;
  rep.verdict = (rep.hypothesis_ok && gaps_ok) ? "CONVERGES" : "FAILS";
  rep.note = format_gap_note(rep.max_gap, rep.scale, cfg.tol_rel);
  if (!confined) rep.note += "; confinement surrogate does not decay";
  if (!bounded) rep.note += "; factor L2 norms are not uniformly bounded";
  rep.note += "; weak convergence surrogate: pairings against a finite band-limited bank";
  return rep;
}

LimitReport curvature_weak_limit_experiment(const SequenceFamily& fam,
                                            const std::vector<TrigPolyForm>& bank,
                                            const ExperimentConfig& cfg) {
  const int n = fam.n();
  if (fam.degree() != 1) throw ArgumentError("curvature limit: family must be connections");
  if (n < 2) throw DegreeError("curvature limit: needs n >= 2");
  check_bank(bank, n, 2, fam.algebra());

  LimitReport rep;
  rep.epsilons = cfg.schedule.values();
  const int ne = static_cast<int>(rep.epsilons.size());
  const int nb = static_cast<int>(bank.size());
  rep.grid_sizes.assign(ne, 0);
  rep.pairings.assign(ne, std::vector<double>(nb, 0.0));
  rep.surrogate_norms.assign(ne, 0.0);
  rep.lp_bounds.assign(ne, 0.0);

  auto functional = [&](const Form& A, const Form& phi, const Form& W) {
    return pairing(A, codifferential(phi)) + 0.5 * pairing(W, phi);
  };

  run_indexed(ne, cfg.threads, [&](int i) {
    const double eps = rep.epsilons[i];
    const int N = cfg.policy.resolve(eps);
    rep.grid_sizes[i] = N;
    Grid g(n, std::vector<int>(n, N));
    Form A = fam.member(eps, g);
    Form W = wedge_bracket(A, A);
    for (int j = 0; j < nb; ++j) {
      Form phi = bank[j].sample(g);
      rep.pairings[i][j] = functional(A, phi, W);
    }
    rep.surrogate_norms[i] = lp_norm(curvature(ConnectionField(A)), 1.0);
    rep.lp_bounds[i] = lp_norm(A, 4.0);
  });

  {
    const int NT = cfg.policy.resolve(rep.epsilons.back());
    Grid gt(n, std::vector<int>(n, NT));
    Form Alim = fam.limit(gt);
    Form WT = wedge_bracket(Alim, Alim);
    rep.targets.assign(nb, 0.0);
    for (int j = 0; j < nb; ++j)
      rep.targets[j] = functional(Alim, bank[j].sample(gt), WT);
  }

  fit_columns(rep, cfg.fit_points);
  rep.hypothesis_ok =
      bounded_sequence(rep.surrogate_norms) && bounded_sequence(rep.lp_bounds);
  const bool gaps_ok = rep.max_gap <= cfg.tol_rel * rep.scale;
  rep.verdict = (rep.hypothesis_ok && gaps_ok) ? "CONVERGES" : "FAILS";
  rep.note = format_gap_note(rep.max_gap, rep.scale, cfg.tol_rel);
  if (!rep.hypothesis_ok) rep.note += "; curvature measure bound violated";
  rep.note += "; weak convergence surrogate: pairings against a finite band-limited bank";
  return rep;
}

Form restrict_box(const Form& fine, const Grid& coarse) {
  const Grid& gf = fine.grid();
  if (gf.n() != coarse.n()) throw ArgumentError("restrict_box: dimension mismatch");
  const int n = gf.n();
  std::size_t block_points = 1;
  for (int ax = 0; ax < n; ++ax) {
    if (gf.size(ax) % coarse.size(ax) != 0)
      throw ArgumentError("restrict_box: coarse grid does not divide the fine grid");
    block_points *= static_cast<std::size_t>(gf.size(ax) / coarse.size(ax));
  }

  // Per-axis map from fine index to coarse flat contribution.
  std::vector<std::vector<std::size_t>> cmap(n);
  for (int ax = 0; ax < n; ++ax) {
    const int m = gf.size(ax) / coarse.size(ax);
    cmap[ax].resize(gf.size(ax));
    for (int i = 0; i < gf.size(ax); ++i)
      cmap[ax][i] = static_cast<std::size_t>(i / m) * coarse.stride(ax);
  }

  Form out(coarse, fine.degree(), fine.algebra());
  std::vector<int> idx(n, 0);
  const std::size_t npf = gf.npoints();
  for (int f = 0; f < fine.field_count(); ++f) {
    const double* src = fine.data().data() + static_cast<std::size_t>(f) * npf;
    double* dst = out.data().data() + static_cast<std::size_t>(f) * coarse.npoints();
    std::fill(idx.begin(), idx.end(), 0);
    std::size_t cidx = 0;
    for (std::size_t p = 0; p < npf; ++p) {
      dst[cidx] += src[p];
      for (int ax = n - 1; ax >= 0; --ax) {
        cidx -= cmap[ax][idx[ax]];
        if (++idx[ax] == gf.size(ax)) idx[ax] = 0;
        cidx += cmap[ax][idx[ax]];
        if (idx[ax] != 0) break;
      }
    }
  }
  form_scale(1.0 / static_cast<double>(block_points), out);
  return out;
}

LimitReport ym_weak_continuity_experiment(const SequenceFamily& fam,
                                          const std::vector<TrigPolyForm>& bank,
                                          const YmWeakConfig& cfg) {
  const int n = fam.n();
  if (fam.degree() != 1) throw ArgumentError("ym weak: family must be connections");
  check_bank(bank, n, 1, fam.algebra());
  if (cfg.base_grid < 4) throw ConfigError("ym weak: base grid too small");

  LimitReport rep;
  rep.epsilons = cfg.schedule.values();
  const int ne = static_cast<int>(rep.epsilons.size());
  const int nb = static_cast<int>(bank.size());
  rep.grid_sizes.assign(ne, 0);
  rep.pairings.assign(ne, std::vector<double>(nb, 0.0));
  rep.surrogate_norms.assign(ne, 0.0);
  rep.lp_bounds.assign(ne, 0.0);
  rep.member_residuals.assign(ne, 0.0);

  Grid gb(n, std::vector<int>(n, cfg.base_grid));
  std::vector<Form> restricted(ne);

  run_indexed(ne, cfg.threads, [&](int i) {
    const double eps = rep.epsilons[i];
    const int N = cfg.policy.resolve(eps);
    if (N % cfg.base_grid != 0)
      throw ConfigError("ym weak: member grid does not divide by the base grid");
    rep.grid_sizes[i] = N;
    Grid g(n, std::vector<int>(n, N));
    ConnectionField A(fam.member(eps, g));
    RelaxConfig rc;
    rc.max_steps = cfg.relax_steps;
    rc.grad_tol = 1e-10;
    rc.step0 = cfg.relax_step0;
    try {
      A = ym_relax(A, rc).first;
    } catch (const FlowError&) {
      // The line search stalls only on a numerically flat landscape; keep the
      // unrelaxed member in that case.
    }
    Form omega = curvature(A);
    for (int j = 0; j < nb; ++j) {
      Form phi = bank[j].sample(g);
      rep.pairings[i][j] =
          std::abs(pairing(omega, covariant_derivative(A, phi))) / w12_norm(phi);
    }
    rep.member_residuals[i] = *std::max_element(rep.pairings[i].begin(), rep.pairings[i].end());
    rep.lp_bounds[i] = lp_norm(omega, 2.0);
    rep.surrogate_norms[i] = rep.member_residuals[i];
    restricted[i] = restrict_box(A.a, gb);
  });

  // Limit connection: valuewise linear-in-eps fit of the restrictions.
  Form limit_form(gb, 1, fam.algebra());
  {
    const std::size_t nv = limit_form.data().size();
    std::vector<double> col(ne);
    for (std::size_t v = 0; v < nv; ++v) {
      for (int i = 0; i < ne; ++i) col[i] = restricted[i].data()[v];
      limit_form.data()[v] = linear_eps_fit(rep.epsilons, col, cfg.fit_points).first;
    }
  }
  ConnectionField limitA(std::move(limit_form));
  Form omega_lim = curvature(limitA);
  rep.targets.assign(nb, 0.0);
  for (int j = 0; j < nb; ++j) {
    Form phi = bank[j].sample(gb);
    rep.targets[j] =
        std::abs(pairing(omega_lim, covariant_derivative(limitA, phi))) / w12_norm(phi);
  }
  rep.limit_residual = *std::max_element(rep.targets.begin(), rep.targets.end());

  fit_columns(rep, cfg.fit_points);
  rep.hypothesis_ok = bounded_sequence(rep.lp_bounds);
  const double member_worst =
      *std::max_element(rep.member_residuals.begin(), rep.member_residuals.end());
  const double allowed = std::max(2.0 * member_worst, cfg.tol_abs);
  const bool pass = rep.hypothesis_ok && rep.limit_residual <= allowed;
  rep.verdict = pass ? "PASS" : "FAILS";
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "limit weak residual %.3g vs allowance %.3g (worst member %.3g)",
                rep.limit_residual, allowed, member_worst);
  rep.note = buf;
  if (!rep.hypothesis_ok) rep.note += "; curvature L2 bound violated";
  rep.note += "; weak residual surrogate: finite band-limited bank";
  return rep;
}

EquiIntCurve equi_integrability_modulus(const Form& a, double p,
                                        const std::vector<double>& fractions) {
  if (!(p >= 1.0) || !std::isfinite(p))
    throw ArgumentError("equi_integrability_modulus: p must be finite and >= 1");
  EquiIntCurve curve;
  curve.fractions = fractions;
  std::vector<double> mass = pointwise_magnitude_sq(a);
  const double vol = a.grid().cell_volume();
  for (double& m : mass) m = std::pow(m, 0.5 * p) * vol;
  std::sort(mass.begin(), mass.end(), std::greater<double>());
  std::vector<double> prefix(mass.size() + 1, 0.0);
  for (std::size_t i = 0; i < mass.size(); ++i) prefix[i + 1] = prefix[i] + mass[i];
  curve.mass.reserve(fractions.size());
  for (double s : fractions) {
    if (!(s >= 0.0 && s <= 1.0))
      throw ArgumentError("equi_integrability_modulus: fraction outside [0,1]");
    std::size_t k = static_cast<std::size_t>(std::floor(s * static_cast<double>(mass.size()) + 1e-9));
    if (k > mass.size()) k = mass.size();
    curve.mass.push_back(prefix[k]);
  }
  return curve;
}

}  // namespace cartanlab
