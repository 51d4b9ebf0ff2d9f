// cartanlab: config-driven experiment runner.
//
//   cartanlab run --config <file> [--out dir] [--seed u64] [--threads k]
//
// Verdict PASS/CONVERGES exits 0, FAILS exits 2 so failure exhibits are
// scriptable, and every error path exits 1. Reports are byte-stable for a
// fixed config and seed: doubles print as %.17g, JSON key order is fixed,
// and nothing timestamps.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cartanlab/cclab.hpp"
#include "cartanlab/errors.hpp"
#include "cartanlab/forms.hpp"
#include "cartanlab/gauge.hpp"
#include "cartanlab/hodge.hpp"
#include "cartanlab/immersion.hpp"
#include "cartanlab/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace cartanlab;

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// FNV-1a over the raw config bytes; reports embed it so an artifact can be
// traced back to the exact inputs that produced it.
std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::pair<int, int> line_col(const std::string& raw, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < raw.size(); ++i) {
    if (raw[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

std::string key_location(const std::string& raw, const std::string& key) {
  const std::string needle = "\"" + key + "\"";
  const std::size_t at = raw.find(needle);
  if (at == std::string::npos) return "";
  auto [line, col] = line_col(raw, at);
  return " (line " + std::to_string(line) + ", column " + std::to_string(col) + ")";
}

// Allowed-key tree; "[]" names the element schema of an object array.
struct SchemaNode {
  std::map<std::string, SchemaNode> keys;
};

void check_keys(const json& j, const SchemaNode& schema, const std::string& path,
                const std::string& raw) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) {
      auto it = schema.keys.find(key);
      if (it == schema.keys.end())
        throw ConfigError("unknown key \"" + path + key + "\"" + key_location(raw, key));
      check_keys(value, it->second, path + key + ".", raw);
    }
  } else if (j.is_array()) {
    auto it = schema.keys.find("[]");
    if (it != schema.keys.end())
      for (std::size_t i = 0; i < j.size(); ++i)
        check_keys(j[i], it->second, path + std::to_string(i) + ".", raw);
  }
}

SchemaNode schedule_schema() { return {{{"eps0", {}}, {"ratio", {}}, {"count", {}}}}; }
SchemaNode policy_schema() { return {{{"base", {}}, {"cells_per_eps", {}}}}; }

const std::map<std::string, SchemaNode>& experiment_schemas() {
  static const std::map<std::string, SchemaNode> schemas = [] {
    std::map<std::string, SchemaNode> m;
    const std::vector<std::pair<std::string, SchemaNode>> common = {
        {"experiment", {}}, {"seed", {}}, {"threads", {}}};
    auto add = [&](const std::string& id, SchemaNode node) {
      for (const auto& kv : common) node.keys.insert(kv);
      m.emplace(id, std::move(node));
    };
    add("identities", {{{"algebra", {}}, {"grid", {}}, {"cases", {}}, {"tol_rel", {}}}});
    add("divcurl", {{{"algebra", {}},
                     {"axis_a", {}},
                     {"axis_b", {}},
                     {"slot_a", {}},
                     {"slot_b", {}},
                     {"amp_a", {}},
                     {"amp_b", {}},
                     {"bank_size", {}},
                     {"tol_rel", {}},
                     {"fit_points", {}},
                     {"schedule", schedule_schema()},
                     {"policy", policy_schema()}}});
    add("curvature-limit",
        {{{"algebra", {}},
          {"terms", {{{"[]", {{{"axis", {}}, {"comp", {}}, {"coeff", {}}, {"value", {}}}}}}}},
          {"bank_size", {}},
          {"tol_rel", {}},
          {"fit_points", {}},
          {"schedule", schedule_schema()},
          {"policy", policy_schema()}}});
    add("ym-relax", {{{"algebra", {}},
                      {"grid", {}},
                      {"amplitude", {}},
                      {"max_steps", {}},
                      {"grad_tol", {}},
                      {"step0", {}}}});
    add("ym-weak", {{{"algebra", {}},
                     {"base", {{{"[]", {{{"comp", {}}, {"coeff", {}}, {"value", {}}}}}}}},
                     {"term",
                      {{{"axis", {}}, {"comp", {}}, {"coeff", {}}, {"value", {}}, {"eps_power", {}}}}},
                     {"bank_size", {}},
                     {"tol_abs", {}},
                     {"fit_points", {}},
                     {"relax_steps", {}},
                     {"relax_step0", {}},
                     {"base_grid", {}},
                     {"schedule", schedule_schema()},
                     {"policy", policy_schema()}}});
    add("immersion-seq", {{{"kind", {}},
                           {"amplitude", {}},
                           {"tol_rel", {}},
                           {"sff_p", {}},
                           {"bank_size", {}},
                           {"fit_points", {}},
                           {"metric_fit_points", {}},
                           {"schedule", schedule_schema()},
                           {"policy", policy_schema()}}});
    add("corrugation", {{{"amplitude", {}},
                         {"schedule", schedule_schema()},
                         {"policy", policy_schema()},
                         {"flatten_deltas", {}},
                         {"flatten_grid", {}},
                         {"rate_min", {}}}});
    add("equi-int", {{{"amplitude", {}},
                      {"schedule", schedule_schema()},
                      {"base_grid", {}},
                      {"osc_cells_per_eps", {}},
                      {"corrugation_cells_per_eps", {}},
                      {"sff_p", {}},
                      {"bank_size", {}},
                      {"fraction", {}},
                      {"separation_min", {}}}});
    return m;
  }();
  return schemas;
}

// Typed getters with defaults; type mismatches name the offending key.
double jnum(const json& o, const std::string& key, double dflt) {
  if (!o.contains(key)) return dflt;
  if (!o[key].is_number()) throw ConfigError("key \"" + key + "\" must be a number");
  return o[key].get<double>();
}

int jint(const json& o, const std::string& key, int dflt) {
  if (!o.contains(key)) return dflt;
  if (!o[key].is_number_integer()) throw ConfigError("key \"" + key + "\" must be an integer");
  return o[key].get<int>();
}

std::uint64_t juint(const json& o, const std::string& key, std::uint64_t dflt) {
  if (!o.contains(key)) return dflt;
  if (!o[key].is_number_unsigned() && !o[key].is_number_integer())
    throw ConfigError("key \"" + key + "\" must be a non-negative integer");
  return o[key].get<std::uint64_t>();
}

std::string jstr(const json& o, const std::string& key, const std::string& dflt) {
  if (!o.contains(key)) return dflt;
  if (!o[key].is_string()) throw ConfigError("key \"" + key + "\" must be a string");
  return o[key].get<std::string>();
}

std::vector<int> jints(const json& o, const std::string& key, std::vector<int> dflt) {
  if (!o.contains(key)) return dflt;
  if (!o[key].is_array()) throw ConfigError("key \"" + key + "\" must be an array of integers");
  std::vector<int> out;
  for (const auto& v : o[key]) {
    if (!v.is_number_integer())
      throw ConfigError("key \"" + key + "\" must be an array of integers");
    out.push_back(v.get<int>());
  }
  return out;
}

std::vector<double> jnums(const json& o, const std::string& key, std::vector<double> dflt) {
  if (!o.contains(key)) return dflt;
  if (!o[key].is_array()) throw ConfigError("key \"" + key + "\" must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : o[key]) {
    if (!v.is_number()) throw ConfigError("key \"" + key + "\" must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

EpsilonSchedule jschedule(const json& o, EpsilonSchedule dflt) {
  if (!o.contains("schedule")) return dflt;
  const json& s = o["schedule"];
  return {jnum(s, "eps0", dflt.eps0), jnum(s, "ratio", dflt.ratio), jint(s, "count", dflt.count)};
}

GridPolicy jpolicy(const json& o, GridPolicy dflt) {
  if (!o.contains("policy")) return dflt;
  const json& p = o["policy"];
  return {jint(p, "base", dflt.base), jnum(p, "cells_per_eps", dflt.cells_per_eps)};
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
}

// --- report emission ---------------------------------------------------

struct ReportContext {
  fs::path out_dir;
  std::string experiment;
  std::string config_hash;
  std::uint64_t seed = 0;
  bool seeded = true;
  int threads = 1;
};

std::string csv_banner(const ReportContext& ctx) {
  return "# cartanlab " + std::string(kToolVersion) + " " + ctx.config_hash + "\n";
}

std::string limit_report_csv(const ReportContext& ctx, const LimitReport& rep) {
  std::string csv = csv_banner(ctx);
  csv += "epsilon,test_form_id,pairing,surrogate_norm,lp_bound\n";
  for (std::size_t i = 0; i < rep.epsilons.size(); ++i)
    for (std::size_t j = 0; j < rep.pairings[i].size(); ++j)
      csv += fmt17(rep.epsilons[i]) + "," + std::to_string(j) + "," + fmt17(rep.pairings[i][j]) +
             "," + fmt17(rep.surrogate_norms[i]) + "," + fmt17(rep.lp_bounds[i]) + "\n";
  return csv;
}

json limit_report_json(const LimitReport& rep) {
  json j;
  j["epsilons"] = rep.epsilons;
  j["grid_sizes"] = rep.grid_sizes;
  j["fitted_limit"] = rep.fitted;
  j["target"] = rep.targets;
  j["gap"] = rep.gaps;
  j["max_gap"] = rep.max_gap;
  j["scale"] = rep.scale;
  j["fit_residual"] = rep.fit_residual;
  j["surrogate_norms"] = rep.surrogate_norms;
  j["lp_bounds"] = rep.lp_bounds;
  if (!rep.member_residuals.empty()) {
    j["member_residuals"] = rep.member_residuals;
    j["limit_residual"] = rep.limit_residual;
  }
  j["hypothesis_ok"] = rep.hypothesis_ok;
  j["verdict"] = rep.verdict;
  j["note"] = rep.note;
  return j;
}

json summary_head(const ReportContext& ctx) {
  json j;
  j["tool"] = "cartanlab";
  j["version"] = kToolVersion;
  j["experiment"] = ctx.experiment;
  j["config_hash"] = ctx.config_hash;
  if (ctx.seeded) j["seed"] = ctx.seed;
  j["threads"] = ctx.threads;
  return j;
}

void emit_summary(const ReportContext& ctx, json& summary) {
  write_file(ctx.out_dir / "summary.json", summary.dump(2) + "\n");
}

int verdict_exit(const std::string& verdict) {
  return (verdict == "PASS" || verdict == "CONVERGES") ? 0 : 2;
}

// --- identity suite ----------------------------------------------------

// Randomized residuals of the identities the calculus promises exactly:
// nilpotency of d, the d/delta adjunction, graded antisymmetry of the
// bracket-wedge, Jacobi and invariance of the algebra inner product,
// commutation of the Laplacian with d, and the star involution. Residuals
// are relative to the magnitude of the quantities compared, so "exact"
// means a handful of ulps regardless of grid and algebra.
struct IdentityRow {
  std::string identity;
  int case_id;
  double residual;
};

Form random_form(const Grid& g, int degree, const AlgebraPtr& alg, Rng& rng) {
  Form f(g, degree, alg);
  for (double& v : f.data()) v = rng.symm();
  return f;
}

void identity_family(const std::string& name, int cases, int threads,
                     const std::function<double(int)>& residual, std::vector<IdentityRow>& rows,
                     json& worst_out) {
  std::vector<double> res(static_cast<std::size_t>(cases));
  run_indexed_jobs(cases, threads, [&](int i) { res[static_cast<std::size_t>(i)] = residual(i); });
  double worst = 0.0;
  for (int i = 0; i < cases; ++i) {
    rows.push_back({name, i, res[static_cast<std::size_t>(i)]});
    worst = std::max(worst, res[static_cast<std::size_t>(i)]);
  }
  worst_out[name] = worst;
}

int run_identities(const json& cfg, ReportContext& ctx) {
  const std::string algebra = jstr(cfg, "algebra", "so:3");
  const std::vector<int> sizes = jints(cfg, "grid", {16, 16, 16});
  const int cases = jint(cfg, "cases", 1000);
  const double tol = jnum(cfg, "tol_rel", 1e-12);
  if (cases < 1) throw ConfigError("cases must be positive");
  const Grid g(static_cast<int>(sizes.size()), sizes);
  const auto alg = LieAlgebra::make(algebra);
  const int n = g.n();
  double hmin = g.spacing(0);
  for (int ax = 1; ax < n; ++ax) hmin = std::min(hmin, g.spacing(ax));
  const double dscale = 2.0 / hmin;  // operator-norm bound of one difference

  std::vector<IdentityRow> rows;
  json worst;
  const std::uint64_t seed = ctx.seed;

  identity_family("dd_zero", cases, ctx.threads, [&](int i) {
    Rng rng(seed + 11 * static_cast<std::uint64_t>(i) + 1);
    Form a = random_form(g, n >= 2 ? i % (n - 1) : 0, alg, rng);
    Form da = exterior_derivative(a);
    return lp_norm(exterior_derivative(da), 2.0) / (dscale * lp_norm(da, 2.0) + 1e-300);
  }, rows, worst);

  identity_family("adjoint", cases, ctx.threads, [&](int i) {
    Rng rng(seed + 11 * static_cast<std::uint64_t>(i) + 2);
    const int k = i % n;
    Form a = random_form(g, k, alg, rng);
    Form b = random_form(g, k + 1, alg, rng);
    Form da = exterior_derivative(a);
    Form db = codifferential(b);
    const double lhs = pairing(da, b);
    const double rhs = pairing(a, db);
    // Relative to the Cauchy-Schwarz mass, not the pairings themselves, which
    // can cancel to any size for random fields.
    const double scale = lp_norm(da, 2.0) * lp_norm(b, 2.0) + lp_norm(a, 2.0) * lp_norm(db, 2.0);
    return std::abs(lhs - rhs) / (scale + 1e-300);
  }, rows, worst);

  identity_family("wedge_antisym", cases, ctx.threads, [&](int i) {
    Rng rng(seed + 11 * static_cast<std::uint64_t>(i) + 3);
    const int p = i % 2, q = (i / 2) % 2;  // degrees small enough to wedge on any n >= 2
    Form a = random_form(g, p, alg, rng);
    Form b = random_form(g, q, alg, rng);
    Form ab = wedge_bracket(a, b);
    Form ba = wedge_bracket(b, a);
    const double sign = ((p * q) % 2 == 0) ? 1.0 : -1.0;
    form_axpy(sign, ba, ab);  // [a^b] + (-1)^{pq} [b^a] = 0
    return lp_norm(ab, 2.0) / (lp_norm(ba, 2.0) + 1e-300);
  }, rows, worst);

  identity_family("jacobi", cases, ctx.threads, [&](int i) {
    Rng rng(seed + 11 * static_cast<std::uint64_t>(i) + 4);
    const int d = alg->dim();
    std::vector<double> x(d), y(d), z(d), t1(d), t2(d), acc(d);
    for (auto* v : {&x, &y, &z})
      for (double& c : *v) c = rng.symm();
    auto cyc = [&](const std::vector<double>& a, const std::vector<double>& b,
                   const std::vector<double>& c) {
      alg->bracket(b.data(), c.data(), t1.data());
      alg->bracket(a.data(), t1.data(), t2.data());
      for (int j = 0; j < d; ++j) acc[static_cast<std::size_t>(j)] += t2[static_cast<std::size_t>(j)];
    };
    std::fill(acc.begin(), acc.end(), 0.0);
    cyc(x, y, z);
    cyc(y, z, x);
    cyc(z, x, y);
    return alg->norm(acc) / (alg->norm(x) * alg->norm(y) * alg->norm(z) + 1e-300);
  }, rows, worst);

  identity_family("ad_invariance", cases, ctx.threads, [&](int i) {
    Rng rng(seed + 11 * static_cast<std::uint64_t>(i) + 5);
    const int d = alg->dim();
    std::vector<double> x(d), y(d), z(d), t(d);
    for (auto* v : {&x, &y, &z})
      for (double& c : *v) c = rng.symm();
    alg->bracket(x.data(), y.data(), t.data());
    const double lhs = alg->inner(t.data(), z.data());
    alg->bracket(x.data(), z.data(), t.data());
    const double rhs = alg->inner(y.data(), t.data());
    return std::abs(lhs + rhs) / (alg->norm(x) * alg->norm(y) * alg->norm(z) + 1e-300);
  }, rows, worst);

  identity_family("laplace_commutes_d", cases, ctx.threads, [&](int i) {
    Rng rng(seed + 11 * static_cast<std::uint64_t>(i) + 6);
    Form a = random_form(g, i % n, alg, rng);
    Form lhs = laplacian(exterior_derivative(a));
    Form rhs = exterior_derivative(laplacian(a));
    const double scale =
        dscale * dscale * dscale * lp_norm(a, 2.0) + dscale * lp_norm(laplacian(a), 2.0);
    return lp_norm(form_sub(lhs, rhs), 2.0) / (scale + 1e-300);
  }, rows, worst);

  identity_family("star_involution", cases, ctx.threads, [&](int i) {
    Rng rng(seed + 11 * static_cast<std::uint64_t>(i) + 7);
    const int k = i % (n + 1);
    Form a = random_form(g, k, alg, rng);
    Form ss = hodge_star(hodge_star(a));
    const double sign = ((k * (n - k)) % 2 == 0) ? 1.0 : -1.0;
    form_axpy(-sign, a, ss);
    const double inf = std::numeric_limits<double>::infinity();
    return lp_norm(ss, inf) / (lp_norm(a, inf) + 1e-300);
  }, rows, worst);

  double overall = 0.0;
  std::string csv = csv_banner(ctx);
  csv += "identity,case_id,residual\n";
  for (const auto& row : rows) {
    csv += row.identity + "," + std::to_string(row.case_id) + "," + fmt17(row.residual) + "\n";
    overall = std::max(overall, row.residual);
  }
  write_file(ctx.out_dir / "report.csv", csv);

  json summary = summary_head(ctx);
  summary["algebra"] = algebra;
  summary["grid"] = sizes;
  summary["cases"] = cases;
  summary["tol_rel"] = tol;
  summary["worst_residuals"] = worst;
  summary["worst_overall"] = overall;
  summary["verdict"] = overall <= tol ? "PASS" : "FAILS";
  emit_summary(ctx, summary);
  return verdict_exit(summary["verdict"]);
}

// --- oscillation experiments -------------------------------------------

TrigPolyForm constant_poly(int n, int degree, const AlgebraPtr& alg, int comp, int coeff,
                           double value) {
  TrigPolyForm p(n, degree, alg);
  std::vector<int> t(static_cast<std::size_t>(n), 0);
  p.coef(comp, coeff, t.data()) = value;
  return p;
}

int run_divcurl(const json& cfg, ReportContext& ctx) {
  const auto alg = LieAlgebra::make(jstr(cfg, "algebra", "so:3"));
  const int axis_a = jint(cfg, "axis_a", 0);
  const int axis_b = jint(cfg, "axis_b", 1);
  const std::vector<int> slot_a = jints(cfg, "slot_a", {0, 0});
  const std::vector<int> slot_b = jints(cfg, "slot_b", {1, 1});
  if (slot_a.size() != 2 || slot_b.size() != 2)
    throw ConfigError("slot_a and slot_b must be [component, coefficient] pairs");
  const double amp_a = jnum(cfg, "amp_a", 1.0);
  const double amp_b = jnum(cfg, "amp_b", 1.0);
  const int bank_size = jint(cfg, "bank_size", 8);

  TrigPolyForm zero(2, 1, alg);
  SequenceFamily famA = SequenceFamily::oscillatory(
      zero, constant_poly(2, 1, alg, slot_a[0], slot_a[1], amp_a), axis_a);
  SequenceFamily famB = SequenceFamily::oscillatory(
      zero, constant_poly(2, 1, alg, slot_b[0], slot_b[1], amp_b), axis_b);
  auto bank = make_test_bank(2, 2, alg, bank_size, ctx.seed);

  ExperimentConfig ec;
  ec.schedule = jschedule(cfg, {0.25, 0.5, 4});
  ec.policy = jpolicy(cfg, {16, 8.0});
  ec.tol_rel = jnum(cfg, "tol_rel", 0.05);
  ec.fit_points = jint(cfg, "fit_points", 4);
  ec.threads = ctx.threads;
  LimitReport rep = div_curl_experiment(famA, famB, bank, ec);

  write_file(ctx.out_dir / "report.csv", limit_report_csv(ctx, rep));
  json summary = summary_head(ctx);
  summary["algebra"] = alg->label();
  summary["report"] = limit_report_json(rep);
  summary["verdict"] = rep.verdict;
  emit_summary(ctx, summary);
  return verdict_exit(rep.verdict);
}

int run_curvature_limit(const json& cfg, ReportContext& ctx) {
  const auto alg = LieAlgebra::make(jstr(cfg, "algebra", "so:3"));
  const int bank_size = jint(cfg, "bank_size", 8);
  TrigPolyForm zero(2, 1, alg);
  SequenceFamily fam = SequenceFamily::constant(zero);
  if (!cfg.contains("terms") || !cfg["terms"].is_array() || cfg["terms"].empty())
    throw ConfigError("curvature-limit needs a non-empty \"terms\" array");
  for (const auto& term : cfg["terms"]) {
    const int axis = jint(term, "axis", 0);
    const int comp = jint(term, "comp", 0);
    const int coeff = jint(term, "coeff", 0);
    const double value = jnum(term, "value", 1.0);
    fam.add_term(constant_poly(2, 1, alg, comp, coeff, value), axis);
  }
  auto bank = make_test_bank(2, 2, alg, bank_size, ctx.seed);

  ExperimentConfig ec;
  ec.schedule = jschedule(cfg, {0.25, 0.5, 4});
  ec.policy = jpolicy(cfg, {16, 8.0});
  ec.tol_rel = jnum(cfg, "tol_rel", 0.05);
  ec.fit_points = jint(cfg, "fit_points", 4);
  ec.threads = ctx.threads;
  LimitReport rep = curvature_weak_limit_experiment(fam, bank, ec);

  write_file(ctx.out_dir / "report.csv", limit_report_csv(ctx, rep));
  json summary = summary_head(ctx);
  summary["algebra"] = alg->label();
  summary["report"] = limit_report_json(rep);
  summary["verdict"] = rep.verdict;
  emit_summary(ctx, summary);
  return verdict_exit(rep.verdict);
}

int run_ym_relax(const json& cfg, ReportContext& ctx) {
  const auto alg = LieAlgebra::make(jstr(cfg, "algebra", "so:3"));
  const std::vector<int> sizes = jints(cfg, "grid", {32, 32});
  const double amplitude = jnum(cfg, "amplitude", 0.3);
  const Grid g(static_cast<int>(sizes.size()), sizes);

  TrigPolyForm init = TrigPolyForm::random(g.n(), 1, alg, ctx.seed);
  init.scale(amplitude);
  ConnectionField A0(init.sample(g));

  RelaxConfig rc;
  rc.max_steps = jint(cfg, "max_steps", 200);
  rc.grad_tol = jnum(cfg, "grad_tol", 1e-6);
  rc.step0 = jnum(cfg, "step0", 0.05);
  auto [A, trace] = ym_relax(A0, rc);

  std::string csv = csv_banner(ctx);
  csv += "step,energy,residual,step_size\n";
  for (const FlowStep& s : trace.steps)
    csv += std::to_string(s.step) + "," + fmt17(s.energy) + "," + fmt17(s.residual_norm) + "," +
           fmt17(s.step_size) + "\n";
  write_file(ctx.out_dir / "report.csv", csv);

  json summary = summary_head(ctx);
  summary["algebra"] = alg->label();
  summary["grid"] = sizes;
  summary["amplitude"] = amplitude;
  summary["steps"] = trace.steps.empty() ? 0 : trace.steps.back().step;
  summary["initial_energy"] = trace.steps.empty() ? 0.0 : trace.steps.front().energy;
  summary["final_energy"] = trace.steps.empty() ? 0.0 : trace.steps.back().energy;
  summary["final_residual"] = trace.steps.empty() ? 0.0 : trace.steps.back().residual_norm;
  summary["converged"] = trace.converged;
  summary["verdict"] = trace.converged ? "PASS" : "FAILS";
  emit_summary(ctx, summary);
  return verdict_exit(summary["verdict"]);
}

int run_ym_weak(const json& cfg, ReportContext& ctx) {
  const auto alg = LieAlgebra::make(jstr(cfg, "algebra", "so:3"));
  const int bank_size = jint(cfg, "bank_size", 4);

  TrigPolyForm base(2, 1, alg);
  if (cfg.contains("base"))
    for (const auto& slot : cfg["base"]) {
      std::vector<int> t(2, 0);
      base.coef(jint(slot, "comp", 0), jint(slot, "coeff", 0), t.data()) =
          jnum(slot, "value", 0.0);
    }
  if (!cfg.contains("term")) throw ConfigError("ym-weak needs a \"term\" object");
  const json& term = cfg["term"];
  SequenceFamily fam = SequenceFamily::oscillatory(
      base,
      constant_poly(2, 1, alg, jint(term, "comp", 0), jint(term, "coeff", 0),
                    jnum(term, "value", 0.5)),
      jint(term, "axis", 0), jnum(term, "eps_power", 1.0));
  auto bank = make_test_bank(2, 1, alg, bank_size, ctx.seed);

  YmWeakConfig yc;
  yc.schedule = jschedule(cfg, yc.schedule);
  yc.policy = jpolicy(cfg, yc.policy);
  yc.base_grid = jint(cfg, "base_grid", yc.base_grid);
  yc.relax_steps = jint(cfg, "relax_steps", yc.relax_steps);
  yc.relax_step0 = jnum(cfg, "relax_step0", yc.relax_step0);
  yc.tol_abs = jnum(cfg, "tol_abs", yc.tol_abs);
  yc.fit_points = jint(cfg, "fit_points", yc.fit_points);
  yc.threads = ctx.threads;
  LimitReport rep = ym_weak_continuity_experiment(fam, bank, yc);

  write_file(ctx.out_dir / "report.csv", limit_report_csv(ctx, rep));
  json summary = summary_head(ctx);
  summary["algebra"] = alg->label();
  summary["report"] = limit_report_json(rep);
  summary["verdict"] = rep.verdict;
  emit_summary(ctx, summary);
  return verdict_exit(rep.verdict);
}

// --- immersion experiments ----------------------------------------------

ImmersionFamilyConfig immersion_config(const json& cfg, const ReportContext& ctx) {
  ImmersionFamilyConfig ic;
  ic.kind = jstr(cfg, "kind", ic.kind);
  ic.amplitude = jnum(cfg, "amplitude", ic.amplitude);
  ic.schedule = jschedule(cfg, ic.schedule);
  ic.policy = jpolicy(cfg, ic.policy);
  ic.tol_rel = jnum(cfg, "tol_rel", ic.tol_rel);
  ic.sff_p = jnum(cfg, "sff_p", ic.sff_p);
  ic.bank_size = jint(cfg, "bank_size", ic.bank_size);
  ic.fit_points = jint(cfg, "fit_points", ic.fit_points);
  ic.metric_fit_points = jint(cfg, "metric_fit_points", ic.metric_fit_points);
  ic.seed = ctx.seed;
  ic.threads = ctx.threads;
  return ic;
}

std::string equi_csv_rows(const std::string& family, const ImmersionSequenceReport& rep) {
  std::string rows;
  for (std::size_t i = 0; i < rep.equi.size(); ++i)
    for (std::size_t f = 0; f < rep.equi[i].fractions.size(); ++f)
      rows += family + "," + std::to_string(i) + "," + fmt17(rep.quad.epsilons[i]) + "," +
              fmt17(rep.equi[i].fractions[f]) + "," + fmt17(rep.equi[i].mass[f]) + "\n";
  return rows;
}

json gcr_json(const GcrResiduals& r) {
  json j;
  j["gauss"] = r.gauss;
  j["codazzi"] = r.codazzi;
  j["ricci"] = r.ricci;
  j["intrinsic"] = r.intrinsic;
  return j;
}

int run_immersion_seq(const json& cfg, ReportContext& ctx) {
  ImmersionFamilyConfig ic = immersion_config(cfg, ctx);
  ImmersionSequenceReport rep = immersion_sequence_experiment(ic);

  write_file(ctx.out_dir / "report.csv", limit_report_csv(ctx, rep.quad));
  write_file(ctx.out_dir / "metric.csv", limit_report_csv(ctx, rep.metric));
  write_file(ctx.out_dir / "equi.csv",
             csv_banner(ctx) + "family,member,epsilon,fraction,mass\n" +
                 equi_csv_rows(ic.kind, rep));

  json summary = summary_head(ctx);
  summary["kind"] = ic.kind;
  summary["quad"] = limit_report_json(rep.quad);
  summary["metric"] = limit_report_json(rep.metric);
  summary["sff_lp"] = rep.sff_lp;
  json gcr;
  gcr["gauss"] = rep.gcr_gauss;
  gcr["codazzi"] = rep.gcr_codazzi;
  gcr["ricci"] = rep.gcr_ricci;
  gcr["limit"] = gcr_json(rep.limit_gcr);
  summary["gcr"] = gcr;
  json equi;
  equi["fractions"] = rep.equi_fractions;
  json curves = json::array();
  for (const auto& c : rep.equi) curves.push_back(c.mass);
  equi["curves"] = curves;
  summary["equi"] = equi;
  summary["hypothesis_violation"] = rep.hypothesis_violation;
  summary["note"] = rep.note;
  summary["verdict"] = rep.verdict;
  emit_summary(ctx, summary);
  return verdict_exit(rep.verdict);
}

int run_corrugation(const json& cfg, ReportContext& ctx) {
  CorrugationConfig cc;
  cc.amplitude = jnum(cfg, "amplitude", cc.amplitude);
  cc.schedule = jschedule(cfg, cc.schedule);
  cc.policy = jpolicy(cfg, cc.policy);
  cc.flatten_deltas = jnums(cfg, "flatten_deltas", cc.flatten_deltas);
  cc.flatten_grid = jint(cfg, "flatten_grid", cc.flatten_grid);
  cc.rate_min = jnum(cfg, "rate_min", cc.rate_min);
  cc.threads = ctx.threads;
  CorrugationReport rep = corrugation_experiment(cc);

  std::string csv = csv_banner(ctx);
  csv += "delta,grid_size,mass\n";
  for (std::size_t i = 0; i < rep.deltas.size(); ++i)
    csv += fmt17(rep.deltas[i]) + "," + std::to_string(rep.grid_sizes[i]) + "," +
           fmt17(rep.masses[i]) + "\n";
  write_file(ctx.out_dir / "report.csv", csv);

  std::string fcsv = csv_banner(ctx);
  fcsv += "delta,defect_l2,defect_linf,mass\n";
  for (std::size_t i = 0; i < rep.flatten_deltas.size(); ++i)
    fcsv += fmt17(rep.flatten_deltas[i]) + "," + fmt17(rep.flatten_defect_l2[i]) + "," +
            fmt17(rep.flatten_defect_linf[i]) + "," + fmt17(rep.flatten_masses[i]) + "\n";
  write_file(ctx.out_dir / "flatten.csv", fcsv);

  json summary = summary_head(ctx);
  summary["deltas"] = rep.deltas;
  summary["grid_sizes"] = rep.grid_sizes;
  summary["masses"] = rep.masses;
  summary["mass_exponent"] = rep.mass_exponent;
  summary["flatten_deltas"] = rep.flatten_deltas;
  summary["flatten_defect_l2"] = rep.flatten_defect_l2;
  summary["flatten_defect_linf"] = rep.flatten_defect_linf;
  summary["flatten_masses"] = rep.flatten_masses;
  summary["defect_exponent"] = rep.defect_exponent;
  summary["note"] = rep.note;
  summary["verdict"] = rep.pass ? "PASS" : "FAILS";
  emit_summary(ctx, summary);
  return verdict_exit(summary["verdict"]);
}

int run_equi_int(const json& cfg, ReportContext& ctx) {
  const double fraction = jnum(cfg, "fraction", 0.1);
  const double separation_min = jnum(cfg, "separation_min", 0.5);

  ImmersionFamilyConfig osc;
  osc.kind = "clifford-osc";
  osc.amplitude = jnum(cfg, "amplitude", 0.05);
  osc.schedule = jschedule(cfg, {0.125, 0.5, 3});
  osc.policy = {jint(cfg, "base_grid", 16), jnum(cfg, "osc_cells_per_eps", 8.0)};
  osc.sff_p = jnum(cfg, "sff_p", 2.0);
  osc.bank_size = jint(cfg, "bank_size", 2);
  osc.seed = ctx.seed;
  osc.threads = ctx.threads;
  ImmersionFamilyConfig corr = osc;
  corr.kind = "corrugation";
  corr.policy = {osc.policy.base, jnum(cfg, "corrugation_cells_per_eps", 16.0)};

  ImmersionSequenceReport rosc = immersion_sequence_experiment(osc);
  ImmersionSequenceReport rcorr = immersion_sequence_experiment(corr);

  // Concentration statistic: growth of the small-set curvature mass across
  // the family, read at the configured set fraction.
  std::size_t idx = 0;
  for (std::size_t f = 1; f < rosc.equi_fractions.size(); ++f)
    if (std::abs(rosc.equi_fractions[f] - fraction) <
        std::abs(rosc.equi_fractions[idx] - fraction))
      idx = f;
  auto growth = [&](const ImmersionSequenceReport& r) {
    const double head = r.equi.front().mass[idx];
    const double tail = r.equi.back().mass[idx];
    return head > 0.0 ? tail / head : 1.0;
  };
  const double growth_osc = growth(rosc);
  const double growth_corr = growth(rcorr);
  const double separation = growth_corr > 0.0 ? 1.0 - growth_osc / growth_corr : 0.0;
  const bool pass = separation >= separation_min;

  write_file(ctx.out_dir / "report.csv",
             csv_banner(ctx) + "family,member,epsilon,fraction,mass\n" +
                 equi_csv_rows("clifford-osc", rosc) + equi_csv_rows("corrugation", rcorr));

  json summary = summary_head(ctx);
  summary["fraction"] = rosc.equi_fractions[idx];
  summary["growth_clifford_osc"] = growth_osc;
  summary["growth_corrugation"] = growth_corr;
  summary["separation"] = separation;
  summary["separation_min"] = separation_min;
  summary["note"] = "growth of the top-fraction |omega^II|^2 mass from the first to the last member";
  summary["verdict"] = pass ? "PASS" : "FAILS";
  emit_summary(ctx, summary);
  return verdict_exit(summary["verdict"]);
}

// --- dispatch ------------------------------------------------------------

int run_config(const fs::path& config_path, const fs::path& out_dir, bool seed_set,
               std::uint64_t seed_flag, int threads_flag) {
  std::ifstream in(config_path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + config_path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string raw = buf.str();

  json cfg;
  try {
    cfg = json::parse(raw);
  } catch (const json::parse_error& e) {
    auto [line, col] = line_col(raw, e.byte > 0 ? e.byte - 1 : 0);
    throw ConfigError(config_path.string() + ": parse error at line " + std::to_string(line) +
                      ", column " + std::to_string(col) + ": " + e.what());
  }
  if (!cfg.is_object()) throw ConfigError("config root must be a JSON object");

  const std::string experiment = jstr(cfg, "experiment", "");
  const auto& schemas = experiment_schemas();
  auto it = schemas.find(experiment);
  if (it == schemas.end()) {
    std::string known;
    for (const auto& [id, node] : schemas) known += (known.empty() ? "" : ", ") + id;
    throw ConfigError("unknown experiment \"" + experiment + "\"; expected one of: " + known);
  }
  check_keys(cfg, it->second, "", raw);

  ReportContext ctx;
  ctx.out_dir = out_dir;
  ctx.experiment = experiment;
  ctx.config_hash = fnv1a_hex(raw);
  ctx.seed = seed_set ? seed_flag : juint(cfg, "seed", 1);
  ctx.seeded = experiment != "corrugation";
  const char* env_threads = std::getenv("CARTANLAB_THREADS");
  ctx.threads = jint(cfg, "threads", 1);
  if (env_threads && *env_threads) ctx.threads = std::max(1, std::atoi(env_threads));
  if (threads_flag > 0) ctx.threads = threads_flag;

  fs::create_directories(out_dir);

  if (experiment == "identities") return run_identities(cfg, ctx);
  if (experiment == "divcurl") return run_divcurl(cfg, ctx);
  if (experiment == "curvature-limit") return run_curvature_limit(cfg, ctx);
  if (experiment == "ym-relax") return run_ym_relax(cfg, ctx);
  if (experiment == "ym-weak") return run_ym_weak(cfg, ctx);
  if (experiment == "immersion-seq") return run_immersion_seq(cfg, ctx);
  if (experiment == "corrugation") return run_corrugation(cfg, ctx);
  return run_equi_int(cfg, ctx);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cartanlab: lattice experiments for weak limits of connections and immersions"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "run one experiment from a JSON config");
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed_flag = 0;
  int threads_flag = 0;
  run->add_option("--config", config_path, "experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory for report.csv and summary.json");
  CLI::Option* seed_opt = run->add_option("--seed", seed_flag, "override the config seed");
  run->add_option("--threads", threads_flag, "worker threads (overrides CARTANLAB_THREADS)")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Usage problems are errors like any other: exit 1, not CLI11's own codes.
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    return run_config(config_path, out_dir, seed_opt->count() > 0, seed_flag, threads_flag);
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver error: %s (residual %.3g after %d iterations)\n", e.what(),
                 e.residual, e.iterations);
  } catch (const FlowError& e) {
    std::string trace;
    for (double v : e.energy_trace) trace += (trace.empty() ? "" : ", ") + fmt17(v);
    std::fprintf(stderr, "flow error: %s\nenergy trace: [%s]\n", e.what(), trace.c_str());
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  }
  return 1;
}
