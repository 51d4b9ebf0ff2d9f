#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

#include "cartanlab/bank.hpp"
#include "cartanlab/errors.hpp"
#include "cartanlab/forms.hpp"
#include "cartanlab/rng.hpp"
#include "cartanlab/serialize.hpp"

using namespace cartanlab;

namespace {

constexpr double kPi = std::numbers::pi;

Form random_form(const Grid& g, int degree, AlgebraPtr alg, std::uint64_t seed) {
  Form f(g, degree, std::move(alg));
  Rng rng(seed);
  for (double& v : f.data()) v = rng.symm();
  return f;
}

// f.field(comp, coeff)[p] = fn(x) over the grid.
template <typename Fn>
void fill_field(Form& f, int comp, int coeff, Fn&& fn) {
  const Grid& g = f.grid();
  std::vector<int> idx(g.n(), 0);
  std::vector<double> x(g.n(), 0.0);
  double* dst = f.field(comp, coeff);
  for (std::size_t p = 0; p < g.npoints(); ++p) {
    for (int ax = 0; ax < g.n(); ++ax) x[ax] = g.coord(ax, idx[ax]);
    dst[p] = fn(x);
    for (int ax = g.n() - 1; ax >= 0; --ax) {
      if (++idx[ax] < g.size(ax)) break;
      idx[ax] = 0;
    }
  }
}

double linf(const Form& f) {
  double m = 0.0;
  for (double v : f.data()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

TEST_CASE("grid layout") {
  Grid g(3, {4, 6, 8});
  CHECK(g.npoints() == 4 * 6 * 8);
  CHECK(g.stride(2) == 1);
  CHECK(g.stride(1) == 8);
  CHECK(g.stride(0) == 48);
  CHECK(g.spacing(0) == doctest::Approx(0.25));
  CHECK(g.cell_volume() == doctest::Approx(1.0 / (4 * 6 * 8)));
  CHECK(g.coord(1, 3) == doctest::Approx(0.5));

  CHECK_THROWS_AS(Grid(5, {4, 4, 4, 4, 4}), ArgumentError);
  CHECK_THROWS_AS(Grid(2, {4, 2}), ArgumentError);
}

TEST_CASE("multi index enumeration is lexicographic") {
  const auto& idx21 = multi_indices(3, 2);
  REQUIRE(idx21.size() == 3);
  CHECK(idx21[0] == std::vector<int>{0, 1});
  CHECK(idx21[1] == std::vector<int>{0, 2});
  CHECK(idx21[2] == std::vector<int>{1, 2});
  CHECK(multi_index_rank(3, {1, 2}) == 2);
  CHECK(binom(4, 2) == 6);
  CHECK(multi_indices(4, 0) == std::vector<std::vector<int>>{{}});
}

TEST_CASE("d of d vanishes identically") {
  auto alg = LieAlgebra::make("so:3");
  for (int n : {2, 3}) {
    std::vector<int> sizes(n, n == 2 ? 12 : 8);
    Grid g(n, sizes);
    for (int k = 0; k + 2 <= n; ++k) {
      auto a = random_form(g, k, alg, 1000 + k);
      auto dda = exterior_derivative(exterior_derivative(a));
      CHECK(linf(dda) <= 1e-13);
    }
  }
}

TEST_CASE("codifferential is the exact matrix adjoint of d") {
  auto alg = LieAlgebra::make("so:3");
  Grid g(3, {8, 8, 8});
  for (int k = 0; k < 3; ++k) {
    CAPTURE(k);
    for (int trial = 0; trial < 50; ++trial) {
      auto a = random_form(g, k, alg, 40 * k + trial);
      auto b = random_form(g, k + 1, alg, 9000 + 40 * k + trial);
      const double lhs = pairing(exterior_derivative(a), b);
      const double rhs = pairing(a, codifferential(b));
      const double scale = 1.0 + std::abs(lhs) + std::abs(rhs);
      CHECK(std::abs(lhs - rhs) / scale <= 1e-12);
    }
  }
  CHECK_THROWS_AS((void)codifferential(random_form(g, 0, alg, 1)), DegreeError);
  CHECK_THROWS_AS((void)exterior_derivative(random_form(g, 3, alg, 2)), DegreeError);
}

TEST_CASE("delta of delta vanishes identically") {
  auto alg = LieAlgebra::make("abelian:2");
  Grid g(3, {8, 8, 8});
  for (int k = 2; k <= 3; ++k) {
    auto a = random_form(g, k, alg, 77 + k);
    CHECK(linf(codifferential(codifferential(a))) <= 1e-13);
  }
}

TEST_CASE("hodge star involution and isometry") {
  auto alg = LieAlgebra::make("so:3");
  for (int n : {1, 2, 3, 4}) {
    std::vector<int> sizes(n, n <= 2 ? 16 : (n == 3 ? 8 : 4));
    Grid g(n, sizes);
    for (int k = 0; k <= n; ++k) {
      auto a = random_form(g, k, alg, 31 * n + k);
      auto ss = hodge_star(hodge_star(a));
      const double sign = ((k * (n - k)) % 2 == 0) ? 1.0 : -1.0;
      Form diff = ss;
      form_axpy(-sign, a, diff);
      CHECK(linf(diff) == 0.0);

      auto b = random_form(g, k, alg, 77 * n + k);
      const double p0 = pairing(a, b);
      const double p1 = pairing(hodge_star(a), hodge_star(b));
      CHECK(std::abs(p0 - p1) <= 1e-12 * (1.0 + std::abs(p0)));
    }
  }
}

TEST_CASE("hodge star on T2 basis components") {
  auto alg = LieAlgebra::make("abelian:1");
  Grid g(2, {8, 8});
  // a = f dx0 + g dx1 -> *a = -g dx0 + f dx1 under *(dx0) = dx1, *(dx1) = -dx0.
  Form a(g, 1, alg);
  fill_field(a, 0, 0, [](const std::vector<double>& x) { return std::sin(2 * kPi * x[0]); });
  fill_field(a, 1, 0, [](const std::vector<double>& x) { return std::cos(2 * kPi * x[1]); });
  Form sa = hodge_star(a);
  for (std::size_t p = 0; p < g.npoints(); ++p) {
    CHECK(sa.field(0, 0)[p] == -a.field(1, 0)[p]);
    CHECK(sa.field(1, 0)[p] == a.field(0, 0)[p]);
  }
}

TEST_CASE("wedge bracket antisymmetry and degree rules") {
  auto alg = LieAlgebra::make("so:4");
  Grid g(3, {8, 8, 8});
  struct Case {
    int p, q;
  } cases[] = {{1, 1}, {1, 2}, {0, 1}, {0, 0}, {2, 1}};
  for (auto [p, q] : cases) {
    CAPTURE(p);
    CAPTURE(q);
    auto a = random_form(g, p, alg, 600 + p * 7 + q);
    auto b = random_form(g, q, alg, 700 + p * 7 + q);
    auto ab = wedge_bracket(a, b);
    auto ba = wedge_bracket(b, a);
    const double sign = ((p * q) % 2 == 0) ? -1.0 : 1.0;  // [a^b] = (-1)^{pq+1}[b^a]
    Form diff = ab;
    form_axpy(-sign, ba, diff);
    CHECK(linf(diff) <= 1e-13);
  }
  auto a2 = random_form(g, 2, alg, 1);
  CHECK_THROWS_AS((void)wedge_bracket(a2, a2), ArgumentError);
}

TEST_CASE("wedge bracket so(3) hand value") {
  auto alg = LieAlgebra::make("so:3");
  Grid g(2, {16, 16});
  Form a(g, 1, alg), b(g, 1, alg);
  // a = f(x) e1 dx0, b = g(y) e2 dx1 with [e1,e2] = -e3.
  fill_field(a, 0, 0, [](const std::vector<double>& x) { return std::sin(2 * kPi * x[0]); });
  fill_field(b, 1, 1, [](const std::vector<double>& x) { return std::cos(2 * kPi * x[1]); });
  Form w = wedge_bracket(a, b);
  REQUIRE(w.degree() == 2);
  for (std::size_t p = 0; p < g.npoints(); ++p) {
    const double expect = -a.field(0, 0)[p] * b.field(1, 1)[p];
    CHECK(w.field(0, 2)[p] == doctest::Approx(expect).epsilon(1e-14));
    CHECK(w.field(0, 0)[p] == 0.0);
    CHECK(w.field(0, 1)[p] == 0.0);
  }
}

TEST_CASE("form-level jacobi for 1-forms") {
  auto alg = LieAlgebra::make("so:3");
  Grid g(3, {8, 8, 8});
  auto a = random_form(g, 1, alg, 4242);
  auto j = wedge_bracket(wedge_bracket(a, a), a);
  CHECK(linf(j) <= 1e-12);
}

TEST_CASE("abelian wedge bracket vanishes") {
  auto alg = LieAlgebra::make("abelian:3");
  Grid g(2, {8, 8});
  auto a = random_form(g, 1, alg, 9);
  auto b = random_form(g, 1, alg, 10);
  CHECK(linf(wedge_bracket(a, b)) == 0.0);
}

TEST_CASE("pairing and lp norms against trig oracles") {
  auto alg = LieAlgebra::make("abelian:1");
  Grid g(2, {32, 32});
  Form a(g, 1, alg);
  fill_field(a, 0, 0, [](const std::vector<double>& x) { return std::sin(2 * kPi * x[0]); });
  // sum of sin^2 over a full period is exactly N/2
  CHECK(pairing(a, a) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(lp_norm(a, 2.0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
  CHECK(lp_norm(a, std::numeric_limits<double>::infinity()) ==
        doctest::Approx(1.0).epsilon(1e-12));

  Form c(g, 0, alg);
  fill_field(c, 0, 0, [](const std::vector<double>&) { return -2.0; });
  CHECK(lp_norm(c, 1.0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(lp_norm(c, 2.0) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("exterior derivative matches forward-difference closed form") {
  auto alg = LieAlgebra::make("abelian:1");
  Grid g(2, {64, 64});
  const double h = g.spacing(0);
  Form f(g, 0, alg);
  fill_field(f, 0, 0, [](const std::vector<double>& x) { return std::sin(2 * kPi * x[0]); });
  Form df = exterior_derivative(f);
  double worst = 0.0;
  std::vector<int> idx(2, 0);
  for (std::size_t p = 0; p < g.npoints(); ++p) {
    const double x = g.coord(0, idx[0]);
    const double expect = (std::sin(2 * kPi * (x + h)) - std::sin(2 * kPi * x)) / h;
    worst = std::max(worst, std::abs(df.field(0, 0)[p] - expect));
    for (int ax = 1; ax >= 0; --ax) {
      if (++idx[ax] < g.size(ax)) break;
      idx[ax] = 0;
    }
  }
  CHECK(worst <= 1e-12);
  CHECK(linf(exterior_derivative(componentwise_mean_form(f))) == 0.0);
}

TEST_CASE("leibniz residual decays at first order") {
  auto alg = LieAlgebra::make("so:3");
  // degrees chosen so every term in the rule stays below top degree
  auto pa = TrigPolyForm::random(2, 0, alg, 1234);
  auto pb = TrigPolyForm::random(2, 1, alg, 5678);
  std::vector<double> hs, rs;
  for (int N : {16, 32, 64}) {
    Grid g(2, {N, N});
    const double r = leibniz_residual(pa.sample(g), pb.sample(g));
    hs.push_back(1.0 / N);
    rs.push_back(r);
  }
  // fitted slope of log r against log h
  const int m = 3;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    const double lx = std::log(hs[i]), ly = std::log(rs[i]);
    sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  CHECK(slope >= 0.9);

  // abelian coefficients: bracket terms vanish and the residual is exactly 0
  auto ab = LieAlgebra::make("abelian:2");
  Grid g(2, {16, 16});
  CHECK(leibniz_residual(random_form(g, 0, ab, 3), random_form(g, 1, ab, 4)) == 0.0);
}

TEST_CASE("trig poly banks sample exactly and normalize analytically") {
  auto alg = LieAlgebra::make("so:3");
  auto bank = make_test_bank(2, 1, alg, 8, 99);
  REQUIRE(bank.size() == 8);
  Grid fine(2, {32, 32}), coarse(2, {16, 16});
  for (const auto& tp : bank) {
    CHECK(tp.l2_norm() == doctest::Approx(1.0).epsilon(1e-12));
    // products of modes <= 2 alias only past N = 8, so the discrete L2 norm
    // is the analytic one on any shipped grid
    CHECK(lp_norm(tp.sample(fine), 2.0) == doctest::Approx(1.0).epsilon(1e-12));
    // restriction consistency: sampling commutes with subsampling
    Form on_coarse = tp.sample(coarse);
    Form on_fine = tp.sample(fine);
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j)
        CHECK(on_coarse.field(0, 0)[i * 16 + j] ==
              doctest::Approx(on_fine.field(0, 0)[(2 * i) * 32 + 2 * j]).epsilon(1e-14));
  }
}

TEST_CASE("binary snapshot round trip is bitwise") {
  auto alg = LieAlgebra::make("so:3");
  Grid g(2, {8, 12});
  auto a = random_form(g, 1, alg, 321);
  const std::string path = "form_snapshot_test.bin";
  write_form_binary(a, path);
  Form back = read_form_binary(path, alg);
  REQUIRE(back.grid() == g);
  REQUIRE(back.degree() == 1);
  CHECK(back.data() == a.data());
  write_algebra_sidecar(path, alg->label());
  CHECK(read_algebra_sidecar(path) == "so:3");
  std::remove(path.c_str());
  std::remove((path + ".meta").c_str());
}

TEST_CASE("csv export emits one row per stored value") {
  auto alg = LieAlgebra::make("abelian:1");
  Grid g(2, {4, 4});
  auto a = random_form(g, 1, alg, 5);
  const std::string path = "form_snapshot_test.csv";
  write_form_csv(a, path);
  FILE* fp = std::fopen(path.c_str(), "r");
  REQUIRE(fp != nullptr);
  int lines = 0;
  int ch;
  while ((ch = std::fgetc(fp)) != EOF)
    if (ch == '\n') ++lines;
  std::fclose(fp);
  CHECK(lines == 1 + 16 * 2);
  std::remove(path.c_str());
}
