#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cartanlab/errors.hpp"
#include "cartanlab/forms.hpp"
#include "cartanlab/gauge.hpp"
#include "cartanlab/rng.hpp"

using namespace cartanlab;

namespace {

constexpr double kTwoPi = 6.28318530717958647692528676655900577;

Form random_form(const Grid& g, int degree, const AlgebraPtr& alg, std::uint64_t seed) {
  Form f(g, degree, alg);
  Rng rng(seed);
  for (double& v : f.data()) v = rng.symm();
  return f;
}

// Forward-then-backward difference eigenvalue of the discrete Laplacian on
// mode m: (2/h sin(pi m h))^2.
double mode_eigenvalue(int m, int N) {
  const double h = 1.0 / N;
  const double s = std::sin(std::acos(-1.0) * m * h);
  return (2.0 / h) * (2.0 / h) * s * s;
}

double linf(const Form& f) { return lp_norm(f, std::numeric_limits<double>::infinity()); }

}  // namespace

TEST_CASE("curvature of an abelian sine connection is the discrete derivative") {
  const int N = 64;
  Grid g(2, {N, N});
  auto alg = LieAlgebra::make("abelian:1");
  Form a(g, 1, alg);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      a.field(1, 0)[static_cast<std::size_t>(i) * N + j] = std::sin(kTwoPi * g.coord(0, i));
  ConnectionField A(a);
  Form omega = curvature(A);

  // (sin(2 pi (x+h)) - sin(2 pi x))/h = (2 sin(pi h)/h) cos(2 pi (x + h/2)).
  const double h = 1.0 / N;
  const double amp = 2.0 * std::sin(std::acos(-1.0) * h) / h;
  double worst = 0.0;
  for (int i = 0; i < N; ++i) {
    const double want = amp * std::cos(kTwoPi * (g.coord(0, i) + 0.5 * h));
    for (int j = 0; j < N; ++j)
      worst = std::max(worst, std::abs(omega.field(0, 0)[static_cast<std::size_t>(i) * N + j] - want));
  }
  CHECK(worst <= 1e-12);

  // Energy: mean of cos^2 is exactly 1/2 on the grid.
  CHECK(ym_energy(A) == doctest::Approx(0.5 * amp * amp).epsilon(1e-12));
  CHECK(std::abs(ym_energy(A) - 19.7392088) < 0.1);  // (2 pi)^2 / 2 up to O(h^2)
}

TEST_CASE("curvature of a constant nonabelian connection is the bracket term") {
  Grid g(2, {8, 8});
  auto so3 = LieAlgebra::make("so:3");
  Form a(g, 1, so3);
  const double c1 = 0.7, c2 = -1.3;
  for (std::size_t p = 0; p < g.npoints(); ++p) {
    a.field(0, 0)[p] = c1;  // c1 e1 dx0
    a.field(1, 1)[p] = c2;  // c2 e2 dx1
  }
  Form omega = curvature(ConnectionField(a));
  // Omega = 1/2 [A^A] = c1 c2 [e1,e2] dx0^dx1 = -c1 c2 e3 dx0^dx1.
  for (std::size_t p = 0; p < g.npoints(); ++p) {
    CHECK(omega.field(0, 2)[p] == doctest::Approx(-c1 * c2).epsilon(1e-14));
    CHECK(omega.field(0, 0)[p] == 0.0);
    CHECK(omega.field(0, 1)[p] == 0.0);
  }
}

TEST_CASE("covariant derivative of a scalar field matches the hand formula") {
  const int N = 8;
  Grid g(2, {N, N});
  auto so3 = LieAlgebra::make("so:3");
  Form a(g, 1, so3);
  for (std::size_t p = 0; p < g.npoints(); ++p) a.field(0, 0)[p] = 1.0;  // e1 dx0
  Form w = Form(g, 0, so3);
  Rng rng(77);
  for (std::size_t p = 0; p < g.npoints(); ++p) w.field(0, 1)[p] = rng.symm();  // f e2

  Form dw = covariant_derivative(ConnectionField(a), w);
  const double h = 1.0 / N;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      const std::size_t p = static_cast<std::size_t>(i) * N + j;
      const std::size_t up0 = static_cast<std::size_t>((i + 1) % N) * N + j;
      const std::size_t up1 = static_cast<std::size_t>(i) * N + (j + 1) % N;
      const double f = w.field(0, 1)[p];
      CHECK(dw.field(0, 1)[p] == doctest::Approx((w.field(0, 1)[up0] - f) / h).epsilon(1e-12));
      CHECK(dw.field(1, 1)[p] == doctest::Approx((w.field(0, 1)[up1] - f) / h).epsilon(1e-12));
      // [e1, f e2] = -f e3 lands in the dx0 slot only.
      CHECK(dw.field(0, 2)[p] == doctest::Approx(-f).epsilon(1e-14));
      CHECK(dw.field(1, 2)[p] == 0.0);
      CHECK(dw.field(0, 0)[p] == 0.0);
      CHECK(dw.field(1, 0)[p] == 0.0);
    }
}

TEST_CASE("covariant coderivative is the exact adjoint of the covariant derivative") {
  auto so3 = LieAlgebra::make("so:3");
  for (int n = 2; n <= 3; ++n) {
    Grid g(n, std::vector<int>(n, 8));
    for (int k = 0; k + 1 <= n; ++k) {
      for (int trial = 0; trial < 20; ++trial) {
        const std::uint64_t s = 1000 * n + 100 * k + trial;
        ConnectionField A(random_form(g, 1, so3, s));
        Form w = random_form(g, k, so3, s + 31);
        Form eta = random_form(g, k + 1, so3, s + 57);
        const double lhs = pairing(covariant_derivative(A, w), eta);
        const double rhs = pairing(w, covariant_coderivative(A, eta));
        const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-30});
        CHECK(std::abs(lhs - rhs) / scale <= 1e-12);
      }
    }
  }
}

TEST_CASE("strong residual of the abelian sine connection matches the stencil eigenvalue") {
  const int N = 64;
  Grid g(2, {N, N});
  auto alg = LieAlgebra::make("abelian:1");
  Form a(g, 1, alg);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      a.field(1, 0)[static_cast<std::size_t>(i) * N + j] = std::sin(kTwoPi * g.coord(0, i));
  Form r = ym_residual_strong(ConnectionField(a));
  const double mu = mode_eigenvalue(1, N);
  const double norm = lp_norm(r, 2.0);
  CHECK(norm == doctest::Approx(mu * std::sqrt(0.5)).epsilon(1e-10));
  // Continuum value (2 pi)^2 / sqrt(2) ~ 27.92, approached at O(h^2).
  CHECK(std::abs(norm - 27.9156) < 0.05);
  // The residual stays in the dx1 / e1 slot.
  double off = 0.0;
  for (std::size_t p = 0; p < g.npoints(); ++p) off = std::max(off, std::abs(r.field(0, 0)[p]));
  CHECK(off <= 1e-13);
}

TEST_CASE("bianchi residual vanishes by degree on n = 2 and for abelian coefficients") {
  Grid g(2, {8, 8});
  auto so3 = LieAlgebra::make("so:3");
  CHECK(bianchi_residual(ConnectionField(random_form(g, 1, so3, 5))) == 0.0);

  Grid g3(3, {8, 8, 8});
  auto ab = LieAlgebra::make("abelian:2");
  // D_A Omega = d(dA) = 0 exactly.
  CHECK(bianchi_residual(ConnectionField(random_form(g3, 1, ab, 6))) <= 1e-12);
}

TEST_CASE("bianchi residual decays at first order for so(3) on the 3-torus") {
  auto so3 = LieAlgebra::make("so:3");
  TrigPolyForm poly = TrigPolyForm::random(3, 1, so3, 404);
  std::vector<double> resid;
  for (int N : {16, 32, 64}) {
    Grid g(3, {N, N, N});
    resid.push_back(bianchi_residual(ConnectionField(poly.sample(g))));
  }
  const double r1 = std::log2(resid[0] / resid[1]);
  const double r2 = std::log2(resid[1] / resid[2]);
  CHECK(r1 >= 0.9);
  CHECK(r2 >= 0.9);
}

TEST_CASE("anti-self-dual defect: constant curvature example and the asd 2-form") {
  Grid g(4, {6, 6, 6, 6});
  auto so3 = LieAlgebra::make("so:3");
  Form a(g, 1, so3);
  const double c1 = 0.6, c2 = 0.9;
  for (std::size_t p = 0; p < g.npoints(); ++p) {
    a.field(0, 0)[p] = c1;
    a.field(1, 1)[p] = c2;
  }
  // Omega = -c1 c2 e3 dx0^dx1, *Omega = -c1 c2 e3 dx2^dx3, defect = sqrt(2)|c1 c2|.
  CHECK(asd_defect(ConnectionField(a)) ==
        doctest::Approx(std::sqrt(2.0) * c1 * c2).epsilon(1e-12));

  // Convention check: dx0^dx1 - dx2^dx3 is anti-self-dual, the defect vanishes.
  auto ab = LieAlgebra::make("abelian:1");
  Form f(g, 2, ab);
  for (std::size_t p = 0; p < g.npoints(); ++p) {
    f.field(0, 0)[p] = 1.0;   // component {0,1}
    f.field(5, 0)[p] = -1.0;  // component {2,3}
  }
  CHECK(lp_norm(form_add(hodge_star(f), f), 2.0) == 0.0);

  Grid g2(2, {8, 8});
  CHECK_THROWS_AS(asd_defect(ConnectionField(random_form(g2, 1, so3, 7))), DegreeError);
}

TEST_CASE("ym energy scales quadratically and ignores constant abelian shifts") {
  Grid g(2, {16, 16});
  auto ab = LieAlgebra::make("abelian:2");
  Form a = TrigPolyForm::random(2, 1, ab, 99).sample(g);
  const double e1 = ym_energy(ConnectionField(a));
  Form a3 = a;
  form_scale(3.0, a3);
  CHECK(ym_energy(ConnectionField(a3)) == doctest::Approx(9.0 * e1).epsilon(1e-12));

  Form shifted = a;
  for (std::size_t p = 0; p < g.npoints(); ++p) shifted.field(0, 1)[p] += 2.5;
  CHECK(ym_energy(ConnectionField(shifted)) == doctest::Approx(e1).epsilon(1e-12));
}

TEST_CASE("ym relax: zero connection is a fixed point") {
  Grid g(2, {8, 8});
  auto so3 = LieAlgebra::make("so:3");
  auto [A, trace] = ym_relax(ConnectionField(Form(g, 1, so3)));
  CHECK(trace.converged);
  CHECK(trace.steps.size() == 1);
  CHECK(trace.steps[0].energy == 0.0);
  CHECK(linf(A.a) == 0.0);
}

TEST_CASE("ym relax drives an abelian connection to a weak solution") {
  Grid g(2, {16, 16});
  auto ab = LieAlgebra::make("abelian:1");
  Form a = TrigPolyForm::random(2, 1, ab, 2024).sample(g);
  RelaxConfig cfg;
  // The stability cap ties the step to the stiffest stencil mode, so the
  // smooth modes contract at a linear rate; the budget reflects that.
  cfg.max_steps = 4000;
  cfg.grad_tol = 1e-9;
  auto [A, trace] = ym_relax(ConnectionField(a), cfg);
  CHECK(trace.converged);
  for (std::size_t i = 1; i < trace.steps.size(); ++i)
    CHECK(trace.steps[i].energy <= trace.steps[i - 1].energy + 1e-15);

  auto bank = make_test_bank(2, 1, ab, 6, 17);
  CHECK(ym_residual_weak(A, bank) <= 1e-6);
  // The flow only removes curvature; for abelian fields the harmonic part is
  // the componentwise mean, which is conserved.
  auto mean0 = component_means(a);
  auto mean1 = component_means(A.a);
  for (std::size_t i = 0; i < mean0.size(); ++i)
    CHECK(mean0[i] == doctest::Approx(mean1[i]).epsilon(1e-10));
}

TEST_CASE("ym relax reduces so(3) energy monotonically") {
  Grid g(2, {16, 16});
  auto so3 = LieAlgebra::make("so:3");
  Form a = TrigPolyForm::random(2, 1, so3, 55).sample(g);
  form_scale(0.4, a);
  RelaxConfig cfg;
  cfg.max_steps = 40;
  cfg.grad_tol = 1e-12;
  auto [A, trace] = ym_relax(ConnectionField(a), cfg);
  REQUIRE(trace.steps.size() >= 2);
  for (std::size_t i = 1; i < trace.steps.size(); ++i)
    CHECK(trace.steps[i].energy <= trace.steps[i - 1].energy + 1e-15);
  CHECK(trace.steps.back().energy < trace.steps.front().energy);
  CHECK(trace.steps.back().residual_norm < trace.steps.front().residual_norm);
}

TEST_CASE("ym relax line search exhaustion raises a flow error with the trace") {
  Grid g(2, {8, 8});
  auto ab = LieAlgebra::make("abelian:1");
  Form a = TrigPolyForm::random(2, 1, ab, 3).sample(g);
  RelaxConfig cfg;
  cfg.max_steps = 5;
  cfg.grad_tol = 1e-14;
  // An unattainable sufficient-decrease fraction exhausts the halvings.
  cfg.armijo_c = 1e12;
  cfg.max_halvings = 5;
  bool threw = false;
  try {
    ym_relax(ConnectionField(a), cfg);
  } catch (const FlowError& e) {
    threw = true;
    CHECK(!e.energy_trace.empty());
  }
  CHECK(threw);
}

TEST_CASE("weak residual rejects malformed banks") {
  Grid g(2, {8, 8});
  auto so3 = LieAlgebra::make("so:3");
  ConnectionField A(random_form(g, 1, so3, 11));
  CHECK_THROWS_AS(ym_residual_weak(A, {}), ArgumentError);
  auto bad = make_test_bank(2, 2, so3, 2, 5);  // 2-forms cannot test a connection
  CHECK_THROWS_AS(ym_residual_weak(A, bad), ArgumentError);
}

TEST_CASE("connection snapshots round-trip bitwise") {
  Grid g(2, {8, 8});
  auto so3 = LieAlgebra::make("so:3");
  ConnectionField A(random_form(g, 1, so3, 123));
  const std::string path = "gauge_roundtrip.bin";
  save_connection(A, path);
  ConnectionField B = load_connection(path);
  CHECK(B.a.algebra()->label() == "so:3");
  REQUIRE(B.a.data().size() == A.a.data().size());
  CHECK(B.a.data() == A.a.data());
  std::remove(path.c_str());
  std::remove((path + ".meta").c_str());
}

TEST_CASE("curvature needs at least two dimensions") {
  Grid g(1, {8});
  auto so3 = LieAlgebra::make("so:3");
  CHECK_THROWS_AS(curvature(ConnectionField(random_form(g, 1, so3, 1))), DegreeError);
}
