#include "doctest.h"
#include "helpers.hpp"
#include "jumpiso/generate.hpp"
#include "jumpiso/young.hpp"

using namespace jumpiso;
using testing_util::vec;

TEST_CASE("phi_h for a pure power profile") {
  // h(r) = r^{1/2}, n = 1, alpha = 1: Phi_h(s) = 4 sqrt(s).
  const ProfileH P = ProfileH::power(1.0, 0.5, 1.0, 1.0);
  ProfileH Q = P;
  Q.pure_power = false;  // force the quadrature path
  CHECK(phi_h(P, 0.0) == 0.0);
  for (double s : {1e-6, 1e-2, 1.0, 3.0, 1e4}) {
    CHECK(phi_h(P, s) == doctest::Approx(4 * std::sqrt(s)).epsilon(1e-13));
    CHECK(phi_h(Q, s) == doctest::Approx(4 * std::sqrt(s)).epsilon(1e-9));
  }
}

TEST_CASE("phi_h reports divergence") {
  const ProfileH bad = ProfileH::power(1.0, 1.0, 1.0, 1.0);  // r^{alpha-1}/h = 1/r
  CHECK_THROWS_AS(phi_h(bad, 1.0), DivergenceError);
  ProfileH q = bad;
  q.pure_power = false;
  CHECK_THROWS_AS(phi_h(q, 1.0), DivergenceError);
}

TEST_CASE("invert_phi recovers u^2/16 and round-trips") {
  const ProfileH P = ProfileH::power(1.0, 0.5, 1.0, 1.0);
  const YoungFunction N = invert_phi(P);
  CHECK(N(0.0) == 0.0);
  for (double u : {1e-5, 0.01, 0.3, 1.0, 7.0, 1e3}) CHECK(N(u) == doctest::Approx(u * u / 16).epsilon(1e-9));
  for (double s : log_grid(1e-6, 1e6, 37)) CHECK(phi_h(P, N(phi_h(P, s))) == doctest::Approx(phi_h(P, s)).epsilon(1e-7));
}

TEST_CASE("invert_phi round trip for a two-regime profile") {
  const double a1 = 0.6, a2 = 1.4, n = 2;
  ProfileH P;
  P.alpha = 1.0;
  P.n = n;
  P.h = [=](double r) { return std::min(std::pow(r, 1 - a1 / 2), std::pow(r, 1 - a2 / 2)); };
  CHECK(P.class_condition(log_grid(1e-6, 1e6, 200)));
  const YoungFunction N = invert_phi(P, 1e-10, 1e10, 16);
  for (double s : log_grid(1e-8, 1e8, 33)) {
    const double u = phi_h(P, s);
    CHECK(phi_h(P, N(u)) == doctest::Approx(u).epsilon(1e-7));
  }
  // Phi_h <= c5 (s^{(n-a1/2)/n} v s^{(n-a2/2)/n}) with a bounded ratio.
  double lo = kInf, hi = 0.0;
  for (double s : log_grid(1e-8, 1e8, 161)) {
    const double ref = std::max(std::pow(s, (n - a1 / 2) / n), std::pow(s, (n - a2 / 2) / n));
    const double r = phi_h(P, s) / ref;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  CHECK(hi / lo < 10.0);
}

TEST_CASE("builtin families: exact collapses and values") {
  const YoungFunction w = builtin("wedge", {{"n", 1}, {"alpha1", 0.8}, {"alpha2", 0.8}});
  const YoungFunction p = young::power(1.0 / (1.0 - 0.4));
  for (double s : {0.01, 0.5, 1.0, 2.0, 50.0}) CHECK(w(s) == doctest::Approx(p(s)).epsilon(1e-15));
  CHECK(builtin("wedge", {{"n", 2}, {"alpha1", 0.5}, {"alpha2", 1.5}})(1.0) == 1.0);
  const YoungFunction lp = builtin("log_plus", {{"n", 2}, {"alpha", 1}, {"q", 0}});
  for (double s : {0.01, 1.0, 9.0}) CHECK(lp(s) == doctest::Approx(std::pow(s, 2.0 / 1.5)).epsilon(1e-15));
  CHECK_THROWS_AS(builtin("nonsense", {}), std::invalid_argument);
}

TEST_CASE("convex builtin families pass the grid checks") {
  const auto grid = young_check_grid();
  std::vector<YoungFunction> fams = {
      young::power(1.5), young::power(3.0), young::vee(1, 0.5, 1.5), young::vee(3, 0.3, 1.9),
      young::log_plus(2, 1.0, 1.0), young::log_plus(1, 0.7, -0.5), young::log_minus(2, 1.0, 1.0),
      young::log_minus(1, 1.5, -1.0), young::plog(2.0, 1.0, +1), young::plog(1.5, -0.5, -1)};
  for (const auto& N : fams) {
    INFO(N.tag().dump());
    CHECK(N(0.0) == 0.0);
    CHECK(midpoint_convex([&](double s) { return N(s); }, grid));
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) CHECK(N(grid[i + 1]) > N(grid[i]));
    for (double r : log_grid(1e-6, 1e6, 25)) {
      const double x = N.inverse(r);
      CHECK(N(x) <= r * (1 + 1e-12));
      CHECK(N(x * (1 + 1e-9)) >= r);
    }
  }
  CHECK(young::log_plus(2, 1.0, 1.0).param("lambda") >= 2.0);
}

TEST_CASE("wedge families are the minimum of two convex branches") {
  // The minimum of two powers has a concave kink at s = 1; each branch is convex.
  const YoungFunction w = young::wedge(1, 0.5, 1.5);
  double worst = 0.0;
  CHECK_FALSE(midpoint_convex([&](double s) { return w(s); }, young_check_grid(), 1e-9, &worst));
  CHECK(midpoint_convex([&](double s) { return w(s); }, log_grid(1e-8, 0.999, 200)));
  CHECK(midpoint_convex([&](double s) { return w(s); }, log_grid(1.001, 1e8, 200)));
  const YoungFunction t = young::tilde(2, 1.0);
  CHECK(t(1.0) == 1.0);
  CHECK(t(0.1) == doctest::Approx(std::pow(0.1, 2.0)).epsilon(1e-15));
}

TEST_CASE("c_N values") {
  for (double p : {1.2, 1.5, 2.0, 3.0}) CHECK(std::abs(c_N(young::power(p)) - 1.0 / p) <= 1e-9);
  CHECK(c_N(young::power(1.0)) == doctest::Approx(1.0).epsilon(1e-12));
  const double p1 = 1.0 / (1 - 0.25), p2 = 1.0 / (1 - 0.75);
  CHECK(c_N(young::wedge(1, 0.5, 1.5)) == doctest::Approx(std::min(1 / p1, 1 / p2)).epsilon(1e-9));
  CHECK(c_N(young::vee(1, 0.5, 1.5)) == doctest::Approx(std::min(1 / p1, 1 / p2)).epsilon(1e-9));
}

TEST_CASE("orlicz_norm basics") {
  const Model m = random_model(6, 4);
  Rng rng(9);
  Vec f(6);
  for (int i = 0; i < 6; ++i) f[i] = rng.uniform(-3, 3);
  CHECK(orlicz_norm(m.space, young::power(2), f).value() ==
        doctest::Approx(std::sqrt(m.space.norm2_sq(f))).epsilon(1e-11));
  CHECK(orlicz_norm(m.space, young::power(2), Vec::Zero(6)).value() == 0.0);
  const YoungFunction N = young::log_plus(2, 1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double c = rng.uniform(-5, 5);
    for (int i = 0; i < 6; ++i) f[i] = rng.uniform(-3, 3);
    const double a = orlicz_norm(m.space, N, f).value();
    CHECK(orlicz_norm(m.space, N, c * f).value() == doctest::Approx(std::abs(c) * a).epsilon(1e-10));
  }
}

TEST_CASE("orlicz_norm of indicators matches the closed form") {
  std::vector<YoungFunction> fams = {young::power(1.5), young::power(2), young::wedge(1, 0.5, 1.5),
                                     young::vee(2, 0.5, 1.5), young::log_plus(2, 1, 1), young::log_minus(2, 1, 1)};
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const int m = 3 + static_cast<int>(seed % 6);
    const Model md = random_model(m, seed);
    for (const auto& N : fams) {
      for (std::uint64_t mask = 1; mask < (1ULL << m); ++mask) {
        Vec f = Vec::Zero(m);
        for (int i = 0; i < m; ++i) f[i] = (mask >> i & 1U) ? 1.0 : 0.0;
        const double a = orlicz_norm(md.space, N, f).value();
        const double b = indicator_norm(N, md.space.mass(mask));
        CHECK(std::abs(a - b) <= 1e-9 * b);
      }
    }
  }
}

TEST_CASE("gauge triangle inequality for convex families") {
  std::vector<YoungFunction> fams = {young::power(1.5), young::vee(2, 0.5, 1.5), young::log_plus(2, 1, 1),
                                     young::log_minus(2, 1, -1)};
  Rng rng(77);
  for (const auto& N : fams) {
    for (int trial = 0; trial < 100; ++trial) {
      const Model md = random_model(5, 500 + static_cast<std::uint64_t>(trial));
      Vec f(5), g(5);
      for (int i = 0; i < 5; ++i) {
        f[i] = rng.uniform(-2, 2);
        g[i] = rng.uniform(-2, 2);
      }
      const double lhs = orlicz_norm(md.space, N, f + g).value();
      const double rhs = orlicz_norm(md.space, N, f).value() + orlicz_norm(md.space, N, g).value();
      CHECK(lhs <= rhs + 1e-8);
    }
  }
}

TEST_CASE("scaling bound check") {
  const Model md = random_model(7, 21);
  Rng rng(3);
  std::vector<Vec> fam;
  for (int k = 0; k < 30; ++k) {
    Vec f(7);
    for (int i = 0; i < 7; ++i) f[i] = rng.uniform(-1, 1);
    fam.push_back(f);
  }
  for (std::uint64_t mask : {1ULL, 6ULL, 45ULL}) {
    Vec f = Vec::Zero(7);
    for (int i = 0; i < 7; ++i) f[i] = (mask >> i & 1U) ? 1.0 : 0.0;
    fam.push_back(f);
  }
  const YoungFunction N = young::vee(2, 0.5, 1.5);
  const Report r1 = scaling_bound_check(md.space, N, 1.0, fam);
  CHECK(r1.pass());
  CHECK(std::abs(r1.worst_slack()) <= 1e-11);
  const double c = 4.0 / (1.0 - std::exp(-1.0));
  CHECK(scaling_bound_check(md.space, N, c, fam).pass());
  // Indicator: ||1_A||_{cN} = 1/N^{-1}(1/(c mu(A))).
  const double mass = md.space.mass(6);
  CHECK(orlicz_norm(md.space, N.scaled(c), fam[31]).value() ==
        doctest::Approx(1.0 / N.inverse(1.0 / (c * mass))).epsilon(1e-10));
}

TEST_CASE("domination") {
  const auto grid = log_grid(1e-8, 1e8, 321);
  const auto same = domination(young::power(2), young::power(2), grid);
  CHECK(same.dominated);
  CHECK(same.sup_ratio == doctest::Approx(1.0));
  const auto cube = domination(young::power(3), young::power(2), grid);
  CHECK_FALSE(cube.dominated);
  CHECK(cube.witness == "s->inf");
  CHECK(domination(young::power(2), young::power_vee(2, 3), grid).dominated);
  const auto low = domination(young::power(2), young::power(3), grid);
  CHECK_FALSE(low.dominated);
  CHECK(low.witness == "s->0");
}

TEST_CASE("ratio conventions") {
  CHECK(ext_ratio(0, 0) == 1.0);
  CHECK(ext_ratio(kInf, kInf) == 1.0);
  CHECK(ext_ratio(2, 0) == kInf);
  CHECK(ext_ratio(2, kInf) == 0.0);
}

TEST_CASE("CSV round trip of a tabulated function") {
  const YoungFunction N = young::power(2.5);
  const auto grid = log_grid(1e-4, 1e4, 81);
  const YoungFunction T = young_from_csv(young_csv(N, grid));
  for (double s : {1e-3, 0.5, 2.0, 300.0}) CHECK(T(s) == doctest::Approx(N(s)).epsilon(1e-9));
}

TEST_CASE("piecewise-linear inverse is exact") {
  // Phi through (1,2), (3,3), constant after: N = Phi^{-1}.
  const YoungFunction N = piecewise_linear_inverse({1.0, 3.0}, {2.0, 3.0}, "pl");
  CHECK(N(1.0) == doctest::Approx(0.5));
  CHECK(N(2.0) == doctest::Approx(1.0));
  CHECK(N(2.5) == doctest::Approx(2.0));
  CHECK(N(3.0) == doctest::Approx(3.0));
  CHECK(std::isinf(N(3.0001)));
  CHECK(N.inverse(2.0) == doctest::Approx(2.5));
  CHECK(N.inverse(10.0) == doctest::Approx(3.0));
}
