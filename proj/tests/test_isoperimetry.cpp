#include "doctest.h"
#include "helpers.hpp"
#include "jumpiso/isoperimetry.hpp"

using namespace jumpiso;
using testing_util::two_point;

namespace {

// Brute force over all proper subsets with the direct flow sum.
double brute_kappa(const Model& md, double s, std::uint64_t* arg = nullptr) {
  const int m = md.size();
  double best = kInf;
  std::uint64_t bm = 0;
  for (std::uint64_t a = 1; a + 1 < (std::uint64_t{1} << m); ++a) {
    const double mass = md.space.mass(a);
    if (!(mass < s)) continue;
    const double r = flow(md.space, md.kernel, md.gamma, a) / mass;
    if (r < best) {
      best = r;
      bm = a;
    }
  }
  if (arg) *arg = bm;
  return best;
}

Model disconnected_model() {
  Vec mu(4);
  mu << 1.0, 2.0, 0.5, 1.5;
  FiniteMeasureSpace s(mu);
  Mat j = Mat::Zero(4, 4);
  j(0, 1) = j(1, 0) = 2.0;
  j(2, 3) = j(3, 2) = 1.0;
  return Model(s, JumpKernel(s, j));
}

}  // namespace

TEST_CASE("two-point profile") {
  const Model md = two_point(3.0);
  const auto P = enumerate_profile(md, true);
  REQUIRE(P.entries.size() == 2);
  for (const auto& e : P.entries) CHECK(e.ratio() == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(std::isinf(P.kappa(1.0)));
  CHECK(std::isinf(P.kappa(0.5)));
  CHECK(P.kappa(1.0000001) == doctest::Approx(3.0));
  CHECK(P.kappa(2.0) == doctest::Approx(3.0));
  CHECK(P.kappa(2.5) == 0.0);          // the whole space has mass 2 and zero flow
  CHECK(P.kappa_proper(2.5) == doctest::Approx(3.0));
  CHECK(P.argmin(2.0)->mask == 1);     // tie broken toward the smaller bitmask
}

TEST_CASE("profile agrees with brute force, ties to the smallest bitmask") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    GeneratorOptions o;
    o.random_gamma = seed % 2 == 0;
    const int m = 3 + static_cast<int>(seed % 8);
    const Model md = random_model(m, seed, o);
    const auto P = enumerate_profile(md);
    std::vector<double> grid = log_grid(md.space.min_mass() * 0.5, md.space.total_mass() * 2, 40);
    for (std::uint64_t a = 1; a + 1 < (std::uint64_t{1} << m); a += 3) grid.push_back(md.space.mass(a));
    for (double s : grid) {
      std::uint64_t arg = 0;
      const double b = brute_kappa(md, s, &arg);
      const double p = P.kappa_proper(s);
      if (std::isinf(b)) {
        CHECK(std::isinf(p));
      } else {
        CHECK(std::abs(p - b) <= 1e-11 * b);
        if (p == b) CHECK(P.argmin(s)->mask == arg);
      }
    }
  }
}

TEST_CASE("flows: scaling, complement symmetry and incremental accuracy") {
  const Model md = random_model(9, 42);
  const auto P = enumerate_profile(md, true);
  REQUIRE(P.entries.size() == 510);
  const std::uint64_t full = (1U << 9) - 1;
  for (const auto& e : P.entries) {
    CHECK(e.flow >= 0.0);
    const auto& c = P.entries[static_cast<std::size_t>((full ^ e.mask) - 1)];
    CHECK(c.mask == (full ^ e.mask));
    CHECK(std::abs(c.flow - e.flow) <= 1e-12 * e.flow);
    CHECK(std::abs(e.flow - flow(md.space, md.kernel, md.gamma, e.mask)) <= 1e-12 * e.flow);
  }
  WeightFunction g3{md.gamma.gamma * 2.5};
  const auto Q = enumerate_profile(md.space, md.kernel, g3, true);
  for (std::size_t i = 0; i < P.entries.size(); ++i)
    CHECK(Q.entries[i].flow == doctest::Approx(2.5 * P.entries[i].flow).epsilon(1e-12));
}

TEST_CASE("long gray-code runs stay accurate and parallel ranges agree") {
  const Model md = random_model(17, 5);
  const auto P = enumerate_profile(md, true, 1);
  const auto Q = enumerate_profile(md, false, 3);
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const auto& e = P.entries[static_cast<std::size_t>(rng.below(P.entries.size()))];
    CHECK(std::abs(e.flow - flow(md.space, md.kernel, md.gamma, e.mask)) <= 1e-11 * e.flow);
  }
  for (double s : log_grid(0.05, 200, 60)) {
    if (std::isinf(P.kappa(s))) CHECK(std::isinf(Q.kappa(s)));
    else CHECK(P.kappa(s) == doctest::Approx(Q.kappa(s)).epsilon(1e-12));
    if (P.argmin(s)) CHECK(P.argmin(s)->mask == Q.argmin(s)->mask);
  }
  CHECK_THROWS_AS(enumerate_profile(random_model(25, 1)), std::invalid_argument);
}

TEST_CASE("kappa is non-increasing in s") {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    const Model md = random_model(3 + static_cast<int>(seed % 9), seed);
    const auto P = enumerate_profile(md);
    double prev = kInf;
    for (double s : log_grid(1e-2, 1e3, 200)) {
      CHECK(P.kappa(s) <= prev);
      prev = P.kappa(s);
    }
  }
}

TEST_CASE("sampled profile is an upper envelope and deterministic") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const Model md = random_model(4 + static_cast<int>(seed % 9), seed);
    const auto E = enumerate_profile(md);
    const auto S = sampled_profile(md.space, md.kernel, md.gamma, 30, seed);
    const auto S2 = sampled_profile(md.space, md.kernel, md.gamma, 30, seed);
    CHECK_FALSE(S.exact);
    CHECK(S.csv() == S2.csv());
    for (double s : log_grid(1e-2, 1e3, 120)) CHECK(S.kappa(s) >= E.kappa(s) * (1 - 1e-12));
  }
  const Model md = random_model(7, 3);
  const auto S0 = sampled_profile(md.space, md.kernel, md.gamma, 0);
  CHECK(S0.entries.size() == 7);
  for (const auto& e : S0.entries) CHECK(__builtin_popcountll(e.mask) == 1);
}

TEST_CASE("kappa_orlicz examples") {
  const Model md = two_point(3.0);
  CHECK(kappa_orlicz(md.space, md.kernel, young::power(2)) == doctest::Approx(3.0).epsilon(1e-14));
  const Model d = disconnected_model();
  CHECK(kappa_orlicz(d.space, d.kernel, young::power(1.5)) == 0.0);
  const Model r = random_model(8, 11);
  const YoungFunction N = young::log_plus(2, 1, 1);
  const double k1 = kappa_orlicz(r.space, r.kernel, N);
  JumpKernel k4(r.space, r.kernel.j() * 4.0);
  CHECK(kappa_orlicz(r.space, k4, N) == doctest::Approx(4 * k1).epsilon(1e-12));
}

TEST_CASE("thm20 forward: indicator family gives equality") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const Model md = random_model(3 + static_cast<int>(seed), seed);
    const auto ind = proper_indicators(md.size());
    for (const auto& N : {young::power(1.5), young::vee(2, 0.5, 1.5), young::log_minus(2, 1, 1)}) {
      const double C = empirical_los_constant(md.space, md.kernel, N, ind);
      const Report r = thm20_forward(md.space, md.kernel, N, C, ind);
      CHECK(r.pass());
      CHECK(std::abs(r.worst_slack()) <= 1e-10);
      // A larger family can only raise the constant.
      auto fam = ind;
      for (const auto& f : random_functions(md.size(), 50, seed, {false, true})) fam.push_back(f);
      const double C2 = empirical_los_constant(md.space, md.kernel, N, fam);
      CHECK(C2 >= C);
      CHECK(thm20_forward(md.space, md.kernel, N, C2, fam).pass());
      // j scaled by c: kappa by c, C by 1/c.
      JumpKernel k3(md.space, md.kernel.j() * 3.0);
      CHECK(empirical_los_constant(md.space, k3, N, ind) == doctest::Approx(C / 3).epsilon(1e-10));
    }
  }
  CHECK_THROWS_AS(thm20_forward(two_point(1).space, two_point(1).kernel, young::power(2), 0.0, {}),
                  std::invalid_argument);
}

TEST_CASE("thm20 backward for powers on random spaces") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Model md = random_model(3 + static_cast<int>(seed % 6), seed);
    for (double p : {1.2, 1.5, 2.0, 3.0}) {
      const auto fam = random_functions(md.size(), 500, 1000 + seed, {false, true});
      const Report r = thm20_backward(md.space, md.kernel, young::power(p), fam);
      CHECK(r.violations() == 0);
      CHECK(r.checks.size() == 500);
    }
  }
  const Model md = random_model(5, 2);
  const Report z = thm20_backward(md.space, md.kernel, young::power(2), {Vec::Zero(5)});
  CHECK(z.checks.size() == 1);
  CHECK(z.checks[0].lhs == 0.0);
  CHECK(z.checks[0].rhs == 0.0);
  // Indicator: ||1_A|| = 1/N^{-1}(1/mu(A)) against C * 2 J(A): slack at least 1 - c_N.
  const double p = 2.0;
  const Report ri = thm20_backward(md.space, md.kernel, young::power(p), proper_indicators(5));
  CHECK(ri.worst_slack() >= 1 - 1 / p - 1e-9);
  CHECK_THROWS_AS(thm20_backward(disconnected_model().space, disconnected_model().kernel, young::power(2), {}),
                  std::invalid_argument);
}

TEST_CASE("thm20 Poincare forward and backward") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Model md = random_model(3 + static_cast<int>(seed % 7), seed);
    const int m = md.size();
    const double C1 = 0.1 * static_cast<double>(seed);
    auto fam = random_functions(m, 300, seed);
    for (const auto& f : proper_indicators(m)) fam.push_back(f);
    fam.push_back(Vec::Ones(m));
    const double C2 = empirical_pi0_constant(md.space, md.kernel, C1, fam);
    CHECK(thm20_poincare(md.space, md.kernel, C1, C2, PoincareMode::forward).pass());
    const double C2t = pi0prime_constant(md.space, md.kernel, C1);
    CHECK(C2t >= 1.0 / md.space.total_mass() - 1e-12);
    const Report b = thm20_poincare(md.space, md.kernel, C1, C2t, PoincareMode::backward, fam);
    CHECK(b.pass());
    CHECK(b.notes.empty());
  }
  const Model d = disconnected_model();
  // Zero-flow components force C2tilde >= 1/mu(component).
  const double need = pi0prime_constant(d.space, d.kernel, 100.0);
  CHECK(need == doctest::Approx(1.0 / 2.0).epsilon(1e-14));  // components have masses 3 and 2
}

TEST_CASE("co-area identity and subset infimum") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Model md = random_model(3 + static_cast<int>(seed % 8), seed);
    auto fam = random_functions(md.size(), 200, seed, {true, seed % 2 == 0});
    const Report r = coarea_check(md.space, md.kernel, fam);
    CHECK(r.pass());
  }
  // Two-valued f: one level set.
  const Model md = random_model(6, 9);
  const Vec f = 2.5 * indicator(6, 0b010110);
  CHECK(layer_cake_l1(md.space, md.kernel, md.gamma, f) == doctest::Approx(2 * 2.5 * flow(md.space, md.kernel, md.gamma, 0b010110)));
  // The minimizing indicator attains the infimum.
  const auto P = enumerate_profile(md);
  const ProfileEntry* e = P.argmin(kInf);
  const Vec g = indicator(6, e->mask);
  CHECK(l1_form(md.space, md.kernel, md.gamma, g) / (2 * md.space.integral(g)) ==
        doctest::Approx(P.kappa_min()).epsilon(1e-13));
}

TEST_CASE("profile CSV and JSON") {
  const Model md = two_point(3.0);
  const auto P = enumerate_profile(md, true);
  CHECK(P.csv() == "mass,flow,subset\n1,3,0x1\n1,3,0x2\n");
  CHECK(P.to_json()["frontier"].size() == 1);
}
