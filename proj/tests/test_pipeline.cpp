#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "jumpiso/pipeline.hpp"

using namespace jumpiso;
using testing_util::two_point;
using testing_util::vec;

namespace {

// Proper-subset profile by direct enumeration, without the frontier.
double brute_kappa_proper(const Model& md, double s) {
  const int m = md.size();
  double best = kInf;
  for (std::uint64_t a = 1; a + 1 < (std::uint64_t{1} << m); ++a) {
    double mass = 0.0;
    for (int i = 0; i < m; ++i)
      if (a >> i & 1U) mass += md.space.mu(i);
    if (mass < s) best = std::min(best, flow(md.space, md.kernel, md.gamma, a) / mass);
  }
  return best;
}

// int_0^s e^{-a/r} dr = s e^{-a/s} - a E1(a/s).
double int_exp_inv(double a, double s) { return s * std::exp(-a / s) + a * std::expint(-a / s); }

// Independent matrix exponential: scaling and squaring with a Taylor series.
Mat expm(const Mat& A) {
  int sq = 0;
  double n = A.cwiseAbs().rowwise().sum().maxCoeff();
  while (n > 0.5) {
    n /= 2;
    ++sq;
  }
  const Mat B = A / std::pow(2.0, sq);
  Mat term = Mat::Identity(A.rows(), A.cols()), sum = term;
  for (int k = 1; k < 30; ++k) {
    term = term * B / k;
    sum += term;
  }
  for (int i = 0; i < sq; ++i) sum = sum * sum;
  return sum;
}

}  // namespace

TEST_CASE("lemma1_core: indicator, zero function and random functions") {
  const Model md = random_model(6, 4);
  const auto P = enumerate_profile(md);
  const GFunction G = GFunction::power(2.0);
  for (std::uint64_t A : {0x1ULL, 0x6ULL, 0x15ULL}) {
    const Vec f = 3.0 * indicator(6, A);
    const Lemma1Core c = lemma1_core(md, P, G, f);
    const double mass = md.space.mass(A);
    const double lam = std::sqrt(1.0 / mass);  // G(lam) mass = 1 on the single level set
    CHECK(c.scale * 3.0 == doctest::Approx(lam).epsilon(1e-12));
    CHECK(c.kappa_variant == "proper");
    // One level set: rhs = lam * flow(A).
    CHECK(c.rhs == doctest::Approx(lam * flow(md.space, md.kernel, md.gamma, A)).epsilon(1e-12));
    // Oracle: midpoint rule on the brute-force profile.
    const int n = 20000;
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      const double u = lam * (k + 0.5) / n;
      acc += brute_kappa_proper(md, 1.0 / (u * u));
    }
    CHECK(c.lhs == doctest::Approx(mass * acc * lam / n).epsilon(2e-3));
    CHECK(c.check.slack >= -1e-9);
  }
  CHECK_THROWS_AS(lemma1_core(md, P, G, Vec::Zero(6)), std::invalid_argument);
  int bad = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Model r = random_model(3 + static_cast<int>(seed % 8), seed);
    const auto Pr = enumerate_profile(r);
    for (const auto& f : random_functions(r.size(), 10, seed))
      if (f.cwiseAbs().maxCoeff() > 0.0) bad += lemma1_core(r, Pr, G, f).check.slack < -1e-9;
  }
  CHECK(bad == 0);
}

TEST_CASE("lemma1_core on a function without zeros uses the full profile") {
  const Model md = random_model(5, 2);
  const auto P = enumerate_profile(md);
  const Lemma1Core c = lemma1_core(md, P, GFunction::power(1.5), vec({1, 2, 3, 4, 5}));
  CHECK(c.kappa_variant == "full");
  CHECK(c.lhs <= c.rhs * (1 + 1e-9));
  // Constant: both sides vanish (every level set is the whole space).
  const Lemma1Core k = lemma1_core(md, P, GFunction::power(1.5), Vec::Ones(5));
  CHECK(k.lhs <= 1e-12);
  CHECK(k.rhs == 0.0);
}

TEST_CASE("lemma1_poincare: constants, indicators, random functions") {
  const Model md = random_model(7, 5);
  const auto P = enumerate_profile(md);
  const double M = md.space.total_mass();
  for (double s : log_grid(0.05 * M, M, 8)) {
    CHECK(lemma1_poincare(md, P, s, {2.0 * Vec::Ones(7)}).pass());
    CHECK(lemma1_poincare(md, P, s, proper_indicators(7)).pass());
    CHECK(lemma1_poincare(md, P, s, random_functions(7, 500, 3)).pass());
  }
  const Report v = lemma1_poincare(md, P, 1.5 * M, {Vec::Ones(7)});
  CHECK(v.checks.empty());
  CHECK(v.notes.size() == 1);
}

TEST_CASE("lemma1_sobolev: two-point closed form") {
  const double j = 2.5;
  const Model md = two_point(j);
  const auto P = enumerate_profile(md);
  const auto out = lemma1_sobolev(md, P, {vec({1.7, 0.0}), vec({0.0, -3.0}), Vec::Zero(2), vec({1.0, 2.0})});
  // kappa_p = j, Phi(t) = t/j on [0, 1]: N(u) = j u for u <= 1/j.
  CHECK(out.N(0.1) == doctest::Approx(j * 0.1));
  CHECK(out.N(0.39) == doctest::Approx(j * 0.39));
  CHECK(std::isinf(out.N(0.41)));
  // ||(x,0)||_N = j|x| = (1/2) l1: equality.
  REQUIRE(out.report.checks.size() == 3);
  CHECK(out.report.checks[0].lhs == doctest::Approx(j * 1.7).epsilon(1e-10));
  CHECK(out.report.checks[0].rhs == doctest::Approx(j * 1.7).epsilon(1e-12));
  CHECK(out.report.checks[2].lhs == 0.0);
  CHECK(out.report.pass());
  CHECK(out.report.info["skipped_nonvanishing"] == 1);
}

TEST_CASE("lemma1_sobolev on random spaces; indicator norms in closed form") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    GeneratorOptions o;
    o.random_gamma = seed % 2 == 0;
    const Model md = random_model(3 + static_cast<int>(seed % 8), seed, o);
    const auto P = enumerate_profile(md);
    FamilyOptions fo;
    fo.force_zero = true;
    auto fam = random_functions(md.size(), 200, seed, fo);
    const auto ind = proper_indicators(md.size());
    fam.insert(fam.end(), ind.begin(), ind.end());
    const auto out = lemma1_sobolev(md, P, fam);
    CHECK(out.report.pass());
    for (std::uint64_t a : {1ULL, 3ULL}) {
      const double mass = md.space.mass(a);
      CHECK(orlicz_norm(md.space, out.N, indicator(md.size(), a)).as_double() ==
            doctest::Approx(indicator_norm(out.N, mass)).epsilon(1e-9));
    }
  }
  // Disconnected: kappa_p vanishes.
  Vec mu = Vec::Ones(3);
  FiniteMeasureSpace s(mu);
  Mat j = Mat::Zero(3, 3);
  j(0, 1) = j(1, 0) = 1.0;
  const Model dis(s, JumpKernel(s, j));
  CHECK_THROWS_AS(lemma1_sobolev(dis, enumerate_profile(dis), {}), std::invalid_argument);
}

TEST_CASE("thm21_young: two-point space with beta = c/r") {
  const double j = 1.5, c = 0.8;
  const Model md = two_point(j);
  auto sg = std::make_shared<const Semigroup>(md.space, md.kernel);
  const ThetaIntegral Theta = ThetaIntegral::for_model(md, sg);
  const RateFunction beta = rates::power(c, 1.0);
  // Theta(t) = (1 - e^{-2jt})/j, beta^{-1}(r) = c/r.
  for (double s : {0.01, 0.3, 1.0, 4.0}) {
    const double oracle = (s - int_exp_inv(2.0 * j * c, s)) / j;
    CHECK(phi_gamma(beta, Theta, s) == doctest::Approx(oracle).epsilon(1e-6));
  }
  CHECK(phi_gamma(beta, Theta, 0.0) == 0.0);
  // Chords of the concave Phi lie below it, so the tabulated N errs upwards only.
  const YoungFunction N = thm21_young(beta, Theta, 4.0);
  for (double s : {0.01, 0.3, 1.0, 3.9}) {
    const double phi = (s - int_exp_inv(2.0 * j * c, s)) / j;
    CHECK(N(phi) >= s * (1 - 1e-9));
    CHECK(N(phi) == doctest::Approx(s).epsilon(1e-3));
  }
  CHECK(N(0.0) == 0.0);
  // Inflating beta enlarges Phi and shrinks N pointwise.
  const YoungFunction N2 = thm21_young(rates::power(2.0 * c, 1.0), Theta, 4.0);
  for (double u : log_grid(1e-4, 0.5, 20)) CHECK(N2(u) <= N(u) * (1 + 1e-12));
}

TEST_CASE("thm21_young: tabulated rate gives an exact piecewise-linear Phi") {
  const double j = 2.0;
  const Model md = two_point(j);
  auto sg = std::make_shared<const Semigroup>(md.space, md.kernel);
  const ThetaIntegral Theta = ThetaIntegral::for_model(md, sg);
  const RateFunction beta = rates::tabulated({0.5, 2.0}, {0.8, 0.6}, 1.0);
  const YoungFunction N = thm21_young(beta, Theta, 4.0);
  // Slopes: Theta(inf) on [0, 0.6), Theta(2) on [0.6, 0.8), Theta(0.5) on [0.8, 1), 0 beyond.
  auto T = [j](double t) { return (1 - std::exp(-2 * j * t)) / j; };
  const double p1 = 0.6 / j, p2 = p1 + 0.2 * T(2.0), p3 = p2 + 0.2 * T(0.5);
  CHECK(N(p1) == doctest::Approx(0.6).epsilon(1e-8));
  CHECK(N(p2) == doctest::Approx(0.8).epsilon(1e-8));
  CHECK(N(p3) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(std::isinf(N(p3 * 1.001)));
  // Degenerate: no gap and beta(inf) > 0.
  Vec mu = Vec::Ones(2);
  FiniteMeasureSpace s(mu);
  const Model dis(s, JumpKernel(s, Mat::Zero(2, 2)));
  auto sg2 = std::make_shared<const Semigroup>(dis.space, dis.kernel);
  CHECK_THROWS_AS(thm21_young(beta, ThetaIntegral::for_model(dis, sg2), 4.0), DivergenceError);
  const Report r = thm21_verify(dis, beta, {vec({1.0, 0.0})});
  CHECK(r.info["hypothesis"] == false);
  CHECK(r.checks.empty());
}

TEST_CASE("thm21_verify at C* on random spaces") {
  CHECK(constants::c_star() == doctest::Approx(3.16395).epsilon(1e-5));
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    GeneratorOptions o;
    o.random_gamma = seed % 3 == 0;
    const Model md = random_model(3 + static_cast<int>(seed % 6), seed, o);
    const RateFunction beta = estimated_rate(md.space, md.kernel, nullptr, log_grid(1e-3, 1e3, 25), 1.01);
    const double limit = 1.0 / (2.0 * beta.at_infinity());
    auto fam = supported_functions(md.space, 200, limit, seed);
    fam.push_back(Vec::Zero(md.size()));
    const Report r = thm21_verify(md, beta, fam);
    CHECK(r.pass());
    CHECK(r.info["empirical_constant"].get<double>() <= constants::c_star());
    CHECK(r.info["skipped_large_support"] == 0);
  }
}

TEST_CASE("rate_from_profile is an exact (PI) rate") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const Model md = random_model(3 + static_cast<int>(seed % 7), seed);
    const auto P = enumerate_profile(md);
    const RateFunction b1 = rate_from_profile(P);
    CHECK(b1.repairs.empty());
    CHECK(b1.at_infinity() == doctest::Approx(2.0 / md.space.total_mass()));
    CHECK(b1(1e-9) == doctest::Approx(2.0 / md.space.min_mass()));
    auto fam = random_functions(md.size(), 300, seed);
    const auto ind = proper_indicators(md.size());
    fam.insert(fam.end(), ind.begin(), ind.end());
    int bad = 0;
    for (const auto& f : fam)
      for (double r : log_grid(1e-3, 1e3, 13)) {
        const double n1 = md.space.norm1(f);
        const double rhs = r * l1_form(md.space, md.kernel, md.gamma, f.cwiseAbs2()) + b1(r) * n1 * n1;
        bad += Check::leq("", md.space.norm2_sq(f), rhs).slack < -1e-9;
      }
    CHECK(bad == 0);
  }
}

TEST_CASE("thm41: N = s^2 on the two-point space by hand") {
  const double j = 3.0;
  const Model md = two_point(j);
  // c_N = 1/2 and kappa_orlicz = N^{-1}(1) j = j, so C = 1/(2 c_N kappa) = 1/j.
  const double C = 1.0 / j;
  const auto fam = random_functions(2, 100, 5);
  const auto rg = log_grid(1e-2, 1e2, 9);
  const ConversionResult out = thm41(young::power(2.0), C, md, fam, rg);
  CHECK(out.report.pass());
  for (double r : rg) {
    CHECK(out.beta1(r) == doctest::Approx(2.0 * std::max(0.5, C * C / (r * r))).epsilon(1e-10));
    CHECK(out.beta(r) == doctest::Approx(4.0 * std::max(0.5, 8.0 * C * C * j / r)).epsilon(1e-10));
  }
  CHECK(out.report.info["c_gamma"].get<double>() == doctest::Approx(j));
  // Below the smallest mass the kappa bound is vacuous.
  const auto first = out.report.checks.front();
  CHECK(std::isinf(first.rhs));
  // A decreasing s^{-1}N(s) is rejected.
  const YoungFunction bad("bad", {}, [](double s) { return std::sqrt(s); }, [](double r) { return r * r; },
                          [](double s) { return 0.5 / std::sqrt(s); });
  CHECK_THROWS_AS(thm41(bad, 1.0, md, fam, rg), std::invalid_argument);
}

TEST_CASE("thm41 on random instances with certified constants") {
  const auto rg = log_grid(1e-3, 1e3, 13);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    GeneratorOptions o;
    o.random_gamma = seed % 2 == 0;
    const Model md = random_model(3 + static_cast<int>(seed % 8), seed, o);
    const auto fam = random_functions(md.size(), 100, seed);
    const auto sob = lemma1_sobolev(md, enumerate_profile(md), {});
    const ConversionResult a = thm41(sob.N, 0.5, md, fam, rg);
    CHECK(a.report.pass());
    CHECK(a.report.notes.empty());
    const YoungFunction N = young::power(1.5);
    const double C = 1.0 / (2.0 * c_N(N) * kappa_orlicz(md.space, md.kernel, N, &md.gamma));
    const ConversionResult b = thm41(N, C, md, fam, rg);
    CHECK(b.report.pass());
    CHECK(b.report.notes.empty());
  }
}

TEST_CASE("thm42: power rate gives a power Young function") {
  const Model md = random_model(5, 9);
  const double p = 2.5, a = p / (p - 1.0);
  const ConversionResult out = thm42(rates::power(1.0, a), md, {}, {1.0});
  REQUIRE_FALSE(out.report.failed_hard);
  const double sup = out.N.param("sup_phi");
  std::vector<double> u, v;
  for (double x : log_grid(sup * 1e-4, sup * 1e-1, 60)) {
    u.push_back(x);
    v.push_back(out.N(x));
  }
  CHECK(fit_loglog(u, v).slope == doctest::Approx(p).epsilon(1e-3));
  CHECK(out.N.inverse(0.0) == 0.0);
}

TEST_CASE("thm42 on random instances with the profile rate") {
  const auto rg = log_grid(1e-3, 1e3, 13);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    GeneratorOptions o;
    o.random_gamma = seed % 2 == 1;
    const Model md = random_model(3 + static_cast<int>(seed % 8), seed, o);
    const RateFunction b1 = rate_from_profile(enumerate_profile(md));
    auto fam = random_functions(md.size(), 100, seed);
    const auto sup = supported_functions(md.space, 100, 0.5 * md.space.total_mass(), seed);
    fam.insert(fam.end(), sup.begin(), sup.end());
    const ConversionResult out = thm42(b1, md, fam, rg);
    CHECK(out.report.pass());
    CHECK(out.report.info["premise_violations"] == 0);
  }
}

TEST_CASE("cor41: four cases round-trip") {
  const std::vector<std::tuple<Cor41Case, double, double>> cases = {
      {Cor41Case::wedge, 1.5, 3.0}, {Cor41Case::vee, 1.5, 3.0}, {Cor41Case::log_inverse, 2.0, 1.0},
      {Cor41Case::log_direct, 2.0, 1.0}, {Cor41Case::log_inverse, 1.8, -0.5}};
  for (const auto& [c, a, b] : cases) {
    const Cor41Result r = cor41(c, a, b, 0.7);
    INFO(r.report.to_json(true).dump());
    CHECK(r.report.pass());
    const double lo = r.report.info["N_over_Nprime"]["min"].get<double>();
    const double hi = r.report.info["N_over_Nprime"]["max"].get<double>();
    CHECK(lo > 0.0);
    CHECK(hi / lo < 1e6);
    for (const auto& e : r.report.info["beta1_ends"])
      CHECK(e["slope_numeric"].get<double>() == doctest::Approx(e["slope_closed"].get<double>()).epsilon(2e-2));
  }
  CHECK_THROWS_AS(cor41(Cor41Case::wedge, 1.0, 2.0), std::invalid_argument);
}

TEST_CASE("cor41 collapses") {
  // p1 = p2: the classical pair.
  auto [N, b] = cor41_pair(Cor41Case::wedge, 2.0, 2.0);
  const RateFunction pw = rates::power(1.0, 2.0);
  for (double r : {0.1, 1.0, 7.0}) CHECK(b(r) == doctest::Approx(pw(r)));
  for (double s : {0.1, 1.0, 7.0}) CHECK(N(s) == doctest::Approx(s * s));
  // q = 0: log cases reduce to the power.
  auto [N3, b3] = cor41_pair(Cor41Case::log_inverse, 2.0, 0.0);
  for (double s : {0.1, 1.0, 7.0}) CHECK(N3(s) == doctest::Approx(s * s));
  for (double r : {0.1, 1.0, 7.0}) CHECK(b3(r) == doctest::Approx(pw(r)));
  // Stable exponents n/(n - alpha/2) correspond to rates r^{-2n/alpha}.
  const double n = 3.0, a1 = 0.5, a2 = 1.5;
  auto [Ns, bs] = cor41_pair(Cor41Case::wedge, young::stable_exponent(n, a1), young::stable_exponent(n, a2));
  CHECK(bs.to_json()["params"]["a"].get<double>() == doctest::Approx(2 * n / a1));
  CHECK(bs.to_json()["params"]["b"].get<double>() == doctest::Approx(2 * n / a2));
}

TEST_CASE("thm43: zero potential reduces to thm21") {
  const Model base = random_model(5, 3);
  Model md = base;
  md.potential = KillingPotential{Vec::Zero(5), Vec::Constant(5, 0.7)};
  const auto rg = log_grid(1e-3, 1e3, 25);
  const RateFunction beta = estimated_rate(md.space, md.kernel, nullptr, rg, 1.01);
  const auto fam = supported_functions(md.space, 50, 1.0 / (2.0 * beta.at_infinity()), 3);
  const Thm43Forward f = thm43_forward(md, beta, fam, rg);
  auto sg = std::make_shared<const Semigroup>(base.space, base.kernel);
  const YoungFunction Ng = thm21_young(beta, ThetaIntegral::for_model(base, sg), 2.0 / base.space.min_mass());
  for (double u : log_grid(1e-3, 1.0, 10)) CHECK(f.N_bar(u) == doctest::Approx(Ng(u)).epsilon(1e-7));
  CHECK(f.report.pass());
}

TEST_CASE("thm43: two-point space with killing by hand") {
  const double j = 1.2, v = 0.8, xi = 1.5;
  Model md = two_point(j);
  md.potential = KillingPotential{vec({v, 0.0}), vec({xi, 0.4})};
  const Semigroup sg(md.space, md.kernel, &*md.potential);
  Mat L(2, 2);
  L << j + v, -j, -j, j;
  for (double t : {0.1, 1.0, 5.0}) {
    const Mat P = expm(-t * L);
    const double gam = (P.row(0) - P.row(1)).cwiseAbs().sum();
    const double kill = P.row(0).sum() / xi;  // point 1 carries no killing
    CHECK(theta_bar(sg, md.gamma, md.potential->xi, t, &md.potential->v) ==
          doctest::Approx(std::max(gam, kill)).epsilon(1e-10));
  }
  CHECK(c_gamma(md, true) == doctest::Approx(std::max(j + xi * xi * v, j)));
  // Without the v-mask the second point's xi enters.
  const Mat P = expm(-1.0 * L);
  CHECK(theta_bar(sg, md.gamma, md.potential->xi, 1.0) >= P.row(1).sum() / 0.4 * (1 - 1e-12));
}

TEST_CASE("thm43 forward and backward on random killed instances") {
  const auto rg = log_grid(1e-3, 1e3, 25);
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    GeneratorOptions o;
    o.killing = true;
    o.random_gamma = seed % 2 == 0;
    const Model md = random_model(3 + static_cast<int>(seed % 6), seed, o);
    const KillingPotential* pot = &*md.potential;
    const RateFunction beta = estimated_rate(md.space, md.kernel, pot, rg, 1.01);
    auto fam = random_functions(md.size(), 100, seed);
    const auto ind = proper_indicators(md.size());
    fam.insert(fam.end(), ind.begin(), ind.end());
    fam.push_back(Vec::Ones(md.size()));
    const Thm43Forward f = thm43_forward(md, beta, fam, rg);
    INFO(f.report.to_json().dump());
    CHECK(f.report.pass());
    CHECK(f.report.info["premise_violations"] == 0);
    const ConversionResult b = thm43_backward(md, f.N_bar, f.C, fam, rg);
    INFO(b.report.to_json().dump());
    CHECK(b.report.pass());
    CHECK(b.report.notes.empty());
  }
  // xi = 0 where V > 0.
  Model md = two_point(1.0);
  md.potential = KillingPotential{vec({1.0, 0.0}), vec({0.0, 1.0})};
  const Thm43Forward f = thm43_forward(md, rates::power(1.0, 1.0), {vec({1.0, 0.0})}, {1.0});
  CHECK(f.report.info["hypothesis"] == false);
}
