#ifndef JUMPISO_PIPELINE_HPP
#define JUMPISO_PIPELINE_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "generate.hpp"
#include "io.hpp"
#include "isoperimetry.hpp"
#include "measure_core.hpp"
#include "report.hpp"
#include "superpoincare.hpp"
#include "young.hpp"

namespace jumpiso {

namespace constants {

//! \brief Orlicz-Sobolev constant obtained from a super-Poincare rate.
inline double c_star() { return 2.0 / (1.0 - std::exp(-1.0)); }

inline constexpr const char* kCStarDerivation =
    "level sets give ||f||_N <= (1/2) l1(f) for N = Phi^{-1}, Phi(t) = int_0^t dr / kappa(1/r); the semigroup "
    "bound on kappa gives Phi(t) <= c Phi_gamma(t) with c = 4/(1-e^{-1}); then N(u) >= N_gamma(u/c) and "
    "||f||_{N_gamma(./c)} = ||f||_{N_gamma}/c, so ||f||_{N_gamma} <= (c/2) l1(f) = 2/(1-e^{-1}) l1(f)";

}  // namespace constants

//! \brief Report stamped with the theorem id and a digest of the instance.
inline Report theorem_report(const std::string& id, const Model& md, double tol) {
  Report r{id, tol};
  r.info["theorem"] = id;
  r.info["inputs_digest"] = digest(model_to_json(md));
  return r;
}

namespace detail {

inline bool has_zero(const Vec& f) { return f.size() == 0 || f.cwiseAbs().minCoeff() == 0.0; }

inline std::uint64_t support_mask(const Vec& f) {
  std::uint64_t a = 0;
  for (Eigen::Index i = 0; i < f.size(); ++i)
    if (f[i] != 0.0) a |= std::uint64_t{1} << i;
  return a;
}

//! \brief Log grid on [lo, hi] plus every frontier mass and a point just above it (where kappa jumps).
inline std::vector<double> mass_grid(const IsoperimetricProfile& P, double lo, double hi, std::size_t n = 24) {
  std::vector<double> g = log_grid(lo, hi, n);
  for (const auto& e : P.frontier.points())
    for (double s : {e.mass, e.mass * (1.0 + 1e-9)})
      if (s >= lo && s <= hi) g.push_back(s);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

//! \brief inf{u > 0 : h(u) <= y} for nonincreasing h; 0 when h is already below y near 0.
inline double inf_where_below(const std::function<double(double)>& h, double y) {
  if (std::isinf(y)) return 0.0;
  if (h(1e-300) <= y) return 0.0;
  double hi = 1.0;
  int guard = 0;
  while (!(h(hi) <= y)) {
    hi *= 4.0;
    if (++guard > 520) return kInf;
  }
  double lo = hi;
  guard = 0;
  while (h(lo) <= y) {
    lo *= 0.25;
    if (++guard > 520) return 0.0;
  }
  return bisect_predicate([&](double u) { return h(u) <= y; }, lo, hi, 1e-13);
}

//! \brief Monotonicity of s^{-1} N(s) on a log grid; throws otherwise.
inline void require_increasing_ratio(const YoungFunction& N, const std::string& who) {
  double prev = 0.0;
  for (double s : log_grid(1e-8, 1e8, 321)) {
    const double v = N(s) / s;
    if (v < prev * (1.0 - 1e-12))
      throw std::invalid_argument(who + ": s^{-1}N(s) decreases near s = " + std::to_string(s));
    prev = std::max(prev, v);
  }
}

//! \brief Concave piecewise-linear integral of a step function g on (0, s_max): g is evaluated
//! at the midpoint of each piece between consecutive cuts. Stops early where g vanishes.
struct PhiTable {
  std::vector<double> t, phi;
};

inline PhiTable step_integral(std::vector<double> cuts, const std::function<double(double)>& g, double s_max) {
  cuts.push_back(s_max);
  std::sort(cuts.begin(), cuts.end());
  PhiTable out;
  double prev = 0.0, acc = 0.0;
  for (double c : cuts) {
    if (!(c > prev) || c > s_max) continue;
    const double v = g(0.5 * (prev + c));
    if (!(v > 0.0)) break;
    if (std::isinf(v)) throw DivergenceError("integrand infinite on (" + std::to_string(prev) + ", " + std::to_string(c) + ")");
    acc += v * (c - prev);
    out.t.push_back(c);
    out.phi.push_back(acc);
    prev = c;
  }
  return out;
}

//! \brief Phi(s) = int_0^s g on a log grid for a nonincreasing g (quadrature per cell).
inline PhiTable quadrature_table(const std::function<double(double)>& g, double s_max, double rel = 1e-10,
                                 std::size_t per_decade = 24) {
  const double s_min = s_max * 1e-12;
  const auto grid = log_grid(s_min, s_max, 12 * per_decade + 1);
  PhiTable out;
  double acc = integrate_log_open(g, 0.0, grid[0], rel);
  if (!std::isfinite(acc)) throw DivergenceError("integral diverges at 0");
  out.t.push_back(grid[0]);
  out.phi.push_back(acc);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double v = integrate(g, grid[i - 1], grid[i], rel, 1e-300).value;
    if (!(v > 0.0)) break;
    acc += v;
    out.t.push_back(grid[i]);
    out.phi.push_back(acc);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Level-set lemma

//! \brief Increasing G with G(0) = 0 and its generalized inverse.
struct GFunction {
  std::string name;
  std::function<double(double)> fn;
  std::function<double(double)> inv;  // inf{s : G(s) >= y}

  static GFunction power(double p) {
    if (!(p > 0.0)) throw std::invalid_argument("GFunction::power: p must be positive");
    return {"s^" + std::to_string(p), [p](double s) { return std::pow(s, p); },
            [p](double y) { return std::pow(y, 1.0 / p); }};
  }
  static GFunction from_young(const YoungFunction& N) {
    auto self = std::make_shared<YoungFunction>(N);
    return {N.family(), [self](double s) { return (*self)(s); }, [self](double y) { return self->inverse(y); }};
  }
};

struct Lemma1Core {
  double lhs = 0.0;
  double rhs = 0.0;
  double scale = 1.0;  // f was multiplied by this to reach mu(G(|f|)) = 1
  std::string kappa_variant;
  Check check;
};

//! \brief int mu(dx) int_0^{|f|} kappa(1/G(s)) ds <= (1/2) l1_gamma(f) after normalizing mu(G(|f|)) = 1.
//! Uses the proper-subset profile when f vanishes somewhere, the full one otherwise.
inline Lemma1Core lemma1_core(const Model& md, const IsoperimetricProfile& P, const GFunction& G, const Vec& f) {
  check_dim(md.space, f, "lemma1_core");
  const Vec a = f.cwiseAbs();
  const double amax = a.maxCoeff();
  if (!(amax > 0.0)) throw std::invalid_argument("lemma1_core: f = 0 cannot be normalized");
  auto h = [&](double lam) {
    double acc = 0.0;
    for (int i = 0; i < md.size(); ++i) acc += md.space.mu(i) * G.fn(lam * a[i]);
    return acc;
  };
  double hi = 1.0 / amax;
  for (int guard = 0; !(h(hi) >= 1.0); ++guard) {
    if (guard > 2000) throw std::invalid_argument("lemma1_core: normalization impossible (G(|f|) integrates to 0)");
    hi *= 2.0;
  }
  double lo = hi;
  for (int guard = 0; h(lo) >= 1.0 && guard < 2000; ++guard) lo *= 0.5;
  const double lam = bisect_predicate([&](double x) { return h(x) >= 1.0; }, lo, hi, 1e-15);

  const bool zero = detail::has_zero(f);
  auto kappa = [&](double s) { return zero ? P.kappa_proper(s) : P.kappa(s); };
  std::vector<double> cuts{G.inv(1.0 / P.total_mass)};
  for (const auto& e : P.frontier.points()) cuts.push_back(G.inv(1.0 / e.mass));
  std::sort(cuts.begin(), cuts.end());

  double lhs = 0.0;
  for (int i = 0; i < md.size(); ++i) {
    const double top = lam * a[i];
    double prev = 0.0, acc = 0.0;
    auto piece = [&](double b) {
      if (!(b > prev)) return;
      if (b - prev <= 1e-12 * top) {  // rounding sliver between a cut and top
        prev = b;
        return;
      }
      const double k = kappa(1.0 / G.fn(0.5 * (prev + b)));
      // kappa is infinite only beyond G^{-1}(1/mu_min), which top reaches at most by rounding.
      if (std::isinf(k)) {
        if (b - prev > 1e-12 * top) acc = kInf;
      } else {
        acc += k * (b - prev);
      }
      prev = b;
    };
    for (double c : cuts) piece(std::min(c, top));
    piece(top);
    lhs += md.space.mu(i) * acc;
  }
  Lemma1Core out;
  out.lhs = lhs;
  out.rhs = 0.5 * l1_form(md.space, md.kernel, md.gamma, lam * f);
  out.scale = lam;
  out.kappa_variant = zero ? "proper" : "full";
  out.check = Check::leq("int int_0^{|f|} kappa(1/G) <= (1/2) l1(f)", out.lhs, out.rhs,
                         {{"scale", num(lam)}, {"kappa", out.kappa_variant}, {"G", G.name}});
  return out;
}

//! \brief ||f||^2 <= l1(f^2)/(2 kappa(s)) + (2/s) ||f||_1^2 with the full profile.
inline Report lemma1_poincare(const Model& md, const IsoperimetricProfile& P, double s, const std::vector<Vec>& family,
                              double tol = 1e-9) {
  Report r = theorem_report("lemma1_poincare", md, tol);
  const double k = P.kappa(s);
  r.info["s"] = num(s);
  r.info["kappa"] = num(k);
  if (!(k > 0.0)) {
    r.notes.push_back("vacuous: kappa(s) = 0");
    return r;
  }
  for (std::size_t i = 0; i < family.size(); ++i) {
    const Vec& f = family[i];
    const double n1 = md.space.norm1(f);
    const double grad = std::isinf(k) ? 0.0 : l1_form(md.space, md.kernel, md.gamma, f.cwiseAbs2()) / (2.0 * k);
    r.add(Check::leq("||f||^2 <= l1(f^2)/(2 kappa(s)) + (2/s)||f||_1^2", md.space.norm2_sq(f),
                     grad + 2.0 / s * n1 * n1, {{"index", i}, {"s", num(s)}}));
  }
  return r;
}

struct Lemma1Sobolev {
  YoungFunction N;
  Report report;
};

//! \brief N = Phi^{-1}, Phi(t) = int_0^t dr / kappa_p(1/r) with the proper-subset profile; Phi is
//! piecewise linear with breaks at 1/m for frontier masses m and flat beyond 1/mu_min.
//! Verifies ||f||_N <= (1/2) l1(f) for every f in the family that vanishes somewhere.
inline Lemma1Sobolev lemma1_sobolev(const Model& md, const IsoperimetricProfile& P, const std::vector<Vec>& family,
                                    double tol = 1e-9) {
  const auto pts = P.frontier.points();
  if (pts.empty()) throw std::invalid_argument("lemma1_sobolev: no proper subsets");
  if (!(pts.back().ratio() > 0.0)) throw std::invalid_argument("lemma1_sobolev: kappa vanishes (disconnected space)");
  std::vector<double> t, phi;
  double prev = 0.0, acc = 0.0;
  for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
    const double tj = 1.0 / it->mass;
    if (!(tj > prev)) continue;
    acc += (tj - prev) / it->ratio();
    t.push_back(tj);
    phi.push_back(acc);
    prev = tj;
  }
  Lemma1Sobolev out{piecewise_linear_inverse(t, phi, "lemma1_sobolev"), theorem_report("lemma1_sobolev", md, tol)};
  json bp = json::array();
  for (std::size_t i = 0; i < t.size(); ++i) bp.push_back({{"t", num(t[i])}, {"phi", num(phi[i])}});
  out.report.info["phi_breakpoints"] = bp;
  int skipped = 0;
  for (std::size_t i = 0; i < family.size(); ++i) {
    const Vec& f = family[i];
    if (!detail::has_zero(f)) {
      ++skipped;
      continue;
    }
    out.report.add(Check::leq("||f||_N <= (1/2) l1(f)", orlicz_norm(md.space, out.N, f).as_double(),
                              0.5 * l1_form(md.space, md.kernel, md.gamma, f), {{"index", i}}));
  }
  out.report.info["skipped_nonvanishing"] = skipped;
  return out;
}

// ---------------------------------------------------------------------------
// Young function from a super-Poincare rate

//! \brief Phi_gamma(s) = int_0^s Theta(beta^{-1}(r)) dr by direct quadrature (reference evaluation).
inline double phi_gamma(const RateFunction& beta, const ThetaIntegral& Theta, double s, double rel = 1e-10) {
  if (s <= 0.0) return 0.0;
  if (beta.at_infinity() > 0.0 && std::isinf(Theta.at_infinity()))
    throw DivergenceError("Phi_gamma infinite: beta^{-1} = inf on (0, " + std::to_string(beta.at_infinity()) +
                          ") and Theta(inf) = inf");
  auto g = [&](double r) { return Theta(beta.inverse(r)); };
  const QuadResult q = integrate(g, 0.0, s, rel, 1e-300);
  return q.value;
}

//! \brief N_gamma = Phi_gamma^{-1} on [0, Phi_gamma(S_max)] (+inf beyond). Tabulated rates give an
//! exactly piecewise-linear Phi_gamma; other rates use per-cell quadrature on a log grid, where the
//! chordal interpolation of the concave Phi_gamma can only enlarge N_gamma.
inline YoungFunction thm21_young(const RateFunction& beta, const ThetaIntegral& Theta, double S_max) {
  if (!(S_max > 0.0)) throw std::invalid_argument("thm21_young: S_max must be positive");
  const double binf = beta.at_infinity();
  if (binf > 0.0 && std::isinf(Theta.at_infinity()))
    throw DivergenceError("Phi_gamma < inf fails: beta^{-1}(r) = inf for r < " + std::to_string(binf) +
                          " and Theta(inf) = inf");
  auto g = [&](double r) { return Theta(beta.inverse(r)); };
  detail::PhiTable tab;
  if (beta.table) {
    std::vector<double> cuts(beta.table->b.begin(), beta.table->b.end());
    cuts.push_back(beta.table->beta0);
    cuts.erase(std::remove_if(cuts.begin(), cuts.end(), [](double c) { return !(c > 0.0) || std::isinf(c); }),
               cuts.end());
    tab = detail::step_integral(cuts, g, S_max);
  } else {
    tab = detail::quadrature_table(g, S_max);
  }
  if (tab.t.empty()) throw DivergenceError("Phi_gamma vanishes identically");
  return piecewise_linear_inverse(tab.t, tab.phi, "N_gamma");
}

namespace detail {

//! \brief ||f||_N <= C (l1_gamma(f) + w_extra * sum |f| xi V mu) on f with support mass < limit.
inline void os_checks(Report& r, const Model& md, const YoungFunction& N, double C, double w_extra,
                      const std::vector<Vec>& family, double limit, const std::string& claim, double& best,
                      int& skipped) {
  for (std::size_t i = 0; i < family.size(); ++i) {
    const Vec& f = family[i];
    if (!(md.space.mass(support_mask(f)) < limit)) {
      ++skipped;
      continue;
    }
    double a = l1_form(md.space, md.kernel, md.gamma, f);
    double b = 0.0;
    if (md.potential)
      for (int x = 0; x < md.size(); ++x)
        b += std::abs(f[x]) * md.potential->xi[x] * md.potential->v[x] * md.space.mu(x);
    const double norm = orlicz_norm(md.space, N, f).as_double();
    const double form = a + w_extra * b;
    if (norm > 0.0) best = std::max(best, form > 0.0 ? norm / form : kInf);
    r.add(Check::leq(claim, norm, C * form, {{"index", i}}));
  }
}

}  // namespace detail

//! \brief Orlicz-Sobolev inequality at C* for the Young function built from beta. Functions whose
//! support mass reaches 1/(2 beta(inf)) are skipped: the semigroup bound on kappa is only available
//! below that mass on a finite space.
inline Report thm21_verify(const Model& md, const RateFunction& beta, const std::vector<Vec>& family, double tol = 1e-9,
                           std::shared_ptr<const Semigroup> sg = nullptr) {
  Report r = theorem_report("thm21", md, tol);
  if (!sg) sg = std::make_shared<const Semigroup>(md.space, md.kernel);
  const ThetaIntegral Theta = ThetaIntegral::for_model(md, sg);
  const double C = constants::c_star();
  const double binf = beta.at_infinity();
  const double limit = binf > 0.0 ? 1.0 / (2.0 * binf) : kInf;
  r.info["C_star"] = num(C);
  r.info["C_star_derivation"] = constants::kCStarDerivation;
  r.info["beta"] = beta.to_json();
  r.info["beta_inf"] = num(binf);
  r.info["support_limit"] = num(limit);
  for (const auto& msg : beta.repairs) r.notes.push_back("repair: " + msg);
  YoungFunction N;
  try {
    N = thm21_young(beta, Theta, 2.0 / md.space.min_mass());
  } catch (const DivergenceError& e) {
    r.notes.push_back(std::string("hypothesis Phi_gamma < inf fails: ") + e.what());
    r.info["hypothesis"] = false;
    return r;
  }
  r.info["Theta_inf"] = num(Theta.at_infinity());
  r.info["N_gamma"] = N.tag();
  double best = 0.0;
  int skipped = 0;
  detail::os_checks(r, md, N, C, 0.0, family, limit, "||f||_{N_gamma} <= C* l1_gamma(f)", best, skipped);
  r.info["empirical_constant"] = num(best);
  r.info["skipped_large_support"] = skipped;
  r.add(Check::leq("empirical constant <= C*", best, C));
  return r;
}

// ---------------------------------------------------------------------------
// Orlicz-Sobolev <-> Poincare-type conversions

struct ConversionResult {
  Report report;
  RateFunction beta1;  // (PI) rate
  RateFunction beta;   // super-Poincare rate
  YoungFunction N;     // Orlicz-Sobolev function (thm42 direction)
};

//! \brief beta_1(r) = 2 max(1/M, inf{u : C u^{-1} N^{-1}(u) <= r}).
inline RateFunction rate_from_young(const YoungFunction& N, double C, double M) {
  auto self = std::make_shared<YoungFunction>(N);
  auto h = [self](double u) { return self->inverse(u) / u; };
  auto beta = [h, C, M](double r) { return 2.0 * std::max(1.0 / M, detail::inf_where_below(h, r / C)); };
  auto inv = [h, C, M](double y) { return y < 2.0 / M ? kInf : C * h(0.5 * y); };
  return RateFunction("pi_from_young", {{"C", num(C)}, {"M", num(M)}, {"N", N.tag()}}, beta, inv);
}

//! \brief beta(r) = c1 max(1/M, inf{u : u^{-1} N^{-1}(u) <= c2 sqrt(r)}); M = inf drops the floor.
inline RateFunction sp_rate_from_young(const YoungFunction& N, double c1, double c2, double M) {
  auto self = std::make_shared<YoungFunction>(N);
  auto h = [self](double u) { return self->inverse(u) / u; };
  const double floor = std::isinf(M) ? 0.0 : 1.0 / M;
  auto beta = [h, c1, c2, floor](double r) {
    return c1 * std::max(floor, detail::inf_where_below(h, c2 * std::sqrt(r)));
  };
  auto inv = [h, c1, c2, floor](double y) {
    if (y < c1 * floor) return kInf;
    const double v = h(y / c1) / c2;
    return v * v;
  };
  return RateFunction("sp_from_young", {{"c1", num(c1)}, {"c2", num(c2)}, {"N", N.tag()}}, beta, inv);
}

//! \brief Tabulated (PI) rate read off the exact profile: beta_1(r) = 2/s(r) where s(r) is the
//! largest s <= M with kappa(s) >= 1/(2r). Steps at r = 1/(2 ratio) for each frontier point.
inline RateFunction rate_from_profile(const IsoperimetricProfile& P) {
  const auto pts = P.frontier.points();
  if (pts.empty()) throw std::invalid_argument("rate_from_profile: empty profile");
  std::vector<double> r, b;
  for (std::size_t j = 0; j < pts.size(); ++j) {
    const double rj = 1.0 / (2.0 * pts[j].ratio());
    const double next = j + 1 < pts.size() ? pts[j + 1].mass : P.total_mass;
    if (!r.empty() && rj <= r.back()) {
      b.back() = 2.0 / next;
      continue;
    }
    r.push_back(rj);
    b.push_back(2.0 / next);
  }
  RateFunction out = rates::tabulated(r, b, 2.0 / pts.front().mass);
  return out;
}

//! \brief (OS) with (N, C) implies: (1) kappa(s) >= 1/(2 C s N^{-1}(1/s)); (2) (PI) with
//! beta_1(r) = 2 max(1/M, inf{u : C u^{-1}N^{-1}(u) <= r}); (3) super-Poincare with
//! beta(r) = 4 max(1/M, inf{u : u^{-1}N^{-1}(u) <= sqrt(r)/(2 C sqrt(2 c_gamma))}).
inline ConversionResult thm41(const YoungFunction& N, double C, const Model& md, const std::vector<Vec>& family,
                              const std::vector<double>& r_grid, double tol = 1e-9) {
  detail::require_increasing_ratio(N, "thm41");
  if (!(C > 0.0)) throw std::invalid_argument("thm41: C must be positive");
  ConversionResult out{theorem_report("thm41", md, tol), {}, {}, N};
  Report& r = out.report;
  const IsoperimetricProfile P = enumerate_profile(md);
  const double M = md.space.total_mass();
  r.info["N"] = N.tag();
  r.info["C"] = num(C);

  // Premise on functions that vanish somewhere (constants carry no l1 energy) plus indicators.
  std::vector<Vec> premise = proper_indicators(md.size());
  for (const auto& f : family)
    if (detail::has_zero(f)) premise.push_back(f);
  double c_emp = 0.0;
  for (const auto& f : premise) {
    const double a = orlicz_norm(md.space, N, f).as_double(), b = l1_form(md.space, md.kernel, md.gamma, f);
    if (a > 0.0) c_emp = std::max(c_emp, b > 0.0 ? a / b : kInf);
  }
  r.info["C_family"] = num(c_emp);
  if (c_emp > C * (1.0 + tol)) r.notes.push_back("premise fails: (OS) needs a constant above C on the family");

  for (double s : detail::mass_grid(P, 0.5 * md.space.min_mass(), M)) {
    const double bound = 1.0 / (2.0 * C * s * N.inverse(1.0 / s));
    r.add(Check::leq("1/(2 C s N^{-1}(1/s)) <= kappa(s)", bound, P.kappa(s), {{"part", 1}, {"s", num(s)}}));
  }

  out.beta1 = rate_from_young(N, C, M);
  Report pi{"pi", tol};
  for (std::size_t i = 0; i < family.size(); ++i) {
    const Vec& f = family[i];
    const double n2 = md.space.norm2_sq(f), n1 = md.space.norm1(f);
    const double l1sq = l1_form(md.space, md.kernel, md.gamma, f.cwiseAbs2());
    for (double x : r_grid)
      pi.add(Check::leq("||f||^2 <= r l1(f^2) + beta_1(r) ||f||_1^2", n2, x * l1sq + out.beta1(x) * n1 * n1,
                        {{"part", 2}, {"index", i}, {"r", num(x)}}));
  }
  r.merge(pi);

  const double cg = c_gamma(md, false);
  const double c2 = 1.0 / (2.0 * C * std::sqrt(2.0 * cg));
  out.beta = sp_rate_from_young(N, 4.0, c2, M);
  r.info["c_gamma"] = num(cg);
  r.info["sp_constants"] = {{"c1", 4.0}, {"c2", num(c2)}};
  Report sp = sp_verify(md.space, md.kernel, nullptr, out.beta, family, r_grid, tol);
  for (auto& c : sp.checks) c.witness["part"] = 3;
  r.merge(sp);
  return out;
}

//! \brief (PI) with beta_1 implies: (1) kappa(s) >= 1/(4 beta_1^{-1}(1/(2s))); (2) (OS) with C = 1/2 and
//! N = Phi^{-1}, Phi(t) = 4 int_0^t beta_1^{-1}(max(r, 1/sigma)/2) dr, on functions with support mass
//! below sigma < 1/(2 beta_1(inf)); (3) super-Poincare with beta(r) = 2 beta_1(sqrt(r)/(2 sqrt(2 c_gamma))).
inline ConversionResult thm42(const RateFunction& beta1, const Model& md, const std::vector<Vec>& family,
                              const std::vector<double>& r_grid, double tol = 1e-9) {
  ConversionResult out{theorem_report("thm42", md, tol), beta1, {}, {}};
  Report& r = out.report;
  const IsoperimetricProfile P = enumerate_profile(md);
  const double M = md.space.total_mass();
  r.info["beta1"] = beta1.to_json();
  for (const auto& msg : beta1.repairs) r.notes.push_back("repair: " + msg);

  // Premise: (PI) on the family and every indicator.
  {
    std::vector<Vec> premise = proper_indicators(md.size());
    premise.insert(premise.end(), family.begin(), family.end());
    int bad = 0;
    for (const auto& f : premise) {
      const double n2 = md.space.norm2_sq(f), n1 = md.space.norm1(f);
      const double l1sq = l1_form(md.space, md.kernel, md.gamma, f.cwiseAbs2());
      for (double x : r_grid)
        if (Check::leq("", n2, x * l1sq + beta1(x) * n1 * n1).slack < -tol) ++bad;
    }
    r.info["premise_violations"] = bad;
    if (bad) r.notes.push_back("premise fails: beta_1 violates (PI) on the family");
  }

  for (double s : detail::mass_grid(P, 0.5 * md.space.min_mass(), M)) {
    const double t = beta1.inverse(1.0 / (2.0 * s));
    const double bound = std::isinf(t) ? 0.0 : 1.0 / (4.0 * t);
    r.add(Check::leq("1/(4 beta_1^{-1}(1/(2s))) <= kappa(s)", bound, P.kappa(s), {{"part", 1}, {"s", num(s)}}));
  }

  const double binf = beta1.at_infinity();
  const double sigma = binf > 0.0 ? 1.0 / (2.0 * binf) : kInf;
  const double clamp = std::isinf(sigma) ? 0.0 : 1.0 / sigma;
  auto g = [&](double x) { return 4.0 * beta1.inverse(0.5 * std::max(x, clamp)); };
  const double S_max = 2.0 / md.space.min_mass();
  detail::PhiTable tab;
  try {
    if (beta1.table) {
      std::vector<double> cuts{clamp};
      for (double b : beta1.table->b) cuts.push_back(2.0 * b);
      cuts.push_back(2.0 * beta1.table->beta0);
      cuts.erase(std::remove_if(cuts.begin(), cuts.end(), [](double c) { return !(c > 0.0) || std::isinf(c); }),
                 cuts.end());
      tab = detail::step_integral(cuts, g, S_max);
    } else {
      tab = detail::quadrature_table(g, S_max);
    }
  } catch (const DivergenceError& e) {
    r.fail(std::string("Phi divergent: ") + e.what());
    return out;
  }
  if (tab.t.empty()) {
    r.fail("Phi vanishes identically");
    return out;
  }
  out.N = piecewise_linear_inverse(tab.t, tab.phi, "N_from_pi");
  r.info["sigma"] = num(sigma);
  r.info["N"] = out.N.tag();
  double best = 0.0;
  int skipped = 0;
  Report os{"os", tol};
  detail::os_checks(os, md, out.N, 0.5, 0.0, family, sigma, "||f||_N <= (1/2) l1(f)", best, skipped);
  for (auto& c : os.checks) c.witness["part"] = 2;
  r.merge(os);
  r.info["os_empirical_constant"] = num(best);
  r.info["skipped_large_support"] = skipped;

  const double cg = c_gamma(md, false);
  const double k = 1.0 / (2.0 * std::sqrt(2.0 * cg));
  auto b1 = std::make_shared<RateFunction>(beta1);
  out.beta = RateFunction(
      "sp_from_pi", {{"beta1", beta1.to_json()}, {"c_gamma", num(cg)}},
      [b1, k](double x) { return std::isinf(x) ? 2.0 * b1->at_infinity() : 2.0 * (*b1)(k * std::sqrt(x)); },
      [b1, k](double y) {
        const double v = b1->inverse(0.5 * y) / k;
        return v * v;
      });
  r.info["c_gamma"] = num(cg);
  Report sp = sp_verify(md.space, md.kernel, nullptr, out.beta, family, r_grid, tol);
  for (auto& c : sp.checks) c.witness["part"] = 3;
  r.merge(sp);
  return out;
}

// ---------------------------------------------------------------------------
// Closed-form correspondences

enum class Cor41Case { wedge = 1, vee = 2, log_inverse = 3, log_direct = 4 };

struct Cor41Result {
  YoungFunction N;
  RateFunction beta1_closed;   // the matching closed-form family (c = 1)
  RateFunction beta1_numeric;  // 2 inf{u : C u^{-1} N^{-1}(u) <= r}
  Report report;
};

namespace detail {

inline double local_slope(const std::function<double(double)>& F, double x, double h = 0.25) {
  return (std::log(F(x * std::exp(h))) - std::log(F(x * std::exp(-h)))) / (2.0 * h);
}

}  // namespace detail

//! \brief Young function of a case: (1) s^{p1} ^ s^{p2}, (2) s^{p1} v s^{p2}, (3) s^p log^q(lambda + 1/s),
//! (4) s^p log^q(lambda + s); and the matching beta_1 shape with c = 1.
inline std::pair<YoungFunction, RateFunction> cor41_pair(Cor41Case c, double a, double b) {
  if (!(a > 1.0)) throw std::invalid_argument("cor41: exponent must be > 1");
  switch (c) {
    case Cor41Case::wedge:
      if (!(b > 1.0)) throw std::invalid_argument("cor41: exponent must be > 1");
      return {young::power_wedge(a, b), rates::vee(1.0, a / (a - 1.0), b / (b - 1.0))};
    case Cor41Case::vee:
      if (!(b > 1.0)) throw std::invalid_argument("cor41: exponent must be > 1");
      return {young::power_vee(a, b), rates::wedge(1.0, a / (a - 1.0), b / (b - 1.0))};
    case Cor41Case::log_inverse:
      return {young::plog(a, b, -1), rates::log_large(1.0, a / (a - 1.0), b / (a - 1.0))};
    case Cor41Case::log_direct:
      return {young::plog(a, b, +1), rates::log_small(1.0, a / (a - 1.0), b / (a - 1.0))};
  }
  throw std::invalid_argument("cor41: unknown case");
}

//! \brief Runs the correspondence N -> beta_1 -> N' with constant C and compares exponents.
//! The way back uses beta_1^{-1}(y) = C h(y/2), h(u) = u^{-1} N^{-1}(u), so
//! Phi'(t) = 4 int_0^t beta_1^{-1}(x/2) dx = 16 C int_0^{t/4} N^{-1}(x)/x dx and N' = Phi'^{-1};
//! its log-log slope at s = Phi'(t) is Phi'(t) / (4 t beta_1^{-1}(t/2)).
inline Cor41Result cor41(Cor41Case c, double a, double b, double C = 1.0, double slope_tol = 1e-3,
                         double s_lo = 1e-40, double s_hi = 1e40) {
  auto [N, closed] = cor41_pair(c, a, b);
  Cor41Result out{N, closed, {}, Report{"cor41", 1e-12}};
  Report& r = out.report;
  auto Np = std::make_shared<YoungFunction>(N);
  auto h = [Np](double u) { return Np->inverse(u) / u; };
  out.beta1_numeric = RateFunction(
      "cor41_numeric", {{"C", num(C)}, {"N", N.tag()}},
      [h, C](double x) { return 2.0 * detail::inf_where_below(h, x / C); }, [h, C](double y) { return C * h(0.5 * y); });
  r.info = {{"case", static_cast<int>(c)}, {"N", N.tag()}, {"beta1_closed", closed.to_json()}, {"C", num(C)}};

  auto phi = [&](double t) {
    return 16.0 * C * detail::integrate_log_open([&](double x) { return Np->inverse(x) / x; }, 0.0, 0.25 * t, 1e-13);
  };
  auto slope_back = [&](double t, double s) { return s / (4.0 * t * C * h(0.25 * t)); };
  auto slope_N = [&](double s) { return s * Np->left_deriv(s) / (*Np)(s); };

  // Ends: t chosen with Phi'(t) near s_lo and s_hi (Phi' ~ const * N^{-1}).
  json ends = json::array();
  double ratio_lo = kInf, ratio_hi = 0.0;
  for (double target : {s_lo, s_hi}) {
    const double t = (*Np)(target);
    const double s = phi(t);
    const double sl_back = slope_back(t, s), sl_N = slope_N(s);
    ends.push_back({{"s", num(s)}, {"slope_N", num(sl_N)}, {"slope_N_roundtrip", num(sl_back)}});
    r.add(Check::leq("|slope(N') - slope(N)| <= tol", std::abs(sl_back - sl_N), slope_tol, {{"s", num(s)}}));
  }
  for (double t : log_grid((*Np)(s_lo), (*Np)(s_hi), 41)) {
    const double s = phi(t);
    const double q = (*Np)(s) / t;  // N(s) / N'(s)
    ratio_lo = std::min(ratio_lo, q);
    ratio_hi = std::max(ratio_hi, q);
  }
  r.info["roundtrip_ends"] = ends;
  r.info["N_over_Nprime"] = {{"min", num(ratio_lo)}, {"max", num(ratio_hi)}};

  // Numeric beta_1 against the closed-form shape: exponents at both ends, ratio band.
  json bends = json::array();
  double band_lo = kInf, band_hi = 0.0;
  const auto& bn = out.beta1_numeric;
  for (double x : log_grid(1e-20, 1e20, 41)) {
    const double q = bn(x) / closed(x);
    band_lo = std::min(band_lo, q);
    band_hi = std::max(band_hi, q);
  }
  for (double x : {1e-20, 1e20}) {
    const double s1 = detail::local_slope([&](double y) { return bn(y); }, x);
    const double s2 = detail::local_slope([&](double y) { return closed(y); }, x);
    bends.push_back({{"r", num(x)}, {"slope_numeric", num(s1)}, {"slope_closed", num(s2)}});
  }
  r.info["beta1_ends"] = bends;
  r.info["beta1_numeric_over_closed"] = {{"min", num(band_lo)}, {"max", num(band_hi)}};
  return out;
}

// ---------------------------------------------------------------------------
// Killed forms

//! \brief sum |f| xi V mu.
inline double killing_l1(const Model& md, const Vec& f) {
  if (!md.potential) return 0.0;
  double b = 0.0;
  for (int x = 0; x < md.size(); ++x) b += std::abs(f[x]) * md.potential->xi[x] * md.potential->v[x] * md.space.mu(x);
  return b;
}

struct Thm43Forward {
  Report report;
  YoungFunction N_bar;
  double C = 0.0;  // constant in ||f||_{N_bar} <= C (l1(f) + sum |f| xi V)
};

//! \brief Forward direction: beta for E_V gives N_bar from theta_bar and
//! ||f||_{N_bar} <= C* (l1(f) + 2 sum|f| xi V mu) <= 2 C* (l1(f) + sum|f| xi V mu).
inline Thm43Forward thm43_forward(const Model& md, const RateFunction& beta, const std::vector<Vec>& family,
                                  const std::vector<double>& r_grid, double tol = 1e-9) {
  if (!md.potential) throw std::invalid_argument("thm43: potential required");
  Thm43Forward out{theorem_report("thm43_forward", md, tol), {}, 2.0 * constants::c_star()};
  Report& r = out.report;
  const KillingPotential& pot = *md.potential;
  r.info["beta"] = beta.to_json();
  {
    const Report pre = sp_verify(md.space, md.kernel, &pot, beta, family, r_grid, tol);
    r.info["premise_violations"] = pre.violations();
    if (!pre.pass()) r.notes.push_back("premise fails: beta violates the killed super-Poincare inequality");
  }
  for (int x = 0; x < md.size(); ++x)
    if (pot.v[x] > 0.0 && !(pot.xi[x] > 0.0)) {
      r.notes.push_back("theta_bar infinite: xi vanishes at point " + std::to_string(x) + " where V > 0");
      r.info["hypothesis"] = false;
      return out;
    }
  auto sg = std::make_shared<const Semigroup>(md.space, md.kernel, &pot);
  auto w = std::make_shared<WeightFunction>(md.gamma);
  auto xi = std::make_shared<Vec>(pot.xi);
  auto v = std::make_shared<Vec>(pot.v);
  // Bottom of the killed spectrum; without killing theta decays at the spectral gap instead.
  const double rate = pot.active() ? sg->eigenvalues().minCoeff() : sg->gap();
  const ThetaIntegral Theta([sg, w, xi, v](double t) { return theta_bar(*sg, *w, *xi, t, v.get()); }, rate);
  const double binf = beta.at_infinity();
  const double limit = binf > 0.0 ? 1.0 / (2.0 * binf) : kInf;
  r.info["lambda1"] = num(rate);
  r.info["beta_inf"] = num(binf);
  r.info["support_limit"] = num(limit);
  try {
    out.N_bar = thm21_young(beta, Theta, 2.0 / md.space.min_mass());
  } catch (const DivergenceError& e) {
    r.notes.push_back(std::string("hypothesis Phi_bar < inf fails: ") + e.what());
    r.info["hypothesis"] = false;
    return out;
  }
  r.info["N_bar"] = out.N_bar.tag();
  r.info["Theta_bar_inf"] = num(Theta.at_infinity());
  r.info["C_star"] = num(constants::c_star());
  double best = 0.0, best_nb = 0.0;
  int skipped = 0, skipped_nb = 0;
  detail::os_checks(r, md, out.N_bar, constants::c_star(), 2.0, family, limit,
                    "||f||_{N_bar} <= C* (l1(f) + 2 int |f| xi V)", best, skipped);
  detail::os_checks(r, md, out.N_bar, out.C, 1.0, family, limit, "||f||_{N_bar} <= 2 C* (l1(f) + int |f| xi V)",
                    best_nb, skipped_nb);
  r.info["empirical_constant_bar"] = num(best);
  r.info["empirical_constant_nb"] = num(best_nb);
  r.info["skipped_large_support"] = skipped;
  return out;
}

//! \brief Profile of the killed space over all nonempty A (the whole space included):
//! flow_bar(A) = J_gamma(A x A^c) + sum_{x in A} xi V mu.
inline ParetoFrontier killed_frontier(const Model& md) {
  const int m = md.size();
  if (m > kMaxEnumerate) throw std::invalid_argument("killed_frontier: m exceeds 24");
  const Mat W = flow_weights(md.space, md.kernel, md.gamma);
  Vec kill = Vec::Zero(m);
  if (md.potential)
    for (int x = 0; x < m; ++x) kill[x] = md.potential->xi[x] * md.potential->v[x] * md.space.mu(x);
  ParetoFrontier F;
  detail::enumerate_range(W, md.space.mu(), 1, std::uint64_t{1} << m, [&](std::uint64_t a, double mass, double fl) {
    double k = 0.0;
    for (int x = 0; x < m; ++x)
      if (a >> x & 1U) k += kill[x];
    F.insert({mass, fl + k, a});
  });
  return F;
}

//! \brief Converse: (NB) with (N, C) gives kappa_bar(s) >= 1/(2 C s N^{-1}(1/s)) and the killed
//! super-Poincare inequality with beta(r) = c1 inf{u : u^{-1}N^{-1}(u) <= c2 sqrt(r)},
//! c1 = 4, c2 = 1/(2 C sqrt(2 c_bar)), c_bar = max_x (sum_y gamma^2 j mu + xi^2 V).
inline ConversionResult thm43_backward(const Model& md, const YoungFunction& N, double C,
                                       const std::vector<Vec>& family, const std::vector<double>& r_grid,
                                       double tol = 1e-9) {
  if (!md.potential) throw std::invalid_argument("thm43: potential required");
  detail::require_increasing_ratio(N, "thm43_backward");
  ConversionResult out{theorem_report("thm43_backward", md, tol), {}, {}, N};
  Report& r = out.report;
  r.info["N"] = N.tag();
  r.info["C"] = num(C);
  double c_emp = 0.0;
  for (const auto& f : family) {
    const double a = orlicz_norm(md.space, N, f).as_double();
    const double b = l1_form(md.space, md.kernel, md.gamma, f) + killing_l1(md, f);
    if (a > 0.0) c_emp = std::max(c_emp, b > 0.0 ? a / b : kInf);
  }
  r.info["C_family"] = num(c_emp);
  if (c_emp > C * (1.0 + tol)) r.notes.push_back("premise fails: (NB) needs a constant above C on the family");

  const ParetoFrontier F = killed_frontier(md);
  const double M = md.space.total_mass();
  for (double s : log_grid(0.5 * md.space.min_mass(), 2.0 * M, 30)) {
    const ProfileEntry* e = F.best_below(s);
    const double kap = e ? e->ratio() : kInf;
    r.add(Check::leq("1/(2 C s N^{-1}(1/s)) <= kappa_bar(s)", 1.0 / (2.0 * C * s * N.inverse(1.0 / s)), kap,
                     {{"part", 1}, {"s", num(s)}}));
  }
  const double cbar = c_gamma(md, true);
  const double c2 = 1.0 / (2.0 * C * std::sqrt(2.0 * cbar));
  out.beta = sp_rate_from_young(N, 4.0, c2, kInf);
  r.info["c_bar"] = num(cbar);
  r.info["constants"] = {{"c1", 4.0}, {"c2", num(c2)}, {"status", "sufficient, not claimed minimal"}};
  Report sp = sp_verify(md.space, md.kernel, &*md.potential, out.beta, family, r_grid, tol);
  for (auto& c : sp.checks) c.witness["part"] = 3;
  r.merge(sp);
  return out;
}

}  // namespace jumpiso

#endif
