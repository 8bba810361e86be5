#ifndef JUMPISO_SUPERPOINCARE_HPP
#define JUMPISO_SUPERPOINCARE_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "generate.hpp"
#include "isoperimetry.hpp"
#include "measure_core.hpp"
#include "report.hpp"

namespace jumpiso {

//! \brief Decreasing rate function beta with generalized inverse beta^{-1}(y) = inf{s > 0 : beta(s) <= y}.
class RateFunction {
 public:
  using Fn = std::function<double(double)>;

  RateFunction() = default;
  RateFunction(std::string family, json params, Fn beta, Fn inverse)
      : family_(std::move(family)), params_(std::move(params)), beta_(std::move(beta)), inv_(std::move(inverse)) {}

  double operator()(double r) const {
    if (!(r > 0.0)) throw std::invalid_argument("rate function: r must be positive");
    return beta_(r);
  }
  double inverse(double y) const { return inv_(y); }
  //! \brief lim_{r -> inf} beta(r).
  double at_infinity() const { return beta_(kInf); }
  const std::string& family() const { return family_; }
  json to_json() const { return json{{"family", family_}, {"params", params_}}; }

  //! \brief c * beta.
  RateFunction scaled(double c) const {
    auto self = std::make_shared<RateFunction>(*this);
    json p = params_;
    p["scale"] = c;
    return RateFunction(
        family_, p, [self, c](double r) { return c * self->beta_(r); },
        [self, c](double y) { return self->inverse(y / c); });
  }

  std::vector<std::string> repairs;  // running-minimum repairs applied to tabulated input

  //! \brief Step table behind a tabulated rate (null otherwise).
  struct Table {
    std::vector<double> r, b;
    double beta0 = kInf;
  };
  std::shared_ptr<const Table> table;

 private:
  std::string family_;
  json params_;
  Fn beta_, inv_;
};

namespace detail {

//! \brief inf{s : beta(s) <= y} for continuous decreasing beta, by log-scale bisection.
inline double rate_inverse_numeric(const std::function<double(double)>& beta, double y) {
  if (y <= 0.0) return beta(kInf) <= 0.0 ? 0.0 : kInf;  // only reached for y = 0 with vanishing beta
  double lo = 1e-300, hi = 1.0;
  if (beta(lo) <= y) return 0.0;
  int guard = 0;
  while (beta(hi) > y) {
    hi *= 16.0;
    if (++guard > 300) return kInf;
  }
  return bisect_predicate([&](double s) { return beta(s) <= y; }, lo, hi, 1e-14);
}

}  // namespace detail

namespace rates {

//! \brief c r^{-a}.
inline RateFunction power(double c, double a) {
  if (!(c > 0.0 && a > 0.0)) throw std::invalid_argument("rate power: c, a must be positive");
  return RateFunction(
      "power", {{"c", c}, {"a", a}}, [c, a](double r) { return std::isinf(r) ? 0.0 : c * std::pow(r, -a); },
      [c, a](double y) { return y <= 0.0 ? kInf : std::pow(c / y, 1.0 / a); });
}

//! \brief c (r^{-a} v r^{-b}).
inline RateFunction vee(double c, double a, double b) {
  auto p = power(c, a), q = power(c, b);
  return RateFunction(
      "vee", {{"c", c}, {"a", a}, {"b", b}}, [p, q](double r) { return std::isinf(r) ? 0.0 : std::max(p(r), q(r)); },
      [p, q](double y) { return std::max(p.inverse(y), q.inverse(y)); });
}

//! \brief c (r^{-a} ^ r^{-b}).
inline RateFunction wedge(double c, double a, double b) {
  auto p = power(c, a), q = power(c, b);
  return RateFunction(
      "wedge", {{"c", c}, {"a", a}, {"b", b}},
      [p, q](double r) { return std::isinf(r) ? 0.0 : std::min(p(r), q(r)); },
      [p, q](double y) { return std::min(p.inverse(y), q.inverse(y)); });
}

//! \brief c r^{-a} log(2 + r)^{-b}.
inline RateFunction log_large(double c, double a, double b) {
  auto f = [c, a, b](double r) { return std::isinf(r) ? 0.0 : c * std::pow(r, -a) * std::pow(std::log(2.0 + r), -b); };
  return RateFunction("log_large", {{"c", c}, {"a", a}, {"b", b}}, f,
                      [f](double y) { return detail::rate_inverse_numeric(f, y); });
}

//! \brief c r^{-a} log(2 + 1/r)^{-b}.
inline RateFunction log_small(double c, double a, double b) {
  auto f = [c, a, b](double r) {
    return std::isinf(r) ? 0.0 : c * std::pow(r, -a) * std::pow(std::log(2.0 + 1.0 / r), -b);
  };
  return RateFunction("log_small", {{"c", c}, {"a", a}, {"b", b}}, f,
                      [f](double y) { return detail::rate_inverse_numeric(f, y); });
}

//! \brief Any decreasing callable, inverted numerically.
inline RateFunction custom(std::string name, std::function<double(double)> f) {
  return RateFunction(std::move(name), json::object(), f, [f](double y) { return detail::rate_inverse_numeric(f, y); });
}

//! \brief Step function from a table: beta = beta0 on (0, r_0), beta_i on [r_i, r_{i+1}),
//! beta_last beyond the grid. Non-monotone input is repaired by a running minimum.
inline RateFunction tabulated(std::vector<double> r, std::vector<double> b, double beta0) {
  if (r.empty() || r.size() != b.size()) throw std::invalid_argument("tabulated rate: bad table");
  for (std::size_t i = 1; i < r.size(); ++i)
    if (!(r[i] > r[i - 1])) throw std::invalid_argument("tabulated rate: r must be increasing");
  std::vector<std::string> log;
  double run = beta0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i] > run) {
      std::ostringstream os;
      os << "beta(" << r[i] << ") lowered from " << b[i] << " to " << run;
      log.push_back(os.str());
      b[i] = run;
    }
    run = b[i];
  }
  auto R = std::make_shared<const std::vector<double>>(std::move(r));
  auto B = std::make_shared<const std::vector<double>>(std::move(b));
  RateFunction out(
      "tabulated", {{"points", R->size()}, {"beta0", num(beta0)}},
      [R, B, beta0](double x) {
        if (std::isinf(x)) return B->back();
        auto it = std::upper_bound(R->begin(), R->end(), x);
        if (it == R->begin()) return beta0;
        return (*B)[static_cast<std::size_t>(it - R->begin()) - 1];
      },
      [R, B, beta0](double y) {
        if (y >= beta0) return 0.0;
        for (std::size_t i = 0; i < B->size(); ++i)
          if ((*B)[i] <= y) return (*R)[i];
        return kInf;
      });
  out.repairs = std::move(log);
  out.table = std::make_shared<const RateFunction::Table>(RateFunction::Table{*R, *B, beta0});
  return out;
}

inline RateFunction from_json(const json& j) {
  const std::string fam = j.at("family");
  const json& p = j.contains("params") ? j.at("params") : j;
  auto g = [&](const char* k, double d = 0.0) { return p.contains(k) ? p.at(k).get<double>() : d; };
  if (fam == "power") return power(g("c", 1), g("a"));
  if (fam == "vee") return vee(g("c", 1), g("a"), g("b"));
  if (fam == "wedge") return wedge(g("c", 1), g("a"), g("b"));
  if (fam == "log_large") return log_large(g("c", 1), g("a"), g("b"));
  if (fam == "log_small") return log_small(g("c", 1), g("a"), g("b"));
  if (fam == "tabulated") {
    return tabulated(p.at("r").get<std::vector<double>>(), p.at("beta").get<std::vector<double>>(), g("beta0", kInf));
  }
  throw std::invalid_argument("unknown rate family: " + fam);
}

}  // namespace rates

//! \brief E(f,f) = f^T K f.
inline Mat energy_matrix(const FiniteMeasureSpace& s, const JumpKernel& k, const KillingPotential* pot = nullptr) {
  Mat K = s.mu().asDiagonal() * generator(s, k, pot);
  return 0.5 * (K + K.transpose());
}

//! \brief ||f||^2 <= r E(f,f) + beta(r) ||f||_1^2 for every (f, r).
inline Report sp_verify(const FiniteMeasureSpace& s, const JumpKernel& k, const KillingPotential* pot,
                        const RateFunction& beta, const std::vector<Vec>& family, const std::vector<double>& r_grid,
                        double tol = 1e-9) {
  Report rep{"sp_verify", tol};
  rep.info = {{"beta", beta.to_json()}, {"functions", family.size()}, {"r_points", r_grid.size()}};
  for (const auto& msg : beta.repairs) rep.notes.push_back("repair: " + msg);
  const Mat K = energy_matrix(s, k, pot);
  for (std::size_t i = 0; i < family.size(); ++i) {
    const Vec& f = family[i];
    const double n2 = s.norm2_sq(f), n1 = s.norm1(f), e = f.dot(K * f);
    for (double r : r_grid)
      rep.add(Check::leq("||f||^2 <= r E + beta(r) ||f||_1^2", n2, r * e + beta(r) * n1 * n1,
                         {{"index", i}, {"r", num(r)}}));
  }
  return rep;
}

struct SpEstimateOptions {
  std::uint64_t seed = 1;
  int starts = 64;
  int max_iter = 400;
  bool exhaustive_kkt = true;  // KKT enumeration over (support, sign) pairs, m <= 10
};

namespace detail {

//! \brief f^T A f / ||f||_1^2 on the weighted l1 sphere.
inline double sp_ratio(const Mat& A, const Vec& mu, const Vec& f) {
  const double n1 = mu.dot(f.cwiseAbs());
  if (n1 == 0.0) return -kInf;
  return f.dot(A * f) / (n1 * n1);
}

//! \brief Stationary point on the face (support, signs) of f, if it lies inside that face.
inline double sp_polish(const Mat& A, const Vec& mu, const Vec& f) {
  const int m = static_cast<int>(mu.size());
  const double scale = f.cwiseAbs().maxCoeff();
  std::vector<int> idx;
  for (int i = 0; i < m; ++i)
    if (std::abs(f[i]) > 1e-9 * scale) idx.push_back(i);
  const int t = static_cast<int>(idx.size());
  if (t == 0) return -kInf;
  Mat B(t, t);
  Vec muT(t);
  for (int a = 0; a < t; ++a) {
    muT[a] = mu[idx[a]];
    for (int b = 0; b < t; ++b) B(a, b) = (f[idx[a]] > 0 ? 1 : -1) * (f[idx[b]] > 0 ? 1 : -1) * A(idx[a], idx[b]);
  }
  Eigen::FullPivLU<Mat> lu(B);
  if (!lu.isInvertible()) return -kInf;
  const Vec x = lu.solve(muT);
  if (!(x.array() > 0.0).all()) return -kInf;
  Vec g = Vec::Zero(m);
  for (int a = 0; a < t; ++a) g[idx[a]] = (f[idx[a]] > 0 ? 1 : -1) * x[a];
  return sp_ratio(A, mu, g);
}

//! \brief Gradient ascent of the scale-invariant ratio with backtracking; returns the best value seen.
inline double sp_ascend(const Mat& A, const Vec& mu, Vec f, int max_iter) {
  double best = sp_ratio(A, mu, f);
  double step = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    const double n1 = mu.dot(f.cwiseAbs());
    f /= n1;
    const double q = f.dot(A * f);
    Vec sg = f.unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
    Vec g = 2.0 * (A * f) - 2.0 * q * mu.cwiseProduct(sg);
    const double gn = g.norm();
    if (gn < 1e-14 * std::max(1.0, std::abs(q))) break;
    bool moved = false;
    for (int bt = 0; bt < 40; ++bt) {
      const Vec cand = f + (step / gn) * g * f.cwiseAbs().maxCoeff();
      const double v = sp_ratio(A, mu, cand);
      if (v > best + 1e-15 * std::abs(best)) {
        best = v;
        f = cand;
        step = std::min(step * 2.0, 1e3);
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return std::max(best, sp_polish(A, mu, f));
}

//! \brief Exact maximum over stationary points with full support on each (support, sign) face.
inline double sp_kkt(const Mat& A, const Vec& mu) {
  const int m = static_cast<int>(mu.size());
  double best = -kInf;
  for (std::uint64_t T = 1; T < (std::uint64_t{1} << m); ++T) {
    std::vector<int> idx;
    for (int i = 0; i < m; ++i)
      if (T >> i & 1U) idx.push_back(i);
    const int t = static_cast<int>(idx.size());
    Mat AT(t, t);
    Vec muT(t);
    for (int a = 0; a < t; ++a) {
      muT[a] = mu[idx[a]];
      for (int b = 0; b < t; ++b) AT(a, b) = A(idx[a], idx[b]);
    }
    // Signs: first element positive.
    for (std::uint64_t sg = 0; sg < (std::uint64_t{1} << (t - 1)); ++sg) {
      Vec sv(t);
      sv[0] = 1.0;
      for (int a = 1; a < t; ++a) sv[a] = (sg >> (a - 1) & 1U) ? -1.0 : 1.0;
      const Mat B = sv.asDiagonal() * AT * sv.asDiagonal();
      Eigen::FullPivLU<Mat> lu(B);
      if (!lu.isInvertible()) continue;
      const Vec x = lu.solve(muT);
      if ((x.array() > 0.0).all() || (x.array() < 0.0).all()) {
        Vec f = Vec::Zero(m);
        for (int a = 0; a < t; ++a) f[idx[a]] = sv[a] * x[a];
        best = std::max(best, sp_ratio(A, mu, f));
      }
    }
  }
  return best;
}

}  // namespace detail

//! \brief Certified lower bound on the optimal beta(r) = sup_{||f||_1 = 1} ||f||^2 - r E(f,f):
//! every candidate is evaluated exactly, so the result is attained by some f.
inline double sp_estimate(const FiniteMeasureSpace& s, const JumpKernel& k, const KillingPotential* pot, double r,
                          const SpEstimateOptions& o = {}) {
  if (!(r >= 0.0)) throw std::invalid_argument("sp_estimate: r must be >= 0");
  const int m = s.size();
  const Vec& mu = s.mu();
  const Mat A = Mat(mu.asDiagonal()) - r * energy_matrix(s, k, pot);
  double best = -kInf;
  std::vector<Vec> cands;
  for (int i = 0; i < m; ++i) cands.push_back(Vec::Unit(m, i));
  cands.push_back(Vec::Ones(m));
  // Top eigenvectors of D^{-1/2} A D^{-1/2}.
  const Vec is = mu.cwiseSqrt().cwiseInverse();
  Eigen::SelfAdjointEigenSolver<Mat> es(is.asDiagonal() * A * is.asDiagonal());
  for (int c = 0; c < std::min(m, 4); ++c) {
    const Vec v = is.asDiagonal() * es.eigenvectors().col(m - 1 - c);
    cands.push_back(v);
    Vec pos = v.cwiseMax(0.0), neg = (-v).cwiseMax(0.0);
    if (pos.sum() > 0) cands.push_back(pos);
    if (neg.sum() > 0) cands.push_back(neg);
  }
  if (m <= 12) {
    const std::uint64_t full = (std::uint64_t{1} << m) - 1;
    for (std::uint64_t a = 1; a <= full; ++a) cands.push_back(indicator(m, a));
    for (std::uint64_t sg = 0; sg < (std::uint64_t{1} << (m - 1)); ++sg) {
      Vec f(m);
      f[0] = 1.0;
      for (int i = 1; i < m; ++i) f[i] = (sg >> (i - 1) & 1U) ? -1.0 : 1.0;
      cands.push_back(f);
    }
  }
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < cands.size(); ++i) scored.emplace_back(detail::sp_ratio(A, mu, cands[i]), i);
  for (const auto& [v, i] : scored) best = std::max(best, v);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<Vec> starts;
  for (std::size_t i = 0; i < scored.size() && static_cast<int>(starts.size()) < o.starts / 2; ++i)
    starts.push_back(cands[scored[i].second]);
  Rng rng(o.seed);
  while (static_cast<int>(starts.size()) < o.starts) {
    Vec f(m);
    for (int i = 0; i < m; ++i) f[i] = rng.normal();
    starts.push_back(f);
  }
  for (const auto& f : starts) best = std::max(best, detail::sp_ascend(A, mu, f, o.max_iter));
  if (o.exhaustive_kkt && m <= 10) best = std::max(best, detail::sp_kkt(A, mu));
  return best;
}

//! \brief sp_estimate on a grid, made non-increasing by a running maximum from the right
//! (each value stays attained: beta_opt is non-increasing, so a bound at a larger r is a bound here).
inline std::vector<double> sp_estimate_grid(const FiniteMeasureSpace& s, const JumpKernel& k,
                                            const KillingPotential* pot, const std::vector<double>& r_grid,
                                            const SpEstimateOptions& o = {}) {
  std::vector<double> b(r_grid.size());
  for (std::size_t i = 0; i < r_grid.size(); ++i) b[i] = std::max(0.0, sp_estimate(s, k, pot, r_grid[i], o));
  for (std::size_t i = b.size(); i-- > 1;) b[i - 1] = std::max(b[i - 1], b[i]);
  return b;
}

//! \brief Tabulated rate from sp_estimate on a log grid, inflated by `inflate`. beta0 = 1/mu_min.
inline RateFunction estimated_rate(const FiniteMeasureSpace& s, const JumpKernel& k, const KillingPotential* pot,
                                   const std::vector<double>& r_grid, double inflate = 1.01,
                                   const SpEstimateOptions& o = {}) {
  std::vector<double> b = sp_estimate_grid(s, k, pot, r_grid, o);
  const double beta0 = 1.0 / s.min_mass();
  for (double& x : b) x = std::min(x * inflate, beta0);
  return rates::tabulated(r_grid, b, beta0);
}

//! \brief ||P_t f||^2 <= ||f||^2 e^{-2t/r} + beta(r) ||f||_1^2 (1 - e^{-2t/r}) and, for m <= 16,
//! ||P_{t/2} 1_A||^2 <= mu(A) e^{-t/r} + mu(A)^2 beta(r) (1 - e^{-t/r}) on every subset.
inline Report sp_decay_check(const FiniteMeasureSpace& s, const Semigroup& sg, const RateFunction& beta,
                             const std::vector<Vec>& family, const std::vector<double>& t_grid,
                             const std::vector<double>& r_grid, double tol = 1e-9) {
  Report rep{"sp_decay_check", tol};
  const int m = s.size();
  for (double t : t_grid) {
    const Mat P = sg.operator_matrix(t);
    for (std::size_t i = 0; i < family.size(); ++i) {
      const Vec& f = family[i];
      const double lhs = s.norm2_sq(P * f), n2 = s.norm2_sq(f), n1 = s.norm1(f);
      for (double r : r_grid) {
        const double e = std::exp(-2.0 * t / r);
        rep.add(Check::leq("||P_t f||^2 <= decay bound", lhs, n2 * e + beta(r) * n1 * n1 * (1.0 - e),
                           {{"index", i}, {"t", num(t)}, {"r", num(r)}}));
      }
    }
    if (m > 16) continue;
    const Mat Ph = sg.operator_matrix(t / 2.0);
    for (std::uint64_t a = 1; a < (std::uint64_t{1} << m); ++a) {
      const double mass = s.mass(a);
      const double lhs = s.norm2_sq(Ph * indicator(m, a));
      for (double r : r_grid) {
        const double e = std::exp(-t / r);
        rep.add(Check::leq("||P_{t/2} 1_A||^2 <= indicator decay bound", lhs,
                           mass * e + mass * mass * beta(r) * (1.0 - e),
                           {{"subset", mask_hex(a)}, {"t", num(t)}, {"r", num(r)}}));
      }
    }
  }
  return rep;
}

//! \brief kappa_gamma(s) >= (1 - e^{-1}) / (2 Theta_gamma(beta^{-1}(1/(2s)))) on the s grid.
//! Points where beta^{-1} is infinite are skipped with a note.
inline Report lemma2_bound(const IsoperimetricProfile& P, const ThetaIntegral& Theta, const RateFunction& beta,
                           const std::vector<double>& s_grid, double tol = 1e-9) {
  Report rep{"lemma2_bound", tol};
  const double c = 1.0 - std::exp(-1.0);
  int skipped = 0;
  for (double s : s_grid) {
    const double t = beta.inverse(1.0 / (2.0 * s));
    if (std::isinf(t)) {
      ++skipped;
      continue;
    }
    const double th = Theta(t);
    const double bound = th > 0.0 ? c / (2.0 * th) : kInf;
    rep.add(Check::leq("(1-1/e)/(2 Theta(beta^{-1}(1/(2s)))) <= kappa(s)", bound, P.kappa(s),
                       {{"s", num(s)}, {"t", num(t)}}));
  }
  if (skipped) rep.notes.push_back(std::to_string(skipped) + " grid points skipped: beta^{-1}(1/(2s)) infinite");
  rep.info = {{"beta", beta.to_json()}, {"skipped", skipped}};
  return rep;
}

//! \brief CSV table (r, beta).
inline std::string rate_csv(const RateFunction& beta, const std::vector<double>& r_grid) {
  std::ostringstream os;
  os.precision(17);
  os << "r,beta\n";
  for (double r : r_grid) os << r << ',' << beta(r) << '\n';
  return os.str();
}

}  // namespace jumpiso

#endif
