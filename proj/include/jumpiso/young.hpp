#ifndef JUMPISO_YOUNG_HPP
#define JUMPISO_YOUNG_HPP

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "measure_core.hpp"
#include "numerics.hpp"
#include "report.hpp"

namespace jumpiso {

//! \brief Convex increasing N with N(0)=0; may take the value +inf.
class YoungFunction {
 public:
  using Fn = std::function<double(double)>;

  YoungFunction() = default;
  YoungFunction(std::string family, std::map<std::string, double> params, Fn eval, Fn inverse, Fn left_deriv)
      : family_(std::move(family)), params_(std::move(params)), eval_(std::move(eval)), inv_(std::move(inverse)),
        deriv_(std::move(left_deriv)) {}

  double operator()(double s) const { return s <= 0.0 ? 0.0 : eval_(s); }
  //! \brief N^{-1}(r) = inf{s : N(s) >= r}.
  double inverse(double r) const { return r <= 0.0 ? 0.0 : inv_(r); }
  double left_deriv(double s) const { return s <= 0.0 ? 0.0 : deriv_(s); }

  const std::string& family() const { return family_; }
  const std::map<std::string, double>& params() const { return params_; }
  double param(const std::string& k) const { return params_.at(k); }

  json tag() const {
    json p = json::object();
    for (const auto& [k, v] : params_) p[k] = num(v);
    return json{{"family", family_}, {"params", p}};
  }

  //! \brief The Young function c*N.
  YoungFunction scaled(double c) const {
    auto self = std::make_shared<YoungFunction>(*this);
    auto params = params_;
    params["scale"] = c * (params_.count("scale") ? params_.at("scale") : 1.0);
    return YoungFunction(
        family_, params, [self, c](double s) { return c * (*self)(s); },
        [self, c](double r) { return self->inverse(r / c); }, [self, c](double s) { return c * self->left_deriv(s); });
  }

  //! \brief The Young function s -> N(k*s).
  YoungFunction dilated(double k) const {
    auto self = std::make_shared<YoungFunction>(*this);
    auto params = params_;
    params["dilation"] = k * (params_.count("dilation") ? params_.at("dilation") : 1.0);
    return YoungFunction(
        family_, params, [self, k](double s) { return (*self)(k * s); },
        [self, k](double r) { return self->inverse(r) / k; }, [self, k](double s) { return k * self->left_deriv(k * s); });
  }

 private:
  std::string family_;
  std::map<std::string, double> params_;
  Fn eval_, inv_, deriv_;
};

//! \brief Generalized inverse inf{s : N(s) >= r} of a nondecreasing function by log-space bisection.
inline double numeric_generalized_inverse(const std::function<double(double)>& N, double r) {
  if (r <= 0.0) return 0.0;
  double hi = 1.0;
  int guard = 0;
  while (!(N(hi) >= r)) {
    hi *= 4.0;
    if (++guard > 600) return kInf;
  }
  double lo = hi;
  guard = 0;
  while (N(lo) >= r) {
    lo *= 0.25;
    if (++guard > 600) return 0.0;
  }
  return bisect_predicate([&](double s) { return N(s) >= r; }, lo, hi, 1e-15);
}

//! \brief Grid midpoint-convexity test within relative tolerance.
inline bool midpoint_convex(const std::function<double(double)>& N, const std::vector<double>& grid, double tol = 1e-9,
                            double* worst = nullptr) {
  bool ok = true;
  double w = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double a = grid[i], b = grid[i + 1];
    const double na = N(a), nb = N(b), nm = N(0.5 * (a + b));
    if (std::isinf(nb)) continue;
    const double avg = 0.5 * (na + nb);
    const double excess = (nm - avg) / std::max(avg, 1e-300);
    w = std::max(w, excess);
    if (excess > tol) ok = false;
  }
  if (worst) *worst = w;
  return ok;
}

inline std::vector<double> young_check_grid(std::size_t n = 400) { return log_grid(1e-8, 1e8, n); }

namespace young {

inline YoungFunction power(double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("power: exponent must be >= 1");
  return YoungFunction(
      "power", {{"p", p}}, [p](double s) { return std::pow(s, p); }, [p](double r) { return std::pow(r, 1.0 / p); },
      [p](double s) { return p * std::pow(s, p - 1.0); });
}

//! \brief s^p1 ∧ s^p2 (larger exponent below 1, smaller above).
inline YoungFunction power_wedge(double p1, double p2) {
  const double hi = std::max(p1, p2), lo = std::min(p1, p2);
  return YoungFunction(
      "power_wedge", {{"p1", p1}, {"p2", p2}}, [hi, lo](double s) { return std::min(std::pow(s, hi), std::pow(s, lo)); },
      [hi, lo](double r) { return std::max(std::pow(r, 1.0 / hi), std::pow(r, 1.0 / lo)); },
      [hi, lo](double s) { return s <= 1.0 ? hi * std::pow(s, hi - 1.0) : lo * std::pow(s, lo - 1.0); });
}

//! \brief s^p1 ∨ s^p2.
inline YoungFunction power_vee(double p1, double p2) {
  const double hi = std::max(p1, p2), lo = std::min(p1, p2);
  return YoungFunction(
      "power_vee", {{"p1", p1}, {"p2", p2}}, [hi, lo](double s) { return std::max(std::pow(s, hi), std::pow(s, lo)); },
      [hi, lo](double r) { return std::min(std::pow(r, 1.0 / hi), std::pow(r, 1.0 / lo)); },
      [hi, lo](double s) { return s <= 1.0 ? lo * std::pow(s, lo - 1.0) : hi * std::pow(s, hi - 1.0); });
}

inline double stable_exponent(double n, double alpha) { return n / (n - alpha / 2.0); }

//! \brief Builds s^p log^q(lambda + s^{sign}) for a given lambda.
inline YoungFunction plog_raw(double p, double q, double lambda, int sign) {
  auto eval = [p, q, lambda, sign](double s) {
    const double arg = lambda + (sign > 0 ? s : 1.0 / s);
    return std::exp(p * std::log(s) + q * std::log(std::log(arg)));
  };
  auto deriv = [p, q, lambda, sign](double s) {
    const double arg = lambda + (sign > 0 ? s : 1.0 / s);
    const double L = std::log(arg);
    const double darg = sign > 0 ? 1.0 : -1.0 / (s * s);
    const double dlog = q * darg / (arg * L);
    return std::exp(p * std::log(s) + q * std::log(L)) * (p / s + dlog);
  };
  auto inv = [eval](double r) { return numeric_generalized_inverse(eval, r); };
  return YoungFunction(sign > 0 ? "plog_plus" : "plog_minus", {{"p", p}, {"q", q}, {"lambda", lambda}}, eval, inv,
                       deriv);
}

//! \brief s^p log^q(lambda + s^{±1}); lambda starts at 2 and doubles until convex and N(s)/s increasing on the grid.
inline YoungFunction plog(double p, double q, int sign, double lambda0 = 2.0) {
  if (!(p > 1.0)) throw std::invalid_argument("plog: exponent must be > 1");
  const auto grid = young_check_grid();
  for (double lambda = lambda0; lambda < 1e12; lambda *= 2.0) {
    YoungFunction N = plog_raw(p, q, lambda, sign);
    bool ok = midpoint_convex([&](double s) { return N(s); }, grid);
    for (std::size_t i = 0; ok && i + 1 < grid.size(); ++i)
      if (N(grid[i + 1]) / grid[i + 1] < N(grid[i]) / grid[i] || N.left_deriv(grid[i]) <= 0.0) ok = false;
    if (ok) return N;
  }
  throw std::runtime_error("plog: no lambda makes the function convex");
}

inline YoungFunction wedge(double n, double a1, double a2) {
  auto N = power_wedge(stable_exponent(n, a1), stable_exponent(n, a2));
  return YoungFunction("wedge", {{"n", n}, {"alpha1", a1}, {"alpha2", a2}}, [N](double s) { return N(s); },
                       [N](double r) { return N.inverse(r); }, [N](double s) { return N.left_deriv(s); });
}

inline YoungFunction vee(double n, double a1, double a2) {
  auto N = power_vee(stable_exponent(n, a1), stable_exponent(n, a2));
  return YoungFunction("vee", {{"n", n}, {"alpha1", a1}, {"alpha2", a2}}, [N](double s) { return N(s); },
                       [N](double r) { return N.inverse(r); }, [N](double s) { return N.left_deriv(s); });
}

//! \brief {s log^q(lambda+s)}^{n/(n-alpha/2)}.
inline YoungFunction log_plus(double n, double alpha, double q) {
  const double k = stable_exponent(n, alpha);
  if (q == 0.0) {
    auto P = power(k);
    return YoungFunction("log_plus", {{"n", n}, {"alpha", alpha}, {"q", q}, {"lambda", 2.0}}, [P](double s) { return P(s); },
                         [P](double r) { return P.inverse(r); }, [P](double s) { return P.left_deriv(s); });
  }
  auto N = plog(k, q * k, +1);
  return YoungFunction("log_plus", {{"n", n}, {"alpha", alpha}, {"q", q}, {"lambda", N.param("lambda")}},
                       [N](double s) { return N(s); }, [N](double r) { return N.inverse(r); },
                       [N](double s) { return N.left_deriv(s); });
}

//! \brief {s log^p(lambda+1/s)}^{n/(n-alpha/2)}.
inline YoungFunction log_minus(double n, double alpha, double p) {
  const double k = stable_exponent(n, alpha);
  if (p == 0.0) {
    auto P = power(k);
    return YoungFunction("log_minus", {{"n", n}, {"alpha", alpha}, {"p", p}, {"lambda", 2.0}},
                         [P](double s) { return P(s); }, [P](double r) { return P.inverse(r); },
                         [P](double s) { return P.left_deriv(s); });
  }
  auto N = plog(k, p * k, -1);
  return YoungFunction("log_minus", {{"n", n}, {"alpha", alpha}, {"p", p}, {"lambda", N.param("lambda")}},
                       [N](double s) { return N(s); }, [N](double r) { return N.inverse(r); },
                       [N](double s) { return N.left_deriv(s); });
}

//! \brief s^{n/(n-alpha/2)} ∧ s^{n/(n-1)}, n >= 2.
inline YoungFunction tilde(double n, double alpha) {
  if (!(n >= 2.0)) throw std::invalid_argument("tilde: n must be >= 2");
  auto N = power_wedge(stable_exponent(n, alpha), n / (n - 1.0));
  return YoungFunction("tilde", {{"n", n}, {"alpha", alpha}}, [N](double s) { return N(s); },
                       [N](double r) { return N.inverse(r); }, [N](double s) { return N.left_deriv(s); });
}

}  // namespace young

//! \brief Registry lookup by family name.
inline YoungFunction builtin(const std::string& name, const std::map<std::string, double>& p) {
  auto get = [&](const char* k, double dflt = std::nan("")) {
    auto it = p.find(k);
    if (it != p.end()) return it->second;
    if (std::isnan(dflt)) throw std::invalid_argument("builtin " + name + ": missing parameter " + k);
    return dflt;
  };
  if (name == "power") return young::power(get("p"));
  if (name == "power_wedge") return young::power_wedge(get("p1"), get("p2"));
  if (name == "power_vee") return young::power_vee(get("p1"), get("p2"));
  if (name == "wedge") return young::wedge(get("n"), get("alpha1"), get("alpha2"));
  if (name == "vee") return young::vee(get("n"), get("alpha1"), get("alpha2"));
  if (name == "log_plus") return young::log_plus(get("n"), get("alpha"), get("q"));
  if (name == "log_minus") return young::log_minus(get("n"), get("alpha"), get("p"));
  if (name == "tilde") return young::tilde(get("n"), get("alpha"));
  if (name == "plog_plus") return young::plog(get("p"), get("q"), +1, get("lambda", 2.0));
  if (name == "plog_minus") return young::plog(get("p"), get("q"), -1, get("lambda", 2.0));
  throw std::invalid_argument("unknown Young family: " + name);
}

//! \brief Monotone table (x_i, y_i), both strictly increasing and positive; log-log linear with end-slope extrapolation.
class LogLogTable {
 public:
  LogLogTable() = default;
  LogLogTable(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("LogLogTable: need >= 2 points");
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("LogLogTable: values must be positive");
      if (i > 0 && !(x[i] > x[i - 1] && y[i] >= y[i - 1]))
        throw std::invalid_argument("LogLogTable: table must be increasing");
      lx_.push_back(std::log(x[i]));
      ly_.push_back(std::log(y[i]));
    }
  }
  double operator()(double x) const { return std::exp(eval_log(std::log(x))); }
  //! \brief d log y / d log x on the segment to the left of x.
  double left_slope(double x) const {
    const std::size_t i = segment(std::log(x), true);
    return slope(i);
  }
  //! \brief Swapped table for the inverse map.
  LogLogTable swapped() const {
    LogLogTable t;
    for (std::size_t i = 0; i < lx_.size(); ++i) {
      if (i > 0 && ly_[i] <= t.lx_.back()) continue;  // drop flat pieces
      t.lx_.push_back(ly_[i]);
      t.ly_.push_back(lx_[i]);
    }
    return t;
  }
  std::size_t size() const { return lx_.size(); }
  double x(std::size_t i) const { return std::exp(lx_[i]); }
  double y(std::size_t i) const { return std::exp(ly_[i]); }

 private:
  std::vector<double> lx_, ly_;

  double slope(std::size_t i) const { return (ly_[i + 1] - ly_[i]) / (lx_[i + 1] - lx_[i]); }
  std::size_t segment(double u, bool left_closed) const {
    if (u <= lx_.front()) return 0;
    if (u >= lx_.back()) return lx_.size() - 2;
    auto it = left_closed ? std::lower_bound(lx_.begin(), lx_.end(), u) : std::upper_bound(lx_.begin(), lx_.end(), u);
    std::size_t k = static_cast<std::size_t>(it - lx_.begin());
    return k == 0 ? 0 : std::min(k - 1, lx_.size() - 2);
  }
  double eval_log(double u) const {
    const std::size_t i = segment(u, false);
    return ly_[i] + slope(i) * (u - lx_[i]);
  }
};

//! \brief Young function from a tabulated monotone map s -> N(s).
inline YoungFunction tabulated_young(const std::vector<double>& s, const std::vector<double>& N, std::string family,
                                     std::map<std::string, double> params = {}) {
  auto tab = std::make_shared<LogLogTable>(s, N);
  auto inv = std::make_shared<LogLogTable>(tab->swapped());
  return YoungFunction(
      std::move(family), std::move(params), [tab](double x) { return (*tab)(x); },
      [inv](double r) { return (*inv)(r); }, [tab](double x) { return tab->left_slope(x) * (*tab)(x) / x; });
}

//! \brief Inverse of a concave increasing piecewise-linear Phi through (0,0),(t_i,phi_i), constant afterwards.
//! N = Phi^{-1} is piecewise linear and +inf above sup Phi.
inline YoungFunction piecewise_linear_inverse(std::vector<double> t, std::vector<double> phi, std::string family) {
  t.insert(t.begin(), 0.0);
  phi.insert(phi.begin(), 0.0);
  auto T = std::make_shared<std::vector<double>>(t);
  auto P = std::make_shared<std::vector<double>>(phi);
  const double sup = phi.back();
  auto eval = [T, P, sup](double u) {
    if (u > sup) return kInf;
    auto it = std::lower_bound(P->begin(), P->end(), u);
    std::size_t k = static_cast<std::size_t>(it - P->begin());
    if (k == 0) return 0.0;
    if ((*P)[k] == u) {
      // Leftmost preimage of u.
      while (k > 0 && (*P)[k - 1] == u) --k;
      return (*T)[k];
    }
    const double w = (u - (*P)[k - 1]) / ((*P)[k] - (*P)[k - 1]);
    return (*T)[k - 1] + w * ((*T)[k] - (*T)[k - 1]);
  };
  auto inv = [T, P](double r) {  // inf{u : N(u) >= r} = Phi(r), capped at sup
    if (r >= T->back()) return P->back();
    auto it = std::upper_bound(T->begin(), T->end(), r);
    std::size_t k = static_cast<std::size_t>(it - T->begin());
    const double w = (r - (*T)[k - 1]) / ((*T)[k] - (*T)[k - 1]);
    return (*P)[k - 1] + w * ((*P)[k] - (*P)[k - 1]);
  };
  auto deriv = [T, P, sup](double u) {
    if (u > sup) return kInf;
    auto it = std::lower_bound(P->begin(), P->end(), u);
    std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(it - P->begin()));
    k = std::min(k, P->size() - 1);
    const double dp = (*P)[k] - (*P)[k - 1];
    return dp > 0 ? ((*T)[k] - (*T)[k - 1]) / dp : kInf;
  };
  return YoungFunction(std::move(family), {{"sup_phi", sup}}, eval, inv, deriv);
}

// ---------------------------------------------------------------------------
// Orlicz gauge

//! \brief inf{r > 0 : G(r) <= 1} for a nonincreasing G; +inf if never satisfied.
inline ExtReal orlicz_gauge(const std::function<double(double)>& G, double scale_hint, double rel_tol = 1e-12) {
  if (!(scale_hint > 0.0)) return 0.0;
  double hi = scale_hint;
  int guard = 0;
  while (!(G(hi) <= 1.0)) {
    hi *= 2.0;
    if (++guard > 2000) return ExtReal::infinity();
  }
  double lo = hi;
  guard = 0;
  while (G(lo) <= 1.0) {
    lo *= 0.5;
    if (++guard > 2000) return 0.0;
  }
  return bisect_predicate([&](double r) { return G(r) <= 1.0; }, lo, hi, rel_tol);
}

//! \brief ||f||_N on a finite space.
inline ExtReal orlicz_norm(const FiniteMeasureSpace& s, const YoungFunction& N, const Vec& f, double rel_tol = 1e-12) {
  check_dim(s, f, "orlicz_norm");
  const double fmax = f.cwiseAbs().maxCoeff();
  if (fmax == 0.0) return 0.0;
  auto G = [&](double r) {
    double acc = 0.0;
    for (int i = 0; i < s.size(); ++i) {
      const double a = std::abs(f[i]);
      if (a > 0.0) acc += s.mu(i) * N(a / r);
      if (std::isinf(acc)) return acc;
    }
    return acc;
  };
  return orlicz_gauge(G, fmax, rel_tol);
}

//! \brief Closed form ||1_A||_N = 1 / N^{-1}(1/mu(A)).
inline double indicator_norm(const YoungFunction& N, double mass) { return 1.0 / N.inverse(1.0 / mass); }

// ---------------------------------------------------------------------------
// c_N, scaling, domination

//! \brief c_N = inf_{s>0} N(s) / (s N'_-(s)) over [1e-8, 1e8] with local refinement.
inline double c_N(const YoungFunction& N, double lo = 1e-8, double hi = 1e8, std::size_t n = 2001) {
  auto q = [&](double s) {
    const double d = N.left_deriv(s);
    if (!(d > 0.0)) throw std::domain_error("c_N: left derivative vanishes");
    const double v = N(s);
    if (std::isinf(v)) return kInf;
    return v / (s * d);
  };
  const auto g = log_grid(lo, hi, n);
  std::size_t best = 0;
  double bv = kInf;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = q(g[i]);
    if (v < bv) {
      bv = v;
      best = i;
    }
  }
  // Golden-section refinement in log s around the best node.
  double a = std::log(g[best > 0 ? best - 1 : 0]), b = std::log(g[std::min(best + 1, g.size() - 1)]);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 80 && b - a > 1e-14; ++it) {
    const double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    const double f1 = q(std::exp(x1)), f2 = q(std::exp(x2));
    bv = std::min({bv, f1, f2});
    if (f1 < f2)
      b = x2;
    else
      a = x1;
  }
  return bv;
}

//! \brief Verifies c^{-1}||f||_{cN} <= ||f||_N <= ||f||_{cN} on a family.
inline Report scaling_bound_check(const FiniteMeasureSpace& s, const YoungFunction& N, double c,
                                  const std::vector<Vec>& family, double tol = 1e-9) {
  if (!(c >= 1.0)) throw std::invalid_argument("scaling_bound_check: c must be >= 1");
  Report r;
  r.name = "scaling_bound";
  r.tol = tol;
  r.info["c"] = c;
  const YoungFunction cN = N.scaled(c);
  for (std::size_t i = 0; i < family.size(); ++i) {
    const double a = orlicz_norm(s, N, family[i]).as_double();
    const double b = orlicz_norm(s, cN, family[i]).as_double();
    r.add(Check::leq("c^-1 ||f||_cN <= ||f||_N", b / c, a, {{"f", i}}));
    r.add(Check::leq("||f||_N <= ||f||_cN", a, b, {{"f", i}}));
  }
  return r;
}

struct DominationResult {
  bool dominated = true;
  double sup_ratio = 0.0;
  double argsup = 0.0;
  double slope_low = 0.0;   // fitted log-log slope of N1/N2 over the first decades
  double slope_high = 0.0;  // over the last decades
  std::string witness = "none";

  json to_json() const {
    return json{{"dominated", dominated}, {"sup_ratio", num(sup_ratio)}, {"argsup", argsup},
                {"slope_low_end", slope_low}, {"slope_high_end", slope_high}, {"witness", witness}};
  }
};

//! \brief Decides whether sup N1/N2 is finite from the grid values and end trends.
inline DominationResult domination(const YoungFunction& N1, const YoungFunction& N2, const std::vector<double>& grid,
                                   double slope_threshold = 0.02) {
  DominationResult d;
  std::vector<double> ratio(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    ratio[i] = ext_ratio(N1(grid[i]), N2(grid[i]));
    if (ratio[i] > d.sup_ratio) {
      d.sup_ratio = ratio[i];
      d.argsup = grid[i];
    }
  }
  const std::size_t k = std::max<std::size_t>(3, grid.size() / 8);
  auto end_fit = [&](std::size_t from, std::size_t to) {
    std::vector<double> x, y;
    for (std::size_t i = from; i < to; ++i) {
      if (!(ratio[i] > 0.0) || std::isinf(ratio[i])) continue;
      x.push_back(grid[i]);
      y.push_back(ratio[i]);
    }
    return x.size() >= 2 ? fit_loglog(x, y).slope : 0.0;
  };
  d.slope_low = end_fit(0, k);
  d.slope_high = end_fit(grid.size() - k, grid.size());
  if (std::isinf(d.sup_ratio)) {
    d.dominated = false;
    d.witness = d.argsup < 1.0 ? "s->0" : "s->inf";
  } else if (d.slope_high > slope_threshold) {
    d.dominated = false;
    d.witness = "s->inf";
  } else if (d.slope_low < -slope_threshold) {
    d.dominated = false;
    d.witness = "s->0";
  }
  return d;
}

// ---------------------------------------------------------------------------
// Profiles h and Phi_h

//! \brief h in the class H_alpha, with optional pure-power closed form h = c r^a.
struct ProfileH {
  std::function<double(double)> h;
  double alpha = 1.0;
  double n = 1.0;
  bool pure_power = false;
  double coef = 1.0;
  double expo = 0.0;

  static ProfileH power(double c, double a, double alpha, double n) {
    ProfileH p;
    p.h = [c, a](double r) { return c * std::pow(r, a); };
    p.alpha = alpha;
    p.n = n;
    p.pure_power = true;
    p.coef = c;
    p.expo = a;
    return p;
  }

  //! \brief Grid check of condition (i): h and s/h(s) increasing.
  bool class_condition(const std::vector<double>& grid) const {
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      const double a = grid[i], b = grid[i + 1];
      if (h(b) < h(a) * (1 - 1e-12)) return false;
      if (b / h(b) < (a / h(a)) * (1 - 1e-12)) return false;
    }
    return true;
  }
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

//! \brief int_{lo}^{hi} g(r) dr over (0,inf)-type ranges in log variable with geometric chunking at open ends.
inline double integrate_log_open(const std::function<double(double)>& g, double lo, double hi, double rel_tol) {
  auto f = [&](double u) {
    const double r = std::exp(u);
    return g(r) * r;
  };
  if (lo > 0.0 && std::isfinite(hi)) return integrate(f, std::log(lo), std::log(hi), rel_tol, 1e-300).value;
  const double anchor = lo > 0.0 ? std::log(lo) : (std::isfinite(hi) ? std::log(hi) : 0.0);
  double total = 0.0;
  // Chunks of 8 e-folds toward each open end until negligible.
  auto sweep = [&](double dir, const char* where) {
    double u = anchor, prev = kInf;
    for (int k = 0; k < 400; ++k) {
      const double a = dir > 0 ? u : u - 8.0, b = dir > 0 ? u + 8.0 : u;
      const double c = integrate(f, a, b, rel_tol, 1e-300).value;
      total += c;
      u += dir * 8.0;
      if (k > 0 && std::abs(c) <= 1e-15 * std::abs(total)) return;
      if (k > 20 && std::abs(c) >= 0.999 * prev) throw DivergenceError(std::string("integral diverges at ") + where);
      prev = std::abs(c);
    }
    throw DivergenceError(std::string("integral does not settle at ") + where);
  };
  if (!std::isfinite(hi)) sweep(+1.0, "+inf");
  if (lo <= 0.0) sweep(-1.0, "0");
  return total;
}

}  // namespace detail

//! \brief Phi_h(s) = int_0^s dt int_0^{t^{-1/n}} r^{alpha-1}/h(r) dr.
//! Evaluated after exchanging the order: int_0^inf r^{alpha-1}/h(r) min(s, r^{-n}) dr.
inline double phi_h(const ProfileH& P, double s, double rel_tol = 1e-11) {
  if (s < 0.0) throw std::invalid_argument("phi_h: s must be >= 0");
  if (s == 0.0) return 0.0;
  const double R = std::pow(s, -1.0 / P.n);
  if (P.pure_power) {
    const double e = P.alpha - P.expo;  // inner integrand r^{e-1}/c
    if (!(e > 0.0)) throw DivergenceError("phi_h: inner integral diverges at 0");
    if (!(P.n > e)) throw DivergenceError("phi_h: outer integral diverges");
    // s * R^e/(c e) + R^{e-n}/(c (n-e))
    return s * std::pow(R, e) / (P.coef * e) + std::pow(R, e - P.n) / (P.coef * (P.n - e));
  }
  auto inner = [&](double r) { return std::pow(r, P.alpha - 1.0) / P.h(r); };
  const double a = s * detail::integrate_log_open(inner, 0.0, R, rel_tol);
  auto outer = [&](double r) { return std::pow(r, P.alpha - 1.0 - P.n) / P.h(r); };
  const double b = detail::integrate_log_open(outer, R, kInf, rel_tol);
  return a + b;
}

//! \brief N_h = Phi_h^{-1} tabulated on a log grid of s (log-log interpolation, end-slope extrapolation).
inline YoungFunction invert_phi(const ProfileH& P, double s_lo = 1e-14, double s_hi = 1e14, std::size_t per_decade = 24) {
  const std::size_t n = static_cast<std::size_t>(std::ceil(std::log10(s_hi / s_lo) * static_cast<double>(per_decade))) + 1;
  const auto grid = log_grid(s_lo, s_hi, n);
  std::vector<double> phi(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    phi[i] = phi_h(P, grid[i]);
    if (!(phi[i] > 0.0) || !std::isfinite(phi[i])) throw std::runtime_error("invert_phi: profile invalid");
    if (i > 0 && !(phi[i] > phi[i - 1])) throw std::runtime_error("invert_phi: Phi_h not increasing");
  }
  // Table of Phi: s -> Phi(s); N is its swap: u -> s.
  return tabulated_young(phi, grid, "inverse_phi_h", {{"alpha", P.alpha}, {"n", P.n}});
}

//! \brief CSV export of (s, N(s)).
inline std::string young_csv(const YoungFunction& N, const std::vector<double>& grid) {
  std::ostringstream os;
  os.precision(17);
  os << "s,N\n";
  for (double s : grid) os << s << "," << N(s) << "\n";
  return os.str();
}

//! \brief CSV import of (s, N(s)) into a tabulated Young function.
inline YoungFunction young_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<double> s, v;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    const double a = std::stod(line.substr(0, comma)), b = std::stod(line.substr(comma + 1));
    if (a > 0.0 && b > 0.0) {
      s.push_back(a);
      v.push_back(b);
    }
  }
  return tabulated_young(s, v, "csv");
}

}  // namespace jumpiso

#endif
