#ifndef JUMPISO_NUMERICS_HPP
#define JUMPISO_NUMERICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace jumpiso {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

//! \brief Nonnegative extended real: a finite value or +infinity.
class ExtReal {
 public:
  constexpr ExtReal() = default;
  constexpr ExtReal(double v) : v_(v), inf_(v == kInf) {}  // NOLINT implicit by design
  static constexpr ExtReal infinity() { return ExtReal(kInf); }

  constexpr bool is_finite() const { return !inf_; }
  constexpr bool is_infinite() const { return inf_; }
  double value() const {
    if (inf_) throw std::domain_error("ExtReal::value on +infinity");
    return v_;
  }
  //! \brief Numeric view, +infinity maps to IEEE inf.
  constexpr double as_double() const { return inf_ ? kInf : v_; }

  friend constexpr bool operator<(ExtReal a, ExtReal b) { return a.as_double() < b.as_double(); }
  friend constexpr bool operator<=(ExtReal a, ExtReal b) { return a.as_double() <= b.as_double(); }
  friend constexpr bool operator>(ExtReal a, ExtReal b) { return b < a; }
  friend constexpr bool operator>=(ExtReal a, ExtReal b) { return b <= a; }
  friend constexpr bool operator==(ExtReal a, ExtReal b) { return a.as_double() == b.as_double(); }

 private:
  double v_ = 0.0;
  bool inf_ = false;
};

//! \brief Ratio with the conventions 0/0 = 1, inf/inf = 1, r/0 = inf, r/inf = 0.
inline double ext_ratio(double a, double b) {
  if (a == 0.0 && b == 0.0) return 1.0;
  if (std::isinf(a) && std::isinf(b)) return 1.0;
  if (b == 0.0) return kInf;
  if (std::isinf(b)) return 0.0;
  return a / b;
}

//! \brief "Exact" comparison tolerance: relative for magnitudes >= 1e-6, absolute below.
inline double exact_tol(double magnitude, double eps = 1e-12) {
  magnitude = std::abs(magnitude);
  return magnitude >= 1e-6 ? eps * magnitude : eps;
}

inline bool nearly_equal(double a, double b, double eps = 1e-12) {
  return std::abs(a - b) <= exact_tol(std::max(std::abs(a), std::abs(b)), eps);
}

inline std::vector<double> log_grid(double a, double b, std::size_t n) {
  std::vector<double> g(n);
  if (n == 1) {
    g[0] = a;
    return g;
  }
  const double la = std::log(a), lb = std::log(b);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = std::exp(la + (lb - la) * static_cast<double>(i) / static_cast<double>(n - 1));
  g.front() = a;
  g.back() = b;
  return g;
}

inline std::vector<double> lin_grid(double a, double b, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms = 0.0;
};

//! \brief Ordinary least squares y = slope*x + intercept.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need >= 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double r2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.slope * x[i] + f.intercept);
    r2 += e * e;
  }
  f.rms = std::sqrt(r2 / n);
  return f;
}

//! \brief Log-log OLS fit of y against x (both positive).
inline LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  return fit_line(lx, ly);
}

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
  bool converged = false;
};

namespace detail {

// Gauss-Kronrod 7/15 nodes and weights on [-1,1].
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
inline std::pair<double, double> gk15(F&& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double fc = f(c);
  double rk = fc * kWgk[7];
  double rg = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double f1 = f(c - dx), f2 = f(c + dx);
    rk += kWgk[j] * (f1 + f2);
    if (j % 2 == 1) rg += kWg[j / 2] * (f1 + f2);
  }
  return {rk * h, std::abs((rk - rg) * h)};
}

}  // namespace detail

//! \brief Globally adaptive Gauss-Kronrod 7/15 quadrature on [a,b].
template <class F>
QuadResult integrate(F&& f, double a, double b, double rel_tol = 1e-10, double abs_tol = 1e-14,
                     int max_intervals = 4000) {
  QuadResult out;
  if (a == b) {
    out.converged = true;
    return out;
  }
  struct Piece {
    double a, b, v, e;
    bool operator<(const Piece& o) const { return e < o.e; }
  };
  std::priority_queue<Piece> heap;
  auto [v0, e0] = detail::gk15(f, a, b);
  heap.push({a, b, v0, e0});
  double total = v0, err = e0;
  out.evaluations = 15;
  int count = 1;
  while (err > std::max(abs_tol, rel_tol * std::abs(total)) && count < max_intervals) {
    Piece p = heap.top();
    heap.pop();
    const double m = 0.5 * (p.a + p.b);
    if (m <= p.a || m >= p.b) {  // cannot split further
      heap.push(p);
      break;
    }
    auto [v1, e1] = detail::gk15(f, p.a, m);
    auto [v2, e2] = detail::gk15(f, m, p.b);
    out.evaluations += 30;
    total += v1 + v2 - p.v;
    err += e1 + e2 - p.e;
    heap.push({p.a, m, v1, e1});
    heap.push({m, p.b, v2, e2});
    ++count;
  }
  // Re-sum to limit cancellation drift.
  total = 0.0;
  err = 0.0;
  while (!heap.empty()) {
    total += heap.top().v;
    err += heap.top().e;
    heap.pop();
  }
  out.value = total;
  out.error = err;
  out.converged = err <= std::max(abs_tol, rel_tol * std::abs(total));
  return out;
}

//! \brief Quadrature over [a,b] in the variable u = log x (a > 0); suited to power-law integrands.
template <class F>
QuadResult integrate_log(F&& f, double a, double b, double rel_tol = 1e-10, double abs_tol = 1e-300) {
  auto g = [&](double u) {
    const double x = std::exp(u);
    return f(x) * x;
  };
  return integrate(g, std::log(a), std::log(b), rel_tol, abs_tol);
}

//! \brief Smallest x in [lo,hi] with pred(x) true, assuming pred is monotone false->true.
template <class P>
double bisect_predicate(P&& pred, double lo, double hi, double rel_tol = 1e-12, int max_iter = 400) {
  for (int i = 0; i < max_iter && hi - lo > rel_tol * std::max(std::abs(hi), 1e-300); ++i) {
    const double mid = (lo > 0.0 && hi / lo > 4.0) ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    if (pred(mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

//! \brief Deterministic SplitMix64 generator with explicitly defined real/int draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : s_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (s_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  //! \brief Uniform on [0,1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double log_uniform(double a, double b) { return std::exp(uniform(std::log(a), std::log(b))); }
  //! \brief Uniform integer in [0,n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }
  //! \brief Child stream seeded from (this seed, index).
  static Rng derive(std::uint64_t seed, std::uint64_t index) {
    Rng r(seed ^ (0xD1B54A32D192ED03ULL * (index + 1)));
    r.next();
    return r;
  }

 private:
  std::uint64_t s_;
};

}  // namespace jumpiso

#endif
