#ifndef JUMPISO_STABLE_LATTICE_HPP
#define JUMPISO_STABLE_LATTICE_HPP

#include <fftw3.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "measure_core.hpp"
#include "numerics.hpp"
#include "report.hpp"
#include "superpoincare.hpp"
#include "young.hpp"

namespace jumpiso {
namespace lattice {

using Offset = std::array<int, 3>;

//! \brief Values on the cube [-R,R]^n, n in {1,2,3}; entries outside read as 0.
class LatticeWindow {
 public:
  LatticeWindow() = default;
  LatticeWindow(int n, int R) : n_(n), R_(R) {
    if (n < 1 || n > 3) throw ValidationError("lattice window: n must be 1, 2 or 3");
    if (R < 0) throw ValidationError("lattice window: R must be >= 0");
    side_ = 2 * R + 1;
    std::size_t sz = 1;
    for (int i = 0; i < n; ++i) sz *= static_cast<std::size_t>(side_);
    v_.assign(sz, 0.0);
  }
  static LatticeWindow delta(int n, int R) {
    LatticeWindow w(n, R);
    w.v_[w.index({0, 0, 0})] = 1.0;
    return w;
  }

  int dim() const { return n_; }
  int radius() const { return R_; }
  std::size_t size() const { return v_.size(); }
  const std::vector<double>& values() const { return v_; }
  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }

  bool contains(const Offset& x) const {
    for (int i = 0; i < n_; ++i)
      if (x[static_cast<std::size_t>(i)] < -R_ || x[static_cast<std::size_t>(i)] > R_) return false;
    return true;
  }
  std::size_t index(const Offset& x) const {
    std::size_t idx = 0;
    for (int i = n_ - 1; i >= 0; --i) idx = idx * static_cast<std::size_t>(side_) + static_cast<std::size_t>(x[static_cast<std::size_t>(i)] + R_);
    return idx;
  }
  Offset offset(std::size_t idx) const {
    Offset x{0, 0, 0};
    for (int i = 0; i < n_; ++i) {
      x[static_cast<std::size_t>(i)] = static_cast<int>(idx % static_cast<std::size_t>(side_)) - R_;
      idx /= static_cast<std::size_t>(side_);
    }
    return x;
  }
  double at(const Offset& x) const { return contains(x) ? v_[index(x)] : 0.0; }

  double sum() const {
    double s = 0.0;
    for (double x : v_) s += x;
    return s;
  }
  //! \brief sup |a - b| over Z^n (zero outside each window).
  double max_abs_diff(const LatticeWindow& o) const {
    const LatticeWindow& big = R_ >= o.R_ ? *this : o;
    const LatticeWindow& small = R_ >= o.R_ ? o : *this;
    double d = 0.0;
    for (std::size_t i = 0; i < big.size(); ++i) d = std::max(d, std::abs(big.v_[i] - small.at(big.offset(i))));
    return d;
  }
  //! \brief CSV rows "x1[,x2[,x3]],value" over the nonzero entries.
  std::string csv() const {
    std::ostringstream os;
    os.precision(17);
    for (int i = 0; i < n_; ++i) os << 'x' << i + 1 << ',';
    os << "value\n";
    for (std::size_t i = 0; i < v_.size(); ++i) {
      if (v_[i] == 0.0) continue;
      const Offset x = offset(i);
      for (int k = 0; k < n_; ++k) os << x[static_cast<std::size_t>(k)] << ',';
      os << v_[i] << '\n';
    }
    return os.str();
  }

  double leak = 0.0;  // bound on the l1 error of the entries (mass lost past the edge)

 private:
  int n_ = 1, R_ = 0, side_ = 1;
  std::vector<double> v_;
};

//! \brief One nearest-neighbour step: g(x) = (1/2n) sum_i f(x + e_i) + f(x - e_i). Mass stepping off the
//! window is added to `leak`.
inline LatticeWindow srw_step(const LatticeWindow& f) {
  const int n = f.dim(), R = f.radius();
  LatticeWindow g(n, R);
  g.leak = f.leak;
  const double w = 1.0 / (2.0 * n);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double v = f[i];
    if (v == 0.0) continue;
    Offset x = f.offset(i);
    for (int a = 0; a < n; ++a) {
      for (int d : {-1, 1}) {
        x[static_cast<std::size_t>(a)] += d;
        if (g.contains(x))
          g[g.index(x)] += w * v;
        else
          g.leak += w * std::abs(v);
        x[static_cast<std::size_t>(a)] -= d;
      }
    }
  }
  return g;
}

//! \brief Calls fn(k, q_k) for k = 0..K with q_k computed by iterated stepping on [-R,R]^n.
template <class Fn>
void srw_for_each(int n, int K, int R, Fn&& fn) {
  if (K < 0) throw ValidationError("srw: K must be >= 0");
  if (R < K) throw ValidationError("srw: R = " + std::to_string(R) + " < K = " + std::to_string(K) + " lets mass leave the window");
  LatticeWindow q = LatticeWindow::delta(n, R);
  fn(0, q);
  for (int k = 1; k <= K; ++k) {
    q = srw_step(q);
    fn(k, q);
  }
}

//! \brief q_0..q_K of the simple random walk.
inline std::vector<LatticeWindow> srw_kernels(int n, int K, int R) {
  std::vector<LatticeWindow> out;
  srw_for_each(n, K, R, [&](int, const LatticeWindow& q) { out.push_back(q); });
  return out;
}

//! \brief 1-D walk: C(k, (k+u)/2) / 2^k, zero off the parity class.
inline double srw_binomial(long k, long u) {
  u = std::abs(u);
  if (u > k || (k - u) % 2 != 0) return 0.0;
  const double j = static_cast<double>((k + u) / 2), kk = static_cast<double>(k);
  return std::exp(std::lgamma(kk + 1) - std::lgamma(j + 1) - std::lgamma(kk - j + 1) - kk * std::numbers::ln2);
}

//! \brief q_k(0,x) in closed form for n = 1, 2. In rotated coordinates the planar walk is a pair of
//! independent 1-D walks: q_k(x) = b_k(x1 + x2) b_k(x1 - x2).
inline double srw_prob(int n, long k, const Offset& x) {
  if (n == 1) return srw_binomial(k, x[0]);
  if (n == 2) return srw_binomial(k, x[0] + x[1]) * srw_binomial(k, x[0] - x[1]);
  throw ValidationError("srw_prob: closed form only for n = 1, 2");
}

// ---------------------------------------------------------------------------
// Subordination

struct SubordinationWeights {
  double alpha = 1.0;
  long K = 0;
  std::vector<double> c;  // c[k-1] = c(psi, k)
  double tail = 1.0;      // 1 - sum_{k<=K} c(psi, k)

  double operator()(long k) const { return c.at(static_cast<std::size_t>(k - 1)); }
  double partial_sum() const {
    double s = 0.0;
    for (double x : c) s += x;
    return s;
  }
  //! \brief alpha / (2 Gamma(1 - alpha/2)), the limit of c(psi,k) k^{1+alpha/2}.
  double limit_constant() const { return alpha / (2.0 * std::tgamma(1.0 - alpha / 2.0)); }
};

//! \brief c(psi,1) = alpha/2, c(psi,k+1) = c(psi,k)(k - alpha/2)/(k+1). The tail is the product
//! prod_{k<=K} (1 - alpha/(2k)), which is the exact remainder of the series.
inline SubordinationWeights subord_weights(double alpha, long K) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw ValidationError("subord_weights: alpha must lie in (0,2)");
  if (K < 1) throw ValidationError("subord_weights: K must be >= 1");
  SubordinationWeights w;
  w.alpha = alpha;
  w.K = K;
  w.c.resize(static_cast<std::size_t>(K));
  const double a = alpha / 2.0;
  double ck = a, tail = 1.0;
  for (long k = 1; k <= K; ++k) {
    w.c[static_cast<std::size_t>(k - 1)] = ck;
    tail *= 1.0 - a / static_cast<double>(k);
    ck *= (static_cast<double>(k) - a) / static_cast<double>(k + 1);
  }
  w.tail = tail;
  return w;
}

// ---------------------------------------------------------------------------
// p_1

struct P1Kernel {
  LatticeWindow p;
  double tail = 0.0;  // per-entry uncertainty (q_k <= 1)
};

//! \brief p_1 = sum_{k<=K} c(psi,k) q_k on [-R,R]^n.
inline P1Kernel p1_kernel(int n, double alpha, int K, int R) {
  const SubordinationWeights w = subord_weights(alpha, K);
  P1Kernel out{LatticeWindow(n, R), w.tail};
  srw_for_each(n, K, R, [&](int k, const LatticeWindow& q) {
    if (k == 0) return;
    const double c = w(k);
    for (std::size_t i = 0; i < q.size(); ++i) out.p[i] += c * q[i];
  });
  return out;
}

struct SlopeFit {
  double slope = 0.0;
  double lo = 0.0, hi = 0.0;  // fitted range
  int points = 0;
  json to_json() const { return json{{"slope", num(slope)}, {"range_lo", num(lo)}, {"range_hi", num(hi)}, {"points", points}}; }
};

inline SlopeFit slope_fit(const std::vector<double>& x, const std::vector<double>& y, double lo, double hi) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] >= lo * (1 - 1e-12) && x[i] <= hi * (1 + 1e-12) && y[i] > 0.0) {
      xs.push_back(x[i]);
      ys.push_back(y[i]);
    }
  if (xs.size() < 2) throw std::invalid_argument("slope_fit: fewer than two points in range");
  return {fit_loglog(xs, ys).slope, lo, hi, static_cast<int>(xs.size())};
}

//! \brief p_1(0, r e_1) for r = 1..r_max with K terms evaluated from the closed-form walk.
struct P1Profile {
  int n = 1;
  double alpha = 1.0;
  long K = 0;
  std::vector<double> r, value;
  double entry_bound = 0.0;  // sup_x sum_{k>K} c(psi,k) q_k(0,x)
  SlopeFit fit;
  double band = 0.0;  // max/min of p_1 |x|^{n+alpha} over the fitted range
  json to_json() const {
    return json{{"n", n}, {"alpha", alpha}, {"K", K}, {"entry_bound", num(entry_bound)}, {"fit", fit.to_json()},
                {"expected_slope", -(n + alpha)}, {"band", num(band)}};
  }
};

namespace detail {

// b_k(u) for k = k0, k0 + 2, ... by b_{k+2} = b_k (k+1)(k+2) / (4 (j+1)(k+1-j)), j = (k+u)/2.
class BinomialStepper {
 public:
  BinomialStepper(long k0, long u) : k_(k0), u_(std::abs(u)), b_(srw_binomial(k0, u)) {}
  double value() const { return b_; }
  void advance() {
    const double k = static_cast<double>(k_), j = static_cast<double>((k_ + u_) / 2);
    b_ *= (k + 1.0) * (k + 2.0) / (4.0 * (j + 1.0) * (k + 1.0 - j));
    k_ += 2;
  }

 private:
  long k_, u_;
  double b_;
};

}  // namespace detail

//! \brief sum_{k<=K} c(psi,k) q_k(0,x), n in {1,2}, with the walk stepped two ticks at a time.
inline double p1_value(int n, const SubordinationWeights& w, const Offset& x) {
  if (n != 1 && n != 2) throw ValidationError("p1_value: n must be 1 or 2");
  const long u = n == 1 ? x[0] : static_cast<long>(x[0]) + x[1];
  const long v = n == 1 ? 0 : static_cast<long>(x[0]) - x[1];
  long k0 = std::max(std::abs(u), std::abs(v));
  if (k0 == 0) k0 = 2;  // q_0 is not part of p_1
  detail::BinomialStepper bu(k0, u), bv(k0, v);
  double acc = 0.0;
  for (long k = k0; k <= w.K; k += 2) {
    acc += w(k) * (n == 1 ? bu.value() : bu.value() * bv.value());
    bu.advance();
    if (n == 2) bv.advance();
  }
  return acc;
}

inline P1Profile p1_profile(int n, double alpha, long K, int r_max, double fit_lo, double fit_hi) {
  const SubordinationWeights w = subord_weights(alpha, K);
  P1Profile out;
  out.n = n;
  out.alpha = alpha;
  out.K = K;
  for (int r = 1; r <= r_max; ++r) {
    out.r.push_back(r);
    out.value.push_back(p1_value(n, w, {r, 0, 0}));
  }
  // sup_x q_k <= q_{2 floor(k/2)}(0), which decreases in k.
  const long ke = 2 * ((K + 1) / 2);
  out.entry_bound = w.tail * std::pow(srw_binomial(ke, 0), n);
  out.fit = slope_fit(out.r, out.value, fit_lo, fit_hi);
  double mx = 0.0, mn = kInf;
  for (std::size_t i = 0; i < out.r.size(); ++i) {
    if (out.r[i] < fit_lo || out.r[i] > fit_hi) continue;
    const double b = out.value[i] * std::pow(out.r[i], n + alpha);
    mx = std::max(mx, b);
    mn = std::min(mn, b);
  }
  out.band = mx / mn;
  return out;
}

// ---------------------------------------------------------------------------
// Poissonized semigroup

//! \brief Convolution a * b restricted to [-R,R]^n; dropped mass goes to leak.
inline LatticeWindow convolve(const LatticeWindow& a, const LatticeWindow& b, int R) {
  if (a.dim() != b.dim()) throw ValidationError("convolve: dimension mismatch");
  LatticeWindow out(a.dim(), R);
  double bsum = 0.0, asum = 0.0;
  std::vector<std::pair<Offset, double>> bn;
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (b[j] != 0.0) bn.emplace_back(b.offset(j), b[j]);
    bsum += std::abs(b[j]);
  }
  for (std::size_t i = 0; i < a.size(); ++i) asum += std::abs(a[i]);
  double dropped = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double va = a[i];
    if (va == 0.0) continue;
    const Offset xa = a.offset(i);
    for (const auto& [xb, vb] : bn) {
      const Offset x{xa[0] + xb[0], xa[1] + xb[1], xa[2] + xb[2]};
      if (out.contains(x))
        out[out.index(x)] += va * vb;
      else
        dropped += std::abs(va * vb);
    }
  }
  out.leak = dropped + a.leak * bsum + b.leak * asum + a.leak * b.leak;
  return out;
}

//! \brief Smallest M with P(Poisson(t) > M) < eps.
inline int poisson_terms(double t, double eps = 1e-12) {
  if (t == 0.0) return 0;
  double cdf = 0.0;
  for (int k = 0;; ++k) {
    cdf += std::exp(-t + k * std::log(t) - std::lgamma(k + 1.0));
    if (1.0 - cdf < eps && k >= t) return k;
    if (k > 100000) throw std::runtime_error("poisson_terms: t too large");
  }
}

struct SemigroupWindow {
  LatticeWindow p;
  double t = 0.0;
  int terms = 0;
  double poisson_tail = 0.0;  // weight of the omitted powers
  int safe_R = 0;             // radius holding every computed power
  bool overflow = false;
  //! \brief Entrywise uncertainty: omitted Poisson weight plus l1 leak.
  double uncertainty() const { return poisson_tail + p.leak; }
  json to_json() const {
    return json{{"t", t},           {"terms", terms},       {"poisson_tail", num(poisson_tail)},
                {"leak", num(p.leak)}, {"safe_R", safe_R}, {"overflow", overflow}};
  }
};

//! \brief P_t = e^{-t} sum_{k<=terms} t^k p_1^{*k} / k! on [-R,R]^n. terms = 0 picks the count with
//! Poisson tail below 1e-12.
inline SemigroupWindow lattice_semigroup(const LatticeWindow& p1, double t, int R, int terms = 0) {
  if (!(t >= 0.0)) throw ValidationError("lattice_semigroup: t must be >= 0");
  const int M = terms > 0 ? terms : poisson_terms(t);
  SemigroupWindow out{LatticeWindow::delta(p1.dim(), R), t, M, 0.0, M * p1.radius(), false};
  out.overflow = R < out.safe_R;
  if (t == 0.0) return out;
  double wsum = std::exp(-t);
  LatticeWindow acc(p1.dim(), R), cur = LatticeWindow::delta(p1.dim(), R);
  acc[acc.index({0, 0, 0})] = wsum;
  double leak = 0.0;
  for (int k = 1; k <= M; ++k) {
    cur = convolve(cur, p1, R);
    const double wk = std::exp(-t + k * std::log(t) - std::lgamma(k + 1.0));
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += wk * cur[i];
    leak += wk * cur.leak;
    wsum += wk;
  }
  acc.leak = leak;
  out.p = std::move(acc);
  out.poisson_tail = std::max(0.0, 1.0 - wsum);
  return out;
}

// ---------------------------------------------------------------------------
// Spectral path. A symbol maps d = 1 - phi(theta), phi = (1/n) sum cos theta_i, to 1 - \hat p_1.

using Symbol = std::function<double(double)>;

//! \brief (1 - phi)^{alpha/2}: the untruncated subordinated walk.
inline Symbol stable_symbol(double alpha) {
  return [a = alpha / 2.0](double d) { return d <= 0.0 ? 0.0 : std::pow(d, a); };
}

//! \brief 1 - sum_{k<=K} c(psi,k) phi^k, matching p1_kernel at depth K.
inline Symbol truncated_symbol(const SubordinationWeights& w) {
  auto c = std::make_shared<std::vector<double>>(w.c);
  return [c](double d) {
    const double phi = 1.0 - d;
    double acc = 0.0;
    for (std::size_t k = c->size(); k-- > 0;) acc = (acc + (*c)[k]) * phi;
    return 1.0 - acc;
  };
}

namespace detail {

inline double one_minus_cos(double th) {
  const double s = std::sin(0.5 * th);
  return 2.0 * s * s;
}

//! \brief int_0^b f with dyadic breakpoints b 2^{-k} towards 0.
template <class F>
double integrate_dyadic(F&& f, double b, int levels = 50, double rel = 1e-11) {
  double total = 0.0, hi = b;
  for (int k = 0; k < levels; ++k) {
    const double lo = 0.5 * hi;
    total += integrate(f, lo, hi, rel, 0.0).value;
    hi = lo;
  }
  return total + integrate(f, 0.0, hi, rel, 0.0).value;
}

inline std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

//! \brief p_t(0,0) = pi^{-n} int_{[0,pi]^n} exp(-t sym(1 - phi)) dtheta, n in {1,2}.
inline double heat_diagonal(int n, const Symbol& sym, double t) {
  const double pi = std::numbers::pi;
  if (n == 1) return detail::integrate_dyadic([&](double th) { return std::exp(-t * sym(detail::one_minus_cos(th))); }, pi) / pi;
  if (n == 2) {
    auto outer = [&](double t1) {
      const double d1 = detail::one_minus_cos(t1);
      return detail::integrate_dyadic(
          [&](double t2) { return std::exp(-t * sym(0.5 * (d1 + detail::one_minus_cos(t2)))); }, pi, 50, 1e-10);
    };
    return detail::integrate_dyadic(outer, pi, 50, 1e-9) / (pi * pi);
  }
  throw ValidationError("heat_diagonal: n must be 1 or 2");
}

//! \brief p_t on the torus (Z/LZ)^n, n in {1,2}, by an inverse DCT-I of the symbol; values stored
//! for the fundamental quadrant [0, L/2]^n.
class TorusKernel {
 public:
  TorusKernel(int n, const Symbol& sym, double t, int L) : n_(n), L_(L), M_(L / 2 + 1) {
    if (n != 1 && n != 2) throw ValidationError("torus kernel: n must be 1 or 2");
    if (L < 4 || L % 2 != 0) throw ValidationError("torus kernel: L must be even and >= 4");
    const std::size_t M = static_cast<std::size_t>(M_);
    std::vector<double> d(M);
    for (std::size_t j = 0; j < M; ++j) d[j] = detail::one_minus_cos(2.0 * std::numbers::pi * static_cast<double>(j) / L);
    q_.assign(n == 1 ? M : M * M, 0.0);
    if (n == 1)
      for (std::size_t j = 0; j < M; ++j) q_[j] = std::exp(-t * sym(d[j]));
    else
      for (std::size_t a = 0; a < M; ++a)
        for (std::size_t b = 0; b < M; ++b) q_[a * M + b] = std::exp(-t * sym(0.5 * (d[a] + d[b])));
    fftw_plan plan;
    {
      std::lock_guard<std::mutex> lock(detail::fftw_mutex());
      plan = n == 1 ? fftw_plan_r2r_1d(M_, q_.data(), q_.data(), FFTW_REDFT00, FFTW_ESTIMATE)
                    : fftw_plan_r2r_2d(M_, M_, q_.data(), q_.data(), FFTW_REDFT00, FFTW_REDFT00, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
      std::lock_guard<std::mutex> lock(detail::fftw_mutex());
      fftw_destroy_plan(plan);
    }
    const double scale = std::pow(static_cast<double>(L), -n);
    for (double& x : q_) x *= scale;
  }

  int dim() const { return n_; }
  int side() const { return L_; }
  double at(const Offset& x) const {
    std::size_t idx = 0;
    for (int i = 0; i < n_; ++i) idx = idx * static_cast<std::size_t>(M_) + fold(x[static_cast<std::size_t>(i)]);
    return q_[idx];
  }
  //! \brief sum_x |p(x) - p(x - e_1)| over the torus (every axis gives the same value).
  double gradient_l1() const {
    const std::size_t M = static_cast<std::size_t>(M_);
    auto row = [&](std::size_t off, std::size_t stride) {
      double s = 0.0;
      for (std::size_t x = 1; x < M; ++x) s += std::abs(q_[off + x * stride] - q_[off + (x - 1) * stride]);
      return 2.0 * s;
    };
    if (n_ == 1) return row(0, 1);
    double g = 0.0;
    for (std::size_t b = 0; b < M; ++b) g += (b == 0 || b == M - 1 ? 1.0 : 2.0) * row(b, M);
    return g;
  }

 private:
  std::size_t fold(int x) const {
    int r = ((x % L_) + L_) % L_;
    return static_cast<std::size_t>(std::min(r, L_ - r));
  }
  int n_, L_, M_;
  std::vector<double> q_;
};

//! \brief max_{|e|=1} sum_x |p(x) - p(x - e)| on a window (zero outside).
inline double gradient_l1(const LatticeWindow& p) {
  double g = 0.0;
  for (int a = 0; a < p.dim(); ++a) {
    double s = 0.0;
    LatticeWindow grown(p.dim(), p.radius() + 1);
    for (std::size_t i = 0; i < grown.size(); ++i) {
      Offset x = grown.offset(i);
      const double v = p.at(x);
      x[static_cast<std::size_t>(a)] -= 1;
      s += std::abs(v - p.at(x));
    }
    g = std::max(g, s);
  }
  return g;
}

struct DecayFit {
  int n = 1;
  double alpha = 1.0;
  std::vector<double> t, diagonal, gradient;
  SlopeFit diagonal_fit, gradient_fit;
  int torus_side = 0;
  json to_json() const {
    return json{{"n", n},
                {"alpha", alpha},
                {"torus_side", torus_side},
                {"diagonal_fit", diagonal_fit.to_json()},
                {"expected_diagonal_slope", -n / alpha},
                {"gradient_fit", gradient_fit.to_json()},
                {"expected_gradient_slope", -1.0 / alpha}};
  }
};

//! \brief Diagonal and gradient decay of the untruncated semigroup over a t grid. The gradient is taken
//! on a torus of side L; wrapping adds kernels with opposite-signed differences, so it can only lower g.
inline DecayFit decay_exponents(int n, double alpha, const std::vector<double>& t_grid, int L) {
  DecayFit out;
  out.n = n;
  out.alpha = alpha;
  out.t = t_grid;
  out.torus_side = L;
  const Symbol sym = stable_symbol(alpha);
  for (double t : t_grid) {
    out.diagonal.push_back(heat_diagonal(n, sym, t));
    out.gradient.push_back(TorusKernel(n, sym, t, L).gradient_l1());
  }
  out.diagonal_fit = slope_fit(t_grid, out.diagonal, t_grid.front(), t_grid.back());
  out.gradient_fit = slope_fit(t_grid, out.gradient, t_grid.front(), t_grid.back());
  return out;
}

// ---------------------------------------------------------------------------
// Truncated stable kernels

//! \brief h(s) = s^{alpha/2} v s.
inline std::function<double(double)> default_h(double alpha) {
  return [alpha](double s) { return std::max(std::pow(s, alpha / 2.0), s); };
}

struct TruncatedRate {
  double n = 2.0, alpha = 1.0, c1 = 1.0, c2 = 1.0;
  RateFunction beta;                      // c2 (r^{-n/alpha} v r^{-n/2})
  std::function<double(double)> h;
  //! \brief theta(t) = 2 c1 / h(t^{1/alpha} ^ t^{1/2}).
  double theta(double t) const { return 2.0 * c1 / h(std::min(std::pow(t, 1.0 / alpha), std::sqrt(t))); }
};

inline TruncatedRate truncated_kernel_rate(double n, double alpha, double c1 = 1.0, double c2 = 1.0,
                                           std::function<double(double)> h = {}) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw ValidationError("truncated_kernel_rate: alpha must lie in (0,2)");
  if (!(n >= 1.0)) throw ValidationError("truncated_kernel_rate: n must be >= 1");
  TruncatedRate out{n, alpha, c1, c2, rates::vee(c2, n / alpha, n / 2.0), h ? std::move(h) : default_h(alpha)};
  return out;
}

//! \brief Phi~_h(s) = int_0^s dr int_0^{r^{-alpha/n} v r^{-2/n}} dt / h(t^{1/alpha} ^ t^{1/2}).
inline double phi_tilde_h(const TruncatedRate& tr, double s) {
  if (!(s > 0.0)) return 0.0;
  const double n = tr.n, a = tr.alpha;
  auto inner = [&](double T) {
    auto g = [&](double t) { return 1.0 / tr.h(std::min(std::pow(t, 1.0 / a), std::sqrt(t))); };
    double v = integrate_log(g, 1e-40 * std::min(T, 1.0), std::min(T, 1.0), 1e-11).value;
    if (T > 1.0) v += integrate_log(g, 1.0, T, 1e-11).value;
    return v;
  };
  auto outer = [&](double r) { return inner(std::max(std::pow(r, -a / n), std::pow(r, -2.0 / n))); };
  double v = integrate_log(outer, 1e-40 * std::min(s, 1.0), std::min(s, 1.0), 1e-10).value;
  if (s > 1.0) v += integrate_log(outer, 1.0, s, 1e-10).value;
  return v;
}

//! \brief Symbol lambda(theta) = sum_{0<|y|<=rho} |y|^{-(1+alpha)} (1 - cos y theta) of the 1-D kernel
//! truncated at lattice distance rho. Memoized: adaptive rules revisit the same nodes across r.
class TruncatedLattice {
 public:
  TruncatedLattice(double alpha, int rho) : alpha_(alpha), rho_(rho) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw ValidationError("truncated lattice: alpha must lie in (0,2)");
    if (rho < 1) throw ValidationError("truncated lattice: rho must be >= 1");
    w_.resize(static_cast<std::size_t>(rho));
    for (int y = 1; y <= rho; ++y) w_[static_cast<std::size_t>(y - 1)] = 4.0 * std::pow(y, -(1.0 + alpha));
  }
  double alpha() const { return alpha_; }
  int rho() const { return rho_; }
  //! \brief Crossover scale rho^alpha.
  double r0() const { return std::pow(static_cast<double>(rho_), alpha_); }
  double jump(int y) const { return y != 0 && std::abs(y) <= rho_ ? std::pow(std::abs(y), -(1.0 + alpha_)) : 0.0; }

  double symbol(double th) const {
    std::uint64_t key;
    std::memcpy(&key, &th, sizeof key);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    double s = 0.0;
    for (int y = 1; y <= rho_; ++y) {
      const double v = std::sin(0.5 * y * th);
      s += w_[static_cast<std::size_t>(y - 1)] * v * v;
    }
    memo_.emplace(key, s);
    return s;
  }
  //! \brief beta(r) <= (1/pi) int_0^pi (1 - r lambda)^+: |f^|^2 <= ||f||_1^2 under Parseval.
  double upper(double r) const {
    return detail::integrate_dyadic([&](double th) { return std::max(0.0, 1.0 - r * symbol(th)); }, std::numbers::pi, 60,
                                    1e-9) /
           std::numbers::pi;
  }
  //! \brief h(u) = p_u(0,0) and h'(u).
  std::pair<double, double> heat(double u) const {
    const double pi = std::numbers::pi;
    const double h = detail::integrate_dyadic([&](double th) { return std::exp(-u * symbol(th)); }, pi, 60, 1e-10) / pi;
    const double dh =
        -detail::integrate_dyadic([&](double th) { const double l = symbol(th); return l * std::exp(-u * l); }, pi, 60,
                                  1e-10) /
        pi;
    return {h, dh};
  }

 private:
  double alpha_;
  int rho_;
  std::vector<double> w_;
  mutable std::unordered_map<std::uint64_t, double> memo_;
};

struct Crossover {
  double alpha = 1.0;
  int rho = 1;
  std::vector<double> r, upper, lower;
  SlopeFit small_fit, large_fit;
  double c2 = 0.0;  // min c with U(r) <= min(1, c B(r)) on the grid, B = (r/r0)^{-1/alpha} v (r/r0)^{-1/2}
  json to_json() const {
    return json{{"alpha", alpha},
                {"rho", rho},
                {"small_fit", small_fit.to_json()},
                {"expected_small_slope", -1.0 / alpha},
                {"large_fit", large_fit.to_json()},
                {"expected_large_slope", -0.5},
                {"c2", num(c2)}};
  }
};

//! \brief Two-sided rate on Z for the truncated kernel: U(r) above and sup_u h(u) + r h'(u) below
//! (f = P_{u/2} delta_0). Fits on U: r in [3, r0/10] and [10 r0, 1e4 r0].
inline Crossover truncated_crossover(const TruncatedLattice& tl, const std::vector<double>& r_grid,
                                     const std::vector<double>& u_grid) {
  Crossover out;
  out.alpha = tl.alpha();
  out.rho = tl.rho();
  out.r = r_grid;
  std::vector<std::pair<double, double>> hs;
  for (double u : u_grid) hs.push_back(tl.heat(u));
  const double r0 = tl.r0();
  for (double r : r_grid) {
    out.upper.push_back(tl.upper(r));
    double lo = 0.0;
    for (const auto& [h, dh] : hs) lo = std::max(lo, h + r * dh);
    out.lower.push_back(lo);
    const double B = std::max(std::pow(r / r0, -1.0 / tl.alpha()), std::pow(r / r0, -0.5));
    out.c2 = std::max(out.c2, out.upper.back() / B);
  }
  // A window too narrow for the grid leaves that fit empty (points = 0, slope nan).
  auto fit = [&](double lo, double hi) {
    try {
      return slope_fit(r_grid, out.upper, lo, hi);
    } catch (const std::invalid_argument&) {
      return SlopeFit{std::nan(""), lo, hi, 0};
    }
  };
  out.small_fit = fit(3.0, r0 / 10.0);
  out.large_fit = fit(10.0 * r0, 1e4 * r0);
  return out;
}

//! \brief c2 min(1, (r/r0)^{-1/alpha} v (r/r0)^{-1/2}) with c2 >= 1 the fitted constant.
inline RateFunction fitted_bwt(const Crossover& c) {
  const double r0 = std::pow(static_cast<double>(c.rho), c.alpha), a = c.alpha, c2 = std::max(1.0, c.c2);
  RateFunction b = rates::custom("bwt_lattice", [=](double r) {
    if (std::isinf(r)) return 0.0;
    return std::min(1.0, c2 * std::max(std::pow(r / r0, -1.0 / a), std::pow(r / r0, -0.5)));
  });
  return b;
}

//! \brief Sites {-m..m} of Z with the truncated kernel and the killing V(x) = sum_{y outside} j(x,y),
//! so that E(f,f) is the Z-energy of f extended by zero.
inline Model killed_window(const TruncatedLattice& tl, int m) {
  const int sz = 2 * m + 1;
  FiniteMeasureSpace s(Vec::Ones(sz));
  Mat j = Mat::Zero(sz, sz);
  Vec v = Vec::Zero(sz);
  for (int a = 0; a < sz; ++a) {
    for (int b = 0; b < sz; ++b)
      if (a != b) j(a, b) = tl.jump(a - b);
    for (int y = -tl.rho(); y <= tl.rho(); ++y) {
      const int z = a + y;
      if (z < 0 || z >= sz) v[a] += tl.jump(y);
    }
  }
  return Model(s, JumpKernel(s, j), std::nullopt, KillingPotential{v, Vec::Ones(sz)});
}

// ---------------------------------------------------------------------------
// Continuum radial quantities for f_s(x) = (s - |x|)^+

inline double unit_ball_volume(int n) { return std::pow(std::numbers::pi, n / 2.0) / std::tgamma(n / 2.0 + 1.0); }

enum class KernelMode { min_kernel, max_kernel, truncated };

inline KernelMode kernel_mode(const std::string& s) {
  if (s == "min_kernel") return KernelMode::min_kernel;
  if (s == "max_kernel") return KernelMode::max_kernel;
  if (s == "truncated") return KernelMode::truncated;
  throw ValidationError("unknown kernel mode '" + s + "'");
}

namespace detail {

// int_A^B x^p dx, 0 <= A <= B.
inline double power_integral(double p, double A, double B) {
  if (!(B > A)) return 0.0;
  if (p == -1.0) return std::log(B / A);
  return (std::pow(B, p + 1.0) - std::pow(A, p + 1.0)) / (p + 1.0);
}

}  // namespace detail

//! \brief 2 int_{B(0,s)} dx int (s ^ |x-y|) k(|x-y|) dy with k(r) = 1/(r^{n+a1} v r^{n+a2}) (min_kernel),
//! 1/(r^{n+a1} ^ r^{n+a2}) (max_kernel) or 1_{r<=1} r^{-(n+a1)} (truncated), a_i = alpha_i/2. The
//! inner integral does not depend on x, so the value is 2 |B_s| |S^{n-1}| int_0^inf (s ^ r) k(r) r^{n-1} dr,
//! integrated exactly piece by piece.
inline double radial_l1_energy(int n, double alpha1, double alpha2, KernelMode mode, double s) {
  const double a1 = alpha1 / 2.0, a2 = alpha2 / 2.0;
  for (double a : {a1, mode == KernelMode::truncated ? a1 : a2})
    if (!(a > 0.0 && a < 1.0)) throw ValidationError("radial_l1_energy: kernel not integrable (need 0 < alpha < 2)");
  if (n < 1) throw ValidationError("radial_l1_energy: n must be >= 1");
  if (!(s > 0.0)) return 0.0;
  const double lo = std::min(a1, a2), hi = std::max(a1, a2);
  // Exponent e of k(r) r^{n-1} = r^{-1-e} on (0,1) and (1,inf); e = inf marks a zero kernel.
  double e_small, e_large;
  switch (mode) {
    case KernelMode::min_kernel:
      e_small = lo;
      e_large = hi;
      break;
    case KernelMode::max_kernel:
      e_small = hi;
      e_large = lo;
      break;
    default:
      e_small = a1;
      e_large = kInf;
  }
  double I = 0.0;
  auto piece = [&](double A, double B, double e) {
    if (std::isinf(e) || !(B > A)) return;
    const double m = std::min(std::max(s, A), B);  // (s ^ r) = r on (A,m), s on (m,B)
    I += detail::power_integral(-e, A, m);
    if (std::isinf(B))
      I += s * std::pow(m, -e) / e;
    else
      I += s * detail::power_integral(-1.0 - e, m, B);
  };
  piece(0.0, 1.0, e_small);
  piece(1.0, kInf, e_large);
  const double sphere = n * unit_ball_volume(n);
  return 2.0 * unit_ball_volume(n) * std::pow(s, n) * sphere * I;
}

//! \brief int_{R^n} N(f_s(x)/r) dx = |S^{n-1}| int_0^s N((s - rho)/r) rho^{n-1} drho.
inline double fs_modular(int n, const YoungFunction& N, double s, double r) {
  const double sphere = n * unit_ball_volume(n);
  auto g = [&](double rho) { return N((s - rho) / r) * std::pow(rho, n - 1); };
  const QuadResult q = integrate(g, 0.0, s, 1e-11, 0.0);
  if (!std::isfinite(q.value)) throw std::runtime_error("fs_modular: quadrature failure");
  return sphere * q.value;
}

//! \brief ||f_s||_N (Luxemburg).
inline double radial_orlicz_fs(int n, const YoungFunction& N, double s) {
  if (!(s > 0.0)) return 0.0;
  return orlicz_gauge([&](double r) { return fs_modular(n, N, s, r); }, s, 1e-12).as_double();
}

struct NmScan {
  std::vector<double> s, value;
  double sup = 0.0;
  SlopeFit low_end, high_end;
  bool bounded = false;
  json to_json() const {
    return json{{"sup", num(sup)}, {"low_end", low_end.to_json()}, {"high_end", high_end.to_json()}, {"bounded", bounded}};
  }
};

//! \brief s^n N(c (s^{e1} v s^{e2})) over the grid, e_i = alpha_i/2 - n. Bounded means neither end
//! trends upwards: slope >= -slope_tol over the lowest decade, <= slope_tol over the highest.
inline NmScan nm_scan(int n, const YoungFunction& N, double alpha1, double alpha2, double c,
                      const std::vector<double>& s_grid, double slope_tol = 0.02) {
  NmScan out;
  out.s = s_grid;
  const double e1 = alpha1 / 2.0 - n, e2 = alpha2 / 2.0 - n;
  for (double s : s_grid) {
    const double v = std::pow(s, n) * N(c * std::max(std::pow(s, e1), std::pow(s, e2)));
    out.value.push_back(v);
    out.sup = std::max(out.sup, v);
  }
  const double a = s_grid.front(), b = s_grid.back();
  out.low_end = slope_fit(s_grid, out.value, a, a * 10.0);
  out.high_end = slope_fit(s_grid, out.value, b / 10.0, b);
  out.bounded = out.low_end.slope >= -slope_tol && out.high_end.slope <= slope_tol;
  return out;
}

}  // namespace lattice
}  // namespace jumpiso

#endif
