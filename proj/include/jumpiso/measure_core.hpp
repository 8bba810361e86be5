#ifndef JUMPISO_MEASURE_CORE_HPP
#define JUMPISO_MEASURE_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "numerics.hpp"

namespace jumpiso {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

//! \brief m atoms with positive masses.
class FiniteMeasureSpace {
 public:
  FiniteMeasureSpace() = default;
  explicit FiniteMeasureSpace(Vec mu) : mu_(std::move(mu)) {
    if (mu_.size() < 1) throw ValidationError("measure space needs at least one point");
    for (Eigen::Index i = 0; i < mu_.size(); ++i)
      if (!(mu_[i] > 0.0) || !std::isfinite(mu_[i]))
        throw ValidationError("mu[" + std::to_string(i) + "] must be positive and finite");
  }
  int size() const { return static_cast<int>(mu_.size()); }
  const Vec& mu() const { return mu_; }
  double mu(int i) const { return mu_[i]; }
  double total_mass() const { return mu_.sum(); }
  double min_mass() const { return mu_.minCoeff(); }
  //! \brief Mass of the subset encoded by a bitmask.
  double mass(std::uint64_t mask) const {
    double s = 0.0;
    for (int i = 0; i < size(); ++i)
      if (mask >> i & 1U) s += mu_[i];
    return s;
  }
  double integral(const Vec& f) const { return mu_.dot(f); }
  double norm1(const Vec& f) const { return mu_.dot(f.cwiseAbs()); }
  double norm2_sq(const Vec& f) const { return mu_.dot(f.cwiseAbs2()); }

 private:
  Vec mu_;
};

//! \brief Symmetric nonnegative density w.r.t. mu x mu with zero diagonal.
class JumpKernel {
 public:
  JumpKernel() = default;
  JumpKernel(const FiniteMeasureSpace& space, Mat j) : j_(std::move(j)) {
    const int m = space.size();
    if (j_.rows() != m || j_.cols() != m) throw ValidationError("kernel must be m x m");
    validate_symmetric(j_, "j", /*strict_offdiag=*/false);
    j_.diagonal().setZero();
  }
  const Mat& j() const { return j_; }
  double operator()(int i, int k) const { return j_(i, k); }
  int size() const { return static_cast<int>(j_.rows()); }

  //! \brief Throws naming the first asymmetric or invalid pair (row-major scan).
  static void validate_symmetric(const Mat& a, const std::string& name, bool strict_offdiag) {
    const Eigen::Index m = a.rows();
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index k = 0; k < m; ++k) {
        const double x = a(i, k);
        std::ostringstream os;
        if (!std::isfinite(x)) {
          os << name << "[" << i << "][" << k << "] is not finite";
          throw ValidationError(os.str());
        }
        if (i == k) {
          continue;
        }
        if (x < 0.0 || (strict_offdiag && !(x > 0.0))) {
          os << name << "[" << i << "][" << k << "] = " << x << (strict_offdiag ? " must be > 0" : " must be >= 0");
          throw ValidationError(os.str());
        }
        if (x != a(k, i)) {
          os << name << " is not symmetric at pair (" << i << "," << k << "): " << x << " vs " << a(k, i);
          throw ValidationError(os.str());
        }
      }
    }
  }

 private:
  Mat j_;
};

//! \brief Symmetric weight gamma, strictly positive off the diagonal.
struct WeightFunction {
  Mat gamma;
  static WeightFunction ones(int m) { return {Mat::Ones(m, m)}; }
  void validate(int m) const {
    if (gamma.rows() != m || gamma.cols() != m) throw ValidationError("gamma must be m x m");
    JumpKernel::validate_symmetric(gamma, "gamma", /*strict_offdiag=*/true);
  }
};

//! \brief Killing rate v and its cemetery weight xi.
struct KillingPotential {
  Vec v;
  Vec xi;
  void validate(int m) const {
    if (v.size() != m || xi.size() != m) throw ValidationError("v and xi must have length m");
    for (int i = 0; i < m; ++i) {
      if (!(v[i] >= 0.0) || !std::isfinite(v[i])) throw ValidationError("v[" + std::to_string(i) + "] must be >= 0");
      if (!(xi[i] >= 0.0) || !std::isfinite(xi[i])) throw ValidationError("xi[" + std::to_string(i) + "] must be >= 0");
    }
  }
  bool active() const { return v.size() > 0 && v.maxCoeff() > 0.0; }
};

//! \brief Transition densities p_t(i,k) w.r.t. mu.
struct SemigroupKernel {
  double t = 0.0;
  Mat p;
};

//! \brief A complete finite model: space, kernel, weight and optional killing.
struct Model {
  FiniteMeasureSpace space;
  JumpKernel kernel;
  WeightFunction gamma;
  std::optional<KillingPotential> potential;

  Model() = default;
  Model(FiniteMeasureSpace s, JumpKernel k, std::optional<WeightFunction> g = std::nullopt,
        std::optional<KillingPotential> p = std::nullopt)
      : space(std::move(s)), kernel(std::move(k)), gamma(g ? *g : WeightFunction::ones(space.size())),
        potential(std::move(p)) {
    if (kernel.size() != space.size()) throw ValidationError("kernel/space size mismatch");
    gamma.validate(space.size());
    if (potential) potential->validate(space.size());
  }
  int size() const { return space.size(); }
};

inline void check_dim(const FiniteMeasureSpace& s, const Vec& f, const char* what) {
  if (f.size() != s.size()) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

//! \brief (1/2) sum (f_i-f_k)(g_i-g_k) j_ik mu_i mu_k.
inline double dirichlet_energy(const FiniteMeasureSpace& s, const JumpKernel& k, const Vec& f, const Vec& g) {
  check_dim(s, f, "dirichlet_energy");
  check_dim(s, g, "dirichlet_energy");
  const int m = s.size();
  double acc = 0.0;
  for (int i = 0; i < m; ++i)
    for (int l = i + 1; l < m; ++l) acc += (f[i] - f[l]) * (g[i] - g[l]) * k(i, l) * s.mu(i) * s.mu(l);
  return acc;  // the half cancels the two orderings
}

//! \brief E_V(f,g) = E(f,g) + sum f g v mu.
inline double killed_energy(const FiniteMeasureSpace& s, const JumpKernel& k, const KillingPotential* pot,
                            const Vec& f, const Vec& g) {
  double e = dirichlet_energy(s, k, f, g);
  if (pot) e += (f.array() * g.array() * pot->v.array() * s.mu().array()).sum();
  return e;
}

//! \brief sum_{i,k} |f_i - f_k| gamma_ik j_ik mu_i mu_k over both orderings.
inline double l1_form(const FiniteMeasureSpace& s, const JumpKernel& k, const WeightFunction& w, const Vec& f) {
  check_dim(s, f, "l1_form");
  const int m = s.size();
  double acc = 0.0;
  for (int i = 0; i < m; ++i)
    for (int l = i + 1; l < m; ++l) acc += std::abs(f[i] - f[l]) * w.gamma(i, l) * k(i, l) * s.mu(i) * s.mu(l);
  return 2.0 * acc;
}

//! \brief J_gamma(A x A^c) for a bitmask A.
inline double flow(const FiniteMeasureSpace& s, const JumpKernel& k, const WeightFunction& w, std::uint64_t mask) {
  const int m = s.size();
  double acc = 0.0;
  for (int i = 0; i < m; ++i) {
    if (!(mask >> i & 1U)) continue;
    for (int l = 0; l < m; ++l)
      if (!(mask >> l & 1U)) acc += w.gamma(i, l) * k(i, l) * s.mu(i) * s.mu(l);
  }
  return acc;
}

//! \brief Generator (Lf)_i = sum_k (f_i - f_k) j_ik mu_k + v_i f_i.
inline Mat generator(const FiniteMeasureSpace& s, const JumpKernel& k, const KillingPotential* pot = nullptr) {
  const int m = s.size();
  Mat L = Mat::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    double d = 0.0;
    for (int l = 0; l < m; ++l) {
      if (l == i) continue;
      L(i, l) = -k(i, l) * s.mu(l);
      d += k(i, l) * s.mu(l);
    }
    L(i, i) = d + (pot ? pot->v[i] : 0.0);
  }
  return L;
}

//! \brief Spectral representation of P_t = exp(-tL), reusable across t.
class Semigroup {
 public:
  Semigroup(const FiniteMeasureSpace& s, const JumpKernel& k, const KillingPotential* pot = nullptr)
      : m_(s.size()), sqrt_mu_(s.mu().cwiseSqrt()) {
    const Mat L = generator(s, k, pot);
    // D^{1/2} L D^{-1/2} is symmetric.
    Mat S = sqrt_mu_.asDiagonal() * L * sqrt_mu_.cwiseInverse().asDiagonal();
    S = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(S);
    if (es.info() != Eigen::Success || !es.eigenvalues().allFinite())
      throw std::runtime_error("semigroup: eigendecomposition failed");
    lambda_ = es.eigenvalues().cwiseMax(0.0);
    // Left/right factors so that P_t = A diag(e^{-t lambda}) B.
    left_ = sqrt_mu_.cwiseInverse().asDiagonal() * es.eigenvectors();
    right_ = es.eigenvectors().transpose() * sqrt_mu_.asDiagonal();
  }

  int size() const { return m_; }
  const Vec& eigenvalues() const { return lambda_; }

  //! \brief Smallest eigenvalue exceeding the numerical zero level (spectral gap), 0 if none.
  double gap(double zero_level = 1e-10) const {
    const double scale = std::max(1.0, lambda_.maxCoeff());
    for (Eigen::Index i = 0; i < lambda_.size(); ++i)
      if (lambda_[i] > zero_level * scale) return lambda_[i];
    return 0.0;
  }
  int zero_modes(double zero_level = 1e-10) const {
    const double scale = std::max(1.0, lambda_.maxCoeff());
    int c = 0;
    for (Eigen::Index i = 0; i < lambda_.size(); ++i)
      if (lambda_[i] <= zero_level * scale) ++c;
    return c;
  }

  //! \brief Operator matrix: (P_t g)_i = sum_k P(i,k) g_k.
  Mat operator_matrix(double t) const {
    if (t < 0.0) throw std::invalid_argument("semigroup: t must be >= 0");
    const Vec e = (-t * lambda_).array().exp();
    return left_ * e.asDiagonal() * right_;
  }

  //! \brief Kernel of transition densities w.r.t. mu.
  SemigroupKernel kernel(double t) const {
    SemigroupKernel K;
    K.t = t;
    const Mat P = operator_matrix(t);
    K.p = P * sqrt_mu_.cwiseAbs2().cwiseInverse().asDiagonal();
    K.p = 0.5 * (K.p + K.p.transpose());
    return K;
  }

  Vec apply(double t, const Vec& g) const { return operator_matrix(t) * g; }

 private:
  int m_;
  Vec sqrt_mu_;
  Vec lambda_;
  Mat left_, right_;
};

inline SemigroupKernel semigroup(const FiniteMeasureSpace& s, const JumpKernel& k, const KillingPotential* pot,
                                 double t) {
  return Semigroup(s, k, pot).kernel(t);
}

//! \brief max_{i != k} sum_z |P(i,z) - P(k,z)| / gamma_ik; extremal g is the sign of the row difference.
inline double theta_from_operator(const Mat& P, const WeightFunction& w) {
  const Eigen::Index m = P.rows();
  double best = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index k = i + 1; k < m; ++k) best = std::max(best, (P.row(i) - P.row(k)).cwiseAbs().sum() / w.gamma(i, k));
  return best;
}

inline double theta_gamma(const Semigroup& sg, const WeightFunction& w, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("theta_gamma: t must be > 0");
  return theta_from_operator(sg.operator_matrix(t), w);
}

//! \brief Killed profile: max of the gamma-ratio and sup_g |P_t g(x)|/xi(x) (= row mass / xi).
//! With v given, points where v vanishes are skipped: they carry no jump to the cemetery.
inline double theta_bar(const Semigroup& sg, const WeightFunction& w, const Vec& xi, double t,
                        const Vec* v = nullptr) {
  if (!(t > 0.0)) throw std::invalid_argument("theta_bar: t must be > 0");
  const Mat P = sg.operator_matrix(t);
  double best = theta_from_operator(P, w);
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    if (v && !((*v)[i] > 0.0)) continue;
    best = std::max(best, ext_ratio(P.row(i).cwiseAbs().sum(), xi[i]));
  }
  return best;
}

//! \brief Memoized Theta(t) = int_0^t theta(s) ds for a fixed profile.
class ThetaIntegral {
 public:
  using Profile = std::function<double(double)>;

  //! \param decay_rate exponential rate bounding theta for large t (0 if theta does not decay)
  ThetaIntegral(Profile theta, double decay_rate, double rel_tol = 1e-8, double abs_tol = 1e-14)
      : theta_(std::move(theta)), rate_(decay_rate), rel_(rel_tol), abs_(abs_tol) {
    cache_[0.0] = 0.0;
  }

  static ThetaIntegral for_model(const Model& m, std::shared_ptr<const Semigroup> sg) {
    auto w = std::make_shared<WeightFunction>(m.gamma);
    const double rate = sg->gap();
    return ThetaIntegral([sg, w](double t) { return theta_gamma(*sg, *w, t); }, rate);
  }

  double theta(double t) const { return theta_(t); }

  //! \brief Theta(t); t may be +inf (integral over (0,inf), infinite without decay).
  double operator()(double t) const {
    if (t < 0.0) throw std::invalid_argument("theta_integral: t must be >= 0");
    if (t == 0.0) return 0.0;
    if (std::isinf(t) || (rate_ > 0.0 && t > 45.0 / rate_)) return at_infinity();
    std::lock_guard<std::mutex> lock(*mu_);
    auto it = cache_.lower_bound(t);
    if (it != cache_.end() && it->first == t) return it->second;
    auto lo = std::prev(it);
    double a = lo->first, base = lo->second;
    const QuadResult q = integrate(theta_, a, t, rel_, abs_);
    if (!q.converged && q.error > 1e-6 * std::max(1.0, std::abs(q.value)))
      throw std::runtime_error("theta_integral: quadrature did not converge");
    double v = base + q.value;
    // Keep the memo monotone against any later neighbour.
    if (it != cache_.end()) v = std::min(v, it->second);
    cache_[t] = v;
    return v;
  }

  double at_infinity() const {
    if (!(rate_ > 0.0)) return kInf;
    const double T = 45.0 / rate_;
    return (*this)(T);
  }

 private:
  Profile theta_;
  double rate_;
  double rel_, abs_;
  mutable std::map<double, double> cache_;
  std::shared_ptr<std::mutex> mu_ = std::make_shared<std::mutex>();
};

inline double theta_integral(const Model& m, double t) {
  auto sg = std::make_shared<const Semigroup>(m.space, m.kernel, m.potential ? &*m.potential : nullptr);
  return ThetaIntegral::for_model(m, sg)(t);
}

//! \brief Appends the cemetery point (mass 1), J(i,D) = v_i, gamma(i,D) = xi_i.
inline Model bar_extension(const Model& m) {
  if (!m.potential) throw std::invalid_argument("bar_extension: potential required");
  const int n = m.size();
  Vec mu(n + 1);
  mu.head(n) = m.space.mu();
  mu[n] = 1.0;
  Mat j = Mat::Zero(n + 1, n + 1), g = Mat::Zero(n + 1, n + 1);
  j.topLeftCorner(n, n) = m.kernel.j();
  g.topLeftCorner(n, n) = m.gamma.gamma;
  for (int i = 0; i < n; ++i) {
    j(i, n) = j(n, i) = m.potential->v[i];
    g(i, n) = g(n, i) = m.potential->xi[i];
  }
  FiniteMeasureSpace s(mu);
  JumpKernel k(s, j);
  Model out;
  out.space = s;
  out.kernel = k;
  out.gamma = WeightFunction{g};  // xi may vanish; gamma positivity is not re-validated here
  return out;
}

//! \brief Extends f by zero at the cemetery.
inline Vec bar_function(const Vec& f) {
  Vec out = Vec::Zero(f.size() + 1);
  out.head(f.size()) = f;
  return out;
}

//! \brief c_gamma = max_i sum_k gamma_ik^2 j_ik mu_k (+ xi_i^2 v_i with killing).
inline double c_gamma(const Model& m, bool include_killing = true) {
  double best = 0.0;
  for (int i = 0; i < m.size(); ++i) {
    double r = 0.0;
    for (int k = 0; k < m.size(); ++k)
      if (k != i) r += m.gamma.gamma(i, k) * m.gamma.gamma(i, k) * m.kernel(i, k) * m.space.mu(k);
    if (include_killing && m.potential) r += m.potential->xi[i] * m.potential->xi[i] * m.potential->v[i];
    best = std::max(best, r);
  }
  return best;
}

}  // namespace jumpiso

#endif
