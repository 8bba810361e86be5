#ifndef JUMPISO_GENERATE_HPP
#define JUMPISO_GENERATE_HPP

#include <cstdint>
#include <numeric>
#include <vector>

#include "measure_core.hpp"
#include "numerics.hpp"

namespace jumpiso {

struct GeneratorOptions {
  double mass_lo = 0.1, mass_hi = 10.0;
  double rate_lo = 0.1, rate_hi = 10.0;
  double edge_prob = 0.3;       // extra edges beyond the spanning tree
  bool random_gamma = false;    // gamma log-uniform in [gamma_lo, gamma_hi] instead of 1
  double gamma_lo = 0.5, gamma_hi = 2.0;
  bool killing = false;         // attach a killing potential
  double kill_prob = 0.5;       // fraction of points with v > 0 (at least one)
  double v_lo = 0.05, v_hi = 2.0;
  double xi_lo = 0.5, xi_hi = 2.0;
};

//! \brief Connected random instance: random spanning tree plus Erdos-Renyi extra edges,
//! log-uniform masses and rates.
inline Model random_model(int m, std::uint64_t seed, const GeneratorOptions& o = {}) {
  Rng rng(seed);
  Vec mu(m);
  for (int i = 0; i < m; ++i) mu[i] = rng.log_uniform(o.mass_lo, o.mass_hi);
  Mat j = Mat::Zero(m, m);
  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = m - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(static_cast<std::uint64_t>(i) + 1)]);
  for (int i = 1; i < m; ++i) {
    const int a = perm[i], b = perm[rng.below(static_cast<std::uint64_t>(i))];
    j(a, b) = j(b, a) = rng.log_uniform(o.rate_lo, o.rate_hi);
  }
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b) {
      const double u = rng.uniform();
      const double w = rng.log_uniform(o.rate_lo, o.rate_hi);
      if (j(a, b) == 0.0 && u < o.edge_prob) j(a, b) = j(b, a) = w;
    }
  FiniteMeasureSpace s(mu);
  JumpKernel k(s, j);
  WeightFunction g = WeightFunction::ones(m);
  if (o.random_gamma)
    for (int a = 0; a < m; ++a)
      for (int b = a + 1; b < m; ++b) g.gamma(a, b) = g.gamma(b, a) = rng.log_uniform(o.gamma_lo, o.gamma_hi);
  std::optional<KillingPotential> pot;
  if (o.killing) {
    KillingPotential p{Vec::Zero(m), Vec::Zero(m)};
    const int forced = static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
    for (int i = 0; i < m; ++i) {
      const double u = rng.uniform();
      if (i == forced || u < o.kill_prob) p.v[i] = rng.log_uniform(o.v_lo, o.v_hi);
      p.xi[i] = rng.log_uniform(o.xi_lo, o.xi_hi);
    }
    pot = p;
  }
  return Model(s, k, g, pot);
}

//! \brief Connected components of the support graph of j (BFS).
inline std::vector<int> components(const Model& md) {
  const int m = md.size();
  std::vector<int> comp(m, -1);
  int c = 0;
  for (int s = 0; s < m; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<int> stack{s};
    comp[s] = c;
    while (!stack.empty()) {
      const int x = stack.back();
      stack.pop_back();
      for (int y = 0; y < m; ++y)
        if (comp[y] < 0 && md.kernel(x, y) > 0.0) {
          comp[y] = c;
          stack.push_back(y);
        }
    }
    ++c;
  }
  return comp;
}

inline bool connected(const Model& md) {
  const auto c = components(md);
  for (int x : c)
    if (x != 0) return false;
  return true;
}

struct FamilyOptions {
  bool nonneg = false;     // |f|
  bool force_zero = false;  // at least one coordinate set to 0
};

//! \brief Random test functions: dense Gaussian, sparse, two-level and heavy-tailed draws.
inline std::vector<Vec> random_functions(int m, int count, std::uint64_t seed, const FamilyOptions& o = {}) {
  Rng rng(seed);
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int c = 0; c < count; ++c) {
    Vec f(m);
    switch (c % 4) {
      case 0:
        for (int i = 0; i < m; ++i) f[i] = rng.normal();
        break;
      case 1:
        for (int i = 0; i < m; ++i) f[i] = rng.uniform() < 0.4 ? rng.uniform(-3, 3) : 0.0;
        break;
      case 2: {
        const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
        for (int i = 0; i < m; ++i) f[i] = rng.uniform() < 0.5 ? a : b;
        break;
      }
      default:
        for (int i = 0; i < m; ++i) f[i] = (rng.uniform() < 0.5 ? -1 : 1) * rng.log_uniform(1e-3, 1e3);
    }
    if (o.nonneg) f = f.cwiseAbs();
    if (o.force_zero) f[static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m)))] = 0.0;
    out.push_back(f);
  }
  return out;
}

//! \brief Random functions supported on sets of mass strictly below max_mass: Gaussian,
//! log-uniform magnitudes and indicators in rotation. Points heavier than max_mass stay at 0.
inline std::vector<Vec> supported_functions(const FiniteMeasureSpace& s, int count, double max_mass,
                                            std::uint64_t seed) {
  Rng rng(seed);
  const int m = s.size();
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int c = 0; c < count; ++c) {
    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = m - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    const int want = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
    Vec f = Vec::Zero(m);
    double mass = 0.0;
    int taken = 0;
    for (int i : perm) {
      if (taken == want) break;
      if (!(mass + s.mu(i) < max_mass)) continue;
      mass += s.mu(i);
      ++taken;
      switch (c % 3) {
        case 0: f[i] = rng.normal(); break;
        case 1: f[i] = (rng.uniform() < 0.5 ? -1 : 1) * rng.log_uniform(1e-2, 1e2); break;
        default: f[i] = 1.0;
      }
    }
    out.push_back(f);
  }
  return out;
}

//! \brief Indicator of a bitmask.
inline Vec indicator(int m, std::uint64_t mask) {
  Vec f = Vec::Zero(m);
  for (int i = 0; i < m; ++i)
    if (mask >> i & 1U) f[i] = 1.0;
  return f;
}

//! \brief Indicators of every nonempty proper subset.
inline std::vector<Vec> proper_indicators(int m) {
  std::vector<Vec> out;
  const std::uint64_t full = (std::uint64_t{1} << m) - 1;
  for (std::uint64_t a = 1; a < full; ++a) out.push_back(indicator(m, a));
  return out;
}

}  // namespace jumpiso

#endif
