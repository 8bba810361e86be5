#ifndef JUMPISO_ISOPERIMETRY_HPP
#define JUMPISO_ISOPERIMETRY_HPP

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "generate.hpp"
#include "measure_core.hpp"
#include "report.hpp"
#include "young.hpp"

namespace jumpiso {

inline constexpr int kMaxEnumerate = 24;

inline std::string mask_hex(std::uint64_t mask) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(mask));
  return buf;
}

//! \brief Edge weights W_ik = gamma_ik j_ik mu_i mu_k, zero diagonal.
inline Mat flow_weights(const FiniteMeasureSpace& s, const JumpKernel& k, const WeightFunction& w) {
  const int m = s.size();
  Mat W = Mat::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int l = 0; l < m; ++l)
      if (i != l) W(i, l) = w.gamma(i, l) * k(i, l) * s.mu(i) * s.mu(l);
  return W;
}

namespace detail {

inline std::uint64_t gray(std::uint64_t i) { return i ^ (i >> 1); }

//! \brief Visits gray(i) for i in [lo, hi) with incremental mass/flow; fn(mask, mass, flow).
//! Flow is recomputed exactly every 1024 steps to bound drift.
template <class Fn>
void enumerate_range(const Mat& W, const Vec& mu, std::uint64_t lo, std::uint64_t hi, Fn&& fn) {
  const int m = static_cast<int>(mu.size());
  const Vec rows = W.rowwise().sum();
  Vec inA(m);
  std::uint64_t mask = 0;
  double mass = 0.0, fl = 0.0;
  auto exact = [&](std::uint64_t a) {
    mask = a;
    inA.setZero();
    mass = 0.0;
    for (int x = 0; x < m; ++x)
      if (a >> x & 1U) {
        inA += W.col(x);
        mass += mu[x];
      }
    fl = 0.0;
    for (int x = 0; x < m; ++x)
      if (a >> x & 1U) fl += rows[x] - inA[x];
  };
  for (std::uint64_t i = lo; i < hi; ++i) {
    const std::uint64_t g = gray(i);
    if (i == lo || (i & 1023U) == 0) {
      exact(g);
    } else {
      const std::uint64_t diff = g ^ mask;
      const int x = __builtin_ctzll(diff);
      if (g >> x & 1U) {
        fl += rows[x] - 2.0 * inA[x];
        inA += W.col(x);
      } else {
        fl -= rows[x] - 2.0 * inA[x];
        inA -= W.col(x);
      }
      mask = g;
      if (fl < 0.0) fl = 0.0;
      mass = 0.0;  // summed in index order so strict mass comparisons match mass(mask)
      for (std::uint64_t b = g; b; b &= b - 1) mass += mu[__builtin_ctzll(b)];
    }
    fn(mask, mass, fl);
  }
}

//! \brief Splits [1, 2^m) into `jobs` contiguous ranges and runs body(lo, hi, slot).
template <class Body>
void parallel_ranges(int m, int jobs, Body&& body) {
  const std::uint64_t total = std::uint64_t{1} << m;
  jobs = std::max(1, std::min(jobs, 64));
  if (jobs == 1 || total < 4096) {
    body(std::uint64_t{1}, total, 0);
    return;
  }
  std::vector<std::thread> pool;
  const std::uint64_t chunk = (total - 1) / static_cast<std::uint64_t>(jobs) + 1;
  for (int t = 0; t < jobs; ++t) {
    const std::uint64_t lo = 1 + chunk * static_cast<std::uint64_t>(t);
    const std::uint64_t hi = std::min(total, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi, t] { body(lo, hi, t); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

struct ProfileEntry {
  double mass = 0.0;
  double flow = 0.0;
  std::uint64_t mask = 0;
  double ratio() const { return flow / mass; }
};

//! \brief Lower staircase of flow/mass against mass. A point is dropped when another has
//! mass <= and ratio <, or equal ratio with a smaller bitmask.
class ParetoFrontier {
 public:
  void insert(const ProfileEntry& e) {
    const double r = e.ratio();
    auto it = pts_.upper_bound(e.mass);
    if (it != pts_.begin()) {
      const auto& prev = std::prev(it)->second;
      if (better_or_equal(prev.ratio(), prev.mask, r, e.mask)) return;
    }
    // Same mass key: replace (the check above already established e is better).
    pts_.erase(e.mass);
    it = pts_.upper_bound(e.mass);
    while (it != pts_.end() && better_or_equal(r, e.mask, it->second.ratio(), it->second.mask)) it = pts_.erase(it);
    pts_.emplace(e.mass, e);
  }
  void merge(const ParetoFrontier& o) {
    for (const auto& [k, v] : o.pts_) insert(v);
  }
  //! \brief Minimizer among entries with mass < s, or nullptr.
  const ProfileEntry* best_below(double s) const {
    auto it = pts_.lower_bound(s);
    if (it == pts_.begin()) return nullptr;
    return &std::prev(it)->second;
  }
  std::vector<ProfileEntry> points() const {
    std::vector<ProfileEntry> v;
    for (const auto& [k, e] : pts_) v.push_back(e);
    return v;
  }
  std::size_t size() const { return pts_.size(); }

 private:
  static bool better_or_equal(double ra, std::uint64_t ma, double rb, std::uint64_t mb) {
    return ra < rb || (ra == rb && ma <= mb);
  }
  std::map<double, ProfileEntry> pts_;
};

//! \brief Isoperimetric profile of a finite space. Entries cover nonempty proper subsets;
//! the whole space (zero flow) enters only the full constant kappa().
class IsoperimetricProfile {
 public:
  int m = 0;
  bool exact = true;
  double total_mass = 0.0;
  std::vector<ProfileEntry> entries;  // kept when requested (m <= 20)
  ParetoFrontier frontier;
  std::string method = "enumeration";

  //! \brief kappa_gamma(s) = inf{flow/mass : mu(A) in (0, s)} over all A including the whole space.
  double kappa(double s) const {
    const double p = kappa_proper(s);
    return s > total_mass ? 0.0 : p;
  }
  //! \brief Same infimum over nonempty proper subsets only.
  double kappa_proper(double s) const {
    const ProfileEntry* e = frontier.best_below(s);
    return e ? e->ratio() : kInf;
  }
  //! \brief inf over all nonempty proper subsets.
  double kappa_min() const { return kappa_proper(kInf); }
  const ProfileEntry* argmin(double s) const { return frontier.best_below(s); }

  std::string csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "mass,flow,subset\n";
    for (const auto& e : entries.empty() ? frontier.points() : entries)
      os << e.mass << ',' << e.flow << ',' << mask_hex(e.mask) << '\n';
    return os.str();
  }
  json to_json() const {
    json pts = json::array();
    for (const auto& e : frontier.points())
      pts.push_back({{"mass", num(e.mass)}, {"ratio", num(e.ratio())}, {"subset", mask_hex(e.mask)}});
    return json{{"m", m},
                {"exact", exact},
                {"method", method},
                {"total_mass", num(total_mass)},
                {"convention", "mass strictly below s; whole space counted only in kappa"},
                {"frontier", pts}};
  }
};

//! \brief Exact profile by Gray-code enumeration of all 2^m - 2 proper subsets.
inline IsoperimetricProfile enumerate_profile(const FiniteMeasureSpace& s, const JumpKernel& k,
                                              const WeightFunction& w, bool keep_entries = false, int jobs = 1) {
  const int m = s.size();
  if (m > kMaxEnumerate)
    throw std::invalid_argument("enumerate_profile: m = " + std::to_string(m) + " exceeds 24; use sampled_profile");
  const Mat W = flow_weights(s, k, w);
  const std::uint64_t full = (std::uint64_t{1} << m) - 1;
  IsoperimetricProfile P;
  P.m = m;
  P.total_mass = s.total_mass();
  keep_entries = keep_entries && m <= 20;
  std::vector<ParetoFrontier> fronts(64);
  std::vector<std::vector<ProfileEntry>> lists(64);
  detail::parallel_ranges(m, jobs, [&](std::uint64_t lo, std::uint64_t hi, int slot) {
    detail::enumerate_range(W, s.mu(), lo, hi, [&](std::uint64_t a, double mass, double fl) {
      if (a == full) return;
      const ProfileEntry e{mass, fl, a};
      fronts[slot].insert(e);
      if (keep_entries) lists[slot].push_back(e);
    });
  });
  for (int t = 0; t < 64; ++t) {
    P.frontier.merge(fronts[t]);
    P.entries.insert(P.entries.end(), lists[t].begin(), lists[t].end());
  }
  std::sort(P.entries.begin(), P.entries.end(), [](const auto& a, const auto& b) { return a.mask < b.mask; });
  return P;
}

inline IsoperimetricProfile enumerate_profile(const Model& md, bool keep_entries = false, int jobs = 1) {
  return enumerate_profile(md.space, md.kernel, md.gamma, keep_entries, jobs);
}

//! \brief Upper envelope of the profile from singletons, `budget` random subsets and a greedy
//! single-toggle descent on flow/mass from each of them. Every visited subset is recorded.
inline IsoperimetricProfile sampled_profile(const FiniteMeasureSpace& s, const JumpKernel& k, const WeightFunction& w,
                                            int budget, std::uint64_t seed = 1) {
  const int m = s.size();
  if (m > 63) throw std::invalid_argument("sampled_profile: m must be <= 63");
  const Mat W = flow_weights(s, k, w);
  const std::uint64_t full = m == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << m) - 1;
  IsoperimetricProfile P;
  P.m = m;
  P.exact = false;
  P.method = "sampled";
  P.total_mass = s.total_mass();
  auto eval = [&](std::uint64_t a) {
    double mass = 0.0, fl = 0.0;
    for (int x = 0; x < m; ++x) {
      if (!(a >> x & 1U)) continue;
      mass += s.mu(x);
      for (int y = 0; y < m; ++y)
        if (!(a >> y & 1U)) fl += W(x, y);
    }
    return ProfileEntry{mass, fl, a};
  };
  auto record = [&](const ProfileEntry& e) {
    P.frontier.insert(e);
    P.entries.push_back(e);
  };
  auto descend = [&](std::uint64_t a) {
    ProfileEntry cur = eval(a);
    record(cur);
    for (int it = 0; it < 4 * m; ++it) {
      ProfileEntry best = cur;
      for (int x = 0; x < m; ++x) {
        const std::uint64_t b = a ^ (std::uint64_t{1} << x);
        if (b == 0 || b == full) continue;
        const ProfileEntry e = eval(b);
        record(e);
        if (e.ratio() < best.ratio()) best = e;
      }
      if (best.mask == cur.mask) break;
      cur = best;
      a = best.mask;
    }
  };
  if (m >= 2)
    for (int x = 0; x < m; ++x) record(eval(std::uint64_t{1} << x));
  Rng rng(seed);
  for (int b = 0; b < budget && m >= 2; ++b) {
    std::uint64_t a = 0;
    const double p = rng.uniform(0.05, 0.95);
    for (int x = 0; x < m; ++x)
      if (rng.uniform() < p) a |= std::uint64_t{1} << x;
    if (a == 0 || a == full) a = std::uint64_t{1} << rng.below(static_cast<std::uint64_t>(m));
    descend(a);
  }
  std::sort(P.entries.begin(), P.entries.end(), [](const auto& x, const auto& y) { return x.mask < y.mask; });
  P.entries.erase(std::unique(P.entries.begin(), P.entries.end(),
                              [](const auto& x, const auto& y) { return x.mask == y.mask; }),
                  P.entries.end());
  return P;
}

struct OrliczKappa {
  double value = kInf;
  std::uint64_t mask = 0;
};

//! \brief inf over nonempty proper A of N^{-1}(1/mu(A)) J_gamma(A x A^c).
inline OrliczKappa kappa_orlicz_detail(const FiniteMeasureSpace& s, const JumpKernel& k, const YoungFunction& N,
                                       const WeightFunction& w, int jobs = 1) {
  const int m = s.size();
  if (m > kMaxEnumerate) throw std::invalid_argument("kappa_orlicz: m exceeds 24");
  const Mat W = flow_weights(s, k, w);
  const std::uint64_t full = (std::uint64_t{1} << m) - 1;
  std::vector<OrliczKappa> best(64);
  detail::parallel_ranges(m, jobs, [&](std::uint64_t lo, std::uint64_t hi, int slot) {
    detail::enumerate_range(W, s.mu(), lo, hi, [&](std::uint64_t a, double mass, double fl) {
      if (a == full) return;
      const double v = N.inverse(1.0 / mass) * fl;
      auto& b = best[slot];
      if (v < b.value || (v == b.value && a < b.mask)) b = {v, a};
    });
  });
  OrliczKappa out;
  for (const auto& b : best)
    if (b.mask != 0 && (b.value < out.value || (b.value == out.value && b.mask < out.mask))) out = b;
  return out;
}

inline double kappa_orlicz(const FiniteMeasureSpace& s, const JumpKernel& k, const YoungFunction& N,
                           const WeightFunction* w = nullptr) {
  const WeightFunction ones = WeightFunction::ones(s.size());
  return kappa_orlicz_detail(s, k, N, w ? *w : ones).value;
}

//! \brief Smallest C with ||f||_N <= C l1_form(f) on the family (inf when some f has zero form
//! and positive norm).
inline double empirical_los_constant(const FiniteMeasureSpace& s, const JumpKernel& k, const YoungFunction& N,
                                     const std::vector<Vec>& family, const WeightFunction* w = nullptr) {
  const WeightFunction ones = WeightFunction::ones(s.size());
  const WeightFunction& g = w ? *w : ones;
  double C = 0.0;
  for (const auto& f : family) {
    const double a = orlicz_norm(s, N, f).as_double();
    const double b = l1_form(s, k, g, f);
    if (a == 0.0) continue;
    C = std::max(C, b > 0.0 ? a / b : kInf);
  }
  return C;
}

//! \brief Forward direction: (LOS) with constant C implies kappa_orlicz >= 1/(2C).
inline Report thm20_forward(const FiniteMeasureSpace& s, const JumpKernel& k, const YoungFunction& N, double C,
                            const std::vector<Vec>& family, double tol = 1e-9) {
  if (!(C > 0.0)) throw std::invalid_argument("thm20_forward: C must be positive (degenerate family)");
  Report r{"thm20_forward", tol};
  const OrliczKappa kap = kappa_orlicz_detail(s, k, N, WeightFunction::ones(s.size()));
  const double c_emp = empirical_los_constant(s, k, N, family);
  r.info = {{"N", N.tag()},           {"C", num(C)},
            {"C_family", num(c_emp)}, {"kappa_orlicz", num(kap.value)},
            {"minimizer", mask_hex(kap.mask)}};
  if (c_emp > C * (1 + tol)) r.notes.push_back("premise fails: the family needs a larger constant than C");
  r.add(Check::leq("1/(2C) <= kappa_orlicz", 1.0 / (2.0 * C), kap.value, {{"subset", mask_hex(kap.mask)}}));
  return r;
}

//! \brief Converse: ||f||_N <= l1_form(f) / (2 c_N kappa) for every f that vanishes somewhere.
//! A function without zeros has the whole space as a level set, which carries no flow.
inline Report thm20_backward(const FiniteMeasureSpace& s, const JumpKernel& k, const YoungFunction& N,
                             const std::vector<Vec>& family, double tol = 1e-9, double cN = -1.0) {
  Report r{"thm20_backward", tol};
  if (cN < 0.0) cN = c_N(N);
  const double kap = kappa_orlicz(s, k, N);
  if (!(cN > 0.0)) throw std::invalid_argument("thm20_backward: c_N = 0");
  if (!(kap > 0.0)) throw std::invalid_argument("thm20_backward: kappa_orlicz = 0");
  const double C = 1.0 / (2.0 * cN * kap);
  const WeightFunction ones = WeightFunction::ones(s.size());
  int skipped = 0;
  for (std::size_t i = 0; i < family.size(); ++i) {
    const Vec& f = family[i];
    if (f.cwiseAbs().minCoeff() > 0.0) {
      ++skipped;
      continue;
    }
    r.add(Check::leq("||f||_N <= C l1(f)", orlicz_norm(s, N, f).as_double(), C * l1_form(s, k, ones, f),
                     {{"index", i}}));
  }
  r.info = {{"N", N.tag()}, {"c_N", num(cN)}, {"kappa_orlicz", num(kap)}, {"C", num(C)}, {"skipped_nonvanishing", skipped}};
  return r;
}

//! \brief max_A (mu(A) - 2 C1 J(A x A^c)) / mu(A)^2 over all nonempty A, the whole space included.
inline double pi0prime_constant(const FiniteMeasureSpace& s, const JumpKernel& k, double C1) {
  const int m = s.size();
  if (m > kMaxEnumerate) throw std::invalid_argument("pi0prime_constant: m exceeds 24");
  const Mat W = flow_weights(s, k, WeightFunction::ones(m));
  double best = 0.0;
  detail::enumerate_range(W, s.mu(), 1, std::uint64_t{1} << m, [&](std::uint64_t, double mass, double fl) {
    best = std::max(best, (mass - 2.0 * C1 * fl) / (mass * mass));
  });
  return best;
}

//! \brief Smallest C2 with ||f||^2 <= C1 l1(f^2) + C2 ||f||_1^2 on the family.
inline double empirical_pi0_constant(const FiniteMeasureSpace& s, const JumpKernel& k, double C1,
                                     const std::vector<Vec>& family) {
  const WeightFunction ones = WeightFunction::ones(s.size());
  double C2 = 0.0;
  for (const auto& f : family) {
    const double n1 = s.norm1(f);
    if (n1 == 0.0) continue;
    const Vec f2 = f.cwiseAbs2();
    C2 = std::max(C2, (s.norm2_sq(f) - C1 * l1_form(s, k, ones, f2)) / (n1 * n1));
  }
  return C2;
}

enum class PoincareMode { forward, backward };

//! \brief forward: (PI0) with (C1, C2) gives mu(A) <= 2 C1 J + C2 mu(A)^2 on every subset.
//! backward: (PI0') with (C1, C2tilde) gives (PI0) with 2 C2tilde on the family.
inline Report thm20_poincare(const FiniteMeasureSpace& s, const JumpKernel& k, double C1, double C2, PoincareMode mode,
                             const std::vector<Vec>& family = {}, double tol = 1e-9) {
  const int m = s.size();
  Report r{mode == PoincareMode::forward ? "thm20_poincare_forward" : "thm20_poincare_backward", tol};
  r.info = {{"C1", num(C1)}, {"C2", num(C2)}};
  const WeightFunction ones = WeightFunction::ones(m);
  if (mode == PoincareMode::forward) {
    const Mat W = flow_weights(s, k, ones);
    double worst = kInf;
    Check wc;
    detail::enumerate_range(W, s.mu(), 1, std::uint64_t{1} << m, [&](std::uint64_t a, double mass, double fl) {
      const Check c = Check::leq("mu(A) <= 2 C1 J + C2 mu(A)^2", mass, 2.0 * C1 * fl + C2 * mass * mass,
                                 {{"subset", mask_hex(a)}});
      if (c.slack < -tol) r.add(c);
      if (c.slack < worst) {
        worst = c.slack;
        wc = c;
      }
    });
    if (r.checks.empty() && worst < kInf) r.add(wc);
    return r;
  }
  const double C2b = 2.0 * C2;
  const double need = pi0prime_constant(s, k, C1);
  r.info["C2_required_by_subsets"] = num(need);
  if (need > C2 * (1 + tol)) r.notes.push_back("premise fails: subsets need a larger C2tilde");
  for (std::size_t i = 0; i < family.size(); ++i) {
    const Vec& f = family[i];
    const double n1 = s.norm1(f);
    r.add(Check::leq("||f||^2 <= C1 l1(f^2) + 2 C2 ||f||_1^2", s.norm2_sq(f),
                     C1 * l1_form(s, k, ones, f.cwiseAbs2()) + C2b * n1 * n1, {{"index", i}}));
  }
  return r;
}

//! \brief 2 int_0^inf J_gamma({f > r} x {f <= r}) dr for f >= 0, as an exact sum over levels.
inline double layer_cake_l1(const FiniteMeasureSpace& s, const JumpKernel& k, const WeightFunction& w, const Vec& f) {
  const int m = s.size();
  std::vector<double> lv(f.data(), f.data() + m);
  lv.push_back(0.0);
  std::sort(lv.begin(), lv.end());
  lv.erase(std::unique(lv.begin(), lv.end()), lv.end());
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < lv.size(); ++i) {
    std::uint64_t a = 0;
    for (int x = 0; x < m; ++x)
      if (f[x] > lv[i]) a |= std::uint64_t{1} << x;
    acc += (lv[i + 1] - lv[i]) * flow(s, k, w, a);
  }
  return 2.0 * acc;
}

//! \brief Layer-cake identity for l1_form and the bound l1_form(f) / (2 mu(f)) >= subset infimum.
//! Functions with a zero are compared with the proper-subset infimum, the rest with kappa.
inline Report coarea_check(const FiniteMeasureSpace& s, const JumpKernel& k, const std::vector<Vec>& family,
                           const WeightFunction* w = nullptr, double tol = 1e-9) {
  const int m = s.size();
  if (m > 16) throw std::invalid_argument("coarea_check: m must be <= 16");
  const WeightFunction ones = WeightFunction::ones(m);
  const WeightFunction& g = w ? *w : ones;
  const IsoperimetricProfile P = enumerate_profile(s, k, g);
  Report r{"coarea_check", tol};
  r.info = {{"kappa_proper", num(P.kappa_min())}};
  for (std::size_t i = 0; i < family.size(); ++i) {
    const Vec& f = family[i];
    if (f.minCoeff() < 0.0) throw std::invalid_argument("coarea_check: family must be nonnegative");
    const double direct = l1_form(s, k, g, f);
    const double cake = layer_cake_l1(s, k, g, f);
    Check id = Check::leq("layer cake = l1_form", std::abs(cake - direct), 0.0, {{"index", i}});
    id.slack = -std::abs(cake - direct) / std::max(direct, 1e-300);
    if (direct == 0.0 && cake == 0.0) id.slack = 0.0;
    r.add(id);
    const double mf = s.integral(f);
    if (mf <= 0.0) continue;
    const double kap = f.minCoeff() == 0.0 ? P.kappa_min() : P.kappa(kInf);
    r.add(Check::leq("kappa <= l1(f) / (2 mu(f))", kap, direct / (2.0 * mf), {{"index", i}}));
  }
  return r;
}

}  // namespace jumpiso

#endif
