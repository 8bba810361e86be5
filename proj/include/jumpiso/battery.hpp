#ifndef JUMPISO_BATTERY_HPP
#define JUMPISO_BATTERY_HPP

#include <atomic>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pipeline.hpp"

namespace jumpiso {

struct BatteryOptions {
  double tol = 1e-9;
  int functions = 500;
  std::uint64_t seed = 1;
  std::vector<double> r_grid = log_grid(1e-3, 1e3, 25);
  double inflate = 1.01;
  std::size_t s_points = 20;
};

//! \brief The Young functions every instance is run against.
inline std::vector<YoungFunction> standard_young() {
  return {young::power(1.5),          young::power(2.0),          young::wedge(2, 0.5, 1.5),
          young::vee(2, 0.5, 1.5),    young::log_plus(2, 1.0, 1.0), young::log_minus(2, 1.0, 1.0)};
}

inline const std::vector<std::string>& theorem_ids() {
  static const std::vector<std::string> ids{"thm20", "lemma1", "lemma2", "thm21", "thm41", "thm42", "thm43", "cor41"};
  return ids;
}

//! \brief Runs the engines on one instance; profile, rate and semigroup are built once and shared.
class Battery {
 public:
  Battery(Model md, BatteryOptions o = {}) : md_(std::move(md)), o_(std::move(o)) {}

  const Model& model() const { return md_; }

  Report run(const std::string& id) {
    if (id == "thm20") return thm20();
    if (id == "lemma1") return lemma1();
    if (id == "lemma2") return lemma2();
    if (id == "thm21") return thm21();
    if (id == "thm41") return thm41_all();
    if (id == "thm42") return thm42_all();
    if (id == "thm43") return thm43_all();
    if (id == "cor41") return cor41_all(o_.tol);
    throw ValidationError("theorems: unknown theorem id '" + id + "'");
  }

  //! \brief The four closed-form cases at fixed exponents; independent of the instance.
  static Report cor41_all(double tol = 1e-9) {
    Report r{"cor41", tol};
    const std::vector<std::tuple<Cor41Case, double, double>> cases = {{Cor41Case::wedge, 1.5, 3.0},
                                                                      {Cor41Case::vee, 1.5, 3.0},
                                                                      {Cor41Case::log_inverse, 2.0, 1.0},
                                                                      {Cor41Case::log_direct, 2.0, 1.0}};
    json info = json::array();
    for (const auto& [c, a, b] : cases) {
      const Cor41Result res = cor41(c, a, b);
      info.push_back(res.report.info);
      for (const auto& ch : res.report.checks) r.add(ch);
      r.failed_hard = r.failed_hard || !res.report.pass();
    }
    r.info["cases"] = info;
    r.info["instance_independent"] = true;
    return r;
  }

 private:
  Model md_;
  BatteryOptions o_;
  std::optional<IsoperimetricProfile> P_;
  std::optional<std::vector<Vec>> family_;
  std::optional<RateFunction> beta_;
  std::shared_ptr<const Semigroup> sg_;

  const IsoperimetricProfile& profile() {
    if (!P_) P_ = enumerate_profile(md_);
    return *P_;
  }
  //! \brief Random functions plus every proper indicator (m <= 12) and the constant.
  const std::vector<Vec>& family() {
    if (!family_) {
      std::vector<Vec> f = random_functions(md_.size(), o_.functions, o_.seed);
      if (md_.size() <= 12) {
        const auto ind = proper_indicators(md_.size());
        f.insert(f.end(), ind.begin(), ind.end());
      }
      f.push_back(Vec::Ones(md_.size()));
      family_ = std::move(f);
    }
    return *family_;
  }
  const RateFunction& beta() {
    if (!beta_) beta_ = estimated_rate(md_.space, md_.kernel, nullptr, o_.r_grid, o_.inflate);
    return *beta_;
  }
  std::shared_ptr<const Semigroup> semigroup() {
    if (!sg_) sg_ = std::make_shared<const Semigroup>(md_.space, md_.kernel);
    return sg_;
  }
  std::vector<Vec> nonzero_family() {
    std::vector<Vec> out;
    for (const auto& f : family())
      if (f.cwiseAbs().maxCoeff() > 0.0) out.push_back(f);
    return out;
  }
  static void absorb(Report& into, const Report& sub, json& info) {
    into.merge(sub);
    json j = sub.info;
    j["checks"] = sub.checks.size();
    j["worst_slack"] = num(sub.worst_slack());
    info[sub.name].push_back(j);
  }

  Report thm20() {
    Report r = theorem_report("thm20", md_, o_.tol);
    json info = json::object();
    for (const auto& N : standard_young()) {
      const double C = empirical_los_constant(md_.space, md_.kernel, N, family());
      if (C > 0.0) absorb(r, thm20_forward(md_.space, md_.kernel, N, C, family(), o_.tol), info);
      absorb(r, thm20_backward(md_.space, md_.kernel, N, family(), o_.tol), info);
    }
    const double C1 = 1.0;
    const double C2t = pi0prime_constant(md_.space, md_.kernel, C1);
    absorb(r, thm20_poincare(md_.space, md_.kernel, C1, C2t, PoincareMode::backward, family(), o_.tol), info);
    absorb(r, thm20_poincare(md_.space, md_.kernel, C1, 2.0 * C2t, PoincareMode::forward, {}, o_.tol), info);
    r.info["parts"] = info;
    return r;
  }

  Report lemma1() {
    Report r = theorem_report("lemma1", md_, o_.tol);
    json info = json::object();
    Report core{"lemma1_core", o_.tol};
    for (const auto& G : {GFunction::power(2.0), GFunction::from_young(young::power(1.5))}) {
      const auto fam = nonzero_family();
      for (std::size_t i = 0; i < fam.size(); ++i) {
        Check c = lemma1_core(md_, profile(), G, fam[i]).check;
        c.witness["index"] = i;
        c.witness["G"] = G.name;
        core.add(c);
      }
    }
    absorb(r, core, info);
    const double M = md_.space.total_mass();
    for (double s : detail::mass_grid(profile(), 0.5 * md_.space.min_mass(), M, 8))
      absorb(r, lemma1_poincare(md_, profile(), s, family(), o_.tol), info);
    absorb(r, lemma1_sobolev(md_, profile(), family(), o_.tol).report, info);
    r.info["parts"] = info;
    return r;
  }

  Report lemma2() {
    Report r = theorem_report("lemma2", md_, o_.tol);
    json info = json::object();
    absorb(r, sp_verify(md_.space, md_.kernel, nullptr, beta(), family(), o_.r_grid, o_.tol), info);
    const ThetaIntegral Theta = ThetaIntegral::for_model(md_, semigroup());
    const auto s_grid = log_grid(0.5 * md_.space.min_mass(), md_.space.total_mass(), o_.s_points);
    absorb(r, lemma2_bound(profile(), Theta, beta(), s_grid, o_.tol), info);
    r.info["parts"] = info;
    return r;
  }

  std::vector<Vec> supported_family() {
    std::vector<Vec> fam = family();
    const double binf = beta().at_infinity();
    const double lim = binf > 0.0 ? 1.0 / (2.0 * binf) : kInf;
    const auto sup = supported_functions(md_.space, o_.functions / 5, lim, o_.seed + 1);
    fam.insert(fam.end(), sup.begin(), sup.end());
    return fam;
  }

  Report thm21() { return thm21_verify(md_, beta(), supported_family(), o_.tol, semigroup()); }

  Report thm41_all() {
    Report r = theorem_report("thm41", md_, o_.tol);
    json info = json::object();
    const auto sob = lemma1_sobolev(md_, profile(), {}, o_.tol);
    absorb(r, jumpiso::thm41(sob.N, 0.5, md_, family(), o_.r_grid, o_.tol).report, info);
    const YoungFunction N = young::power(1.5);
    const double C = 1.0 / (2.0 * c_N(N) * kappa_orlicz(md_.space, md_.kernel, N, &md_.gamma));
    absorb(r, jumpiso::thm41(N, C, md_, family(), o_.r_grid, o_.tol).report, info);
    r.info["parts"] = info;
    return r;
  }

  Report thm42_all() {
    return jumpiso::thm42(rate_from_profile(profile()), md_, family(), o_.r_grid, o_.tol).report;
  }

  //! \brief Without a potential the killed forms reduce to V = 0, xi = 1.
  Report thm43_all() {
    Model md = md_;
    Report r = theorem_report("thm43", md_, o_.tol);
    if (!md.potential) {
      md.potential = KillingPotential{Vec::Zero(md.size()), Vec::Ones(md.size())};
      r.notes.push_back("no potential: run with V = 0");
    }
    json info = json::object();
    const KillingPotential* pot = &*md.potential;
    // Bar identity E_V(f, g) = E_bar(f_bar, g_bar).
    Report gf{"bar_identity", o_.tol};
    const Model mb = bar_extension(md);
    const auto& fam = family();
    for (std::size_t i = 0; i + 1 < fam.size(); i += 2) {
      const double a = killed_energy(md.space, md.kernel, pot, fam[i], fam[i + 1]);
      const double b = dirichlet_energy(mb.space, mb.kernel, bar_function(fam[i]), bar_function(fam[i + 1]));
      gf.add(Check::leq("|E_V - E_bar| <= 1e-12 scale", std::abs(a - b), exact_tol(std::max(std::abs(a), 1.0)),
                        {{"index", i}}));
    }
    absorb(r, gf, info);
    const RateFunction beta = estimated_rate(md.space, md.kernel, pot, o_.r_grid, o_.inflate);
    const Thm43Forward f = thm43_forward(md, beta, fam, o_.r_grid, o_.tol);
    absorb(r, f.report, info);
    const bool killed = md_.potential && md_.potential->v.maxCoeff() > 0.0;
    if (!killed) r.notes.push_back("converse skipped: it needs V > 0 somewhere (constants carry no energy)");
    if (!killed || (f.report.info.contains("hypothesis") && f.report.info["hypothesis"] == false)) {
      r.info["parts"] = info;
      return r;
    }
    absorb(r, thm43_backward(md, f.N_bar, f.C, fam, o_.r_grid, o_.tol).report, info);
    r.info["parts"] = info;
    return r;
  }
};

inline Report run_theorem(const std::string& id, const Model& md, const BatteryOptions& o = {}) {
  Battery b(md, o);
  return b.run(id);
}

// ---------------------------------------------------------------------------
// Batch runner

struct BatchRow {
  std::string instance;
  std::string theorem;
  Report report;
};

//! \brief Instance entries: {"name", "model": {...}} or {"name", "random": {"m", "seed", "killing"?, "random_gamma"?}}.
inline std::vector<std::pair<std::string, Model>> manifest_instances(const json& manifest) {
  if (!manifest.contains("instances")) throw ValidationError("manifest: missing field 'instances'");
  const json& list = manifest.at("instances");
  if (!list.is_array()) throw ValidationError("instances: expected an array");
  std::vector<std::pair<std::string, Model>> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const json& e = list[i];
    const std::string where = "instances[" + std::to_string(i) + "]";
    const std::string name = e.value("name", where);
    try {
      if (e.contains("model")) {
        out.emplace_back(name, model_from_json(e.at("model")));
      } else if (e.contains("random")) {
        const json& g = e.at("random");
        GeneratorOptions o;
        o.killing = g.value("killing", false);
        o.random_gamma = g.value("random_gamma", false);
        const int m = g.value("m", 0);
        if (m < 2 || m > 20) throw ValidationError("random.m: expected an integer in [2, 20]");
        out.emplace_back(name, random_model(m, g.value("seed", std::uint64_t{1}), o));
      } else {
        throw ValidationError("needs 'model' or 'random'");
      }
    } catch (const ValidationError& err) {
      throw ValidationError(where + "." + err.what());
    }
  }
  return out;
}

//! \brief One row per (instance, theorem), in manifest order for any number of jobs.
inline std::vector<BatchRow> run_batch(const std::vector<std::pair<std::string, Model>>& instances,
                                       const std::vector<std::string>& theorems, const BatteryOptions& o,
                                       int jobs = 1) {
  std::vector<std::vector<BatchRow>> per(instances.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < instances.size(); i = next++) {
      const auto& [name, md] = instances[i];
      Battery b(md, o);
      for (const auto& id : theorems) {
        BatchRow row{name, id, Report{id, o.tol}};
        try {
          row.report = b.run(id);
        } catch (const std::exception& e) {
          row.report.fail(std::string("error: ") + e.what());
        }
        per[i].push_back(std::move(row));
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::max(1, jobs); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::vector<BatchRow> rows;
  for (auto& v : per)
    for (auto& r : v) rows.push_back(std::move(r));
  return rows;
}

inline std::string batch_csv(const std::vector<BatchRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "instance,theorem,pass,worst_slack\n";
  for (const auto& r : rows) {
    const double w = r.report.worst_slack();
    os << r.instance << ',' << r.theorem << ',' << (r.report.pass() ? "true" : "false") << ',';
    if (std::isinf(w)) os << (w > 0 ? "inf" : "-inf");
    else os << w;
    os << '\n';
  }
  return os.str();
}

}  // namespace jumpiso

#endif
