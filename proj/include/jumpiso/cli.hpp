#ifndef JUMPISO_CLI_HPP
#define JUMPISO_CLI_HPP

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "battery.hpp"
#include "io.hpp"
#include "isoperimetry.hpp"
#include "stable_lattice.hpp"
#include "stable_perturbed.hpp"

namespace jumpiso {
namespace cli {

enum ExitCode : int { exit_ok = 0, exit_failed = 1, exit_invalid = 2, exit_error = 3 };

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k{"finite-verify", "lattice-subordination", "sharpness-scan",
                                          "perturbed-threshold", "theorem-batch"};
  return k;
}

//! \brief Kinds each subcommand accepts.
inline std::vector<std::string> kinds_for(const std::string& command) {
  if (command == "verify") return {"finite-verify", "theorem-batch"};
  if (command == "enumerate") return {"finite-verify", "theorem-batch"};
  if (command == "subordinate") return {"lattice-subordination"};
  if (command == "sharpness") return {"sharpness-scan"};
  if (command == "perturbed") return {"perturbed-threshold"};
  throw ValidationError("unknown command '" + command + "'");
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> tol;
};

struct Manifest {
  std::string kind;
  json body;
  std::uint64_t seed = 0;
  std::string out;
  double tol = 1e-9;
};

namespace detail {

inline bool is_seed(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

inline double positive(const json& j, const std::string& field, double dflt) {
  if (!j.contains(field)) return dflt;
  if (!j.at(field).is_number()) throw ValidationError(field + ": expected a number");
  const double v = j.at(field).get<double>();
  if (!(v > 0.0)) throw ValidationError(field + ": must be positive");
  return v;
}

inline int integer(const json& j, const std::string& field, int dflt, int lo, int hi) {
  if (!j.contains(field)) return dflt;
  if (!j.at(field).is_number_integer()) throw ValidationError(field + ": expected an integer");
  const long v = j.at(field).get<long>();
  if (v < lo || v > hi)
    throw ValidationError(field + ": expected an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<int>(v);
}

inline std::vector<double> numbers(const json& j, const std::string& field, std::vector<double> dflt) {
  if (!j.contains(field)) return dflt;
  const json& a = j.at(field);
  if (a.is_number()) return {a.get<double>()};
  if (!a.is_array()) throw ValidationError(field + ": expected a number or an array of numbers");
  std::vector<double> v;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw ValidationError(field + "[" + std::to_string(i) + "]: expected a number");
    v.push_back(a[i].get<double>());
  }
  return v;
}

//! \brief {"lo", "hi", "points"} log grid.
inline std::vector<double> grid(const json& j, const std::string& field, double lo, double hi, int points) {
  if (!j.contains(field)) return log_grid(lo, hi, static_cast<std::size_t>(points));
  const json& g = j.at(field);
  if (!g.is_object()) throw ValidationError(field + ": expected {\"lo\", \"hi\", \"points\"}");
  const double a = positive(g, "lo", lo), b = positive(g, "hi", hi);
  const int p = integer(g, "points", points, 2, 100000);
  if (!(b > a)) throw ValidationError(field + ": hi must exceed lo");
  return log_grid(a, b, static_cast<std::size_t>(p));
}

inline json fit_json(const lattice::SlopeFit& f, double expected, double allowed) {
  json j = f.to_json();
  j["expected_slope"] = num(expected);
  j["allowed_deviation"] = num(allowed);
  return j;
}

//! \brief |fitted - expected| <= allowed as a slack-carrying check.
inline Check slope_check(const std::string& claim, const lattice::SlopeFit& f, double expected, double allowed) {
  const double dev = std::isfinite(f.slope) ? std::abs(f.slope - expected) : kInf;
  return Check::leq(claim, dev, allowed, fit_json(f, expected, allowed));
}

inline Check flag_check(const std::string& claim, bool ok, json witness = json::object()) {
  return Check::leq(claim, ok ? 0.0 : 1.0, 0.0, std::move(witness));
}

inline std::string csv_num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace detail

//! \brief Replaces {"file": path} instance entries by the model read from path (relative to base).
inline json resolve_refs(json j, const std::filesystem::path& base) {
  if (!j.is_object() || !j.contains("instances") || !j.at("instances").is_array()) return j;
  json& list = j["instances"];
  for (std::size_t i = 0; i < list.size(); ++i) {
    json& e = list[i];
    if (!e.is_object() || !e.contains("file")) continue;
    const std::string where = "instances[" + std::to_string(i) + "].file";
    if (!e.at("file").is_string()) throw ValidationError(where + ": expected a path");
    std::filesystem::path f = e.at("file").get<std::string>();
    if (f.is_relative()) f = base / f;
    json model;
    try {
      model = read_json_file(f.string());
    } catch (const std::exception& err) {
      throw ValidationError(where + ": " + err.what());
    }
    e.erase("file");
    e["model"] = model.contains("model") ? model.at("model") : model;
  }
  return j;
}

//! \brief Validates the common fields. Output directory precedence: --out, JUMPISO_OUT, manifest "out", "out".
inline Manifest parse_manifest(const json& j, const Overrides& o = {}) {
  if (!j.is_object()) throw ValidationError("manifest: expected a JSON object");
  if (!j.contains("kind")) throw ValidationError("manifest: missing field 'kind'");
  if (!j.at("kind").is_string()) throw ValidationError("kind: expected a string");
  Manifest m;
  m.kind = j.at("kind").get<std::string>();
  const auto& kinds = experiment_kinds();
  if (std::find(kinds.begin(), kinds.end(), m.kind) == kinds.end())
    throw ValidationError("kind: unknown experiment kind '" + m.kind + "'");
  if (o.seed) {
    m.seed = *o.seed;
  } else {
    if (!j.contains("seed")) throw ValidationError("manifest: missing field 'seed'");
    if (!detail::is_seed(j.at("seed"))) throw ValidationError("seed: expected a non-negative integer");
    m.seed = j.at("seed").get<std::uint64_t>();
  }
  m.tol = o.tol ? *o.tol : detail::positive(j, "tol", 1e-9);
  if (!(m.tol > 0.0)) throw ValidationError("tol: must be positive");
  if (j.contains("tolerances")) {
    if (!j.at("tolerances").is_object()) throw ValidationError("tolerances: expected an object");
    for (const auto& [k, v] : j.at("tolerances").items())
      if (!v.is_number() || !(v.get<double>() > 0.0)) throw ValidationError("tolerances." + k + ": must be a positive number");
  }
  const char* env = std::getenv("JUMPISO_OUT");
  if (o.out)
    m.out = *o.out;
  else if (env && *env)
    m.out = env;
  else
    m.out = j.value("out", std::string("out"));
  m.body = j;
  return m;
}

struct Artifact {
  std::string name;
  std::string text;
};

struct Outcome {
  json report;
  std::vector<Artifact> files;
  bool pass = true;
  int exit_code() const { return pass ? exit_ok : exit_failed; }
};

inline double tolerance(const Manifest& m, const std::string& key, double dflt) {
  if (!m.body.contains("tolerances")) return dflt;
  return detail::positive(m.body.at("tolerances"), key, dflt);
}

// ---------------------------------------------------------------------------
// Finite instances

//! \brief Explicit "instances" plus "random_instances": {"count", "m_min", "m_max", "killing", "random_gamma"},
//! the latter seeded from the manifest seed.
inline std::vector<std::pair<std::string, Model>> finite_instances(const Manifest& m) {
  std::vector<std::pair<std::string, Model>> out;
  if (m.body.contains("instances")) out = manifest_instances(m.body);
  if (m.body.contains("random_instances")) {
    const json& r = m.body.at("random_instances");
    if (!r.is_object()) throw ValidationError("random_instances: expected an object");
    try {
      const int count = detail::integer(r, "count", 1, 1, 100000);
      const int lo = detail::integer(r, "m_min", 3, 2, 20), hi = detail::integer(r, "m_max", 10, 2, 20);
      if (hi < lo) throw ValidationError("m_max: must be >= m_min");
      GeneratorOptions g;
      g.killing = r.value("killing", false);
      g.random_gamma = r.value("random_gamma", false);
      for (int i = 0; i < count; ++i) {
        Rng rng = Rng::derive(m.seed, static_cast<std::uint64_t>(i));
        const int size = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
        out.emplace_back("random-" + std::to_string(i), random_model(size, rng.next(), g));
      }
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("random_instances.") + e.what());
    }
  }
  if (out.empty()) throw ValidationError("manifest: needs 'instances' or 'random_instances'");
  return out;
}

inline BatteryOptions battery_options(const Manifest& m) {
  BatteryOptions o;
  o.tol = m.tol;
  o.seed = m.seed;
  if (!m.body.contains("options")) return o;
  const json& j = m.body.at("options");
  if (!j.is_object()) throw ValidationError("options: expected an object");
  try {
    o.functions = detail::integer(j, "functions", o.functions, 1, 1000000);
    o.s_points = static_cast<std::size_t>(detail::integer(j, "s_points", static_cast<int>(o.s_points), 2, 10000));
    o.inflate = detail::positive(j, "inflate", o.inflate);
    o.r_grid = detail::grid(j, "r_grid", 1e-3, 1e3, 25);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("options.") + e.what());
  }
  return o;
}

inline std::vector<std::string> theorem_list(const Manifest& m) {
  if (!m.body.contains("theorems")) return theorem_ids();
  const json& t = m.body.at("theorems");
  if (!t.is_array()) throw ValidationError("theorems: expected an array of theorem ids");
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const std::string id = t[i].is_string() ? t[i].get<std::string>() : "";
    const auto& all = theorem_ids();
    if (std::find(all.begin(), all.end(), id) == all.end())
      throw ValidationError("theorems[" + std::to_string(i) + "]: unknown theorem id '" + id + "'");
    ids.push_back(id);
  }
  return ids;
}

//! \brief finite-verify keeps every check of every report; theorem-batch keeps summaries.
inline Outcome run_finite(const Manifest& m, int jobs) {
  const auto instances = finite_instances(m);
  const auto ids = theorem_list(m);
  const BatteryOptions opt = battery_options(m);
  const auto rows = run_batch(instances, ids, opt, jobs);
  const bool full = m.kind == "finite-verify";
  Outcome out;
  json list = json::array();
  int failed = 0;
  for (const auto& r : rows) {
    list.push_back(json{{"instance", r.instance}, {"theorem", r.theorem}, {"report", r.report.to_json(full)}});
    if (!r.report.pass()) ++failed;
  }
  out.pass = failed == 0;
  out.report = json{{"kind", m.kind},
                    {"seed", m.seed},
                    {"tolerance", num(m.tol)},
                    {"instances", instances.size()},
                    {"theorems", ids},
                    {"rows", list},
                    {"summary", json{{"rows", rows.size()}, {"failed_rows", failed}, {"pass", out.pass}}}};
  out.files.push_back({m.kind + ".csv", batch_csv(rows)});
  return out;
}

//! \brief Exact isoperimetric profile per instance (frontier JSON + full subset CSV for m <= 20).
inline Outcome run_enumerate(const Manifest& m, int jobs) {
  const auto instances = finite_instances(m);
  Outcome out;
  json list = json::array();
  for (const auto& [name, md] : instances) {
    const IsoperimetricProfile p = enumerate_profile(md, md.space.size() <= 20, jobs);
    list.push_back(json{{"instance", name}, {"kappa_min", num(p.kappa_min())}, {"profile", p.to_json()}});
    out.files.push_back({"profile-" + name + ".csv", p.csv()});
  }
  out.report = json{{"kind", "enumerate"}, {"seed", m.seed}, {"instances", list}};
  return out;
}

// ---------------------------------------------------------------------------
// Lattice subordination

inline std::vector<std::pair<int, double>> lattice_cases(const json& b) {
  std::vector<std::pair<int, double>> cases;
  for (double n : detail::numbers(b, "n", {1.0, 2.0})) {
    if (n != 1.0 && n != 2.0) throw ValidationError("n: lattice profiles support n in {1, 2}");
    for (double a : detail::numbers(b, "alpha", {0.5, 1.0, 1.5})) {
      if (!(a > 0.0 && a < 2.0)) throw ValidationError("alpha: must lie in (0, 2)");
      cases.emplace_back(static_cast<int>(n), a);
    }
  }
  return cases;
}

inline Outcome run_subordination(const Manifest& m) {
  const json& b = m.body;
  const auto cases = lattice_cases(b);
  const long K = detail::integer(b, "K", 1000000, 1, 100000000);
  const int r_max = detail::integer(b, "r_max", 64, 2, 4096);
  const std::vector<double> fit = detail::numbers(b, "fit", {2.0, static_cast<double>(r_max)});
  if (fit.size() != 2 || !(fit[0] < fit[1])) throw ValidationError("fit: expected [lo, hi] with lo < hi");
  const double slope_tol = tolerance(m, "slope", 0.1), band_max = tolerance(m, "band", 10.0);
  const double c1_tol = tolerance(m, "c1", 1e-12), limit_tol = tolerance(m, "limit_constant", 0.01);
  const std::optional<double> partial_min =
      b.contains("partial_sum_min") ? std::optional<double>(detail::positive(b, "partial_sum_min", 1.0)) : std::nullopt;

  Report rep{"lattice-subordination", m.tol};
  json rows = json::array();
  std::ostringstream csv;
  csv << "n,alpha,r,p1\n";
  std::vector<double> done_alpha;
  for (const auto& [n, alpha] : cases) {
    const std::string tag = "n=" + std::to_string(n) + " alpha=" + detail::csv_num(alpha);
    json row{{"n", n}, {"alpha", alpha}};
    if (std::find(done_alpha.begin(), done_alpha.end(), alpha) == done_alpha.end()) {
      done_alpha.push_back(alpha);
      const lattice::SubordinationWeights w = lattice::subord_weights(alpha, K);
      const double lim = alpha / (2.0 * std::tgamma(1.0 - alpha / 2.0));
      const double at_K = w(K) * std::pow(static_cast<double>(K), 1.0 + alpha / 2.0);
      rep.add(Check::leq("c(psi,1) = alpha/2 [" + tag + "]", std::abs(w(1) - alpha / 2.0), c1_tol));
      rep.add(Check::leq("c(psi,K) K^{1+alpha/2} -> limit constant [" + tag + "]", std::abs(at_K / lim - 1.0), limit_tol,
                         json{{"value", num(at_K)}, {"limit", num(lim)}}));
      if (partial_min)
        rep.add(Check::leq("partial sum reaches target [" + tag + "]", *partial_min, w.partial_sum(),
                           json{{"K", K}, {"tail", num(w.tail)}}));
      row["weights"] = json{{"c1", num(w(1))}, {"partial_sum", num(w.partial_sum())}, {"tail", num(w.tail)},
                            {"scaled_last_weight", num(at_K)}, {"limit_constant", num(lim)}};
    }
    const lattice::P1Profile p = lattice::p1_profile(n, alpha, K, r_max, fit[0], fit[1]);
    rep.add(detail::slope_check("p1 slope -(n+alpha) [" + tag + "]", p.fit, -(n + alpha), slope_tol));
    rep.add(Check::leq("p1 band <= max [" + tag + "]", p.band, band_max));
    row["profile"] = p.to_json();
    rows.push_back(row);
    for (std::size_t i = 0; i < p.r.size(); ++i)
      csv << n << ',' << detail::csv_num(alpha) << ',' << detail::csv_num(p.r[i]) << ',' << detail::csv_num(p.value[i]) << '\n';
  }
  Outcome out;
  out.pass = rep.pass();
  out.report = json{{"kind", m.kind}, {"seed", m.seed}, {"K", K}, {"r_max", r_max}, {"cases", rows}, {"report", rep.to_json(true)}};
  out.files.push_back({"lattice-subordination.csv", csv.str()});
  return out;
}

// ---------------------------------------------------------------------------
// Sharpness scans

//! \brief Exponents of the radial L1 energy at small and large s.
inline std::pair<double, double> energy_exponents(int n, double a1, double a2, lattice::KernelMode mode) {
  const double lo = std::min(a1, a2), hi = std::max(a1, a2);
  switch (mode) {
    case lattice::KernelMode::min_kernel: return {n + 1 - lo / 2.0, n + 1 - hi / 2.0};
    case lattice::KernelMode::max_kernel: return {n + 1 - hi / 2.0, n + 1 - lo / 2.0};
    case lattice::KernelMode::truncated: return {n + 1 - a1 / 2.0, static_cast<double>(n)};
  }
  return {0.0, 0.0};
}

inline Outcome run_sharpness(const Manifest& m) {
  const json& b = m.body;
  const int n = detail::integer(b, "n", 1, 1, 3);
  const std::vector<double> al = detail::numbers(b, "alpha", {0.5, 1.5});
  if (al.size() != 2) throw ValidationError("alpha: expected [alpha1, alpha2]");
  const std::string mode_name = b.value("mode", std::string("min_kernel"));
  const lattice::KernelMode mode = lattice::kernel_mode(mode_name);
  const double slope_tol = tolerance(m, "slope", 0.05);
  const std::vector<double> small = detail::grid(b, "small_s", 1e-3, 1e-1, 41);
  const std::vector<double> large = detail::grid(b, "large_s", 10.0, 1e3, 41);
  const auto [e_small, e_large] = energy_exponents(n, al[0], al[1], mode);

  Report rep{"sharpness-scan", m.tol};
  std::ostringstream csv;
  csv << "s,energy\n";
  auto scan = [&](const std::vector<double>& s) {
    std::vector<double> v;
    for (double x : s) {
      v.push_back(lattice::radial_l1_energy(n, al[0], al[1], mode, x));
      csv << detail::csv_num(x) << ',' << detail::csv_num(v.back()) << '\n';
    }
    return lattice::slope_fit(s, v, s.front(), s.back());
  };
  const lattice::SlopeFit fs = scan(small), fl = scan(large);
  rep.add(detail::slope_check("energy exponent at small s", fs, e_small, slope_tol));
  rep.add(detail::slope_check("energy exponent at large s", fl, e_large, slope_tol));

  json nm = json::array();
  if (b.contains("nm")) {
    const json& list = b.at("nm");
    if (!list.is_array()) throw ValidationError("nm: expected an array");
    const std::vector<double> s_grid = detail::grid(b, "nm_s", 1e-3, 1e3, 121);
    for (std::size_t i = 0; i < list.size(); ++i) {
      const json& e = list[i];
      const std::string where = "nm[" + std::to_string(i) + "]";
      if (!e.contains("young")) throw ValidationError(where + ": missing field 'young'");
      if (!e.contains("expect")) throw ValidationError(where + ": missing field 'expect'");
      const std::string expect = e.at("expect").get<std::string>();
      if (expect != "bounded" && expect != "divergent")
        throw ValidationError(where + ".expect: expected 'bounded' or 'divergent'");
      YoungFunction N;
      try {
        N = young_from_json(e.at("young"));
      } catch (const std::exception& err) {
        throw ValidationError(where + ".young: " + err.what());
      }
      const double c = e.value("c", 1.0);
      const lattice::NmScan sc = lattice::nm_scan(n, N, al[0], al[1], c, s_grid);
      json r = sc.to_json();
      r["young"] = e.at("young");
      r["expect"] = expect;
      nm.push_back(r);
      rep.add(detail::flag_check(where + " " + expect, sc.bounded == (expect == "bounded"), r));
    }
  }
  Outcome out;
  out.pass = rep.pass();
  out.report = json{{"kind", m.kind},
                    {"seed", m.seed},
                    {"n", n},
                    {"alpha", al},
                    {"mode", mode_name},
                    {"small_s", detail::fit_json(fs, e_small, slope_tol)},
                    {"large_s", detail::fit_json(fl, e_large, slope_tol)},
                    {"nm", nm},
                    {"report", rep.to_json(true)}};
  out.files.push_back({"sharpness-scan.csv", csv.str()});
  return out;
}

// ---------------------------------------------------------------------------
// Perturbed stable threshold

inline Outcome run_perturbed(const Manifest& m) {
  const json& b = m.body;
  const int n = detail::integer(b, "n", 2, 2, 3);
  const std::vector<double> alphas = detail::numbers(b, "alpha", {0.5, 1.0, 1.5});
  const std::vector<double> factors = detail::numbers(b, "eps_factors", {0.25, 0.5, 1.0});
  perturbed::ThresholdOptions o;
  o.phi_l_grid = detail::grid(b, "phi_l", 1e2, 1e4, 9);
  o.gl_l_grid = detail::grid(b, "gl_l", 1e8, 1e12, 5);
  o.beta_r_grid = detail::grid(b, "beta_r", 1e-10, 1e-6, 9);
  const double phi_tol = tolerance(m, "phi_slope", 1e-2), beta_tol = tolerance(m, "beta_relative", 0.15);
  const double nn_tol = tolerance(m, "nn_slope", 0.05), mass_tol = tolerance(m, "mass_slope", 0.02);
  const double l1_tol = tolerance(m, "l1mass_sq_slope", 0.04);
  const std::vector<double> gl_l = detail::grid(b, "gl_slope_l", 10.0, 1e3, 5);
  const int gl_points = detail::integer(b, "gl_base_points", 17, 5, 257);
  json gl_rows = json::array();

  Report rep{"perturbed-threshold", m.tol};
  json rows = json::array();
  std::ostringstream csv;
  csv << "alpha,eps,phi_slope,ratio_slope,the1,the2,beta_slope\n";
  for (double alpha : alphas) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw ValidationError("alpha: must lie in (0, 2)");
    std::vector<double> eps;
    for (double f : factors) {
      if (!(f > 0.0)) throw ValidationError("eps_factors: must be positive");
      eps.push_back(f * alpha);
    }
    for (const auto& r : perturbed::example_threshold(n, alpha, eps, o)) {
      const std::string tag = " [alpha=" + detail::csv_num(alpha) + " eps=" + detail::csv_num(r.eps) + "]";
      rep.add(detail::flag_check("the1 classification" + tag, r.the1 == r.expected_the1));
      rep.add(detail::flag_check("the2 classification" + tag, r.the2 == r.expected_the2));
      rep.add(detail::slope_check("Phi slope eps - alpha/2" + tag, r.phi_fit, r.eps - alpha / 2.0, phi_tol));
      if (r.beta_fit.points > 0)
        rep.add(detail::slope_check("theorem beta exponent" + tag, r.beta_fit, r.beta_expected,
                                    beta_tol * std::abs(r.beta_expected)));
      json j = r.to_json();
      j["alpha"] = alpha;
      rows.push_back(j);
      if (n == 2) {
        const perturbed::RadialWeight w = perturbed::RadialWeight::log_family(2, alpha, r.eps);
        std::vector<double> sup, mass, l1sq;
        for (double l : gl_l) {
          const perturbed::GlQuantities g = perturbed::gl_quantities(w, l, gl_points);
          sup.push_back(g.inner_sup);
          mass.push_back(g.mass);
          l1sq.push_back(g.l1mass * g.l1mass);
        }
        const double lo = gl_l.front(), hi = gl_l.back();
        const lattice::SlopeFit fs = lattice::slope_fit(gl_l, sup, lo, hi), fm = lattice::slope_fit(gl_l, mass, lo, hi),
                                fl = lattice::slope_fit(gl_l, l1sq, lo, hi);
        rep.add(detail::slope_check("sup inner g_l integral slope -alpha/2" + tag, fs, -alpha / 2.0, nn_tol));
        rep.add(detail::slope_check("g_l mass slope -eps" + tag, fm, -r.eps, mass_tol));
        rep.add(detail::slope_check("squared g_l L1 mass slope -2 eps" + tag, fl, -2.0 * r.eps, l1_tol));
        gl_rows.push_back(json{{"alpha", alpha},
                               {"eps", r.eps},
                               {"inner_sup", detail::fit_json(fs, -alpha / 2.0, nn_tol)},
                               {"mass", detail::fit_json(fm, -r.eps, mass_tol)},
                               {"l1mass_squared", detail::fit_json(fl, -2.0 * r.eps, l1_tol)}});
      }
      csv << detail::csv_num(alpha) << ',' << detail::csv_num(r.eps) << ',' << detail::csv_num(r.phi_fit.slope) << ','
          << detail::csv_num(r.ratio_fit.slope) << ',' << (r.the1 ? "true" : "false") << ','
          << (r.the2 ? "true" : "false") << ',' << detail::csv_num(r.beta_fit.points > 0 ? r.beta_fit.slope : std::nan("")) << '\n';
    }
  }
  Outcome out;
  out.pass = rep.pass();
  out.report = json{{"kind", m.kind}, {"seed", m.seed}, {"n", n}, {"rows", rows}, {"gl_slopes", gl_rows},
                    {"report", rep.to_json(true)}};
  out.files.push_back({"perturbed-threshold.csv", csv.str()});
  return out;
}

// ---------------------------------------------------------------------------
// Dispatch and output

inline Outcome run(const std::string& command, const Manifest& m, int jobs = 1) {
  const auto kinds = kinds_for(command);
  if (std::find(kinds.begin(), kinds.end(), m.kind) == kinds.end())
    throw ValidationError("kind: '" + m.kind + "' is not handled by '" + command + "'");
  if (command == "enumerate") return run_enumerate(m, jobs);
  if (m.kind == "finite-verify" || m.kind == "theorem-batch") return run_finite(m, jobs);
  if (m.kind == "lattice-subordination") return run_subordination(m);
  if (m.kind == "sharpness-scan") return run_sharpness(m);
  return run_perturbed(m);
}

//! \brief Report JSON under <name>.json next to the CSV artifacts.
inline void write_outcome(const Outcome& o, const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  write_text_file((std::filesystem::path(dir) / (name + ".json")).string(), o.report.dump(2) + "\n");
  for (const auto& f : o.files) write_text_file((std::filesystem::path(dir) / f.name).string(), f.text);
}

// ---------------------------------------------------------------------------
// Instance generation

//! \brief {"kind": "finite-space", "m", "count", "options"} or {"kind": "lattice-window", "n", "alpha", "K", "R"}.
inline Outcome generate(const json& j, const Overrides& ov = {}) {
  if (!j.is_object() || !j.contains("kind")) throw ValidationError("generate: missing field 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  std::uint64_t seed = 0;
  if (ov.seed)
    seed = *ov.seed;
  else if (j.contains("seed") && detail::is_seed(j.at("seed")))
    seed = j.at("seed").get<std::uint64_t>();
  else
    throw ValidationError("generate: missing field 'seed'");
  Outcome out;
  if (kind == "finite-space") {
    const int m = detail::integer(j, "m", 8, 2, 20);
    const int count = detail::integer(j, "count", 1, 1, 100000);
    GeneratorOptions g;
    if (j.contains("options")) {
      const json& o = j.at("options");
      g.killing = o.value("killing", false);
      g.random_gamma = o.value("random_gamma", false);
      g.mass_lo = detail::positive(o, "mass_lo", g.mass_lo);
      g.mass_hi = detail::positive(o, "mass_hi", g.mass_hi);
      g.rate_lo = detail::positive(o, "rate_lo", g.rate_lo);
      g.rate_hi = detail::positive(o, "rate_hi", g.rate_hi);
      g.edge_prob = o.value("edge_prob", g.edge_prob);
      if (g.mass_hi < g.mass_lo || g.rate_hi < g.rate_lo) throw ValidationError("options: bounds must satisfy lo <= hi");
      if (!(g.edge_prob >= 0.0 && g.edge_prob <= 1.0)) throw ValidationError("options.edge_prob: must lie in [0, 1]");
    }
    json list = json::array();
    for (int i = 0; i < count; ++i) {
      // count = 1 keeps the plain seed so that (m, seed) names one instance.
      const std::uint64_t s = count == 1 ? seed : Rng::derive(seed, static_cast<std::uint64_t>(i)).next();
      const Model md = random_model(m, s, g);
      list.push_back(json{{"name", "m" + std::to_string(m) + "-s" + std::to_string(s)},
                          {"model", model_to_json(md)},
                          {"digest", digest(model_to_json(md))}});
    }
    out.report = json{{"kind", "finite-verify"}, {"seed", seed}, {"instances", list}};
  } else if (kind == "lattice-window") {
    const int n = detail::integer(j, "n", 1, 1, 3);
    const double alpha = detail::positive(j, "alpha", 1.0);
    const int K = detail::integer(j, "K", 1000, 1, 10000000);
    const int R = detail::integer(j, "R", 16, 0, 512);
    const lattice::P1Kernel p = lattice::p1_kernel(n, alpha, K, R);
    out.report = json{{"kind", "lattice-window"}, {"seed", seed},          {"n", n},
                      {"alpha", alpha},           {"K", K},                {"R", R},
                      {"mass", num(p.p.sum())},   {"entry_uncertainty", num(p.tail)}};
    out.files.push_back({"lattice-window.csv", p.p.csv()});
  } else {
    throw ValidationError("generate.kind: expected 'finite-space' or 'lattice-window'");
  }
  return out;
}

}  // namespace cli
}  // namespace jumpiso

#endif
