#ifndef JUMPISO_REPORT_HPP
#define JUMPISO_REPORT_HPP

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "numerics.hpp"

namespace jumpiso {

using json = nlohmann::ordered_json;

//! \brief Finite doubles stay numbers; infinities and NaN become strings.
inline json num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

//! \brief One inequality claim lhs <= rhs with its relative slack.
struct Check {
  std::string claim;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  json witness = json::object();

  static Check leq(std::string claim, double lhs, double rhs, json witness = json::object()) {
    Check c{std::move(claim), lhs, rhs, 0.0, std::move(witness)};
    c.slack = relative_slack(lhs, rhs);
    return c;
  }
  //! \brief (rhs - lhs) / max(|lhs|, |rhs|); 0 when both vanish, +inf when rhs is +inf.
  static double relative_slack(double lhs, double rhs) {
    if (std::isinf(rhs) && rhs > 0) return std::isinf(lhs) && lhs > 0 ? 0.0 : kInf;
    if (std::isinf(lhs) && lhs > 0) return -kInf;
    const double scale = std::max(std::abs(lhs), std::abs(rhs));
    if (scale < 1e-300) return 0.0;
    return (rhs - lhs) / scale;
  }
  json to_json() const {
    return json{{"claim", claim}, {"lhs", num(lhs)}, {"rhs", num(rhs)}, {"slack", num(slack)}, {"witness", witness}};
  }
};

//! \brief Collection of checks; passes iff every slack >= -tol.
struct Report {
  std::string name;
  double tol = 1e-9;
  std::vector<Check> checks;
  json info = json::object();
  std::vector<std::string> notes;
  bool failed_hard = false;  // a structural failure independent of slack

  void add(Check c) { checks.push_back(std::move(c)); }
  void fail(const std::string& why) {
    failed_hard = true;
    notes.push_back(why);
  }
  double worst_slack() const {
    double w = kInf;
    for (const auto& c : checks) w = std::min(w, c.slack);
    return w;
  }
  int violations() const {
    int v = 0;
    for (const auto& c : checks)
      if (!(c.slack >= -tol)) ++v;
    return v;
  }
  bool pass() const { return !failed_hard && violations() == 0; }
  const Check* worst() const {
    const Check* w = nullptr;
    for (const auto& c : checks)
      if (!w || c.slack < w->slack) w = &c;
    return w;
  }
  void merge(const Report& o) {
    for (const auto& c : o.checks) checks.push_back(c);
    for (const auto& n : o.notes) notes.push_back(o.name + ": " + n);
    failed_hard = failed_hard || o.failed_hard;
  }
  //! \brief Summary JSON; full=true lists every check, otherwise only violations and the worst one.
  json to_json(bool full = false) const {
    json j{{"name", name},         {"pass", pass()},          {"tolerance", num(tol)},
           {"checks", checks.size()}, {"violations", violations()}, {"worst_slack", num(worst_slack())}};
    if (const Check* w = worst()) j["worst"] = w->to_json();
    if (!info.empty()) j["info"] = info;
    if (!notes.empty()) j["notes"] = notes;
    json list = json::array();
    for (const auto& c : checks)
      if (full || !(c.slack >= -tol)) list.push_back(c.to_json());
    j[full ? "all_checks" : "failed_checks"] = list;
    return j;
  }
};

}  // namespace jumpiso

#endif
