#ifndef JUMPISO_IO_HPP
#define JUMPISO_IO_HPP

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "measure_core.hpp"
#include "report.hpp"
#include "young.hpp"

namespace jumpiso {

namespace detail {

inline json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json mat_json(const Mat& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec_json(m.row(i).transpose()));
  return a;
}

inline Vec json_vec(const json& j, const std::string& field) {
  if (!j.is_array()) throw ValidationError(field + ": expected an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError(field + "[" + std::to_string(i) + "]: expected a number");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline Mat json_mat(const json& j, const std::string& field, int m) {
  if (!j.is_array() || static_cast<int>(j.size()) != m)
    throw ValidationError(field + ": expected " + std::to_string(m) + " rows");
  Mat a(m, m);
  for (int i = 0; i < m; ++i) {
    const Vec row = json_vec(j[static_cast<std::size_t>(i)], field + "[" + std::to_string(i) + "]");
    if (row.size() != m) throw ValidationError(field + "[" + std::to_string(i) + "]: expected " + std::to_string(m) + " entries");
    a.row(i) = row.transpose();
  }
  return a;
}

}  // namespace detail

//! \brief {"mu": [...], "j": [[...]], "gamma": [[...]], "potential": {"v": [...], "xi": [...]}}.
inline json model_to_json(const Model& md) {
  json j{{"mu", detail::vec_json(md.space.mu())}, {"j", detail::mat_json(md.kernel.j())}};
  j["gamma"] = detail::mat_json(md.gamma.gamma);
  if (md.potential) j["potential"] = {{"v", detail::vec_json(md.potential->v)}, {"xi", detail::vec_json(md.potential->xi)}};
  return j;
}

inline Model model_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("instance: expected an object");
  if (!j.contains("mu")) throw ValidationError("instance: missing field 'mu'");
  if (!j.contains("j")) throw ValidationError("instance: missing field 'j'");
  const Vec mu = detail::json_vec(j.at("mu"), "mu");
  const int m = static_cast<int>(mu.size());
  FiniteMeasureSpace s(mu);
  JumpKernel k(s, detail::json_mat(j.at("j"), "j", m));
  std::optional<WeightFunction> g;
  if (j.contains("gamma")) g = WeightFunction{detail::json_mat(j.at("gamma"), "gamma", m)};
  std::optional<KillingPotential> pot;
  if (j.contains("potential")) {
    const json& p = j.at("potential");
    if (!p.contains("v") || !p.contains("xi")) throw ValidationError("potential: needs 'v' and 'xi'");
    pot = KillingPotential{detail::json_vec(p.at("v"), "potential.v"), detail::json_vec(p.at("xi"), "potential.xi")};
  }
  return Model(s, k, g, pot);
}

//! \brief Builtin Young function from {"name": ..., "params": {...}}.
inline YoungFunction young_from_json(const json& j) {
  std::map<std::string, double> p;
  if (j.contains("params"))
    for (const auto& [k, v] : j.at("params").items()) p[k] = v.get<double>();
  return builtin(j.at("name").get<std::string>(), p);
}

//! \brief 64-bit FNV-1a of the compact dump, as 16 hex digits.
inline std::string digest(const json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

}  // namespace jumpiso

#endif
