#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <queue>

#include "jumpiso/cli.hpp"

using namespace jumpiso;
namespace jc = jumpiso::cli;

namespace {

json small_batch(std::uint64_t seed) {
  return json{{"kind", "theorem-batch"},
              {"seed", seed},
              {"random_instances", {{"count", 3}, {"m_min", 3}, {"m_max", 5}}},
              {"theorems", {"thm20", "lemma1", "thm41"}},
              {"options", {{"functions", 40}, {"s_points", 6}}}};
}

// Independent of generate.hpp: plain BFS on the JSON adjacency.
bool bfs_connected(const json& j) {
  const std::size_t m = j.size();
  std::vector<bool> seen(m, false);
  std::queue<std::size_t> q;
  q.push(0);
  seen[0] = true;
  std::size_t count = 1;
  while (!q.empty()) {
    const std::size_t a = q.front();
    q.pop();
    for (std::size_t b = 0; b < m; ++b)
      if (!seen[b] && j[a][b].get<double>() > 0.0) {
        seen[b] = true;
        ++count;
        q.push(b);
      }
  }
  return count == m;
}

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("jumpiso_cli_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

int run_binary(const std::string& args) {
  const int status = std::system((std::string(JUMPISO_BIN) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("manifest validation names the field") {
  auto message = [](const json& j) {
    try {
      jc::parse_manifest(j);
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(json{{"seed", 1}}).find("'kind'") != std::string::npos);
  CHECK(message(json{{"kind", "nope"}, {"seed", 1}}).find("kind") != std::string::npos);
  CHECK(message(json{{"kind", "theorem-batch"}}).find("'seed'") != std::string::npos);
  CHECK(message(json{{"kind", "theorem-batch"}, {"seed", -3}}).find("seed") != std::string::npos);
  CHECK(message(json{{"kind", "theorem-batch"}, {"seed", 1}, {"tol", 0.0}}).find("tol") != std::string::npos);
  CHECK(message(json{{"kind", "sharpness-scan"}, {"seed", 1}, {"tolerances", {{"slope", -0.1}}}})
            .find("tolerances.slope") != std::string::npos);
  CHECK(message(json{{"kind", "theorem-batch"}, {"seed", 1}}).empty());

  const jc::Manifest m = jc::parse_manifest(json{{"kind", "theorem-batch"}, {"seed", 4}}, {9, std::nullopt, 1e-6});
  CHECK(m.seed == 9);
  CHECK(m.tol == 1e-6);
  CHECK_THROWS_AS(jc::run("sharpness", m), ValidationError);
}

TEST_CASE("output directory precedence: flag, environment, manifest") {
  const json j{{"kind", "theorem-batch"}, {"seed", 1}, {"out", "from-manifest"}};
  ::unsetenv("JUMPISO_OUT");
  CHECK(jc::parse_manifest(j).out == "from-manifest");
  CHECK(jc::parse_manifest(json{{"kind", "theorem-batch"}, {"seed", 1}}).out == "out");
  ::setenv("JUMPISO_OUT", "from-env", 1);
  CHECK(jc::parse_manifest(j).out == "from-env");
  CHECK(jc::parse_manifest(j, {std::nullopt, std::string("from-flag"), std::nullopt}).out == "from-flag");
  ::unsetenv("JUMPISO_OUT");
}

TEST_CASE("asymmetric kernel is rejected with the pair named") {
  const json j{{"kind", "finite-verify"},
               {"seed", 1},
               {"instances",
                {{{"name", "bad"}, {"model", {{"mu", {1.0, 1.0, 1.0}}, {"j", {{0.0, 1.0, 0.0}, {1.0, 0.0, 2.0}, {0.0, 1.5, 0.0}}}}}}}}};
  const jc::Manifest m = jc::parse_manifest(j);
  std::string msg;
  try {
    jc::run("verify", m);
  } catch (const ValidationError& e) {
    msg = e.what();
  }
  CHECK(msg.find("instances[0]") != std::string::npos);
  CHECK(msg.find("pair (1,2)") != std::string::npos);

  const auto dir = scratch("asym");
  write_text_file((dir / "m.json").string(), j.dump());
  CHECK(run_binary("verify --manifest " + (dir / "m.json").string() + " --out " + (dir / "out").string()) == 2);
}

TEST_CASE("theorem-batch is byte-deterministic and independent of --jobs") {
  const jc::Manifest m = jc::parse_manifest(small_batch(42));
  const jc::Outcome a = jc::run("verify", m, 1), b = jc::run("verify", m, 1), c = jc::run("verify", m, 3);
  CHECK(a.pass);
  CHECK(a.exit_code() == jc::exit_ok);
  CHECK(a.report.dump() == b.report.dump());
  CHECK(a.report.dump() == c.report.dump());
  REQUIRE(a.files.size() == 1);
  CHECK(a.files[0].text == c.files[0].text);
  CHECK(a.files[0].text.rfind("instance,theorem,pass,worst_slack\n", 0) == 0);
  CHECK(a.report.at("summary").at("rows") == 9);

  const jc::Outcome other = jc::run("verify", jc::parse_manifest(small_batch(43)), 1);
  CHECK(other.report.dump() != a.report.dump());

  const auto dir = scratch("det");
  write_text_file((dir / "m.json").string(), small_batch(42).dump());
  const std::string args = "verify --manifest " + (dir / "m.json").string() + " --out ";
  REQUIRE(run_binary(args + (dir / "r1").string()) == 0);
  REQUIRE(run_binary("--jobs 2 " + args + (dir / "r2").string()) == 0);
  CHECK(slurp(dir / "r1" / "theorem-batch.json") == slurp(dir / "r2" / "theorem-batch.json"));
  CHECK(slurp(dir / "r1" / "theorem-batch.csv") == slurp(dir / "r2" / "theorem-batch.csv"));
  CHECK(slurp(dir / "r1" / "theorem-batch.json") == a.report.dump(2) + "\n");
}

TEST_CASE("failing checks give exit status 1") {
  const json j{{"kind", "sharpness-scan"},
               {"seed", 1},
               {"n", 2},
               {"alpha", {0.5, 1.5}},
               {"small_s", {{"lo", 1e-3}, {"hi", 1e-2}, {"points", 5}}},
               {"large_s", {{"lo", 1e2}, {"hi", 1e3}, {"points", 5}}},
               {"tolerances", {{"slope", 1e-12}}}};
  const jc::Outcome o = jc::run("sharpness", jc::parse_manifest(j));
  CHECK_FALSE(o.pass);
  CHECK(o.exit_code() == jc::exit_failed);
  const auto dir = scratch("fail");
  write_text_file((dir / "m.json").string(), j.dump());
  CHECK(run_binary("sharpness --manifest " + (dir / "m.json").string() + " --out " + (dir / "out").string()) == 1);
  CHECK(std::filesystem::exists(dir / "out" / "sharpness-scan.json"));
}

TEST_CASE("sharpness run separates the sharp Young function from a bumped one") {
  const double p1 = 2.0 / 1.75, p2 = 2.0 / 1.25;
  const json j{{"kind", "sharpness-scan"},
               {"seed", 1},
               {"n", 2},
               {"alpha", {0.5, 1.5}},
               {"nm",
                {{{"young", {{"name", "wedge"}, {"params", {{"n", 2}, {"alpha1", 0.5}, {"alpha2", 1.5}}}}},
                  {"c", 0.7},
                  {"expect", "bounded"}},
                 {{"young", {{"name", "power_wedge"}, {"params", {{"p1", p2 - 0.1}, {"p2", p1}}}}},
                  {"c", 0.7},
                  {"expect", "divergent"}}}}};
  const jc::Outcome o = jc::run("sharpness", jc::parse_manifest(j));
  INFO(o.report.dump());
  CHECK(o.pass);
  CHECK(o.report.at("small_s").at("expected_slope").get<double>() == doctest::Approx(3.0 - 0.25));
  CHECK(o.report.at("large_s").at("expected_slope").get<double>() == doctest::Approx(3.0 - 0.75));

  json bad = j;
  bad["nm"][1]["expect"] = "maybe";
  CHECK_THROWS_WITH_AS(jc::run("sharpness", jc::parse_manifest(bad)), doctest::Contains("nm[1].expect"), ValidationError);
}

TEST_CASE("subordination run on a small K") {
  const json j{{"kind", "lattice-subordination"}, {"seed", 1}, {"n", {1}}, {"alpha", {1.0}}, {"K", 20000}, {"r_max", 32},
               {"fit", {2, 32}}};
  const jc::Outcome o = jc::run("subordinate", jc::parse_manifest(j));
  INFO(o.report.dump());
  CHECK(o.pass);
  const json& w = o.report.at("cases")[0].at("weights");
  CHECK(w.at("c1").get<double>() == 0.5);
  CHECK(o.files[0].text.rfind("n,alpha,r,p1\n", 0) == 0);
  CHECK_THROWS_AS(jc::run("subordinate", jc::parse_manifest(json{{"kind", "lattice-subordination"}, {"seed", 1}, {"alpha", 2.5}})),
                  ValidationError);
}

TEST_CASE("generate: fixed (m, seed) gives one instance") {
  const json spec{{"kind", "finite-space"}, {"m", 8}, {"seed", 7}};
  const jc::Outcome a = jc::generate(spec), b = jc::generate(spec);
  CHECK(a.report.dump() == b.report.dump());
  const json& inst = a.report.at("instances")[0];
  CHECK(inst.at("model").at("mu").size() == 8);
  CHECK(inst.at("digest") == digest(inst.at("model")));
  CHECK(jc::generate(json{{"kind", "finite-space"}, {"m", 8}, {"seed", 8}}).report.dump() != a.report.dump());
  CHECK_THROWS_AS(jc::generate(json{{"kind", "torus"}, {"seed", 1}}), ValidationError);
  CHECK_THROWS_AS(jc::generate(json{{"kind", "finite-space"}, {"m", 8}}), ValidationError);

  // The generated file is itself a valid finite-verify manifest.
  const jc::Manifest m = jc::parse_manifest(a.report);
  CHECK(jc::finite_instances(m).size() == 1);
}

TEST_CASE("generate: 10^4 instances are connected and respect mass bounds") {
  const double lo = 0.2, hi = 5.0;
  int total = 0;
  for (int m = 2; m <= 11; ++m) {
    const json spec{{"kind", "finite-space"},
                    {"m", m},
                    {"seed", 1000 + m},
                    {"count", 1000},
                    {"options", {{"mass_lo", lo}, {"mass_hi", hi}, {"edge_prob", 0.0}}}};
    const json insts = jc::generate(spec).report.at("instances");
    for (const json& e : insts) {
      const json& md = e.at("model");
      REQUIRE(bfs_connected(md.at("j")));
      for (const json& x : md.at("mu")) {
        REQUIRE(x.get<double>() >= lo);
        REQUIRE(x.get<double>() <= hi);
      }
      ++total;
    }
  }
  CHECK(total == 10000);
}

TEST_CASE("generate: lattice window mass and determinism") {
  const json spec{{"kind", "lattice-window"}, {"seed", 1}, {"n", 1}, {"alpha", 1.0}, {"K", 200}, {"R", 300}};
  const jc::Outcome o = jc::generate(spec);
  // R > K holds every walk step, so the window carries the whole partial sum.
  const double partial = lattice::subord_weights(1.0, 200).partial_sum();
  CHECK(o.report.at("mass").get<double>() == doctest::Approx(partial).epsilon(1e-12));
  CHECK(o.files[0].text == jc::generate(spec).files[0].text);
}

TEST_CASE("file references resolve relative to the manifest") {
  const auto dir = scratch("refs");
  const jc::Outcome g = jc::generate(json{{"kind", "finite-space"}, {"m", 4}, {"seed", 3}});
  write_text_file((dir / "inst.json").string(), g.report.at("instances")[0].dump());
  const json j{{"kind", "finite-verify"}, {"seed", 1}, {"instances", {{{"name", "x"}, {"file", "inst.json"}}}}};
  const json resolved = jc::resolve_refs(j, dir);
  CHECK(resolved.at("instances")[0].at("model") == g.report.at("instances")[0].at("model"));
  const json missing{{"kind", "finite-verify"}, {"seed", 1}, {"instances", {{{"file", "nope.json"}}}}};
  CHECK_THROWS_WITH_AS(jc::resolve_refs(missing, dir), doctest::Contains("instances[0].file"), ValidationError);
}
