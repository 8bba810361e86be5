#include <CLI11.hpp>

#include <iostream>

#include "jumpiso/cli.hpp"

namespace jc = jumpiso::cli;

namespace {

struct Args {
  std::string manifest;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> tol;
  int jobs = 1;
};

void common_options(CLI::App* sub, Args& a) {
  sub->add_option("--manifest", a.manifest, "JSON manifest")->required();
  sub->add_option("--seed", a.seed, "override the manifest seed");
  sub->add_option("--out", a.out, "output directory (beats JUMPISO_OUT and the manifest)");
  sub->add_option("--tol", a.tol, "slack tolerance");
}

int run_experiment(const std::string& command, const Args& a) {
  const std::filesystem::path path(a.manifest);
  const jumpiso::json raw = jc::resolve_refs(jumpiso::read_json_file(a.manifest), path.parent_path());
  const jc::Manifest m = jc::parse_manifest(raw, {a.seed, a.out, a.tol});
  const jc::Outcome o = jc::run(command, m, a.jobs);
  const std::string name = command == "enumerate" ? "enumerate" : m.kind;
  jc::write_outcome(o, m.out, name);
  std::cout << name << ": " << (o.pass ? "pass" : "FAIL") << " -> " << m.out << "\n";
  return o.exit_code();
}

int run_generate(const Args& a) {
  const jumpiso::json raw = jumpiso::read_json_file(a.manifest);
  const jc::Outcome o = jc::generate(raw, {a.seed, a.out, a.tol});
  std::string dir = "out";
  if (a.out)
    dir = *a.out;
  else if (const char* env = std::getenv("JUMPISO_OUT"); env && *env)
    dir = env;
  else if (raw.contains("out") && raw.at("out").is_string())
    dir = raw.at("out").get<std::string>();
  jc::write_outcome(o, dir, o.report.at("kind") == "lattice-window" ? "lattice-window" : "instances");
  std::cout << "generate: wrote " << dir << "\n";
  return jc::exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Isoperimetry and functional inequality experiments for jump processes"};
  app.require_subcommand(1);
  Args a;
  app.add_option("--jobs", a.jobs, "worker threads")->check(CLI::PositiveNumber);
  const std::vector<std::pair<std::string, std::string>> commands{
      {"verify", "run the theorem battery (finite-verify, theorem-batch)"},
      {"enumerate", "exact isoperimetric profiles of manifest instances"},
      {"subordinate", "lattice subordination weights and p_1 tails"},
      {"sharpness", "radial energy exponents and the N/M dichotomy"},
      {"perturbed", "perturbed stable threshold example"},
      {"generate", "write random finite-space or lattice-window instances"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    common_options(sub, a);
    sub->add_option("--jobs", a.jobs, "worker threads")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : jc::exit_invalid;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (a.tol && !(*a.tol > 0.0)) throw jumpiso::ValidationError("--tol: must be positive");
    return command == "generate" ? run_generate(a) : run_experiment(command, a);
  } catch (const jumpiso::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return jc::exit_invalid;
  } catch (const std::exception& e) {
    std::cerr << "error (" << command << "): " << e.what() << "\n";
    return jc::exit_error;
  }
}
