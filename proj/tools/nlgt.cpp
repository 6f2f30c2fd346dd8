// Command-line front end: run, bounds, sweep, verify, preset list.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "nlgt/commands.hpp"
#include "nlgt/verify.hpp"

namespace fs = std::filesystem;
using namespace nlgt;

namespace {

fs::path preset_dir() {
  if (const char* env = std::getenv("NLGT_PRESETS")) return env;
  return NLGT_PRESET_DIR;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  if (!fs::is_directory(preset_dir())) return names;
  for (const auto& e : fs::directory_iterator(preset_dir())) {
    if (e.path().extension() == ".json") names.push_back(e.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Source {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
};

ExperimentConfig load(const Source& s) {
  if (s.config.empty() == s.preset.empty()) throw ConfigError({"exactly one of --config or --preset is required"});
  const fs::path path = s.config.empty() ? preset_dir() / (s.preset + ".json") : fs::path(s.config);
  if (!s.preset.empty() && !fs::exists(path)) throw ConfigError({"unknown preset '" + s.preset + "'"});
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError({std::string("malformed JSON: ") + e.what()});
  }
  if (s.seed && j.is_object()) j["seed"] = *s.seed;
  return parse_config(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlinear gradient-tracking simulator"};
  app.require_subcommand(1);
  Source src;
  std::string out;
  unsigned jobs = 1;
  bool directed = false;
  std::uint64_t seed_value = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", src.config, "experiment config (JSON)");
    sub->add_option("--preset", src.preset, "named preset from the presets directory");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed_value, "override the config seed")->each([&](const std::string&) {
      src.seed = seed_value;
    });
    sub->add_flag("--experimental-directed", directed, "allow directed networks");
  };
  auto* run = app.add_subcommand("run", "integrate one experiment and write artifacts");
  add_common(run);
  auto* bounds = app.add_subcommand("bounds", "report the step-size bounds for a config");
  add_common(bounds);
  auto* sweep = app.add_subcommand("sweep", "stability sweep over alpha, rho, khop, eta");
  add_common(sweep);
  sweep->add_option("--jobs", jobs, "parallel sweep cells")->check(CLI::Range(1u, 1024u));

  auto* verify = app.add_subcommand("verify", "run the property corpus");
  std::uint64_t verify_seed = VerifyOptions{}.seed;
  std::size_t fixtures = VerifyOptions{}.stability_fixtures;
  bool mutant = false;
  verify->add_option("--seed", verify_seed, "corpus seed");
  verify->add_option("--fixtures", fixtures, "stability fixtures");
  verify->add_flag("--inject-sign-error", mutant, "assemble with a deliberate sign error");

  auto* preset = app.add_subcommand("preset", "preset utilities");
  preset->require_subcommand(1);
  auto* plist = preset->add_subcommand("list", "list shipped presets");
  auto* pshow = preset->add_subcommand("show", "print a preset");
  std::string show_name;
  pshow->add_option("name", show_name)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::exit_validation;
  }

  try {
    const cli::Options opt{directed, jobs};
    if (*run) {
      const auto o = cli::cmd_run(load(src), opt, out, std::cout);
      return o.exit_code;
    }
    if (*bounds) {
      cli::cmd_bounds(load(src), opt, out, std::cout);
      return cli::exit_ok;
    }
    if (*sweep) {
      const auto t = cli::cmd_sweep(load(src), opt, out, std::cout);
      const bool failed = std::any_of(t.cells.begin(), t.cells.end(), [](const auto& c) { return c.verdict == 2; });
      return failed ? cli::exit_runtime : cli::exit_ok;
    }
    if (*verify) {
      VerifyOptions vo;
      vo.seed = verify_seed;
      vo.stability_fixtures = fixtures;
      vo.inject_sign_error = mutant;
      return print_verify(std::cout, run_verify(vo)) ? cli::exit_ok : cli::exit_verify_failed;
    }
    if (*plist) {
      for (const auto& n : preset_names()) std::cout << n << '\n';
      return cli::exit_ok;
    }
    if (*pshow) {
      std::cout << read_text(preset_dir() / (show_name + ".json"));
      return cli::exit_ok;
    }
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::exit_validation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::exit_runtime;
  }
  return cli::exit_runtime;
}
