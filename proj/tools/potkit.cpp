#include <omp.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "potkit/experiment.hpp"

namespace ex = potkit::experiment;

namespace {

struct Options {
  std::string config;
  std::string preset;
  std::string out;
  std::int64_t seed = -1;
  int threads = 0;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ex::ConfigError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int execute(const std::string& sub, const Options& o) {
  if (o.config.empty() == o.preset.empty()) {
    if (sub != "verify" && sub != "constants") throw ex::ConfigError("config: give exactly one of --config or --preset");
  }
  std::string text = "{}", origin = "<default>";
  if (!o.config.empty()) {
    text = read_text(o.config);
    origin = o.config;
  } else if (!o.preset.empty()) {
    origin = ex::preset_path(o.preset).string();
    text = read_text(origin);
  }
  ex::json cfg = ex::parse_config_text(text, origin);
  if (o.seed >= 0) {
    if (!cfg.is_object()) throw ex::ConfigError("config: expected an object at the top level");
    cfg["seed"] = o.seed;
  }
  if (o.threads > 0) omp_set_num_threads(o.threads);

  const auto t0 = std::chrono::steady_clock::now();
  ex::RunOutput out = ex::run(sub, cfg);
  out.report["config_text"] = text;
  out.report["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::filesystem::path dir = o.out;
  if (cfg.contains("output") && cfg["output"].contains("dir") && o.out.empty()) dir = cfg["output"]["dir"].get<std::string>();
  if (dir.empty()) {
    const char* env = std::getenv("POTKIT_OUT");
    dir = env && *env ? env : "out";
  }
  ex::write_outputs(out, dir);
  std::cout << out.csv;
  std::cout << "wrote " << (dir / (out.stem + ".csv")).string() << " and " << (dir / (out.stem + ".json")).string()
            << "\n";
  if (!out.verdict_ok) {
    std::cerr << "verdict: FAIL\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"potkit: potentials, envelopes and tail diagnostics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(POTKIT_VERSION));
  Options o;
  for (const auto& name : ex::kSubcommands) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--preset", o.preset, "shipped preset name");
    sub->add_option("--out", o.out, "output directory (default $POTKIT_OUT, else out)");
    sub->add_option("--seed", o.seed, "overrides the config seed")->check(CLI::NonNegativeNumber);
    sub->add_option("--threads", o.threads, "OpenMP thread count")->check(CLI::PositiveNumber);
  }
  app.add_subcommand("presets", "list shipped presets");
  CLI11_PARSE(app, argc, argv);

  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    if (sub == "presets") {
      for (const auto& n : ex::preset_names()) std::cout << n << "\n";
      return 0;
    }
    return execute(sub, o);
  } catch (const ex::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
