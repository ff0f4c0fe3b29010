#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fold/error.hpp"
#include "fold/pipeline.hpp"

namespace {

// exit-code contract: 0 ok, 2 I/O, 3 missing dependency, 4 configuration
int classify(const std::exception& e) {
  if (dynamic_cast<const fold::MissingStageError*>(&e)) return 3;
  if (dynamic_cast<const fold::ConfigError*>(&e) ||
      dynamic_cast<const fold::RangeError*>(&e))
    return 4;
  if (dynamic_cast<const fold::IoError*>(&e) ||
      dynamic_cast<const fold::FormatError*>(&e))
    return 2;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "foldvae: learn inter-individual fold-shape variability and flag rare "
      "patterns"};
  std::string config_path;
  std::uint64_t seed = 0;
  std::vector<std::string> overrides;
  std::vector<std::string> stages;

  app.add_option("--config", config_path, "pipeline configuration (JSON)")
      ->required();
  CLI::Option* seed_opt =
      app.add_option("--seed", seed, "override the master seed");
  app.add_option("--set", overrides,
                 "override a config entry, dotted path key=value (repeatable)")
      ->allow_extra_args(false);
  app.add_option("stages", stages,
                 "stages to run, in order: synth preprocess train gridsearch "
                 "benchmark detect explore report")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 4;
  }

  try {
    fold::PipelineConfig cfg = fold::load_pipeline_config(config_path);
    for (const std::string& kv : overrides) {
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos)
        throw fold::ConfigError("--set expects key=value, got '" + kv + "'");
      fold::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed_opt->count() > 0) cfg.seed = seed;
    fold::validate(cfg);
    const auto& known = fold::stage_names();
    for (const std::string& s : stages)
      if (std::find(known.begin(), known.end(), s) == known.end())
        throw fold::ConfigError("unknown stage '" + s + "'");
    for (const std::string& s : stages) fold::run_stage(cfg, s);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return classify(e);
  }
  return 0;
}
