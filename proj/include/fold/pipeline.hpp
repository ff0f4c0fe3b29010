#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fold/synth.hpp"
#include "fold/vae.hpp"

namespace fold {

struct SplitSizes {
  int train = 320;
  int val = 80;
  int test = 200;
};

struct GridSearchConfig {
  bool enabled = true;
  std::vector<double> betas{1.0, 2.0, 4.0};
  std::vector<int> latent_dims{8, 16};
  int epochs = 8;  // short runs for the scan
};

struct BenchmarkConfig {
  std::vector<int> paper_bands{200, 500, 700, 1000};
  double paper_mean_voxels = 3500.0;  // reference in-mask skeleton size
  double split_ratio = 0.5;
  int asymmetry_n = 100;   // subjects per group
  int interruption_n = 24; // altered subjects
};

struct DetectConfig {
  int k_folds = 5;
  int outlier_repeats = 10;
  double nu = 0.1;
  double noise_floor = 0.1;
  int iforest_trees = 100;
  int iforest_subsample = 256;
};

struct ExploreConfig {
  int interp_steps = 7;
  int traversal_steps = 7;
  std::vector<int> slice_depths;  // default: nz/3 and 2nz/3 of the crop
};

struct PipelineConfig {
  int schema_version = 1;
  std::string region = "central";
  std::filesystem::path workdir = "work";
  std::uint64_t seed = 7;
  int cohort = 600;
  SplitSizes split;
  GeneratorParams generator;       // control geometry
  GeneratorParams generator_left;  // asymmetry benchmark geometry
  int downsample_factor = 2;
  int margin = 8;
  double dilation_mm = 5.0;
  double augment_deg = 10.0;  // 0 disables augmentation
  ModelConfig model;          // input_dims double as the crop pad dims
  GridSearchConfig gridsearch;
  BenchmarkConfig benchmark;
  DetectConfig detect;
  ExploreConfig explore;
  int threads = 1;
};

// strict schema: unknown keys and bad types are ConfigError; absent keys
// keep their defaults
PipelineConfig parse_pipeline_config(const std::string& json_text);
std::string serialize_pipeline_config(const PipelineConfig& cfg);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// --set style override: dotted key path, value parsed as JSON when possible
// (numbers, arrays, bools), otherwise taken as a string. Type mismatches
// throw immediately; range rules are deferred to validate() so a sequence
// of overrides may pass through inconsistent intermediate states
void apply_override(PipelineConfig& cfg, const std::string& dotted_key,
                    const std::string& value);

void validate(const PipelineConfig& cfg);

// known stage names in run order
const std::vector<std::string>& stage_names();

// Runs one stage: synth | preprocess | train | gridsearch | benchmark |
// detect | explore | report. Takes the workdir lock for the duration.
// Throws: MissingStageError when upstream artifacts are absent, IoError /
// FormatError on filesystem trouble, ConfigError on bad configuration.
void run_stage(const PipelineConfig& cfg, const std::string& stage);

}  // namespace fold
