#include "fold/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "fold/error.hpp"
#include "pipeline_internal.hpp"

namespace fold {

namespace {

using nlohmann::json;

json dims_to_json(const Dims3& d) { return json::array({d.nx, d.ny, d.nz}); }
json vec_to_json(const Vec3f& v) { return json::array({v.x, v.y, v.z}); }

Dims3 dims_from_json(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 3)
    throw ConfigError(ctx + ": expected [nx, ny, nz]");
  return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()};
}

Vec3f vec_from_json(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 3)
    throw ConfigError(ctx + ": expected [x, y, z]");
  return {j.at(0).get<float>(), j.at(1).get<float>(), j.at(2).get<float>()};
}

// strict object reader: absent keys keep defaults, unknown keys are errors
class ObjReader {
 public:
  ObjReader(const json& j, std::string ctx) : j_(j), ctx_(std::move(ctx)) {
    if (!j_.is_object()) throw ConfigError(ctx_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(ctx_ + "." + key + ": " + e.what());
    }
  }

  void get(const char* key, Dims3& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    out = dims_from_json(j_.at(key), ctx_ + "." + key);
  }

  void get(const char* key, Vec3f& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    out = vec_from_json(j_.at(key), ctx_ + "." + key);
  }

  void get(const char* key, Side& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    const std::string s = j_.at(key).is_string()
                              ? j_.at(key).get<std::string>()
                              : std::string();
    if (s == "right")
      out = Side::right;
    else if (s == "left")
      out = Side::left;
    else
      throw ConfigError(ctx_ + "." + key + ": expected \"right\" or \"left\"");
  }

  void get(const char* key, std::filesystem::path& out) {
    std::string s = out.string();
    get(key, s);
    out = s;
  }

  void get(const char* key, std::array<int, 3>& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    const json& a = j_.at(key);
    if (!a.is_array() || a.size() != 3)
      throw ConfigError(ctx_ + "." + key + ": expected 3 integers");
    for (int i = 0; i < 3; ++i) out[i] = a.at(i).get<int>();
  }

  const json* sub(const char* key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key()))
        throw ConfigError("unknown config key " + ctx_ + "." + item.key());
  }

 private:
  const json& j_;
  std::string ctx_;
  std::set<std::string> seen_;
};

json generator_to_json(const GeneratorParams& g) {
  return json{{"dims", dims_to_json(g.dims)},
              {"voxel_mm", vec_to_json(g.voxel_mm)},
              {"side", to_string(g.side)},
              {"branch_count_min", g.branch_count_min},
              {"branch_count_max", g.branch_count_max},
              {"branch_size_min", g.branch_size_min},
              {"branch_size_max", g.branch_size_max},
              {"double_knob_prob", g.double_knob_prob},
              {"interruption_prob", g.interruption_prob},
              {"gap_voxels", g.gap_voxels},
              {"main_xc", g.main_xc},
              {"main_xc_jitter", g.main_xc_jitter},
              {"main_len_min", g.main_len_min},
              {"main_len_max", g.main_len_max},
              {"main_depth_min", g.main_depth_min},
              {"main_depth_max", g.main_depth_max},
              {"knob_amp_mean", g.knob_amp_mean},
              {"knob_amp_sd", g.knob_amp_sd}};
}

void generator_from_json(const json& j, const std::string& ctx,
                         GeneratorParams& g) {
  ObjReader r(j, ctx);
  r.get("dims", g.dims);
  r.get("voxel_mm", g.voxel_mm);
  r.get("side", g.side);
  r.get("branch_count_min", g.branch_count_min);
  r.get("branch_count_max", g.branch_count_max);
  r.get("branch_size_min", g.branch_size_min);
  r.get("branch_size_max", g.branch_size_max);
  r.get("double_knob_prob", g.double_knob_prob);
  r.get("interruption_prob", g.interruption_prob);
  r.get("gap_voxels", g.gap_voxels);
  r.get("main_xc", g.main_xc);
  r.get("main_xc_jitter", g.main_xc_jitter);
  r.get("main_len_min", g.main_len_min);
  r.get("main_len_max", g.main_len_max);
  r.get("main_depth_min", g.main_depth_min);
  r.get("main_depth_max", g.main_depth_max);
  r.get("knob_amp_mean", g.knob_amp_mean);
  r.get("knob_amp_sd", g.knob_amp_sd);
  r.finish();
}

json model_to_json(const ModelConfig& m) {
  return json{{"input_dims", dims_to_json(m.input_dims)},
              {"channels", {m.channels[0], m.channels[1], m.channels[2]}},
              {"kernel", m.kernel},
              {"stride", m.stride},
              {"latent_dim", m.latent_dim},
              {"beta", m.beta},
              {"learning_rate", m.learning_rate},
              {"epochs", m.epochs},
              {"batch_size", m.batch_size},
              {"seed", m.seed}};
}

void model_from_json(const json& j, const std::string& ctx, ModelConfig& m) {
  ObjReader r(j, ctx);
  r.get("input_dims", m.input_dims);
  r.get("channels", m.channels);
  r.get("kernel", m.kernel);
  r.get("stride", m.stride);
  r.get("latent_dim", m.latent_dim);
  r.get("beta", m.beta);
  r.get("learning_rate", m.learning_rate);
  r.get("epochs", m.epochs);
  r.get("batch_size", m.batch_size);
  r.get("seed", m.seed);
  r.finish();
}

json config_to_json(const PipelineConfig& c) {
  return json{
      {"schema_version", c.schema_version},
      {"region", c.region},
      {"workdir", c.workdir.string()},
      {"seed", c.seed},
      {"cohort", c.cohort},
      {"split",
       {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}}},
      {"generator", generator_to_json(c.generator)},
      {"generator_left", generator_to_json(c.generator_left)},
      {"downsample_factor", c.downsample_factor},
      {"margin", c.margin},
      {"dilation_mm", c.dilation_mm},
      {"augment_deg", c.augment_deg},
      {"model", model_to_json(c.model)},
      {"gridsearch",
       {{"enabled", c.gridsearch.enabled},
        {"betas", c.gridsearch.betas},
        {"latent_dims", c.gridsearch.latent_dims},
        {"epochs", c.gridsearch.epochs}}},
      {"benchmark",
       {{"paper_bands", c.benchmark.paper_bands},
        {"paper_mean_voxels", c.benchmark.paper_mean_voxels},
        {"split_ratio", c.benchmark.split_ratio},
        {"asymmetry_n", c.benchmark.asymmetry_n},
        {"interruption_n", c.benchmark.interruption_n}}},
      {"detect",
       {{"k_folds", c.detect.k_folds},
        {"outlier_repeats", c.detect.outlier_repeats},
        {"nu", c.detect.nu},
        {"noise_floor", c.detect.noise_floor},
        {"iforest_trees", c.detect.iforest_trees},
        {"iforest_subsample", c.detect.iforest_subsample}}},
      {"explore",
       {{"interp_steps", c.explore.interp_steps},
        {"traversal_steps", c.explore.traversal_steps},
        {"slice_depths", c.explore.slice_depths}}},
      {"threads", c.threads}};
}

PipelineConfig config_from_json(const json& j, bool check) {
  PipelineConfig c;
  ObjReader r(j, "config");
  r.get("schema_version", c.schema_version);
  if (c.schema_version != 1)
    throw ConfigError("unsupported schema_version " +
                      std::to_string(c.schema_version));
  r.get("region", c.region);
  r.get("workdir", c.workdir);
  r.get("seed", c.seed);
  r.get("cohort", c.cohort);
  if (const json* s = r.sub("split")) {
    ObjReader rs(*s, "config.split");
    rs.get("train", c.split.train);
    rs.get("val", c.split.val);
    rs.get("test", c.split.test);
    rs.finish();
  }
  if (const json* s = r.sub("generator"))
    generator_from_json(*s, "config.generator", c.generator);
  // the left generator inherits the control geometry unless overridden
  c.generator_left = c.generator;
  c.generator_left.side = Side::left;
  if (const json* s = r.sub("generator_left"))
    generator_from_json(*s, "config.generator_left", c.generator_left);
  r.get("downsample_factor", c.downsample_factor);
  r.get("margin", c.margin);
  r.get("dilation_mm", c.dilation_mm);
  r.get("augment_deg", c.augment_deg);
  if (const json* s = r.sub("model")) model_from_json(*s, "config.model", c.model);
  if (const json* s = r.sub("gridsearch")) {
    ObjReader rs(*s, "config.gridsearch");
    rs.get("enabled", c.gridsearch.enabled);
    rs.get("betas", c.gridsearch.betas);
    rs.get("latent_dims", c.gridsearch.latent_dims);
    rs.get("epochs", c.gridsearch.epochs);
    rs.finish();
  }
  if (const json* s = r.sub("benchmark")) {
    ObjReader rs(*s, "config.benchmark");
    rs.get("paper_bands", c.benchmark.paper_bands);
    rs.get("paper_mean_voxels", c.benchmark.paper_mean_voxels);
    rs.get("split_ratio", c.benchmark.split_ratio);
    rs.get("asymmetry_n", c.benchmark.asymmetry_n);
    rs.get("interruption_n", c.benchmark.interruption_n);
    rs.finish();
  }
  if (const json* s = r.sub("detect")) {
    ObjReader rs(*s, "config.detect");
    rs.get("k_folds", c.detect.k_folds);
    rs.get("outlier_repeats", c.detect.outlier_repeats);
    rs.get("nu", c.detect.nu);
    rs.get("noise_floor", c.detect.noise_floor);
    rs.get("iforest_trees", c.detect.iforest_trees);
    rs.get("iforest_subsample", c.detect.iforest_subsample);
    rs.finish();
  }
  if (const json* s = r.sub("explore")) {
    ObjReader rs(*s, "config.explore");
    rs.get("interp_steps", c.explore.interp_steps);
    rs.get("traversal_steps", c.explore.traversal_steps);
    rs.get("slice_depths", c.explore.slice_depths);
    rs.finish();
  }
  r.get("threads", c.threads);
  r.finish();
  if (check) validate(c);
  return c;
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j, true);
}

std::string serialize_pipeline_config(const PipelineConfig& cfg) {
  return config_to_json(cfg).dump(2) + "\n";
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_pipeline_config(text);
}

void apply_override(PipelineConfig& cfg, const std::string& dotted_key,
                    const std::string& value) {
  json doc = config_to_json(cfg);
  json* node = &doc;
  std::size_t pos = 0;
  std::vector<std::string> parts;
  while (pos != std::string::npos) {
    const std::size_t dot = dotted_key.find('.', pos);
    parts.push_back(dotted_key.substr(
        pos, dot == std::string::npos ? std::string::npos : dot - pos));
    pos = dot == std::string::npos ? dot : dot + 1;
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i]))
      throw ConfigError("--set: unknown key " + dotted_key);
    node = &(*node)[parts[i]];
  }
  if (!node->is_object() || !node->contains(parts.back()))
    throw ConfigError("--set: unknown key " + dotted_key);
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;  // unquoted strings pass through
  }
  // type errors surface here; range checks wait for validate() so that
  // several overrides can move the config through an inconsistent middle
  (*node)[parts.back()] = parsed;
  cfg = config_from_json(doc, false);
}

void validate(const PipelineConfig& c) {
  if (c.schema_version != 1)
    throw ConfigError("unsupported schema_version " +
                      std::to_string(c.schema_version));
  if (c.region.empty()) throw ConfigError("region must be non-empty");
  if (c.workdir.empty()) throw ConfigError("workdir must be non-empty");
  if (c.cohort < 3) throw ConfigError("cohort must be >= 3");
  if (c.split.train < 1 || c.split.val < 1 || c.split.test < 1)
    throw ConfigError("split sizes must be >= 1");
  if (c.split.train + c.split.val + c.split.test > c.cohort)
    throw ConfigError("split sizes exceed the cohort");
  auto check_gen = [](const GeneratorParams& g, const char* name) {
    if (g.dims.nx <= 0 || g.dims.ny <= 0 || g.dims.nz <= 0)
      throw ConfigError(std::string(name) + ".dims must be positive");
    if (g.voxel_mm.x <= 0 || g.voxel_mm.y <= 0 || g.voxel_mm.z <= 0)
      throw ConfigError(std::string(name) + ".voxel_mm must be positive");
    if (g.branch_count_min < 0 || g.branch_count_max < g.branch_count_min)
      throw ConfigError(std::string(name) + ": bad branch counts");
    if (g.branch_size_min < 1 || g.branch_size_max < g.branch_size_min)
      throw ConfigError(std::string(name) + ": bad branch sizes");
    if (g.double_knob_prob < 0 || g.double_knob_prob > 1 ||
        g.interruption_prob < 0 || g.interruption_prob > 1)
      throw ConfigError(std::string(name) + ": probabilities must be in [0,1]");
    if (g.gap_voxels < 1)
      throw ConfigError(std::string(name) + ".gap_voxels must be >= 1");
  };
  check_gen(c.generator, "generator");
  check_gen(c.generator_left, "generator_left");
  if (!(c.generator.dims == c.generator_left.dims))
    throw ConfigError("generator and generator_left must share dims");
  if (c.downsample_factor < 1)
    throw ConfigError("downsample_factor must be >= 1");
  if (c.margin < 0) throw ConfigError("margin must be >= 0");
  if (c.dilation_mm < 0) throw ConfigError("dilation_mm must be >= 0");
  if (c.augment_deg < 0) throw ConfigError("augment_deg must be >= 0");
  validate(c.model);
  if (c.gridsearch.enabled) {
    if (c.gridsearch.betas.empty() || c.gridsearch.latent_dims.empty())
      throw ConfigError("gridsearch scan lists must be non-empty");
    if (c.gridsearch.epochs < 1)
      throw ConfigError("gridsearch.epochs must be >= 1");
    for (double b : c.gridsearch.betas)
      if (b < 0) throw ConfigError("gridsearch.betas must be >= 0");
    for (int l : c.gridsearch.latent_dims)
      if (l < 1) throw ConfigError("gridsearch.latent_dims must be >= 1");
  }
  const auto& bands = c.benchmark.paper_bands;
  if (bands.empty()) throw ConfigError("benchmark.paper_bands must be non-empty");
  for (std::size_t i = 0; i < bands.size(); ++i) {
    if (bands[i] < 1) throw ConfigError("benchmark.paper_bands must be >= 1");
    if (i && bands[i] <= bands[i - 1])
      throw ConfigError("benchmark.paper_bands must be strictly increasing");
  }
  if (!(c.benchmark.paper_mean_voxels > 0))
    throw ConfigError("benchmark.paper_mean_voxels must be > 0");
  if (!(c.benchmark.split_ratio > 0 && c.benchmark.split_ratio < 1))
    throw ConfigError("benchmark.split_ratio must be in (0,1)");
  if (c.benchmark.asymmetry_n < 2)
    throw ConfigError("benchmark.asymmetry_n must be >= 2");
  if (c.benchmark.interruption_n < 1)
    throw ConfigError("benchmark.interruption_n must be >= 1");
  if (c.detect.k_folds < 2) throw ConfigError("detect.k_folds must be >= 2");
  if (c.detect.outlier_repeats < 2)
    throw ConfigError("detect.outlier_repeats must be >= 2");
  if (!(c.detect.nu > 0 && c.detect.nu <= 1))
    throw ConfigError("detect.nu must be in (0,1]");
  if (c.detect.noise_floor < 0)
    throw ConfigError("detect.noise_floor must be >= 0");
  if (c.detect.iforest_trees < 1)
    throw ConfigError("detect.iforest_trees must be >= 1");
  if (c.detect.iforest_subsample < 2)
    throw ConfigError("detect.iforest_subsample must be >= 2");
  if (c.explore.interp_steps < 2 || c.explore.traversal_steps < 2)
    throw ConfigError("explore steps must be >= 2");
  for (int d : c.explore.slice_depths)
    if (d < 0 || d >= c.model.input_dims.nz)
      throw ConfigError("explore.slice_depths out of range");
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{
      "synth",     "preprocess", "train",   "gridsearch",
      "benchmark", "detect",     "explore", "report"};
  return names;
}

namespace {

class WorkdirLock {
 public:
  explicit WorkdirLock(const std::filesystem::path& workdir) {
    std::filesystem::create_directories(workdir);
    path_ = workdir / "lock";
    std::FILE* f = std::fopen(path_.string().c_str(), "wx");
    if (!f)
      throw IoError("workdir is locked (" + path_.string() +
                    " exists); remove the stale lock if no run is active");
    std::fputs("locked\n", f);
    std::fclose(f);
  }
  ~WorkdirLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  WorkdirLock(const WorkdirLock&) = delete;
  WorkdirLock& operator=(const WorkdirLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace

void run_stage(const PipelineConfig& cfg, const std::string& stage) {
  validate(cfg);
  const auto& names = stage_names();
  if (std::find(names.begin(), names.end(), stage) == names.end())
    throw ConfigError("unknown stage '" + stage + "'");
  WorkdirLock lock(cfg.workdir);
  if (stage == "synth")
    pipe::stage_synth(cfg);
  else if (stage == "preprocess")
    pipe::stage_preprocess(cfg);
  else if (stage == "train")
    pipe::stage_train(cfg);
  else if (stage == "gridsearch")
    pipe::stage_gridsearch(cfg);
  else if (stage == "benchmark")
    pipe::stage_benchmark(cfg);
  else if (stage == "detect")
    pipe::stage_detect(cfg);
  else if (stage == "explore")
    pipe::stage_explore(cfg);
  else if (stage == "report")
    pipe::stage_report(cfg);
}

}  // namespace fold
