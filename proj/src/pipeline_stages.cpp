#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>

#include "fold/error.hpp"
#include "fold/io.hpp"
#include "fold/rng.hpp"
#include "pipeline_internal.hpp"

namespace fold::pipe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class StageTimer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ =
      std::chrono::steady_clock::now();
};

std::string tagged_id(const char* tag, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03d", tag, i);
  return buf;
}

fs::path native_path(const Paths& paths, int index) {
  return paths.synth / "subjects" / (subject_id(index) + ".fvol");
}

fs::path crop_path(const Paths& paths, int index) {
  return paths.preprocess / "inputs" / (subject_id(index) + ".fvol");
}

// workdir-relative path with forward slashes, for manifests and the report
std::string rel(const Paths& paths, const fs::path& p) {
  return fs::relative(p, paths.root).generic_string();
}

int in_mask_count(const LabelGrid& skeleton, const RegionMask& mask) {
  int n = 0;
  for (std::size_t i = 0; i < skeleton.data.size(); ++i)
    if (skeleton.data[i] != 0 && mask.mask.data[i]) ++n;
  return n;
}

json center_to_json(const Vec3d& c) { return json::array({c.x, c.y, c.z}); }

Vec3d center_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3)
    throw FormatError("expected a 3-element center array");
  return {j.at(0).get<double>(), j.at(1).get<double>(),
          j.at(2).get<double>()};
}

json band_to_json(const Band& b) {
  json hi = b.hi == std::numeric_limits<int>::max() ? json(nullptr) : json(b.hi);
  return json{{"lo", b.lo}, {"hi", hi}};
}

TrainOptions train_options(const PipelineConfig& cfg, const CropMask* mask) {
  TrainOptions opt;
  opt.augment_mask = cfg.augment_deg > 0 ? mask : nullptr;
  opt.augment_deg = cfg.augment_deg;
  opt.threads = cfg.threads;
  opt.verbose = true;
  return opt;
}

}  // namespace

Paths paths_for(const PipelineConfig& cfg) {
  Paths p;
  p.root = cfg.workdir;
  p.synth = p.root / "synth";
  p.preprocess = p.root / "preprocess";
  p.train = p.root / "train";
  p.gridsearch = p.root / "gridsearch";
  p.benchmark = p.root / "benchmark";
  p.detect = p.root / "detect";
  p.explore = p.root / "explore";
  p.report = p.root / "report";
  return p;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

void write_json_file(const fs::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

void require_artifact(const fs::path& path, const std::string& stage) {
  if (!fs::exists(path))
    throw MissingStageError("missing artifact " + path.string() +
                            "; run the '" + stage + "' stage first");
}

std::string subject_id(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "subj_%04d", i);
  return buf;
}

CropGeometry load_crop_geometry(const PipelineConfig& cfg) {
  const Paths paths = paths_for(cfg);
  require_artifact(paths.preprocess / "mask.fvol", "preprocess");
  require_artifact(paths.preprocess / "mask.json", "preprocess");
  CropGeometry g;
  g.mask.mask = load_binary_fvol(paths.preprocess / "mask.fvol");
  const json mj = read_json_file(paths.preprocess / "mask.json");
  try {
    g.mask.bbox = box_from_json(mj.at("bbox"));
    g.mask.center = center_from_json(mj.at("center"));
    g.mask.margin = mj.at("margin").get<int>();
    g.mask.dilation_mm = mj.at("dilation_mm").get<double>();
  } catch (const json::exception& e) {
    throw FormatError("mask.json: " + std::string(e.what()));
  }
  g.native_dims = g.mask.mask.dims;
  g.crop_mask =
      mask_in_crop_frame(g.mask, cfg.downsample_factor, cfg.model.input_dims);
  return g;
}

std::vector<int> split_ids(const json& manifest, const char* key) {
  std::vector<int> ids;
  try {
    for (const auto& v : manifest.at("split").at(key))
      ids.push_back(v.get<int>());
  } catch (const json::exception& e) {
    throw FormatError("manifest split." + std::string(key) + ": " + e.what());
  }
  return ids;
}

NormalizedMap load_crop(const fs::path& path, const CropMask* mask) {
  NormalizedMap m{load_scalar_fvol(path)};
  return mask ? apply_mask(m, *mask) : m;
}

std::vector<NormalizedMap> load_split_crops(const Paths& paths,
                                            const std::vector<int>& ids,
                                            const CropMask* mask) {
  std::vector<NormalizedMap> out;
  out.reserve(ids.size());
  for (int id : ids) {
    const fs::path p = crop_path(paths, id);
    require_artifact(p, "preprocess");
    out.push_back(load_crop(p, mask));
  }
  return out;
}

LabelGrid load_native_subject(const Paths& paths, int index) {
  const fs::path p = native_path(paths, index);
  require_artifact(p, "synth");
  return load_label_fvol(p);
}

std::vector<int> band_edges(const PipelineConfig& cfg,
                            double mean_in_mask_total) {
  const double scale = mean_in_mask_total / cfg.benchmark.paper_mean_voxels;
  std::vector<int> edges;
  edges.reserve(cfg.benchmark.paper_bands.size());
  for (int b : cfg.benchmark.paper_bands) {
    int e = static_cast<int>(std::lround(b * scale));
    if (e < 1) e = 1;
    if (!edges.empty() && e <= edges.back()) e = edges.back() + 1;
    edges.push_back(e);
  }
  return edges;
}

json box_to_json(const BoundingBox& b) {
  return json{{"x0", b.x0}, {"y0", b.y0}, {"z0", b.z0},
              {"x1", b.x1}, {"y1", b.y1}, {"z1", b.z1}};
}

BoundingBox box_from_json(const json& j) {
  try {
    return {j.at("x0").get<int>(), j.at("y0").get<int>(),
            j.at("z0").get<int>(), j.at("x1").get<int>(),
            j.at("y1").get<int>(), j.at("z1").get<int>()};
  } catch (const json::exception& e) {
    throw FormatError("bad box object: " + std::string(e.what()));
  }
}

void stage_synth(const PipelineConfig& cfg) {
  const StageTimer timer;
  const Paths paths = paths_for(cfg);
  fs::create_directories(paths.synth / "subjects");
  json subjects = json::array();
  for (int i = 0; i < cfg.cohort; ++i) {
    const std::uint64_t seed = derive_seed(cfg.seed, "cohort", i);
    const SyntheticSubject s = generate_subject(cfg.generator, seed);
    const fs::path file = native_path(paths, i);
    save_fvol(file, s.skeleton);
    json ss = json::object();
    for (const auto& [label, count] : s.truth.ss_sizes)
      ss[std::to_string(label)] = count;
    subjects.push_back(
        json{{"id", subject_id(i)},
             {"index", i},
             {"file", rel(paths, file)},
             {"seed", seed},
             {"hemisphere", to_string(s.truth.hemisphere)},
             {"knob_count", s.truth.knob_count},
             {"interrupted", s.truth.interrupted},
             {"gap_box", s.truth.gap_box ? box_to_json(*s.truth.gap_box)
                                         : json(nullptr)},
             {"ss_sizes", ss}});
  }
  write_json_file(paths.synth / "cohort.json",
                  json{{"region", cfg.region},
                       {"cohort", cfg.cohort},
                       {"subjects", subjects}});
  std::printf("synth: %d subjects in %.1f s\n", cfg.cohort, timer.seconds());
}

void stage_preprocess(const PipelineConfig& cfg) {
  const StageTimer timer;
  const Paths paths = paths_for(cfg);
  require_artifact(paths.synth / "cohort.json", "synth");
  const json cohort = read_json_file(paths.synth / "cohort.json");
  const int n = cohort.at("cohort").get<int>();
  if (n != cfg.cohort)
    throw ConfigError("cohort size in config (" + std::to_string(cfg.cohort) +
                      ") differs from the synth manifest (" +
                      std::to_string(n) + ")");

  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(derive_seed(cfg.seed, "split", 0));
  rng.shuffle(ids);
  const auto take = [&](int offset, int count) {
    std::vector<int> out(ids.begin() + offset, ids.begin() + offset + count);
    std::sort(out.begin(), out.end());
    return out;
  };
  const std::vector<int> train_ids = take(0, cfg.split.train);
  const std::vector<int> val_ids = take(cfg.split.train, cfg.split.val);
  const std::vector<int> test_ids =
      take(cfg.split.train + cfg.split.val, cfg.split.test);

  // region support comes from training subjects only
  std::vector<LabelGrid> train_skeletons;
  train_skeletons.reserve(train_ids.size());
  for (int id : train_ids)
    train_skeletons.push_back(load_native_subject(paths, id));
  std::vector<const LabelGrid*> ptrs;
  ptrs.reserve(train_skeletons.size());
  for (const auto& g : train_skeletons) ptrs.push_back(&g);
  const RegionMask mask = learn_mask(ptrs, {}, cfg.dilation_mm, cfg.margin);
  train_skeletons.clear();
  train_skeletons.shrink_to_fit();

  fs::create_directories(paths.preprocess / "inputs");
  save_fvol(paths.preprocess / "mask.fvol", mask.mask);
  write_json_file(paths.preprocess / "mask.json",
                  json{{"bbox", box_to_json(mask.bbox)},
                       {"center", center_to_json(mask.center)},
                       {"margin", mask.margin},
                       {"dilation_mm", mask.dilation_mm}});
  const CropMask crop_mask =
      mask_in_crop_frame(mask, cfg.downsample_factor, cfg.model.input_dims);
  save_fvol(paths.preprocess / "crop_mask.fvol", crop_mask.mask);
  write_json_file(paths.preprocess / "crop.json",
                  json{{"center", center_to_json(crop_mask.center)},
                       {"dims",
                        {crop_mask.mask.dims.nx, crop_mask.mask.dims.ny,
                         crop_mask.mask.dims.nz}}});

  std::vector<int> processed = train_ids;
  processed.insert(processed.end(), val_ids.begin(), val_ids.end());
  processed.insert(processed.end(), test_ids.begin(), test_ids.end());
  std::sort(processed.begin(), processed.end());

  json subjects = json::array();
  double total_in_mask = 0.0;
  for (int id : processed) {
    const LabelGrid skeleton = load_native_subject(paths, id);
    const NormalizedMap crop = preprocess_subject(
        skeleton, mask, cfg.downsample_factor, cfg.model.input_dims);
    const fs::path file = crop_path(paths, id);
    save_fvol(file, crop.grid);
    const int in_mask = in_mask_count(skeleton, mask);
    total_in_mask += in_mask;
    subjects.push_back(json{{"id", subject_id(id)},
                            {"index", id},
                            {"file", rel(paths, file)},
                            {"in_mask_total", in_mask}});
  }
  const double mean_in_mask =
      processed.empty() ? 0.0 : total_in_mask / processed.size();
  write_json_file(paths.preprocess / "manifest.json",
                  json{{"mean_in_mask_total", mean_in_mask},
                       {"split",
                        {{"train", train_ids},
                         {"val", val_ids},
                         {"test", test_ids}}},
                       {"subjects", subjects}});
  std::printf(
      "preprocess: %zu crops (train %zu, val %zu, test %zu), mean in-mask "
      "%.1f, %.1f s\n",
      processed.size(), train_ids.size(), val_ids.size(), test_ids.size(),
      mean_in_mask, timer.seconds());
}

void stage_train(const PipelineConfig& cfg) {
  const StageTimer timer;
  const Paths paths = paths_for(cfg);
  require_artifact(paths.preprocess / "manifest.json", "preprocess");
  const json manifest = read_json_file(paths.preprocess / "manifest.json");
  const CropGeometry geo = load_crop_geometry(cfg);
  const auto train_set =
      load_split_crops(paths, split_ids(manifest, "train"), &geo.crop_mask);
  const auto val_set =
      load_split_crops(paths, split_ids(manifest, "val"), &geo.crop_mask);

  ModelConfig m = cfg.model;
  m.seed = derive_seed(cfg.seed, "train", 0);
  const TrainResult result =
      train(m, train_set, val_set, train_options(cfg, &geo.crop_mask));

  fs::create_directories(paths.train);
  save_checkpoint(paths.train / "model.fvae", m, result.params);
  write_train_report_csv(paths.train / "train_report.csv", result.report);
  const EpochStats& last = result.report.epochs.back();
  std::printf("train: %d epochs, final val recon %.4f, kl %.4f, %.1f s\n",
              m.epochs, last.val_recon, last.val_kl, timer.seconds());
}

void stage_gridsearch(const PipelineConfig& cfg) {
  const StageTimer timer;
  if (!cfg.gridsearch.enabled)
    throw ConfigError("gridsearch.enabled is false in this config");
  const Paths paths = paths_for(cfg);
  require_artifact(paths.preprocess / "manifest.json", "preprocess");
  const json manifest = read_json_file(paths.preprocess / "manifest.json");
  const CropGeometry geo = load_crop_geometry(cfg);
  const auto val_ids = split_ids(manifest, "val");
  const auto train_set =
      load_split_crops(paths, split_ids(manifest, "train"), &geo.crop_mask);
  const auto val_set = load_split_crops(paths, val_ids, &geo.crop_mask);

  // Proxy outliers: validation subjects with one simple surface deleted,
  // preferring the largest size band and widening when it is underpopulated.
  const double mean_in_mask = manifest.at("mean_in_mask_total").get<double>();
  const auto edges = band_edges(cfg, mean_in_mask);
  const int unbounded = std::numeric_limits<int>::max();
  const std::vector<Band> tries{{edges.back(), unbounded},
                                {edges.front(), unbounded},
                                {1, unbounded}};
  std::vector<NormalizedMap> proxies;
  for (const Band& band : tries) {
    proxies.clear();
    Rng rng(derive_seed(cfg.seed, "gsproxy", 0));
    for (int id : val_ids) {
      SyntheticSubject s;
      s.skeleton = load_native_subject(paths, id);
      const auto outcome = delete_ss(s, geo.mask, band, rng);
      if (!outcome) continue;
      const NormalizedMap crop = preprocess_subject(
          outcome->skeleton, geo.mask, cfg.downsample_factor,
          cfg.model.input_dims);
      proxies.push_back(apply_mask(crop, geo.crop_mask));
    }
    if (proxies.size() >= 2) break;
  }
  if (proxies.size() < 2)
    throw RangeError("gridsearch: fewer than 2 proxy outliers available");

  ModelConfig base = cfg.model;
  base.epochs = cfg.gridsearch.epochs;
  base.seed = derive_seed(cfg.seed, "gridsearch", 0);
  const GridSearchResult result = grid_search(
      base, cfg.gridsearch.betas, cfg.gridsearch.latent_dims, train_set,
      val_set, proxies, train_options(cfg, &geo.crop_mask),
      cfg.detect.k_folds);

  fs::create_directories(paths.gridsearch);
  std::string csv = "beta,latent_dim,val_recon,auc,eligible\n";
  char line[160];
  for (const GridSearchRow& r : result.rows) {
    std::snprintf(line, sizeof line, "%.9g,%d,%.9g,%.9g,%d\n", r.beta,
                  r.latent_dim, r.val_recon, r.auc, r.eligible ? 1 : 0);
    csv += line;
  }
  write_text_file(paths.gridsearch / "results.csv", csv);
  write_json_file(paths.gridsearch / "best.json",
                  json{{"beta", result.best.beta},
                       {"latent_dim", result.best.latent_dim},
                       {"proxy_outliers", proxies.size()}});
  std::printf("gridsearch: %zu runs, best beta %.3g latent_dim %d, %.1f s\n",
              result.rows.size(), result.best.beta, result.best.latent_dim,
              timer.seconds());
}

namespace {

// controls stay as references to preprocess crops; altered subjects get
// fresh crops computed from their modified skeletons
void write_deletion_benchmark(const PipelineConfig& cfg, const Paths& paths,
                              const CropGeometry& geo,
                              const std::vector<SyntheticSubject>& test,
                              const std::vector<int>& test_ids, int band_index,
                              Band band) {
  const std::string name = "deletion_" + std::to_string(band_index + 1);
  const fs::path dir = paths.benchmark / name;
  fs::create_directories(dir / "inputs");
  Rng rng(derive_seed(cfg.seed, "delband", band_index));
  const BenchmarkSet set = build_deletion_benchmark(
      test, geo.mask, band, rng, cfg.benchmark.split_ratio);

  json controls = json::array();
  for (const BenchmarkEntry& e : set.controls) {
    const int id = test_ids.at(e.source_index);
    controls.push_back(json{{"id", subject_id(id)},
                            {"file", rel(paths, crop_path(paths, id))}});
  }
  json altered = json::array();
  for (std::size_t i = 0; i < set.altered.size(); ++i) {
    const BenchmarkEntry& e = set.altered[i];
    const NormalizedMap crop = preprocess_subject(
        e.subject.skeleton, geo.mask, cfg.downsample_factor,
        cfg.model.input_dims);
    const fs::path file = dir / "inputs" / (tagged_id("alt", int(i)) + ".fvol");
    save_fvol(file, crop.grid);
    altered.push_back(
        json{{"id", tagged_id("alt", int(i))},
             {"file", rel(paths, file)},
             {"source", subject_id(test_ids.at(e.source_index))},
             {"erased_label", e.deletion->erased_label},
             {"erased_in_mask", e.deletion->erased_in_mask},
             {"erased_total", e.deletion->erased_total}});
  }
  write_json_file(dir / "cohort.json", json{{"kind", "deletion"},
                                            {"band", band_to_json(band)},
                                            {"controls", controls},
                                            {"altered", altered}});
  std::printf("benchmark %s: %zu controls, %zu altered, band [%d, %s)\n",
              name.c_str(), set.controls.size(), set.altered.size(), band.lo,
              band.hi == std::numeric_limits<int>::max()
                  ? "inf"
                  : std::to_string(band.hi).c_str());
}

void write_asymmetry_benchmark(const PipelineConfig& cfg, const Paths& paths,
                               const CropGeometry& geo) {
  const fs::path dir = paths.benchmark / "asymmetry";
  fs::create_directories(dir / "inputs");
  const BenchmarkSet set = build_asymmetry_benchmark(
      cfg.generator, cfg.generator_left, cfg.benchmark.asymmetry_n,
      derive_seed(cfg.seed, "asym", 0));

  const auto emit = [&](const std::vector<BenchmarkEntry>& entries,
                        const char* tag) {
    json out = json::array();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const BenchmarkEntry& e = entries[i];
      const NormalizedMap crop = preprocess_subject(
          e.subject.skeleton, geo.mask, cfg.downsample_factor,
          cfg.model.input_dims);
      const fs::path file =
          dir / "inputs" / (tagged_id(tag, int(i)) + ".fvol");
      save_fvol(file, crop.grid);
      out.push_back(json{{"id", tagged_id(tag, int(i))},
                         {"file", rel(paths, file)},
                         {"seed", e.subject.seed},
                         {"knob_count", e.subject.truth.knob_count}});
    }
    return out;
  };
  const json controls = emit(set.controls, "ctrl");
  const json altered = emit(set.altered, "alt");
  write_json_file(dir / "cohort.json", json{{"kind", "asymmetry"},
                                            {"controls", controls},
                                            {"altered", altered}});
  std::printf("benchmark asymmetry: %zu controls, %zu altered\n",
              set.controls.size(), set.altered.size());
}

void write_interruption_benchmark(const PipelineConfig& cfg,
                                  const Paths& paths, const CropGeometry& geo,
                                  const std::vector<int>& test_ids) {
  const fs::path dir = paths.benchmark / "interruption";
  fs::create_directories(dir / "inputs");

  json controls = json::array();
  for (int id : test_ids)
    controls.push_back(json{{"id", subject_id(id)},
                            {"file", rel(paths, crop_path(paths, id))}});

  GeneratorParams gp = cfg.generator;
  gp.interruption_prob = 1.0;
  json altered = json::array();
  int made = 0;
  for (std::uint64_t stream = 0;
       made < cfg.benchmark.interruption_n && stream < 4096; ++stream) {
    const std::uint64_t seed = derive_seed(cfg.seed, "interrupt", stream);
    const SyntheticSubject s = generate_subject(gp, seed);
    if (!s.truth.interrupted || !s.truth.gap_box) continue;
    const NormalizedMap crop = preprocess_subject(
        s.skeleton, geo.mask, cfg.downsample_factor, cfg.model.input_dims);
    const fs::path file = dir / "inputs" / (tagged_id("int", made) + ".fvol");
    save_fvol(file, crop.grid);
    const BoundingBox gap_crop =
        box_in_crop_frame(*s.truth.gap_box, geo.mask, cfg.downsample_factor,
                          s.skeleton.dims, cfg.model.input_dims);
    altered.push_back(
        json{{"id", tagged_id("int", made)},
             {"file", rel(paths, file)},
             {"seed", seed},
             {"gap_box", box_to_json(*s.truth.gap_box)},
             {"gap_box_crop",
              gap_crop.empty() ? json(nullptr) : box_to_json(gap_crop)}});
    ++made;
  }
  if (made < cfg.benchmark.interruption_n)
    throw RangeError("interruption benchmark: generator produced only " +
                     std::to_string(made) + " interrupted subjects");
  write_json_file(dir / "cohort.json", json{{"kind", "interruption"},
                                            {"controls", controls},
                                            {"altered", altered}});
  std::printf("benchmark interruption: %zu controls, %d altered\n",
              controls.size(), made);
}

}  // namespace

void stage_benchmark(const PipelineConfig& cfg) {
  const StageTimer timer;
  const Paths paths = paths_for(cfg);
  require_artifact(paths.preprocess / "manifest.json", "preprocess");
  const json manifest = read_json_file(paths.preprocess / "manifest.json");
  const CropGeometry geo = load_crop_geometry(cfg);
  const auto test_ids = split_ids(manifest, "test");

  const double mean_in_mask = manifest.at("mean_in_mask_total").get<double>();
  const auto edges = band_edges(cfg, mean_in_mask);
  const int unbounded = std::numeric_limits<int>::max();
  std::vector<Band> bands;
  for (std::size_t k = 0; k < edges.size(); ++k)
    bands.push_back({edges[k], k + 1 < edges.size() ? edges[k + 1] : unbounded});

  fs::create_directories(paths.benchmark);
  json bands_json = json::array();
  for (const Band& b : bands) bands_json.push_back(band_to_json(b));
  write_json_file(
      paths.benchmark / "bands.json",
      json{{"paper_bands", cfg.benchmark.paper_bands},
           {"paper_mean_voxels", cfg.benchmark.paper_mean_voxels},
           {"mean_in_mask_total", mean_in_mask},
           {"scale", mean_in_mask / cfg.benchmark.paper_mean_voxels},
           {"edges", edges},
           {"bands", bands_json}});

  std::vector<SyntheticSubject> test;
  test.reserve(test_ids.size());
  for (int id : test_ids) {
    SyntheticSubject s;
    s.skeleton = load_native_subject(paths, id);
    test.push_back(std::move(s));
  }

  std::vector<std::string> names;
  for (std::size_t k = 0; k < bands.size(); ++k) {
    write_deletion_benchmark(cfg, paths, geo, test, test_ids, int(k),
                             bands[k]);
    names.push_back("deletion_" + std::to_string(k + 1));
  }
  test.clear();
  test.shrink_to_fit();

  write_asymmetry_benchmark(cfg, paths, geo);
  names.push_back("asymmetry");
  write_interruption_benchmark(cfg, paths, geo, test_ids);
  names.push_back("interruption");

  write_json_file(paths.benchmark / "benchmarks.json",
                  json{{"benchmarks", names}});
  std::printf("benchmark: %zu sets in %.1f s\n", names.size(),
              timer.seconds());
}

}  // namespace fold::pipe
