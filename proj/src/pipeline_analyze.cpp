#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "fold/detect.hpp"
#include "fold/error.hpp"
#include "fold/explore.hpp"
#include "fold/io.hpp"
#include "fold/rng.hpp"
#include "pipeline_internal.hpp"

namespace fold::pipe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GroupData {
  std::vector<std::string> ids;
  std::vector<NormalizedMap> crops;
  std::vector<json> entries;
};

GroupData load_group(const Paths& paths, const json& entries,
                     const CropMask& mask) {
  GroupData g;
  for (const json& e : entries) {
    g.ids.push_back(e.at("id").get<std::string>());
    const fs::path file = paths.root / e.at("file").get<std::string>();
    require_artifact(file, "benchmark");
    g.crops.push_back(load_crop(file, &mask));
    g.entries.push_back(e);
  }
  return g;
}

double mean_of(const std::vector<double>& v, std::size_t begin,
               std::size_t end) {
  if (end <= begin) return 0.0;
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += v[i];
  return s / double(end - begin);
}

double mass_in_box(const ScalarGrid& g, const BoundingBox& box) {
  double s = 0.0;
  for (int z = box.z0; z <= box.z1; ++z)
    for (int y = box.y0; y <= box.y1; ++y)
      for (int x = box.x0; x <= box.x1; ++x)
        if (g.in_bounds(x, y, z)) s += g.at(x, y, z);
  return s;
}

double total_mass(const ScalarGrid& g) {
  double s = 0.0;
  for (float v : g.data) s += v;
  return s;
}

void detect_benchmark(const PipelineConfig& cfg, const Paths& paths,
                      const CropGeometry& geo, const Checkpoint& ck,
                      const std::string& name, int bench_index) {
  const fs::path bench_dir = paths.benchmark / name;
  require_artifact(bench_dir / "cohort.json", "benchmark");
  const json cohort = read_json_file(bench_dir / "cohort.json");
  const GroupData controls =
      load_group(paths, cohort.at("controls"), geo.crop_mask);
  const GroupData altered =
      load_group(paths, cohort.at("altered"), geo.crop_mask);
  const std::size_t n_ctrl = controls.crops.size();
  const std::size_t n_alt = altered.crops.size();

  FeatureMatrix codes;
  std::vector<double> recon_errors;
  std::vector<int> labels;
  const auto add_group = [&](const GroupData& g, int label) {
    for (const NormalizedMap& x : g.crops) {
      codes.push_back(encode(ck.config, ck.params, x).mu);
      recon_errors.push_back(reconstruction_error(ck.config, ck.params, x));
      labels.push_back(label);
    }
  };
  add_group(controls, 0);
  add_group(altered, 1);

  const SvmCvResult svm = linear_svm_cv(
      codes, labels, cfg.detect.k_folds, derive_seed(cfg.seed, "svm",
                                                     bench_index));
  const std::vector<double> ctrl_err(recon_errors.begin(),
                                     recon_errors.begin() + n_ctrl);
  const std::vector<double> alt_err(recon_errors.begin() + n_ctrl,
                                    recon_errors.end());
  const TestResult ks = ks_test(ctrl_err, alt_err);
  const TestResult mwu = mwu_test(ctrl_err, alt_err);

  const Pca2dResult pca = pca2d(codes);
  FeatureMatrix coords;
  coords.reserve(pca.coords.size());
  for (const auto& c : pca.coords)
    coords.push_back({c[0], c[1]});
  const OcsvmResult ocsvm = one_class_svm(coords, cfg.detect.nu);
  const std::vector<double> iforest = isolation_forest_scores(
      coords, cfg.detect.iforest_trees, cfg.detect.iforest_subsample,
      derive_seed(cfg.seed, "iforest", bench_index));
  const FeatureMatrix ctrl_coords(coords.begin(), coords.begin() + n_ctrl);
  const std::vector<OutlierCount> repeat_counts = repeated_outlier_controls(
      ctrl_coords, cfg.detect.outlier_repeats,
      derive_seed(cfg.seed, "repeats", bench_index), cfg.detect.nu);

  const fs::path out_dir = paths.detect / name;
  fs::create_directories(out_dir);

  std::string scores =
      "id,group,svm_decision,recon_error,pca_x,pca_y,iforest,ocsvm_decision,"
      "ocsvm_flag\n";
  char line[320];
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const bool is_ctrl = i < n_ctrl;
    const std::string& id =
        is_ctrl ? controls.ids[i] : altered.ids[i - n_ctrl];
    std::snprintf(line, sizeof line,
                  "%s,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%d\n", id.c_str(),
                  is_ctrl ? "control" : "altered", svm.decision_values[i],
                  recon_errors[i], coords[i][0], coords[i][1], iforest[i],
                  ocsvm.decision[i], ocsvm.flagged[i] ? 1 : 0);
    scores += line;
  }
  write_text_file(out_dir / "scores.csv", scores);

  std::string roc = "fpr,tpr\n";
  for (const RocPoint& p : svm.roc) {
    std::snprintf(line, sizeof line, "%.9g,%.9g\n", p.fpr, p.tpr);
    roc += line;
  }
  write_text_file(out_dir / "roc.csv", roc);

  std::string outliers = "id,count,frequency\n";
  for (const OutlierCount& oc : repeat_counts) {
    std::snprintf(line, sizeof line, "%s,%d,%.9g\n",
                  controls.ids[oc.index].c_str(), oc.count,
                  double(oc.count) / cfg.detect.outlier_repeats);
    outliers += line;
  }
  write_text_file(out_dir / "control_outliers.csv", outliers);

  int flagged_ctrl = 0, flagged_alt = 0;
  for (std::size_t i = 0; i < coords.size(); ++i)
    (i < n_ctrl ? flagged_ctrl : flagged_alt) += ocsvm.flagged[i] ? 1 : 0;

  json summary{
      {"kind", cohort.at("kind")},
      {"n_control", n_ctrl},
      {"n_altered", n_alt},
      {"auc", svm.auc},
      {"ks", {{"statistic", ks.statistic}, {"p_value", ks.p_value}}},
      {"mwu", {{"statistic", mwu.statistic}, {"p_value", mwu.p_value}}},
      {"recon_error",
       {{"control_mean", mean_of(recon_errors, 0, n_ctrl)},
        {"altered_mean", mean_of(recon_errors, n_ctrl, recon_errors.size())}}},
      {"svm_mean_abs_weights", svm.mean_abs_weights},
      {"pca_explained", {pca.explained[0], pca.explained[1]}},
      {"ocsvm",
       {{"gamma", ocsvm.gamma},
        {"rho", ocsvm.rho},
        {"iterations", ocsvm.iterations},
        {"converged", ocsvm.converged},
        {"flagged_control", flagged_ctrl},
        {"flagged_altered", flagged_alt}}},
      {"iforest",
       {{"control_mean", mean_of(iforest, 0, n_ctrl)},
        {"altered_mean", mean_of(iforest, n_ctrl, iforest.size())}}}};
  if (cohort.contains("band")) summary["band"] = cohort.at("band");

  // interrupted subjects additionally get residual maps and the fraction of
  // invented mass that falls inside the true gap
  if (cohort.at("kind").get<std::string>() == "interruption") {
    fs::create_directories(out_dir / "residuals");
    json per_subject = json::array();
    int at_threshold = 0;
    for (std::size_t i = 0; i < n_alt; ++i) {
      const NormalizedMap& x = altered.crops[i];
      const ScalarGrid recon = decode(ck.config, ck.params,
                                      codes[n_ctrl + i], x.grid.voxel_mm);
      const ResidualMaps res =
          residual_maps(x.grid, recon, cfg.detect.noise_floor);
      const std::string& id = altered.ids[i];
      save_fvol(out_dir / "residuals" / (id + "_omissions.fvol"),
                res.omissions);
      save_fvol(out_dir / "residuals" / (id + "_additions.fvol"),
                res.additions);
      double fraction = 0.0;
      const json& gap = altered.entries[i].at("gap_box_crop");
      const double total = total_mass(res.additions);
      if (!gap.is_null() && total > 0.0)
        fraction = mass_in_box(res.additions, box_from_json(gap)) / total;
      if (fraction >= 0.3) ++at_threshold;
      per_subject.push_back(json{{"id", id}, {"gap_fraction", fraction}});
    }
    summary["gap_fill"] = json{
        {"per_subject", per_subject},
        {"mass_threshold", 0.3},
        {"subjects_at_threshold", at_threshold},
        {"fraction_at_threshold",
         n_alt ? double(at_threshold) / double(n_alt) : 0.0}};
  }

  write_json_file(out_dir / "summary.json", summary);
  std::printf("detect %s: auc %.3f, ks p %.3g, mwu p %.3g\n", name.c_str(),
              svm.auc, ks.p_value, mwu.p_value);
}

}  // namespace

void stage_detect(const PipelineConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const Paths paths = paths_for(cfg);
  require_artifact(paths.train / "model.fvae", "train");
  require_artifact(paths.benchmark / "benchmarks.json", "benchmark");
  const Checkpoint ck = load_checkpoint(paths.train / "model.fvae");
  const CropGeometry geo = load_crop_geometry(cfg);
  const json blist = read_json_file(paths.benchmark / "benchmarks.json");
  int bench_index = 0;
  for (const json& name : blist.at("benchmarks"))
    detect_benchmark(cfg, paths, geo, ck, name.get<std::string>(),
                     bench_index++);
  std::printf("detect: %d benchmarks in %.1f s\n", bench_index,
              std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            t0)
                  .count());
}

namespace {

// render one decoded volume at every requested depth, collecting frame paths
json render_frames(const ScalarGrid& g, const std::vector<int>& depths,
                   const fs::path& frames_dir, const std::string& prefix) {
  render_slices(g, depths, frames_dir, prefix);
  json files = json::array();
  char buf[64];
  for (int d : depths) {
    std::snprintf(buf, sizeof buf, "%s_z%03d.pgm", prefix.c_str(), d);
    files.push_back(std::string("frames/") + buf);
  }
  return files;
}

}  // namespace

void stage_explore(const PipelineConfig& cfg) {
  const Paths paths = paths_for(cfg);
  require_artifact(paths.train / "model.fvae", "train");
  require_artifact(paths.preprocess / "manifest.json", "preprocess");
  require_artifact(paths.detect / "asymmetry" / "summary.json", "detect");
  const Checkpoint ck = load_checkpoint(paths.train / "model.fvae");
  const CropGeometry geo = load_crop_geometry(cfg);
  const json manifest = read_json_file(paths.preprocess / "manifest.json");
  const auto test_ids = split_ids(manifest, "test");
  if (test_ids.size() < 2)
    throw RangeError("explore: need at least 2 test subjects");

  const auto test_set = load_split_crops(paths, test_ids, &geo.crop_mask);
  const Vec3f voxel = test_set.front().grid.voxel_mm;
  FeatureMatrix codes;
  codes.reserve(test_set.size());
  for (const NormalizedMap& x : test_set)
    codes.push_back(encode(ck.config, ck.params, x).mu);
  const std::vector<double> mean = latent_mean(codes);

  std::vector<int> depths = cfg.explore.slice_depths;
  if (depths.empty()) {
    const int nz = ck.config.input_dims.nz;
    depths = {nz / 3, 2 * nz / 3};
  }

  const fs::path frames_dir = paths.explore / "frames";
  fs::create_directories(frames_dir);

  const auto zs =
      interpolate(codes[0], codes[1], cfg.explore.interp_steps);
  json interp_frames = json::array();
  char prefix[32];
  for (std::size_t k = 0; k < zs.size(); ++k) {
    const ScalarGrid g = decode(ck.config, ck.params, zs[k], voxel);
    std::snprintf(prefix, sizeof prefix, "interp_%02d", int(k));
    interp_frames.push_back(render_frames(g, depths, frames_dir, prefix));
  }

  // traverse the dimension the asymmetry classifier leans on hardest
  const json asym = read_json_file(paths.detect / "asymmetry" /
                                   "summary.json");
  const std::vector<double> weights =
      asym.at("svm_mean_abs_weights").get<std::vector<double>>();
  if (weights.size() != mean.size())
    throw FormatError("asymmetry summary weight count differs from the "
                      "checkpoint latent size");
  const int dim = int(std::max_element(weights.begin(), weights.end()) -
                      weights.begin());
  double v_min = std::numeric_limits<double>::infinity();
  double v_max = -std::numeric_limits<double>::infinity();
  for (const auto& c : codes) {
    v_min = std::min(v_min, c[dim]);
    v_max = std::max(v_max, c[dim]);
  }
  const Traversal tr =
      dimension_traversal(ck.config, ck.params, mean, dim, v_min, v_max,
                          cfg.explore.traversal_steps);
  json traversal_frames = json::array();
  for (std::size_t k = 0; k < tr.decoded.size(); ++k) {
    std::snprintf(prefix, sizeof prefix, "traversal_%02d", int(k));
    traversal_frames.push_back(
        render_frames(tr.decoded[k], depths, frames_dir, prefix));
  }
  save_fvol(paths.explore / "traversal_first.fvol", tr.decoded.front());
  save_fvol(paths.explore / "traversal_last.fvol", tr.decoded.back());

  const BinaryGrid b0 = binarize(tr.decoded.front());
  const BinaryGrid b1 = binarize(tr.decoded.back());
  std::size_t diff = 0, support = 0;
  for (std::size_t i = 0; i < geo.crop_mask.mask.data.size(); ++i) {
    if (!geo.crop_mask.mask.data[i]) continue;
    ++support;
    if ((b0.data[i] != 0) != (b1.data[i] != 0)) ++diff;
  }
  const double diff_fraction =
      support ? double(diff) / double(support) : 0.0;

  write_json_file(
      paths.explore / "manifest.json",
      json{{"mean_code", mean},
           {"slice_depths", depths},
           {"interpolation",
            {{"from", subject_id(test_ids[0])},
             {"to", subject_id(test_ids[1])},
             {"steps", cfg.explore.interp_steps},
             {"frames", interp_frames}}},
           {"traversal",
            {{"dim", dim},
             {"values", tr.values},
             {"frames", traversal_frames},
             {"first_volume", "traversal_first.fvol"},
             {"last_volume", "traversal_last.fvol"},
             {"endpoint_diff_in_mask", diff_fraction}}}});
  std::printf(
      "explore: traversal dim %d over [%.3f, %.3f], endpoint diff %.1f%% of "
      "the support\n",
      dim, v_min, v_max, 100.0 * diff_fraction);
}

}  // namespace fold::pipe
