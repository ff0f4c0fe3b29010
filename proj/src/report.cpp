#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fold/error.hpp"
#include "fold/sha256.hpp"
#include "pipeline_internal.hpp"

namespace fold::pipe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string band_label(const json& band) {
  if (band.is_null()) return "";
  const json& hi = band.at("hi");
  return "[" + std::to_string(band.at("lo").get<int>()) + ", " +
         (hi.is_null() ? "inf" : std::to_string(hi.get<int>())) + ")";
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

void stage_report(const PipelineConfig& cfg) {
  const Paths paths = paths_for(cfg);
  require_artifact(paths.train / "train_report.csv", "train");
  require_artifact(paths.benchmark / "benchmarks.json", "benchmark");
  const json blist = read_json_file(paths.benchmark / "benchmarks.json");

  std::string md = "# Folding variability report\n\n";

  md += "## Run\n\n";
  md += "| setting | value |\n|---|---|\n";
  md += "| region | " + cfg.region + " |\n";
  md += "| seed | " + std::to_string(cfg.seed) + " |\n";
  md += "| cohort | " + std::to_string(cfg.cohort) + " |\n";
  md += "| split train/val/test | " + std::to_string(cfg.split.train) + "/" +
        std::to_string(cfg.split.val) + "/" + std::to_string(cfg.split.test) +
        " |\n";
  md += "| native dims | " + to_string(cfg.generator.dims) + " |\n";
  md += "| crop dims | " + to_string(cfg.model.input_dims) + " |\n";
  md += "| downsample factor | " + std::to_string(cfg.downsample_factor) +
        " |\n";
  md += "| channels | " + std::to_string(cfg.model.channels[0]) + "," +
        std::to_string(cfg.model.channels[1]) + "," +
        std::to_string(cfg.model.channels[2]) + " |\n";
  md += "| latent dim | " + std::to_string(cfg.model.latent_dim) + " |\n";
  md += "| beta | " + fmt("%.6g", cfg.model.beta) + " |\n";
  md += "| learning rate | " + fmt("%.6g", cfg.model.learning_rate) + " |\n";
  md += "| epochs | " + std::to_string(cfg.model.epochs) + " |\n";
  md += "| batch size | " + std::to_string(cfg.model.batch_size) + " |\n";
  md += "| augment degrees | " + fmt("%.6g", cfg.augment_deg) + " |\n\n";

  if (fs::exists(paths.gridsearch / "results.csv")) {
    md += "## Grid search\n\n";
    md += "| beta | latent dim | val recon | AUC | eligible |\n";
    md += "|---|---|---|---|---|\n";
    const auto lines = read_lines(paths.gridsearch / "results.csv");
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const auto f = split_csv(lines[i]);
      if (f.size() != 5) continue;
      md += "| " + f[0] + " | " + f[1] + " | " + f[2] + " | " + f[3] + " | " +
            (f[4] == "1" ? "yes" : "no") + " |\n";
    }
    const json best = read_json_file(paths.gridsearch / "best.json");
    md += "\nSelected: beta " + fmt("%.6g", best.at("beta").get<double>()) +
          ", latent dim " +
          std::to_string(best.at("latent_dim").get<int>()) + ".\n\n";
  }

  md += "## Training\n\n";
  const auto train_lines = read_lines(paths.train / "train_report.csv");
  if (train_lines.size() >= 3) {
    const auto t = split_csv(train_lines[train_lines.size() - 2]);
    const auto v = split_csv(train_lines[train_lines.size() - 1]);
    if (t.size() == 5 && v.size() == 5)
      md += "Final epoch " + t[0] + ": train recon " + t[1] + ", train KL " +
            t[2] + ", val recon " + v[1] + ", val KL " + v[2] + ".\n\n";
  }

  md += "## Benchmarks\n\n";
  md += "| benchmark | band | controls | altered | latent AUC | KS D | KS p "
        "| MWU U | MWU p |\n";
  md += "|---|---|---|---|---|---|---|---|---|\n";
  std::vector<std::pair<std::string, json>> summaries;
  for (const json& name_j : blist.at("benchmarks")) {
    const std::string name = name_j.get<std::string>();
    const fs::path summary_path = paths.detect / name / "summary.json";
    require_artifact(summary_path, "detect");
    const json s = read_json_file(summary_path);
    summaries.emplace_back(name, s);
    md += "| " + name + " | " +
          (s.contains("band") ? band_label(s.at("band")) : "") + " | " +
          std::to_string(s.at("n_control").get<int>()) + " | " +
          std::to_string(s.at("n_altered").get<int>()) + " | " +
          fmt("%.3f", s.at("auc").get<double>()) + " | " +
          fmt("%.3g", s.at("ks").at("statistic").get<double>()) + " | " +
          fmt("%.3g", s.at("ks").at("p_value").get<double>()) + " | " +
          fmt("%.6g", s.at("mwu").at("statistic").get<double>()) + " | " +
          fmt("%.3g", s.at("mwu").at("p_value").get<double>()) + " |\n";
  }
  md += "\n";

  for (const auto& [name, s] : summaries) {
    if (!s.contains("gap_fill")) continue;
    const json& gf = s.at("gap_fill");
    md += "Gap filling (" + name + "): additions mass inside the true gap "
          "reached >= " +
          fmt("%.0f", 100.0 * gf.at("mass_threshold").get<double>()) +
          "% for " + std::to_string(gf.at("subjects_at_threshold").get<int>()) +
          " of " + std::to_string(s.at("n_altered").get<int>()) +
          " interrupted subjects (" +
          fmt("%.1f", 100.0 * gf.at("fraction_at_threshold").get<double>()) +
          "%).\n\n";
  }

  md += "## Outlier detectors on the 2D projection\n\n";
  md += "| benchmark | OCSVM flagged (controls) | OCSVM flagged (altered) | "
        "iforest mean (controls) | iforest mean (altered) |\n";
  md += "|---|---|---|---|---|\n";
  for (const auto& [name, s] : summaries) {
    const json& oc = s.at("ocsvm");
    const json& iso = s.at("iforest");
    md += "| " + name + " | " +
          std::to_string(oc.at("flagged_control").get<int>()) + "/" +
          std::to_string(s.at("n_control").get<int>()) + " | " +
          std::to_string(oc.at("flagged_altered").get<int>()) + "/" +
          std::to_string(s.at("n_altered").get<int>()) + " | " +
          fmt("%.3f", iso.at("control_mean").get<double>()) + " | " +
          fmt("%.3f", iso.at("altered_mean").get<double>()) + " |\n";
  }
  md += "\n";

  if (fs::exists(paths.explore / "manifest.json")) {
    const json em = read_json_file(paths.explore / "manifest.json");
    const json& tr = em.at("traversal");
    md += "## Latent exploration\n\n";
    md += "Traversal along dimension " +
          std::to_string(tr.at("dim").get<int>()) +
          "; binarized endpoints differ on " +
          fmt("%.1f",
              100.0 * tr.at("endpoint_diff_in_mask").get<double>()) +
          "% of the region support.\n\n";
  }

  // content hashes over everything but this stage's own output
  md += "## Artifacts\n\n";
  md += "| path | sha256 |\n|---|---|\n";
  std::vector<std::pair<std::string, fs::path>> files;
  for (const auto& entry : fs::recursive_directory_iterator(paths.root)) {
    if (!entry.is_regular_file()) continue;
    const fs::path p = entry.path();
    const std::string rel_path = fs::relative(p, paths.root).generic_string();
    if (rel_path == "lock" || rel_path.rfind("report/", 0) == 0) continue;
    files.emplace_back(rel_path, p);
  }
  std::sort(files.begin(), files.end());
  for (const auto& [rel_path, p] : files)
    md += "| " + rel_path + " | " + sha256_file_hex(p) + " |\n";

  fs::create_directories(paths.report);
  write_text_file(paths.report / "report.md", md);
  std::printf("report: %zu artifacts hashed\n", files.size());
}

}  // namespace fold::pipe
