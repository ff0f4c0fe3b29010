#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fold/pipeline.hpp"
#include "fold/preprocess.hpp"
#include "json.hpp"

namespace fold::pipe {

struct Paths {
  std::filesystem::path root;
  std::filesystem::path synth, preprocess, train, gridsearch, benchmark,
      detect, explore, report;
};

Paths paths_for(const PipelineConfig& cfg);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path,
                     const nlohmann::json& j);
void write_text_file(const std::filesystem::path& path,
                     const std::string& text);

// MissingStageError naming the stage to run when `path` is absent
void require_artifact(const std::filesystem::path& path,
                      const std::string& stage);

std::string subject_id(int i);

// preprocess-stage geometry bundle reloaded by later stages
struct CropGeometry {
  RegionMask mask;       // native frame
  CropMask crop_mask;    // crop frame
  Dims3 native_dims;
};

CropGeometry load_crop_geometry(const PipelineConfig& cfg);
std::vector<int> split_ids(const nlohmann::json& manifest, const char* key);

// crop loaded from file, optionally zeroed outside the region support
NormalizedMap load_crop(const std::filesystem::path& path,
                        const CropMask* mask);
std::vector<NormalizedMap> load_split_crops(const Paths& paths,
                                            const std::vector<int>& ids,
                                            const CropMask* mask);

// derived half-open size-band edges: paper bands scaled by in-mask mean
std::vector<int> band_edges(const PipelineConfig& cfg,
                            double mean_in_mask_total);

nlohmann::json box_to_json(const BoundingBox& b);
BoundingBox box_from_json(const nlohmann::json& j);

void stage_synth(const PipelineConfig& cfg);
void stage_preprocess(const PipelineConfig& cfg);
void stage_train(const PipelineConfig& cfg);
void stage_gridsearch(const PipelineConfig& cfg);
void stage_benchmark(const PipelineConfig& cfg);
void stage_detect(const PipelineConfig& cfg);
void stage_explore(const PipelineConfig& cfg);
void stage_report(const PipelineConfig& cfg);

}  // namespace fold::pipe
