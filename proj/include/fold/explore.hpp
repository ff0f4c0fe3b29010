#pragma once

#include <filesystem>
#include <vector>

#include "fold/grid.hpp"
#include "fold/vae.hpp"

namespace fold {

// per-dimension arithmetic mean; RangeError on empty or ragged input
std::vector<double> latent_mean(const std::vector<std::vector<double>>& codes);

// z(t) = (1-t)*a + t*b at t = k/(steps-1), k = 0..steps-1
std::vector<std::vector<double>> interpolate(const std::vector<double>& a,
                                             const std::vector<double>& b,
                                             int steps);

struct Traversal {
  std::vector<double> base;
  int dim = 0;
  std::vector<double> values;
  std::vector<ScalarGrid> decoded;  // one per value, posterior mean
};

Traversal dimension_traversal(const ModelConfig& cfg, const Parameters& p,
                              const std::vector<double>& base, int dim,
                              double v_min, double v_max, int steps);

// voxel set iff value >= threshold (boundary inclusive)
BinaryGrid binarize(const ScalarGrid& x, float threshold = 0.4f);

// One 8-bit grayscale PGM (binary P5) per requested depth. Axial view:
// slices of constant third coordinate, rows = y, columns = x. Intensities
// min-max scaled over the whole volume; a constant volume renders as 0.
void render_slices(const ScalarGrid& g, const std::vector<int>& depths,
                   const std::filesystem::path& dir,
                   const std::string& prefix);

// helper shared with the pipeline: scale volume to bytes with the same rule
std::vector<std::uint8_t> slice_bytes(const ScalarGrid& g, int depth);

}  // namespace fold
