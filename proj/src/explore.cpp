#include "fold/explore.hpp"

#include <string>

#include "fold/error.hpp"

namespace fold {

std::vector<double> latent_mean(
    const std::vector<std::vector<double>>& codes) {
  if (codes.empty()) throw RangeError("latent_mean: no codes");
  const std::size_t L = codes.front().size();
  std::vector<double> mean(L, 0.0);
  for (const auto& c : codes) {
    if (c.size() != L) throw RangeError("latent_mean: ragged code list");
    for (std::size_t i = 0; i < L; ++i) mean[i] += c[i];
  }
  for (double& m : mean) m /= double(codes.size());
  return mean;
}

std::vector<std::vector<double>> interpolate(const std::vector<double>& a,
                                             const std::vector<double>& b,
                                             int steps) {
  if (a.size() != b.size())
    throw RangeError("interpolate: endpoint lengths differ");
  if (steps < 2) throw RangeError("interpolate: steps must be >= 2");
  std::vector<std::vector<double>> out;
  out.reserve(steps);
  for (int k = 0; k < steps; ++k) {
    const double t = double(k) / double(steps - 1);
    std::vector<double> z(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      z[i] = (1.0 - t) * a[i] + t * b[i];
    out.push_back(std::move(z));
  }
  return out;
}

Traversal dimension_traversal(const ModelConfig& cfg, const Parameters& p,
                              const std::vector<double>& base, int dim,
                              double v_min, double v_max, int steps) {
  if (int(base.size()) != cfg.latent_dim)
    throw RangeError("dimension_traversal: base length " +
                     std::to_string(base.size()) + " != latent_dim " +
                     std::to_string(cfg.latent_dim));
  if (dim < 0 || dim >= cfg.latent_dim)
    throw RangeError("dimension_traversal: dim " + std::to_string(dim) +
                     " out of range");
  if (v_min > v_max) throw RangeError("dimension_traversal: v_min > v_max");
  if (steps < 2) throw RangeError("dimension_traversal: steps must be >= 2");

  Traversal tr;
  tr.base = base;
  tr.dim = dim;
  for (int k = 0; k < steps; ++k) {
    const double t = double(k) / double(steps - 1);
    tr.values.push_back(v_min + t * (v_max - v_min));
  }
  for (double v : tr.values) {
    std::vector<double> z = base;
    z[dim] = v;
    tr.decoded.push_back(decode(cfg, p, z));
  }
  return tr;
}

BinaryGrid binarize(const ScalarGrid& x, float threshold) {
  BinaryGrid out(x.dims, x.voxel_mm);
  for (std::size_t i = 0; i < x.data.size(); ++i)
    out.data[i] = x.data[i] >= threshold ? 1 : 0;
  return out;
}

}  // namespace fold
