#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fold/grid.hpp"
#include "fold/preprocess.hpp"

namespace fold {

struct ModelConfig {
  Dims3 input_dims{32, 32, 40};
  std::array<int, 3> channels{16, 32, 64};
  int kernel = 3;  // fixed by the architecture, here for the record
  int stride = 2;
  int latent_dim = 16;
  double beta = 2.0;
  double learning_rate = 1e-4;
  int epochs = 40;
  int batch_size = 16;
  std::uint64_t seed = 0;
};

// ConfigError unless: dims positive and divisible by 8, latent_dim >= 1,
// beta >= 0, kernel 3, stride 2, positive channels/epochs/batch
void validate(const ModelConfig& cfg);

// Learnable tensors. Declaration order is the checkpoint order. Encoder convs
// gather with stride 2; decoder convs are their adjoints (scatter), so dec*_w
// keep the [deep][shallow][3x3x3] layout and dec*_b live on the shallow side.
template <class S>
struct ParamsBase {
  std::vector<S> enc1_w, enc1_b;
  std::vector<S> enc2_w, enc2_b;
  std::vector<S> enc3_w, enc3_b;
  std::vector<S> mu_w, mu_b;
  std::vector<S> logvar_w, logvar_b;
  std::vector<S> dec0_w, dec0_b;
  std::vector<S> dec1_w, dec1_b;
  std::vector<S> dec2_w, dec2_b;
  std::vector<S> dec3_w, dec3_b;

  std::array<std::vector<S>*, 18> all() {
    return {&enc1_w, &enc1_b, &enc2_w, &enc2_b, &enc3_w,    &enc3_b,
            &mu_w,   &mu_b,   &logvar_w, &logvar_b, &dec0_w, &dec0_b,
            &dec1_w, &dec1_b, &dec2_w, &dec2_b, &dec3_w,    &dec3_b};
  }
  std::array<const std::vector<S>*, 18> all() const {
    return {&enc1_w, &enc1_b, &enc2_w, &enc2_b, &enc3_w,    &enc3_b,
            &mu_w,   &mu_b,   &logvar_w, &logvar_b, &dec0_w, &dec0_b,
            &dec1_w, &dec1_b, &dec2_w, &dec2_b, &dec3_w,    &dec3_b};
  }
};

using Parameters = ParamsBase<float>;

struct TensorShape {
  std::string name;
  std::vector<int> dims;
  std::size_t count = 0;
};

// shapes in checkpoint order
std::vector<TensorShape> tensor_shapes(const ModelConfig& cfg);

Parameters init_parameters(const ModelConfig& cfg);

struct LatentCode {
  std::vector<double> mu, logvar;
};

LatentCode encode(const ModelConfig& cfg, const Parameters& p,
                  const NormalizedMap& x);

ScalarGrid decode(const ModelConfig& cfg, const Parameters& p,
                  const std::vector<double>& z,
                  Vec3f voxel_mm = {1.0f, 1.0f, 1.0f});

// z = mu + exp(logvar/2) * eps
std::vector<double> reparameterize(const LatentCode& code,
                                   const std::vector<double>& eps);

// KL(q || N(0,I)) = -0.5 * sum(1 + logvar - mu^2 - exp(logvar))
double kl_divergence(const LatentCode& code);

struct LossParts {
  double recon = 0.0;  // sum of squared errors
  double kl = 0.0;
  double total = 0.0;  // recon + beta * kl
};

// loss with a fixed noise draw; eps must have latent_dim entries
LossParts loss(const ModelConfig& cfg, const Parameters& p,
               const NormalizedMap& x, const std::vector<double>& eps);

// posterior-mean reconstruction SSE (eps = 0)
double reconstruction_error(const ModelConfig& cfg, const Parameters& p,
                            const NormalizedMap& x);

struct EpochStats {
  int epoch = 0;
  double train_recon = 0.0, train_kl = 0.0, train_total = 0.0;
  double val_recon = 0.0, val_kl = 0.0, val_total = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
};

struct TrainOptions {
  const CropMask* augment_mask = nullptr;  // enables rotation augmentation
  double augment_deg = 10.0;
  int threads = 1;  // batch fan-out; gradient reduction order is fixed
  bool verbose = false;
};

struct TrainResult {
  Parameters params;
  TrainReport report;
};

// Adam on the batch-mean total loss. Identical (config, seed, data) give
// bitwise-identical parameters regardless of the thread count.
TrainResult train(const ModelConfig& cfg,
                  const std::vector<NormalizedMap>& train_set,
                  const std::vector<NormalizedMap>& val_set,
                  const TrainOptions& opt = {});

struct GradCheckOptions {
  int count = 50;
  double h = 1e-3;
  std::uint64_t seed = 1;
  bool corrupt = false;  // scale analytic grads by 1.01 to prove detection
};

// max relative central-difference error over `count` sampled parameters,
// computed in double precision; relative error uses max(|a|,|b|,1e-8)
double grad_check(const ModelConfig& cfg, const Parameters& p,
                  const NormalizedMap& x, const GradCheckOptions& opt = {});

// Binary container, magic "FVAE0001": u32 tensor count, per tensor u32 rank
// then u32 dims, then all payloads as little-endian f32 in declaration order.
// The ModelConfig rides in a JSON sidecar next to it (.json extension).
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const Parameters& p);

struct Checkpoint {
  ModelConfig config;
  Parameters params;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

// rows: epoch, recon, kl, total, split ("train" then "val" per epoch)
void write_train_report_csv(const std::filesystem::path& path,
                            const TrainReport& report);

struct GridSearchRow {
  double beta = 0.0;
  int latent_dim = 0;
  double val_recon = 0.0;
  double auc = 0.0;
  bool eligible = false;
};

struct GridSearchResult {
  ModelConfig best;
  std::vector<GridSearchRow> rows;
};

// Trains one model per (beta, latent_dim). Eligible = mean val recon within
// 1.25x the grid minimum; best = max latent-SVM AUC (val codes vs proxy
// outlier codes) among eligible, earliest scan position on ties.
GridSearchResult grid_search(const ModelConfig& base,
                             const std::vector<double>& betas,
                             const std::vector<int>& latent_dims,
                             const std::vector<NormalizedMap>& train_set,
                             const std::vector<NormalizedMap>& val_set,
                             const std::vector<NormalizedMap>& proxy_outliers,
                             const TrainOptions& opt = {}, int svm_folds = 5);

}  // namespace fold
