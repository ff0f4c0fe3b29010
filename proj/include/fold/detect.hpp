#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fold/grid.hpp"

namespace fold {

using FeatureMatrix = std::vector<std::vector<double>>;

struct RocPoint {
  double fpr = 0.0, tpr = 0.0;
};

// rank-based AUC; ties between the groups count one half
double auc_from_scores(const std::vector<double>& scores,
                       const std::vector<int>& labels);

std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                const std::vector<int>& labels);

struct SvmCvResult {
  double auc = 0.0;
  std::vector<RocPoint> roc;
  std::vector<double> decision_values;   // pooled out-of-fold, input order
  std::vector<double> mean_abs_weights;  // standardized |w|, fold-averaged
};

// Linear SVM (hinge + L2) trained with deterministic epoch-shuffled
// subgradient descent under stratified k-fold CV. Decision values are pooled
// across held-out folds and scored with one ROC.
SvmCvResult linear_svm_cv(const FeatureMatrix& X, const std::vector<int>& y,
                          int k_folds, std::uint64_t seed);

struct Pca2dResult {
  std::vector<std::array<double, 2>> coords;
  std::array<std::vector<double>, 2> axes;  // unit eigenvectors
  std::array<double, 2> explained{0.0, 0.0};
};

// top-2 principal axes of the mean-centered data; the largest-magnitude
// loading of each axis is made positive so signs are reproducible
Pca2dResult pca2d(const FeatureMatrix& X);

// anomaly scores in (0,1); higher = more isolated
std::vector<double> isolation_forest_scores(const FeatureMatrix& X,
                                            int n_trees, int subsample,
                                            std::uint64_t seed);

struct OcsvmResult {
  std::vector<double> decision;     // negative = outside the support
  std::vector<std::uint8_t> flagged;
  double rho = 0.0;
  double gamma = 0.0;
  int iterations = 0;
  bool converged = false;
};

// nu-parameterized one-class SVM, Gaussian kernel, solved by pairwise dual
// coordinate ascent to KKT tolerance 1e-6. gamma <= 0 selects the median
// pairwise squared-distance heuristic.
OcsvmResult one_class_svm(const FeatureMatrix& X, double nu,
                          double gamma = 0.0, int max_iterations = 0);

struct OutlierCount {
  std::size_t index = 0;
  int count = 0;
};

// Rerun the outlier detectors `repeats` times with derived seeds and count
// how often each point is flagged; sorted by count descending, ties by index.
std::vector<OutlierCount> repeated_outlier_controls(const FeatureMatrix& X,
                                                    int repeats,
                                                    std::uint64_t seed,
                                                    double nu = 0.1);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov. Exact permutation p for tie-free pooled
// samples up to 50 values, corrected asymptotic otherwise.
TestResult ks_test(const std::vector<double>& a, const std::vector<double>& b);

// Two-sample Mann-Whitney U, two-sided; statistic is U of the first sample.
// Exact permutation p for tie-free pooled samples up to 50 values, normal
// approximation with tie and continuity corrections otherwise.
TestResult mwu_test(const std::vector<double>& a, const std::vector<double>& b);

struct ResidualMaps {
  ScalarGrid omissions;  // input mass the model dropped
  ScalarGrid additions;  // mass the model invented
};

ResidualMaps residual_maps(const ScalarGrid& input, const ScalarGrid& recon,
                           double noise_floor = 0.1);

}  // namespace fold
