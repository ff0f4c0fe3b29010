#include "fold/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fold/error.hpp"
#include "fold/rng.hpp"

namespace fold {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_matrix(const FeatureMatrix& X) {
  if (X.empty()) throw RangeError("empty feature matrix");
  const std::size_t d = X.front().size();
  if (d == 0) throw RangeError("zero-dimensional features");
  for (const auto& row : X)
    if (row.size() != d) throw RangeError("ragged feature matrix");
}

// 1-based midranks of v
std::vector<double> midranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

bool all_distinct(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return std::adjacent_find(v.begin(), v.end()) == v.end();
}

// exact for tie-free samples: counts the equally likely interleavings as
// monotone lattice paths and rejects those straying to |i/n1 - j/n2| >= d
double ks_exact_p(std::size_t n1, std::size_t n2, double d) {
  if (d <= 1e-12) return 1.0;
  const double bound = d - 1e-9;  // gaps between attainable D are >= 1/(n1*n2)
  std::vector<double> col(n2 + 1, 0.0);
  col[0] = 1.0;
  for (std::size_t j = 1; j <= n2; ++j)
    col[j] = static_cast<double>(j) / n2 < bound ? col[j - 1] : 0.0;
  for (std::size_t i = 1; i <= n1; ++i) {
    std::vector<double> next(n2 + 1, 0.0);
    for (std::size_t j = 0; j <= n2; ++j) {
      if (std::abs(static_cast<double>(i) / n1 -
                   static_cast<double>(j) / n2) >= bound)
        continue;
      next[j] = col[j] + (j > 0 ? next[j - 1] : 0.0);
    }
    col = std::move(next);
  }
  double total = 1.0;
  for (std::size_t k = 0; k < n1; ++k)
    total = total * static_cast<double>(n1 + n2 - k) /
            static_cast<double>(k + 1);
  return std::clamp(1.0 - col[n2] / total, 0.0, 1.0);
}

// exact two-sided p for tie-free samples from the rank-sum distribution
double mwu_exact_p(std::size_t n1, std::size_t n2, double u1) {
  const std::size_t n = n1 + n2;
  const std::size_t max_sum = n1 * n;
  // ways[i][s]: i ranks chosen from 1..r summing to s, rolled over r
  std::vector<std::vector<double>> ways(
      n1 + 1, std::vector<double>(max_sum + 1, 0.0));
  ways[0][0] = 1.0;
  for (std::size_t r = 1; r <= n; ++r)
    for (std::size_t i = std::min(n1, r); i >= 1; --i)
      for (std::size_t s = max_sum; s >= r; --s)
        ways[i][s] += ways[i - 1][s - r];
  const double offset = static_cast<double>(n1) * (n1 + 1) / 2.0;
  const double mid = static_cast<double>(n1) * static_cast<double>(n2) / 2.0;
  const double dev = std::abs(u1 - mid) - 1e-9;
  double hits = 0.0, total = 0.0;
  for (std::size_t s = 0; s <= max_sum; ++s) {
    const double w = ways[n1][s];
    if (w == 0.0) continue;
    total += w;
    if (std::abs(static_cast<double>(s) - offset - mid) >= dev) hits += w;
  }
  return hits / total;
}

// P(K > lambda) for the Kolmogorov distribution
double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    const double y = std::exp(-kPi * kPi / (8.0 * lambda * lambda));
    const double cdf = std::sqrt(2.0 * kPi) / lambda *
                       (y + std::pow(y, 9.0) + std::pow(y, 25.0) +
                        std::pow(y, 49.0));
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0, sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double t = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * t;
    sign = -sign;
    if (t < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace

double auc_from_scores(const std::vector<double>& scores,
                       const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw RangeError("auc: size mismatch or empty");
  double pos = 0.0, neg = 0.0;
  for (int y : labels) {
    if (y == 1)
      pos += 1.0;
    else if (y == 0)
      neg += 1.0;
    else
      throw RangeError("auc: labels must be 0/1");
  }
  if (pos == 0.0 || neg == 0.0) throw RangeError("auc: single-class labels");
  const std::vector<double> rank = midranks(scores);
  double r1 = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (labels[i] == 1) r1 += rank[i];
  return (r1 - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw RangeError("roc: size mismatch or empty");
  double pos = 0.0, neg = 0.0;
  for (int y : labels) (y == 1 ? pos : neg) += 1.0;
  if (pos == 0.0 || neg == 0.0) throw RangeError("roc: single-class labels");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  std::vector<RocPoint> out;
  out.push_back({0.0, 0.0});
  double tp = 0.0, fp = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) (labels[idx[k]] == 1 ? tp : fp) += 1.0;
    out.push_back({fp / neg, tp / pos});
    i = j + 1;
  }
  return out;
}

SvmCvResult linear_svm_cv(const FeatureMatrix& X, const std::vector<int>& y,
                          int k_folds, std::uint64_t seed) {
  check_matrix(X);
  const std::size_t n = X.size();
  const std::size_t d = X.front().size();
  if (y.size() != n) throw RangeError("svm: label count mismatch");
  std::vector<std::size_t> pos_idx, neg_idx;
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] == 1)
      pos_idx.push_back(i);
    else if (y[i] == 0)
      neg_idx.push_back(i);
    else
      throw RangeError("svm: labels must be 0/1");
  }
  if (pos_idx.size() < 2 || neg_idx.size() < 2)
    throw RangeError("svm: need at least two samples per class");
  if (k_folds < 2 || static_cast<std::size_t>(k_folds) > n)
    throw RangeError("svm: bad fold count");

  // stratified fold assignment: shuffle within class, deal round-robin
  std::vector<int> fold(n, 0);
  {
    Rng frng(derive_seed(seed, "folds"));
    frng.shuffle(pos_idx);
    frng.shuffle(neg_idx);
    for (std::size_t i = 0; i < pos_idx.size(); ++i)
      fold[pos_idx[i]] = static_cast<int>(i % k_folds);
    for (std::size_t i = 0; i < neg_idx.size(); ++i)
      fold[neg_idx[i]] = static_cast<int>(i % k_folds);
  }

  SvmCvResult res;
  res.decision_values.assign(n, 0.0);
  res.mean_abs_weights.assign(d, 0.0);
  constexpr int kEpochs = 100;

  for (int f = 0; f < k_folds; ++f) {
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < n; ++i)
      (fold[i] == f ? test_idx : train_idx).push_back(i);
    if (train_idx.empty() || test_idx.empty()) continue;

    std::vector<double> mean(d, 0.0), sd(d, 0.0);
    for (std::size_t i : train_idx)
      for (std::size_t j = 0; j < d; ++j) mean[j] += X[i][j];
    for (std::size_t j = 0; j < d; ++j) mean[j] /= train_idx.size();
    for (std::size_t i : train_idx)
      for (std::size_t j = 0; j < d; ++j) {
        const double c = X[i][j] - mean[j];
        sd[j] += c * c;
      }
    for (std::size_t j = 0; j < d; ++j) {
      sd[j] = std::sqrt(sd[j] / train_idx.size());
      if (sd[j] < 1e-12) sd[j] = 1.0;
    }
    auto standardized = [&](std::size_t i, std::size_t j) {
      return (X[i][j] - mean[j]) / sd[j];
    };

    // hinge + L2 subgradient descent, bias as an augmented feature
    const double lambda = 1.0 / static_cast<double>(train_idx.size());
    std::vector<double> w(d + 1, 0.0);
    Rng srng(derive_seed(seed, "sgd", static_cast<std::uint64_t>(f)));
    std::vector<std::size_t> order = train_idx;
    long t = 0;
    for (int epoch = 0; epoch < kEpochs; ++epoch) {
      srng.shuffle(order);
      for (std::size_t i : order) {
        ++t;
        const double eta = 1.0 / (lambda * static_cast<double>(t));
        const double yi = y[i] == 1 ? 1.0 : -1.0;
        double margin = w[d];
        for (std::size_t j = 0; j < d; ++j) margin += w[j] * standardized(i, j);
        margin *= yi;
        const double decay = 1.0 - eta * lambda;
        for (double& wj : w) wj *= decay;
        if (margin < 1.0) {
          for (std::size_t j = 0; j < d; ++j)
            w[j] += eta * yi * standardized(i, j);
          w[d] += eta * yi;
        }
      }
    }
    for (std::size_t i : test_idx) {
      double v = w[d];
      for (std::size_t j = 0; j < d; ++j) v += w[j] * standardized(i, j);
      res.decision_values[i] = v;
    }
    for (std::size_t j = 0; j < d; ++j)
      res.mean_abs_weights[j] += std::abs(w[j]) / k_folds;
  }

  res.auc = auc_from_scores(res.decision_values, y);
  res.roc = roc_curve(res.decision_values, y);
  return res;
}

Pca2dResult pca2d(const FeatureMatrix& X) {
  check_matrix(X);
  const std::size_t n = X.size();
  const std::size_t d = X.front().size();
  if (n < 2) throw RangeError("pca2d: need at least 2 points");

  std::vector<double> mean(d, 0.0);
  for (const auto& row : X)
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
  for (double& m : mean) m /= static_cast<double>(n);

  std::vector<double> C(d * d, 0.0);
  for (const auto& row : X)
    for (std::size_t a = 0; a < d; ++a) {
      const double ca = row[a] - mean[a];
      for (std::size_t b = a; b < d; ++b)
        C[a * d + b] += ca * (row[b] - mean[b]);
    }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      C[a * d + b] /= static_cast<double>(n - 1);
      C[b * d + a] = C[a * d + b];
    }

  // cyclic Jacobi eigensolver
  std::vector<double> V(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) V[i * d + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) off += C[p * d + q] * C[p * d + q];
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = C[p * d + q];
        if (std::abs(apq) < 1e-300) continue;
        const double tau = (C[q * d + q] - C[p * d + p]) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < d; ++k) {
          const double ckp = C[k * d + p], ckq = C[k * d + q];
          C[k * d + p] = c * ckp - s * ckq;
          C[k * d + q] = s * ckp + c * ckq;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double cpk = C[p * d + k], cqk = C[q * d + k];
          C[p * d + k] = c * cpk - s * cqk;
          C[q * d + k] = s * cpk + c * cqk;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double vkp = V[k * d + p], vkq = V[k * d + q];
          V[k * d + p] = c * vkp - s * vkq;
          V[k * d + q] = s * vkp + c * vkq;
        }
      }
  }

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return C[a * d + a] > C[b * d + b];
  });

  Pca2dResult res;
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += std::max(0.0, C[i * d + i]);
  for (int comp = 0; comp < 2; ++comp) {
    std::vector<double> axis(d, 0.0);
    double lambda = 0.0;
    if (static_cast<std::size_t>(comp) < d) {
      const std::size_t col = order[comp];
      for (std::size_t k = 0; k < d; ++k) axis[k] = V[k * d + col];
      std::size_t arg = 0;
      for (std::size_t k = 1; k < d; ++k)
        if (std::abs(axis[k]) > std::abs(axis[arg])) arg = k;
      if (axis[arg] < 0.0)
        for (double& v : axis) v = -v;
      lambda = std::max(0.0, C[col * d + col]);
    }
    res.axes[comp] = axis;
    res.explained[comp] = trace > 0.0 ? lambda / trace : 0.0;
  }
  res.coords.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    for (int comp = 0; comp < 2; ++comp) {
      double v = 0.0;
      for (std::size_t j = 0; j < d; ++j)
        v += (X[i][j] - mean[j]) * res.axes[comp][j];
      res.coords[i][comp] = v;
    }
  return res;
}

namespace {

double harmonic(double k) { return std::log(k) + 0.5772156649015329; }

// expected unsuccessful-search path length in a BST of m points
double avg_path(double m) {
  if (m <= 1.0) return 0.0;
  if (m == 2.0) return 1.0;
  return 2.0 * harmonic(m - 1.0) - 2.0 * (m - 1.0) / m;
}

struct IsoNode {
  int dim = -1;          // -1 marks a leaf
  double split = 0.0;
  int left = -1, right = -1;
  int size = 0;
};

int build_iso(std::vector<IsoNode>& arena, const FeatureMatrix& X,
              std::vector<std::size_t>& items, int lo, int hi, int depth,
              int limit, Rng& rng) {
  const int node = static_cast<int>(arena.size());
  arena.push_back({});
  arena[node].size = hi - lo;
  if (hi - lo <= 1 || depth >= limit) return node;
  const std::size_t d = X.front().size();
  std::vector<int> usable;
  std::vector<double> lo_v(d), hi_v(d);
  for (std::size_t j = 0; j < d; ++j) {
    double a = X[items[lo]][j], b = a;
    for (int i = lo + 1; i < hi; ++i) {
      a = std::min(a, X[items[i]][j]);
      b = std::max(b, X[items[i]][j]);
    }
    lo_v[j] = a;
    hi_v[j] = b;
    if (b > a) usable.push_back(static_cast<int>(j));
  }
  if (usable.empty()) return node;
  const int dim = usable[rng.below(usable.size())];
  const double split = rng.uniform(lo_v[dim], hi_v[dim]);
  int mid = lo;
  for (int i = lo; i < hi; ++i)
    if (X[items[i]][dim] < split) std::swap(items[i], items[mid++]);
  if (mid == lo || mid == hi) return node;  // degenerate draw, keep as leaf
  arena[node].dim = dim;
  arena[node].split = split;
  const int l = build_iso(arena, X, items, lo, mid, depth + 1, limit, rng);
  arena[node].left = l;
  const int r = build_iso(arena, X, items, mid, hi, depth + 1, limit, rng);
  arena[node].right = r;
  return node;
}

double iso_path(const std::vector<IsoNode>& arena, const std::vector<double>& x,
                int node, int depth) {
  const IsoNode& nd = arena[node];
  if (nd.dim < 0) return depth + avg_path(nd.size);
  return iso_path(arena, x, x[nd.dim] < nd.split ? nd.left : nd.right,
                  depth + 1);
}

}  // namespace

std::vector<double> isolation_forest_scores(const FeatureMatrix& X,
                                            int n_trees, int subsample,
                                            std::uint64_t seed) {
  check_matrix(X);
  const std::size_t n = X.size();
  const int psi = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(subsample), n));
  if (psi < 2) throw RangeError("isolation forest: need >= 2 points");
  const int limit =
      static_cast<int>(std::ceil(std::log2(static_cast<double>(psi))));
  std::vector<double> path_sum(n, 0.0);
  for (int t = 0; t < n_trees; ++t) {
    Rng rng(derive_seed(seed, "tree", static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> items =
        rng.sample_without_replacement(n, static_cast<std::size_t>(psi));
    std::vector<IsoNode> arena;
    arena.reserve(2 * items.size());
    build_iso(arena, X, items, 0, static_cast<int>(items.size()), 0, limit,
              rng);
    for (std::size_t i = 0; i < n; ++i)
      path_sum[i] += iso_path(arena, X[i], 0, 0);
  }
  const double c = avg_path(static_cast<double>(psi));
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i)
    scores[i] = std::pow(2.0, -path_sum[i] / (n_trees * c));
  return scores;
}

OcsvmResult one_class_svm(const FeatureMatrix& X, double nu, double gamma,
                          int max_iterations) {
  check_matrix(X);
  if (nu <= 0.0 || nu > 1.0) throw RangeError("ocsvm: nu must be in (0,1]");
  const std::size_t n = X.size();
  const std::size_t d = X.front().size();

  auto sqdist = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = X[a][j] - X[b][j];
      s += c * c;
    }
    return s;
  };

  if (gamma <= 0.0) {
    std::vector<double> dists;
    dists.reserve(n * (n - 1) / 2);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) dists.push_back(sqdist(a, b));
    double med = 0.0;
    if (!dists.empty()) {
      std::nth_element(dists.begin(), dists.begin() + dists.size() / 2,
                       dists.end());
      med = dists[dists.size() / 2];
    }
    gamma = med > 1e-12 ? 1.0 / (2.0 * med) : 1.0;
  }

  std::vector<double> K(n * n);
  for (std::size_t a = 0; a < n; ++a) {
    K[a * n + a] = 1.0;
    for (std::size_t b = a + 1; b < n; ++b) {
      const double v = std::exp(-gamma * sqdist(a, b));
      K[a * n + b] = v;
      K[b * n + a] = v;
    }
  }

  const double ub = 1.0 / (nu * static_cast<double>(n));
  std::vector<double> alpha(n, 1.0 / static_cast<double>(n));
  std::vector<double> g(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) g[i] += K[i * n + j] * alpha[j];

  constexpr double kTol = 1e-6;
  constexpr double kEps = 1e-12;
  if (max_iterations <= 0)
    max_iterations = static_cast<int>(std::min<std::size_t>(200000, n * 2000));

  OcsvmResult res;
  res.gamma = gamma;
  int it = 0;
  for (; it < max_iterations; ++it) {
    std::size_t up = n, down = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (alpha[i] < ub - kEps && (up == n || g[i] < g[up])) up = i;
      if (alpha[i] > kEps && (down == n || g[i] > g[down])) down = i;
    }
    if (up == n || down == n) {
      res.converged = true;  // nothing left to move
      break;
    }
    const double viol = g[down] - g[up];
    if (viol <= kTol) {
      res.converged = true;
      break;
    }
    const double denom =
        K[up * n + up] + K[down * n + down] - 2.0 * K[up * n + down];
    double delta = denom > kEps ? viol / denom : ub;
    delta = std::min({delta, ub - alpha[up], alpha[down]});
    alpha[up] += delta;
    alpha[down] -= delta;
    for (std::size_t i = 0; i < n; ++i)
      g[i] += delta * (K[i * n + up] - K[i * n + down]);
  }
  res.iterations = it;

  double rho_sum = 0.0;
  int rho_n = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (alpha[i] > kEps && alpha[i] < ub - kEps) {
      rho_sum += g[i];
      ++rho_n;
    }
  if (rho_n > 0) {
    res.rho = rho_sum / rho_n;
  } else {
    double lo = -1e300, hi = 1e300;
    for (std::size_t i = 0; i < n; ++i) {
      if (alpha[i] >= ub - kEps) lo = std::max(lo, g[i]);
      if (alpha[i] <= kEps) hi = std::min(hi, g[i]);
    }
    if (lo < -1e299) lo = hi;
    if (hi > 1e299) hi = lo;
    res.rho = 0.5 * (lo + hi);
  }

  res.decision.resize(n);
  res.flagged.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    res.decision[i] = g[i] - res.rho;
    res.flagged[i] = res.decision[i] < 0.0 ? 1 : 0;
  }
  return res;
}

std::vector<OutlierCount> repeated_outlier_controls(const FeatureMatrix& X,
                                                    int repeats,
                                                    std::uint64_t seed,
                                                    double nu) {
  check_matrix(X);
  const std::size_t n = X.size();
  const OcsvmResult ocsvm = one_class_svm(X, nu);
  const std::size_t k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(nu * static_cast<double>(n))));
  std::vector<int> counts(n, 0);
  for (int r = 0; r < repeats; ++r) {
    const std::vector<double> scores = isolation_forest_scores(
        X, 100, 256, derive_seed(seed, "rep", static_cast<std::uint64_t>(r)));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return a < b;
    });
    std::vector<std::uint8_t> iso_flag(n, 0);
    for (std::size_t i = 0; i < k && i < n; ++i) iso_flag[idx[i]] = 1;
    for (std::size_t i = 0; i < n; ++i)
      if (iso_flag[i] || ocsvm.flagged[i]) counts[i] += 1;
  }
  std::vector<OutlierCount> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {i, counts[i]};
  std::sort(out.begin(), out.end(), [](const OutlierCount& a,
                                       const OutlierCount& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.index < b.index;
  });
  return out;
}

TestResult ks_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw RangeError("ks_test: empty sample");
  std::vector<double> sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double n1 = static_cast<double>(sa.size());
  const double n2 = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() || j < sb.size()) {
    const double v = (i < sa.size() && (j >= sb.size() || sa[i] <= sb[j]))
                         ? sa[i]
                         : sb[j];
    while (i < sa.size() && sa[i] <= v) ++i;
    while (j < sb.size() && sb[j] <= v) ++j;
    d = std::max(d, std::abs(i / n1 - j / n2));
  }
  // exact permutation tail while it is cheap and the data is tie-free;
  // Stephens' small-sample correction of the asymptotic argument otherwise
  if (sa.size() + sb.size() <= 50) {
    std::vector<double> pooled = sa;
    pooled.insert(pooled.end(), sb.begin(), sb.end());
    if (all_distinct(pooled)) return {d, ks_exact_p(sa.size(), sb.size(), d)};
  }
  const double ne = n1 * n2 / (n1 + n2);
  const double lambda =
      (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  return {d, kolmogorov_q(lambda)};
}

TestResult mwu_test(const std::vector<double>& a,
                    const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw RangeError("mwu_test: empty sample");
  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());
  std::vector<double> all = a;
  all.insert(all.end(), b.begin(), b.end());
  const std::vector<double> rank = midranks(all);
  double r1 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r1 += rank[i];
  const double u1 = r1 - n1 * (n1 + 1.0) / 2.0;

  // exact permutation tail while it is cheap and the data is tie-free
  if (all.size() <= 50 && all_distinct(all))
    return {u1, mwu_exact_p(a.size(), b.size(), u1)};

  // tie correction over rank groups
  std::vector<double> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  double tie_sum = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    tie_sum += t * t * t - t;
    i = j + 1;
  }
  const double nn = n1 + n2;
  const double var =
      n1 * n2 / 12.0 * ((nn + 1.0) - tie_sum / (nn * (nn - 1.0)));
  if (var <= 0.0) return {u1, 1.0};
  double z = u1 - n1 * n2 / 2.0;
  if (z > 0.0)
    z -= 0.5;
  else if (z < 0.0)
    z += 0.5;
  z /= std::sqrt(var);
  return {u1, std::clamp(2.0 * normal_sf(std::abs(z)), 0.0, 1.0)};
}

ResidualMaps residual_maps(const ScalarGrid& input, const ScalarGrid& recon,
                           double noise_floor) {
  if (!(input.dims == recon.dims))
    throw RangeError("residual_maps: dims differ");
  ResidualMaps out{ScalarGrid(input.dims, input.voxel_mm),
                   ScalarGrid(input.dims, input.voxel_mm)};
  const float floor = static_cast<float>(noise_floor);
  for (std::size_t i = 0; i < input.data.size(); ++i) {
    const float om = input.data[i] - recon.data[i];
    if (om > 0.0f) out.omissions.data[i] = om >= floor ? om : 0.0f;
    const float ad = recon.data[i] - input.data[i];
    if (ad > 0.0f) out.additions.data[i] = ad >= floor ? ad : 0.0f;
  }
  return out;
}

}  // namespace fold
