#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "fold/detect.hpp"
#include "fold/error.hpp"
#include "fold/rng.hpp"

using namespace fold;

namespace {

// O(n^2) oracle: each positive/negative pair scores 1, ties score 1/2
double auc_pairs(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1.0;
      if (s[i] > s[j])
        num += 1.0;
      else if (s[i] == s[j])
        num += 0.5;
    }
  return num / pairs;
}

double ks_statistic(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() || j < sb.size()) {
    const double v =
        (i < sa.size() && (j >= sb.size() || sa[i] <= sb[j])) ? sa[i] : sb[j];
    while (i < sa.size() && sa[i] <= v) ++i;
    while (j < sb.size() && sb[j] <= v) ++j;
    d = std::max(d, std::abs(double(i) / sa.size() - double(j) / sb.size()));
  }
  return d;
}

double mwu_u1(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0.0;
  for (double x : a)
    for (double y : b) {
      if (x > y)
        u += 1.0;
      else if (x == y)
        u += 0.5;
    }
  return u;
}

// exact two-sample permutation distributions over all C(16,8) splits
struct PermutationP {
  double ks = 0.0;
  double mwu = 0.0;
};

PermutationP permutation_p(const std::vector<double>& a,
                           const std::vector<double>& b) {
  REQUIRE(a.size() == 8);
  REQUIRE(b.size() == 8);
  std::vector<double> pool = a;
  pool.insert(pool.end(), b.begin(), b.end());

  const double d_obs = ks_statistic(a, b);
  const double u_obs = std::abs(mwu_u1(a, b) - 32.0);
  long total = 0, ks_hits = 0, mwu_hits = 0;
  for (unsigned mask = 0; mask < (1u << 16); ++mask) {
    if (__builtin_popcount(mask) != 8) continue;
    std::vector<double> ga, gb;
    for (int k = 0; k < 16; ++k)
      (mask >> k & 1 ? ga : gb).push_back(pool[std::size_t(k)]);
    ++total;
    if (ks_statistic(ga, gb) >= d_obs - 1e-12) ++ks_hits;
    if (std::abs(mwu_u1(ga, gb) - 32.0) >= u_obs - 1e-12) ++mwu_hits;
  }
  REQUIRE(total == 12870);
  return {double(ks_hits) / total, double(mwu_hits) / total};
}

FeatureMatrix two_clusters(int per_side, double gap, std::uint64_t seed,
                           int noise_dims = 0) {
  Rng rng(seed);
  FeatureMatrix X;
  for (int i = 0; i < 2 * per_side; ++i) {
    const double base = i < per_side ? 0.0 : gap;
    std::vector<double> row{base + rng.normal(0.0, 0.5),
                            base + rng.normal(0.0, 0.5)};
    for (int k = 0; k < noise_dims; ++k) row.push_back(rng.normal(0.0, 0.5));
    X.push_back(row);
  }
  return X;
}

}  // namespace

TEST_CASE("rank auc equals pair counting, ties included") {
  Rng rng(17);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> s;
    std::vector<int> y;
    for (int i = 0; i < 40; ++i) {
      s.push_back(std::round(rng.uniform() * 10.0) / 10.0);  // forces ties
      y.push_back(rng.bernoulli(0.45) ? 1 : 0);
    }
    if (std::count(y.begin(), y.end(), 1) == 0) y[0] = 1;
    if (std::count(y.begin(), y.end(), 0) == 0) y[1] = 0;
    CHECK(auc_from_scores(s, y) == doctest::Approx(auc_pairs(s, y)).epsilon(1e-12));
  }

  CHECK(auc_from_scores({3.0, 1.0, 2.0, 0.0}, {1, 0, 1, 0}) == 1.0);
  CHECK(auc_from_scores({0.0, 1.0}, {1, 0}) == 0.0);
  CHECK_THROWS_AS(auc_from_scores({1.0}, {1}), RangeError);
  CHECK_THROWS_AS(auc_from_scores({1.0, 2.0}, {1, 2}), RangeError);
  CHECK_THROWS_AS(auc_from_scores({1.0, 2.0}, {1}), RangeError);
}

TEST_CASE("roc curves span (0,0) to (1,1) monotonically") {
  Rng rng(19);
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 30; ++i) {
    s.push_back(std::round(rng.uniform() * 8.0));
    y.push_back(i % 3 == 0 ? 1 : 0);
  }
  const std::vector<RocPoint> roc = roc_curve(s, y);
  REQUIRE(roc.size() >= 2);
  CHECK(roc.front().fpr == 0.0);
  CHECK(roc.front().tpr == 0.0);
  CHECK(roc.back().fpr == 1.0);
  CHECK(roc.back().tpr == 1.0);
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    CHECK(roc[i].fpr >= roc[i - 1].fpr);
    CHECK(roc[i].tpr >= roc[i - 1].tpr);
    area += 0.5 * (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr);
  }
  CHECK(area == doctest::Approx(auc_from_scores(s, y)).epsilon(1e-9));

  const std::vector<RocPoint> sep = roc_curve({5.0, 6.0, 1.0, 2.0}, {1, 1, 0, 0});
  bool has_corner = false;
  for (const RocPoint& p : sep) has_corner |= (p.fpr == 0.0 && p.tpr == 1.0);
  CHECK(has_corner);
}

TEST_CASE("cross-validated svm separates well-separated clusters") {
  const FeatureMatrix X = two_clusters(12, 10.0, 23, 1);
  std::vector<int> y(24, 0);
  std::fill(y.begin() + 12, y.end(), 1);

  const SvmCvResult r = linear_svm_cv(X, y, 3, 7);
  CHECK(r.auc == 1.0);
  CHECK(r.decision_values.size() == 24);
  REQUIRE(r.mean_abs_weights.size() == 3);
  // both informative coordinates outweigh the pure-noise one
  CHECK(r.mean_abs_weights[0] > r.mean_abs_weights[2]);
  CHECK(r.mean_abs_weights[1] > r.mean_abs_weights[2]);
  for (std::size_t i = 0; i < 24; ++i)
    CHECK((r.decision_values[i] > 0.0) == (y[i] == 1));

  const SvmCvResult again = linear_svm_cv(X, y, 3, 7);
  CHECK(again.decision_values == r.decision_values);
  const SvmCvResult other = linear_svm_cv(X, y, 3, 8);
  CHECK(other.auc == 1.0);

  CHECK_THROWS_AS(linear_svm_cv(X, std::vector<int>(24, 1), 3, 7), RangeError);
  CHECK_THROWS_AS(linear_svm_cv(X, y, 1, 7), RangeError);
  CHECK_THROWS_AS(linear_svm_cv(X, {1, 0}, 3, 7), RangeError);
}

TEST_CASE("pca projection preserves in-plane geometry") {
  // a 4x3 lattice on a tilted plane in 5 dimensions
  const std::vector<double> u{0.6, 0.0, 0.8, 0.0, 0.0};
  const std::vector<double> v{0.0, 1.0, 0.0, 0.0, 0.0};
  FeatureMatrix X;
  std::vector<std::array<double, 2>> ab;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) {
      const double a = 2.0 * i, b = 1.5 * j;
      ab.push_back({a, b});
      std::vector<double> row(5, 0.0);
      for (int k = 0; k < 5; ++k) row[k] = 3.0 + a * u[k] + b * v[k];
      X.push_back(row);
    }

  const Pca2dResult r = pca2d(X);
  REQUIRE(r.coords.size() == X.size());
  for (std::size_t i = 0; i < X.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double want = std::hypot(ab[i][0] - ab[j][0], ab[i][1] - ab[j][1]);
      const double got = std::hypot(r.coords[i][0] - r.coords[j][0],
                                    r.coords[i][1] - r.coords[j][1]);
      CHECK(got == doctest::Approx(want).epsilon(1e-9));
    }
  CHECK(r.explained[0] >= r.explained[1]);
  CHECK(r.explained[1] > 0.0);
  CHECK(r.explained[0] + r.explained[1] == doctest::Approx(1.0).epsilon(1e-9));

  FeatureMatrix shifted = X;
  for (auto& row : shifted)
    for (std::size_t k = 0; k < row.size(); ++k) row[k] += 100.0;
  const Pca2dResult rs = pca2d(shifted);
  for (std::size_t i = 0; i < X.size(); ++i) {
    CHECK(rs.coords[i][0] == doctest::Approx(r.coords[i][0]).epsilon(1e-7));
    CHECK(rs.coords[i][1] == doctest::Approx(r.coords[i][1]).epsilon(1e-7));
  }

  CHECK_THROWS_AS(pca2d(FeatureMatrix{{1.0, 2.0}}), RangeError);
}

TEST_CASE("isolation forest isolates the far point first") {
  Rng rng(31);
  FeatureMatrix X;
  for (int i = 0; i < 40; ++i)
    X.push_back({rng.normal(0.0, 1.0), rng.normal(0.0, 1.0)});
  X.push_back({12.0, -11.0});

  const std::vector<double> s = isolation_forest_scores(X, 100, 32, 5);
  REQUIRE(s.size() == X.size());
  for (double v : s) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  const std::size_t top =
      std::size_t(std::max_element(s.begin(), s.end()) - s.begin());
  CHECK(top == X.size() - 1);

  CHECK(isolation_forest_scores(X, 100, 32, 5) == s);
  CHECK(isolation_forest_scores(X, 100, 32, 6) != s);
  CHECK_THROWS_AS(isolation_forest_scores(FeatureMatrix{{1.0}}, 10, 8, 1),
                  RangeError);
}

TEST_CASE("one-class svm respects the nu budget and flags the far point") {
  Rng rng(37);
  FeatureMatrix X;
  for (int i = 0; i < 20; ++i)
    X.push_back({rng.normal(0.0, 0.8), rng.normal(0.0, 0.8)});
  X.push_back({15.0, 15.0});

  // tight budget: at most a nu fraction of the points may end up outside
  const OcsvmResult tight = one_class_svm(X, 0.15);
  REQUIRE(tight.decision.size() == X.size());
  CHECK(tight.converged);
  CHECK(tight.gamma > 0.0);
  CHECK(tight.iterations > 0);
  int flagged = 0;
  for (std::uint8_t f : tight.flagged) flagged += f;
  CHECK(flagged <= int(0.15 * double(X.size())) + 2);

  // looser budget caps the far point's weight, pushing it below the margin
  const double nu = 0.3;
  const OcsvmResult r = one_class_svm(X, nu);
  CHECK(r.converged);
  CHECK(r.decision.back() < 0.0);
  CHECK(r.flagged.back() == 1);
  // at least a nu fraction of the points sit on or outside the margin
  int on_or_out = 0;
  for (double d : r.decision) on_or_out += d <= 1e-5;
  CHECK(on_or_out >= int(nu * double(X.size())));

  // duplicating a deep inlier must not change the far point's verdict
  FeatureMatrix dup = X;
  dup.push_back(X[0]);
  dup.push_back(X[0]);
  const OcsvmResult rd = one_class_svm(dup, nu);
  CHECK(rd.decision[20] < 0.0);

  CHECK_THROWS_AS(one_class_svm(X, 0.0), RangeError);
  CHECK_THROWS_AS(one_class_svm(X, 1.5), RangeError);
}

TEST_CASE("repeated outlier hunts accumulate sorted, bounded counts") {
  Rng rng(41);
  FeatureMatrix X;
  for (int i = 0; i < 12; ++i)
    X.push_back({rng.normal(0.0, 1.0), rng.normal(0.0, 1.0)});
  X.push_back({50.0, 50.0});
  const int repeats = 6;

  const std::vector<OutlierCount> counts =
      repeated_outlier_controls(X, repeats, 99, 0.15);
  REQUIRE(counts.size() == X.size());
  for (std::size_t i = 1; i < counts.size(); ++i) {
    const bool sorted =
        counts[i - 1].count > counts[i].count ||
        (counts[i - 1].count == counts[i].count &&
         counts[i - 1].index < counts[i].index);
    CHECK(sorted);
  }
  for (const OutlierCount& c : counts) {
    CHECK(c.count >= 0);
    CHECK(c.count <= repeats);
    CHECK(c.index < X.size());
  }
  // the planted far point must be flagged in every repeat; persistent svm
  // flags can tie other points with it, so look it up by index
  const auto far_it =
      std::find_if(counts.begin(), counts.end(),
                   [](const OutlierCount& c) { return c.index == 12; });
  REQUIRE(far_it != counts.end());
  CHECK(far_it->count == repeats);
  CHECK(counts.front().count == repeats);

  const std::vector<OutlierCount> again =
      repeated_outlier_controls(X, repeats, 99, 0.15);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    CHECK(again[i].index == counts[i].index);
    CHECK(again[i].count == counts[i].count);
  }
}

TEST_CASE("ks and mwu behave at the extremes") {
  const std::vector<double> a{1, 2, 3, 4, 5, 6, 7, 8};
  const TestResult same_ks = ks_test(a, a);
  CHECK(same_ks.statistic == 0.0);
  CHECK(same_ks.p_value > 0.9);
  const TestResult same_mwu = mwu_test(a, a);
  CHECK(same_mwu.p_value > 0.9);
  CHECK(same_mwu.statistic == doctest::Approx(32.0));

  const std::vector<double> lo{1, 2, 3, 4, 5, 6, 7, 8};
  const std::vector<double> hi{11, 12, 13, 14, 15, 16, 17, 18};
  CHECK(ks_test(lo, hi).statistic == 1.0);
  CHECK(ks_test(lo, hi).p_value < 0.01);
  CHECK(mwu_test(lo, hi).p_value < 0.01);
  CHECK(mwu_test(lo, hi).statistic == 0.0);   // first sample entirely below
  CHECK(mwu_test(hi, lo).statistic == 64.0);  // and entirely above

  CHECK_THROWS_AS(ks_test({}, a), RangeError);
  CHECK_THROWS_AS(mwu_test(a, {}), RangeError);
}

TEST_CASE("ks and mwu p-values track exact permutation within 0.02") {
  Rng rng(101);
  for (double shift : {0.05, 0.25, 0.6}) {
    std::vector<double> a, b;
    for (int i = 0; i < 8; ++i) a.push_back(rng.uniform());
    for (int i = 0; i < 8; ++i) b.push_back(rng.uniform() + shift);
    const PermutationP exact = permutation_p(a, b);
    const TestResult ks = ks_test(a, b);
    const TestResult mwu = mwu_test(a, b);
    CHECK(std::abs(ks.p_value - exact.ks) <= 0.02);
    CHECK(std::abs(mwu.p_value - exact.mwu) <= 0.02);
  }
}

TEST_CASE("residual maps split signed error at the noise floor") {
  ScalarGrid in({2, 2, 1}, {1, 1, 1});
  ScalarGrid re({2, 2, 1}, {1, 1, 1});
  in.data = {1.0f, 0.5f, 0.1f, 0.0f};
  re.data = {0.6f, 0.4f, 0.5f, 0.3f};

  const ResidualMaps m = residual_maps(in, re, 0.25);
  CHECK(m.omissions.data[0] == doctest::Approx(0.4));   // big drop kept
  CHECK(m.omissions.data[1] == 0.0f);                   // 0.1 below floor
  CHECK(m.omissions.data[2] == 0.0f);                   // model added here
  CHECK(m.additions.data[2] == doctest::Approx(0.4));
  CHECK(m.additions.data[3] == doctest::Approx(0.3));
  CHECK(m.additions.data[0] == 0.0f);
  CHECK(m.omissions.dims == in.dims);

  ScalarGrid wrong({3, 2, 1});
  CHECK_THROWS_AS(residual_maps(in, wrong, 0.25), RangeError);
}
