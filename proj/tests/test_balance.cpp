#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "balance.hpp"
#include "errors.hpp"

namespace rscope {
namespace {

std::vector<RedactedSample> samples_with_counts(const LabelCounts& counts) {
  std::vector<RedactedSample> out;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i) {
      RedactedSample s;
      s.id = "c" + std::to_string(c) + "/" + std::to_string(i);
      s.source_doc = "c" + std::to_string(c);
      s.sentence = "x";
      s.redacted_sentence = "*";
      s.span = {0, 1};
      s.label = label_from_id(c);
      out.push_back(std::move(s));
    }
  }
  // Interleave classes so order-dependent bugs show up.
  Rng rng(Seed{3});
  rng.shuffle(out);
  return out;
}

LabelCounts uniform_counts(std::size_t n) {
  LabelCounts c{};
  c.fill(n);
  return c;
}

TEST(Undersample, EveryClassAtMinimum) {
  LabelCounts counts{40, 31, 55, 12, 90, 17, 23, 12};
  const auto in = samples_with_counts(counts);
  const auto out = undersample(in, Seed{1});
  EXPECT_EQ(count_labels(out), uniform_counts(12));
  std::set<std::string> ids;
  for (const auto& s : in) ids.insert(s.id);
  for (const auto& s : out) EXPECT_TRUE(ids.count(s.id));
  std::set<std::string> unique;
  for (const auto& s : out) unique.insert(s.id);
  EXPECT_EQ(unique.size(), out.size());
}

TEST(Undersample, BalancedInputIsPermutationOfItself) {
  const auto in = samples_with_counts(uniform_counts(5));
  auto out = undersample(in, Seed{2});
  auto a = in;
  auto by_id = [](const RedactedSample& x, const RedactedSample& y) { return x.id < y.id; };
  std::sort(a.begin(), a.end(), by_id);
  std::sort(out.begin(), out.end(), by_id);
  EXPECT_EQ(a, out);
}

TEST(Undersample, ZeroClassThrows) {
  LabelCounts counts = uniform_counts(4);
  counts[3] = 0;
  EXPECT_THROW(undersample(samples_with_counts(counts), Seed{1}), EmptyClass);
}

TEST(Undersample, DeterministicPerSeed) {
  const auto in = samples_with_counts({9, 8, 7, 6, 5, 4, 3, 10});
  EXPECT_EQ(undersample(in, Seed{5}), undersample(in, Seed{5}));
  EXPECT_NE(undersample(in, Seed{5}), undersample(in, Seed{6}));
}

TEST(FinetuneSubset, ComplementarySplit) {
  const auto in = samples_with_counts(uniform_counts(30));
  const auto split = extract_finetune_subset(in, 10, Seed{4});
  EXPECT_EQ(count_labels(split.subset), uniform_counts(10));
  EXPECT_EQ(count_labels(split.remainder), uniform_counts(20));
  std::set<std::string> ids;
  for (const auto& s : split.subset) ids.insert(s.id);
  for (const auto& s : split.remainder) EXPECT_FALSE(ids.count(s.id));
}

TEST(FinetuneSubset, ZeroAndTooMany) {
  const auto in = samples_with_counts(uniform_counts(6));
  const auto none = extract_finetune_subset(in, 0, Seed{4});
  EXPECT_TRUE(none.subset.empty());
  EXPECT_EQ(none.remainder, in);
  EXPECT_THROW(extract_finetune_subset(in, 7, Seed{4}), PreconditionError);
}

TEST(BuildPairs, CountsAndTargets) {
  const auto subset = samples_with_counts(uniform_counts(250));
  const auto pairs = build_pairs(subset, Seed{8});
  ASSERT_EQ(pairs.size(), 2000u);
  std::size_t same = 0, cross = 0;
  std::map<std::string, int> same_use;
  std::array<std::size_t, kNumLabels> same_per_label{}, cross_per_label{};
  for (const auto& p : pairs) {
    if (p.target == kSameLabelTarget) {
      ++same;
      EXPECT_EQ(p.sample_a.label, p.sample_b.label);
      ++same_use[p.sample_a.id];
      ++same_use[p.sample_b.id];
      ++same_per_label[label_id(p.sample_a.label)];
    } else {
      ASSERT_EQ(p.target, kCrossLabelTarget);
      ++cross;
      EXPECT_NE(p.sample_a.label, p.sample_b.label);
      ++cross_per_label[label_id(p.sample_a.label)];
    }
  }
  EXPECT_EQ(same, 1000u);
  EXPECT_EQ(cross, 1000u);
  // Same-label pairs use every subset sample exactly once.
  EXPECT_EQ(same_use.size(), 2000u);
  for (const auto& [id, n] : same_use) EXPECT_EQ(n, 1) << id;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    EXPECT_EQ(same_per_label[c], 125u);
    EXPECT_EQ(cross_per_label[c], 125u);
  }
}

TEST(BuildPairs, UnevenSubsetRejected) {
  EXPECT_THROW(build_pairs(samples_with_counts({4, 4, 4, 4, 4, 4, 4, 2}), Seed{1}), PreconditionError);
  EXPECT_THROW(build_pairs(samples_with_counts(uniform_counts(3)), Seed{1}), PreconditionError);
}

std::vector<LabeledPoint> random_points(std::size_t per_class, std::size_t dim, std::uint64_t seed) {
  Rng rng(Seed{seed});
  std::vector<LabeledPoint> pts;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      LabeledPoint p;
      p.label = label_from_id(c);
      for (std::size_t d = 0; d < dim; ++d) p.features.push_back(rng.uniform(-1, 1) + static_cast<double>(c));
      pts.push_back(std::move(p));
    }
  }
  return pts;
}

// Brute-force check that s lies on the segment between two real same-class points.
bool on_some_segment(const LabeledPoint& s, const std::vector<LabeledPoint>& real) {
  for (const auto& x : real) {
    if (x.label != s.label) continue;
    for (const auto& y : real) {
      if (y.label != s.label) continue;
      double dd = 0, ds = 0;
      for (std::size_t k = 0; k < x.features.size(); ++k) {
        dd += (y.features[k] - x.features[k]) * (y.features[k] - x.features[k]);
        ds += (s.features[k] - x.features[k]) * (y.features[k] - x.features[k]);
      }
      if (dd == 0) {
        bool same = true;
        for (std::size_t k = 0; k < x.features.size(); ++k) same = same && std::abs(s.features[k] - x.features[k]) < 1e-12;
        if (same) return true;
        continue;
      }
      const double u = ds / dd;
      if (u < -1e-12 || u > 1 + 1e-12) continue;
      double err = 0;
      for (std::size_t k = 0; k < x.features.size(); ++k) {
        err = std::max(err, std::abs(x.features[k] + u * (y.features[k] - x.features[k]) - s.features[k]));
      }
      if (err < 1e-9) return true;
    }
  }
  return false;
}

TEST(Smote, ReachesTargetAndKeepsRealPoints) {
  const auto real = random_points(6, 3, 21);
  const auto out = smote_oversample(real, {15, 3}, Seed{9});
  EXPECT_EQ(count_labels(out), uniform_counts(15));
  std::size_t seen_real = 0;
  for (const auto& p : out) {
    if (p.origin >= 0) {
      ++seen_real;
      EXPECT_EQ(p.features, real[static_cast<std::size_t>(p.origin)].features);
      EXPECT_EQ(p.label, real[static_cast<std::size_t>(p.origin)].label);
    } else {
      EXPECT_TRUE(on_some_segment(p, real));
    }
  }
  EXPECT_EQ(seen_real, real.size());
  // Canonical order: by class, then real before synthetic.
  for (std::size_t i = 1; i < out.size(); ++i) {
    EXPECT_LE(label_id(out[i - 1].label), label_id(out[i].label));
  }
}

TEST(Smote, SyntheticUsesOneOfKNearest) {
  const auto real = random_points(8, 2, 5);
  const std::size_t k = 2;
  const auto out = smote_oversample(real, {12, k}, Seed{1});
  for (const auto& s : out) {
    if (s.origin >= 0) continue;
    bool found = false;
    for (std::size_t xi = 0; xi < real.size() && !found; ++xi) {
      if (real[xi].label != s.label) continue;
      for (auto yi : nearest_neighbors(real, xi, k)) {
        std::vector<LabeledPoint> pair{real[xi], real[yi]};
        if (on_some_segment(s, pair)) found = true;
      }
    }
    EXPECT_TRUE(found);
  }
}

TEST(Smote, NeighborOracle) {
  const auto pts = random_points(7, 4, 13);
  for (std::size_t i = 0; i < pts.size(); i += 5) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j == i || pts[j].label != pts[i].label) continue;
      double s = 0;
      for (std::size_t k = 0; k < 4; ++k) s += std::pow(pts[i].features[k] - pts[j].features[k], 2);
      d.emplace_back(s, j);
    }
    std::sort(d.begin(), d.end());
    std::vector<std::size_t> expected;
    for (std::size_t k = 0; k < 3; ++k) expected.push_back(d[k].second);
    auto got = nearest_neighbors(pts, i, 3);
    std::sort(got.begin(), got.end());
    std::sort(expected.begin(), expected.end());
    EXPECT_EQ(got, expected);
  }
}

TEST(Smote, TargetEqualsCountIsIdentity) {
  const auto real = random_points(4, 2, 1);
  const auto out = smote_oversample(real, {4, 5}, Seed{1});
  ASSERT_EQ(out.size(), real.size());
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i].features, real[static_cast<std::size_t>(out[i].origin)].features);
}

TEST(Smote, CoincidentPointsGiveThatPoint) {
  std::vector<LabeledPoint> pts;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    for (int i = 0; i < 2; ++i) pts.push_back({{1.5, -2.0, static_cast<double>(c)}, label_from_id(c), -1});
  }
  for (const auto& p : smote_oversample(pts, {9, 5}, Seed{2})) {
    EXPECT_EQ(p.features, (std::vector<double>{1.5, -2.0, static_cast<double>(label_id(p.label))}));
  }
}

TEST(Smote, Errors) {
  auto pts = random_points(3, 2, 1);
  EXPECT_THROW(smote_oversample(pts, {2, 5}, Seed{1}), PreconditionError);
  EXPECT_THROW(smote_oversample(pts, {5, 0}, Seed{1}), PreconditionError);
  pts.erase(pts.begin(), pts.begin() + 2);  // class 0 left with a single point
  EXPECT_THROW(smote_oversample(pts, {5, 5}, Seed{1}), PreconditionError);
}

TEST(Smote, Deterministic) {
  const auto real = random_points(5, 3, 2);
  const auto a = smote_oversample(real, {11, 3}, Seed{7});
  const auto b = smote_oversample(real, {11, 3}, Seed{7});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].features, b[i].features);
}

TEST(Split, StratifiedRoundHalfUp) {
  const auto labels = labels_of(samples_with_counts(uniform_counts(3500)));
  const auto s = split_indices(labels, 0.85, Seed{1});
  std::array<std::size_t, kNumLabels> train{}, test{};
  for (auto i : s.train) ++train[label_id(labels[i])];
  for (auto i : s.test) ++test[label_id(labels[i])];
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    EXPECT_EQ(train[c], 2975u);
    EXPECT_EQ(test[c], 525u);
  }
  std::vector<std::size_t> all(s.train);
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
}

TEST(Split, SmallCases) {
  const auto labels = labels_of(samples_with_counts(uniform_counts(20)));
  const auto s = split_indices(labels, 0.85, Seed{1});
  EXPECT_EQ(s.train.size(), 17u * kNumLabels);
  EXPECT_EQ(s.test.size(), 3u * kNumLabels);
  EXPECT_TRUE(split_indices(labels, 1.0, Seed{1}).test.empty());
  // 0.5 * 5 = 2.5 rounds up on the train side.
  const auto half = split_indices(labels_of(samples_with_counts(uniform_counts(5))), 0.5, Seed{1});
  EXPECT_EQ(half.train.size(), 3u * kNumLabels);
}

TEST(Folds, StratifiedAndCovering) {
  const auto labels = labels_of(samples_with_counts({10, 11, 12, 13, 14, 15, 16, 17}));
  const auto folds = stratified_folds(labels, 5, Seed{1});
  ASSERT_EQ(folds.size(), labels.size());
  std::array<std::array<std::size_t, 5>, kNumLabels> per{};
  for (std::size_t i = 0; i < folds.size(); ++i) {
    ASSERT_LT(folds[i], 5u);
    ++per[label_id(labels[i])][folds[i]];
  }
  for (const auto& row : per) {
    const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
    EXPECT_LE(*hi - *lo, 1u);
  }
}

TEST(BalanceReport, JsonHasTotals) {
  BalanceReport r;
  r.dataset = uniform_counts(10);
  r.undersampling = uniform_counts(5);
  r.finetuning = uniform_counts(3);
  r.oversampling = uniform_counts(7);
  const auto j = balance_report_json(r);
  EXPECT_EQ(j["total"]["dataset"], 80);
  EXPECT_EQ(j["total"]["oversampling"], 56);
  ASSERT_EQ(j["classes"].size(), kNumLabels);
  EXPECT_EQ(j["classes"][0]["class"], "DATETIME");
}

}  // namespace
}  // namespace rscope
