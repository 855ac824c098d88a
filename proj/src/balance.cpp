#include "balance.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "errors.hpp"

namespace rscope {

namespace {

using ClassMembers = std::array<std::vector<std::size_t>, kNumLabels>;

ClassMembers group(std::span<const EntityLabel> labels) {
  ClassMembers members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[label_id(labels[i])].push_back(i);
  return members;
}

// Draws `take` members uniformly without replacement (partial Fisher-Yates).
// The chosen members end up in the front of `pool`.
void partial_shuffle(std::vector<std::size_t>& pool, std::size_t take, Rng& rng) {
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
  }
}

void sort_ascending(std::vector<std::size_t>& v) { std::sort(v.begin(), v.end()); }

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::vector<std::size_t> nearest_among(const std::vector<LabeledPoint>& points,
                                       const std::vector<std::size_t>& members, std::size_t i,
                                       std::size_t k) {
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(members.size());
  for (auto j : members) {
    if (j == i) continue;
    dist.emplace_back(squared_distance(points[i].features, points[j].features), j);
  }
  const std::size_t take = std::min(k, dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
  std::vector<std::size_t> out;
  out.reserve(take);
  for (std::size_t t = 0; t < take; ++t) out.push_back(dist[t].second);
  return out;
}

}  // namespace

std::vector<std::size_t> undersample_indices(std::span<const EntityLabel> labels, Seed seed) {
  auto members = group(labels);
  std::size_t smallest = SIZE_MAX;
  for (auto l : kAllLabels) {
    if (members[label_id(l)].empty()) throw EmptyClass(std::string(label_name(l)));
    smallest = std::min(smallest, members[label_id(l)].size());
  }
  Rng rng(seed);
  std::vector<std::size_t> out;
  out.reserve(smallest * kNumLabels);
  for (auto& pool : members) {
    partial_shuffle(pool, smallest, rng);
    out.insert(out.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(smallest));
  }
  sort_ascending(out);
  return out;
}

SubsetIndices finetune_subset_indices(std::span<const EntityLabel> labels, std::size_t per_label,
                                      Seed seed) {
  auto members = group(labels);
  Rng rng(seed);
  SubsetIndices out;
  for (auto l : kAllLabels) {
    auto& pool = members[label_id(l)];
    if (pool.size() < per_label) {
      throw PreconditionError("class " + std::string(label_name(l)) + " has " +
                              std::to_string(pool.size()) + " samples, fewer than the " +
                              std::to_string(per_label) + " needed for fine-tuning");
    }
    partial_shuffle(pool, per_label, rng);
    out.subset.insert(out.subset.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(per_label));
    out.remainder.insert(out.remainder.end(), pool.begin() + static_cast<std::ptrdiff_t>(per_label), pool.end());
  }
  sort_ascending(out.subset);
  sort_ascending(out.remainder);
  return out;
}

SplitIndices split_indices(std::span<const EntityLabel> labels, double train_fraction, Seed seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw PreconditionError("train fraction must lie in [0, 1]");
  }
  auto members = group(labels);
  Rng rng(seed);
  SplitIndices out;
  for (auto& pool : members) {
    rng.shuffle(pool);
    const auto n_train = std::min(
        pool.size(), static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(pool.size()) + 0.5)));
    out.train.insert(out.train.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.insert(out.test.end(), pool.begin() + static_cast<std::ptrdiff_t>(n_train), pool.end());
  }
  sort_ascending(out.train);
  sort_ascending(out.test);
  return out;
}

std::vector<std::size_t> stratified_folds(std::span<const EntityLabel> labels, std::size_t folds, Seed seed) {
  if (folds == 0) throw PreconditionError("fold count must be positive");
  if (labels.size() < folds) {
    throw PreconditionError("cannot split " + std::to_string(labels.size()) + " samples into " +
                            std::to_string(folds) + " folds");
  }
  auto members = group(labels);
  Rng rng(seed);
  std::vector<std::size_t> fold(labels.size());
  std::size_t dealt = 0;
  for (auto& pool : members) {
    rng.shuffle(pool);
    for (auto i : pool) fold[i] = dealt++ % folds;
  }
  return fold;
}

std::vector<RedactedSample> undersample(const std::vector<RedactedSample>& samples, Seed seed) {
  const auto labels = labels_of(samples);
  return gather(samples, undersample_indices(labels, seed));
}

FinetuneSplit extract_finetune_subset(const std::vector<RedactedSample>& balanced,
                                      std::size_t per_label, Seed seed) {
  const auto labels = labels_of(balanced);
  const auto idx = finetune_subset_indices(labels, per_label, seed);
  return {gather(balanced, idx.subset), gather(balanced, idx.remainder)};
}

std::vector<FinetunePair> build_pairs(const std::vector<RedactedSample>& subset, Seed seed) {
  const auto labels = labels_of(subset);
  auto members = group(labels);
  const std::size_t per_label = members[0].size();
  for (auto l : kAllLabels) {
    const auto n = members[label_id(l)].size();
    if (n != per_label || n == 0 || n % 2 != 0) {
      throw PreconditionError("build_pairs needs the same positive even count for every label; " +
                              std::string(label_name(l)) + " has " + std::to_string(n));
    }
  }
  Rng rng(seed);
  std::vector<FinetunePair> pairs;
  pairs.reserve(per_label * kNumLabels);
  for (std::size_t l = 0; l < kNumLabels; ++l) {
    auto pool = members[l];
    rng.shuffle(pool);
    for (std::size_t j = 0; j + 1 < pool.size(); j += 2) {
      pairs.push_back({subset[pool[j]], subset[pool[j + 1]], kSameLabelTarget});
    }
    for (std::size_t j = 0; j < per_label / 2; ++j) {
      const std::size_t a = members[l][rng.index(per_label)];
      std::size_t other = rng.index(kNumLabels - 1);
      if (other >= l) ++other;
      const std::size_t b = members[other][rng.index(per_label)];
      pairs.push_back({subset[a], subset[b], kCrossLabelTarget});
    }
  }
  return pairs;
}

std::vector<std::size_t> nearest_neighbors(const std::vector<LabeledPoint>& points, std::size_t i,
                                           std::size_t k) {
  std::vector<std::size_t> members;
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (points[j].label == points[i].label) members.push_back(j);
  }
  return nearest_among(points, members, i, k);
}

std::vector<LabeledPoint> smote_oversample(const std::vector<LabeledPoint>& points,
                                           const SmoteConfig& config, Seed seed) {
  if (config.k == 0) throw PreconditionError("SMOTE needs k >= 1");
  const auto labels = labels_of(points);
  const auto members = group(labels);
  for (auto l : kAllLabels) {
    const auto n = members[label_id(l)].size();
    if (n < 2) {
      throw PreconditionError("SMOTE needs at least 2 points in class " + std::string(label_name(l)));
    }
    if (config.target_per_class < n) {
      throw PreconditionError("class " + std::string(label_name(l)) + " already has " + std::to_string(n) +
                              " points, more than the target " + std::to_string(config.target_per_class));
    }
  }
  const std::size_t dim = points.front().features.size();
  for (const auto& p : points) {
    if (p.features.size() != dim) throw DimensionMismatch(dim, p.features.size());
  }

  Rng rng(seed);
  std::vector<LabeledPoint> out;
  out.reserve(config.target_per_class * kNumLabels);
  for (const auto& pool : members) {
    for (auto i : pool) {
      LabeledPoint p = points[i];
      p.origin = static_cast<std::ptrdiff_t>(i);
      out.push_back(std::move(p));
    }
    const std::size_t needed = config.target_per_class - pool.size();
    std::vector<std::vector<std::size_t>> neighbors(std::min(needed, pool.size()));
    for (std::size_t g = 0; g < needed; ++g) {
      const std::size_t slot = g % pool.size();
      const std::size_t base = pool[slot];
      if (neighbors[slot].empty()) neighbors[slot] = nearest_among(points, pool, base, config.k);
      const auto& nn = neighbors[slot];
      const std::size_t pick = nn[rng.index(nn.size())];
      const double u = rng.uniform();
      LabeledPoint s;
      s.label = points[base].label;
      s.features.resize(dim);
      const auto& x = points[base].features;
      const auto& y = points[pick].features;
      for (std::size_t d = 0; d < dim; ++d) s.features[d] = x[d] + u * (y[d] - x[d]);
      out.push_back(std::move(s));
    }
  }
  return out;
}

nlohmann::ordered_json balance_report_json(const BalanceReport& report) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  std::array<std::size_t, 4> totals{};
  for (auto l : kAllLabels) {
    const auto i = label_id(l);
    rows.push_back({{"class", label_name(l)},
                    {"dataset", report.dataset[i]},
                    {"undersampling", report.undersampling[i]},
                    {"finetuning", report.finetuning[i]},
                    {"oversampling", report.oversampling[i]}});
    totals[0] += report.dataset[i];
    totals[1] += report.undersampling[i];
    totals[2] += report.finetuning[i];
    totals[3] += report.oversampling[i];
  }
  return {{"classes", std::move(rows)},
          {"total",
           {{"dataset", totals[0]},
            {"undersampling", totals[1]},
            {"finetuning", totals[2]},
            {"oversampling", totals[3]}}}};
}

}  // namespace rscope
