#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "embed.hpp"
#include "random.hpp"

namespace rscope {

// Every operation here is a pure function of (input, seed). Index selections
// come back sorted by input position.

/// Index-level undersampling: every class keeps exactly min-class-count members.
/// Throws EmptyClass when any of the eight labels is absent.
std::vector<std::size_t> undersample_indices(std::span<const EntityLabel> labels, Seed seed);

struct SubsetIndices {
  std::vector<std::size_t> subset;
  std::vector<std::size_t> remainder;
};
SubsetIndices finetune_subset_indices(std::span<const EntityLabel> labels, std::size_t per_label, Seed seed);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};
/// Stratified split; per class the train side gets floor(fraction * n + 0.5).
SplitIndices split_indices(std::span<const EntityLabel> labels, double train_fraction, Seed seed);

/// k-fold assignment, stratified: within each class (shuffled) members are dealt
/// round-robin. Returns the fold of each input position.
std::vector<std::size_t> stratified_folds(std::span<const EntityLabel> labels, std::size_t folds, Seed seed);

std::vector<RedactedSample> undersample(const std::vector<RedactedSample>& samples, Seed seed);

struct FinetuneSplit {
  std::vector<RedactedSample> subset;
  std::vector<RedactedSample> remainder;
};
FinetuneSplit extract_finetune_subset(const std::vector<RedactedSample>& balanced,
                                      std::size_t per_label, Seed seed);

struct FinetunePair {
  RedactedSample sample_a;
  RedactedSample sample_b;
  double target;  // 0.8 same label, 0.2 different labels
};

inline constexpr double kSameLabelTarget = 0.8;
inline constexpr double kCrossLabelTarget = 0.2;

/// Per label (in class order): the label's samples, shuffled and paired off,
/// each pair at 0.8; then as many cross-label pairs at 0.2, each taking a random
/// sample of the label and a random sample of a random other label. Requires the
/// same even, positive count for every label.
std::vector<FinetunePair> build_pairs(const std::vector<RedactedSample>& subset, Seed seed);

struct LabeledPoint {
  std::vector<double> features;
  EntityLabel label = EntityLabel::kMisc;
  /// Position in the oversampler's input for real points; -1 for synthetic ones.
  std::ptrdiff_t origin = -1;
};

struct SmoteConfig {
  std::size_t target_per_class = 3500;
  std::size_t k = 5;
};

/// SMOTE: each synthetic point is x + u (y - x) with x a real point of the class
/// (taken round-robin), y one of x's k nearest same-class neighbours (Euclidean,
/// ties by input position) picked uniformly, and u uniform in [0, 1). Output per
/// class: the real points in input order, then synthetics in generation order.
std::vector<LabeledPoint> smote_oversample(const std::vector<LabeledPoint>& points,
                                           const SmoteConfig& config, Seed seed);

/// The k nearest same-class neighbours of `points[i]` (by input position).
std::vector<std::size_t> nearest_neighbors(const std::vector<LabeledPoint>& points, std::size_t i,
                                           std::size_t k);

template <class T>
std::vector<T> gather(const std::vector<T>& items, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(items[i]);
  return out;
}

inline EntityLabel label_of(const RedactedSample& s) { return s.label; }
inline EntityLabel label_of(const LabeledPoint& p) { return p.label; }

template <class T>
std::vector<EntityLabel> labels_of(const std::vector<T>& items) {
  std::vector<EntityLabel> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(label_of(item));
  return out;
}

template <class T>
std::pair<std::vector<T>, std::vector<T>> split_train_test(const std::vector<T>& items,
                                                           double train_fraction, Seed seed) {
  const auto labels = labels_of(items);
  const auto s = split_indices(labels, train_fraction, seed);
  return {gather(items, s.train), gather(items, s.test)};
}

template <class T>
LabelCounts count_labels(const std::vector<T>& items) {
  LabelCounts c{};
  for (const auto& item : items) ++c[label_id(label_of(item))];
  return c;
}

/// Four-stage balancing report, one row per class plus totals.
struct BalanceReport {
  LabelCounts dataset{};
  LabelCounts undersampling{};
  LabelCounts finetuning{};  // remainder after the fine-tune subset is removed
  LabelCounts oversampling{};
};

nlohmann::ordered_json balance_report_json(const BalanceReport& report);

}  // namespace rscope
