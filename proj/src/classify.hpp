#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "balance.hpp"
#include "corpus.hpp"
#include "nnet/network.hpp"
#include "random.hpp"

namespace rscope {

enum class ModelKind { kDnn, kCnn, kRandomForest };

std::string_view model_kind_name(ModelKind kind);  // "dnn", "cnn", "rf"
ModelKind parse_model_kind(std::string_view s);

/// Feature matrix [N, D] plus class ids.
struct Dataset {
  nnet::Tensor features;
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.rank() == 2 ? features.dim(1) : 0; }
};

Dataset make_dataset(const std::vector<LabeledPoint>& points);
Dataset subset(const Dataset& data, std::span<const std::size_t> rows);

struct Prediction {
  EntityLabel label = EntityLabel::kMisc;
  std::array<double, kNumLabels> scores{};
};

/// Index of the largest score; ties go to the lowest class id.
std::size_t argmax(std::span<const double> scores);

class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual ModelKind kind() const = 0;
  /// One prediction per row of `features` ([N, D]). Thread-safe.
  virtual std::vector<Prediction> predict_batch(const nnet::Tensor& features) const = 0;
  Prediction predict(std::span<const double> embedding) const;

  virtual std::string serialize() const = 0;
  void save(const std::string& path) const;
};

/// Loads either a neural model ("RBNN1") or a forest ("RBRF1").
std::unique_ptr<Classifier> load_classifier(std::string_view bytes);
std::unique_ptr<Classifier> load_classifier_file(const std::string& path);

// ---- Neural models -----------------------------------------------------------

/// 768 -> 512 -> 256 -> 128 -> 64 -> 8 with ReLU between layers.
nnet::Network make_dnn(std::size_t input_dim = 768);

/// conv(16, K16, s1) -> ReLU -> maxpool(8, 2) -> conv(16, K16, s2) -> ReLU ->
/// maxpool(8, 2) -> flatten -> 688 -> 344 -> 172 -> 8 with ReLU between dense layers.
/// The input vector is a single channel.
nnet::Network make_cnn(std::size_t input_dim = 768);

class NeuralClassifier final : public Classifier {
 public:
  NeuralClassifier(ModelKind kind, nnet::Network net) : kind_(kind), net_(std::move(net)) {}

  ModelKind kind() const override { return kind_; }
  std::vector<Prediction> predict_batch(const nnet::Tensor& features) const override;
  std::string serialize() const override { return net_.serialize(); }

  const nnet::Network& network() const { return net_; }

 private:
  ModelKind kind_;
  nnet::Network net_;
};

struct TrainConfig {
  ModelKind kind = ModelKind::kDnn;
  std::size_t epochs = 200;
  std::size_t batch_size = 100;
  double learning_rate = 5e-5;  // CNN default is 1e-4
  Seed seed{};

  static TrainConfig defaults(ModelKind kind);
};

struct TrainHistory {
  std::vector<double> epoch_loss;  // sample-weighted mean batch loss per epoch
};

/// Adam + cross-entropy, batches reshuffled every epoch from the run seed; the
/// last partial batch is kept.
NeuralClassifier train_network(nnet::Network net, const Dataset& train, const TrainConfig& config,
                               TrainHistory* history = nullptr);

// ---- Random forest ------------------------------------------------------------

enum class SplitCriterion { kGini, kEntropy, kLogLoss };

std::string_view criterion_name(SplitCriterion c);
SplitCriterion parse_criterion(std::string_view s);

/// Natural-log entropy; log_loss uses the same impurity.
double node_impurity(SplitCriterion c, std::span<const std::size_t> counts);

struct ForestParams {
  std::size_t n_estimators = 100;
  SplitCriterion criterion = SplitCriterion::kGini;
  std::size_t max_depth = 0;  // 0 = unlimited

  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // go left when x[feature] <= threshold
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  std::array<double, kNumLabels> distribution{};
};

class DecisionTree {
 public:
  /// Fits on `rows` of `data` (duplicates allowed, e.g. a bootstrap sample),
  /// considering at least `features_per_split` non-constant features per split.
  static DecisionTree fit(const Dataset& data, std::span<const std::size_t> rows,
                          const ForestParams& params, std::size_t features_per_split, Rng& rng);

  const std::array<double, kNumLabels>& leaf_distribution(std::span<const double> x) const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t depth() const;

  std::vector<TreeNode>& mutable_nodes() { return nodes_; }

 private:
  std::vector<TreeNode> nodes_;
};

class RandomForest final : public Classifier {
 public:
  RandomForest() = default;

  /// Bootstrap sample per tree, floor(sqrt(D)) candidate features per split.
  static RandomForest fit(const Dataset& train, const ForestParams& params, Seed seed);

  ModelKind kind() const override { return ModelKind::kRandomForest; }
  /// Scores are the fraction of trees voting for each class.
  std::vector<Prediction> predict_batch(const nnet::Tensor& features) const override;
  std::string serialize() const override;
  static RandomForest deserialize(std::string_view bytes);

  const ForestParams& params() const { return params_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }
  std::size_t feature_dim() const { return dim_; }

  static RandomForest from_trees(ForestParams params, std::size_t dim, std::vector<DecisionTree> trees);

 private:
  ForestParams params_;
  std::size_t dim_ = 0;
  std::vector<DecisionTree> trees_;
};

struct ForestGrid {
  std::vector<std::size_t> n_estimators{150, 200, 300};
  std::vector<SplitCriterion> criteria{SplitCriterion::kGini, SplitCriterion::kEntropy,
                                       SplitCriterion::kLogLoss};
  std::vector<std::size_t> max_depths{3, 5, 0};

  /// Grid points ordered by (fewer trees, shallower depth, gini < entropy < log_loss).
  std::vector<ForestParams> points() const;
};

struct GridPointScore {
  ForestParams params;
  double mean_accuracy;
};

struct GridSearchResult {
  ForestParams best;
  std::vector<GridPointScore> scores;  // in grid order
};

/// Stratified k-fold search. Grid point i trains with seed (seed XOR i); the
/// first point in grid order wins ties.
GridSearchResult grid_search_rf(const Dataset& data, const ForestGrid& grid, std::size_t folds, Seed seed);

// ---- Evaluation ---------------------------------------------------------------

/// Rows are true labels, columns predictions.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumLabels>, kNumLabels> counts{};

  void add(std::size_t truth, std::size_t predicted) { ++counts.at(truth).at(predicted); }
  std::size_t total() const;
  std::size_t correct() const;
  double accuracy() const;
};

struct Evaluation {
  double accuracy = 0.0;
  ConfusionMatrix confusion;
};

Evaluation evaluate(const Classifier& model, const Dataset& test);
Evaluation evaluate_predictions(std::span<const std::size_t> truth, const std::vector<Prediction>& predictions);

struct MetricsReport {
  std::string model;
  std::string mode;  // baseline | finetuned | evasion
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  ConfusionMatrix confusion;
  std::uint64_t seed = 0;
};

nlohmann::ordered_json metrics_json(const MetricsReport& report);

}  // namespace rscope
