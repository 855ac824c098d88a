#include "classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "binio.hpp"
#include "errors.hpp"
#include "nnet/adam.hpp"

namespace rscope {

namespace {

constexpr std::string_view kForestMagic = "RBRF1";
constexpr std::string_view kNetworkMagic = "RBNN1";

std::array<double, kNumLabels> to_scores(std::span<const double> row) {
  std::array<double, kNumLabels> s{};
  std::copy_n(row.begin(), kNumLabels, s.begin());
  return s;
}

Prediction make_prediction(const std::array<double, kNumLabels>& scores) {
  return {label_from_id(argmax(scores)), scores};
}

void check_dataset(const Dataset& data, std::size_t dim) {
  if (data.features.rank() != 2 || data.features.dim(0) != data.size()) {
    throw ShapeMismatch("dataset features " + data.features.shape_string() + " do not match " +
                        std::to_string(data.size()) + " labels");
  }
  if (data.dim() != dim) throw DimensionMismatch(dim, data.dim());
  for (auto l : data.labels) {
    if (l >= kNumLabels) throw PreconditionError("label id " + std::to_string(l) + " out of range");
  }
}

nnet::Tensor gather_rows(const nnet::Tensor& x, std::span<const std::size_t> rows) {
  const std::size_t d = x.size() / std::max<std::size_t>(x.dim(0), 1);
  nnet::Tensor out({rows.size(), d});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(rows[r] * d), d,
                out.data().begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  return out;
}

}  // namespace

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kDnn: return "dnn";
    case ModelKind::kCnn: return "cnn";
    case ModelKind::kRandomForest: return "rf";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "dnn") return ModelKind::kDnn;
  if (s == "cnn") return ModelKind::kCnn;
  if (s == "rf") return ModelKind::kRandomForest;
  throw ConfigError("unknown model kind '" + std::string(s) + "' (expected dnn, cnn or rf)");
}

Dataset make_dataset(const std::vector<LabeledPoint>& points) {
  Dataset data;
  const std::size_t d = points.empty() ? 0 : points.front().features.size();
  data.features = nnet::Tensor({points.size(), d});
  data.labels.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].features.size() != d) throw DimensionMismatch(d, points[i].features.size());
    std::copy(points[i].features.begin(), points[i].features.end(),
              data.features.data().begin() + static_cast<std::ptrdiff_t>(i * d));
    data.labels.push_back(label_id(points[i].label));
  }
  return data;
}

Dataset subset(const Dataset& data, std::span<const std::size_t> rows) {
  Dataset out;
  out.features = gather_rows(data.features, rows);
  out.labels.reserve(rows.size());
  for (auto r : rows) out.labels.push_back(data.labels.at(r));
  return out;
}

std::size_t argmax(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

Prediction Classifier::predict(std::span<const double> embedding) const {
  nnet::Tensor x({1, embedding.size()}, std::vector<double>(embedding.begin(), embedding.end()));
  return predict_batch(x).front();
}

void Classifier::save(const std::string& path) const { binio::write_file(path, serialize()); }

std::unique_ptr<Classifier> load_classifier(std::string_view bytes) {
  if (bytes.starts_with(kForestMagic)) {
    return std::make_unique<RandomForest>(RandomForest::deserialize(bytes));
  }
  if (bytes.starts_with(kNetworkMagic)) {
    auto net = nnet::Network::deserialize(bytes);
    const bool conv = std::any_of(net.layers().begin(), net.layers().end(), [](const auto& l) {
      return dynamic_cast<const nnet::Conv1D*>(l.get()) != nullptr;
    });
    if (net.output_width() != kNumLabels) {
      throw ParseError("model has " + std::to_string(net.output_width()) + " outputs, expected 8", 0);
    }
    return std::make_unique<NeuralClassifier>(conv ? ModelKind::kCnn : ModelKind::kDnn, std::move(net));
  }
  throw ParseError("unrecognised model file", 0);
}

std::unique_ptr<Classifier> load_classifier_file(const std::string& path) {
  return load_classifier(binio::read_file(path));
}

// ---- Neural models ----------------------------------------------------------

nnet::Network make_dnn(std::size_t input_dim) {
  nnet::Network net({input_dim});
  const std::array<std::size_t, 6> widths{input_dim, 512, 256, 128, 64, kNumLabels};
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    if (i) net.emplace<nnet::Relu>();
    net.emplace<nnet::Dense>(widths[i], widths[i + 1]);
  }
  return net;
}

nnet::Network make_cnn(std::size_t input_dim) {
  constexpr std::size_t kFilters = 16;
  nnet::Network net({1, input_dim});
  net.emplace<nnet::Conv1D>(1, kFilters, 16, 1)
      .emplace<nnet::Relu>()
      .emplace<nnet::MaxPool1D>(8, 2)
      .emplace<nnet::Conv1D>(kFilters, kFilters, 16, 2)
      .emplace<nnet::Relu>()
      .emplace<nnet::MaxPool1D>(8, 2);
  const auto flat = nnet::Tensor::count(net.shape_trace().back());
  if (input_dim == 768 && flat != 1376) {
    throw ShapeMismatch("cnn flatten width is " + std::to_string(flat) + ", expected 1376");
  }
  net.emplace<nnet::Reshape>(std::vector<std::size_t>{flat});
  const std::array<std::size_t, 5> widths{flat, flat / 2, flat / 4, flat / 8, kNumLabels};
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    if (i) net.emplace<nnet::Relu>();
    net.emplace<nnet::Dense>(widths[i], widths[i + 1]);
  }
  return net;
}

std::vector<Prediction> NeuralClassifier::predict_batch(const nnet::Tensor& features) const {
  // Chunked so convolution buffers stay small on large test sets.
  constexpr std::size_t kChunk = 256;
  if (features.rank() == 0) throw ShapeMismatch("empty feature tensor");
  const std::size_t n = features.dim(0);
  std::vector<Prediction> out;
  out.reserve(n);
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < n; start += kChunk) {
    rows.resize(std::min(kChunk, n - start));
    std::iota(rows.begin(), rows.end(), start);
    const auto probs = nnet::softmax(net_.infer(gather_rows(features, rows)));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out.push_back(make_prediction(to_scores(probs.data().subspan(r * kNumLabels, kNumLabels))));
    }
  }
  return out;
}

TrainConfig TrainConfig::defaults(ModelKind kind) {
  TrainConfig c;
  c.kind = kind;
  c.learning_rate = kind == ModelKind::kCnn ? 1e-4 : 5e-5;
  return c;
}

NeuralClassifier train_network(nnet::Network net, const Dataset& train, const TrainConfig& config,
                               TrainHistory* history) {
  if (config.batch_size == 0 || !(config.learning_rate > 0.0)) {
    throw PreconditionError("batch size and learning rate must be positive");
  }
  check_dataset(train, nnet::Tensor::count(net.input_shape()));
  net.initialize(derive_seed(config.seed, "classify.init"));
  Rng rng(derive_seed(config.seed, "classify.batches"));
  nnet::AdamState adam;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      const auto x = gather_rows(train.features, rows);
      std::vector<std::size_t> y;
      y.reserve(rows.size());
      for (auto r : rows) y.push_back(train.labels[r]);
      total += net.loss_and_gradients(x, y) * static_cast<double>(rows.size());
      auto grads = net.gradients();
      adam_step(net.parameters(), {grads.begin(), grads.end()}, adam, config.learning_rate);
    }
    if (history) history->epoch_loss.push_back(order.empty() ? 0.0 : total / static_cast<double>(order.size()));
  }
  return NeuralClassifier(config.kind, std::move(net));
}

// ---- Random forest ----------------------------------------------------------

std::string_view criterion_name(SplitCriterion c) {
  switch (c) {
    case SplitCriterion::kGini: return "gini";
    case SplitCriterion::kEntropy: return "entropy";
    case SplitCriterion::kLogLoss: return "log_loss";
  }
  return "?";
}

SplitCriterion parse_criterion(std::string_view s) {
  if (s == "gini") return SplitCriterion::kGini;
  if (s == "entropy") return SplitCriterion::kEntropy;
  if (s == "log_loss") return SplitCriterion::kLogLoss;
  throw ConfigError("unknown split criterion '" + std::string(s) + "'");
}

double node_impurity(SplitCriterion c, std::span<const std::size_t> counts) {
  const double n = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  if (n == 0.0) return 0.0;
  double acc = 0.0;
  for (auto k : counts) {
    if (k == 0) continue;
    const double p = static_cast<double>(k) / n;
    acc += c == SplitCriterion::kGini ? p * p : -p * std::log(p);
  }
  return c == SplitCriterion::kGini ? 1.0 - acc : acc;
}

namespace {

using Counts = std::array<std::size_t, kNumLabels>;

struct SplitChoice {
  std::int32_t feature = -1;
  double threshold = 0.0;
  double score = 0.0;  // weighted child impurity
};

struct PendingNode {
  std::uint32_t node;
  std::vector<std::size_t> rows;
  std::size_t depth;
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const ForestParams& params, std::size_t mtry, Rng& rng)
      : data_(data), params_(params), mtry_(std::max<std::size_t>(mtry, 1)), rng_(rng),
        dim_(data.dim()), features_(dim_) {
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  std::vector<TreeNode> build(std::vector<std::size_t> rows) {
    std::vector<TreeNode> nodes(1);
    std::vector<PendingNode> stack;
    stack.push_back({0, std::move(rows), 0});
    while (!stack.empty()) {
      PendingNode p = std::move(stack.back());
      stack.pop_back();
      const Counts counts = count(p.rows);
      nodes[p.node].distribution = distribution(counts, p.rows.size());
      const bool pure = std::count_if(counts.begin(), counts.end(), [](auto k) { return k > 0; }) <= 1;
      const bool depth_reached = params_.max_depth != 0 && p.depth >= params_.max_depth;
      if (pure || depth_reached || p.rows.size() < 2) continue;
      const SplitChoice split = best_split(p.rows, counts);
      if (split.feature < 0) continue;

      std::vector<std::size_t> left, right;
      for (auto r : p.rows) {
        (value(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(r);
      }
      const auto l = static_cast<std::uint32_t>(nodes.size());
      nodes.resize(nodes.size() + 2);
      nodes[p.node].feature = split.feature;
      nodes[p.node].threshold = split.threshold;
      nodes[p.node].left = l;
      nodes[p.node].right = l + 1;
      stack.push_back({l + 1, std::move(right), p.depth + 1});
      stack.push_back({l, std::move(left), p.depth + 1});
    }
    return nodes;
  }

 private:
  double value(std::size_t row, std::size_t f) const { return data_.features[row * dim_ + f]; }

  Counts count(const std::vector<std::size_t>& rows) const {
    Counts c{};
    for (auto r : rows) ++c[data_.labels[r]];
    return c;
  }

  static std::array<double, kNumLabels> distribution(const Counts& c, std::size_t n) {
    std::array<double, kNumLabels> d{};
    for (std::size_t k = 0; k < kNumLabels; ++k) d[k] = n ? static_cast<double>(c[k]) / static_cast<double>(n) : 0.0;
    return d;
  }

  // Draws features in random order until mtry non-constant ones have been
  // scanned (or all are exhausted); keeps the lowest weighted child impurity.
  SplitChoice best_split(const std::vector<std::size_t>& rows, const Counts& total) {
    SplitChoice best;
    std::size_t informative = 0;
    std::vector<std::pair<double, std::size_t>> column(rows.size());
    const double n = static_cast<double>(rows.size());
    for (std::size_t drawn = 0; drawn < dim_ && informative < mtry_; ++drawn) {
      std::swap(features_[drawn], features_[drawn + rng_.index(dim_ - drawn)]);
      const std::size_t f = features_[drawn];
      for (std::size_t i = 0; i < rows.size(); ++i) column[i] = {value(rows[i], f), data_.labels[rows[i]]};
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;
      ++informative;

      Counts left{};
      Counts right = total;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        ++left[column[i].second];
        --right[column[i].second];
        if (column[i].first == column[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double score = (nl * node_impurity(params_.criterion, left) +
                              (n - nl) * node_impurity(params_.criterion, right)) / n;
        if (best.feature < 0 || score < best.score) {
          double thr = 0.5 * (column[i].first + column[i + 1].first);
          if (!(thr < column[i + 1].first)) thr = column[i].first;
          best = {static_cast<std::int32_t>(f), thr, score};
        }
      }
    }
    return best;
  }

  const Dataset& data_;
  const ForestParams& params_;
  std::size_t mtry_;
  Rng& rng_;
  std::size_t dim_;
  std::vector<std::size_t> features_;
};

}  // namespace

DecisionTree DecisionTree::fit(const Dataset& data, std::span<const std::size_t> rows,
                               const ForestParams& params, std::size_t features_per_split, Rng& rng) {
  if (rows.empty()) throw PreconditionError("cannot fit a tree on zero samples");
  DecisionTree tree;
  tree.nodes_ = TreeBuilder(data, params, features_per_split, rng)
                    .build(std::vector<std::size_t>(rows.begin(), rows.end()));
  return tree;
}

const std::array<double, kNumLabels>& DecisionTree::leaf_distribution(std::span<const double> x) const {
  std::uint32_t i = 0;
  while (nodes_[i].feature >= 0) {
    const auto& n = nodes_[i];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes_[i].distribution;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> d(nodes_.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (nodes_[i].feature >= 0) {
      d[nodes_[i].left] = d[i] + 1;
      d[nodes_[i].right] = d[i] + 1;
    }
  }
  return deepest;
}

RandomForest RandomForest::fit(const Dataset& train, const ForestParams& params, Seed seed) {
  if (params.n_estimators == 0) throw PreconditionError("a forest needs at least one tree");
  if (train.size() == 0) throw PreconditionError("cannot fit a forest on zero samples");
  check_dataset(train, train.dim());
  const auto mtry = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(train.dim()))));
  Rng rng(seed);
  RandomForest forest;
  forest.params_ = params;
  forest.dim_ = train.dim();
  forest.trees_.reserve(params.n_estimators);
  std::vector<std::size_t> bootstrap(train.size());
  for (std::size_t t = 0; t < params.n_estimators; ++t) {
    for (auto& r : bootstrap) r = rng.index(train.size());
    forest.trees_.push_back(DecisionTree::fit(train, bootstrap, params, mtry, rng));
  }
  return forest;
}

RandomForest RandomForest::from_trees(ForestParams params, std::size_t dim, std::vector<DecisionTree> trees) {
  RandomForest f;
  f.params_ = params;
  f.dim_ = dim;
  f.trees_ = std::move(trees);
  return f;
}

std::vector<Prediction> RandomForest::predict_batch(const nnet::Tensor& features) const {
  if (features.rank() != 2) throw ShapeMismatch("forest input must be [N, D], got " + features.shape_string());
  if (features.dim(1) != dim_) throw DimensionMismatch(dim_, features.dim(1));
  std::vector<Prediction> out;
  out.reserve(features.dim(0));
  const double n = static_cast<double>(std::max<std::size_t>(trees_.size(), 1));
  for (std::size_t r = 0; r < features.dim(0); ++r) {
    const auto x = features.data().subspan(r * dim_, dim_);
    std::array<std::size_t, kNumLabels> votes{};
    for (const auto& t : trees_) ++votes[argmax(t.leaf_distribution(x))];
    std::array<double, kNumLabels> scores{};
    for (std::size_t k = 0; k < kNumLabels; ++k) scores[k] = static_cast<double>(votes[k]) / n;
    out.push_back(make_prediction(scores));
  }
  return out;
}

// RBRF1: magic, u32 estimators, u8 criterion, u32 max depth, u32 dim, u32 tree
// count, then per tree a u32 node count and per node i32 feature, f64
// threshold, u32 left, u32 right, 8 x f64 distribution.
std::string RandomForest::serialize() const {
  binio::Writer w;
  w.bytes(kForestMagic);
  w.put(static_cast<std::uint32_t>(params_.n_estimators));
  w.put(static_cast<std::uint8_t>(params_.criterion));
  w.put(static_cast<std::uint32_t>(params_.max_depth));
  w.put(static_cast<std::uint32_t>(dim_));
  w.put(static_cast<std::uint32_t>(trees_.size()));
  for (const auto& t : trees_) {
    w.put(static_cast<std::uint32_t>(t.nodes().size()));
    for (const auto& n : t.nodes()) {
      w.put(n.feature);
      w.put(n.threshold);
      w.put(n.left);
      w.put(n.right);
      for (double p : n.distribution) w.put(p);
    }
  }
  return w.take();
}

RandomForest RandomForest::deserialize(std::string_view bytes) {
  binio::Reader r(bytes);
  r.expect_magic(kForestMagic);
  RandomForest f;
  f.params_.n_estimators = r.get<std::uint32_t>();
  const auto crit = r.get<std::uint8_t>();
  if (crit > 2) throw ParseError("unknown split criterion code", r.position());
  f.params_.criterion = static_cast<SplitCriterion>(crit);
  f.params_.max_depth = r.get<std::uint32_t>();
  f.dim_ = r.get<std::uint32_t>();
  const auto trees = r.get<std::uint32_t>();
  for (std::uint32_t t = 0; t < trees; ++t) {
    DecisionTree tree;
    auto& nodes = tree.mutable_nodes();
    nodes.resize(r.get<std::uint32_t>());
    if (nodes.empty()) throw ParseError("empty tree", r.position());
    for (auto& n : nodes) {
      n.feature = r.get<std::int32_t>();
      n.threshold = r.get<double>();
      n.left = r.get<std::uint32_t>();
      n.right = r.get<std::uint32_t>();
      for (double& p : n.distribution) p = r.get<double>();
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      if (n.feature < 0) continue;
      if (static_cast<std::size_t>(n.feature) >= f.dim_ || n.left <= i || n.right <= i ||
          n.left >= nodes.size() || n.right >= nodes.size()) {
        throw ParseError("corrupt tree node " + std::to_string(i), r.position());
      }
    }
    f.trees_.push_back(std::move(tree));
  }
  if (!r.at_end()) throw ParseError("trailing bytes after forest", r.position());
  return f;
}

std::vector<ForestParams> ForestGrid::points() const {
  auto depths = max_depths;
  // Unlimited (0) sorts after every finite depth.
  std::sort(depths.begin(), depths.end(), [](std::size_t a, std::size_t b) {
    if (a == 0 || b == 0) return b == 0 && a != 0;
    return a < b;
  });
  auto trees = n_estimators;
  std::sort(trees.begin(), trees.end());
  auto crits = criteria;
  std::sort(crits.begin(), crits.end());

  std::vector<ForestParams> out;
  for (auto n : trees) {
    for (auto d : depths) {
      for (auto c : crits) out.push_back({n, c, d});
    }
  }
  return out;
}

GridSearchResult grid_search_rf(const Dataset& data, const ForestGrid& grid, std::size_t folds, Seed seed) {
  if (data.size() < folds) {
    throw PreconditionError("grid search needs at least " + std::to_string(folds) + " samples, got " +
                            std::to_string(data.size()));
  }
  const auto points = grid.points();
  if (points.empty()) throw PreconditionError("empty hyper-parameter grid");
  std::vector<EntityLabel> labels;
  labels.reserve(data.size());
  for (auto l : data.labels) labels.push_back(label_from_id(l));
  const auto fold_of = stratified_folds(labels, folds, derive_seed(seed, "classify.folds"));

  std::vector<std::vector<std::size_t>> train_rows(folds), test_rows(folds);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t k = 0; k < folds; ++k) (fold_of[i] == k ? test_rows : train_rows)[k].push_back(i);
  }
  std::vector<Dataset> train_sets, test_sets;
  for (std::size_t k = 0; k < folds; ++k) {
    train_sets.push_back(subset(data, train_rows[k]));
    test_sets.push_back(subset(data, test_rows[k]));
  }

  GridSearchResult result;
  for (std::size_t p = 0; p < points.size(); ++p) {
    const Seed point_seed{seed.value ^ p};
    double sum = 0.0;
    for (std::size_t k = 0; k < folds; ++k) {
      const auto forest = RandomForest::fit(train_sets[k], points[p], Seed{point_seed.value + k});
      sum += evaluate(forest, test_sets[k]).accuracy;
    }
    result.scores.push_back({points[p], sum / static_cast<double>(folds)});
  }
  std::size_t best = 0;
  for (std::size_t p = 1; p < result.scores.size(); ++p) {
    if (result.scores[p].mean_accuracy > result.scores[best].mean_accuracy) best = p;
  }
  result.best = result.scores[best].params;
  return result;
}

// ---- Evaluation -------------------------------------------------------------

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) n += std::accumulate(row.begin(), row.end(), std::size_t{0});
  return n;
}

std::size_t ConfusionMatrix::correct() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < kNumLabels; ++i) n += counts[i][i];
  return n;
}

double ConfusionMatrix::accuracy() const {
  const auto n = total();
  return n ? static_cast<double>(correct()) / static_cast<double>(n) : 0.0;
}

Evaluation evaluate_predictions(std::span<const std::size_t> truth, const std::vector<Prediction>& predictions) {
  if (truth.size() != predictions.size()) {
    throw PreconditionError("truth and prediction counts differ");
  }
  Evaluation e;
  for (std::size_t i = 0; i < truth.size(); ++i) e.confusion.add(truth[i], label_id(predictions[i].label));
  e.accuracy = e.confusion.accuracy();
  return e;
}

Evaluation evaluate(const Classifier& model, const Dataset& test) {
  if (test.size() == 0) return {};
  return evaluate_predictions(test.labels, model.predict_batch(test.features));
}

nlohmann::ordered_json metrics_json(const MetricsReport& report) {
  nlohmann::ordered_json confusion = nlohmann::ordered_json::array();
  for (const auto& row : report.confusion.counts) confusion.push_back(row);
  return {{"model", report.model},
          {"mode", report.mode},
          {"train_accuracy", report.train_accuracy},
          {"test_accuracy", report.test_accuracy},
          {"confusion", std::move(confusion)},
          {"seed", report.seed}};
}

}  // namespace rscope
