#include "pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>

#include "binio.hpp"
#include "errors.hpp"
#include "preprocess.hpp"
#include "utf8.hpp"

namespace rscope {

namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

template <class T>
T typed(const Json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const Json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

std::size_t count_value(const Json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

double positive_value(const Json& v, const std::string& key) {
  const double d = typed<double>(v, key);
  if (!(d > 0.0)) throw ConfigError("config key '" + key + "' must be positive");
  return d;
}

using Setter = std::function<void(PipelineConfig&, const Json&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"mode", [](auto& c, const Json& v, const auto& k) { c.mode = parse_mode(typed<std::string>(v, k)); }},
      {"model", [](auto& c, const Json& v, const auto& k) { c.model = parse_model_kind(typed<std::string>(v, k)); }},
      {"seed", [](auto& c, const Json& v, const auto& k) { c.seed = Seed{typed<std::uint64_t>(v, k)}; }},
      {"corpus", [](auto& c, const Json& v, const auto& k) { c.corpus_path = typed<std::string>(v, k); }},
      {"samples", [](auto& c, const Json& v, const auto& k) { c.samples_path = typed<std::string>(v, k); }},
      {"output_dir", [](auto& c, const Json& v, const auto& k) { c.output_dir = typed<std::string>(v, k); }},
      {"undersample_per_class",
       [](auto& c, const Json& v, const auto& k) { c.undersample_per_class = count_value(v, k); }},
      {"finetune_per_label", [](auto& c, const Json& v, const auto& k) { c.finetune_per_label = count_value(v, k); }},
      {"smote_target", [](auto& c, const Json& v, const auto& k) { c.smote_target = count_value(v, k); }},
      {"smote_k", [](auto& c, const Json& v, const auto& k) { c.smote_k = count_value(v, k); }},
      {"train_fraction",
       [](auto& c, const Json& v, const auto& k) {
         c.train_fraction = typed<double>(v, k);
         if (!(c.train_fraction > 0.0 && c.train_fraction <= 1.0)) {
           throw ConfigError("train_fraction must lie in (0, 1]");
         }
       }},
      {"finetune_epochs", [](auto& c, const Json& v, const auto& k) { c.finetune_epochs = count_value(v, k); }},
      {"finetune_learning_rate",
       [](auto& c, const Json& v, const auto& k) { c.finetune_learning_rate = positive_value(v, k); }},
      {"finetune_batch", [](auto& c, const Json& v, const auto& k) { c.finetune_batch = count_value(v, k); }},
      {"epochs", [](auto& c, const Json& v, const auto& k) { c.epochs = count_value(v, k); }},
      {"batch_size", [](auto& c, const Json& v, const auto& k) { c.batch_size = count_value(v, k); }},
      {"learning_rate", [](auto& c, const Json& v, const auto& k) { c.learning_rate = positive_value(v, k); }},
      {"rf_grid_search", [](auto& c, const Json& v, const auto& k) { c.rf_grid_search = typed<bool>(v, k); }},
      {"rf_grid_subset", [](auto& c, const Json& v, const auto& k) { c.rf_grid_subset = count_value(v, k); }},
      {"rf_folds", [](auto& c, const Json& v, const auto& k) { c.rf_folds = count_value(v, k); }},
      {"rf_trees", [](auto& c, const Json& v, const auto& k) { c.rf_params.n_estimators = count_value(v, k); }},
      {"rf_criterion",
       [](auto& c, const Json& v, const auto& k) { c.rf_params.criterion = parse_criterion(typed<std::string>(v, k)); }},
      {"rf_max_depth", [](auto& c, const Json& v, const auto& k) { c.rf_params.max_depth = count_value(v, k); }},
      {"evasion", [](auto& c, const Json& v, const auto& k) { c.evasion = typed<bool>(v, k); }},
      {"evasion_map", [](auto& c, const Json& v, const auto& k) { c.evasion_map_path = typed<std::string>(v, k); }},
      {"evasion_refinetune",
       [](auto& c, const Json& v, const auto& k) { c.evasion_refinetune = typed<bool>(v, k); }},
  };
  return table;
}

std::vector<LabeledPoint> embed_points(const std::vector<RedactedSample>& pool, const Projection& projection) {
  std::vector<LabeledPoint> points;
  points.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    points.push_back({embed(pool[i].redacted_sentence, projection), pool[i].label, static_cast<std::ptrdiff_t>(i)});
  }
  return points;
}

using SentenceTransform = std::function<std::string(std::string_view)>;

FinetuneResult finetune_projection(const std::vector<RedactedSample>& subset, const PipelineConfig& config,
                                   const SentenceTransform& transform, std::string_view stage) {
  const auto pairs = build_pairs(subset, derive_seed(config.seed, "balance.pairs"));
  std::vector<EmbeddedPair> embedded;
  embedded.reserve(pairs.size());
  for (const auto& p : pairs) {
    const auto& a = p.sample_a.redacted_sentence;
    const auto& b = p.sample_b.redacted_sentence;
    embedded.push_back({transform ? embed_base(transform(a)) : embed_base(a),
                        transform ? embed_base(transform(b)) : embed_base(b), p.target});
  }
  FinetuneConfig fc;
  fc.epochs = config.finetune_epochs;
  fc.learning_rate = config.finetune_learning_rate;
  fc.batch_size = config.finetune_batch;
  fc.seed = derive_seed(config.seed, stage);
  return finetune(embedded, fc);
}

struct FittedStage {
  std::unique_ptr<Classifier> model;
  Evaluation train_eval;
  Evaluation test_eval;
  LabelCounts oversampled{};
  std::vector<double> train_loss;
  std::optional<ForestParams> rf_params;
  std::vector<RedactedSample> test_samples;
};

// Embed -> SMOTE -> split -> train -> evaluate for one projection.
FittedStage fit_stage(const std::vector<RedactedSample>& pool, const Projection& projection,
                      const PipelineConfig& config) {
  FittedStage out;
  const auto points = embed_points(pool, projection);
  const auto oversampled = smote_oversample(points, {config.smote_target, config.smote_k},
                                            derive_seed(config.seed, "balance.smote"));
  out.oversampled = count_labels(oversampled);
  const auto split = split_indices(labels_of(oversampled), config.train_fraction,
                                   derive_seed(config.seed, "balance.split"));
  const Dataset train = make_dataset(gather(oversampled, split.train));
  const Dataset test = make_dataset(gather(oversampled, split.test));
  for (auto i : split.test) {
    if (oversampled[i].origin >= 0) out.test_samples.push_back(pool[static_cast<std::size_t>(oversampled[i].origin)]);
  }

  const Seed train_seed = derive_seed(config.seed, "classify.train");
  if (config.model == ModelKind::kRandomForest) {
    ForestParams params = config.rf_params;
    if (config.rf_grid_search) {
      const auto counts = count_labels(gather(oversampled, split.train));
      const std::size_t smallest = *std::min_element(counts.begin(), counts.end());
      const std::size_t per_class = std::min(smallest, config.rf_grid_subset / kNumLabels);
      std::vector<EntityLabel> labels;
      for (auto l : train.labels) labels.push_back(label_from_id(l));
      const auto rows = finetune_subset_indices(labels, per_class, derive_seed(config.seed, "classify.grid_subset"));
      params = grid_search_rf(subset(train, rows.subset), ForestGrid{}, config.rf_folds,
                              derive_seed(config.seed, "classify.grid"))
                   .best;
    }
    out.rf_params = params;
    out.model = std::make_unique<RandomForest>(RandomForest::fit(train, params, train_seed));
  } else {
    TrainConfig tc = TrainConfig::defaults(config.model);
    tc.epochs = config.epochs;
    tc.batch_size = config.batch_size;
    if (config.learning_rate) tc.learning_rate = *config.learning_rate;
    tc.seed = train_seed;
    auto net = config.model == ModelKind::kCnn ? make_cnn(train.dim()) : make_dnn(train.dim());
    TrainHistory history;
    out.model = std::make_unique<NeuralClassifier>(train_network(std::move(net), train, tc, &history));
    out.train_loss = std::move(history.epoch_loss);
  }
  out.train_eval = evaluate(*out.model, train);
  out.test_eval = evaluate(*out.model, test);
  return out;
}

std::vector<RedactedSample> load_samples(const PipelineConfig& config) {
  if (!config.samples_path.empty()) return read_samples_jsonl(binio::read_file(config.samples_path));
  if (!config.corpus_path.empty()) return ingest_corpus(binio::read_file(config.corpus_path)).samples;
  throw ConfigError("config needs either 'samples' or 'corpus'");
}

OrderedJson confusion_json(const ConfusionMatrix& cm) {
  OrderedJson rows = OrderedJson::array();
  for (const auto& row : cm.counts) rows.push_back(row);
  return rows;
}

}  // namespace

std::string_view mode_name(PipelineMode m) { return m == PipelineMode::kBaseline ? "baseline" : "finetuned"; }

PipelineMode parse_mode(std::string_view s) {
  if (s == "baseline") return PipelineMode::kBaseline;
  if (s == "finetuned") return PipelineMode::kFinetuned;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected baseline or finetuned)");
}

PipelineConfig config_from_json(std::string_view json, PipelineConfig base) {
  Json doc;
  try {
    doc = Json::parse(json);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config is not valid JSON (at byte " + std::to_string(e.byte) + ")");
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(base, value, key);
  }
  return base;
}

PipelineConfig load_config(const std::string& path, PipelineConfig base) {
  return config_from_json(binio::read_file(path), std::move(base));
}

OrderedJson config_to_json(const PipelineConfig& c) {
  OrderedJson j{{"mode", mode_name(c.mode)},
                {"model", model_kind_name(c.model)},
                {"seed", c.seed.value},
                {"corpus", c.corpus_path},
                {"samples", c.samples_path},
                {"output_dir", c.output_dir},
                {"undersample_per_class", c.undersample_per_class},
                {"finetune_per_label", c.finetune_per_label},
                {"smote_target", c.smote_target},
                {"smote_k", c.smote_k},
                {"train_fraction", c.train_fraction},
                {"finetune_epochs", c.finetune_epochs},
                {"finetune_learning_rate", c.finetune_learning_rate},
                {"finetune_batch", c.finetune_batch},
                {"epochs", c.epochs},
                {"batch_size", c.batch_size}};
  if (c.learning_rate) j["learning_rate"] = *c.learning_rate;
  j["rf_grid_search"] = c.rf_grid_search;
  j["rf_grid_subset"] = c.rf_grid_subset;
  j["rf_folds"] = c.rf_folds;
  j["rf_trees"] = c.rf_params.n_estimators;
  j["rf_criterion"] = criterion_name(c.rf_params.criterion);
  j["rf_max_depth"] = c.rf_params.max_depth;
  j["evasion"] = c.evasion;
  j["evasion_map"] = c.evasion_map_path;
  j["evasion_refinetune"] = c.evasion_refinetune;
  return j;
}

IngestResult ingest_corpus(std::string_view corpus_json) {
  IngestResult r;
  const auto docs = parse_corpus(corpus_json);
  r.documents = docs.size();
  r.annotations = corpus_stats(docs);
  r.samples = corpus_samples(docs, [&](const std::string&, std::size_t) { ++r.straddling; });
  return r;
}

OrderedJson ingest_stats_json(const IngestResult& r) {
  const auto per_class = count_labels(r.samples);
  OrderedJson classes = OrderedJson::array();
  for (auto l : kAllLabels) {
    classes.push_back({{"class", label_name(l)},
                       {"annotations", r.annotations[label_id(l)]},
                       {"samples", per_class[label_id(l)]}});
  }
  return {{"documents", r.documents},
          {"samples", r.samples.size()},
          {"straddling", r.straddling},
          {"classes", std::move(classes)}};
}

BalancedSets balance_samples(const std::vector<RedactedSample>& samples, const PipelineConfig& config) {
  BalancedSets out;
  out.dataset = count_labels(samples);
  auto balanced = undersample(samples, derive_seed(config.seed, "balance.undersample"));
  if (config.undersample_per_class != 0) {
    const std::size_t have = balanced.size() / kNumLabels;
    if (config.undersample_per_class > have) {
      throw PreconditionError("undersample_per_class " + std::to_string(config.undersample_per_class) +
                              " exceeds the smallest class (" + std::to_string(have) + ")");
    }
    const auto idx = finetune_subset_indices(labels_of(balanced), config.undersample_per_class,
                                             derive_seed(config.seed, "balance.cap"));
    balanced = gather(balanced, idx.subset);
  }
  out.undersampled = count_labels(balanced);
  if (config.mode == PipelineMode::kFinetuned) {
    auto split = extract_finetune_subset(balanced, config.finetune_per_label,
                                         derive_seed(config.seed, "balance.finetune"));
    out.pool = std::move(split.remainder);
    out.finetune_subset = std::move(split.subset);
  } else {
    out.pool = std::move(balanced);
  }
  return out;
}

RunResult run_pipeline(const std::vector<RedactedSample>& samples, const PipelineConfig& config) {
  RunResult result;
  const BalancedSets sets = balance_samples(samples, config);

  if (config.mode == PipelineMode::kFinetuned) {
    auto ft = finetune_projection(sets.finetune_subset, config, {}, "embed.finetune");
    result.projection = std::move(ft.projection);
    result.finetune_loss = std::move(ft.epoch_loss);
  }

  FittedStage fitted = fit_stage(sets.pool, result.projection, config);

  result.balance.dataset = sets.dataset;
  result.balance.undersampling = sets.undersampled;
  result.balance.finetuning = count_labels(sets.pool);
  result.balance.oversampling = fitted.oversampled;

  result.metrics.model = std::string(model_kind_name(config.model));
  result.metrics.mode = std::string(mode_name(config.mode));
  result.metrics.train_accuracy = fitted.train_eval.accuracy;
  result.metrics.test_accuracy = fitted.test_eval.accuracy;
  result.metrics.confusion = fitted.test_eval.confusion;
  result.metrics.seed = config.seed.value;
  result.train_loss = std::move(fitted.train_loss);
  result.rf_params = fitted.rf_params;
  result.test_samples = std::move(fitted.test_samples);

  if (config.evasion && !result.test_samples.empty()) {
    const HomoglyphMap map = config.evasion_map_path.empty()
                                 ? HomoglyphMap::defaults()
                                 : HomoglyphMap::from_json(binio::read_file(config.evasion_map_path));
    const auto ev = evaluate_evasion(*fitted.model, result.projection, result.test_samples, map);
    OrderedJson report{{"model", result.metrics.model},
                       {"mode", "evasion"},
                       {"pipeline_mode", result.metrics.mode},
                       {"train_accuracy", result.metrics.train_accuracy},
                       {"test_accuracy", ev.hardened.accuracy},
                       {"confusion", confusion_json(ev.hardened.confusion)},
                       {"seed", config.seed.value},
                       {"test_samples", result.test_samples.size()},
                       {"undefended_accuracy", ev.undefended.accuracy},
                       {"hardened_accuracy", ev.hardened.accuracy},
                       {"folded_accuracy", ev.folded.accuracy},
                       {"map", OrderedJson::parse(map.to_json())}};
    if (config.evasion_refinetune && config.mode == PipelineMode::kFinetuned) {
      // Adversary-aware variant: the projection is fine-tuned on hardened pairs
      // and the classifier retrained on top of it.
      const SentenceTransform hardened = [&](std::string_view s) { return harden(s, map); };
      const auto ft = finetune_projection(sets.finetune_subset, config, hardened, "embed.finetune");
      const FittedStage refit = fit_stage(sets.pool, ft.projection, config);
      const auto acc = evaluate(*refit.model, embed_samples(refit.test_samples, ft.projection, hardened));
      report["refinetuned_hardened_accuracy"] = acc.accuracy;
    }
    result.evasion = std::move(report);
  }
  result.model = std::move(fitted.model);

  if (!config.output_dir.empty()) {
    const std::filesystem::path dir(config.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    binio::write_file((dir / "metrics.json").string(), dump_json(metrics_json(result.metrics)));
    binio::write_file((dir / "balance.json").string(), dump_json(balance_report_json(result.balance)));
    result.model->save((dir / "model.bin").string());
    if (config.mode == PipelineMode::kFinetuned) result.projection.save((dir / "projection.bin").string());
    if (result.evasion) binio::write_file((dir / "evasion.json").string(), dump_json(*result.evasion));
  }
  return result;
}

RunResult run_pipeline(const PipelineConfig& config) { return run_pipeline(load_samples(config), config); }

std::string dump_json(const OrderedJson& j) { return j.dump(2) + "\n"; }

std::vector<AttackPrediction> attack_document(std::string_view text, const Classifier& model,
                                              const Projection& projection) {
  const std::u32string normalized = normalize_text(utf8::decode(text));
  std::vector<AttackPrediction> out;
  for (const auto& sentence : split_sentences(normalized)) {
    const std::u32string& s = sentence.text;
    std::vector<Span> runs;
    for (std::size_t i = 0; i < s.size();) {
      if (s[i] != U'*') {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < s.size() && s[j] == U'*') ++j;
      runs.push_back({i, j});
      i = j;
    }
    for (const Span& target : runs) {
      std::u32string probe;
      std::size_t r = 0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        while (r < runs.size() && runs[r].end <= i) ++r;
        const bool other = r < runs.size() && runs[r].start <= i && !(runs[r] == target);
        if (!other) probe.push_back(s[i]);
      }
      const auto pred = model.predict(embed(utf8::encode(probe), projection));
      out.push_back({utf8::encode(s), target, pred.label, pred.scores});
    }
  }
  return out;
}

OrderedJson attack_json(const std::vector<AttackPrediction>& predictions) {
  OrderedJson out = OrderedJson::array();
  for (const auto& p : predictions) {
    out.push_back({{"sentence", p.sentence},
                   {"span", {p.span.start, p.span.end}},
                   {"predicted_label", label_name(p.label)},
                   {"scores", p.scores}});
  }
  return out;
}

namespace {

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

std::string render_confusion(const Json& cm) {
  std::ostringstream os;
  os << pad("", 9);
  for (auto l : kAllLabels) os << pad(std::string(label_name(l)).substr(0, 8), 9);
  os << '\n';
  for (std::size_t i = 0; i < cm.size() && i < kNumLabels; ++i) {
    os << pad(std::string(label_name(kAllLabels[i])), 9);
    for (const auto& cell : cm[i]) os << pad(std::to_string(cell.get<std::size_t>()), 9);
    os << '\n';
  }
  return os.str();
}

}  // namespace

std::string render_report(std::string_view json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ParseError("report is not valid JSON", e.byte);
  }
  std::ostringstream os;
  try {
    if (j.is_object() && j.contains("confusion") && j.contains("model")) {
      os << "model           " << j.at("model").get<std::string>() << '\n';
      os << "mode            " << j.at("mode").get<std::string>() << '\n';
      os << "seed            " << j.at("seed").get<std::uint64_t>() << '\n';
      os << "train accuracy  " << fixed(j.at("train_accuracy").get<double>()) << '\n';
      os << "test accuracy   " << fixed(j.at("test_accuracy").get<double>()) << '\n';
      for (const char* key : {"undefended_accuracy", "hardened_accuracy", "folded_accuracy",
                              "refinetuned_hardened_accuracy"}) {
        if (j.contains(key)) os << pad(key, 30) << "  " << fixed(j[key].get<double>()) << '\n';
      }
      os << "\nconfusion (rows = true, columns = predicted)\n" << render_confusion(j.at("confusion"));
    } else if (j.is_object() && j.contains("classes") && j.contains("total")) {
      os << pad("class", 10) << pad("dataset", 10) << pad("under", 10) << pad("finetune", 10) << pad("over", 10)
         << '\n';
      auto row = [&](const std::string& name, const Json& r) {
        os << pad(name, 10);
        for (const char* k : {"dataset", "undersampling", "finetuning", "oversampling"}) {
          os << pad(std::to_string(r.at(k).get<std::size_t>()), 10);
        }
        os << '\n';
      };
      for (const auto& c : j.at("classes")) row(c.at("class").get<std::string>(), c);
      row("total", j.at("total"));
    } else if (j.is_object() && j.contains("documents") && j.contains("classes")) {
      os << "documents   " << j.at("documents").get<std::size_t>() << '\n';
      os << "samples     " << j.at("samples").get<std::size_t>() << '\n';
      os << "straddling  " << j.at("straddling").get<std::size_t>() << "\n\n";
      os << pad("class", 10) << pad("annotated", 12) << pad("samples", 10) << '\n';
      for (const auto& c : j.at("classes")) {
        os << pad(c.at("class").get<std::string>(), 10) << pad(std::to_string(c.at("annotations").get<std::size_t>()), 12)
           << pad(std::to_string(c.at("samples").get<std::size_t>()), 10) << '\n';
      }
    } else {
      throw ParseError("unrecognised report layout", 0);
    }
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what(), 0);
  }
  return os.str();
}

}  // namespace rscope
