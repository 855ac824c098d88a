#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "balance.hpp"
#include "classify.hpp"
#include "corpus.hpp"
#include "embed.hpp"
#include "evade.hpp"

namespace rscope {

enum class PipelineMode { kBaseline, kFinetuned };

std::string_view mode_name(PipelineMode m);
PipelineMode parse_mode(std::string_view s);

/// Everything `run` needs. All randomness is derived from `seed` per stage.
struct PipelineConfig {
  PipelineMode mode = PipelineMode::kFinetuned;
  ModelKind model = ModelKind::kDnn;
  Seed seed{};

  std::string corpus_path;   // annotated corpus JSON, or
  std::string samples_path;  // samples JSONL from `ingest`
  std::string output_dir;    // empty: nothing written

  std::size_t undersample_per_class = 0;  // 0: size of the smallest class
  std::size_t finetune_per_label = 250;
  std::size_t smote_target = 3500;
  std::size_t smote_k = 5;
  double train_fraction = 0.85;

  std::size_t finetune_epochs = 20;
  double finetune_learning_rate = 1e-3;
  std::size_t finetune_batch = 50;

  std::size_t epochs = 200;
  std::size_t batch_size = 100;
  std::optional<double> learning_rate;  // unset: model default

  bool rf_grid_search = true;
  std::size_t rf_grid_subset = 10000;
  std::size_t rf_folds = 5;
  ForestParams rf_params{150, SplitCriterion::kGini, 0};

  bool evasion = true;
  std::string evasion_map_path;  // empty: built-in map
  bool evasion_refinetune = false;
};

/// Flat JSON object whose keys mirror the fields above; unknown keys and
/// mistyped values raise ConfigError. Keys absent from `json` keep `base`.
PipelineConfig config_from_json(std::string_view json, PipelineConfig base = {});
PipelineConfig load_config(const std::string& path, PipelineConfig base = {});
nlohmann::ordered_json config_to_json(const PipelineConfig& config);

// ---- ingest -----------------------------------------------------------------

struct IngestResult {
  std::vector<RedactedSample> samples;
  std::size_t documents = 0;
  std::size_t straddling = 0;
  LabelCounts annotations{};
};

IngestResult ingest_corpus(std::string_view corpus_json);
nlohmann::ordered_json ingest_stats_json(const IngestResult& r);

// ---- balancing ----------------------------------------------------------------

/// Text-level balancing ahead of embedding.
struct BalancedSets {
  std::vector<RedactedSample> pool;             // oversampled after embedding
  std::vector<RedactedSample> finetune_subset;  // empty in baseline mode
  LabelCounts dataset{};
  LabelCounts undersampled{};
};

BalancedSets balance_samples(const std::vector<RedactedSample>& samples, const PipelineConfig& config);

// ---- run ----------------------------------------------------------------------

struct RunResult {
  MetricsReport metrics;
  BalanceReport balance;
  Projection projection;
  std::unique_ptr<Classifier> model;
  std::vector<double> finetune_loss;
  std::vector<double> train_loss;
  std::optional<ForestParams> rf_params;
  std::optional<nlohmann::ordered_json> evasion;
  std::vector<RedactedSample> test_samples;  // real (non-synthetic) test samples
};

/// balance -> (fine-tune) -> embed -> SMOTE -> split -> train -> evaluate; when
/// `config.output_dir` is set, writes metrics.json, balance.json, model.bin,
/// projection.bin (fine-tuned mode) and evasion.json.
RunResult run_pipeline(const std::vector<RedactedSample>& samples, const PipelineConfig& config);
RunResult run_pipeline(const PipelineConfig& config);

std::string dump_json(const nlohmann::ordered_json& j);

// ---- attack -------------------------------------------------------------------

struct AttackPrediction {
  std::string sentence;
  Span span;  // code points, sentence-relative
  EntityLabel label;
  std::array<double, kNumLabels> scores;
};

/// Every maximal asterisk run of the (normalized, sentence-split) document is
/// one redaction. Each is classified with the other runs of its sentence removed.
std::vector<AttackPrediction> attack_document(std::string_view text, const Classifier& model,
                                              const Projection& projection);
nlohmann::ordered_json attack_json(const std::vector<AttackPrediction>& predictions);

/// Plain-text tables for metrics, balance, evasion and ingest-stats JSON.
std::string render_report(std::string_view json_text);

}  // namespace rscope
