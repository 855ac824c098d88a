#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "binio.hpp"
#include "errors.hpp"
#include "pipeline.hpp"
#include "synthetic.hpp"

namespace rscope {
namespace {

namespace fs = std::filesystem;

PipelineConfig tiny_config(PipelineMode mode) {
  PipelineConfig c;
  c.mode = mode;
  c.model = ModelKind::kRandomForest;
  c.seed = Seed{17};
  c.finetune_per_label = 4;
  c.finetune_epochs = 2;
  c.smote_target = 15;
  c.rf_grid_search = false;
  c.rf_params = {10, SplitCriterion::kGini, 0};
  return c;
}

std::vector<RedactedSample> tiny_samples() {
  return ingest_corpus(serialize_corpus(generate_synthetic(Seed{1}, 12))).samples;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("rscope_test_" + name);
  fs::remove_all(dir);
  return dir;
}

TEST(Generate, CountsAndValidity) {
  const auto docs = generate_synthetic(Seed{9}, 10);
  ASSERT_EQ(docs.size(), 80u);
  LabelCounts expected{};
  expected.fill(10);
  EXPECT_EQ(corpus_stats(docs), expected);
  const auto text = serialize_corpus(docs);
  EXPECT_EQ(parse_corpus(text), docs);
  EXPECT_EQ(serialize_corpus(generate_synthetic(Seed{9}, 10)), text);
  EXPECT_NE(serialize_corpus(generate_synthetic(Seed{10}, 10)), text);
}

TEST(Generate, ExplicitCounts) {
  const LabelCounts counts{3, 0, 1, 2, 5, 1, 1, 4};
  EXPECT_EQ(corpus_stats(generate_synthetic(Seed{1}, counts)), counts);
}

TEST(Ingest, EmptyCorpus) {
  const auto r = ingest_corpus("[]");
  EXPECT_TRUE(r.samples.empty());
  const auto j = ingest_stats_json(r);
  EXPECT_EQ(j["documents"], 0);
  for (const auto& row : j["classes"]) EXPECT_EQ(row["samples"], 0);
}

TEST(Ingest, BadJson) { EXPECT_THROW(ingest_corpus("[{"), ParseError); }

TEST(Ingest, OneSamplePerAnnotation) {
  const auto r = ingest_corpus(serialize_corpus(generate_synthetic(Seed{2}, 5)));
  EXPECT_EQ(r.samples.size(), 40u);
  EXPECT_EQ(r.straddling, 0u);
}

TEST(Config, MergeAndErrors) {
  const auto c = config_from_json(R"({"mode":"baseline","model":"cnn","seed":5,"smote_target":100,"rf_criterion":"entropy"})");
  EXPECT_EQ(c.mode, PipelineMode::kBaseline);
  EXPECT_EQ(c.model, ModelKind::kCnn);
  EXPECT_EQ(c.seed.value, 5u);
  EXPECT_EQ(c.smote_target, 100u);
  EXPECT_EQ(c.rf_params.criterion, SplitCriterion::kEntropy);
  EXPECT_EQ(c.finetune_per_label, 250u);

  EXPECT_THROW(config_from_json(R"({"colour":"blue"})"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"epochs":"many"})"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"epochs":-3})"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"mode":"turbo"})"), ConfigError);
  EXPECT_THROW(config_from_json(R"([1,2])"), ConfigError);

  const auto round = config_from_json(config_to_json(c).dump());
  EXPECT_EQ(config_to_json(round), config_to_json(c));
}

TEST(BalanceSamples, StageCounts) {
  const auto samples = tiny_samples();
  const auto fin = balance_samples(samples, tiny_config(PipelineMode::kFinetuned));
  LabelCounts four{}, eight{}, twelve{};
  four.fill(4);
  eight.fill(8);
  twelve.fill(12);
  EXPECT_EQ(fin.undersampled, twelve);
  EXPECT_EQ(count_labels(fin.finetune_subset), four);
  EXPECT_EQ(count_labels(fin.pool), eight);

  const auto base = balance_samples(samples, tiny_config(PipelineMode::kBaseline));
  EXPECT_TRUE(base.finetune_subset.empty());
  EXPECT_EQ(count_labels(base.pool), twelve);

  auto capped = tiny_config(PipelineMode::kBaseline);
  capped.undersample_per_class = 7;
  LabelCounts seven{};
  seven.fill(7);
  EXPECT_EQ(count_labels(balance_samples(samples, capped).pool), seven);
  capped.undersample_per_class = 13;
  EXPECT_THROW(balance_samples(samples, capped), PreconditionError);
}

TEST(Run, ReportsAndFiles) {
  const auto dir = scratch("run");
  auto cfg = tiny_config(PipelineMode::kFinetuned);
  cfg.output_dir = dir.string();
  const auto r = run_pipeline(tiny_samples(), cfg);
  EXPECT_EQ(r.metrics.mode, "finetuned");
  EXPECT_EQ(r.metrics.model, "rf");
  EXPECT_EQ(r.finetune_loss.size(), 2u);
  LabelCounts fifteen{};
  fifteen.fill(15);
  EXPECT_EQ(r.balance.oversampling, fifteen);
  // 15 per class: 13 train (12.75 rounds up), 2 test.
  EXPECT_EQ(r.metrics.confusion.total(), 16u);
  ASSERT_TRUE(r.evasion.has_value());
  EXPECT_EQ((*r.evasion)["mode"], "evasion");
  EXPECT_EQ((*r.evasion)["folded_accuracy"], (*r.evasion)["undefended_accuracy"]);
  for (const char* f : {"metrics.json", "balance.json", "model.bin", "projection.bin", "evasion.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const auto loaded = load_classifier_file((dir / "model.bin").string());
  EXPECT_EQ(loaded->serialize(), r.model->serialize());
  fs::remove_all(dir);
}

TEST(Run, BaselineModeSkipsProjection) {
  const auto dir = scratch("baseline");
  auto cfg = tiny_config(PipelineMode::kBaseline);
  cfg.output_dir = dir.string();
  cfg.evasion = false;
  const auto r = run_pipeline(tiny_samples(), cfg);
  EXPECT_EQ(r.metrics.mode, "baseline");
  EXPECT_FALSE(r.projection.trained());
  EXPECT_FALSE(r.evasion.has_value());
  EXPECT_FALSE(fs::exists(dir / "projection.bin"));
  EXPECT_FALSE(fs::exists(dir / "evasion.json"));
  EXPECT_EQ(r.balance.finetuning, r.balance.undersampling);
  fs::remove_all(dir);
}

TEST(Run, Deterministic) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  auto cfg = tiny_config(PipelineMode::kFinetuned);
  cfg.output_dir = a.string();
  run_pipeline(tiny_samples(), cfg);
  cfg.output_dir = b.string();
  run_pipeline(tiny_samples(), cfg);
  for (const char* f : {"metrics.json", "balance.json", "model.bin", "projection.bin", "evasion.json"}) {
    EXPECT_EQ(binio::read_file((a / f).string()), binio::read_file((b / f).string())) << f;
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Run, GridSearchPicksFromGrid) {
  auto cfg = tiny_config(PipelineMode::kBaseline);
  cfg.rf_grid_search = true;
  cfg.rf_folds = 3;
  cfg.evasion = false;
  const auto r = run_pipeline(tiny_samples(), cfg);
  ASSERT_TRUE(r.rf_params.has_value());
  const auto points = ForestGrid{}.points();
  EXPECT_NE(std::find(points.begin(), points.end(), *r.rf_params), points.end());
}

TEST(Run, NeedsInput) {
  EXPECT_THROW(run_pipeline(tiny_config(PipelineMode::kBaseline)), Error);
  auto cfg = tiny_config(PipelineMode::kBaseline);
  cfg.corpus_path = "/nonexistent/corpus.json";
  EXPECT_THROW(run_pipeline(cfg), IoError);
}

class AttackFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    auto cfg = tiny_config(PipelineMode::kBaseline);
    cfg.evasion = false;
    result_ = new RunResult(run_pipeline(tiny_samples(), cfg));
  }
  static void TearDownTestSuite() { delete result_; }
  static RunResult* result_;
};

RunResult* AttackFixture::result_ = nullptr;

TEST_F(AttackFixture, OneTwoNone) {
  const auto& model = *result_->model;
  const auto one = attack_document("It happened on **********.", model, result_->projection);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].span, (Span{15, 25}));

  const auto two = attack_document("***** was in *********.", model, result_->projection);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].span, (Span{0, 5}));
  EXPECT_EQ(two[1].span, (Span{13, 22}));
  // Each run is scored with the other one removed.
  EXPECT_EQ(two[0].scores, model.predict(embed("***** was in .", result_->projection)).scores);
  EXPECT_EQ(two[1].scores, model.predict(embed(" was in *********.", result_->projection)).scores);

  EXPECT_TRUE(attack_document("Nothing redacted here.", model, result_->projection).empty());

  const auto j = attack_json(two);
  EXPECT_EQ(j[1]["span"][0], 13);
  EXPECT_EQ(j[1]["scores"].size(), 8u);
}

TEST_F(AttackFixture, SplitsSentences) {
  const auto preds = attack_document("It happened on **********. ***** was in Amsterdam.", *result_->model,
                                     result_->projection);
  ASSERT_EQ(preds.size(), 2u);
  EXPECT_EQ(preds[1].sentence, "***** was in Amsterdam.");
}

TEST(Report, RendersKnownShapes) {
  MetricsReport m{"dnn", "finetuned", 0.9, 0.85, {}, 1};
  m.confusion.add(0, 0);
  const auto text = render_report(dump_json(metrics_json(m)));
  EXPECT_NE(text.find("0.8500"), std::string::npos);
  EXPECT_NE(text.find("DATETIME"), std::string::npos);

  BalanceReport b;
  b.dataset.fill(3);
  EXPECT_NE(render_report(dump_json(balance_report_json(b))).find("24"), std::string::npos);
  EXPECT_NE(render_report(dump_json(ingest_stats_json(ingest_corpus("[]")))).find("0"), std::string::npos);

  EXPECT_THROW(render_report(R"({"what":1})"), ParseError);
  EXPECT_THROW(render_report("{"), ParseError);
}

}  // namespace
}  // namespace rscope
