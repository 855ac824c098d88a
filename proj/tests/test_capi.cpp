#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "redactscope/redactscope.h"

namespace {

namespace fs = std::filesystem;

std::string take(char* s) {
  std::string out = s ? s : "";
  rs_string_free(s);
  return out;
}

TEST(CApi, StatusNamesAndVersion) {
  EXPECT_STREQ(rs_status_name(RS_OK), "ok");
  EXPECT_STREQ(rs_status_name(RS_E_CONFIG), "configuration error");
  EXPECT_STRNE(rs_version(), "");
  EXPECT_EQ(rs_label_name(8), nullptr);
  EXPECT_STREQ(rs_label_name(7), "CODE");
}

TEST(CApi, IngestAndErrors) {
  char* samples = nullptr;
  char* stats = nullptr;
  const std::string corpus =
      R"([{"id":"d","text":"Paolo was in Amsterdam.","annotations":[{"start":0,"end":5,"label":"PERSON"}]}])";
  ASSERT_EQ(rs_ingest(corpus.data(), corpus.size(), &samples, &stats), RS_OK);
  EXPECT_NE(take(samples).find("***** was in Amsterdam."), std::string::npos);
  EXPECT_EQ(nlohmann::json::parse(take(stats))["samples"], 1);

  const std::string bad = R"([{"id":"d","text":"ab","annotations":[{"start":0,"end":9,"label":"PERSON"}]}])";
  EXPECT_EQ(rs_ingest(bad.data(), bad.size(), nullptr, nullptr), RS_E_VALIDATION);
  EXPECT_NE(std::string(rs_last_error()), "");
  const std::string label = R"([{"id":"d","text":"ab","annotations":[{"start":0,"end":1,"label":"EMAIL"}]}])";
  // Reported per annotation, like any other validation issue.
  EXPECT_EQ(rs_ingest(label.data(), label.size(), nullptr, nullptr), RS_E_VALIDATION);
  EXPECT_NE(std::string(rs_last_error()).find("EMAIL"), std::string::npos);
  EXPECT_EQ(rs_ingest(nullptr, 3, nullptr, nullptr), RS_E_INVALID_ARGUMENT);
}

TEST(CApi, ConfigRoundTrip) {
  rs_config* cfg = nullptr;
  ASSERT_EQ(rs_config_create(&cfg), RS_OK);
  const std::string patch = R"({"model":"rf","epochs":3})";
  EXPECT_EQ(rs_config_merge_json(cfg, patch.data(), patch.size()), RS_OK);
  const std::string unknown = R"({"nope":1})";
  EXPECT_EQ(rs_config_merge_json(cfg, unknown.data(), unknown.size()), RS_E_CONFIG);
  char* json = nullptr;
  ASSERT_EQ(rs_config_to_json(cfg, &json), RS_OK);
  const auto j = nlohmann::json::parse(take(json));
  EXPECT_EQ(j["model"], "rf");
  EXPECT_EQ(j["epochs"], 3);
  EXPECT_EQ(rs_config_load_file(cfg, "/nonexistent.json"), RS_E_IO);
  rs_config_free(cfg);
}

TEST(CApi, EmbedChecksDimension) {
  rs_projection* p = nullptr;
  ASSERT_EQ(rs_projection_identity(&p), RS_OK);
  std::vector<double> v(RS_EMBEDDING_DIM);
  const std::string s = "Paolo was in *********.";
  ASSERT_EQ(rs_embed(p, s.data(), s.size(), v.data(), v.size()), RS_OK);
  double n = 0;
  for (double x : v) n += x * x;
  EXPECT_NEAR(std::sqrt(n), 1.0, 1e-9);
  EXPECT_EQ(rs_embed(p, s.data(), s.size(), v.data(), 10), RS_E_DIMENSION);
  rs_projection_free(p);
}

TEST(CApi, RunPredictAttack) {
  char* corpus = nullptr;
  ASSERT_EQ(rs_generate_synthetic(4, 12, &corpus), RS_OK);
  const fs::path dir = fs::temp_directory_path() / "rscope_capi";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::FILE* f = std::fopen((dir / "corpus.json").c_str(), "wb");
    ASSERT_NE(f, nullptr);
    std::fputs(corpus, f);
    std::fclose(f);
  }
  rs_string_free(corpus);

  rs_config* cfg = nullptr;
  ASSERT_EQ(rs_config_create(&cfg), RS_OK);
  nlohmann::json patch{{"corpus", (dir / "corpus.json").string()},
                       {"output_dir", (dir / "out").string()},
                       {"mode", "baseline"},
                       {"model", "rf"},
                       {"rf_grid_search", false},
                       {"rf_trees", 8},
                       {"smote_target", 15}};
  const std::string p = patch.dump();
  ASSERT_EQ(rs_config_merge_json(cfg, p.data(), p.size()), RS_OK);
  char* metrics = nullptr;
  char* balance = nullptr;
  char* evasion = nullptr;
  ASSERT_EQ(rs_run(cfg, &metrics, &balance, &evasion), RS_OK) << rs_last_error();
  EXPECT_EQ(nlohmann::json::parse(take(metrics))["mode"], "baseline");
  EXPECT_EQ(nlohmann::json::parse(take(balance))["total"]["oversampling"], 120);
  EXPECT_EQ(nlohmann::json::parse(take(evasion))["mode"], "evasion");
  rs_config_free(cfg);

  rs_model* model = nullptr;
  ASSERT_EQ(rs_model_load((dir / "out" / "model.bin").c_str(), &model), RS_OK);
  EXPECT_STREQ(rs_model_kind(model), "rf");
  std::vector<double> emb(RS_EMBEDDING_DIM, 0.01);
  int label = -1;
  double scores[RS_NUM_LABELS];
  ASSERT_EQ(rs_model_predict(model, emb.data(), emb.size(), &label, scores), RS_OK);
  EXPECT_GE(label, 0);
  EXPECT_LT(label, RS_NUM_LABELS);
  EXPECT_EQ(rs_model_predict(model, emb.data(), 5, &label, scores), RS_E_DIMENSION);

  rs_projection* proj = nullptr;
  ASSERT_EQ(rs_projection_identity(&proj), RS_OK);
  const std::string doc = "***** was in *********.";
  char* preds = nullptr;
  ASSERT_EQ(rs_attack(model, proj, doc.data(), doc.size(), &preds), RS_OK);
  EXPECT_EQ(nlohmann::json::parse(take(preds)).size(), 2u);
  rs_projection_free(proj);
  rs_model_free(model);

  EXPECT_EQ(rs_model_load((dir / "missing.bin").c_str(), &model), RS_E_IO);
  fs::remove_all(dir);
}

TEST(CApi, HomoglyphCalls) {
  rs_homoglyph_map* map = nullptr;
  const std::string bad = R"([{"from":"U+0061","to":"U+0062"}])";
  EXPECT_EQ(rs_homoglyph_map_from_json(bad.data(), bad.size(), &map), RS_E_CONFIG);
  ASSERT_EQ(rs_homoglyph_map_default(&map), RS_OK);
  char* out = nullptr;
  ASSERT_EQ(rs_harden(map, "nation", 6, &out), RS_OK);
  const std::string hardened = take(out);
  ASSERT_EQ(rs_detect(map, hardened.data(), hardened.size(), &out), RS_OK);
  const auto hits = nlohmann::json::parse(take(out));
  ASSERT_EQ(hits.size(), 5u);
  EXPECT_EQ(hits[1]["confusable"], "U+0430");
  EXPECT_EQ(hits[1]["original"], "U+0061");
  ASSERT_EQ(rs_fold(map, hardened.data(), hardened.size(), &out), RS_OK);
  EXPECT_EQ(take(out), "nation");
  rs_homoglyph_map_free(map);
}

TEST(CApi, RenderReport) {
  char* out = nullptr;
  const std::string bad = "{\"x\":1}";
  EXPECT_EQ(rs_render_report(bad.data(), bad.size(), &out), RS_E_PARSE);
}

}  // namespace
