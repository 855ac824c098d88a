#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("rscope_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) {
    const std::string cmd = std::string(REDACTSCOPE_CLI) + " " + args + " >" + path("stdout") + " 2>" + path("stderr");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string read(const std::string& name) const {
    std::ifstream in(path(name), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  void write(const std::string& name, const std::string& data) const {
    std::ofstream(path(name), std::ios::binary) << data;
  }

  fs::path dir_;
};

TEST_F(Cli, HelpAndUsage) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("run --mode baseline --seed 1"), 2);  // --model missing
}

TEST_F(Cli, GenerateThenIngest) {
  ASSERT_EQ(run("generate --seed 3 --per-class 10 -o " + path("corpus.json")), 0);
  EXPECT_EQ(nlohmann::json::parse(read("corpus.json")).size(), 80u);
  ASSERT_EQ(run("ingest " + path("corpus.json") + " -o " + path("samples.jsonl") + " --stats " + path("stats.json")), 0);
  EXPECT_EQ(nlohmann::json::parse(read("stats.json"))["samples"], 80);
  ASSERT_EQ(run("ingest " + path("corpus.json") + " -o " + path("samples.jsonl")), 0);
  EXPECT_NE(read("stderr").find("PERSON"), std::string::npos);
}

TEST_F(Cli, IngestBadInput) {
  write("bad.json", "[{\"id\": ");
  EXPECT_EQ(run("ingest " + path("bad.json")), 2);
  EXPECT_NE(read("stderr").find("parse"), std::string::npos);
  write("empty.json", "[]");
  EXPECT_EQ(run("ingest " + path("empty.json") + " -o " + path("s.jsonl")), 0);
  EXPECT_EQ(read("s.jsonl"), "");
  EXPECT_EQ(run("ingest " + path("missing.json")), 2);
}

TEST_F(Cli, HardenFoldDetect) {
  write("in.txt", "nation");
  ASSERT_EQ(run("harden " + path("in.txt")), 0);
  const std::string hardened = read("stdout");
  EXPECT_EQ(hardened, "ոаtіоո");
  write("hard.txt", hardened);
  ASSERT_EQ(run("fold " + path("hard.txt")), 0);
  EXPECT_EQ(read("stdout"), "nation");
  ASSERT_EQ(run("detect " + path("hard.txt")), 0);
  EXPECT_EQ(nlohmann::json::parse(read("stdout")).size(), 5u);
  write("map.json", R"([{"from":"U+0061","to":"U+0061"}])");
  EXPECT_EQ(run("harden --map " + path("map.json") + " " + path("in.txt")), 2);
}

TEST_F(Cli, RunAttackReport) {
  ASSERT_EQ(run("generate --seed 5 --per-class 12 -o " + path("corpus.json")), 0);
  write("cfg.json", R"({"rf_grid_search": false, "rf_trees": 8, "finetune_per_label": 4, "finetune_epochs": 1})");
  const std::string out = path("out");
  ASSERT_EQ(run("run --seed 7 --mode finetuned --model rf --config " + path("cfg.json") + " --corpus " +
                path("corpus.json") + " --smote-target 15 --output-dir " + out),
            0)
      << read("stderr");
  EXPECT_EQ(nlohmann::json::parse(read("stdout"))["mode"], "finetuned");
  for (const char* f : {"metrics.json", "balance.json", "model.bin", "projection.bin", "evasion.json"}) {
    EXPECT_TRUE(fs::exists(fs::path(out) / f)) << f;
  }

  write("doc.txt", "It happened on **********. ***** was in *********.");
  ASSERT_EQ(run("attack --model " + out + "/model.bin --projection " + out + "/projection.bin " + path("doc.txt")), 0);
  EXPECT_EQ(nlohmann::json::parse(read("stdout")).size(), 3u);
  write("none.txt", "Nothing here.");
  ASSERT_EQ(run("attack --model " + out + "/model.bin " + path("none.txt")), 0);
  EXPECT_TRUE(nlohmann::json::parse(read("stdout")).empty());

  ASSERT_EQ(run("report " + out + "/evasion.json"), 0);
  EXPECT_NE(read("stdout").find("folded"), std::string::npos);
  EXPECT_EQ(run("report " + path("doc.txt")), 2);

  write("unknown.json", R"({"colour": 1})");
  EXPECT_EQ(run("run --seed 1 --mode baseline --model rf --config " + path("unknown.json")), 2);
  EXPECT_EQ(run("run --seed 1 --mode sideways --model rf --corpus " + path("corpus.json")), 2);
  EXPECT_EQ(run("attack --model " + path("missing.bin") + " " + path("doc.txt")), 1);
}

}  // namespace
