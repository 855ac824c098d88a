// Command-line front end. Everything goes through the C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "redactscope/redactscope.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitBadInput = 2;

struct CliFailure {
  int code;
  std::string message;
};

int exit_code_for(rs_status s) {
  switch (s) {
    case RS_OK: return kExitOk;
    case RS_E_PARSE:
    case RS_E_VALIDATION:
    case RS_E_UNKNOWN_LABEL:
    case RS_E_STRADDLING:
    case RS_E_DIMENSION:
    case RS_E_CONFIG:
    case RS_E_INVALID_ARGUMENT:
      return kExitBadInput;
    default:
      return kExitRuntime;
  }
}

void check(rs_status s) {
  if (s != RS_OK) throw CliFailure{exit_code_for(s), std::string(rs_status_name(s)) + ": " + rs_last_error()};
}

// Owns a char* handed out by the library.
class LibString {
 public:
  LibString() = default;
  LibString(const LibString&) = delete;
  LibString& operator=(const LibString&) = delete;
  ~LibString() { rs_string_free(p_); }

  char** out() { return &p_; }
  bool empty() const { return p_ == nullptr; }
  std::string str() const { return p_ ? std::string(p_) : std::string(); }

 private:
  char* p_ = nullptr;
};

template <class T, void (*Free)(T*)>
class Handle {
 public:
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p_); }

  T** out() { return &p_; }
  T* get() const { return p_; }

 private:
  T* p_ = nullptr;
};

using Config = Handle<rs_config, rs_config_free>;
using Model = Handle<rs_model, rs_model_free>;
using ProjectionHandle = Handle<rs_projection, rs_projection_free>;
using MapHandle = Handle<rs_homoglyph_map, rs_homoglyph_map_free>;

std::string read_input(const std::string& path) {
  if (path.empty() || path == "-") {
    return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliFailure{kExitBadInput, "cannot open " + path};
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_output(const std::string& path, const std::string& data) {
  if (path.empty() || path == "-") {
    std::cout << data;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out || !out.write(data.data(), static_cast<std::streamsize>(data.size()))) {
    throw CliFailure{kExitRuntime, "cannot write " + path};
  }
}

void load_map(MapHandle& map, const std::string& path) {
  if (path.empty()) {
    check(rs_homoglyph_map_default(map.out()));
    return;
  }
  const std::string json = read_input(path);
  check(rs_homoglyph_map_from_json(json.data(), json.size(), map.out()));
}

struct RunOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string model;
  std::string corpus;
  std::string samples;
  std::string output_dir;
  std::string evasion_map;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> finetune_epochs;
  std::optional<std::size_t> finetune_per_label;
  std::optional<std::size_t> smote_target;
  std::optional<double> learning_rate;
};

int cmd_run(const RunOptions& o) {
  Config config;
  check(rs_config_create(config.out()));
  if (!o.config_path.empty()) check(rs_config_load_file(config.get(), o.config_path.c_str()));

  nlohmann::json overrides = nlohmann::json::object();
  overrides["seed"] = *o.seed;
  overrides["mode"] = o.mode;
  overrides["model"] = o.model;
  if (!o.corpus.empty()) overrides["corpus"] = o.corpus;
  if (!o.samples.empty()) overrides["samples"] = o.samples;
  if (!o.output_dir.empty()) overrides["output_dir"] = o.output_dir;
  if (!o.evasion_map.empty()) overrides["evasion_map"] = o.evasion_map;
  if (o.epochs) overrides["epochs"] = *o.epochs;
  if (o.finetune_epochs) overrides["finetune_epochs"] = *o.finetune_epochs;
  if (o.finetune_per_label) overrides["finetune_per_label"] = *o.finetune_per_label;
  if (o.smote_target) overrides["smote_target"] = *o.smote_target;
  if (o.learning_rate) overrides["learning_rate"] = *o.learning_rate;
  const std::string patch = overrides.dump();
  check(rs_config_merge_json(config.get(), patch.data(), patch.size()));

  LibString metrics;
  check(rs_run(config.get(), metrics.out(), nullptr, nullptr));
  std::cout << metrics.str();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entity-type inference for redacted text, with a homoglyph countermeasure"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rs_version()));

  // ingest
  std::string ingest_in, ingest_out, ingest_stats;
  auto* ingest = app.add_subcommand("ingest", "Turn an annotated corpus into redacted samples (JSON lines)");
  ingest->add_option("corpus", ingest_in, "Corpus JSON file ('-' for stdin)")->required();
  ingest->add_option("-o,--output", ingest_out, "Samples file (default stdout)");
  ingest->add_option("--stats", ingest_stats, "Write per-class statistics JSON here (default: table on stderr)");

  // generate
  std::uint64_t gen_seed = 0;
  std::size_t gen_per_class = 0;
  std::string gen_out;
  auto* generate = app.add_subcommand("generate", "Write a synthetic annotated corpus");
  generate->add_option("--seed", gen_seed, "Random seed")->required();
  generate->add_option("--per-class", gen_per_class, "Documents per label")->required();
  generate->add_option("-o,--output", gen_out, "Corpus file (default stdout)");

  // run
  RunOptions run_opts;
  auto* run = app.add_subcommand("run", "Balance, embed, train and evaluate; prints the metrics report");
  run->add_option("--config", run_opts.config_path, "JSON key-value config file");
  run->add_option("--seed", run_opts.seed, "Root seed")->required();
  run->add_option("--mode", run_opts.mode, "baseline or finetuned")->required();
  run->add_option("--model", run_opts.model, "dnn, cnn or rf")->required();
  run->add_option("--corpus", run_opts.corpus, "Annotated corpus JSON");
  run->add_option("--samples", run_opts.samples, "Samples JSONL from 'ingest'");
  run->add_option("--output-dir", run_opts.output_dir, "Directory for reports and model files");
  run->add_option("--evasion-map", run_opts.evasion_map, "Homoglyph map JSON");
  run->add_option("--epochs", run_opts.epochs, "Classifier epochs");
  run->add_option("--finetune-epochs", run_opts.finetune_epochs, "Projection fine-tuning epochs");
  run->add_option("--finetune-per-label", run_opts.finetune_per_label, "Fine-tune subset size per label");
  run->add_option("--smote-target", run_opts.smote_target, "Samples per class after oversampling");
  run->add_option("--learning-rate", run_opts.learning_rate, "Classifier learning rate");

  // attack
  std::string attack_model, attack_projection, attack_in, attack_out;
  auto* attack = app.add_subcommand("attack", "Predict the entity type behind every asterisk run of a document");
  attack->add_option("--model", attack_model, "Trained model file")->required();
  attack->add_option("--projection", attack_projection, "Fine-tuned projection (default: identity)");
  attack->add_option("document", attack_in, "Redacted text ('-' or omitted for stdin)");
  attack->add_option("-o,--output", attack_out, "Predictions JSON (default stdout)");

  // harden / fold / detect
  std::string text_map, text_in;
  auto* harden = app.add_subcommand("harden", "Replace mapped letters with look-alike code points");
  auto* fold = app.add_subcommand("fold", "Undo homoglyph substitution");
  auto* detect = app.add_subcommand("detect", "List homoglyphs with their positions");
  for (auto* sub : {harden, fold, detect}) {
    sub->add_option("--map", text_map, "Homoglyph map JSON (default: built-in five letters)");
    sub->add_option("input", text_in, "Input file ('-' or omitted for stdin)");
  }

  // report
  std::string report_in;
  auto* report = app.add_subcommand("report", "Render a JSON report as plain-text tables");
  report->add_option("file", report_in, "Report JSON ('-' for stdin)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (ingest->parsed()) {
      const std::string corpus = read_input(ingest_in);
      LibString samples, stats;
      check(rs_ingest(corpus.data(), corpus.size(), samples.out(), stats.out()));
      write_output(ingest_out, samples.str());
      if (!ingest_stats.empty()) {
        write_output(ingest_stats, stats.str());
      } else {
        const std::string s = stats.str();
        LibString table;
        check(rs_render_report(s.data(), s.size(), table.out()));
        std::cerr << table.str();
      }
    } else if (generate->parsed()) {
      LibString corpus;
      check(rs_generate_synthetic(gen_seed, gen_per_class, corpus.out()));
      write_output(gen_out, corpus.str());
    } else if (run->parsed()) {
      return cmd_run(run_opts);
    } else if (attack->parsed()) {
      Model model;
      check(rs_model_load(attack_model.c_str(), model.out()));
      ProjectionHandle projection;
      if (attack_projection.empty()) {
        check(rs_projection_identity(projection.out()));
      } else {
        check(rs_projection_load(attack_projection.c_str(), projection.out()));
      }
      const std::string doc = read_input(attack_in);
      LibString preds;
      check(rs_attack(model.get(), projection.get(), doc.data(), doc.size(), preds.out()));
      write_output(attack_out, preds.str());
    } else if (harden->parsed() || fold->parsed() || detect->parsed()) {
      MapHandle map;
      load_map(map, text_map);
      const std::string text = read_input(text_in);
      LibString out;
      if (harden->parsed()) {
        check(rs_harden(map.get(), text.data(), text.size(), out.out()));
      } else if (fold->parsed()) {
        check(rs_fold(map.get(), text.data(), text.size(), out.out()));
      } else {
        check(rs_detect(map.get(), text.data(), text.size(), out.out()));
      }
      std::cout << out.str();
    } else if (report->parsed()) {
      const std::string json = read_input(report_in);
      LibString table;
      check(rs_render_report(json.data(), json.size(), table.out()));
      std::cout << table.str();
    }
  } catch (const CliFailure& f) {
    std::cerr << "redactscope: " << f.message << '\n';
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "redactscope: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
