#include "redactscope/redactscope.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "errors.hpp"
#include "evade.hpp"
#include "pipeline.hpp"
#include "preprocess.hpp"
#include "synthetic.hpp"

struct rs_config {
  rscope::PipelineConfig value;
};

struct rs_model {
  std::unique_ptr<rscope::Classifier> value;
};

struct rs_projection {
  rscope::Projection value;
};

struct rs_homoglyph_map {
  rscope::HomoglyphMap value;
};

namespace {

thread_local std::string g_last_error;

rs_status status_of(rscope::ErrorCode code) {
  using rscope::ErrorCode;
  switch (code) {
    case ErrorCode::kParse: return RS_E_PARSE;
    case ErrorCode::kValidation: return RS_E_VALIDATION;
    case ErrorCode::kUnknownLabel: return RS_E_UNKNOWN_LABEL;
    case ErrorCode::kStraddlingAnnotation: return RS_E_STRADDLING;
    case ErrorCode::kEmptyClass: return RS_E_EMPTY_CLASS;
    case ErrorCode::kPrecondition: return RS_E_PRECONDITION;
    case ErrorCode::kDegenerateVector: return RS_E_DEGENERATE;
    case ErrorCode::kDimensionMismatch: return RS_E_DIMENSION;
    case ErrorCode::kShapeMismatch: return RS_E_SHAPE;
    case ErrorCode::kIo: return RS_E_IO;
    case ErrorCode::kConfig: return RS_E_CONFIG;
  }
  return RS_E_INTERNAL;
}

rs_status fail(rs_status s, std::string message) {
  g_last_error = std::move(message);
  return s;
}

template <class F>
rs_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return RS_OK;
  } catch (const rscope::Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(RS_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(RS_E_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size());
  out[s.size()] = '\0';
  return out;
}

void set_out(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

std::string_view view(const char* p, size_t len) { return {p, len}; }

}  // namespace

#define RS_REQUIRE(cond)                                                     \
  do {                                                                       \
    if (!(cond)) return fail(RS_E_INVALID_ARGUMENT, "invalid argument: " #cond); \
  } while (0)

extern "C" {

const char* rs_last_error(void) { return g_last_error.c_str(); }

const char* rs_status_name(rs_status status) {
  switch (status) {
    case RS_OK: return "ok";
    case RS_E_PARSE: return "parse error";
    case RS_E_VALIDATION: return "validation error";
    case RS_E_UNKNOWN_LABEL: return "unknown label";
    case RS_E_STRADDLING: return "straddling annotation";
    case RS_E_EMPTY_CLASS: return "empty class";
    case RS_E_PRECONDITION: return "precondition violated";
    case RS_E_DEGENERATE: return "degenerate vector";
    case RS_E_DIMENSION: return "dimension mismatch";
    case RS_E_SHAPE: return "shape mismatch";
    case RS_E_IO: return "i/o error";
    case RS_E_CONFIG: return "configuration error";
    case RS_E_INVALID_ARGUMENT: return "invalid argument";
    case RS_E_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* rs_version(void) { return "0.1.0"; }

void rs_string_free(char* s) { std::free(s); }

const char* rs_label_name(int label) {
  if (label < 0 || label >= RS_NUM_LABELS) return nullptr;
  return rscope::label_name(rscope::label_from_id(static_cast<std::size_t>(label))).data();
}

rs_status rs_ingest(const char* corpus_json, size_t len, char** samples_jsonl, char** stats_json) {
  RS_REQUIRE(corpus_json || len == 0);
  return guarded([&] {
    const auto r = rscope::ingest_corpus(view(corpus_json ? corpus_json : "", len));
    const std::string samples = rscope::write_samples_jsonl(r.samples);
    const std::string stats = rscope::dump_json(rscope::ingest_stats_json(r));
    set_out(samples_jsonl, samples);
    try {
      set_out(stats_json, stats);
    } catch (...) {
      if (samples_jsonl) std::free(*samples_jsonl);
      throw;
    }
  });
}

rs_status rs_generate_synthetic(uint64_t seed, size_t per_class, char** corpus_json) {
  RS_REQUIRE(corpus_json);
  return guarded([&] {
    *corpus_json = dup_string(rscope::serialize_corpus(rscope::generate_synthetic(rscope::Seed{seed}, per_class)));
  });
}

rs_status rs_config_create(rs_config** out) {
  RS_REQUIRE(out);
  return guarded([&] { *out = new rs_config{}; });
}

void rs_config_free(rs_config* config) { delete config; }

rs_status rs_config_merge_json(rs_config* config, const char* json, size_t len) {
  RS_REQUIRE(config && json);
  return guarded([&] { config->value = rscope::config_from_json(view(json, len), config->value); });
}

rs_status rs_config_load_file(rs_config* config, const char* path) {
  RS_REQUIRE(config && path);
  return guarded([&] { config->value = rscope::load_config(path, config->value); });
}

rs_status rs_config_to_json(const rs_config* config, char** json) {
  RS_REQUIRE(config && json);
  return guarded([&] { *json = dup_string(rscope::dump_json(rscope::config_to_json(config->value))); });
}

rs_status rs_run(const rs_config* config, char** metrics_json, char** balance_json, char** evasion_json) {
  RS_REQUIRE(config);
  if (evasion_json) *evasion_json = nullptr;
  return guarded([&] {
    const auto r = rscope::run_pipeline(config->value);
    const std::string metrics = rscope::dump_json(rscope::metrics_json(r.metrics));
    const std::string balance = rscope::dump_json(rscope::balance_report_json(r.balance));
    const std::string evasion = r.evasion ? rscope::dump_json(*r.evasion) : std::string();
    set_out(metrics_json, metrics);
    set_out(balance_json, balance);
    if (r.evasion) set_out(evasion_json, evasion);
  });
}

rs_status rs_model_load(const char* path, rs_model** out) {
  RS_REQUIRE(path && out);
  return guarded([&] { *out = new rs_model{rscope::load_classifier_file(path)}; });
}

void rs_model_free(rs_model* model) { delete model; }

const char* rs_model_kind(const rs_model* model) {
  if (!model) return nullptr;
  return rscope::model_kind_name(model->value->kind()).data();
}

rs_status rs_model_predict(const rs_model* model, const double* embedding, size_t dim, int* label, double* scores) {
  RS_REQUIRE(model && embedding);
  return guarded([&] {
    const auto p = model->value->predict({embedding, dim});
    if (label) *label = static_cast<int>(rscope::label_id(p.label));
    if (scores) std::memcpy(scores, p.scores.data(), sizeof(double) * RS_NUM_LABELS);
  });
}

rs_status rs_projection_identity(rs_projection** out) {
  RS_REQUIRE(out);
  return guarded([&] { *out = new rs_projection{rscope::Projection::identity()}; });
}

rs_status rs_projection_load(const char* path, rs_projection** out) {
  RS_REQUIRE(path && out);
  return guarded([&] { *out = new rs_projection{rscope::Projection::load(path)}; });
}

void rs_projection_free(rs_projection* projection) { delete projection; }

rs_status rs_embed(const rs_projection* projection, const char* sentence, size_t len, double* out, size_t dim) {
  RS_REQUIRE(projection && (sentence || len == 0) && out);
  return guarded([&] {
    if (dim != projection->value.dim()) throw rscope::DimensionMismatch(projection->value.dim(), dim);
    const auto e = rscope::embed(view(sentence ? sentence : "", len), projection->value);
    std::memcpy(out, e.data(), sizeof(double) * e.size());
  });
}

rs_status rs_attack(const rs_model* model, const rs_projection* projection, const char* text, size_t len,
                    char** predictions_json) {
  RS_REQUIRE(model && projection && (text || len == 0) && predictions_json);
  return guarded([&] {
    const auto preds = rscope::attack_document(view(text ? text : "", len), *model->value, projection->value);
    *predictions_json = dup_string(rscope::dump_json(rscope::attack_json(preds)));
  });
}

rs_status rs_homoglyph_map_default(rs_homoglyph_map** out) {
  RS_REQUIRE(out);
  return guarded([&] { *out = new rs_homoglyph_map{rscope::HomoglyphMap::defaults()}; });
}

rs_status rs_homoglyph_map_from_json(const char* json, size_t len, rs_homoglyph_map** out) {
  RS_REQUIRE(json && out);
  return guarded([&] { *out = new rs_homoglyph_map{rscope::HomoglyphMap::from_json(view(json, len))}; });
}

void rs_homoglyph_map_free(rs_homoglyph_map* map) { delete map; }

rs_status rs_harden(const rs_homoglyph_map* map, const char* text, size_t len, char** out) {
  RS_REQUIRE(map && (text || len == 0) && out);
  return guarded([&] { *out = dup_string(rscope::harden(view(text ? text : "", len), map->value)); });
}

rs_status rs_fold(const rs_homoglyph_map* map, const char* text, size_t len, char** out) {
  RS_REQUIRE(map && (text || len == 0) && out);
  return guarded([&] { *out = dup_string(rscope::fold(view(text ? text : "", len), map->value)); });
}

rs_status rs_detect(const rs_homoglyph_map* map, const char* text, size_t len, char** hits_json) {
  RS_REQUIRE(map && (text || len == 0) && hits_json);
  return guarded([&] {
    nlohmann::ordered_json hits = nlohmann::ordered_json::array();
    for (const auto& h : rscope::detect(view(text ? text : "", len), map->value)) {
      hits.push_back({{"position", h.position},
                      {"original", rscope::code_point_label(h.original)},
                      {"confusable", rscope::code_point_label(h.confusable)}});
    }
    *hits_json = dup_string(rscope::dump_json(hits));
  });
}

rs_status rs_render_report(const char* json, size_t len, char** text) {
  RS_REQUIRE(json && text);
  return guarded([&] { *text = dup_string(rscope::render_report(view(json, len))); });
}

}  // extern "C"
