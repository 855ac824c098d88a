#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"

namespace rscope {

struct SentenceSpan {
  std::string doc_id;
  Span span;               // into the normalized document text
  std::u32string text;     // normalized_text[span]
};

/// Length-preserving cleanup. Newline runs after an upper-case title line become
/// ". " padding, other newlines become spaces, and the dot of the "no." / "nos."
/// abbreviations becomes '_'.
std::u32string normalize_text(std::u32string_view text);
std::string normalize_text(std::string_view utf8_text);

/// Rule-based splitter. Sentences are trimmed and never overlap; only whitespace
/// lies between consecutive sentences.
std::vector<SentenceSpan> split_sentences(std::u32string_view text, std::string_view doc_id = {});

struct LocalizedAnnotation {
  std::size_t sentence_index;
  std::size_t annotation_index;  // index into doc.annotations
  Annotation annotation;         // span is sentence-relative
};

struct Localization {
  std::vector<LocalizedAnnotation> located;
  std::vector<std::size_t> straddling;  // annotation indices not inside one sentence
};

enum class StraddlePolicy { kThrow, kCollect };

/// Moves document-level annotations into sentence coordinates. With kThrow any
/// straddling annotation raises StraddlingAnnotation.
Localization localize(const AnnotatedDocument& doc, const std::vector<SentenceSpan>& sentences,
                      StraddlePolicy policy = StraddlePolicy::kThrow);

/// One RedactedSample per annotation, each with only its own span asterisked.
/// `first_ordinal` numbers the sample ids "<doc>/<n>".
std::vector<RedactedSample> materialize(const SentenceSpan& sentence,
                                        const std::vector<Annotation>& anns,
                                        std::size_t first_ordinal = 0);

using StraddleLogger = std::function<void(const std::string& doc_id, std::size_t annotation_index)>;

/// Whole-document driver: normalize, split, localize (dropping straddlers),
/// materialize. Samples come out in annotation order.
std::vector<RedactedSample> document_samples(const AnnotatedDocument& doc,
                                             const StraddleLogger& on_straddle = {});

std::vector<RedactedSample> corpus_samples(const std::vector<AnnotatedDocument>& docs,
                                           const StraddleLogger& on_straddle = {});

nlohmann::ordered_json sample_to_json(const RedactedSample& s);
RedactedSample sample_from_json(const nlohmann::json& j);

std::string write_samples_jsonl(const std::vector<RedactedSample>& samples);
std::vector<RedactedSample> read_samples_jsonl(std::string_view text);

}  // namespace rscope
