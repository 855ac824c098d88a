#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace rscope {

/// The closed set of entity types. The underlying value is the class index.
enum class EntityLabel : std::uint8_t {
  kDatetime = 0,
  kOrg = 1,
  kPerson = 2,
  kDem = 3,
  kLoc = 4,
  kMisc = 5,
  kQuantity = 6,
  kCode = 7,
};

inline constexpr std::size_t kNumLabels = 8;

inline constexpr std::array<EntityLabel, kNumLabels> kAllLabels = {
    EntityLabel::kDatetime, EntityLabel::kOrg,  EntityLabel::kPerson,   EntityLabel::kDem,
    EntityLabel::kLoc,      EntityLabel::kMisc, EntityLabel::kQuantity, EntityLabel::kCode,
};

constexpr std::size_t label_id(EntityLabel l) { return static_cast<std::size_t>(l); }
EntityLabel label_from_id(std::size_t id);

/// Canonical short name, e.g. "DATETIME", "DEM".
std::string_view label_name(EntityLabel l);

/// Case-insensitive; accepts the short names and the long forms
/// ("organization", "demographic", "location", "miscellaneous").
EntityLabel parse_label(std::string_view s);

enum class IdentifierClass : std::uint8_t { kDirect, kQuasi };

/// Half-open code-point interval [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool contains(const Span& other) const { return start <= other.start && other.end <= end; }

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

struct Annotation {
  Span span;
  EntityLabel label = EntityLabel::kMisc;
  IdentifierClass identifier = IdentifierClass::kDirect;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct AnnotatedDocument {
  std::string id;
  std::string text;  // UTF-8; spans index code points
  std::vector<Annotation> annotations;
  bool revised = false;
  std::string anonymization_target;

  friend bool operator==(const AnnotatedDocument&, const AnnotatedDocument&) = default;
};

/// One sentence with exactly one span replaced by asterisks.
struct RedactedSample {
  std::string id;  // "<doc>/<ordinal>"
  std::string sentence;
  std::string redacted_sentence;
  Span span;  // sentence-relative
  EntityLabel label = EntityLabel::kMisc;
  std::string source_doc;

  friend bool operator==(const RedactedSample&, const RedactedSample&) = default;
};

/// Maps a foreign document object onto the native ingestion schema.
using SchemaAdapter = std::function<nlohmann::json(const nlohmann::json&)>;

/// Parses and validates a JSON array of documents. Identical annotations
/// (same span and label) within a document are merged.
std::vector<AnnotatedDocument> parse_corpus(std::string_view bytes,
                                            const SchemaAdapter& adapter = {});

nlohmann::json corpus_to_json(const std::vector<AnnotatedDocument>& docs);
std::string serialize_corpus(const std::vector<AnnotatedDocument>& docs);

using LabelCounts = std::array<std::size_t, kNumLabels>;

LabelCounts corpus_stats(const std::vector<AnnotatedDocument>& docs);
nlohmann::ordered_json label_counts_to_json(const LabelCounts& counts);

}  // namespace rscope
