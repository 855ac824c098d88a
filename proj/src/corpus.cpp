#include "corpus.hpp"

#include <algorithm>
#include <cctype>

#include "errors.hpp"
#include "utf8.hpp"

namespace rscope {

namespace {

constexpr std::array<std::string_view, kNumLabels> kShortNames = {
    "DATETIME", "ORG", "PERSON", "DEM", "LOC", "MISC", "QUANTITY", "CODE",
};

constexpr std::array<std::string_view, kNumLabels> kLongNames = {
    "DATETIME", "ORGANIZATION", "PERSON", "DEMOGRAPHIC",
    "LOCATION", "MISCELLANEOUS", "QUANTITY", "CODE",
};

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

using nlohmann::json;

struct DocumentReader {
  std::vector<ValidationIssue>& issues;
  std::string doc_id;

  void fail(std::size_t ann, std::string message) {
    issues.push_back({doc_id, ann, std::move(message)});
  }

  std::optional<Annotation> read_annotation(const json& a, std::size_t index,
                                            std::size_t text_length) {
    if (!a.is_object()) {
      fail(index, "annotation is not an object");
      return std::nullopt;
    }
    const auto start_it = a.find("start");
    const auto end_it = a.find("end");
    if (start_it == a.end() || end_it == a.end() || !start_it->is_number_integer() ||
        !end_it->is_number_integer()) {
      fail(index, "missing or non-integer start/end");
      return std::nullopt;
    }
    std::int64_t start = start_it->get<std::int64_t>();
    std::int64_t end = end_it->get<std::int64_t>();
    if (a.value("end_inclusive", false)) ++end;

    Annotation out;
    const auto label_it = a.find("label");
    if (label_it == a.end() || !label_it->is_string()) {
      fail(index, "missing label");
      return std::nullopt;
    }
    try {
      out.label = parse_label(label_it->get<std::string>());
    } catch (const UnknownLabel& e) {
      fail(index, e.what());
      return std::nullopt;
    }
    const std::string ident = a.value("identifier", std::string("direct"));
    if (ident == "direct") {
      out.identifier = IdentifierClass::kDirect;
    } else if (ident == "quasi") {
      out.identifier = IdentifierClass::kQuasi;
    } else {
      fail(index, "identifier must be 'direct' or 'quasi', got '" + ident + "'");
      return std::nullopt;
    }
    if (start < 0 || start >= end || end > static_cast<std::int64_t>(text_length)) {
      fail(index, "span [" + std::to_string(start) + ", " + std::to_string(end) +
                      ") outside text of length " + std::to_string(text_length));
      return std::nullopt;
    }
    out.span = {static_cast<std::size_t>(start), static_cast<std::size_t>(end)};
    return out;
  }
};

std::optional<AnnotatedDocument> read_document(const json& raw, std::size_t doc_index,
                                               std::vector<ValidationIssue>& issues) {
  DocumentReader reader{issues, "#" + std::to_string(doc_index)};
  if (!raw.is_object()) {
    reader.fail(ValidationIssue::kDocumentLevel, "document is not an object");
    return std::nullopt;
  }
  if (auto it = raw.find("id"); it != raw.end() && it->is_string()) {
    reader.doc_id = it->get<std::string>();
  } else {
    reader.fail(ValidationIssue::kDocumentLevel, "missing string field 'id'");
    return std::nullopt;
  }
  const auto text_it = raw.find("text");
  if (text_it == raw.end() || !text_it->is_string()) {
    reader.fail(ValidationIssue::kDocumentLevel, "missing string field 'text'");
    return std::nullopt;
  }

  AnnotatedDocument doc;
  doc.id = reader.doc_id;
  doc.text = text_it->get<std::string>();
  doc.revised = raw.value("revised", false);
  doc.anonymization_target = raw.value("target", std::string());

  std::size_t text_length = 0;
  try {
    text_length = utf8::length(doc.text);
  } catch (const ParseError& e) {
    reader.fail(ValidationIssue::kDocumentLevel, std::string("text: ") + e.what());
    return std::nullopt;
  }

  const auto anns_it = raw.find("annotations");
  if (anns_it == raw.end()) return doc;
  if (!anns_it->is_array()) {
    reader.fail(ValidationIssue::kDocumentLevel, "'annotations' is not an array");
    return std::nullopt;
  }
  const std::size_t issues_before = issues.size();
  for (std::size_t i = 0; i < anns_it->size(); ++i) {
    auto ann = reader.read_annotation((*anns_it)[i], i, text_length);
    if (!ann) continue;
    const bool duplicate = std::any_of(
        doc.annotations.begin(), doc.annotations.end(),
        [&](const Annotation& a) { return a.span == ann->span && a.label == ann->label; });
    if (!duplicate) doc.annotations.push_back(*ann);
  }
  if (issues.size() != issues_before) return std::nullopt;
  return doc;
}

}  // namespace

EntityLabel label_from_id(std::size_t id) {
  if (id >= kNumLabels) throw UnknownLabel(std::to_string(id));
  return static_cast<EntityLabel>(id);
}

std::string_view label_name(EntityLabel l) { return kShortNames[label_id(l)]; }

EntityLabel parse_label(std::string_view s) {
  const std::string key = upper(s);
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (key == kShortNames[i] || key == kLongNames[i]) return static_cast<EntityLabel>(i);
  }
  throw UnknownLabel(std::string(s));
}

std::vector<AnnotatedDocument> parse_corpus(std::string_view bytes,
                                            const SchemaAdapter& adapter) {
  json root;
  try {
    root = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw ParseError("malformed corpus JSON", e.byte);
  }
  if (!root.is_array()) throw ParseError("corpus must be a JSON array of documents", 0);

  std::vector<AnnotatedDocument> docs;
  std::vector<ValidationIssue> issues;
  docs.reserve(root.size());
  for (std::size_t i = 0; i < root.size(); ++i) {
    auto doc = read_document(adapter ? adapter(root[i]) : root[i], i, issues);
    if (doc) docs.push_back(std::move(*doc));
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return docs;
}

nlohmann::json corpus_to_json(const std::vector<AnnotatedDocument>& docs) {
  json out = json::array();
  for (const auto& d : docs) {
    json anns = json::array();
    for (const auto& a : d.annotations) {
      anns.push_back({{"start", a.span.start},
                      {"end", a.span.end},
                      {"label", label_name(a.label)},
                      {"identifier", a.identifier == IdentifierClass::kDirect ? "direct" : "quasi"}});
    }
    out.push_back({{"id", d.id},
                   {"text", d.text},
                   {"revised", d.revised},
                   {"target", d.anonymization_target},
                   {"annotations", std::move(anns)}});
  }
  return out;
}

std::string serialize_corpus(const std::vector<AnnotatedDocument>& docs) {
  return corpus_to_json(docs).dump();
}

LabelCounts corpus_stats(const std::vector<AnnotatedDocument>& docs) {
  LabelCounts counts{};
  for (const auto& d : docs) {
    for (const auto& a : d.annotations) ++counts[label_id(a.label)];
  }
  return counts;
}

nlohmann::ordered_json label_counts_to_json(const LabelCounts& counts) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (auto l : kAllLabels) out[std::string(label_name(l))] = counts[label_id(l)];
  return out;
}

}  // namespace rscope
