#include "preprocess.hpp"

#include <algorithm>
#include <array>

#include "errors.hpp"
#include "utf8.hpp"

namespace rscope {

namespace {

bool is_ascii_upper(char32_t c) { return c >= U'A' && c <= U'Z'; }
bool is_ascii_lower(char32_t c) { return c >= U'a' && c <= U'z'; }
bool is_ascii_alpha(char32_t c) { return is_ascii_upper(c) || is_ascii_lower(c); }
bool is_digit(char32_t c) { return c >= U'0' && c <= U'9'; }
bool is_word_char(char32_t c) { return is_ascii_alpha(c) || is_digit(c) || c == U'_' || c >= 0x80; }

bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v' ||
         c == 0xA0;
}

bool is_terminator(char32_t c) { return c == U'.' || c == U'?' || c == U'!'; }

bool is_closer(char32_t c) {
  return c == U')' || c == U']' || c == U'"' || c == U'\'' || c == 0x201D || c == 0x2019;
}

bool is_opener(char32_t c) {
  return c == U'(' || c == U'[' || c == U'"' || c == U'\'' || c == 0x201C || c == 0x2018;
}

char32_t ascii_lower(char32_t c) { return is_ascii_upper(c) ? c + 32 : c; }

// >= 80% of the ASCII letters are upper case.
bool is_title_line(std::u32string_view line) {
  std::size_t letters = 0;
  std::size_t upper = 0;
  for (char32_t c : line) {
    if (is_ascii_alpha(c)) {
      ++letters;
      if (is_ascii_upper(c)) ++upper;
    }
  }
  return letters > 0 && upper * 5 >= letters * 4;
}

std::u32string lower_token(std::u32string_view token) {
  std::u32string out(token);
  for (auto& c : out) c = ascii_lower(c);
  return out;
}

bool is_masked_abbreviation(std::u32string_view text, std::size_t dot) {
  std::size_t k = dot;
  while (k > 0 && is_ascii_alpha(text[k - 1])) --k;
  if (k > 0 && is_word_char(text[k - 1])) return false;
  const auto token = lower_token(text.substr(k, dot - k));
  return token == U"no" || token == U"nos";
}

// Token immediately preceding a '.' that must not end a sentence.
bool is_protected_abbreviation(std::u32string_view text, std::size_t dot) {
  std::size_t k = dot;
  while (k > 0 && !is_space(text[k - 1])) --k;
  while (k < dot && is_opener(text[k])) ++k;
  const std::u32string_view raw = text.substr(k, dot - k);
  if (raw.size() == 1 && is_ascii_upper(raw[0])) return true;
  static const std::array<std::u32string_view, 7> kBlacklist = {
      U"no_", U"nos_", U"v", U"art", U"para", U"e.g", U"i.e",
  };
  const auto token = lower_token(raw);
  return std::find(kBlacklist.begin(), kBlacklist.end(), token) != kBlacklist.end();
}

bool starts_sentence(char32_t c) { return is_ascii_upper(c) || is_digit(c) || c == U'*'; }

RedactedSample make_sample(const SentenceSpan& sentence, const Annotation& ann, std::string id) {
  if (ann.span.start >= ann.span.end || ann.span.end > sentence.text.size()) {
    throw PreconditionError("annotation [" + std::to_string(ann.span.start) + ", " +
                            std::to_string(ann.span.end) + ") outside sentence of length " +
                            std::to_string(sentence.text.size()));
  }
  std::u32string redacted = sentence.text;
  std::fill(redacted.begin() + static_cast<std::ptrdiff_t>(ann.span.start),
            redacted.begin() + static_cast<std::ptrdiff_t>(ann.span.end), U'*');
  RedactedSample s;
  s.id = std::move(id);
  s.sentence = utf8::encode(sentence.text);
  s.redacted_sentence = utf8::encode(redacted);
  s.span = ann.span;
  s.label = ann.label;
  s.source_doc = sentence.doc_id;
  return s;
}

}  // namespace

std::u32string normalize_text(std::u32string_view text) {
  std::u32string out(text);
  const std::size_t n = text.size();

  std::size_t line_start = 0;
  std::size_t i = 0;
  while (i < n) {
    if (text[i] != U'\n') {
      ++i;
      continue;
    }
    std::size_t run_end = i;
    while (run_end < n && text[run_end] == U'\n') ++run_end;
    const bool title = is_title_line(text.substr(line_start, i - line_start));
    for (std::size_t j = i; j < run_end; ++j) out[j] = U' ';
    if (title) out[i] = U'.';
    line_start = run_end;
    i = run_end;
  }

  for (std::size_t d = 0; d < n; ++d) {
    if (text[d] == U'.' && is_masked_abbreviation(text, d)) out[d] = U'_';
  }
  return out;
}

std::string normalize_text(std::string_view utf8_text) {
  return utf8::encode(normalize_text(utf8::decode(utf8_text)));
}

std::vector<SentenceSpan> split_sentences(std::u32string_view text, std::string_view doc_id) {
  std::vector<SentenceSpan> out;
  const std::size_t n = text.size();
  auto emit = [&](std::size_t start, std::size_t end) {
    while (end > start && is_space(text[end - 1])) --end;
    if (end > start) {
      out.push_back({std::string(doc_id), {start, end}, std::u32string(text.substr(start, end - start))});
    }
  };

  std::size_t start = 0;
  while (start < n && is_space(text[start])) ++start;
  std::size_t pos = start;
  while (pos < n) {
    if (!is_terminator(text[pos])) {
      ++pos;
      continue;
    }
    const std::size_t term = pos;
    std::size_t end = pos + 1;
    while (end < n && is_terminator(text[end])) ++end;
    while (end < n && is_closer(text[end])) ++end;
    if (end >= n || !is_space(text[end])) {
      pos = end;
      continue;
    }
    std::size_t next = end;
    while (next < n && is_space(text[next])) ++next;
    std::size_t probe = next;
    while (probe < n && is_opener(text[probe])) ++probe;
    const bool boundary = next < n && probe < n && starts_sentence(text[probe]) &&
                          !(text[term] == U'.' && is_protected_abbreviation(text, term));
    if (boundary) {
      emit(start, end);
      start = next;
    }
    pos = next;
  }
  if (start < n) emit(start, n);
  return out;
}

Localization localize(const AnnotatedDocument& doc, const std::vector<SentenceSpan>& sentences,
                      StraddlePolicy policy) {
  Localization result;
  for (std::size_t a = 0; a < doc.annotations.size(); ++a) {
    const Annotation& ann = doc.annotations[a];
    // Last sentence starting at or before the annotation.
    auto it = std::upper_bound(sentences.begin(), sentences.end(), ann.span.start,
                               [](std::size_t v, const SentenceSpan& s) { return v < s.span.start; });
    if (it == sentences.begin() || !std::prev(it)->span.contains(ann.span)) {
      result.straddling.push_back(a);
      continue;
    }
    const auto& sentence = *std::prev(it);
    Annotation rel = ann;
    rel.span = {ann.span.start - sentence.span.start, ann.span.end - sentence.span.start};
    result.located.push_back(
        {static_cast<std::size_t>(std::distance(sentences.begin(), std::prev(it))), a, rel});
  }
  if (policy == StraddlePolicy::kThrow && !result.straddling.empty()) {
    throw StraddlingAnnotation(doc.id, result.straddling);
  }
  return result;
}

std::vector<RedactedSample> materialize(const SentenceSpan& sentence,
                                        const std::vector<Annotation>& anns,
                                        std::size_t first_ordinal) {
  std::vector<RedactedSample> out;
  out.reserve(anns.size());
  for (std::size_t k = 0; k < anns.size(); ++k) {
    out.push_back(
        make_sample(sentence, anns[k], sentence.doc_id + "/" + std::to_string(first_ordinal + k)));
  }
  return out;
}

std::vector<RedactedSample> document_samples(const AnnotatedDocument& doc,
                                             const StraddleLogger& on_straddle) {
  const std::u32string normalized = normalize_text(utf8::decode(doc.text));
  const auto sentences = split_sentences(normalized, doc.id);
  const auto loc = localize(doc, sentences, StraddlePolicy::kCollect);
  if (on_straddle) {
    for (auto a : loc.straddling) on_straddle(doc.id, a);
  }
  std::vector<RedactedSample> out;
  out.reserve(loc.located.size());
  for (const auto& l : loc.located) {
    out.push_back(make_sample(sentences[l.sentence_index], l.annotation,
                              doc.id + "/" + std::to_string(l.annotation_index)));
  }
  return out;
}

std::vector<RedactedSample> corpus_samples(const std::vector<AnnotatedDocument>& docs,
                                           const StraddleLogger& on_straddle) {
  std::vector<RedactedSample> out;
  for (const auto& d : docs) {
    auto s = document_samples(d, on_straddle);
    out.insert(out.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  return out;
}

nlohmann::ordered_json sample_to_json(const RedactedSample& s) {
  return {{"id", s.id},
          {"doc", s.source_doc},
          {"sentence", s.sentence},
          {"redacted", s.redacted_sentence},
          {"start", s.span.start},
          {"len", s.span.length()},
          {"label", label_name(s.label)}};
}

RedactedSample sample_from_json(const nlohmann::json& j) {
  RedactedSample s;
  try {
    s.source_doc = j.at("doc").get<std::string>();
    s.sentence = j.at("sentence").get<std::string>();
    s.redacted_sentence = j.at("redacted").get<std::string>();
    s.span.start = j.at("start").get<std::size_t>();
    s.span.end = s.span.start + j.at("len").get<std::size_t>();
    s.label = parse_label(j.at("label").get<std::string>());
    s.id = j.value("id", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad sample record: ") + e.what(), 0);
  }
  const auto plain = utf8::decode(s.sentence);
  const auto red = utf8::decode(s.redacted_sentence);
  bool ok = plain.size() == red.size() && s.span.end <= red.size() && s.span.length() > 0;
  for (std::size_t i = 0; ok && i < red.size(); ++i) {
    ok = (i >= s.span.start && i < s.span.end) ? red[i] == U'*' : red[i] == plain[i];
  }
  if (!ok) throw ParseError("sample '" + s.id + "' violates the redaction invariants", 0);
  return s;
}

std::string write_samples_jsonl(const std::vector<RedactedSample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += sample_to_json(s).dump();
    out += '\n';
  }
  return out;
}

std::vector<RedactedSample> read_samples_jsonl(std::string_view text) {
  std::vector<RedactedSample> out;
  std::size_t line_no = 0;
  std::size_t offset = 0;
  while (offset < text.size()) {
    std::size_t nl = text.find('\n', offset);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(offset, nl - offset);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("malformed sample line " + std::to_string(line_no + 1), offset + e.byte);
      }
      auto s = sample_from_json(j);
      if (s.id.empty()) s.id = s.source_doc + "/" + std::to_string(line_no);
      out.push_back(std::move(s));
    }
    ++line_no;
    offset = nl + 1;
  }
  return out;
}

}  // namespace rscope
