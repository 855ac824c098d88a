#include "evade.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "errors.hpp"
#include "utf8.hpp"

namespace rscope {

namespace {

char32_t parse_code_point(const nlohmann::json& v, std::size_t entry, const char* field) {
  if (!v.is_string()) {
    throw ConfigError("map entry " + std::to_string(entry) + ": \"" + field + "\" must be a \"U+XXXX\" string");
  }
  const auto s = v.get<std::string>();
  const bool shaped = s.size() >= 6 && s.size() <= 8 && (s[0] == 'U' || s[0] == 'u') && s[1] == '+' &&
                      std::all_of(s.begin() + 2, s.end(), [](unsigned char c) { return std::isxdigit(c); });
  if (!shaped) throw ConfigError("map entry " + std::to_string(entry) + ": bad code point '" + s + "'");
  const auto cp = static_cast<char32_t>(std::stoul(s.substr(2), nullptr, 16));
  if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    throw ConfigError("map entry " + std::to_string(entry) + ": '" + s + "' is not a scalar value");
  }
  return cp;
}

}  // namespace

HomoglyphMap HomoglyphMap::defaults() {
  return HomoglyphMap({{U'a', 0x0430}, {U'e', 0x0435}, {U'i', 0x0456}, {U'n', 0x0578}, {U'o', 0x043E}});
}

HomoglyphMap::HomoglyphMap(std::vector<Homoglyph> pairs) : pairs_(std::move(pairs)) {
  std::set<char32_t> keys, values;
  for (const auto& p : pairs_) {
    if (p.from < U'a' || p.from > U'z') {
      throw ConfigError("homoglyph key " + code_point_label(p.from) + " is not an ASCII lowercase letter");
    }
    if (p.to < 0x80) throw ConfigError("homoglyph value " + code_point_label(p.to) + " is ASCII");
    if (!keys.insert(p.from).second) throw ConfigError("duplicate homoglyph key " + code_point_label(p.from));
    if (!values.insert(p.to).second) {
      throw ConfigError("homoglyph value " + code_point_label(p.to) + " is used twice; the map must be injective");
    }
  }
}

HomoglyphMap HomoglyphMap::from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("homoglyph map is not valid JSON (at byte " + std::to_string(e.byte) + ")");
  }
  if (!doc.is_array()) throw ConfigError("homoglyph map must be a JSON array");
  std::vector<Homoglyph> pairs;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& e = doc[i];
    if (!e.is_object() || !e.contains("from") || !e.contains("to")) {
      throw ConfigError("map entry " + std::to_string(i) + " needs \"from\" and \"to\"");
    }
    pairs.push_back({parse_code_point(e["from"], i, "from"), parse_code_point(e["to"], i, "to")});
  }
  return HomoglyphMap(std::move(pairs));
}

std::string HomoglyphMap::to_json() const {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& p : pairs_) out.push_back({{"from", code_point_label(p.from)}, {"to", code_point_label(p.to)}});
  return out.dump(2);
}

std::optional<char32_t> HomoglyphMap::substitute(char32_t c) const {
  for (const auto& p : pairs_) {
    if (p.from == c) return p.to;
  }
  return std::nullopt;
}

std::optional<char32_t> HomoglyphMap::preimage(char32_t c) const {
  for (const auto& p : pairs_) {
    if (p.to == c) return p.from;
  }
  return std::nullopt;
}

std::string code_point_label(char32_t c) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(c));
  return buf;
}

std::string harden(std::string_view text, const HomoglyphMap& map) {
  std::u32string cps = utf8::decode(text);
  for (auto& c : cps) c = map.substitute(c).value_or(c);
  return utf8::encode(cps);
}

std::string fold(std::string_view text, const HomoglyphMap& map) {
  std::u32string cps = utf8::decode(text);
  for (auto& c : cps) c = map.preimage(c).value_or(c);
  return utf8::encode(cps);
}

std::vector<ConfusableHit> detect(std::string_view text, const HomoglyphMap& map) {
  const std::u32string cps = utf8::decode(text);
  std::vector<ConfusableHit> hits;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (auto orig = map.preimage(cps[i])) hits.push_back({i, *orig, cps[i]});
  }
  return hits;
}

Dataset embed_samples(const std::vector<RedactedSample>& samples, const Projection& projection,
                      const std::function<std::string(std::string_view)>& transform) {
  Dataset data;
  data.features = nnet::Tensor({samples.size(), projection.dim()});
  data.labels.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i].redacted_sentence;
    const Embedding e = transform ? embed(transform(s), projection) : embed(s, projection);
    std::copy(e.begin(), e.end(), data.features.data().begin() + static_cast<std::ptrdiff_t>(i * e.size()));
    data.labels.push_back(label_id(samples[i].label));
  }
  return data;
}

EvasionResult evaluate_evasion(const Classifier& model, const Projection& projection,
                               const std::vector<RedactedSample>& test_samples, const HomoglyphMap& map) {
  EvasionResult r;
  r.undefended = evaluate(model, embed_samples(test_samples, projection));
  r.hardened = evaluate(model, embed_samples(test_samples, projection,
                                             [&](std::string_view s) { return harden(s, map); }));
  r.folded = evaluate(model, embed_samples(test_samples, projection,
                                           [&](std::string_view s) { return fold(harden(s, map), map); }));
  return r;
}

}  // namespace rscope
