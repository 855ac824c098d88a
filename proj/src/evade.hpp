#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "classify.hpp"
#include "embed.hpp"

namespace rscope {

struct Homoglyph {
  char32_t from;  // ASCII lowercase letter
  char32_t to;    // non-ASCII look-alike

  friend bool operator==(const Homoglyph&, const Homoglyph&) = default;
};

/// Ordered, injective substitution table. Keys are ASCII lowercase letters and
/// values are non-ASCII, so a value can never be substituted again.
class HomoglyphMap {
 public:
  /// a, e, i, o -> Cyrillic look-alikes; n -> U+0578.
  static HomoglyphMap defaults();

  HomoglyphMap() = default;
  /// Throws ConfigError when the pairs break the invariants above.
  explicit HomoglyphMap(std::vector<Homoglyph> pairs);

  /// JSON array of {"from": "U+XXXX", "to": "U+XXXX"}; ConfigError when malformed.
  static HomoglyphMap from_json(std::string_view text);
  std::string to_json() const;

  const std::vector<Homoglyph>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }

  std::optional<char32_t> substitute(char32_t c) const;
  std::optional<char32_t> preimage(char32_t c) const;

 private:
  std::vector<Homoglyph> pairs_;
};

std::string harden(std::string_view text, const HomoglyphMap& map = HomoglyphMap::defaults());
std::string fold(std::string_view text, const HomoglyphMap& map = HomoglyphMap::defaults());

struct ConfusableHit {
  std::size_t position;  // code-point index
  char32_t original;
  char32_t confusable;

  friend bool operator==(const ConfusableHit&, const ConfusableHit&) = default;
};

std::vector<ConfusableHit> detect(std::string_view text, const HomoglyphMap& map = HomoglyphMap::defaults());

/// "U+0430" style code point label.
std::string code_point_label(char32_t c);

/// Accuracy of a trained model on the same test samples under three
/// treatments of the redacted sentence before embedding.
struct EvasionResult {
  Evaluation undefended;
  Evaluation hardened;
  Evaluation folded;  // harden then fold
};

EvasionResult evaluate_evasion(const Classifier& model, const Projection& projection,
                               const std::vector<RedactedSample>& test_samples, const HomoglyphMap& map);

/// Embeds every sample's redacted sentence (after `transform`) into a [N, 768] dataset.
Dataset embed_samples(const std::vector<RedactedSample>& samples, const Projection& projection,
                      const std::function<std::string(std::string_view)>& transform = {});

}  // namespace rscope
