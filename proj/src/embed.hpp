#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "corpus.hpp"
#include "nnet/tensor.hpp"
#include "random.hpp"

namespace rscope {

inline constexpr std::size_t kEmbeddingDim = 768;

using Embedding = std::vector<double>;

/// Hashing embedder over the redacted sentence. Each asterisk run collapses to
/// one mask character, ASCII letters are lower-cased, then character 3-5-grams
/// and word uni/bi-grams are hashed (64-bit FNV-1a; bucket = h mod 768, sign
/// from bit 63) and the vector is L2-normalized. No features gives all zeros.
Embedding embed_base(std::string_view redacted_sentence);

/// Feature keys that embed_base hashes, in extraction order. Exposed for tests.
std::vector<std::string> embedding_features(std::string_view redacted_sentence);

/// Cosine similarity. Throws DegenerateVector if either vector is zero.
double cosine(std::span<const double> a, std::span<const double> b);

/// Maps a cosine in [-1, 1] to [0, 1] as (c + 1) / 2.
double normalize_score(double c);

/// Linear map applied to base embeddings: y = P x. Stored as the transpose W = P^T
/// so a batch of row vectors maps as Y = X W.
class Projection {
 public:
  explicit Projection(std::size_t dim = kEmbeddingDim);

  static Projection identity(std::size_t dim = kEmbeddingDim) { return Projection(dim); }

  std::size_t dim() const { return weight_.dim(0); }
  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }

  /// P as a row-major dim x dim matrix.
  nnet::RowMatrix matrix() const;
  nnet::Tensor& weight() { return weight_; }
  const nnet::Tensor& weight() const { return weight_; }

  Embedding apply(std::span<const double> x) const;

  std::string serialize() const;
  static Projection deserialize(std::string_view bytes);
  void save(const std::string& path) const;
  static Projection load(const std::string& path);

 private:
  nnet::Tensor weight_;
  bool trained_ = false;
};

/// Projection applied to the base embedding; no re-normalization.
Embedding embed(std::string_view redacted_sentence, const Projection& projection);

struct EmbeddedPair {
  Embedding a;
  Embedding b;
  double target;
};

/// Mean over pairs of (normalize_score(cos(x_a W, x_b W)) - target)^2. Pairs where
/// either projection is zero contribute (0.5 - target)^2 and no gradient.
/// When `grad` is non-null it receives dL/dW with W's shape.
double pair_loss(const nnet::Tensor& weight, const nnet::Tensor& a, const nnet::Tensor& b,
                 std::span<const double> targets, nnet::Tensor* grad);

struct FinetuneConfig {
  std::size_t epochs = 20;
  double learning_rate = 1e-3;
  std::size_t batch_size = 50;
  Seed seed{};
};

struct FinetuneResult {
  Projection projection;
  std::vector<double> epoch_loss;  // mean pair loss seen during each epoch
};

/// Adam on pair_loss starting from the identity. Zero epochs returns the identity.
FinetuneResult finetune(const std::vector<EmbeddedPair>& pairs, const FinetuneConfig& config);

/// Mean normalized score of pairs with target >= 0.5 minus that of the others.
double separation_gap(const std::vector<EmbeddedPair>& pairs, const Projection& projection);

/// "RBEMB1" file: u32 dimension, u32 count, then per row u16 id length, id
/// bytes, dimension x f32. An empty input decodes to an empty map.
std::map<std::string, Embedding> import_embeddings(std::string_view bytes,
                                                   std::size_t expected_dim = kEmbeddingDim);
std::string export_embeddings(const std::vector<std::pair<std::string, Embedding>>& rows,
                              std::size_t dim = kEmbeddingDim);

}  // namespace rscope
