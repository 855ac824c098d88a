#include "embed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "binio.hpp"
#include "errors.hpp"
#include "nnet/adam.hpp"
#include "nnet/network.hpp"
#include "nnet/ops.hpp"
#include "utf8.hpp"

namespace rscope {

namespace {

constexpr std::string_view kEmbeddingMagic = "RBEMB1";
constexpr char32_t kMask = U'*';

bool is_word_char(char32_t c) {
  if ((c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') || (c >= U'0' && c <= U'9')) return true;
  if (c == U'_' || c == kMask) return true;
  // Non-ASCII letters count as word characters; spaces and general punctuation do not.
  return c >= 0x80 && c != 0xA0 && !(c >= 0x2000 && c <= 0x206F) && c != 0x3000;
}

std::u32string collapse_and_fold(std::u32string_view text) {
  std::u32string out;
  out.reserve(text.size());
  for (char32_t c : text) {
    if (c == kMask && !out.empty() && out.back() == kMask) continue;
    out.push_back(c >= U'A' && c <= U'Z' ? c + 32 : c);
  }
  return out;
}

nnet::Tensor rows_tensor(const std::vector<EmbeddedPair>& pairs, std::span<const std::size_t> idx,
                         bool first, std::size_t dim) {
  nnet::Tensor t({idx.size(), dim});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const Embedding& e = first ? pairs[idx[r]].a : pairs[idx[r]].b;
    if (e.size() != dim) throw DimensionMismatch(dim, e.size());
    std::copy(e.begin(), e.end(), t.data().begin() + static_cast<std::ptrdiff_t>(r * dim));
  }
  return t;
}

}  // namespace

std::vector<std::string> embedding_features(std::string_view redacted_sentence) {
  const std::u32string text = collapse_and_fold(utf8::decode(redacted_sentence));
  std::vector<std::string> keys;

  for (std::size_t n = 3; n <= 5; ++n) {
    for (std::size_t i = 0; i + n <= text.size(); ++i) {
      keys.push_back("c:" + utf8::encode(text.substr(i, n)));
    }
  }

  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_word_char(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_word_char(text[j])) ++j;
    words.push_back(utf8::encode(text.substr(i, j - i)));
    i = j;
  }
  for (const auto& w : words) keys.push_back("w:" + w);
  for (std::size_t k = 1; k < words.size(); ++k) keys.push_back("b:" + words[k - 1] + " " + words[k]);
  return keys;
}

Embedding embed_base(std::string_view redacted_sentence) {
  Embedding v(kEmbeddingDim, 0.0);
  for (const auto& key : embedding_features(redacted_sentence)) {
    const std::uint64_t h = fnv1a64(key);
    v[h % kEmbeddingDim] += (h >> 63) ? -1.0 : 1.0;
  }
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
  }
  return v;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw DegenerateVector();
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

double normalize_score(double c) {
  if (!(c >= -1.0 && c <= 1.0)) {
    throw PreconditionError("cosine score " + std::to_string(c) + " outside [-1, 1]");
  }
  return (c + 1.0) / 2.0;
}

// ---- Projection -------------------------------------------------------------

Projection::Projection(std::size_t dim) : weight_({dim, dim}) {
  for (std::size_t i = 0; i < dim; ++i) weight_[i * dim + i] = 1.0;
}

nnet::RowMatrix Projection::matrix() const { return weight_.matrix().transpose(); }

Embedding Projection::apply(std::span<const double> x) const {
  const std::size_t d = dim();
  if (x.size() != d) throw DimensionMismatch(d, x.size());
  Embedding y(d, 0.0);
  Eigen::Map<Eigen::RowVectorXd>(y.data(), static_cast<Eigen::Index>(d)).noalias() =
      Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(d)) * weight_.matrix();
  return y;
}

std::string Projection::serialize() const {
  nnet::Network net({dim()});
  net.emplace<nnet::Dense>(dim(), dim(), false);
  *net.parameters()[0] = weight_;
  return net.serialize();
}

Projection Projection::deserialize(std::string_view bytes) {
  nnet::Network net = nnet::Network::deserialize(bytes);
  const auto& layers = net.layers();
  const auto* dense = layers.size() == 1 ? dynamic_cast<const nnet::Dense*>(layers[0].get()) : nullptr;
  if (!dense || dense->has_bias() || dense->weight().dim(0) != dense->weight().dim(1)) {
    throw ParseError("model file is not a square bias-free projection", 0);
  }
  Projection p(dense->weight().dim(0));
  p.weight_ = dense->weight();
  p.trained_ = true;
  return p;
}

void Projection::save(const std::string& path) const { binio::write_file(path, serialize()); }

Projection Projection::load(const std::string& path) { return deserialize(binio::read_file(path)); }

Embedding embed(std::string_view redacted_sentence, const Projection& projection) {
  return projection.apply(embed_base(redacted_sentence));
}

// ---- Contrastive fine-tuning -------------------------------------------------

double pair_loss(const nnet::Tensor& weight, const nnet::Tensor& a, const nnet::Tensor& b,
                 std::span<const double> targets, nnet::Tensor* grad) {
  const std::size_t n = a.dim(0);
  const std::size_t d = weight.dim(1);
  if (b.dim(0) != n || targets.size() != n) throw ShapeMismatch("pair_loss: batch sizes differ");
  const nnet::Tensor zero_bias({d});
  const nnet::Tensor u = nnet::linear(a, weight, zero_bias);
  const nnet::Tensor v = nnet::linear(b, weight, zero_bias);

  nnet::Tensor du(u.shape()), dv(v.shape());
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto ur = u.matrix().row(static_cast<Eigen::Index>(r));
    const auto vr = v.matrix().row(static_cast<Eigen::Index>(r));
    const double nu = ur.norm();
    const double nv = vr.norm();
    if (nu == 0.0 || nv == 0.0) {
      loss += (0.5 - targets[r]) * (0.5 - targets[r]);
      continue;
    }
    const double c = ur.dot(vr) / (nu * nv);
    const double resid = (c + 1.0) / 2.0 - targets[r];
    loss += resid * resid;
    // d/dc of resid^2 / n is resid / n (the 1/2 of the score cancels the 2).
    const double dc = resid / static_cast<double>(n);
    du.matrix().row(static_cast<Eigen::Index>(r)) = dc * (vr / (nu * nv) - c * ur / (nu * nu));
    dv.matrix().row(static_cast<Eigen::Index>(r)) = dc * (ur / (nu * nv) - c * vr / (nv * nv));
  }
  if (grad) {
    auto ga = nnet::linear_backward(a, weight, du);
    auto gb = nnet::linear_backward(b, weight, dv);
    *grad = std::move(ga.dW);
    grad->matrix() += gb.dW.matrix();
  }
  return loss / static_cast<double>(std::max<std::size_t>(n, 1));
}

FinetuneResult finetune(const std::vector<EmbeddedPair>& pairs, const FinetuneConfig& config) {
  if (pairs.empty()) throw PreconditionError("finetune needs at least one pair");
  const std::size_t d = pairs.front().a.size();
  FinetuneResult result{Projection(d), {}};
  if (config.epochs == 0) return result;
  if (config.batch_size == 0) throw PreconditionError("finetune batch size must be positive");

  Rng rng(config.seed);
  nnet::AdamState adam;
  nnet::Tensor grad({d, d});
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const auto a = rows_tensor(pairs, idx, true, d);
      const auto b = rows_tensor(pairs, idx, false, d);
      std::vector<double> targets;
      targets.reserve(idx.size());
      for (auto i : idx) targets.push_back(pairs[i].target);
      const double loss = pair_loss(result.projection.weight(), a, b, targets, &grad);
      epoch_loss += loss * static_cast<double>(idx.size());
      nnet::adam_step({&result.projection.weight()}, {&grad}, adam, config.learning_rate);
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(pairs.size()));
  }
  result.projection.mark_trained();
  return result;
}

double separation_gap(const std::vector<EmbeddedPair>& pairs, const Projection& projection) {
  double same = 0.0, cross = 0.0;
  std::size_t n_same = 0, n_cross = 0;
  for (const auto& p : pairs) {
    const auto u = projection.apply(p.a);
    const auto v = projection.apply(p.b);
    double score = 0.5;
    try {
      score = normalize_score(cosine(u, v));
    } catch (const DegenerateVector&) {
    }
    if (p.target >= 0.5) {
      same += score, ++n_same;
    } else {
      cross += score, ++n_cross;
    }
  }
  if (n_same == 0 || n_cross == 0) throw PreconditionError("separation_gap needs both pair kinds");
  return same / static_cast<double>(n_same) - cross / static_cast<double>(n_cross);
}

// ---- Embedding files ----------------------------------------------------------

std::map<std::string, Embedding> import_embeddings(std::string_view bytes, std::size_t expected_dim) {
  std::map<std::string, Embedding> out;
  if (bytes.empty()) return out;
  binio::Reader r(bytes);
  r.expect_magic(kEmbeddingMagic);
  const auto dim = r.get<std::uint32_t>();
  const auto count = r.get<std::uint32_t>();
  if (dim != expected_dim) throw DimensionMismatch(expected_dim, dim);
  for (std::uint32_t row = 0; row < count; ++row) {
    const std::size_t at = r.position();
    const auto id_len = r.get<std::uint16_t>();
    std::string id(r.bytes(id_len));
    Embedding e(dim);
    for (auto& x : e) x = static_cast<double>(r.get<float>());
    if (!out.emplace(std::move(id), std::move(e)).second) {
      throw ParseError("duplicate embedding id in row " + std::to_string(row), at);
    }
  }
  if (!r.at_end()) throw ParseError("trailing bytes after embeddings", r.position());
  return out;
}

std::string export_embeddings(const std::vector<std::pair<std::string, Embedding>>& rows,
                              std::size_t dim) {
  binio::Writer w;
  w.bytes(kEmbeddingMagic);
  w.put(static_cast<std::uint32_t>(dim));
  w.put(static_cast<std::uint32_t>(rows.size()));
  for (const auto& [id, e] : rows) {
    if (e.size() != dim) throw DimensionMismatch(dim, e.size());
    if (id.size() > 0xFFFF) throw PreconditionError("embedding id longer than 65535 bytes");
    w.put(static_cast<std::uint16_t>(id.size()));
    w.bytes(id);
    for (double x : e) w.put(static_cast<float>(x));
  }
  return w.take();
}

}  // namespace rscope
