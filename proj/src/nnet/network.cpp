#include "network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "../binio.hpp"

namespace rscope::nnet {

namespace {

constexpr std::string_view kMagic = "RBNN1";

void glorot(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data()) v = rng.uniform(-limit, limit);
}

std::size_t product(const std::vector<std::size_t>& s) { return Tensor::count(s); }

std::string join(const std::vector<std::size_t>& dims) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(dims[i]);
  }
  return out;
}

std::vector<std::size_t> with_batch(std::size_t n, const std::vector<std::size_t>& s) {
  std::vector<std::size_t> out{n};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

}  // namespace

// ---- Dense ----------------------------------------------------------------

Dense::Dense(std::size_t in, std::size_t out, bool bias)
    : in_(in),
      out_(out),
      has_bias_(bias),
      weight_({in, out}),
      bias_({out}),
      dweight_({in, out}),
      dbias_({out}) {}

Tensor Dense::forward(const Tensor& x) {
  const std::size_t n = x.rank() ? x.dim(0) : 0;
  input_ = x.rank() == 2 ? x : x.reshaped({n, n ? x.size() / n : in_});
  return linear(input_, weight_, bias_);
}

Tensor Dense::infer(const Tensor& x) const {
  const std::size_t n = x.rank() ? x.dim(0) : 0;
  if (x.rank() == 2) return linear(x, weight_, bias_);
  return linear(x.reshaped({n, n ? x.size() / n : in_}), weight_, bias_);
}

Tensor Dense::backward(const Tensor& dy) {
  auto g = linear_backward(input_, weight_, dy);
  dweight_ = std::move(g.dW);
  if (has_bias_) {
    dbias_ = std::move(g.db);
  }
  return std::move(g.dx);
}

std::vector<Tensor*> Dense::parameters() {
  if (has_bias_) return {&weight_, &bias_};
  return {&weight_};
}

std::vector<Tensor*> Dense::gradients() {
  if (has_bias_) return {&dweight_, &dbias_};
  return {&dweight_};
}

void Dense::initialize(Rng& rng) {
  glorot(weight_, in_, out_, rng);
  std::fill(bias_.data().begin(), bias_.data().end(), 0.0);
}

std::vector<std::size_t> Dense::output_shape(const std::vector<std::size_t>& in) const {
  if (product(in) != in_) {
    throw ShapeMismatch("dense " + std::to_string(in_) + "->" + std::to_string(out_) +
                        " cannot take per-sample input of width " + std::to_string(product(in)));
  }
  return {out_};
}

std::string Dense::descriptor() const {
  return "dense " + std::to_string(in_) + " " + std::to_string(out_) + (has_bias_ ? "" : " nobias");
}

// ---- Relu -----------------------------------------------------------------

Tensor Relu::forward(const Tensor& x) {
  input_ = x;
  return relu(x);
}

Tensor Relu::infer(const Tensor& x) const { return relu(x); }

Tensor Relu::backward(const Tensor& dy) { return relu_backward(input_, dy); }

// ---- Conv1D ---------------------------------------------------------------

Conv1D::Conv1D(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      filters_({out_channels, in_channels, kernel}),
      bias_({out_channels}),
      dfilters_({out_channels, in_channels, kernel}),
      dbias_({out_channels}) {}

namespace {

void add_channel_bias(Tensor& y, const Tensor& bias, const detail::ConvGeometry& g) {
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      double* row = y.data().data() + (n * g.out_channels + o) * g.out_length;
      for (std::size_t t = 0; t < g.out_length; ++t) row[t] += bias[o];
    }
  }
}

}  // namespace

Tensor Conv1D::forward(const Tensor& x) {
  if (x.rank() != 3) throw ShapeMismatch("conv1d layer expects [N,C,L], got " + x.shape_string());
  input_shape_ = x.shape();
  geometry_ = detail::conv_geometry(x, filters_, stride_);
  cols_ = detail::im2col(x, geometry_);
  Tensor y = detail::conv_forward_cols(
      cols_, filters_, geometry_, {geometry_.batch, out_channels_, geometry_.out_length});
  add_channel_bias(y, bias_, geometry_);
  return y;
}

Tensor Conv1D::infer(const Tensor& x) const {
  if (x.rank() != 3) throw ShapeMismatch("conv1d layer expects [N,C,L], got " + x.shape_string());
  const auto g = detail::conv_geometry(x, filters_, stride_);
  Tensor y = detail::conv_forward_cols(detail::im2col(x, g), filters_, g,
                                       {g.batch, out_channels_, g.out_length});
  add_channel_bias(y, bias_, g);
  return y;
}

Tensor Conv1D::backward(const Tensor& dy) {
  auto g = detail::conv_backward_cols(cols_, filters_, geometry_, input_shape_, dy);
  dfilters_ = std::move(g.dfilters);
  std::fill(dbias_.data().begin(), dbias_.data().end(), 0.0);
  for (std::size_t n = 0; n < geometry_.batch; ++n) {
    for (std::size_t o = 0; o < out_channels_; ++o) {
      const double* row = dy.data().data() + (n * out_channels_ + o) * geometry_.out_length;
      for (std::size_t t = 0; t < geometry_.out_length; ++t) dbias_[o] += row[t];
    }
  }
  return std::move(g.dx);
}

void Conv1D::initialize(Rng& rng) {
  glorot(filters_, in_channels_ * kernel_, out_channels_ * kernel_, rng);
  std::fill(bias_.data().begin(), bias_.data().end(), 0.0);
}

std::vector<std::size_t> Conv1D::output_shape(const std::vector<std::size_t>& in) const {
  if (in.size() != 2 || in[0] != in_channels_) {
    throw ShapeMismatch("conv1d expects per-sample [" + std::to_string(in_channels_) + ",L]");
  }
  return {out_channels_, window_output_length(in[1], kernel_, stride_)};
}

std::string Conv1D::descriptor() const {
  return "conv1d " + std::to_string(in_channels_) + " " + std::to_string(out_channels_) + " " +
         std::to_string(kernel_) + " " + std::to_string(stride_);
}

// ---- MaxPool1D ------------------------------------------------------------

Tensor MaxPool1D::forward(const Tensor& x) {
  input_shape_ = x.shape();
  auto r = maxpool1d(x, kernel_, stride_);
  argmax_ = std::move(r.argmax);
  return std::move(r.y);
}

Tensor MaxPool1D::infer(const Tensor& x) const { return maxpool1d(x, kernel_, stride_).y; }

Tensor MaxPool1D::backward(const Tensor& dy) { return maxpool1d_backward(input_shape_, argmax_, dy); }

std::vector<std::size_t> MaxPool1D::output_shape(const std::vector<std::size_t>& in) const {
  if (in.size() != 2) throw ShapeMismatch("maxpool1d expects per-sample [C,L]");
  return {in[0], window_output_length(in[1], kernel_, stride_)};
}

std::string MaxPool1D::descriptor() const {
  return "maxpool1d " + std::to_string(kernel_) + " " + std::to_string(stride_);
}

// ---- Reshape --------------------------------------------------------------

Tensor Reshape::forward(const Tensor& x) {
  input_shape_ = x.shape();
  return x.reshaped(with_batch(x.dim(0), target_));
}

Tensor Reshape::infer(const Tensor& x) const { return x.reshaped(with_batch(x.dim(0), target_)); }

Tensor Reshape::backward(const Tensor& dy) { return dy.reshaped(input_shape_); }

std::vector<std::size_t> Reshape::output_shape(const std::vector<std::size_t>& in) const {
  if (product(in) != product(target_)) {
    throw ShapeMismatch("reshape to [" + join(target_) + "] changes the element count");
  }
  return target_;
}

std::string Reshape::descriptor() const { return "reshape " + join(target_); }

// ---- Network --------------------------------------------------------------

Network::Network(std::vector<std::size_t> input_shape) : input_shape_(std::move(input_shape)) {}

Network::Network(const Network& other) : input_shape_(other.input_shape_) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) *this = Network(other);
  return *this;
}

Network& Network::add(std::unique_ptr<Layer> layer) {
  layers_.push_back(std::move(layer));
  // Validates the shape chain eagerly so a bad architecture fails at build time.
  shape_trace();
  return *this;
}

void Network::initialize(Seed seed) {
  Rng rng(seed);
  for (auto& l : layers_) l->initialize(rng);
}

Tensor Network::forward(const Tensor& x) {
  if (x.rank() == 0 || x.size() != x.dim(0) * product(input_shape_)) {
    throw ShapeMismatch("network input " + x.shape_string() + " does not match per-sample [" +
                        join(input_shape_) + "]");
  }
  Tensor h = x.reshaped(with_batch(x.dim(0), input_shape_));
  for (auto& l : layers_) h = l->forward(h);
  return h.reshaped({x.dim(0), h.size() / std::max<std::size_t>(x.dim(0), 1)});
}

Tensor Network::infer(const Tensor& x) const {
  if (x.rank() == 0 || x.size() != x.dim(0) * product(input_shape_)) {
    throw ShapeMismatch("network input " + x.shape_string() + " does not match per-sample [" +
                        join(input_shape_) + "]");
  }
  Tensor h = x.reshaped(with_batch(x.dim(0), input_shape_));
  for (const auto& l : layers_) h = l->infer(h);
  return h.reshaped({x.dim(0), h.size() / std::max<std::size_t>(x.dim(0), 1)});
}

void Network::backward(const Tensor& dlogits) {
  Tensor g = dlogits;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
}

double Network::loss_and_gradients(const Tensor& x, std::span<const std::size_t> labels) {
  auto r = softmax_cross_entropy(forward(x), labels);
  backward(r.dlogits);
  return r.loss;
}

double Network::loss(const Tensor& x, std::span<const std::size_t> labels) {
  return softmax_cross_entropy(forward(x), labels).loss;
}

std::vector<Tensor*> Network::parameters() {
  std::vector<Tensor*> out;
  for (auto& l : layers_) {
    auto p = l->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<Tensor*> Network::gradients() {
  std::vector<Tensor*> out;
  for (auto& l : layers_) {
    auto g = l->gradients();
    out.insert(out.end(), g.begin(), g.end());
  }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) {
    for (const Tensor* p : l->parameters()) n += p->size();
  }
  return n;
}

std::vector<std::vector<std::size_t>> Network::shape_trace() const {
  std::vector<std::vector<std::size_t>> trace{input_shape_};
  for (const auto& l : layers_) trace.push_back(l->output_shape(trace.back()));
  return trace;
}

std::size_t Network::output_width() const { return product(shape_trace().back()); }

std::string Network::descriptor() const {
  std::string d = "input " + join(input_shape_);
  for (const auto& l : layers_) d += ";" + l->descriptor();
  return d;
}

Network Network::from_descriptor(std::string_view descriptor) {
  Network net;
  bool have_input = false;
  std::size_t pos = 0;
  while (pos <= descriptor.size()) {
    std::size_t end = descriptor.find(';', pos);
    if (end == std::string_view::npos) end = descriptor.size();
    std::istringstream op{std::string(descriptor.substr(pos, end - pos))};
    pos = end + 1;
    std::string kind;
    op >> kind;
    std::vector<std::size_t> args;
    std::string tok;
    bool nobias = false;
    while (op >> tok) {
      if (tok == "nobias") {
        nobias = true;
        continue;
      }
      try {
        args.push_back(static_cast<std::size_t>(std::stoull(tok)));
      } catch (const std::exception&) {
        throw ParseError("bad descriptor token '" + tok + "'", 0);
      }
    }
    auto need = [&](std::size_t n) {
      if (args.size() != n) throw ParseError("descriptor op '" + kind + "' has wrong arity", 0);
    };
    if (kind == "input") {
      net.input_shape_ = args;
      have_input = true;
    } else if (!have_input) {
      throw ParseError("descriptor must start with 'input'", 0);
    } else if (kind == "dense") {
      need(2);
      net.emplace<Dense>(args[0], args[1], !nobias);
    } else if (kind == "relu") {
      need(0);
      net.emplace<Relu>();
    } else if (kind == "conv1d") {
      need(4);
      net.emplace<Conv1D>(args[0], args[1], args[2], args[3]);
    } else if (kind == "maxpool1d") {
      need(2);
      net.emplace<MaxPool1D>(args[0], args[1]);
    } else if (kind == "reshape") {
      net.emplace<Reshape>(args);
    } else {
      throw ParseError("unknown descriptor op '" + kind + "'", 0);
    }
  }
  return net;
}

std::string Network::serialize() const {
  binio::Writer w;
  w.bytes(kMagic);
  const std::string d = descriptor();
  w.put(static_cast<std::uint32_t>(d.size()));
  w.bytes(d);
  w.put(static_cast<std::uint64_t>(parameter_count()));
  for (const auto& l : layers_) {
    for (const Tensor* p : l->parameters()) {
      for (double v : p->data()) w.put(static_cast<float>(v));
    }
  }
  return w.take();
}

Network Network::deserialize(std::string_view bytes) {
  binio::Reader r(bytes);
  r.expect_magic(kMagic);
  const auto dlen = r.get<std::uint32_t>();
  Network net = from_descriptor(r.bytes(dlen));
  const auto count = r.get<std::uint64_t>();
  if (count != net.parameter_count()) {
    throw ParseError("parameter count " + std::to_string(count) + " does not match descriptor (" +
                         std::to_string(net.parameter_count()) + ")",
                     r.position());
  }
  for (Tensor* p : net.parameters()) {
    for (auto& v : p->data()) v = static_cast<double>(r.get<float>());
  }
  if (!r.at_end()) throw ParseError("trailing bytes after parameters", r.position());
  return net;
}

void Network::save(const std::string& path) const { binio::write_file(path, serialize()); }

Network Network::load(const std::string& path) { return deserialize(binio::read_file(path)); }

double grad_check(Network& net, const Tensor& input, std::span<const std::size_t> labels, double step) {
  net.loss_and_gradients(input, labels);
  std::vector<std::vector<double>> analytic;
  for (const Tensor* g : net.gradients()) analytic.emplace_back(g->values());

  double worst = 0.0;
  auto params = net.parameters();
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto data = params[t]->data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + step;
      const double up = net.loss(input, labels);
      data[i] = saved - step;
      const double down = net.loss(input, labels);
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[t][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace rscope::nnet
