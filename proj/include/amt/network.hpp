/* Copyright 2026 The AMTNet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// The recognition network: a shared convolutional front-end feeding two
// structurally identical residual branches (recognition and auxiliary), each
// ending in adaptive average pooling, plus linear heads. The auxiliary
// branch and its head can be pruned after training without touching the
// recognition path.

#ifndef AMT_NETWORK_HPP_
#define AMT_NETWORK_HPP_

#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "amt/common.hpp"
#include "amt/nn.hpp"
#include "amt/rng.hpp"
#include "amt/tensor.hpp"

namespace amt {

inline std::size_t scaled_width(std::size_t base, double width_mult) {
  const auto w = static_cast<std::size_t>(std::llround(width_mult * static_cast<double>(base)));
  return std::max<std::size_t>(1, w);
}

// Shape-trace entry: stage name plus the (C, H, W) shape it produces.
struct ShapeTraceEntry {
  std::string name;
  std::vector<std::size_t> shape;
};

namespace net_detail {

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) throw ShapeError("residual add: shape mismatch");
  Tensor<T> y(a.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = a[i] + b[i];
  return y;
}

}  // namespace net_detail

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

// Front end: 7x7 stride-2 convolution, batch norm, ReLU, 3x3 stride-2 max
// pool. Halves time and frequency twice.
template <typename T>
class SharedLayer {
 public:
  explicit SharedLayer(std::size_t width)
      : conv_(1, width, 7, 2, 3), bn_(width), pool_(3, 2, 1) {}

  void init(RandomStream& rng) { conv_.init(rng); }
  void set_train(bool training) { bn_.set_train(training); }

  Tensor<T> forward(const Tensor<T>& x) {
    return pool_.forward(relu_.forward(bn_.forward(conv_.forward(x))));
  }
  Tensor<T> backward(const Tensor<T>& grad_out) {
    return conv_.backward(bn_.backward(relu_.backward(pool_.backward(grad_out))));
  }
  void collect(const std::string& prefix, Partition part, Registry<T>& out) {
    conv_.collect(prefix + ".conv", part, out);
    bn_.collect(prefix + ".bn", part, out);
  }

 private:
  Conv2d<T> conv_;
  BatchNorm2d<T> bn_;
  ReLU<T> relu_;
  MaxPool2d<T> pool_;
};

// conv-BN-ReLU-conv-BN plus skip connection; 1x1 stride-matched projection
// when width or stride changes, then a final ReLU after the addition.
template <typename T>
class BasicBlock {
 public:
  BasicBlock(std::size_t in_ch, std::size_t out_ch, std::size_t stride)
      : conv1_(in_ch, out_ch, 3, stride, 1),
        bn1_(out_ch),
        conv2_(out_ch, out_ch, 3, 1, 1),
        bn2_(out_ch) {
    if (stride != 1 || in_ch != out_ch) {
      proj_conv_.emplace(in_ch, out_ch, 1, stride, 0);
      proj_bn_.emplace(out_ch);
    }
  }

  void init(RandomStream& rng) {
    conv1_.init(rng);
    conv2_.init(rng);
    if (proj_conv_) proj_conv_->init(rng);
  }

  void set_train(bool training) {
    bn1_.set_train(training);
    bn2_.set_train(training);
    if (proj_bn_) proj_bn_->set_train(training);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    Tensor<T> m = relu1_.forward(bn1_.forward(conv1_.forward(x)));
    m = bn2_.forward(conv2_.forward(m));
    const Tensor<T> s = proj_conv_ ? proj_bn_->forward(proj_conv_->forward(x)) : x;
    return relu2_.forward(net_detail::add(m, s));
  }

  Tensor<T> backward(const Tensor<T>& grad_out) {
    const Tensor<T> d_sum = relu2_.backward(grad_out);
    Tensor<T> d_main = bn2_.backward(d_sum);
    d_main = conv2_.backward(d_main);
    d_main = relu1_.backward(d_main);
    d_main = bn1_.backward(d_main);
    d_main = conv1_.backward(d_main);
    const Tensor<T> d_skip =
        proj_conv_ ? proj_conv_->backward(proj_bn_->backward(d_sum)) : d_sum;
    return net_detail::add(d_main, d_skip);
  }

  void collect(const std::string& prefix, Partition part, Registry<T>& out) {
    conv1_.collect(prefix + ".conv1", part, out);
    bn1_.collect(prefix + ".bn1", part, out);
    conv2_.collect(prefix + ".conv2", part, out);
    bn2_.collect(prefix + ".bn2", part, out);
    if (proj_conv_) {
      proj_conv_->collect(prefix + ".proj_conv", part, out);
      proj_bn_->collect(prefix + ".proj_bn", part, out);
    }
  }

 private:
  Conv2d<T> conv1_;
  BatchNorm2d<T> bn1_;
  ReLU<T> relu1_;
  Conv2d<T> conv2_;
  BatchNorm2d<T> bn2_;
  ReLU<T> relu2_;
  std::optional<Conv2d<T>> proj_conv_;
  std::optional<BatchNorm2d<T>> proj_bn_;
};

// Four stages of two basic blocks (widths x1, x2, x4, x8 relative to the
// stem width; stride 2 at each stage transition), then adaptive average
// pooling to a flat embedding.
template <typename T>
class Branch {
 public:
  Branch(std::size_t stem_width, double width_mult) {
    const std::size_t w1 = stem_width;
    const std::size_t w2 = scaled_width(128, width_mult);
    const std::size_t w3 = scaled_width(256, width_mult);
    const std::size_t w4 = scaled_width(512, width_mult);
    blocks_.reserve(8);
    blocks_.emplace_back(w1, w1, 1);
    blocks_.emplace_back(w1, w1, 1);
    blocks_.emplace_back(w1, w2, 2);
    blocks_.emplace_back(w2, w2, 1);
    blocks_.emplace_back(w2, w3, 2);
    blocks_.emplace_back(w3, w3, 1);
    blocks_.emplace_back(w3, w4, 2);
    blocks_.emplace_back(w4, w4, 1);
    embedding_dim_ = w4;
  }

  void init(RandomStream& rng) {
    for (auto& b : blocks_) b.init(rng);
  }
  void set_train(bool training) {
    for (auto& b : blocks_) b.set_train(training);
  }

  // Returns the flat (N, embedding_dim) embedding. When trace is non-null,
  // every block output and the embedding are appended to it.
  Tensor<T> forward(const Tensor<T>& r, std::vector<ShapeTraceEntry>* trace = nullptr) {
    Tensor<T> x = r;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      x = blocks_[i].forward(x);
      if (trace != nullptr)
        trace->push_back({"stage" + std::to_string(i / 2 + 1),
                          {x.dim(1), x.dim(2), x.dim(3)}});
    }
    Tensor<T> e = pool_.forward(x);
    if (trace != nullptr) trace->push_back({"embedding", {e.dim(1)}});
    return e;
  }

  Tensor<T> backward(const Tensor<T>& grad_embedding) {
    Tensor<T> g = pool_.backward(grad_embedding);
    for (std::size_t i = blocks_.size(); i-- > 0;) g = blocks_[i].backward(g);
    return g;
  }

  void collect(const std::string& prefix, Partition part, Registry<T>& out) {
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].collect(prefix + ".block" + std::to_string(i), part, out);
  }

  std::size_t embedding_dim() const { return embedding_dim_; }

 private:
  std::vector<BasicBlock<T>> blocks_;
  GlobalAvgPool<T> pool_;
  std::size_t embedding_dim_ = 0;
};

// ---------------------------------------------------------------------------
// Full network
// ---------------------------------------------------------------------------

template <typename T>
struct ForwardResult {
  Tensor<T> representation;   // shared-layer output (N, C, T/4, F/4)
  Tensor<T> main_embedding;   // (N, E)
  Tensor<T> aux_embedding;    // (N, E); empty when pruned
  Tensor<T> main_logits;      // (N, n_class)
  Tensor<T> aux_logits;       // (N, n_aux); empty when pruned
};

template <typename T>
class AMTNet {
 public:
  AMTNet(int n_class, int n_aux, double width_mult = 1.0)
      : n_class_(n_class),
        n_aux_(n_aux),
        width_mult_(width_mult),
        stem_width_(scaled_width(64, width_mult)),
        shared_(stem_width_),
        main_(stem_width_, width_mult),
        aux_(stem_width_, width_mult),
        fc_(main_.embedding_dim(), static_cast<std::size_t>(n_class)),
        dis_(aux_.embedding_dim(), static_cast<std::size_t>(n_aux)) {
    if (n_class < 2) throw ConfigError("network: n_class must be >= 2");
    if (n_aux != 2 && n_aux != 3) throw ConfigError("network: n_aux must be 2 or 3");
    init(0);  // never hand out a zero-weight network; reseed via init()
  }

  AMTNet(const AMTNet&) = delete;
  AMTNet& operator=(const AMTNet&) = delete;
  AMTNet(AMTNet&&) = default;
  AMTNet& operator=(AMTNet&&) = default;

  // Deterministic under seed; the two branches consume independent draws
  // from one stream, so they are never bitwise equal.
  void init(std::uint64_t seed) {
    RandomStream rng = make_stream(seed, RngPurpose::kParamInit);
    shared_.init(rng);
    main_.init(rng);
    aux_.init(rng);
    fc_.init(rng);
    dis_.init(rng);
  }

  void set_train(bool training) {
    training_ = training;
    shared_.set_train(training);
    main_.set_train(training);
    aux_.set_train(training);
  }

  int n_class() const { return n_class_; }
  int n_aux() const { return n_aux_; }
  double width_mult() const { return width_mult_; }
  bool pruned() const { return pruned_; }
  std::size_t embedding_dim() const { return main_.embedding_dim(); }

  // Shared front end on a (N, 1, T, F) batch.
  Tensor<T> shared_forward(const Tensor<T>& x) {
    if (x.rank() != 4 || x.dim(1) != 1)
      throw ShapeError("network: input must be (N, 1, T, F)");
    if (!all_finite(x)) throw NumericalError("network: non-finite input");
    return shared_.forward(x);
  }

  // Full forward; runs the auxiliary path unless pruned or disabled.
  ForwardResult<T> forward(const Tensor<T>& x, bool with_aux = true,
                           std::vector<ShapeTraceEntry>* trace = nullptr) {
    ForwardResult<T> r;
    r.representation = shared_forward(x);
    if (trace != nullptr)
      trace->push_back({"shared",
                        {r.representation.dim(1), r.representation.dim(2),
                         r.representation.dim(3)}});
    r.main_embedding = main_.forward(r.representation, trace);
    r.main_logits = fc_.forward(r.main_embedding);
    if (trace != nullptr) trace->push_back({"fc", {r.main_logits.dim(1)}});
    if (with_aux && !pruned_) {
      r.aux_embedding = aux_.forward(r.representation);
      r.aux_logits = dis_.forward(r.aux_embedding);
      if (trace != nullptr) trace->push_back({"dis", {r.aux_logits.dim(1)}});
    } else if (with_aux && pruned_) {
      throw UnsupportedOperation("network: auxiliary head was pruned");
    }
    return r;
  }

  // Adversarial-stage forward: shared front end and auxiliary path only.
  // The recognition branch neither runs nor updates batch-norm statistics.
  ForwardResult<T> forward_adversarial(const Tensor<T>& x) {
    if (pruned_) throw UnsupportedOperation("network: auxiliary head was pruned");
    ForwardResult<T> r;
    r.representation = shared_forward(x);
    r.aux_embedding = aux_.forward(r.representation);
    r.aux_logits = dis_.forward(r.aux_embedding);
    return r;
  }

  // Backpropagates head gradients; either may be null. The shared front end
  // receives the sum of the branch contributions that are present.
  void backward(const Tensor<T>* d_main_logits, const Tensor<T>* d_aux_logits) {
    if (d_main_logits == nullptr && d_aux_logits == nullptr)
      throw InvalidInput("network: backward with no gradients");
    Tensor<T> d_rep;
    if (d_main_logits != nullptr) {
      d_rep = main_.backward(fc_.backward(*d_main_logits));
    }
    if (d_aux_logits != nullptr) {
      if (pruned_) throw UnsupportedOperation("network: auxiliary head was pruned");
      Tensor<T> d_rep_aux = aux_.backward(dis_.backward(*d_aux_logits));
      d_rep = d_main_logits != nullptr ? net_detail::add(d_rep, d_rep_aux)
                                       : std::move(d_rep_aux);
    }
    shared_.backward(d_rep);
  }

  // All named tensors. Pruned networks expose no auxiliary entries.
  Registry<T> registry() {
    Registry<T> out;
    shared_.collect("shared", Partition::kShared, out);
    main_.collect("main", Partition::kRecognition, out);
    fc_.collect("fc", Partition::kRecognition, out);
    if (!pruned_) {
      aux_.collect("aux", Partition::kAuxiliary, out);
      dis_.collect("dis", Partition::kAuxiliary, out);
    }
    return out;
  }

  void zero_grad() {
    for (auto& t : registry())
      if (t.grad != nullptr) t.grad->zero();
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto& t : registry())
      if (t.trainable) n += t.value->numel();
    return n;
  }

  // Drops the auxiliary branch and discriminator head. Recognition tensors
  // are untouched, so recognition outputs stay bitwise identical.
  void prune_aux() { pruned_ = true; }

 private:
  int n_class_, n_aux_;
  double width_mult_;
  std::size_t stem_width_;
  bool training_ = true;
  bool pruned_ = false;
  SharedLayer<T> shared_;
  Branch<T> main_, aux_;
  Linear<T> fc_, dis_;
};

// Class probabilities from logits: softmax rows.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax: logits must be (N, K)");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor<T> p(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j)
      mx = std::max(mx, static_cast<double>(logits.at2(i, j)));
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      z += std::exp(static_cast<double>(logits.at2(i, j)) - mx);
    for (std::size_t j = 0; j < k; ++j)
      p.at2(i, j) = static_cast<T>(std::exp(static_cast<double>(logits.at2(i, j)) - mx) / z);
  }
  return p;
}

// Recognition and auxiliary probability heads for one batch.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> predict_heads(AMTNet<T>& net, const Tensor<T>& x) {
  ForwardResult<T> r = net.forward(x, /*with_aux=*/!net.pruned());
  Tensor<T> aux_p;
  if (!net.pruned()) aux_p = softmax_rows(r.aux_logits);
  return {softmax_rows(r.main_logits), std::move(aux_p)};
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------
//
// Layout (little-endian):
//   magic "AMTC", version u8, pruned u8, n_class u32, n_aux u32,
//   width_mult f64, config length u32 + UTF-8 bytes,
//   tensor count u32, then per tensor:
//     name length u16 + bytes, rank u8, dims u32 each, float32 data.

struct Checkpoint {
  int n_class = 0;
  int n_aux = 0;
  double width_mult = 1.0;
  bool pruned = false;
  std::string config_json;
  std::map<std::string, Tensor<float>> tensors;
};

template <typename T>
void save_checkpoint(const std::string& path, AMTNet<T>& net,
                     const std::string& config_json) {
  require_little_endian();
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw IoError("checkpoint: cannot open for write: " + path);
  bool ok = true;
  auto wr = [&](const void* p, std::size_t size, std::size_t count) {
    ok = ok && std::fwrite(p, size, count, f) == count;
  };
  const char magic[4] = {'A', 'M', 'T', 'C'};
  const std::uint8_t version = 1;
  const std::uint8_t pruned = net.pruned() ? 1 : 0;
  const auto n_class = static_cast<std::uint32_t>(net.n_class());
  const auto n_aux = static_cast<std::uint32_t>(net.n_aux());
  const double wm = net.width_mult();
  wr(magic, 1, 4);
  wr(&version, 1, 1);
  wr(&pruned, 1, 1);
  wr(&n_class, 4, 1);
  wr(&n_aux, 4, 1);
  wr(&wm, 8, 1);
  const auto cfg_len = static_cast<std::uint32_t>(config_json.size());
  wr(&cfg_len, 4, 1);
  wr(config_json.data(), 1, config_json.size());

  Registry<T> reg = net.registry();
  const auto count = static_cast<std::uint32_t>(reg.size());
  wr(&count, 4, 1);
  for (const auto& t : reg) {
    const auto name_len = static_cast<std::uint16_t>(t.name.size());
    wr(&name_len, 2, 1);
    wr(t.name.data(), 1, t.name.size());
    const auto rank = static_cast<std::uint8_t>(t.value->rank());
    wr(&rank, 1, 1);
    for (std::size_t d = 0; d < t.value->rank(); ++d) {
      const auto dim = static_cast<std::uint32_t>(t.value->dim(d));
      wr(&dim, 4, 1);
    }
    Tensor<float> as_f32 = t.value->template cast<float>();
    wr(as_f32.data(), sizeof(float), as_f32.numel());
  }
  ok = std::fclose(f) == 0 && ok;
  if (!ok) throw IoError("checkpoint: short write: " + path);
}

inline Checkpoint read_checkpoint(const std::string& path) {
  require_little_endian();
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (f == nullptr) throw IoError("checkpoint: cannot open: " + path);
  bool ok = true;
  auto rd = [&](void* p, std::size_t size, std::size_t count) {
    ok = ok && std::fread(p, size, count, f) == count;
  };
  char magic[4] = {};
  std::uint8_t version = 0, pruned = 0;
  std::uint32_t n_class = 0, n_aux = 0, cfg_len = 0, count = 0;
  double wm = 0.0;
  rd(magic, 1, 4);
  rd(&version, 1, 1);
  rd(&pruned, 1, 1);
  rd(&n_class, 4, 1);
  rd(&n_aux, 4, 1);
  rd(&wm, 8, 1);
  rd(&cfg_len, 4, 1);
  if (!ok || std::memcmp(magic, "AMTC", 4) != 0 || version != 1) {
    std::fclose(f);
    throw IoError("checkpoint: bad header: " + path);
  }
  Checkpoint ck;
  ck.n_class = static_cast<int>(n_class);
  ck.n_aux = static_cast<int>(n_aux);
  ck.width_mult = wm;
  ck.pruned = pruned != 0;
  ck.config_json.resize(cfg_len);
  rd(ck.config_json.data(), 1, cfg_len);
  rd(&count, 4, 1);
  for (std::uint32_t i = 0; ok && i < count; ++i) {
    std::uint16_t name_len = 0;
    rd(&name_len, 2, 1);
    std::string name(name_len, '\0');
    rd(name.data(), 1, name_len);
    std::uint8_t rank = 0;
    rd(&rank, 1, 1);
    std::vector<std::size_t> shape;
    for (std::uint8_t d = 0; d < rank; ++d) {
      std::uint32_t dim = 0;
      rd(&dim, 4, 1);
      shape.push_back(dim);
    }
    if (!ok) break;
    Tensor<float> t(shape);
    rd(t.data(), sizeof(float), t.numel());
    ck.tensors.emplace(std::move(name), std::move(t));
  }
  std::fclose(f);
  if (!ok) throw IoError("checkpoint: truncated: " + path);
  return ck;
}

// Rebuilds a network from a checkpoint. Every registry entry must be present
// in the file; pruned checkpoints simply carry no auxiliary entries.
template <typename T>
std::unique_ptr<AMTNet<T>> network_from_checkpoint(const Checkpoint& ck) {
  auto net = std::make_unique<AMTNet<T>>(ck.n_class, ck.n_aux, ck.width_mult);
  if (ck.pruned) net->prune_aux();
  for (auto& entry : net->registry()) {
    const auto it = ck.tensors.find(entry.name);
    if (it == ck.tensors.end())
      throw IoError("checkpoint: missing tensor " + entry.name);
    if (it->second.shape() != entry.value->shape())
      throw ShapeError("checkpoint: shape mismatch for " + entry.name);
    *entry.value = it->second.template cast<T>();
  }
  net->set_train(false);
  return net;
}

}  // namespace amt

#endif  // AMT_NETWORK_HPP_
