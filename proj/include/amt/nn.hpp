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

// Trainable layer primitives over Tensor<T>: convolution (im2col + GEMM),
// batch normalization, ReLU, max/average pooling, and linear. Each layer
// caches what its backward pass needs; backward returns the input gradient
// and accumulates parameter gradients.

#ifndef AMT_NN_HPP_
#define AMT_NN_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "amt/common.hpp"
#include "amt/rng.hpp"
#include "amt/tensor.hpp"

namespace amt {

enum class Partition { kShared = 0, kRecognition = 1, kAuxiliary = 2 };

inline const char* partition_name(Partition p) {
  switch (p) {
    case Partition::kShared: return "shared";
    case Partition::kRecognition: return "recognition";
    case Partition::kAuxiliary: return "auxiliary";
  }
  throw InvalidInput("unknown partition");
}

template <typename T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;

  void resize(std::vector<std::size_t> shape) {
    value = Tensor<T>(shape);
    grad = Tensor<T>(std::move(shape));
  }
};

// One entry of the parameter registry. Buffers (batch-norm running
// statistics) are registered with trainable = false and no gradient; they
// still belong to a partition for freeze checks and checkpointing.
template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T>* value = nullptr;
  Tensor<T>* grad = nullptr;
  bool trainable = true;
  Partition partition = Partition::kShared;
};

template <typename T>
using Registry = std::vector<NamedTensor<T>>;

inline std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride,
                                std::size_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

namespace nn_detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

}  // namespace nn_detail

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

template <typename T>
class Conv2d {
 public:
  Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t stride,
         std::size_t pad)
      : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad) {
    weight_.resize({out_ch_, in_ch_, k_, k_});
  }

  // Fan-in-scaled normal initialization.
  void init(RandomStream& rng) {
    const double fan_in = static_cast<double>(in_ch_ * k_ * k_);
    const double sigma = std::sqrt(2.0 / fan_in);
    for (std::size_t i = 0; i < weight_.value.numel(); ++i)
      weight_.value[i] = static_cast<T>(rng.normal() * sigma);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    check_input(x);
    x_ = x;
    const std::size_t n = x.dim(0);
    const std::size_t oh = conv_out_dim(x.dim(2), k_, stride_, pad_);
    const std::size_t ow = conv_out_dim(x.dim(3), k_, stride_, pad_);
    const std::size_t patch = in_ch_ * k_ * k_;
    const std::size_t cols = oh * ow;
    cols_.resize(patch * cols);
    Tensor<T> y({n, out_ch_, oh, ow});
    nn_detail::ConstMatMap<T> w(weight_.value.data(), out_ch_, patch);
    for (std::size_t s = 0; s < n; ++s) {
      im2col(x, s, oh, ow);
      nn_detail::ConstMatMap<T> c(cols_.data(), patch, cols);
      nn_detail::MatMap<T> out(y.data() + s * out_ch_ * cols, out_ch_, cols);
      out.noalias() = w * c;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) {
    const std::size_t n = x_.dim(0);
    const std::size_t oh = grad_out.dim(2);
    const std::size_t ow = grad_out.dim(3);
    const std::size_t patch = in_ch_ * k_ * k_;
    const std::size_t cols = oh * ow;
    cols_.resize(patch * cols);
    dcols_.resize(patch * cols);
    Tensor<T> dx(x_.shape());
    nn_detail::ConstMatMap<T> w(weight_.value.data(), out_ch_, patch);
    nn_detail::MatMap<T> dw(weight_.grad.data(), out_ch_, patch);
    for (std::size_t s = 0; s < n; ++s) {
      im2col(x_, s, oh, ow);
      nn_detail::ConstMatMap<T> c(cols_.data(), patch, cols);
      nn_detail::ConstMatMap<T> g(grad_out.data() + s * out_ch_ * cols, out_ch_, cols);
      dw.noalias() += g * c.transpose();
      nn_detail::MatMap<T> dc(dcols_.data(), patch, cols);
      dc.noalias() = w.transpose() * g;
      col2im(dx, s, oh, ow);
    }
    return dx;
  }

  void collect(const std::string& prefix, Partition part, Registry<T>& out) {
    out.push_back({prefix + ".weight", &weight_.value, &weight_.grad, true, part});
  }

  Param<T>& weight() { return weight_; }
  std::size_t out_channels() const { return out_ch_; }

 private:
  void check_input(const Tensor<T>& x) const {
    if (x.rank() != 4) throw ShapeError("conv: input must be (N, C, H, W)");
    if (x.dim(1) != in_ch_) throw ShapeError("conv: channel mismatch");
    if (x.dim(2) + 2 * pad_ < k_ || x.dim(3) + 2 * pad_ < k_)
      throw ShapeError("conv: input smaller than kernel");
  }

  void im2col(const Tensor<T>& x, std::size_t sample, std::size_t oh, std::size_t ow) {
    const std::size_t h = x.dim(2), w = x.dim(3);
    const T* src = x.data() + sample * in_ch_ * h * w;
    std::size_t r = 0;
    for (std::size_t c = 0; c < in_ch_; ++c) {
      for (std::size_t ki = 0; ki < k_; ++ki) {
        for (std::size_t kj = 0; kj < k_; ++kj, ++r) {
          T* dst = cols_.data() + r * oh * ow;
          for (std::size_t i = 0; i < oh; ++i) {
            const std::ptrdiff_t yy =
                static_cast<std::ptrdiff_t>(i * stride_ + ki) - static_cast<std::ptrdiff_t>(pad_);
            if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(h)) {
              std::fill(dst + i * ow, dst + (i + 1) * ow, T(0));
              continue;
            }
            const T* row = src + (c * h + static_cast<std::size_t>(yy)) * w;
            for (std::size_t j = 0; j < ow; ++j) {
              const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(j * stride_ + kj) -
                                        static_cast<std::ptrdiff_t>(pad_);
              dst[i * ow + j] = (xx < 0 || xx >= static_cast<std::ptrdiff_t>(w))
                                    ? T(0)
                                    : row[static_cast<std::size_t>(xx)];
            }
          }
        }
      }
    }
  }

  void col2im(Tensor<T>& dx, std::size_t sample, std::size_t oh, std::size_t ow) {
    const std::size_t h = dx.dim(2), w = dx.dim(3);
    T* dst = dx.data() + sample * in_ch_ * h * w;
    std::size_t r = 0;
    for (std::size_t c = 0; c < in_ch_; ++c) {
      for (std::size_t ki = 0; ki < k_; ++ki) {
        for (std::size_t kj = 0; kj < k_; ++kj, ++r) {
          const T* src = dcols_.data() + r * oh * ow;
          for (std::size_t i = 0; i < oh; ++i) {
            const std::ptrdiff_t yy =
                static_cast<std::ptrdiff_t>(i * stride_ + ki) - static_cast<std::ptrdiff_t>(pad_);
            if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(h)) continue;
            T* row = dst + (c * h + static_cast<std::size_t>(yy)) * w;
            for (std::size_t j = 0; j < ow; ++j) {
              const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(j * stride_ + kj) -
                                        static_cast<std::ptrdiff_t>(pad_);
              if (xx >= 0 && xx < static_cast<std::ptrdiff_t>(w))
                row[static_cast<std::size_t>(xx)] += src[i * ow + j];
            }
          }
        }
      }
    }
  }

  std::size_t in_ch_, out_ch_, k_, stride_, pad_;
  Param<T> weight_;
  Tensor<T> x_;
  std::vector<T> cols_, dcols_;
};

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

template <typename T>
class BatchNorm2d {
 public:
  explicit BatchNorm2d(std::size_t channels, double momentum = 0.1, double eps = 1e-5)
      : channels_(channels), momentum_(momentum), eps_(eps) {
    gamma_.resize({channels_});
    beta_.resize({channels_});
    gamma_.value.fill(T(1));
    running_mean_ = Tensor<T>({channels_});
    running_var_ = Tensor<T>::full({channels_}, T(1));
  }

  void set_train(bool training) { training_ = training; }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.rank() != 4 || x.dim(1) != channels_)
      throw ShapeError("batchnorm: input must be (N, C, H, W) with matching C");
    const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const std::size_t m = n * h * w;
    const std::size_t plane = h * w;
    Tensor<T> y(x.shape());

    if (!training_) {
      for (std::size_t c = 0; c < channels_; ++c) {
        const double inv = 1.0 / std::sqrt(static_cast<double>(running_var_[c]) + eps_);
        const double g = static_cast<double>(gamma_.value[c]) * inv;
        const double b = static_cast<double>(beta_.value[c]) -
                         g * static_cast<double>(running_mean_[c]);
        for (std::size_t s = 0; s < n; ++s) {
          const T* src = x.data() + (s * channels_ + c) * plane;
          T* dst = y.data() + (s * channels_ + c) * plane;
          for (std::size_t i = 0; i < plane; ++i)
            dst[i] = static_cast<T>(g * static_cast<double>(src[i]) + b);
        }
      }
      return y;
    }

    xhat_ = Tensor<T>(x.shape());
    inv_std_.assign(channels_, 0.0);
    for (std::size_t c = 0; c < channels_; ++c) {
      double mean = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const T* src = x.data() + (s * channels_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) mean += static_cast<double>(src[i]);
      }
      mean /= static_cast<double>(m);
      double var = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const T* src = x.data() + (s * channels_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = static_cast<double>(src[i]) - mean;
          var += d * d;
        }
      }
      var /= static_cast<double>(m);  // biased, used for normalization
      const double inv = 1.0 / std::sqrt(var + eps_);
      inv_std_[c] = inv;
      const double g = static_cast<double>(gamma_.value[c]);
      const double b = static_cast<double>(beta_.value[c]);
      for (std::size_t s = 0; s < n; ++s) {
        const T* src = x.data() + (s * channels_ + c) * plane;
        T* xh = xhat_.data() + (s * channels_ + c) * plane;
        T* dst = y.data() + (s * channels_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double v = (static_cast<double>(src[i]) - mean) * inv;
          xh[i] = static_cast<T>(v);
          dst[i] = static_cast<T>(g * v + b);
        }
      }
      // Running statistics keep the unbiased variance.
      const double var_unbiased = m > 1 ? var * static_cast<double>(m) / (m - 1.0) : var;
      running_mean_[c] = static_cast<T>((1.0 - momentum_) * running_mean_[c] + momentum_ * mean);
      running_var_[c] =
          static_cast<T>((1.0 - momentum_) * running_var_[c] + momentum_ * var_unbiased);
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) {
    if (!grad_out.same_shape(xhat_)) throw ShapeError("batchnorm: gradient shape mismatch");
    const std::size_t n = grad_out.dim(0), h = grad_out.dim(2), w = grad_out.dim(3);
    const std::size_t m = n * h * w;
    const std::size_t plane = h * w;
    Tensor<T> dx(grad_out.shape());
    for (std::size_t c = 0; c < channels_; ++c) {
      double dbeta = 0.0, dgamma = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const T* g = grad_out.data() + (s * channels_ + c) * plane;
        const T* xh = xhat_.data() + (s * channels_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          dbeta += static_cast<double>(g[i]);
          dgamma += static_cast<double>(g[i]) * static_cast<double>(xh[i]);
        }
      }
      gamma_.grad[c] += static_cast<T>(dgamma);
      beta_.grad[c] += static_cast<T>(dbeta);
      const double scale = static_cast<double>(gamma_.value[c]) * inv_std_[c];
      const double mean_db = dbeta / static_cast<double>(m);
      const double mean_dg = dgamma / static_cast<double>(m);
      for (std::size_t s = 0; s < n; ++s) {
        const T* g = grad_out.data() + (s * channels_ + c) * plane;
        const T* xh = xhat_.data() + (s * channels_ + c) * plane;
        T* d = dx.data() + (s * channels_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i)
          d[i] = static_cast<T>(scale * (static_cast<double>(g[i]) - mean_db -
                                         static_cast<double>(xh[i]) * mean_dg));
      }
    }
    return dx;
  }

  void collect(const std::string& prefix, Partition part, Registry<T>& out) {
    out.push_back({prefix + ".gamma", &gamma_.value, &gamma_.grad, true, part});
    out.push_back({prefix + ".beta", &beta_.value, &beta_.grad, true, part});
    out.push_back({prefix + ".running_mean", &running_mean_, nullptr, false, part});
    out.push_back({prefix + ".running_var", &running_var_, nullptr, false, part});
  }

 private:
  std::size_t channels_;
  double momentum_, eps_;
  bool training_ = true;
  Param<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
  Tensor<T> xhat_;
  std::vector<double> inv_std_;
};

// ---------------------------------------------------------------------------
// Activations and pooling
// ---------------------------------------------------------------------------

template <typename T>
class ReLU {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    mask_.assign(x.numel(), 0);
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) {
      if (x[i] > T(0)) {
        y[i] = x[i];
        mask_[i] = 1;
      }
    }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& grad_out) {
    if (grad_out.numel() != mask_.size()) throw ShapeError("relu: gradient shape mismatch");
    Tensor<T> dx(grad_out.shape());
    for (std::size_t i = 0; i < dx.numel(); ++i)
      dx[i] = mask_[i] ? grad_out[i] : T(0);
    return dx;
  }

 private:
  std::vector<char> mask_;
};

template <typename T>
class MaxPool2d {
 public:
  MaxPool2d(std::size_t k, std::size_t stride, std::size_t pad)
      : k_(k), stride_(stride), pad_(pad) {}

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.rank() != 4) throw ShapeError("maxpool: input must be (N, C, H, W)");
    in_shape_ = x.shape();
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t oh = conv_out_dim(h, k_, stride_, pad_);
    const std::size_t ow = conv_out_dim(w, k_, stride_, pad_);
    Tensor<T> y({n, c, oh, ow});
    argmax_.assign(y.numel(), 0);
    std::size_t o = 0;
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const T* plane = x.data() + (s * c + ch) * h * w;
        for (std::size_t i = 0; i < oh; ++i) {
          for (std::size_t j = 0; j < ow; ++j, ++o) {
            T best = std::numeric_limits<T>::lowest();
            std::size_t best_idx = 0;
            for (std::size_t ki = 0; ki < k_; ++ki) {
              const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(i * stride_ + ki) -
                                        static_cast<std::ptrdiff_t>(pad_);
              if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t kj = 0; kj < k_; ++kj) {
                const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(j * stride_ + kj) -
                                          static_cast<std::ptrdiff_t>(pad_);
                if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(w)) continue;
                const std::size_t idx =
                    static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx);
                if (plane[idx] > best) {
                  best = plane[idx];
                  best_idx = idx;
                }
              }
            }
            y[o] = best;
            argmax_[o] = (s * c + ch) * h * w + best_idx;
          }
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) {
    if (grad_out.numel() != argmax_.size()) throw ShapeError("maxpool: gradient shape mismatch");
    Tensor<T> dx(in_shape_);
    for (std::size_t o = 0; o < grad_out.numel(); ++o) dx[argmax_[o]] += grad_out[o];
    return dx;
  }

 private:
  std::size_t k_, stride_, pad_;
  std::vector<std::size_t> in_shape_;
  std::vector<std::size_t> argmax_;
};

// Adaptive average pooling to 1x1, returned flattened as (N, C).
template <typename T>
class GlobalAvgPool {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    if (x.rank() != 4) throw ShapeError("avgpool: input must be (N, C, H, W)");
    in_shape_ = x.shape();
    const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
    Tensor<T> y({n, c});
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const T* src = x.data() + (s * c + ch) * plane;
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += static_cast<double>(src[i]);
        y.at2(s, ch) = static_cast<T>(acc / static_cast<double>(plane));
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) {
    const std::size_t n = in_shape_[0], c = in_shape_[1], plane = in_shape_[2] * in_shape_[3];
    if (grad_out.rank() != 2 || grad_out.dim(0) != n || grad_out.dim(1) != c)
      throw ShapeError("avgpool: gradient shape mismatch");
    Tensor<T> dx(in_shape_);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const T g = static_cast<T>(static_cast<double>(grad_out.at2(s, ch)) /
                                   static_cast<double>(plane));
        T* dst = dx.data() + (s * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = g;
      }
    }
    return dx;
  }

 private:
  std::vector<std::size_t> in_shape_;
};

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

template <typename T>
class Linear {
 public:
  Linear(std::size_t in_dim, std::size_t out_dim) : in_(in_dim), out_(out_dim) {
    weight_.resize({out_, in_});
    bias_.resize({out_});
  }

  void init(RandomStream& rng) {
    const double sigma = 1.0 / std::sqrt(static_cast<double>(in_));
    for (std::size_t i = 0; i < weight_.value.numel(); ++i)
      weight_.value[i] = static_cast<T>(rng.normal() * sigma);
    bias_.value.zero();
  }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.rank() != 2 || x.dim(1) != in_) throw ShapeError("linear: input must be (N, in)");
    x_ = x;
    const std::size_t n = x.dim(0);
    Tensor<T> y({n, out_});
    nn_detail::ConstMatMap<T> xm(x.data(), n, in_);
    nn_detail::ConstMatMap<T> wm(weight_.value.data(), out_, in_);
    nn_detail::MatMap<T> ym(y.data(), n, out_);
    ym.noalias() = xm * wm.transpose();
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t o = 0; o < out_; ++o) y.at2(s, o) += bias_.value[o];
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) {
    const std::size_t n = x_.dim(0);
    if (grad_out.rank() != 2 || grad_out.dim(0) != n || grad_out.dim(1) != out_)
      throw ShapeError("linear: gradient shape mismatch");
    nn_detail::ConstMatMap<T> gm(grad_out.data(), n, out_);
    nn_detail::ConstMatMap<T> xm(x_.data(), n, in_);
    nn_detail::MatMap<T> dwm(weight_.grad.data(), out_, in_);
    dwm.noalias() += gm.transpose() * xm;
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t o = 0; o < out_; ++o) bias_.grad[o] += grad_out.at2(s, o);
    Tensor<T> dx({n, in_});
    nn_detail::MatMap<T> dxm(dx.data(), n, in_);
    nn_detail::ConstMatMap<T> wm(weight_.value.data(), out_, in_);
    dxm.noalias() = gm * wm;
    return dx;
  }

  void collect(const std::string& prefix, Partition part, Registry<T>& out) {
    out.push_back({prefix + ".weight", &weight_.value, &weight_.grad, true, part});
    out.push_back({prefix + ".bias", &bias_.value, &bias_.grad, true, part});
  }

  std::size_t out_dim() const { return out_; }

 private:
  std::size_t in_, out_;
  Param<T> weight_, bias_;
  Tensor<T> x_;
};

}  // namespace amt

#endif  // AMT_NN_HPP_
