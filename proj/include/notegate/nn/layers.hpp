// notegate/nn/layers.hpp

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "notegate/nn/feature_map.hpp"
#include "notegate/util.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace notegate::nn {

template <typename Scalar>
Scalar uniform_fan_in_limit(Index fan_in) {
  return std::sqrt(Scalar(6) / static_cast<Scalar>(fan_in));
}

template <typename Scalar>
void init_uniform(MatrixX<Scalar>& m, Scalar limit, Rng& rng) {
  for (Index c = 0; c < m.cols(); ++c)
    for (Index r = 0; r < m.rows(); ++r)
      m(r, c) = static_cast<Scalar>(rng.uniform(-double(limit), double(limit)));
}

// ---------------------------------------------------------------------------
// 3x3 strided convolution, `same` mode: output extent = ceil(input / stride),
// zero padding split evenly with the extra sample on the trailing edge.
// ---------------------------------------------------------------------------

template <typename Scalar>
class Conv2D {
 public:
  static constexpr int kKernel = 3;

  Conv2D() = default;
  Conv2D(int in_channels, int out_channels, int stride_h, int stride_w)
      : in_c_(in_channels), out_c_(out_channels), sh_(stride_h), sw_(stride_w) {
    weight.setZero(kKernel * kKernel * in_c_, out_c_);
    bias.setZero(out_c_);
  }

  void init(Rng& rng) {
    init_uniform(weight, uniform_fan_in_limit<Scalar>(weight.rows()), rng);
    bias.setZero();
  }

  static int out_extent(int in, int stride) { return (in + stride - 1) / stride; }
  int out_h(int in_h) const { return out_extent(in_h, sh_); }
  int out_w(int in_w) const { return out_extent(in_w, sw_); }
  int in_channels() const { return in_c_; }
  int out_channels() const { return out_c_; }

  void im2col(const FeatureMap<Scalar>& x, MatrixX<Scalar>& cols) const {
    const int oh = out_h(x.h), ow = out_w(x.w);
    const int pad_h = std::max((oh - 1) * sh_ + kKernel - x.h, 0);
    const int pad_w = std::max((ow - 1) * sw_ + kKernel - x.w, 0);
    const int top = pad_h / 2, left = pad_w / 2;
    cols.setZero(static_cast<Index>(oh) * ow, kKernel * kKernel * in_c_);
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const Index row = static_cast<Index>(oy) * ow + ox;
        for (int ky = 0; ky < kKernel; ++ky) {
          const int iy = oy * sh_ - top + ky;
          if (iy < 0 || iy >= x.h) continue;
          for (int kx = 0; kx < kKernel; ++kx) {
            const int ix = ox * sw_ - left + kx;
            if (ix < 0 || ix >= x.w) continue;
            cols.block(row, static_cast<Index>(ky * kKernel + kx) * in_c_, 1, in_c_) =
                x.m.row(static_cast<Index>(iy) * x.w + ix);
          }
        }
      }
  }

  /// Forward for one example. `cols` receives the im2col buffer the backward
  /// pass needs for the weight gradient.
  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x, MatrixX<Scalar>& cols) const {
    if (x.channels() != in_c_)
      throw std::invalid_argument("Conv2D: expected " + std::to_string(in_c_) +
                                  " input channels, got " + std::to_string(x.channels()));
    im2col(x, cols);
    FeatureMap<Scalar> y;
    y.h = out_h(x.h);
    y.w = out_w(x.w);
    y.m.noalias() = cols * weight;
    y.m.rowwise() += bias;
    return y;
  }

  /// Backward for one example; accumulates into dweight/dbias and returns
  /// the input gradient unless skip_dx (first layer).
  FeatureMap<Scalar> backward(const MatrixX<Scalar>& cols, const MatrixX<Scalar>& dy,
                              int in_h, int in_w, MatrixX<Scalar>& dweight,
                              RowVectorX<Scalar>& dbias, bool skip_dx = false) const {
    dweight.noalias() += cols.transpose() * dy;
    dbias += dy.colwise().sum();
    FeatureMap<Scalar> dx;
    dx.h = in_h;
    dx.w = in_w;
    if (skip_dx) return dx;

    MatrixX<Scalar> dcols;
    dcols.noalias() = dy * weight.transpose();
    dx.m.setZero(static_cast<Index>(in_h) * in_w, in_c_);
    const int oh = out_h(in_h), ow = out_w(in_w);
    const int pad_h = std::max((oh - 1) * sh_ + kKernel - in_h, 0);
    const int pad_w = std::max((ow - 1) * sw_ + kKernel - in_w, 0);
    const int top = pad_h / 2, left = pad_w / 2;
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const Index row = static_cast<Index>(oy) * ow + ox;
        for (int ky = 0; ky < kKernel; ++ky) {
          const int iy = oy * sh_ - top + ky;
          if (iy < 0 || iy >= in_h) continue;
          for (int kx = 0; kx < kKernel; ++kx) {
            const int ix = ox * sw_ - left + kx;
            if (ix < 0 || ix >= in_w) continue;
            dx.m.row(static_cast<Index>(iy) * in_w + ix) +=
                dcols.block(row, static_cast<Index>(ky * kKernel + kx) * in_c_, 1, in_c_);
          }
        }
      }
    return dx;
  }

  MatrixX<Scalar> weight;    // (9 * in_c) x out_c, row (ky*3+kx)*in_c + ic
  RowVectorX<Scalar> bias;   // out_c

 private:
  int in_c_ = 0, out_c_ = 0, sh_ = 1, sw_ = 1;
};

// ---------------------------------------------------------------------------
// Per-channel batch normalization over batch x spatial positions.
// ---------------------------------------------------------------------------

template <typename Scalar>
class BatchNorm {
 public:
  BatchNorm() = default;
  explicit BatchNorm(int channels) {
    gamma.setOnes(channels);
    beta.setZero(channels);
    running_mean.setZero(channels);
    running_var.setOnes(channels);
  }

  struct Cache {
    RowVectorX<Scalar> inv_std;         // per channel, 1/sqrt(var + eps)
    std::vector<MatrixX<Scalar>> xhat;  // normalized activations per example
    Scalar count = 0;                   // batch * spatial positions
  };

  /// Train-mode forward in place, normalizing with batch statistics.
  /// `update_running` is off for the frozen deterministic mode the gradient
  /// checker uses.
  void forward_train(Batch<Scalar>& batch, Cache& cache, bool update_running) {
    const Index c = gamma.size();
    RowVectorX<Scalar> sum = RowVectorX<Scalar>::Zero(c);
    RowVectorX<Scalar> sum_sq = RowVectorX<Scalar>::Zero(c);
    Scalar count = 0;
    for (const auto& f : batch) {
      sum += f.m.colwise().sum();
      sum_sq += f.m.array().square().matrix().colwise().sum();
      count += static_cast<Scalar>(f.m.rows());
    }
    if (count < 2)
      throw std::invalid_argument("BatchNorm: batch statistics need >= 2 values");
    const RowVectorX<Scalar> mean = sum / count;
    const RowVectorX<Scalar> var =
        (sum_sq / count - mean.cwiseProduct(mean)).cwiseMax(Scalar(0));
    cache.inv_std = (var.array() + eps).rsqrt().matrix();
    cache.count = count;
    cache.xhat.clear();
    cache.xhat.reserve(batch.size());
    for (auto& f : batch) {
      MatrixX<Scalar> xhat =
          ((f.m.rowwise() - mean).array().rowwise() * cache.inv_std.array()).matrix();
      f.m = ((xhat.array().rowwise() * gamma.array()).rowwise() + beta.array()).matrix();
      cache.xhat.push_back(std::move(xhat));
    }
    if (update_running) {
      running_mean = (Scalar(1) - momentum) * running_mean + momentum * mean;
      running_var = (Scalar(1) - momentum) * running_var + momentum * var;
    }
  }

  void forward_eval(Batch<Scalar>& batch) const {
    const RowVectorX<Scalar> inv_std = (running_var.array() + eps).rsqrt().matrix();
    const RowVectorX<Scalar> scale = gamma.cwiseProduct(inv_std);
    const RowVectorX<Scalar> shift = beta - running_mean.cwiseProduct(scale);
    for (auto& f : batch)
      f.m = ((f.m.array().rowwise() * scale.array()).rowwise() + shift.array()).matrix();
  }

  /// In-place backward: `dbatch` carries dL/dy on entry and dL/dx on exit.
  void backward(Batch<Scalar>& dbatch, const Cache& cache, RowVectorX<Scalar>& dgamma,
                RowVectorX<Scalar>& dbeta) const {
    const Index c = gamma.size();
    RowVectorX<Scalar> sum_dy = RowVectorX<Scalar>::Zero(c);
    RowVectorX<Scalar> sum_dy_xhat = RowVectorX<Scalar>::Zero(c);
    for (std::size_t b = 0; b < dbatch.size(); ++b) {
      sum_dy += dbatch[b].m.colwise().sum();
      sum_dy_xhat += dbatch[b].m.cwiseProduct(cache.xhat[b]).colwise().sum();
    }
    dgamma += sum_dy_xhat;
    dbeta += sum_dy;

    // dx = gamma * inv_std / N * (N*dy - sum(dy) - xhat * sum(dy .* xhat))
    const RowVectorX<Scalar> coeff = gamma.cwiseProduct(cache.inv_std) / cache.count;
    for (std::size_t b = 0; b < dbatch.size(); ++b) {
      MatrixX<Scalar>& d = dbatch[b].m;
      MatrixX<Scalar> tmp = d * cache.count;
      tmp -= (cache.xhat[b].array().rowwise() * sum_dy_xhat.array()).matrix();
      tmp.rowwise() -= sum_dy;
      d = (tmp.array().rowwise() * coeff.array()).matrix();
    }
  }

  RowVectorX<Scalar> gamma, beta, running_mean, running_var;
  Scalar momentum = Scalar(0.1);
  Scalar eps = Scalar(1e-5);
};

// ---------------------------------------------------------------------------
// Fully connected layer on row-per-example matrices.
// ---------------------------------------------------------------------------

template <typename Scalar>
class Dense {
 public:
  Dense() = default;
  Dense(int in, int out) {
    weight.setZero(in, out);
    bias.setZero(out);
  }

  void init(Rng& rng) {
    init_uniform(weight, uniform_fan_in_limit<Scalar>(weight.rows()), rng);
    bias.setZero();
  }

  MatrixX<Scalar> forward(const MatrixX<Scalar>& x) const {
    MatrixX<Scalar> y;
    y.noalias() = x * weight;
    y.rowwise() += bias;
    return y;
  }

  MatrixX<Scalar> backward(const MatrixX<Scalar>& x, const MatrixX<Scalar>& dy,
                           MatrixX<Scalar>& dweight, RowVectorX<Scalar>& dbias) const {
    dweight.noalias() += x.transpose() * dy;
    dbias += dy.colwise().sum();
    MatrixX<Scalar> dx;
    dx.noalias() = dy * weight.transpose();
    return dx;
  }

  MatrixX<Scalar> weight;   // in x out
  RowVectorX<Scalar> bias;  // out
};

// ---------------------------------------------------------------------------
// Activations and dropout
// ---------------------------------------------------------------------------

template <typename Scalar>
void leaky_relu_inplace(MatrixX<Scalar>& x, Scalar slope) {
  x = x.array().max(x.array() * slope).matrix();
}

/// dL/dx given the pre-activation values.
template <typename Scalar>
MatrixX<Scalar> leaky_relu_backward(const MatrixX<Scalar>& pre, const MatrixX<Scalar>& dy,
                                    Scalar slope) {
  return (pre.array() > Scalar(0)).select(dy, dy * slope);
}

/// Inverted dropout mask: entries are 0 with probability `rate`, else
/// 1/(1-rate), so eval needs no rescale.
template <typename Scalar>
MatrixX<Scalar> dropout_mask(Index rows, Index cols, Scalar rate, Rng& rng) {
  const Scalar keep_scale = Scalar(1) / (Scalar(1) - rate);
  MatrixX<Scalar> mask(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r)
      mask(r, c) = rng.uniform() < double(rate) ? Scalar(0) : keep_scale;
  return mask;
}

// ---------------------------------------------------------------------------
// Adam over a flat view of every trainable parameter.
// ---------------------------------------------------------------------------

/// A named view into one parameter array and its gradient. Matrix-backed
/// entries expose (rows, cols) over column-major storage so serializers can
/// emit row-major payloads.
template <typename Scalar>
struct ParamRef {
  std::string name;
  const char* type_tag = "";
  bool trainable = true;
  Scalar* value = nullptr;
  Scalar* grad = nullptr;  // null for running statistics
  Index rows = 0, cols = 1;
  std::vector<std::uint32_t> shape;  // serialized dims, e.g. {3,3,in,out}

  Index size() const { return rows * cols; }
};

template <typename Scalar>
class Adam {
 public:
  Scalar learning_rate = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);

  void step(const std::vector<ParamRef<Scalar>>& params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(VectorX<Scalar>::Zero(p.trainable ? p.size() : 0));
        v_.emplace_back(VectorX<Scalar>::Zero(p.trainable ? p.size() : 0));
      }
    }
    ++t_;
    const Scalar bc1 = Scalar(1) - std::pow(beta1, Scalar(t_));
    const Scalar bc2 = Scalar(1) - std::pow(beta2, Scalar(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& p = params[i];
      if (!p.trainable || !p.grad) continue;
      Eigen::Map<VectorX<Scalar>> theta(p.value, p.size());
      Eigen::Map<const VectorX<Scalar>> g(p.grad, p.size());
      m_[i] = beta1 * m_[i] + (Scalar(1) - beta1) * g;
      v_[i] = beta2 * v_[i] + (Scalar(1) - beta2) * g.cwiseProduct(g);
      theta.array() -= learning_rate * (m_[i].array() / bc1) /
                       ((v_[i].array() / bc2).sqrt() + eps);
    }
  }

 private:
  std::vector<VectorX<Scalar>> m_, v_;
  long t_ = 0;
};

// ---------------------------------------------------------------------------
// Binary cross entropy on sigmoid outputs
// ---------------------------------------------------------------------------

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return x >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-x))
                        : Scalar(1) - Scalar(1) / (Scalar(1) + std::exp(x));
}

inline constexpr double kBceEpsilon = 1e-7;

/// -(z log p + (1-z) log(1-p)) with p clamped to [eps, 1-eps].
template <typename Scalar>
Scalar bce_loss(Scalar p, int z) {
  const Scalar eps = static_cast<Scalar>(kBceEpsilon);
  const Scalar q = std::min(Scalar(1) - eps, std::max(eps, p));
  return z ? -std::log(q) : -std::log(Scalar(1) - q);
}

}  // namespace notegate::nn
