// notegate/nn/detector.hpp

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

#include "notegate/nn/layers.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace notegate::nn {

/// Gradient buffers mirroring ErrorDetector's trainable parameters.
template <typename Scalar>
struct DetectorGrads {
  std::array<MatrixX<Scalar>, 5> conv_weight;
  std::array<RowVectorX<Scalar>, 5> conv_bias;
  std::array<RowVectorX<Scalar>, 4> bn_gamma;  // blocks 2..5
  std::array<RowVectorX<Scalar>, 4> bn_beta;
  std::array<MatrixX<Scalar>, 3> fc_weight;
  std::array<RowVectorX<Scalar>, 3> fc_bias;

  void set_zero() {
    for (auto& m : conv_weight) m.setZero();
    for (auto& v : conv_bias) v.setZero();
    for (auto& v : bn_gamma) v.setZero();
    for (auto& v : bn_beta) v.setZero();
    for (auto& m : fc_weight) m.setZero();
    for (auto& v : fc_bias) v.setZero();
  }

  double squared_norm() const {
    double s = 0;
    for (const auto& m : conv_weight) s += double(m.squaredNorm());
    for (const auto& v : conv_bias) s += double(v.squaredNorm());
    for (const auto& v : bn_gamma) s += double(v.squaredNorm());
    for (const auto& v : bn_beta) s += double(v.squaredNorm());
    for (const auto& m : fc_weight) s += double(m.squaredNorm());
    for (const auto& v : fc_bias) s += double(v.squaredNorm());
    return s;
  }
};

/// The per-frame error detector: five strided 3x3 conv blocks (leaky ReLU
/// everywhere, batch norm + dropout on blocks 2-5), then 256 -> 64 -> 32 -> 1
/// dense layers with ReLU + dropout and a sigmoid output. Input patches are
/// 72 bins x 81 frames x 3 channels; the stride plan collapses them to a
/// single 256-vector:
///   (36x81x16) (18x27x32) (6x9x64) (2x3x128) (1x1x256)
template <typename Scalar>
class ErrorDetector {
 public:
  static constexpr int kBins = 72;
  static constexpr int kWidth = 81;
  static constexpr int kInputChannels = 3;
  static constexpr std::array<int, 5> kFilters = {16, 32, 64, 128, 256};
  static constexpr std::array<std::pair<int, int>, 5> kStrides = {
      {{2, 1}, {2, 3}, {3, 3}, {3, 3}, {2, 3}}};
  static constexpr std::array<std::pair<int, int>, 5> kExpectedMaps = {
      {{36, 81}, {18, 27}, {6, 9}, {2, 3}, {1, 1}}};

  enum class Mode {
    train,   // batch statistics, running-stat updates, dropout
    eval,    // running statistics, no dropout
    frozen,  // batch statistics without updates, no dropout (gradient checks)
  };

  Scalar leaky_slope = Scalar(0.01);
  Scalar dropout_rate = Scalar(0.3);

  ErrorDetector() {
    int in_c = kInputChannels;
    int h = kBins, w = kWidth;
    for (int b = 0; b < 5; ++b) {
      conv_[b] = Conv2D<Scalar>(in_c, kFilters[b], kStrides[b].first, kStrides[b].second);
      h = Conv2D<Scalar>::out_extent(h, kStrides[b].first);
      w = Conv2D<Scalar>::out_extent(w, kStrides[b].second);
      if (h != kExpectedMaps[b].first || w != kExpectedMaps[b].second)
        throw std::logic_error("ErrorDetector: block " + std::to_string(b + 1) +
                               " map is " + std::to_string(h) + "x" + std::to_string(w) +
                               ", architecture constants are broken");
      in_c = kFilters[b];
    }
    for (int b = 0; b < 4; ++b) bn_[b] = BatchNorm<Scalar>(kFilters[b + 1]);
    fc_[0] = Dense<Scalar>(kFilters[4], 64);
    fc_[1] = Dense<Scalar>(64, 32);
    fc_[2] = Dense<Scalar>(32, 1);
  }

  void init_params(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& c : conv_) c.init(rng);
    for (auto& d : fc_) d.init(rng);
  }

  struct BlockCache {
    std::vector<MatrixX<Scalar>> cols;     // im2col per example
    std::vector<MatrixX<Scalar>> preact;   // input to the leaky ReLU
    std::vector<MatrixX<Scalar>> dropout;  // masks; empty when inactive
    typename BatchNorm<Scalar>::Cache bn;
    int in_h = 0, in_w = 0, out_h = 0, out_w = 0;
  };

  struct Cache {
    std::array<BlockCache, 5> blocks;
    MatrixX<Scalar> flat;                   // B x 256, input to fc1
    MatrixX<Scalar> fc_pre[2];              // pre-ReLU dense activations
    MatrixX<Scalar> fc_out[2];              // inputs to the next dense layer
    MatrixX<Scalar> fc_drop[2];             // dense dropout masks
    VectorX<Scalar> logits;
    VectorX<Scalar> probs;
  };

  /// Scores a batch; every returned probability is in (0, 1). `rng` supplies
  /// dropout masks and is required in train mode when dropout_rate > 0.
  /// `cache` must be provided to run backward() afterwards.
  VectorX<Scalar> forward(const Batch<Scalar>& input, Mode mode, Rng* rng,
                          Cache* cache, bool check_finite = false) {
    if (input.empty()) throw std::invalid_argument("ErrorDetector: empty batch");
    for (const auto& f : input)
      if (f.h != kBins || f.w != kWidth || f.channels() != kInputChannels)
        throw std::invalid_argument(
            "conv1: expected input " + std::to_string(kBins) + "x" +
            std::to_string(kWidth) + "x" + std::to_string(kInputChannels) + ", got " +
            std::to_string(f.h) + "x" + std::to_string(f.w) + "x" +
            std::to_string(f.channels()));
    const bool train_mode = mode == Mode::train;
    const bool batch_stats = mode != Mode::eval;
    const bool use_dropout = train_mode && dropout_rate > Scalar(0);
    if (use_dropout && !rng)
      throw std::invalid_argument("ErrorDetector: train mode needs an rng for dropout");

    Cache local;
    Cache& c = cache ? *cache : local;
    const std::size_t batch_size = input.size();

    Batch<Scalar> act(batch_size);
    for (std::size_t b = 0; b < batch_size; ++b) act[b] = input[b];

    for (int blk = 0; blk < 5; ++blk) {
      BlockCache& bc = c.blocks[blk];
      bc.in_h = act[0].h;
      bc.in_w = act[0].w;
      bc.cols.resize(batch_size);
      for (std::size_t b = 0; b < batch_size; ++b)
        act[b] = conv_[blk].forward(act[b], bc.cols[b]);
      bc.out_h = act[0].h;
      bc.out_w = act[0].w;
      if (check_finite) check_batch_finite(act, "conv" + std::to_string(blk + 1));

      if (blk >= 1) {
        if (batch_stats)
          bn_[blk - 1].forward_train(act, bc.bn, /*update_running=*/train_mode);
        else
          bn_[blk - 1].forward_eval(act);
        if (check_finite) check_batch_finite(act, "bn" + std::to_string(blk + 1));
      }

      bc.preact.resize(batch_size);
      for (std::size_t b = 0; b < batch_size; ++b) {
        bc.preact[b] = act[b].m;
        leaky_relu_inplace(act[b].m, leaky_slope);
      }

      if (blk >= 1 && use_dropout) {
        bc.dropout.resize(batch_size);
        for (std::size_t b = 0; b < batch_size; ++b) {
          bc.dropout[b] = dropout_mask<Scalar>(act[b].m.rows(), act[b].m.cols(),
                                               dropout_rate, *rng);
          act[b].m = act[b].m.cwiseProduct(bc.dropout[b]);
        }
      }
    }

    c.flat.resize(static_cast<Index>(batch_size), kFilters[4]);
    for (std::size_t b = 0; b < batch_size; ++b) c.flat.row(static_cast<Index>(b)) = act[b].m.row(0);

    MatrixX<Scalar> x = c.flat;
    for (int d = 0; d < 2; ++d) {
      MatrixX<Scalar> pre = fc_[d].forward(x);
      c.fc_pre[d] = pre;
      leaky_relu_inplace(pre, Scalar(0));  // plain ReLU on the dense layers
      if (use_dropout) {
        c.fc_drop[d] = dropout_mask<Scalar>(pre.rows(), pre.cols(), dropout_rate, *rng);
        pre = pre.cwiseProduct(c.fc_drop[d]);
      }
      c.fc_out[d] = pre;
      x = std::move(pre);
      if (check_finite) check_matrix_finite(x, "fc" + std::to_string(d + 1));
    }

    const MatrixX<Scalar> out = fc_[2].forward(x);
    c.logits = out.col(0);
    c.probs.resize(c.logits.size());
    for (Index i = 0; i < c.logits.size(); ++i) c.probs[i] = sigmoid(c.logits[i]);
    if (check_finite) check_matrix_finite(out, "fc3");
    return c.probs;
  }

  /// Convenience eval-mode scoring; pure function of (parameters, input).
  VectorX<Scalar> predict(const Batch<Scalar>& input) const {
    // eval mode touches no state; const_cast confined here
    return const_cast<ErrorDetector*>(this)->forward(input, Mode::eval, nullptr, nullptr);
  }

  /// Backpropagates d(loss)/d(logit) through the whole network, accumulating
  /// parameter gradients. `dlogit` is typically (p - z)/B for mean BCE.
  void backward(const Cache& c, const VectorX<Scalar>& dlogit,
                DetectorGrads<Scalar>& g) const {
    const std::size_t batch_size = c.blocks[0].cols.size();

    MatrixX<Scalar> d = dlogit;  // B x 1
    d = fc_[2].backward(c.fc_out[1], d, g.fc_weight[2], g.fc_bias[2]);
    for (int l = 1; l >= 0; --l) {
      if (c.fc_drop[l].size() > 0) d = d.cwiseProduct(c.fc_drop[l]);
      d = leaky_relu_backward(c.fc_pre[l], d, Scalar(0));
      d = fc_[l].backward(l == 0 ? c.flat : c.fc_out[l - 1], d, g.fc_weight[l],
                          g.fc_bias[l]);
    }

    Batch<Scalar> db(batch_size);
    for (std::size_t b = 0; b < batch_size; ++b) {
      db[b].h = 1;
      db[b].w = 1;
      db[b].m = d.row(static_cast<Index>(b));
    }

    for (int blk = 4; blk >= 0; --blk) {
      const BlockCache& bc = c.blocks[blk];
      if (!bc.dropout.empty())
        for (std::size_t b = 0; b < batch_size; ++b)
          db[b].m = db[b].m.cwiseProduct(bc.dropout[b]);
      for (std::size_t b = 0; b < batch_size; ++b)
        db[b].m = leaky_relu_backward(bc.preact[b], db[b].m, leaky_slope);
      if (blk >= 1)
        bn_[blk - 1].backward(db, bc.bn, g.bn_gamma[blk - 1], g.bn_beta[blk - 1]);
      for (std::size_t b = 0; b < batch_size; ++b)
        db[b] = conv_[blk].backward(bc.cols[b], db[b].m, bc.in_h, bc.in_w,
                                    g.conv_weight[blk], g.conv_bias[blk],
                                    /*skip_dx=*/blk == 0);
    }
  }

  DetectorGrads<Scalar> make_grads() const {
    DetectorGrads<Scalar> g;
    for (int b = 0; b < 5; ++b) {
      g.conv_weight[b].setZero(conv_[b].weight.rows(), conv_[b].weight.cols());
      g.conv_bias[b].setZero(conv_[b].bias.size());
    }
    for (int b = 0; b < 4; ++b) {
      g.bn_gamma[b].setZero(bn_[b].gamma.size());
      g.bn_beta[b].setZero(bn_[b].beta.size());
    }
    for (int d = 0; d < 3; ++d) {
      g.fc_weight[d].setZero(fc_[d].weight.rows(), fc_[d].weight.cols());
      g.fc_bias[d].setZero(fc_[d].bias.size());
    }
    return g;
  }

  Conv2D<Scalar>& conv(int i) { return conv_[i]; }
  const Conv2D<Scalar>& conv(int i) const { return conv_[i]; }
  BatchNorm<Scalar>& bn(int block) { return bn_[block - 1]; }  // blocks 2..5
  const BatchNorm<Scalar>& bn(int block) const { return bn_[block - 1]; }
  Dense<Scalar>& fc(int i) { return fc_[i]; }
  const Dense<Scalar>& fc(int i) const { return fc_[i]; }

 private:
  static void check_batch_finite(const Batch<Scalar>& act, const std::string& layer) {
    for (const auto& f : act)
      if (!f.all_finite())
        throw std::runtime_error("non-finite activations after " + layer);
  }
  static void check_matrix_finite(const MatrixX<Scalar>& m, const std::string& layer) {
    if (!m.allFinite())
      throw std::runtime_error("non-finite activations after " + layer);
  }

  std::array<Conv2D<Scalar>, 5> conv_;
  std::array<BatchNorm<Scalar>, 4> bn_;
  std::array<Dense<Scalar>, 3> fc_;
};

/// Stable registry of every parameter, in checkpoint order. `grads` may be
/// null when only values are needed (serialization).
template <typename Scalar>
std::vector<ParamRef<Scalar>> parameter_refs(ErrorDetector<Scalar>& model,
                                             DetectorGrads<Scalar>* grads) {
  std::vector<ParamRef<Scalar>> refs;
  auto add_matrix = [&](const std::string& name, const char* tag, MatrixX<Scalar>& m,
                        Scalar* grad, std::vector<std::uint32_t> shape) {
    refs.push_back({name, tag, true, m.data(), grad, m.rows(), m.cols(), std::move(shape)});
  };
  auto add_vector = [&](const std::string& name, const char* tag, bool trainable,
                        RowVectorX<Scalar>& v, Scalar* grad) {
    refs.push_back({name, tag, trainable, v.data(), grad, v.size(), 1,
                    {static_cast<std::uint32_t>(v.size())}});
  };

  for (int b = 0; b < 5; ++b) {
    auto& cv = model.conv(b);
    const auto in_c = static_cast<std::uint32_t>(cv.in_channels());
    const auto out_c = static_cast<std::uint32_t>(cv.out_channels());
    add_matrix("conv" + std::to_string(b + 1) + "/weight", "conv_weight", cv.weight,
               grads ? grads->conv_weight[b].data() : nullptr, {3, 3, in_c, out_c});
    add_vector("conv" + std::to_string(b + 1) + "/bias", "conv_bias", true, cv.bias,
               grads ? grads->conv_bias[b].data() : nullptr);
    if (b >= 1) {
      auto& bn = model.bn(b + 1);
      const std::string base = "bn" + std::to_string(b + 1);
      add_vector(base + "/gamma", "bn_gamma", true, bn.gamma,
                 grads ? grads->bn_gamma[b - 1].data() : nullptr);
      add_vector(base + "/beta", "bn_beta", true, bn.beta,
                 grads ? grads->bn_beta[b - 1].data() : nullptr);
      add_vector(base + "/running_mean", "bn_running", false, bn.running_mean, nullptr);
      add_vector(base + "/running_var", "bn_running", false, bn.running_var, nullptr);
    }
  }
  for (int d = 0; d < 3; ++d) {
    auto& fc = model.fc(d);
    add_matrix("fc" + std::to_string(d + 1) + "/weight", "dense_weight", fc.weight,
               grads ? grads->fc_weight[d].data() : nullptr,
               {static_cast<std::uint32_t>(fc.weight.rows()),
                static_cast<std::uint32_t>(fc.weight.cols())});
    add_vector("fc" + std::to_string(d + 1) + "/bias", "dense_bias", true, fc.bias,
               grads ? grads->fc_bias[d].data() : nullptr);
  }
  return refs;
}

/// Mean BCE over a batch plus d(loss)/d(logit), the fused sigmoid + BCE
/// gradient (p - z)/B.
template <typename Scalar>
std::pair<Scalar, VectorX<Scalar>> mean_bce_with_dlogit(const VectorX<Scalar>& probs,
                                                        const std::vector<int>& labels) {
  if (static_cast<std::size_t>(probs.size()) != labels.size())
    throw std::invalid_argument("mean_bce_with_dlogit: size mismatch");
  const auto n = static_cast<Scalar>(probs.size());
  Scalar loss = 0;
  VectorX<Scalar> dlogit(probs.size());
  for (Index i = 0; i < probs.size(); ++i) {
    loss += bce_loss(probs[i], labels[static_cast<std::size_t>(i)]);
    dlogit[i] = (probs[i] - static_cast<Scalar>(labels[static_cast<std::size_t>(i)])) / n;
  }
  return {loss / n, dlogit};
}

}  // namespace notegate::nn
