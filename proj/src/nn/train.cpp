// src/nn/train.cpp

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

#include "notegate/nn/train.hpp"

#include <algorithm>
#include <cmath>

namespace notegate::nn {

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate}, {"beta1", beta1},
          {"beta2", beta2},                 {"adam_eps", adam_eps},
          {"batch_size", batch_size},       {"epochs", epochs},
          {"patience", patience},           {"seed", seed},
          {"dropout_rate", dropout_rate},   {"leaky_slope", leaky_slope}};
}

namespace {

Batch<float> to_batch(const std::vector<const PatchExample*>& examples) {
  Batch<float> b;
  b.reserve(examples.size());
  for (const auto* e : examples) b.push_back(to_feature_map<float>(e->patch));
  return b;
}

struct EvalStats {
  double loss = 0, accuracy = 0;
};

EvalStats evaluate(ErrorDetector<float>& model, const std::vector<PatchExample>& set,
                   int batch_size) {
  double loss_sum = 0;
  long correct = 0;
  for (std::size_t at = 0; at < set.size(); at += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(set.size(), at + static_cast<std::size_t>(batch_size));
    Batch<float> batch;
    batch.reserve(end - at);
    for (std::size_t i = at; i < end; ++i)
      batch.push_back(to_feature_map<float>(set[i].patch));
    const VectorX<float> probs =
        model.forward(batch, ErrorDetector<float>::Mode::eval, nullptr, nullptr);
    for (std::size_t i = at; i < end; ++i) {
      const float p = probs[static_cast<Index>(i - at)];
      loss_sum += bce_loss(p, set[i].z);
      correct += ((p >= 0.5f) == (set[i].z == 1)) ? 1 : 0;
    }
  }
  EvalStats s;
  s.loss = loss_sum / static_cast<double>(set.size());
  s.accuracy = static_cast<double>(correct) / static_cast<double>(set.size());
  return s;
}

}  // namespace

std::pair<double, DetectorGrads<float>> detector_backprop(
    ErrorDetector<float>& model, const std::vector<const PatchExample*>& batch,
    ErrorDetector<float>::Mode mode, Rng* dropout_rng) {
  if (batch.empty()) throw std::invalid_argument("detector_backprop: empty batch");
  Batch<float> inputs = to_batch(batch);
  std::vector<int> labels;
  labels.reserve(batch.size());
  for (const auto* e : batch) labels.push_back(e->z);

  typename ErrorDetector<float>::Cache cache;
  const VectorX<float> probs = model.forward(inputs, mode, dropout_rng, &cache);
  const auto [loss, dlogit] = mean_bce_with_dlogit(probs, labels);
  if (!std::isfinite(loss)) {
    // locate the first offending layer; the re-run throws with its name
    model.forward(inputs, mode, dropout_rng, nullptr, /*check_finite=*/true);
    throw std::runtime_error("detector_backprop: non-finite loss");
  }
  DetectorGrads<float> grads = model.make_grads();
  model.backward(cache, dlogit, grads);
  return {static_cast<double>(loss), std::move(grads)};
}

TrainResult train_error_detector(const TrainingSet& data, const TrainConfig& cfg) {
  if (data.train.empty() || data.holdout.empty())
    throw std::invalid_argument("train_error_detector: both splits must be non-empty");
  if (cfg.batch_size < 2)
    throw std::invalid_argument("train_error_detector: batch size must be >= 2");

  ErrorDetector<float> model;
  model.dropout_rate = static_cast<float>(cfg.dropout_rate);
  model.leaky_slope = static_cast<float>(cfg.leaky_slope);
  model.init_params(cfg.seed);

  Adam<float> adam;
  adam.learning_rate = static_cast<float>(cfg.learning_rate);
  adam.beta1 = static_cast<float>(cfg.beta1);
  adam.beta2 = static_cast<float>(cfg.beta2);
  adam.eps = static_cast<float>(cfg.adam_eps);

  DetectorGrads<float> grads = model.make_grads();
  const std::vector<ParamRef<float>> refs = parameter_refs(model, &grads);

  Rng shuffle_rng(Rng::seed_mix(cfg.seed, 0x7368ULL));
  Rng dropout_rng(Rng::seed_mix(cfg.seed, 0x64726fULL));

  std::vector<std::size_t> order(data.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  double best_acc = -1.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0;
    long correct = 0, seen = 0;
    for (std::size_t at = 0; at + 2 <= order.size();
         at += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
      if (end - at < 2) break;  // batch statistics need at least two examples

      Batch<float> inputs;
      std::vector<int> labels;
      inputs.reserve(end - at);
      labels.reserve(end - at);
      for (std::size_t i = at; i < end; ++i) {
        inputs.push_back(to_feature_map<float>(data.train[order[i]].patch));
        labels.push_back(data.train[order[i]].z);
      }

      typename ErrorDetector<float>::Cache cache;
      const VectorX<float> probs =
          model.forward(inputs, ErrorDetector<float>::Mode::train, &dropout_rng, &cache);
      const auto [loss, dlogit] = mean_bce_with_dlogit(probs, labels);
      if (!std::isfinite(loss))
        throw std::runtime_error("train_error_detector: loss diverged at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(at / cfg.batch_size));
      grads.set_zero();
      model.backward(cache, dlogit, grads);
      adam.step(refs);

      loss_sum += static_cast<double>(loss) * static_cast<double>(end - at);
      for (std::size_t i = at; i < end; ++i) {
        const float p = probs[static_cast<Index>(i - at)];
        correct += ((p >= 0.5f) == (data.train[order[i]].z == 1)) ? 1 : 0;
        ++seen;
      }
    }

    EpochStats stats;
    stats.train_loss = loss_sum / std::max<long>(seen, 1);
    stats.train_accuracy = static_cast<double>(correct) / std::max<long>(seen, 1);
    const EvalStats holdout = evaluate(model, data.holdout, 128);
    stats.holdout_loss = holdout.loss;
    stats.holdout_accuracy = holdout.accuracy;
    result.history.push_back(stats);
    log_debug("epoch " + std::to_string(epoch) + ": train loss " +
              std::to_string(stats.train_loss) + ", holdout acc " +
              std::to_string(stats.holdout_accuracy));

    if (holdout.accuracy > best_acc) {
      best_acc = holdout.accuracy;
      result.best_epoch = epoch;
      nlohmann::json meta;
      meta["train_config"] = cfg.to_json();
      meta["best_epoch"] = epoch;
      meta["holdout_accuracy"] = holdout.accuracy;
      meta["holdout_loss"] = holdout.loss;
      meta["train_accuracy"] = stats.train_accuracy;
      meta["train_loss"] = stats.train_loss;
      result.checkpoint = checkpoint_from_detector(model, std::move(meta));
    }
    if (epoch - result.best_epoch >= cfg.patience) break;
  }
  result.best_holdout_accuracy = best_acc;
  return result;
}

std::vector<float> predict_batch(const ErrorDetector<float>& model,
                                 const std::vector<Patch>& patches, int batch_size) {
  std::vector<float> out;
  out.reserve(patches.size());
  for (std::size_t at = 0; at < patches.size(); at += static_cast<std::size_t>(batch_size)) {
    const std::size_t end =
        std::min(patches.size(), at + static_cast<std::size_t>(batch_size));
    Batch<float> batch;
    batch.reserve(end - at);
    for (std::size_t i = at; i < end; ++i)
      batch.push_back(to_feature_map<float>(patches[i]));
    const VectorX<float> probs = model.predict(batch);
    for (Index i = 0; i < probs.size(); ++i) out.push_back(probs[i]);
  }
  return out;
}

std::vector<float> predict_batch(const Checkpoint& ck, const std::vector<Patch>& patches,
                                 int batch_size) {
  ErrorDetector<float> model = detector_from_checkpoint<float>(ck);
  return predict_batch(model, patches, batch_size);
}

}  // namespace notegate::nn
