// notegate/nn/gradcheck.hpp

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

#include "notegate/nn/detector.hpp"

#include <functional>
#include <map>

namespace notegate::nn {

struct GradCheckOptions {
  double step = 1e-4;
  int samples_per_type = 500;  // draws per parameter type, with replacement
  std::uint64_t seed = 0;
};

struct GradCheckTypeResult {
  std::string type;
  double max_rel_error = 0;
  int samples = 0;
};

struct GradCheckReport {
  double max_rel_error = 0;
  std::vector<GradCheckTypeResult> per_type;
  long loss_evaluations = 0;
};

/// Central-difference verification of analytic gradients.
///
/// `refs` must already hold analytic gradients (grad pointers filled by the
/// caller's backward pass); `loss` recomputes the scalar objective at the
/// current parameter values with the exact same deterministic forward the
/// gradients were derived for. Relative error per sampled parameter is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
inline GradCheckReport grad_check_params(const std::vector<ParamRef<double>>& refs,
                                         const std::function<double()>& loss,
                                         const GradCheckOptions& opt) {
  std::map<std::string, std::vector<const ParamRef<double>*>> by_type;
  for (const auto& r : refs)
    if (r.trainable && r.grad) by_type[r.type_tag].push_back(&r);

  GradCheckReport report;
  Rng rng(Rng::seed_mix(opt.seed, 0x6763ULL));
  for (const auto& [type, group] : by_type) {
    Index total = 0;
    for (const auto* r : group) total += r->size();
    GradCheckTypeResult tr;
    tr.type = type;
    tr.samples = opt.samples_per_type;
    for (int s = 0; s < opt.samples_per_type; ++s) {
      Index flat = static_cast<Index>(rng.uniform_int(0, total - 1));
      const ParamRef<double>* ref = nullptr;
      for (const auto* r : group) {
        if (flat < r->size()) {
          ref = r;
          break;
        }
        flat -= r->size();
      }
      double& theta = ref->value[flat];
      const double saved = theta;
      theta = saved + opt.step;
      const double up = loss();
      theta = saved - opt.step;
      const double down = loss();
      theta = saved;
      report.loss_evaluations += 2;

      const double numeric = (up - down) / (2 * opt.step);
      const double analytic = ref->grad[flat];
      const double denom =
          std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      tr.max_rel_error = std::max(tr.max_rel_error, std::abs(analytic - numeric) / denom);
    }
    report.max_rel_error = std::max(report.max_rel_error, tr.max_rel_error);
    report.per_type.push_back(std::move(tr));
  }
  return report;
}

/// grad_check for the error detector: double precision, dropout disabled,
/// batch norm frozen to deterministic batch statistics.
inline GradCheckReport grad_check_detector(ErrorDetector<double>& model,
                                           const Batch<double>& inputs,
                                           const std::vector<int>& labels,
                                           const GradCheckOptions& opt) {
  const double saved_dropout = model.dropout_rate;
  model.dropout_rate = 0.0;  // frozen mode ignores dropout; keep state tidy

  const auto frozen = ErrorDetector<double>::Mode::frozen;
  DetectorGrads<double> grads = model.make_grads();
  {
    typename ErrorDetector<double>::Cache cache;
    const VectorX<double> probs = model.forward(inputs, frozen, nullptr, &cache);
    const auto [loss, dlogit] = mean_bce_with_dlogit(probs, labels);
    (void)loss;
    model.backward(cache, dlogit, grads);
  }
  const std::vector<ParamRef<double>> refs = parameter_refs(model, &grads);

  auto loss_fn = [&]() {
    const VectorX<double> probs =
        model.forward(inputs, frozen, nullptr, nullptr);
    double sum = 0;
    for (Index i = 0; i < probs.size(); ++i)
      sum += bce_loss(probs[i], labels[static_cast<std::size_t>(i)]);
    return sum / static_cast<double>(probs.size());
  };

  GradCheckReport report = grad_check_params(refs, loss_fn, opt);
  model.dropout_rate = saved_dropout;
  return report;
}

}  // namespace notegate::nn
