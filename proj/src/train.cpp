/******************************************************************************
 * Copyright 2026 The PTTrack Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/
#include "ptt/train.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ptt/rng.hpp"

namespace ptt {

std::vector<TrainSample> build_training_samples(std::span<const TrackSequence> sequences,
                                                const TrackerConfig& tracker,
                                                const SearchAreaPolicy& search_policy,
                                                const AugmentConfig& augment,
                                                std::uint64_t seed) {
  TrackerConfig cfg = tracker;
  cfg.finalize();
  Rng rng(seed);
  std::vector<TrainSample> samples;
  for (const TrackSequence& seq : sequences) {
    seq.validate();
    const OrientedBox3& first_gt = seq.frames[0].gt_box;
    PointCloud first_crop = crop_to_box(seq.frames[0].cloud, first_gt);
    if (first_crop.empty()) continue;
    PointCloud tmpl = to_canonical_frame(first_crop, first_gt);
    {
      SampleSpec spec;
      spec.method = SamplerKind::kFps;
      spec.count = cfg.template_budget;
      const SampleResult sel = sample_fps(tmpl, spec);
      PointCloud resampled;
      for (std::int32_t i : sel.indices) resampled.points.push_back(tmpl.points[static_cast<std::size_t>(i)]);
      tmpl = std::move(resampled);
    }
    for (std::size_t t = 1; t < seq.size(); ++t) {
      const OrientedBox3& gt = seq.frames[t].gt_box;
      const OrientedBox3 ref = augment_offsets(gt, rng, augment);
      SearchArea area = build_search_area(seq.frames[t].cloud, ref, search_policy,
                                          cfg.search_budget);
      if (area.empty) continue;
      TrainSample s;
      s.template_cloud = tmpl;
      s.search_cloud = std::move(area.cloud);
      s.gt_canonical = RigidTransform2DYaw::world_to_box(ref).apply(gt);
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

AdamOptimizer::AdamOptimizer(ParamStore& store, double beta1, double beta2, double eps)
    : store_(store), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(store.size());
  v_.reserve(store.size());
  for (const ParamStore::Entry& e : store.entries()) {
    m_.push_back(Tensor::zeros(e.value.shape));
    v_.push_back(Tensor::zeros(e.value.shape));
  }
}

void AdamOptimizer::step(const Graph& g, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t p = 0; p < store_.size(); ++p) {
    ParamStore::Entry& e = store_.entries()[p];
    if (!e.trainable) continue;
    const Tensor grad = g.grad_of(e.name);
    if (grad.data.empty()) continue;  // parameter not used this step
    Tensor& m = m_[p];
    Tensor& v = v_[p];
    for (std::size_t i = 0; i < e.value.numel(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad[i] * grad[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      e.value[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

TrainResult train_toy(ParamStore& store, std::span<const TrainSample> samples,
                      const TrackerConfig& tracker, const TrainConfig& config) {
  if (samples.empty()) throw std::invalid_argument("train_toy: empty dataset");
  TrackerConfig cfg = tracker;
  cfg.finalize();

  TrainResult result;
  AdamOptimizer opt(store, config.beta1, config.beta2, config.adam_eps);
  Rng rng(mix_seed(config.seed, 0x7ea1));

  const std::size_t batch = std::min<std::size_t>(
      samples.size(), static_cast<std::size_t>(std::max(1, config.batch_size)));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);

  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = (config.decay_after_epochs > 0 && epoch >= config.decay_after_epochs)
                          ? config.lr * config.decay_factor
                          : config.lr;
    if (batch < samples.size()) rng.shuffle(order);
    std::size_t cursor = 0;
    do {
      Graph g;
      LossBreakdown mean;
      Value total{};
      std::size_t used = 0;
      for (std::size_t b = 0; b < batch && cursor + b < order.size(); ++b) {
        const TrainSample& s = samples[order[cursor + b]];
        StageOutputs outs;
        LossValues lv;
        try {
          outs = tracker_forward_graph(g, s.template_cloud, s.search_cloud, cfg, store);
          lv = compute_loss_graph(g, outs, s.gt_canonical, config.loss);
        } catch (const std::runtime_error&) {
          result.diverged = true;
          result.divergence_step = step;
          return result;
        }
        const LossBreakdown lb = read_loss(g, lv);
        mean.cv += lb.cv;
        mean.cb += lb.cb;
        mean.rv += lb.rv;
        mean.rb += lb.rb;
        mean.all += lb.all;
        total = total.valid() ? g.add(total, lv.all) : lv.all;
        ++used;
      }
      cursor += used;
      const double inv = 1.0 / static_cast<double>(used);
      mean.cv *= inv;
      mean.cb *= inv;
      mean.rv *= inv;
      mean.rb *= inv;
      mean.all *= inv;
      if (!std::isfinite(mean.all)) {
        result.diverged = true;
        result.divergence_step = step;
        return result;
      }
      g.backward(g.scale(total, inv));
      opt.step(g, lr);
      result.curve.push_back({step, mean});
      ++step;
    } while (cursor < order.size());
  }
  return result;
}

}  // namespace ptt
