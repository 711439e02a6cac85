#pragma once

#include <cmath>
#include <string>

#include "blurbridge/data/augment.hpp"
#include "blurbridge/data/curriculum.hpp"
#include "blurbridge/losses/losses.hpp"
#include "blurbridge/models/discriminator.hpp"
#include "blurbridge/models/feature_extractor.hpp"
#include "blurbridge/models/generator.hpp"
#include "blurbridge/nn/adam.hpp"

namespace blurbridge::training {

struct TrainConfig {
  long total_iters = 20000;
  int batch_size = 8;
  double lr_initial = 2e-4;
  double d_lr_scale = 1.0;  // discriminator lr = d_lr_scale * lr_at(t)
  nn::AdamConfig adam;
  losses::LossWeights weights;
  data::CurriculumSchedule curriculum = data::CurriculumSchedule::scaled_to(20000);
  std::uint64_t seed = 1;
  int d_steps_per_g_step = 1;
  long checkpoint_every = 1000;
  bool non_saturating = false;
  models::GeneratorConfig generator;
  models::DiscriminatorConfig discriminator;
  models::FeatureExtractorConfig features;
  std::string feature_weights;  // optional pretrained extractor archive; empty = seeded random
  data::AugmentationPolicy augmentation;

  void validate() const {
    if (total_iters < 0) throw InvalidRangeError("total_iters must be >= 0");
    if (batch_size < 1) throw InvalidRangeError("batch_size must be >= 1");
    if (!(lr_initial >= 0) || !std::isfinite(lr_initial)) throw InvalidRangeError("lr_initial must be finite and >= 0");
    if (!(d_lr_scale >= 0)) throw InvalidRangeError("d_lr_scale must be >= 0");
    if (d_steps_per_g_step < 1) throw InvalidRangeError("d_steps_per_g_step must be >= 1");
    if (checkpoint_every < 1) throw InvalidRangeError("checkpoint_every must be >= 1");
    weights.validate();
    curriculum.validate();
    augmentation.validate();
  }
};

inline Json to_json_value(const TrainConfig& c) {
  return Json{{"total_iters", c.total_iters},
              {"batch_size", c.batch_size},
              {"lr_initial", c.lr_initial},
              {"d_lr_scale", c.d_lr_scale},
              {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
              {"lambda_rec", c.weights.lambda_rec},
              {"lambda_grad", c.weights.lambda_grad},
              {"curriculum", c.curriculum},
              {"seed", c.seed},
              {"d_steps_per_g_step", c.d_steps_per_g_step},
              {"checkpoint_every", c.checkpoint_every},
              {"non_saturating", c.non_saturating},
              {"generator", c.generator},
              {"discriminator", c.discriminator},
              {"features", {{"layers", c.features.layers}, {"seed", c.features.seed}}},
              {"feature_weights", c.feature_weights},
              {"augmentation", c.augmentation}};
}

/// Parses the "train" section. Unknown keys anywhere are errors. When total_iters is given
/// without an explicit curriculum ramp, the ramp is rescaled to 20% / 50% of the run.
inline TrainConfig train_config_from_json(const Json& j, const std::string& where = "train") {
  reject_unknown_keys(j,
                      {"total_iters", "batch_size", "lr_initial", "d_lr_scale", "adam", "lambda_rec", "lambda_grad",
                       "curriculum", "seed", "d_steps_per_g_step", "checkpoint_every", "non_saturating", "generator",
                       "discriminator", "features", "feature_weights", "augmentation"},
                      where);
  TrainConfig c;
  read_opt(j, "total_iters", c.total_iters, where);
  c.curriculum = data::CurriculumSchedule::scaled_to(c.total_iters);
  read_opt(j, "batch_size", c.batch_size, where);
  read_opt(j, "lr_initial", c.lr_initial, where);
  read_opt(j, "d_lr_scale", c.d_lr_scale, where);
  if (auto it = j.find("adam"); it != j.end()) {
    reject_unknown_keys(*it, {"beta1", "beta2", "eps"}, where + ".adam");
    read_opt(*it, "beta1", c.adam.beta1, where + ".adam");
    read_opt(*it, "beta2", c.adam.beta2, where + ".adam");
    read_opt(*it, "eps", c.adam.eps, where + ".adam");
  }
  read_opt(j, "lambda_rec", c.weights.lambda_rec, where);
  read_opt(j, "lambda_grad", c.weights.lambda_grad, where);
  if (auto it = j.find("curriculum"); it != j.end()) {
    const std::string w = where + ".curriculum";
    reject_unknown_keys(*it, {"start_fraction", "ramp_start", "ramp_end"}, w);
    read_opt(*it, "start_fraction", c.curriculum.start_fraction, w);
    read_opt(*it, "ramp_start", c.curriculum.ramp_start, w);
    read_opt(*it, "ramp_end", c.curriculum.ramp_end, w);
  }
  read_opt(j, "seed", c.seed, where);
  read_opt(j, "d_steps_per_g_step", c.d_steps_per_g_step, where);
  read_opt(j, "checkpoint_every", c.checkpoint_every, where);
  read_opt(j, "non_saturating", c.non_saturating, where);
  if (auto it = j.find("generator"); it != j.end()) c.generator = models::generator_config_from_json(*it, where + ".generator");
  if (auto it = j.find("discriminator"); it != j.end())
    c.discriminator = models::discriminator_config_from_json(*it, where + ".discriminator");
  if (auto it = j.find("features"); it != j.end()) {
    reject_unknown_keys(*it, {"layers", "seed"}, where + ".features");
    read_opt(*it, "layers", c.features.layers, where + ".features");
    read_opt(*it, "seed", c.features.seed, where + ".features");
  }
  read_opt(j, "feature_weights", c.feature_weights, where);
  if (auto it = j.find("augmentation"); it != j.end())
    c.augmentation = data::augmentation_from_json(*it, where + ".augmentation");
  c.validate();
  return c;
}

/// Constant for t < ceil(total/2), then linear down to 0 at t = total.
inline double lr_at(long t, const TrainConfig& c) {
  if (t < 0 || t > c.total_iters) {
    throw InvalidRangeError("lr_at: iteration " + std::to_string(t) + " outside [0, " + std::to_string(c.total_iters) + "]");
  }
  const long half = (c.total_iters + 1) / 2;
  if (t < half) return c.lr_initial;
  if (t >= c.total_iters) return 0.0;
  return c.lr_initial * static_cast<double>(c.total_iters - t) / static_cast<double>(c.total_iters - half);
}

}  // namespace blurbridge::training
