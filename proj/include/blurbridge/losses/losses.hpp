#pragma once

#include <cmath>
#include <vector>

#include "blurbridge/models/discriminator.hpp"
#include "blurbridge/models/feature_extractor.hpp"
#include "blurbridge/models/generator.hpp"

namespace blurbridge::losses {

using nn::Tensor;

struct LossWeights {
  double lambda_rec = 0.8;
  double lambda_grad = 0.005;

  void validate() const {
    if (!std::isfinite(lambda_rec) || !std::isfinite(lambda_grad) || lambda_rec < 0 || lambda_grad < 0) {
      throw InvalidRangeError("loss weights must be finite and nonnegative");
    }
  }
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Per-batch scalars. total_g = adv + lambda_rec * rec, total_d = -adv + lambda_grad * grad_pen.
struct LossReport {
  double adv = 0.0;
  double rec = 0.0;
  double grad_pen = 0.0;
  double total_g = 0.0;
  double total_d = 0.0;

  friend bool operator==(const LossReport&, const LossReport&) = default;
};

inline LossReport total_losses(double adv, double rec, double grad_pen, const LossWeights& w) {
  if (!std::isfinite(adv) || !std::isfinite(rec) || !std::isfinite(grad_pen)) {
    throw NumericError("total_losses: non-finite loss term (adv=" + std::to_string(adv) +
                       ", rec=" + std::to_string(rec) + ", grad_pen=" + std::to_string(grad_pen) + ")");
  }
  w.validate();
  LossReport r;
  r.adv = adv;
  r.rec = rec;
  r.grad_pen = grad_pen;
  r.total_g = adv + w.lambda_rec * rec;
  r.total_d = -adv + w.lambda_grad * grad_pen;
  return r;
}

namespace detail {
template <typename Range>
void require_open_unit(const Range& scores, const char* which) {
  for (auto s : scores) {
    if (!(s > 0) || !(s < 1)) {
      throw NumericError(std::string("adversarial_loss: ") + which + " score " +
                         std::to_string(static_cast<double>(s)) + " outside (0,1)");
    }
  }
}
}  // namespace detail

/// mean(log real) + mean(log(1 - fake)). The generator minimises it, the discriminator
/// maximises it.
template <typename Range>
double adversarial_loss(const Range& real_scores, const Range& fake_scores) {
  detail::require_open_unit(real_scores, "real");
  detail::require_open_unit(fake_scores, "fake");
  if (std::size(real_scores) == 0 || std::size(fake_scores) == 0) {
    throw EmptySetError("adversarial_loss: empty score set");
  }
  double lr = 0.0, lf = 0.0;
  for (auto s : real_scores) lr += std::log(static_cast<double>(s));
  for (auto s : fake_scores) lf += std::log1p(-static_cast<double>(s));
  return lr / static_cast<double>(std::size(real_scores)) +
         lf / static_cast<double>(std::size(fake_scores));
}

/// Interpolate eps * real + (1 - eps) * fake, one mixing ratio per sample.
template <typename T>
Tensor<T> interpolate(const Tensor<T>& real, const Tensor<T>& fake, const std::vector<T>& eps) {
  nn::require_same_shape(real, fake, "interpolate");
  if (static_cast<int>(eps.size()) != real.n) throw ShapeMismatchError("interpolate: eps count");
  Tensor<T> out = real;
  for (int b = 0; b < real.n; ++b) {
    auto dst = out.sample(b);
    auto f = fake.sample(b);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = eps[b] * dst[j] + (T(1) - eps[b]) * f[j];
  }
  return out;
}

/// (||d D(y_hat)/d y_hat||_2 - 1)^2 for the single-image case, with y_hat = eps*real + (1-eps)*fake
/// and D(.) the mean patch score.
template <typename T>
double gradient_penalty(models::Discriminator<T>& d, const Image& y_real, const Image& y_fake, double eps) {
  require_same_shape(y_real, y_fake, "gradient_penalty");
  if (!(eps >= 0.0 && eps <= 1.0)) throw InvalidRangeError("mixing ratio must lie in [0,1]");
  const auto x_hat = interpolate(nn::to_tensor<T>(y_real), nn::to_tensor<T>(y_fake), {static_cast<T>(eps)});
  return static_cast<double>(d.gradient_penalty(x_hat, T(0)).value);
}

/// Multi-scale perceptual distance: mean over levels of the L1 feature distance divided by the
/// total number of feature elements at that level (batch included). `Phi` is any extractor
/// with the FeatureExtractor forward / backward_input interface.
template <typename T, typename Phi = models::FeatureExtractor<T>>
class ReconstructionLoss {
 public:
  explicit ReconstructionLoss(Phi& phi) : phi_(&phi) {}

  /// Loss value; when `grads` is non-null it receives d(loss)/d(output level i).
  double operator()(const std::vector<Tensor<T>>& inputs, const std::vector<Tensor<T>>& outputs,
                    std::vector<Tensor<T>>* grads = nullptr) const {
    if (inputs.size() != outputs.size() || inputs.empty()) {
      throw ShapeMismatchError("reconstruction_loss: level count mismatch (" +
                               std::to_string(inputs.size()) + " vs " + std::to_string(outputs.size()) + ")");
    }
    const double m = static_cast<double>(inputs.size());
    double total = 0.0;
    if (grads) grads->clear();
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      nn::require_same_shape(inputs[i], outputs[i], "reconstruction_loss");
      const auto fa = phi_->forward(inputs[i]);
      typename Phi::Cache cache;
      const auto fb = phi_->forward(outputs[i], &cache);
      std::size_t elements = 0;
      for (const auto& f : fa) elements += f.size();
      double level = 0.0;
      typename Phi::Features g_maps;
      const T coeff = static_cast<T>(1.0 / (m * static_cast<double>(elements)));
      for (std::size_t k = 0; k < fa.size(); ++k) {
        Tensor<T> g = fa[k].zeros_like();
        for (std::size_t j = 0; j < fa[k].size(); ++j) {
          const T d = fb[k].data[j] - fa[k].data[j];
          level += std::abs(static_cast<double>(d));
          g.data[j] = d > T(0) ? coeff : (d < T(0) ? -coeff : T(0));
        }
        g_maps.push_back(std::move(g));
      }
      total += level / static_cast<double>(elements);
      if (grads) grads->push_back(phi_->backward_input(cache, std::move(g_maps)));
    }
    return total / m;
  }

 private:
  Phi* phi_;
};

}  // namespace blurbridge::losses
