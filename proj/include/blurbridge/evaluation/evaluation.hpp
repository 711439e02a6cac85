#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "blurbridge/data/dataset.hpp"
#include "blurbridge/imaging/metrics.hpp"
#include "blurbridge/models/deblurrer.hpp"
#include "blurbridge/models/kernel_classifier.hpp"
#include "blurbridge/training/trainer.hpp"

namespace blurbridge::evaluation {

namespace fs = std::filesystem;

struct InfeasibleRatioError : DataError {
  using DataError::DataError;
};
struct UntrainedModelError : UsageError {
  using UsageError::UsageError;
};

/// Level-1 output of the generator for a single image.
inline Image convert(const models::Generator<float>& g, const Image& y) {
  const auto pyr = build_pyramid(y, g.levels());
  const auto out = g.forward(models::pyramid_batch<float>({pyr}));
  return nn::to_image(out[0], 0);
}

struct PipelineOutput {
  Image converted;  // G(y)
  Image restored;   // deblurrer(G(y))
};

/// Translate into the known domain, then deblur with the known-domain model.
inline PipelineOutput deblur_pipeline(const models::Generator<float>& g, const models::KnownDeblurrer& deblurrer,
                                      const Image& y) {
  Image c = convert(g, y);
  Image x = deblurrer.deblur(c);
  return {std::move(c), std::move(x)};
}

// ---------------------------------------------------------------------------------------
// Known-domain deblurrer selection

struct DeblurrerConfig {
  std::string kind = "wiener";  // "wiener" | "network"
  double nsr = 0.02;
  models::DeblurNetConfig network;
};

inline void to_json(Json& j, const DeblurrerConfig& c) {
  j = Json{{"kind", c.kind},
           {"nsr", c.nsr},
           {"network",
            {{"width", c.network.width},
             {"depth", c.network.depth},
             {"learning_rate", c.network.learning_rate},
             {"iterations", c.network.iterations},
             {"batch", c.network.batch},
             {"crop", c.network.crop},
             {"seed", c.network.seed}}}};
}

inline DeblurrerConfig deblurrer_config_from_json(const Json& j, const std::string& where) {
  reject_unknown_keys(j, {"kind", "nsr", "network"}, where);
  DeblurrerConfig c;
  read_opt(j, "kind", c.kind, where);
  read_opt(j, "nsr", c.nsr, where);
  if (auto it = j.find("network"); it != j.end()) {
    const std::string w = where + ".network";
    reject_unknown_keys(*it, {"width", "depth", "learning_rate", "iterations", "batch", "crop", "seed"}, w);
    read_opt(*it, "width", c.network.width, w);
    read_opt(*it, "depth", c.network.depth, w);
    read_opt(*it, "learning_rate", c.network.learning_rate, w);
    read_opt(*it, "iterations", c.network.iterations, w);
    read_opt(*it, "batch", c.network.batch, w);
    read_opt(*it, "crop", c.network.crop, w);
    read_opt(*it, "seed", c.network.seed, w);
  }
  if (c.kind != "wiener" && c.kind != "network") throw UsageError(where + ".kind must be 'wiener' or 'network'");
  if (!(c.nsr >= 0)) throw InvalidRangeError(where + ".nsr must be >= 0");
  if (c.network.crop != 0 && c.network.crop < Image::min_side)
    throw InvalidRangeError(where + ".network.crop must be 0 or >= 8");
  return c;
}

/// Builds the known-domain deblurrer. The Wiener oracle uses the kernel-space mean of the
/// known gaussian domain; the network variant is trained on regenerated known-domain pairs.
inline models::KnownDeblurrer make_deblurrer(const DeblurrerConfig& c, const data::SynthConfig& synth) {
  if (c.kind == "wiener") {
    if (synth.known.family != BlurFamily::gaussian)
      throw UsageError("the wiener deblurrer needs a gaussian known domain, got " + to_string(synth.known.family));
    return models::WienerDeblurrer(expected_gaussian_kernel(synth.known.gaussian_sigma), c.nsr);
  }
  models::NetworkDeblurrer net(c.network);
  net.train(data::known_domain_pairs(synth));
  return net;
}

// ---------------------------------------------------------------------------------------
// Metrics table

struct MetricsRow {
  std::string image_id;
  double psnr_input = 0, ssim_input = 0;
  double psnr_direct = 0, ssim_direct = 0;
  double psnr_pipeline = 0, ssim_pipeline = 0;
  double psnr_converted_vs_input = 0;
  double laplacian_var_input = 0, laplacian_var_converted = 0;
};

inline constexpr const char* metrics_header =
    "image_id,psnr_input,ssim_input,psnr_direct,ssim_direct,psnr_pipeline,ssim_pipeline,psnr_converted_vs_input,"
    "laplacian_var_input,laplacian_var_converted";

struct MetricsTable {
  std::vector<MetricsRow> rows;

  /// Column means; image_id is "mean".
  MetricsRow means() const {
    if (rows.empty()) throw EmptySetError("metrics table is empty");
    MetricsRow m;
    m.image_id = "mean";
    for (const auto& r : rows) {
      m.psnr_input += r.psnr_input;
      m.ssim_input += r.ssim_input;
      m.psnr_direct += r.psnr_direct;
      m.ssim_direct += r.ssim_direct;
      m.psnr_pipeline += r.psnr_pipeline;
      m.ssim_pipeline += r.ssim_pipeline;
      m.psnr_converted_vs_input += r.psnr_converted_vs_input;
      m.laplacian_var_input += r.laplacian_var_input;
      m.laplacian_var_converted += r.laplacian_var_converted;
    }
    const double n = static_cast<double>(rows.size());
    for (double* v : {&m.psnr_input, &m.ssim_input, &m.psnr_direct, &m.ssim_direct, &m.psnr_pipeline,
                      &m.ssim_pipeline, &m.psnr_converted_vs_input, &m.laplacian_var_input,
                      &m.laplacian_var_converted})
      *v /= n;
    return m;
  }

  double pipeline_gain_db() const {
    const auto m = means();
    return m.psnr_pipeline - m.psnr_direct;
  }
};

inline std::string format_metrics_row(const MetricsRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.image_id.c_str(),
                r.psnr_input, r.ssim_input, r.psnr_direct, r.ssim_direct, r.psnr_pipeline, r.ssim_pipeline,
                r.psnr_converted_vs_input, r.laplacian_var_input, r.laplacian_var_converted);
  return buf;
}

inline void write_metrics_csv(const fs::path& path, const MetricsTable& t) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << metrics_header << '\n';
  for (const auto& r : t.rows) os << format_metrics_row(r) << '\n';
}

inline Json metrics_summary(const MetricsTable& t, const std::string& hash) {
  const auto m = t.means();
  return Json{{"images", t.rows.size()},
              {"config_hash", hash},
              {"mean",
               {{"psnr_input", m.psnr_input},
                {"ssim_input", m.ssim_input},
                {"psnr_direct", m.psnr_direct},
                {"ssim_direct", m.ssim_direct},
                {"psnr_pipeline", m.psnr_pipeline},
                {"ssim_pipeline", m.ssim_pipeline},
                {"psnr_converted_vs_input", m.psnr_converted_vs_input},
                {"laplacian_var_input", m.laplacian_var_input},
                {"laplacian_var_converted", m.laplacian_var_converted}}},
              {"pipeline_minus_direct_psnr", m.psnr_pipeline - m.psnr_direct}};
}

/// Input, direct deblur, converted and pipeline metrics for every test pair, all from the
/// same frozen generator.
inline MetricsTable evaluate_set(const models::Generator<float>& g, const models::KnownDeblurrer& deblurrer,
                                 const std::vector<data::TestItem>& test) {
  if (test.empty()) throw EmptySetError("evaluate_set: empty test set");
  MetricsTable t;
  for (const auto& item : test) {
    const Image& y = item.pair.blurry;
    const Image& x = item.pair.sharp;
    const Image direct = deblurrer.deblur(y);
    const auto p = deblur_pipeline(g, deblurrer, y);
    MetricsRow r;
    r.image_id = item.id;
    r.psnr_input = psnr(y, x);
    r.ssim_input = ssim(y, x);
    r.psnr_direct = psnr(direct, x);
    r.ssim_direct = ssim(direct, x);
    r.psnr_pipeline = psnr(p.restored, x);
    r.ssim_pipeline = ssim(p.restored, x);
    r.psnr_converted_vs_input = psnr(p.converted, y);
    r.laplacian_var_input = laplacian_variance(y);
    r.laplacian_var_converted = laplacian_variance(p.converted);
    t.rows.push_back(std::move(r));
  }
  return t;
}

// ---------------------------------------------------------------------------------------
// Blurry-to-sharp ratio ablation

struct RatioSpec {
  std::string label;  // as given, e.g. "6:4"
  double ratio = 0.0; // share of scenes assigned to the blurry set
};

inline RatioSpec parse_ratio(const std::string& s) {
  const auto colon = s.find(':');
  double a = 0, b = 0;
  try {
    if (colon == std::string::npos) {
      a = std::stod(s);
      b = 1.0 - a;
    } else {
      a = std::stod(s.substr(0, colon));
      b = std::stod(s.substr(colon + 1));
    }
  } catch (const std::exception&) {
    throw UsageError("ratio '" + s + "' is not of the form a:b");
  }
  if (!(a > 0) || !(b > 0)) throw InfeasibleRatioError("ratio '" + s + "' leaves one side empty");
  return {s, a / (a + b)};
}

/// Rejects ratios whose rounded scene counts would not realise the requested split.
inline void check_ratio_feasible(const RatioSpec& r, int scenes) {
  const double nb = r.ratio * scenes;
  const long rounded = std::lround(nb);
  if (rounded < 1 || rounded > scenes - 1)
    throw InfeasibleRatioError("ratio " + r.label + " cannot be realised with " + std::to_string(scenes) + " scenes");
}

struct AblationRow {
  std::string label;
  double ratio = 0.0;
  int blurry_scenes = 0, sharp_scenes = 0;
  int blurry_images = 0, known_images = 0;
  double psnr_direct = 0, psnr_pipeline = 0, ssim_pipeline = 0;
};

inline constexpr const char* ablation_header =
    "ratio,blurry_share,blurry_scenes,sharp_scenes,blurry_images,known_images,psnr_direct,psnr_pipeline,ssim_pipeline";

inline std::string format_ablation_row(const AblationRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%.17g,%d,%d,%d,%d,%.17g,%.17g,%.17g", r.label.c_str(), r.ratio, r.blurry_scenes,
                r.sharp_scenes, r.blurry_images, r.known_images, r.psnr_direct, r.psnr_pipeline, r.ssim_pipeline);
  return buf;
}

/// One training run per ratio on a dataset regenerated from `synth` with only the ratio
/// changed; every run shares seeds, training config and the held-out test set.
inline std::vector<AblationRow> ratio_ablation(const data::SynthConfig& synth, const std::vector<RatioSpec>& ratios,
                                               const training::TrainConfig& train, const DeblurrerConfig& deblur,
                                               const fs::path& out_dir) {
  if (ratios.empty()) throw EmptySetError("ratio ablation needs at least one ratio");
  for (const auto& r : ratios) check_ratio_feasible(r, synth.scenes);
  const auto deblurrer = make_deblurrer(deblur, synth);
  std::vector<AblationRow> rows;
  std::ofstream table;
  fs::create_directories(out_dir);
  for (const auto& r : ratios) {
    data::SynthConfig c = synth;
    c.ratio = r.ratio;
    const auto bundle = data::synthesize_bundle(c);
    data::TrainingData td{bundle.blurry, bundle.known};
    training::Models m(train);
    std::string dir = r.label;
    std::replace(dir.begin(), dir.end(), ':', '-');
    training::run_training(training::TrainingSet::from(td), m, train, out_dir / ("ratio_" + dir));
    const auto t = evaluate_set(m.g, deblurrer, bundle.test);
    const auto mean = t.means();
    AblationRow row;
    row.label = r.label;
    row.ratio = r.ratio;
    row.blurry_scenes = static_cast<int>(bundle.split.blurry.size());
    row.sharp_scenes = static_cast<int>(bundle.split.sharp.size());
    row.blurry_images = static_cast<int>(bundle.blurry.size());
    row.known_images = static_cast<int>(bundle.known.size());
    row.psnr_direct = mean.psnr_direct;
    row.psnr_pipeline = mean.psnr_pipeline;
    row.ssim_pipeline = mean.ssim_pipeline;
    rows.push_back(row);
  }
  std::ofstream os(out_dir / "ablation.csv");
  os << ablation_header << '\n';
  for (const auto& r : rows) os << format_ablation_row(r) << '\n';
  return rows;
}

// ---------------------------------------------------------------------------------------
// Converter validation

struct DomainAccuracy {
  double acc1 = 0.0;  // discriminator score above 0.5
  double acc2 = 0.0;  // classifier says known domain
};

struct ConverterValidation {
  DomainAccuracy converted;
  DomainAccuracy raw;
};

/// Fraction of images the discriminator (mean patch score) and the classifier place in the
/// known domain.
inline DomainAccuracy domain_accuracy(const models::Discriminator<float>& d, const models::KernelClassifier& cls,
                                      const std::vector<Image>& images) {
  if (images.empty()) throw EmptySetError("domain accuracy needs images");
  if (!cls.trained()) throw UntrainedModelError("kernel classifier has not been trained");
  DomainAccuracy a;
  for (const auto& img : images) {
    const auto s = d.scores(nn::to_tensor<float>(img));
    double mean = 0.0;
    for (float v : s.data) mean += v;
    mean /= static_cast<double>(s.size());
    a.acc1 += mean > 0.5;
  }
  const auto p = cls.predict(std::span<const Image>(images));
  for (double v : p) a.acc2 += v > 0.5;
  a.acc1 /= static_cast<double>(images.size());
  a.acc2 /= static_cast<double>(images.size());
  return a;
}

inline ConverterValidation validate_converter(const models::Discriminator<float>& d,
                                              const models::KernelClassifier& cls, const std::vector<Image>& inputs,
                                              const std::vector<Image>& converted) {
  if (inputs.size() != converted.size()) throw ShapeMismatchError("validate_converter: input/converted counts differ");
  return {domain_accuracy(d, cls, converted), domain_accuracy(d, cls, inputs)};
}

/// Labelled training data for the independent classifier: separate scenes blurred exactly
/// with kernels from each domain. Never touches converter outputs.
inline std::vector<models::LabeledImage> classifier_training_set(const data::SynthConfig& c, int per_class,
                                                                 std::uint64_t seed) {
  std::vector<models::LabeledImage> out;
  const std::uint64_t base = Rng::derive(seed, 0xC1A5);
  for (int i = 0; i < 2 * per_class; ++i) {
    const bool known = i % 2 == 0;
    const auto s = Rng::derive(base, static_cast<std::uint64_t>(i));
    const Image sharp = quantize_8bit(data::render_scene(s, c.frame));
    const auto& dom = known ? c.known : c.unknown;
    const BlurKernel k = sample_kernel(dom, Rng::derive(s, 1));
    out.push_back({quantize_8bit(apply_blur(sharp, k, dom.noise_sigma, Rng::derive(s, 2))), known});
  }
  return out;
}

}  // namespace blurbridge::evaluation
