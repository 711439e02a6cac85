#pragma once

#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>

#include "blurbridge/data/dataset.hpp"
#include "blurbridge/imaging/metrics.hpp"
#include "blurbridge/nn/archive.hpp"
#include "blurbridge/training/config.hpp"

namespace blurbridge::training {

namespace fs = std::filesystem;
using nn::Tensor;

/// One row of the training log.
struct LogRow {
  long iteration = 0;
  losses::LossReport report;
  double curriculum_fraction = 0.0;
  double lr = 0.0;
  double fool_rate = 0.0;  // fraction of converted images the discriminator scores above 0.5

  friend bool operator==(const LogRow&, const LogRow&) = default;
};

inline constexpr const char* log_header =
    "iteration,adv,rec,grad_pen,total_g,total_d,curriculum_fraction,lr,fool_rate";

inline std::string format_log_row(const LogRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.iteration, r.report.adv,
                r.report.rec, r.report.grad_pen, r.report.total_g, r.report.total_d, r.curriculum_fraction, r.lr,
                r.fool_rate);
  return buf;
}

/// The trainable networks plus the frozen feature extractor.
struct Models {
  models::Generator<float> g;
  models::Discriminator<float> d;
  models::FeatureExtractor<float> phi;

  explicit Models(const TrainConfig& c)
      : g(c.generator), d(c.discriminator), phi(c.feature_weights.empty()
                                                    ? models::FeatureExtractor<float>(c.features)
                                                    : models::FeatureExtractor<float>::from_archive(
                                                          nn::read_archive(c.feature_weights), c.features)) {}
};

struct TrainState {
  long iteration = 0;
  Rng rng;
  nn::Adam<float> g_opt, d_opt;
  std::deque<LogRow> history;  // most recent rows only
  static constexpr std::size_t history_limit = 1000;

  void record(const LogRow& r) {
    history.push_back(r);
    if (history.size() > history_limit) history.pop_front();
  }
};

/// Fresh parameters and optimiser state for a config.
inline TrainState init_training(Models& m, const TrainConfig& c) {
  Rng init(Rng::derive(c.seed, 0x1417));
  m.g.init(init);
  m.d.init(init);
  TrainState s;
  s.rng = Rng(Rng::derive(c.seed, 0x57A7E));
  s.g_opt = nn::Adam<float>(c.adam);
  s.d_opt = nn::Adam<float>(c.adam);
  return s;
}

/// B and K in memory with the curriculum order over B.
struct TrainingSet {
  std::vector<Image> blurry;
  std::vector<Image> known;
  data::CurriculumSampler sampler;

  TrainingSet(std::vector<Image> b, std::vector<Image> k)
      : blurry(std::move(b)), known(std::move(k)), sampler(sharpness(blurry)) {
    if (known.empty()) throw EmptySetError("training needs a non-empty known set");
  }

  static TrainingSet from(const data::TrainingData& d) {
    std::vector<Image> b, k;
    for (const auto& n : d.blurry) b.push_back(n.image);
    for (const auto& n : d.known) k.push_back(n.image);
    return TrainingSet(std::move(b), std::move(k));
  }

 private:
  static std::vector<double> sharpness(const std::vector<Image>& imgs) {
    if (imgs.empty()) throw EmptySetError("training needs a non-empty blurry set");
    std::vector<double> v;
    for (const auto& i : imgs) v.push_back(laplacian_variance(i));
    return v;
  }
};

/// The sampled inputs of one iteration.
struct Batch {
  std::vector<Tensor<float>> pyramid;  // augmented B batch, finest level first
  Tensor<float> real;                  // augmented K batch
  std::vector<float> eps;              // mixing ratios for the penalty
  double fraction = 1.0;
};

inline Batch draw_batch(TrainState& s, const TrainingSet& data, const TrainConfig& c) {
  Batch b;
  const auto bs = static_cast<std::size_t>(c.batch_size);
  b.fraction = c.curriculum.fraction(s.iteration);
  const auto bi = data.sampler.sample(c.curriculum, s.iteration, bs, s.rng.fork_seed());
  if (data.known.size() < bs) throw data::PoolTooSmallError("known set smaller than the batch");
  std::vector<std::size_t> ki(data.known.size());
  std::iota(ki.begin(), ki.end(), std::size_t{0});
  for (std::size_t i = 0; i < bs; ++i) std::swap(ki[i], ki[i + s.rng.below(ki.size() - i)]);
  std::vector<ImagePyramid> pyrs;
  std::vector<Image> reals;
  for (std::size_t i = 0; i < bs; ++i) {
    pyrs.push_back(build_pyramid(data::augment(data.blurry[bi[i]], c.augmentation, s.rng.fork_seed()), c.generator.levels()));
    reals.push_back(data::augment(data.known[ki[i]], c.augmentation, s.rng.fork_seed()));
  }
  for (std::size_t i = 0; i < bs; ++i) b.eps.push_back(static_cast<float>(s.rng.uniform()));
  b.pyramid = models::pyramid_batch<float>(pyrs);
  b.real = nn::to_tensor<float>(std::span<const Image>(reals));
  return b;
}

namespace detail {

inline double mean_log(const Tensor<float>& s, bool complement) {
  double acc = 0.0;
  for (float v : s.data) acc += complement ? std::log1p(-static_cast<double>(v)) : std::log(static_cast<double>(v));
  return acc / static_cast<double>(s.size());
}

inline void require_finite(long it, const char* what, double v, const losses::LossReport& partial) {
  if (std::isfinite(v)) return;
  std::ostringstream os;
  os << "non-finite " << what << " at iteration " << it << " (adv=" << partial.adv << ", rec=" << partial.rec
     << ", grad_pen=" << partial.grad_pen << ")";
  throw NumericError(os.str());
}

}  // namespace detail

/// Generator objective on a fixed batch: adversarial term plus weighted reconstruction.
/// When `accumulate` is set, adds its gradient to the generator's parameter gradients.
inline double generator_objective(Models& m, const Batch& b, const TrainConfig& c, bool accumulate) {
  models::Generator<float>::Cache gc;
  const auto out = m.g.forward(b.pyramid, accumulate ? &gc : nullptr);
  models::Discriminator<float>::Cache dc;
  const auto s = m.d.scores(out[0], accumulate ? &dc : nullptr);
  const double adv = c.non_saturating ? -detail::mean_log(s, false) : detail::mean_log(s, true);
  losses::ReconstructionLoss<float> rec_loss(m.phi);
  std::vector<Tensor<float>> g_out;
  const double rec = rec_loss(b.pyramid, out, accumulate ? &g_out : nullptr);
  if (accumulate) {
    const float lam = static_cast<float>(c.weights.lambda_rec);
    for (auto& t : g_out)
      for (float& v : t.data) v *= lam;
    Tensor<float> gs = s.zeros_like();
    const float inv_n = 1.0f / static_cast<float>(s.size());
    for (std::size_t i = 0; i < s.size(); ++i)
      gs.data[i] = c.non_saturating ? -inv_n / s.data[i] : -inv_n / (1.0f - s.data[i]);
    g_out[0] += m.d.backward_scores(dc, gs, /*accumulate_params=*/false, /*want_input_grad=*/true);
    m.g.backward(gc, g_out);
  }
  return adv + c.weights.lambda_rec * rec;
}

/// d_steps discriminator updates on L^D_total, then one generator update on L^G_total.
inline LogRow train_step(TrainState& s, Models& m, const TrainingSet& data, const TrainConfig& c) {
  const double lr = lr_at(s.iteration, c);
  const Batch b = draw_batch(s, data, c);

  models::Generator<float>::Cache gc;
  const auto out = m.g.forward(b.pyramid, &gc);
  const Tensor<float>& fake = out[0];

  losses::LossReport partial;
  double adv = 0.0, gp = 0.0;
  auto d_params = m.d.params();
  for (int k = 0; k < c.d_steps_per_g_step; ++k) {
    nn::zero_grads(d_params);
    models::Discriminator<float>::Cache rc, fc;
    const auto sr = m.d.scores(b.real, &rc);
    const auto sf = m.d.scores(fake, &fc);
    adv = detail::mean_log(sr, false) + detail::mean_log(sf, true);
    partial.adv = adv;
    detail::require_finite(s.iteration, "adversarial loss", adv, partial);
    // d(-adv)/d(scores)
    Tensor<float> gr = sr.zeros_like(), gf = sf.zeros_like();
    const float inv_r = 1.0f / static_cast<float>(sr.size()), inv_f = 1.0f / static_cast<float>(sf.size());
    for (std::size_t i = 0; i < sr.size(); ++i) gr.data[i] = -inv_r / sr.data[i];
    for (std::size_t i = 0; i < sf.size(); ++i) gf.data[i] = inv_f / (1.0f - sf.data[i]);
    m.d.backward_scores(rc, gr, true, false);
    m.d.backward_scores(fc, gf, true, false);
    const auto x_hat = losses::interpolate(b.pyramid[0], fake, b.eps);
    gp = m.d.gradient_penalty(x_hat, static_cast<float>(c.weights.lambda_grad)).value;
    partial.grad_pen = gp;
    detail::require_finite(s.iteration, "gradient penalty", gp, partial);
    s.d_opt.step(d_params, lr * c.d_lr_scale);
  }

  // Generator step against the updated discriminator, reusing the forward pass above.
  auto g_params = m.g.params();
  nn::zero_grads(g_params);
  models::Discriminator<float>::Cache dc;
  const auto sg = m.d.scores(fake, &dc);
  std::size_t fooled = 0;
  for (int i = 0; i < sg.n; ++i) {
    double mean = 0.0;
    for (float v : sg.sample(i)) mean += v;
    fooled += mean / static_cast<double>(sg.sample_size()) > 0.5;
  }
  losses::ReconstructionLoss<float> rec_loss(m.phi);
  std::vector<Tensor<float>> g_out;
  const double rec = rec_loss(b.pyramid, out, &g_out);
  partial.rec = rec;
  detail::require_finite(s.iteration, "reconstruction loss", rec, partial);
  const float lam = static_cast<float>(c.weights.lambda_rec);
  for (auto& t : g_out)
    for (float& v : t.data) v *= lam;
  Tensor<float> gs = sg.zeros_like();
  const float inv_n = 1.0f / static_cast<float>(sg.size());
  for (std::size_t i = 0; i < sg.size(); ++i)
    gs.data[i] = c.non_saturating ? -inv_n / sg.data[i] : -inv_n / (1.0f - sg.data[i]);
  g_out[0] += m.d.backward_scores(dc, gs, false, true);
  m.g.backward(gc, g_out);
  s.g_opt.step(g_params, lr);

  LogRow row;
  row.iteration = s.iteration;
  row.report = losses::total_losses(adv, rec, gp, c.weights);
  row.curriculum_fraction = b.fraction;
  row.lr = lr;
  row.fool_rate = static_cast<double>(fooled) / sg.n;
  ++s.iteration;
  s.record(row);
  return row;
}

// ---------------------------------------------------------------------------------------
// Archives

inline nn::Archive model_archive(const std::string& kind, const Json& arch, const std::string& hash) {
  nn::Archive a;
  a.kind = kind;
  a.architecture = arch;
  a.config_hash = hash;
  return a;
}

inline void save_generator(const fs::path& path, models::Generator<float>& g, const std::string& hash) {
  auto a = model_archive("generator", g.architecture(), hash);
  nn::store_params(a, g.params());
  nn::write_archive(path, a);
}

inline models::Generator<float> load_generator(const fs::path& path) {
  const auto a = nn::read_archive(path);
  if (a.kind != "generator") throw nn::ArchiveError(path.string() + " holds a '" + a.kind + "', not a generator");
  models::Generator<float> g(models::generator_config_from_json(a.architecture, "generator archive"));
  nn::load_params(a, g.params());
  return g;
}

inline void save_discriminator(const fs::path& path, models::Discriminator<float>& d, const std::string& hash) {
  auto a = model_archive("discriminator", d.architecture(), hash);
  nn::store_params(a, d.params());
  nn::write_archive(path, a);
}

inline models::Discriminator<float> load_discriminator(const fs::path& path) {
  const auto a = nn::read_archive(path);
  if (a.kind != "discriminator") throw nn::ArchiveError(path.string() + " holds a '" + a.kind + "', not a discriminator");
  models::Discriminator<float> d(models::discriminator_config_from_json(a.architecture, "discriminator archive"));
  nn::load_params(a, d.params());
  return d;
}

namespace detail {

inline void store_moments(nn::Archive& a, const nn::Adam<float>& opt, const nn::ParamRefs<float>& ps,
                          const std::string& prefix) {
  const auto& m1 = opt.first_moments();
  const auto& m2 = opt.second_moments();
  if (m1.empty()) return;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    a.tensors.push_back({prefix + "m/" + ps[i]->name, ps[i]->shape, {m1[i].begin(), m1[i].end()}});
    a.tensors.push_back({prefix + "v/" + ps[i]->name, ps[i]->shape, {m2[i].begin(), m2[i].end()}});
  }
}

inline void load_moments(const nn::Archive& a, nn::Adam<float>& opt, const nn::ParamRefs<float>& ps,
                         const std::string& prefix, std::uint64_t steps) {
  opt.set_steps(steps);
  auto& m1 = opt.first_moments();
  auto& m2 = opt.second_moments();
  m1.clear();
  m2.clear();
  if (steps == 0) return;
  for (const auto* p : ps) {
    const auto& t1 = a.at(prefix + "m/" + p->name);
    const auto& t2 = a.at(prefix + "v/" + p->name);
    if (t1.data.size() != p->size() || t2.data.size() != p->size())
      throw nn::ArchiveError("optimizer state for '" + p->name + "' has the wrong size");
    m1.emplace_back(t1.data.begin(), t1.data.end());
    m2.emplace_back(t2.data.begin(), t2.data.end());
  }
}

}  // namespace detail

/// Parameters, optimiser moments, RNG state and iteration, stamped with the config hash.
inline void save_checkpoint(const fs::path& path, const TrainState& s, Models& m, const std::string& hash) {
  nn::Archive a = model_archive("checkpoint", Json{{"generator", m.g.architecture()}, {"discriminator", m.d.architecture()}},
                                hash);
  const auto gp = m.g.params(), dp = m.d.params();
  nn::store_params(a, gp, "G/");
  nn::store_params(a, dp, "D/");
  detail::store_moments(a, s.g_opt, gp, "G.adam/");
  detail::store_moments(a, s.d_opt, dp, "D.adam/");
  a.meta = Json{{"iteration", s.iteration},
                {"rng", s.rng.serialize()},
                {"g_steps", s.g_opt.steps()},
                {"d_steps", s.d_opt.steps()}};
  nn::write_archive(path, a);
}

/// Restores a checkpoint written under the same config; any other config is a mismatch.
inline TrainState load_checkpoint(const fs::path& path, Models& m, const TrainConfig& c, const std::string& hash) {
  const auto a = nn::read_archive(path);
  nn::require_manifest(a, "checkpoint", Json{{"generator", m.g.architecture()}, {"discriminator", m.d.architecture()}});
  if (a.config_hash != hash) {
    throw nn::ArchiveError("resume mismatch: checkpoint " + path.string() + " was written by config " + a.config_hash +
                           ", current config is " + hash);
  }
  const auto gp = m.g.params(), dp = m.d.params();
  nn::load_params(a, gp, "G/");
  nn::load_params(a, dp, "D/");
  TrainState s;
  s.g_opt = nn::Adam<float>(c.adam);
  s.d_opt = nn::Adam<float>(c.adam);
  try {
    s.iteration = a.meta.at("iteration").get<long>();
    s.rng.deserialize(a.meta.at("rng").get<std::string>());
    detail::load_moments(a, s.g_opt, gp, "G.adam/", a.meta.at("g_steps").get<std::uint64_t>());
    detail::load_moments(a, s.d_opt, dp, "D.adam/", a.meta.at("d_steps").get<std::uint64_t>());
  } catch (const Json::exception& e) {
    throw nn::ArchiveError(path.string() + ": malformed checkpoint metadata: " + e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------------------
// Full run

struct RunOptions {
  bool resume = false;                  // continue from out_dir/checkpoint.bba
  std::optional<long> stop_after;       // stop (with a checkpoint) once this iteration is reached
  std::function<void(const LogRow&)> on_step;  // progress hook
};

inline std::string training_hash(const TrainConfig& c) { return config_hash(to_json_value(c)); }

/// Rewrites the log keeping the header and rows with iteration < `keep_below`.
inline void truncate_log(const fs::path& path, long keep_below) {
  std::ifstream is(path);
  if (!is) throw DataError("resume: training log " + path.string() + " is missing");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (lines.empty()) {
      if (line != log_header) throw DataError("resume: unexpected log header in " + path.string());
      lines.push_back(line);
      continue;
    }
    if (line.empty()) continue;
    if (std::stol(line.substr(0, line.find(','))) < keep_below) lines.push_back(line);
  }
  is.close();
  std::ofstream os(path, std::ios::trunc);
  for (const auto& l : lines) os << l << '\n';
}

/// Trains to config.total_iters (or options.stop_after), writing
///   out_dir/train_log.csv, out_dir/checkpoint.bba, out_dir/generator.bba, out_dir/discriminator.bba
/// and out_dir/train_config.json.
inline TrainState run_training(const TrainingSet& data, Models& m, const TrainConfig& c, const fs::path& out_dir,
                               const RunOptions& opt = {}) {
  c.validate();
  const std::string hash = training_hash(c);
  fs::create_directories(out_dir);
  const auto ckpt = out_dir / "checkpoint.bba";
  const auto log_path = out_dir / "train_log.csv";
  TrainState s;
  if (opt.resume) {
    if (!fs::exists(ckpt)) throw DataError("resume requested but " + ckpt.string() + " does not exist");
    s = load_checkpoint(ckpt, m, c, hash);
    truncate_log(log_path, s.iteration);
  } else {
    s = init_training(m, c);
    std::ofstream(log_path, std::ios::trunc) << log_header << '\n';
    data::write_json(out_dir / "train_config.json", Json{{"config", to_json_value(c)}, {"config_hash", hash}});
  }
  const long end = std::min(c.total_iters, opt.stop_after.value_or(c.total_iters));
  std::ofstream log(log_path, std::ios::app);
  if (!log) throw DataError("cannot append to " + log_path.string());
  while (s.iteration < end) {
    const LogRow row = train_step(s, m, data, c);
    log << format_log_row(row) << '\n';
    if (opt.on_step) opt.on_step(row);
    if (s.iteration % c.checkpoint_every == 0 && s.iteration < end) {
      log.flush();
      save_checkpoint(ckpt, s, m, hash);
    }
  }
  log.flush();
  save_checkpoint(ckpt, s, m, hash);
  if (s.iteration >= c.total_iters) {
    save_generator(out_dir / "generator.bba", m.g, hash);
    save_discriminator(out_dir / "discriminator.bba", m.d, hash);
  }
  return s;
}

/// Reads a training log back into rows.
inline std::vector<LogRow> read_log(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read " + path.string());
  std::vector<LogRow> rows;
  std::string line;
  std::getline(is, line);
  if (line != log_header) throw DataError(path.string() + ": unexpected log header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    LogRow r;
    if (std::sscanf(line.c_str(), "%ld,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg", &r.iteration, &r.report.adv, &r.report.rec,
                    &r.report.grad_pen, &r.report.total_g, &r.report.total_d, &r.curriculum_fraction, &r.lr,
                    &r.fool_rate) != 9)
      throw DataError(path.string() + ": malformed row '" + line + "'");
    rows.push_back(r);
  }
  return rows;
}

}  // namespace blurbridge::training
