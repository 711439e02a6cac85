#pragma once

#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "blurbridge/evaluation/evaluation.hpp"

namespace blurbridge::cli {

namespace fs = std::filesystem;

/// Settings for the independent known-vs-unknown classifier used by validate-converter.
struct ClassifierSection {
  models::ClassifierConfig model;
  int per_class = 400;
};

inline ClassifierSection classifier_from_json(const Json& j, const std::string& where) {
  reject_unknown_keys(
      j, {"channels", "learning_rate", "iterations", "batch", "seed", "per_class", "highpass_gain", "highpass_radius"},
      where);
  ClassifierSection c;
  read_opt(j, "channels", c.model.channels, where);
  read_opt(j, "learning_rate", c.model.learning_rate, where);
  read_opt(j, "iterations", c.model.iterations, where);
  read_opt(j, "batch", c.model.batch, where);
  read_opt(j, "seed", c.model.seed, where);
  read_opt(j, "per_class", c.per_class, where);
  read_opt(j, "highpass_gain", c.model.highpass_gain, where);
  read_opt(j, "highpass_radius", c.model.highpass_radius, where);
  if (c.per_class < 1 || c.model.iterations < 1 || c.model.batch < 2 || c.model.channels.empty())
    throw InvalidRangeError(where + ": invalid classifier settings");
  return c;
}

/// The single config file: one optional section per workflow stage.
struct ConfigFile {
  Json synth = Json::object();
  Json train = Json::object();
  Json deblurrer = Json::object();
  Json classifier = Json::object();
  Json ablate = Json::object();

  static ConfigFile load(const std::string& path) {
    ConfigFile c;
    if (path.empty()) return c;
    std::ifstream is(path);
    if (!is) throw UsageError("cannot read config file " + path);
    Json j;
    try {
      j = Json::parse(is);
    } catch (const Json::exception& e) {
      throw UsageError("config file " + path + ": " + e.what());
    }
    reject_unknown_keys(j, {"synth", "train", "deblurrer", "classifier", "ablate"}, "config");
    for (auto [key, dst] : {std::pair{"synth", &c.synth}, {"train", &c.train}, {"deblurrer", &c.deblurrer},
                            {"classifier", &c.classifier}, {"ablate", &c.ablate}})
      if (j.contains(key)) *dst = j[key];
    return c;
  }
};

struct Paths {
  fs::path root;

  /// Inputs resolve against --root; outputs against BLURBRIDGE_OUTPUT_DIR when it is set.
  fs::path in(const std::string& p) const { return fs::path(p).is_absolute() ? fs::path(p) : root / p; }
  fs::path out(const std::string& p) const {
    if (fs::path(p).is_absolute()) return p;
    if (const char* env = std::getenv("BLURBRIDGE_OUTPUT_DIR"); env && *env) return fs::path(env) / p;
    return root / p;
  }
};

inline std::vector<data::NamedImage> read_inputs(const fs::path& dir) {
  std::vector<data::NamedImage> out;
  for (const auto& id : data::list_png_ids(dir)) out.push_back({id, read_png(dir / (id + ".png"))});
  if (out.empty()) throw EmptySetError(dir.string() + " holds no images");
  return out;
}

inline evaluation::DeblurrerConfig deblurrer_config(const ConfigFile& cfg, std::optional<double> nsr) {
  auto c = evaluation::deblurrer_config_from_json(cfg.deblurrer, "deblurrer");
  if (nsr) c.nsr = *nsr;
  return c;
}

inline std::string archive_hash(const fs::path& p) { return nn::read_archive(p).config_hash; }

/// Parses arguments and runs one subcommand. Returns the process exit code:
/// 0 success, 1 usage or config error, 2 data error, 3 numeric failure.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Blur-to-blur translation: synthesize data, train the converter, deblur and evaluate."};
  app.require_subcommand(1);
  std::string root = ".", config_path;
  app.add_option("--root", root, "Dataset root; relative paths resolve against it")->capture_default_str();
  app.add_option("--config", config_path, "JSON config with synth/train/deblurrer/classifier/ablate sections");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate the synthetic benchmark under --root");
  std::optional<std::uint64_t> synth_seed;
  std::optional<int> synth_scenes;
  std::optional<double> synth_ratio;
  bool overwrite = false;
  synth->add_option("--seed", synth_seed, "Master seed");
  synth->add_option("--scenes", synth_scenes, "Scene groups shared between the blurry and sharp sets");
  synth->add_option("--ratio", synth_ratio, "Share of scene groups assigned to the blurry set");
  synth->add_flag("--overwrite", overwrite, "Replace a non-empty --root");

  // build-known
  auto* known = app.add_subcommand("build-known", "Rebuild known/ from sharp/ by kernel transfer");
  std::string known_mode = "exact";
  known->add_option("--mode", known_mode, "Kernel source: exact or estimated")
      ->check(CLI::IsMember({"exact", "estimated"}))
      ->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train the converter on blur/ and known/");
  std::string run_dir = "run";
  std::optional<long> iters, stop_after, ckpt_every;
  std::optional<std::uint64_t> train_seed;
  std::optional<double> lr;
  bool resume = false, quiet = false;
  train->add_option("--out", run_dir, "Run directory for checkpoints, log and final models")->capture_default_str();
  train->add_option("--iters", iters, "Total iterations");
  train->add_option("--seed", train_seed, "Training seed");
  train->add_option("--lr", lr, "Initial learning rate");
  train->add_option("--checkpoint-every", ckpt_every, "Checkpoint interval in iterations");
  train->add_option("--stop-after", stop_after, "Stop with a checkpoint once this iteration is reached");
  train->add_flag("--resume", resume, "Continue from the run directory's checkpoint");
  train->add_flag("--quiet", quiet, "No progress lines");

  // convert
  auto* convert = app.add_subcommand("convert", "Translate images into the known blur domain");
  std::string generator = "run/generator.bba", conv_in = "test/blur", conv_out = "converted";
  convert->add_option("--generator", generator, "Generator archive")->capture_default_str();
  convert->add_option("--input", conv_in, "Input PNG directory")->capture_default_str();
  convert->add_option("--out", conv_out, "Output PNG directory")->capture_default_str();

  // deblur
  auto* deblur = app.add_subcommand("deblur", "Deblur images with the known-domain deblurrer");
  std::string deb_in = "test/blur", deb_out = "deblurred";
  std::optional<std::string> deb_generator;
  std::optional<double> nsr;
  deblur->add_option("--input", deb_in, "Input PNG directory")->capture_default_str();
  deblur->add_option("--out", deb_out, "Output PNG directory")->capture_default_str();
  deblur->add_option("--generator", deb_generator, "Convert first with this generator archive (full pipeline)");
  deblur->add_option("--nsr", nsr, "Wiener noise-to-signal ratio");

  // eval
  auto* eval = app.add_subcommand("eval", "Metrics for input, direct, converted and pipeline on test/");
  std::string eval_out = "eval";
  eval->add_option("--generator", generator, "Generator archive")->capture_default_str();
  eval->add_option("--out", eval_out, "Output directory for metrics.csv and summary.json")->capture_default_str();
  eval->add_option("--nsr", nsr, "Wiener noise-to-signal ratio");

  // ablate-ratio
  auto* ablate = app.add_subcommand("ablate-ratio", "Train and evaluate one model per blurry:sharp ratio");
  std::vector<std::string> ratios;
  std::string ablate_out = "ablation";
  ablate->add_option("--ratios", ratios, "Ratios such as 5:5 6:4 9:1")->delimiter(',');
  ablate->add_option("--out", ablate_out, "Output directory")->capture_default_str();
  ablate->add_option("--iters", iters, "Training iterations per ratio");
  ablate->add_option("--nsr", nsr, "Wiener noise-to-signal ratio");

  // validate-converter
  auto* validate = app.add_subcommand("validate-converter", "Domain accuracy of converted versus raw test images");
  std::string discriminator = "run/discriminator.bba", report = "validation.json";
  validate->add_option("--generator", generator, "Generator archive")->capture_default_str();
  validate->add_option("--discriminator", discriminator, "Discriminator archive")->capture_default_str();
  validate->add_option("--out", report, "Report path")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::usage);
  }

  try {
    const ConfigFile cfg = ConfigFile::load(config_path);
    const Paths paths{root};

    if (*synth) {
      auto c = data::synth_config_from_json(cfg.synth, "synth");
      if (synth_seed) c.seed = *synth_seed;
      if (synth_scenes) c.scenes = *synth_scenes;
      if (synth_ratio) c.ratio = *synth_ratio;
      c.validate();
      const auto b = data::synthesize_bundle(c);
      data::write_bundle(paths.root, b, overwrite);
      out << "wrote " << b.blurry.size() << " blurry, " << b.sharp.size() << " sharp, " << b.known.size()
          << " known, " << b.test.size() << " test images to " << paths.root.string() << '\n';
    } else if (*known) {
      const auto k = data::rebuild_known(paths.root, parse_transfer_mode(known_mode));
      out << "rebuilt " << k.images.size() << " known images (" << known_mode << ")\n";
    } else if (*train) {
      Json tj = cfg.train;
      if (iters) {
        tj["total_iters"] = *iters;
      }
      auto c = training::train_config_from_json(tj, "train");
      if (train_seed) c.seed = *train_seed;
      if (lr) c.lr_initial = *lr;
      if (ckpt_every) c.checkpoint_every = *ckpt_every;
      c.validate();
      const auto td = data::load_training_data(paths.root);
      training::Models m(c);
      training::RunOptions opt;
      opt.resume = resume;
      opt.stop_after = stop_after;
      const long report_every = std::max<long>(1, c.total_iters / 20);
      if (!quiet) {
        opt.on_step = [&](const training::LogRow& r) {
          if ((r.iteration + 1) % report_every == 0)
            out << "iter " << r.iteration + 1 << "/" << c.total_iters << " adv " << r.report.adv << " rec "
                << r.report.rec << " grad_pen " << r.report.grad_pen << std::endl;
        };
      }
      const auto s = training::run_training(training::TrainingSet::from(td), m, c, paths.out(run_dir), opt);
      out << "trained to iteration " << s.iteration << " in " << paths.out(run_dir).string() << '\n';
    } else if (*convert) {
      const auto g = training::load_generator(paths.in(generator));
      const auto inputs = read_inputs(paths.in(conv_in));
      const auto dst = paths.out(conv_out);
      fs::create_directories(dst);
      for (const auto& n : inputs) write_png(dst / (n.id + ".png"), evaluation::convert(g, n.image));
      out << "converted " << inputs.size() << " images into " << dst.string() << '\n';
    } else if (*deblur) {
      const auto synth_cfg = data::read_manifest_config(paths.root);
      const auto d = evaluation::make_deblurrer(deblurrer_config(cfg, nsr), synth_cfg);
      std::optional<models::Generator<float>> g;
      if (deb_generator) g = training::load_generator(paths.in(*deb_generator));
      const auto inputs = read_inputs(paths.in(deb_in));
      const auto dst = paths.out(deb_out);
      fs::create_directories(dst);
      for (const auto& n : inputs) {
        const Image x = g ? evaluation::deblur_pipeline(*g, d, n.image).restored : d.deblur(n.image);
        write_png(dst / (n.id + ".png"), x);
      }
      out << "deblurred " << inputs.size() << " images into " << dst.string() << '\n';
    } else if (*eval) {
      const auto synth_cfg = data::read_manifest_config(paths.root);
      const auto dc = deblurrer_config(cfg, nsr);
      const auto d = evaluation::make_deblurrer(dc, synth_cfg);
      const auto g = training::load_generator(paths.in(generator));
      const auto test = data::load_test_set(paths.root);
      const auto table = evaluation::evaluate_set(g, d, test);
      const auto dst = paths.out(eval_out);
      fs::create_directories(dst);
      evaluation::write_metrics_csv(dst / "metrics.csv", table);
      const Json stamp{{"dataset", data::read_json(paths.root / "manifest.json").value("config_hash", "")},
                       {"generator", archive_hash(paths.in(generator))},
                       {"deblurrer", dc}};
      Json summary = evaluation::metrics_summary(table, config_hash(stamp));
      summary["inputs"] = stamp;
      data::write_json(dst / "summary.json", summary);
      const auto m = table.means();
      out << "images " << table.rows.size() << " direct " << m.psnr_direct << " dB pipeline " << m.psnr_pipeline
          << " dB gain " << m.psnr_pipeline - m.psnr_direct << " dB\n";
    } else if (*ablate) {
      const auto synth_cfg = data::read_manifest_config(paths.root);
      std::vector<std::string> labels = ratios;
      if (labels.empty()) read_opt(cfg.ablate, "ratios", labels, "ablate");
      reject_unknown_keys(cfg.ablate, {"ratios"}, "ablate");
      if (labels.empty()) labels = {"5:5", "6:4", "9:1"};
      std::vector<evaluation::RatioSpec> specs;
      for (const auto& l : labels) specs.push_back(evaluation::parse_ratio(l));
      Json tj = cfg.train;
      if (iters) tj["total_iters"] = *iters;
      const auto tc = training::train_config_from_json(tj, "train");
      const auto rows = evaluation::ratio_ablation(synth_cfg, specs, tc, deblurrer_config(cfg, nsr), paths.out(ablate_out));
      out << evaluation::ablation_header << '\n';
      for (const auto& r : rows) out << evaluation::format_ablation_row(r) << '\n';
    } else if (*validate) {
      const auto synth_cfg = data::read_manifest_config(paths.root);
      const auto cs = classifier_from_json(cfg.classifier, "classifier");
      const auto g = training::load_generator(paths.in(generator));
      const auto d = training::load_discriminator(paths.in(discriminator));
      models::KernelClassifier cls(cs.model);
      cls.train(evaluation::classifier_training_set(synth_cfg, cs.per_class, cs.model.seed));
      std::vector<Image> raw, converted, known_imgs;
      for (const auto& t : data::load_test_set(paths.root)) {
        raw.push_back(t.pair.blurry);
        converted.push_back(evaluation::convert(g, t.pair.blurry));
      }
      for (const auto& n : data::read_image_dir(paths.root, "known")) known_imgs.push_back(n.image);
      const auto v = evaluation::validate_converter(d, cls, raw, converted);
      const auto k = evaluation::domain_accuracy(d, cls, known_imgs);
      const Json rep{{"images", raw.size()},
                     {"converted", {{"acc1", v.converted.acc1}, {"acc2", v.converted.acc2}}},
                     {"raw", {{"acc1", v.raw.acc1}, {"acc2", v.raw.acc2}}},
                     {"known_control", {{"acc1", k.acc1}, {"acc2", k.acc2}}}};
      const auto dst = paths.out(report);
      if (dst.has_parent_path()) fs::create_directories(dst.parent_path());
      data::write_json(dst, rep);
      out << rep.dump(2) << '\n';
    }
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const Json::exception& e) {
    err << "error: malformed JSON: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::usage);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::data);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::data);
  }
}

}  // namespace blurbridge::cli
