// Acceptance run: one PASS/FAIL line per headline criterion.
//
//   acceptance [--work DIR] [--only NAME]...
//
// The end-to-end benchmark and converter validation share one full-length training run
// (synth -> build-known -> train -> eval -> validate-converter through the CLI).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "blurbridge/cli/cli.hpp"
#include "grad_check.hpp"
#include "oracles.hpp"

using namespace blurbridge;
using nn::Tensor;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Tensor<double> random_tensor(int n, int c, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> t(n, c, h, w);
  for (double& v : t.data) v = rng.uniform();
  return t;
}

double mean(const Tensor<double>& t) { return std::accumulate(t.data.begin(), t.data.end(), 0.0) / t.size(); }

// ---------------------------------------------------------------------------------------------
// Oracle suites

Outcome oracle_suites() {
  std::ostringstream why;
  bool ok = true;

  double worst_kernel = 0.0;
  for (auto f : {BlurFamily::linear_motion, BlurFamily::gaussian, BlurFamily::frame_average_trajectory}) {
    BlurDomainSpec s = BlurDomainSpec::unknown_default();
    s.family = f;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const BlurKernel k = sample_kernel(s, 300 + seed);
      const Image x = oracle::random_texture(48, 48, 40 + seed);
      const BlurPair pair{oracle::convolve(x, k), x, k};
      const BlurKernel est = estimate_kernel(pair, {std::max(k.size(), 15), 1e-6});
      worst_kernel = std::max(worst_kernel, kernel_l2(est, k));
    }
  }
  ok &= worst_kernel < 1e-3;
  why << fmt("kernel L2 worst %.2e (< 1e-3)", worst_kernel);

  double worst_wiener = 1e9;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Image x = oracle::random_texture(32, 32, 60 + seed);
    const BlurKernel k = BlurKernel::gaussian(0.6 + 0.1 * seed);
    const models::WienerDeblurrer w(k, 1e-12);
    worst_wiener = std::min(worst_wiener, oracle::psnr(w.deblur(oracle::convolve(x, k)), x));
  }
  ok &= worst_wiener >= 40.0;
  why << fmt("; Wiener worst %.1f dB (>= 40)", worst_wiener);

  double worst_metric = 0.0;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const Image a = oracle::random_texture(16, 16, 80 + seed), b = oracle::smooth_texture(16, 16, 90 + seed);
    worst_metric = std::max({worst_metric, std::abs(psnr(a, b) - oracle::psnr(a, b)),
                             std::abs(ssim(a, b) - oracle::ssim(a, b)),
                             std::abs(laplacian_variance(a) - oracle::laplacian_variance(a))});
  }
  ok &= worst_metric <= 1e-9;
  why << fmt("; metrics worst |diff| %.1e (<= 1e-9)", worst_metric);
  return {ok, why.str()};
}

// ---------------------------------------------------------------------------------------------
// Gradient suite: default architectures in double precision

struct GradFixture {
  models::Generator<double> g;
  models::Discriminator<double> d;
  models::FeatureExtractor<double> phi;
  std::vector<Tensor<double>> in;
  Tensor<double> real;

  GradFixture() {
    Rng rng(2024);
    g.init(rng);
    d.init(rng);
    // move the zero-initialised heads off zero so every generator weight carries gradient
    for (auto* p : g.params())
      if (p->name.find("head") != std::string::npos)
        for (double& v : p->value) v = 0.05 * rng.normal();
    std::vector<ImagePyramid> pyrs;
    for (int i = 0; i < 2; ++i) pyrs.push_back(build_pyramid(oracle::smooth_texture(32, 32, 500 + i), 3));
    in = models::pyramid_batch<double>(pyrs);
    real = Tensor<double>(2, 3, 32, 32);
    for (int b = 0; b < 2; ++b) {
      const auto one = nn::to_tensor<double>(oracle::smooth_texture(32, 32, 600 + b));
      std::copy(one.data.begin(), one.data.end(), real.data.begin() + b * one.size());
    }
  }
};

Outcome gradient_suite() {
  GradFixture f;
  std::ostringstream why;
  bool ok = true;
  auto record = [&](const char* name, const gradcheck::Result& r) {
    ok &= r.fraction() >= 0.95;
    why << (why.tellp() ? "; " : "") << name << " " << r.agree << "/" << r.probes;
  };

  // adversarial loss w.r.t. D
  {
    const auto fake = f.g.forward(f.in)[0];
    auto loss = [&] {
      const auto sr = f.d.scores(f.real), sf = f.d.scores(fake);
      return losses::adversarial_loss(sr.data, sf.data);
    };
    auto ps = f.d.params();
    nn::zero_grads(ps);
    models::Discriminator<double>::Cache cr, cf;
    const auto sr = f.d.scores(f.real, &cr), sf = f.d.scores(fake, &cf);
    Tensor<double> gr = sr.zeros_like(), gf = sf.zeros_like();
    for (std::size_t i = 0; i < sr.size(); ++i) gr.data[i] = 1.0 / (sr.data[i] * sr.size());
    for (std::size_t i = 0; i < sf.size(); ++i) gf.data[i] = -1.0 / ((1.0 - sf.data[i]) * sf.size());
    f.d.backward_scores(cr, gr, true, false);
    f.d.backward_scores(cf, gf, true, false);
    record("adv/D", gradcheck::probe(ps, loss, 100, 1));
  }

  // adversarial loss w.r.t. G
  {
    auto loss = [&] {
      const auto sr = f.d.scores(f.real), sf = f.d.scores(f.g.forward(f.in)[0]);
      return losses::adversarial_loss(sr.data, sf.data);
    };
    auto ps = f.g.params();
    nn::zero_grads(ps);
    models::Generator<double>::Cache gc;
    const auto out = f.g.forward(f.in, &gc);
    models::Discriminator<double>::Cache dc;
    const auto s = f.d.scores(out[0], &dc);
    Tensor<double> gs = s.zeros_like();
    for (std::size_t i = 0; i < s.size(); ++i) gs.data[i] = -1.0 / ((1.0 - s.data[i]) * s.size());
    std::vector<Tensor<double>> g_out;
    for (const auto& t : out) g_out.push_back(t.zeros_like());
    g_out[0] += f.d.backward_scores(dc, gs, false, true);
    f.g.backward(gc, g_out);
    record("adv/G", gradcheck::probe(ps, loss, 100, 2));
  }

  // gradient penalty w.r.t. D
  {
    const auto fake = f.g.forward(f.in)[0];
    const auto x_hat = losses::interpolate(f.real, fake, std::vector<double>{0.3, 0.8});
    auto ps = f.d.params();
    nn::zero_grads(ps);
    f.d.gradient_penalty(x_hat, 1.0);
    auto loss = [&] { return static_cast<double>(f.d.gradient_penalty(x_hat, 0.0).value); };
    record("grad_pen/D", gradcheck::probe(ps, loss, 100, 3));
  }

  // reconstruction loss w.r.t. G
  {
    losses::ReconstructionLoss<double> rec(f.phi);
    auto loss = [&] { return rec(f.in, f.g.forward(f.in)); };
    auto ps = f.g.params();
    nn::zero_grads(ps);
    models::Generator<double>::Cache gc;
    const auto out = f.g.forward(f.in, &gc);
    std::vector<Tensor<double>> g_out;
    rec(f.in, out, &g_out);
    f.g.backward(gc, g_out);
    record("rec/G", gradcheck::probe(ps, loss, 100, 4));
  }

  // penalty value against the finite-difference input-gradient norm
  {
    const Image a = oracle::random_texture(32, 32, 700), b = oracle::smooth_texture(32, 32, 701);
    const double eps = 0.35;
    auto x = losses::interpolate(nn::to_tensor<double>(a), nn::to_tensor<double>(b), std::vector<double>{eps});
    double sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double saved = x.data[i];
      x.data[i] = saved + 1e-5;
      const double up = mean(f.d.scores(x));
      x.data[i] = saved - 1e-5;
      const double down = mean(f.d.scores(x));
      x.data[i] = saved;
      sq += std::pow((up - down) / 2e-5, 2);
    }
    const double expect = std::pow(std::sqrt(sq) - 1.0, 2);
    const double got = losses::gradient_penalty(f.d, a, b, eps);
    const double rel = std::abs(got - expect) / std::max(std::abs(expect), 1e-12);
    ok &= rel <= 1e-3;
    why << fmt("; penalty vs FD norm rel %.1e", rel);
  }
  return {ok, why.str()};
}

// ---------------------------------------------------------------------------------------------
// Exact values

Outcome exact_values() {
  const losses::LossWeights w;
  bool ok = w.lambda_rec == 0.8 && w.lambda_grad == 0.005;
  Rng rng(31);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const double adv = rng.uniform(-3, 0), rec = rng.uniform(0, 1), gp = rng.uniform(0, 4);
    const auto r = losses::total_losses(adv, rec, gp, w);
    mismatches += r.total_g != adv + 0.8 * rec || r.total_d != -adv + 0.005 * gp;
  }
  ok &= mismatches == 0;

  // logged rows of a real training step obey the same identity
  training::TrainConfig c;
  c.total_iters = 3;
  c.curriculum = data::CurriculumSchedule::scaled_to(3);
  c.batch_size = 2;
  c.augmentation.crop = 32;
  training::Models m(c);
  auto s = training::init_training(m, c);
  std::vector<Image> b, k;
  for (int i = 0; i < 6; ++i) {
    b.push_back(data::render_scene(40 + i, 32));
    k.push_back(data::render_scene(80 + i, 32));
  }
  const training::TrainingSet set(std::move(b), std::move(k));
  for (int i = 0; i < 3; ++i) {
    const auto row = training::train_step(s, m, set, c);
    mismatches += row.report.total_g != row.report.adv + 0.8 * row.report.rec ||
                  row.report.total_d != -row.report.adv + 0.005 * row.report.grad_pen;
  }
  ok &= mismatches == 0;

  const std::vector<double> half(64, 0.5);
  const double uninformed = losses::adversarial_loss(half, half);
  models::Discriminator<double> d;
  Rng init(5);
  d.init(init);
  for (auto* p : d.params()) std::fill(p->value.begin(), p->value.end(), 0.0);
  const auto sc = d.scores(random_tensor(2, 3, 32, 32, 6));
  const double zero_d = losses::adversarial_loss(sc.data, sc.data);
  const double target = -2.0 * std::log(2.0);
  ok &= std::abs(uninformed - target) <= 1e-6 && std::abs(zero_d - target) <= 1e-6;
  return {ok, fmt("weights %.3g/%.3g, %d identity mismatches, uninformed adv %.9f (-2 ln 2 = %.9f)", w.lambda_rec,
                  w.lambda_grad, mismatches, uninformed, target)};
}

// ---------------------------------------------------------------------------------------------
// Determinism and resume: default models, 100 iterations, interrupted at 50

Outcome determinism_resume(const fs::path& work) {
  data::SynthConfig sc;
  sc.scenes = 10;
  sc.frames_per_scene = 4;
  sc.test_scenes = 1;
  sc.test_frames_per_scene = 1;
  sc.known_pairs = 8;
  const auto td = [&] {
    const auto root = work / "resume_data";
    data::write_bundle(root, data::synthesize_bundle(sc), true);
    return training::TrainingSet::from(data::load_training_data(root));
  }();
  training::TrainConfig c;
  c.total_iters = 100;
  c.curriculum = data::CurriculumSchedule::scaled_to(100);
  c.checkpoint_every = 25;

  const auto full = work / "resume_full", part = work / "resume_part";
  fs::remove_all(full);
  fs::remove_all(part);
  training::Models mf(c);
  training::run_training(td, mf, c, full);
  training::Models mp(c);
  training::RunOptions stop;
  stop.stop_after = 50;
  training::run_training(td, mp, c, part, stop);
  std::ofstream(part / "train_log.csv", std::ios::app) << "50,0,0,0,0,0,0,0,0\n";  // rows past the checkpoint
  training::Models mr(c);
  training::RunOptions resume;
  resume.resume = true;
  training::run_training(td, mr, c, part, resume);

  const auto a = training::read_log(full / "train_log.csv"), b = training::read_log(part / "train_log.csv");
  std::ifstream fa(full / "train_log.csv"), fb(part / "train_log.csv");
  const std::string ta{std::istreambuf_iterator<char>(fa), {}}, tb{std::istreambuf_iterator<char>(fb), {}};
  const bool ok = a.size() == 100 && a == b && ta == tb;
  return {ok, fmt("%zu rows uninterrupted, %zu resumed, logs %s", a.size(), b.size(),
                  ta == tb ? "byte-identical" : "differ")};
}

// ---------------------------------------------------------------------------------------------
// Curriculum contract

Outcome curriculum_contract() {
  bool ok = true;
  std::ostringstream why;
  const auto s = data::CurriculumSchedule::scaled_to(1000000);
  ok &= s.ramp_start == 200000 && s.fraction(0) == 0.5 && s.fraction(200000) == 0.5 && s.fraction(500000) == 1.0 &&
        s.fraction(1000000) == 1.0 && s.fraction(350000) == 0.75;
  double prev = 0.0;
  for (long t = 0; t <= 1000000; t += 997) {
    ok &= s.fraction(t) >= prev && s.fraction(t) >= 0.5 && s.fraction(t) <= 1.0;
    prev = s.fraction(t);
  }
  const auto d = data::CurriculumSchedule::scaled_to(20000);
  ok &= d.ramp_start == 4000 && d.fraction(3999) == 0.5 && d.fraction(10000) == 1.0;
  why << fmt("ramp %ld..%ld of 1M, desk %ld..%ld of 20K", s.ramp_start, s.ramp_end, d.ramp_start, d.ramp_end);

  int pool_errors = 0;
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(10 + trial * 3);
    for (double& x : v) x = rng.uniform() < 0.2 ? 0.5 : rng.uniform();  // ties included
    const data::CurriculumSampler cs(v);
    std::set<std::size_t> previous;
    for (long t = 0; t <= 1000000; t += 25000) {
      const double frac = s.fraction(t);
      const auto p = cs.pool(frac);
      const std::set<std::size_t> cur(p.begin(), p.end());
      // sort oracle: the ceil(frac * n) largest variances, ties broken by index
      std::vector<std::size_t> idx(v.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] > v[b]; });
      idx.resize(static_cast<std::size_t>(std::ceil(frac * v.size() - 1e-9)));
      pool_errors += std::set<std::size_t>(idx.begin(), idx.end()) != cur;
      pool_errors += !std::includes(cur.begin(), cur.end(), previous.begin(), previous.end());
      previous = cur;
    }
  }
  ok &= pool_errors == 0;
  why << fmt("; %d pool mismatches against the sort oracle", pool_errors);
  return {ok, why.str()};
}

// ---------------------------------------------------------------------------------------------
// CLI-driven runs

int cli(const std::vector<std::string>& args, std::ostream& log) {
  std::vector<const char*> argv{"blurbridge"};
  for (const auto& a : args) argv.push_back(a.c_str());
  log << "$ blurbridge";
  for (const auto& a : args) log << ' ' << a;
  log << '\n';
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), log, log);
  log.flush();
  return code;
}

struct Benchmark {
  Outcome pipeline, validation;
};

Benchmark benchmark(const fs::path& work, std::ostream& log) {
  const auto root = work / "bench";
  const std::string r = root.string();
  const auto t0 = std::chrono::steady_clock::now();
  auto step = [&](const std::vector<std::string>& args) {
    std::vector<std::string> a{"--root", r};
    a.insert(a.end(), args.begin(), args.end());
    if (const int code = cli(a, log); code != 0)
      throw std::runtime_error(args.front() + " exited with " + std::to_string(code));
  };
  step({"synth", "--overwrite"});
  step({"build-known", "--mode", "exact"});
  step({"train", "--out", "run"});
  step({"eval", "--generator", "run/generator.bba", "--out", "eval"});
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  step({"validate-converter", "--generator", "run/generator.bba", "--discriminator", "run/discriminator.bba", "--out",
        "validation.json"});

  const Json s = data::read_json(root / "eval" / "summary.json");
  const int images = s.at("images").get<int>();
  const double direct = s.at("mean").at("psnr_direct").get<double>();
  const double pipe = s.at("mean").at("psnr_pipeline").get<double>();
  const double gap = pipe - direct;
  Benchmark b;
  b.pipeline = {gap >= 1.0 && images >= 100 && seconds <= 12 * 3600.0,
                fmt("pipeline %.2f dB vs direct %.2f dB, gain %+.2f dB (>= 1.0) over %d images, %.0f s (<= 43200)",
                    pipe, direct, gap, images, seconds)};

  const Json v = data::read_json(root / "validation.json");
  const double conv = v.at("converted").at("acc2").get<double>(), raw = v.at("raw").at("acc2").get<double>();
  const double control = v.at("known_control").at("acc2").get<double>();
  b.validation = {conv >= 0.8 && raw <= 0.3,
                  fmt("classifier labels %.1f%% of converted (>= 80%%) and %.1f%% of raw (<= 30%%) as known; "
                      "held-out known images %.1f%%",
                      100 * conv, 100 * raw, 100 * control)};
  return b;
}

Outcome ratio_harness(const fs::path& work, std::ostream& log) {
  // Shorter training per ratio: the harness is gated on completing and on a comparable,
  // repeatable table, not on the trend.
  const auto root = work / "ratio";
  data::SynthConfig sc;
  data::write_bundle(root, data::synthesize_bundle(sc), true);
  std::vector<std::string> tables;
  for (const char* out : {"abl_a", "abl_b"}) {
    const int code = cli({"--root", root.string(), "ablate-ratio", "--ratios", "5:5,6:4,9:1", "--iters", "300",
                          "--out", out},
                         log);
    if (code != 0) return {false, fmt("ablate-ratio exited with %d", code)};
    std::ifstream is(root / out / "ablation.csv");
    tables.emplace_back(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
  }
  std::istringstream rows(tables[0]);
  std::string line, best;
  std::getline(rows, line);
  int n = 0;
  double best_psnr = -1e9;
  std::ostringstream trend;
  bool finite = true;
  while (std::getline(rows, line)) {
    ++n;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    const double pipe = std::stod(cells.at(7));
    finite &= std::isfinite(pipe) && std::isfinite(std::stod(cells.at(6)));
    trend << (n > 1 ? ", " : "") << cells[0] << " " << fmt("%.2f", pipe);
    if (pipe > best_psnr) best_psnr = pipe, best = cells[0];
  }
  const bool ok = n == 3 && finite && tables[0] == tables[1];
  return {ok, fmt("%d rows, reruns %s; pipeline dB %s; best %s (reported only)", n,
                  tables[0] == tables[1] ? "identical" : "differ", trend.str().c_str(), best.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance run"};
  std::string work_dir = (fs::temp_directory_path() / "blurbridge_acceptance").string();
  std::vector<std::string> only;
  app.add_option("--work", work_dir, "Scratch directory for datasets and runs")->capture_default_str();
  app.add_option("--only", only, "Run only criteria whose key contains this text");
  CLI11_PARSE(app, argc, argv);

  const fs::path work(work_dir);
  fs::create_directories(work);
  std::ofstream log(work / "acceptance.log");
  auto wanted = [&](const std::string& key) {
    return only.empty() || std::any_of(only.begin(), only.end(), [&](const auto& o) { return key.find(o) != std::string::npos; });
  };

  int failures = 0;
  auto report = [&](const std::string& key, const std::string& title, const std::function<Outcome()>& run) {
    if (!wanted(key)) return;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << title << ": " << o.detail << std::endl;
  };

  std::optional<Benchmark> bench;
  auto run_bench = [&]() -> const Benchmark& {
    if (!bench) {
      try {
        bench = benchmark(work, log);
      } catch (const std::exception& e) {
        const Outcome failed{false, std::string("error: ") + e.what()};
        bench = Benchmark{failed, failed};
      }
    }
    return *bench;
  };

  report("benchmark", "end-to-end synthetic benchmark", [&] { return run_bench().pipeline; });
  report("validation", "converter validation", [&] { return run_bench().validation; });
  report("oracle", "oracle suites", oracle_suites);
  report("gradient", "gradient suite", gradient_suite);
  report("exact", "exact-value checks", exact_values);
  report("resume", "determinism and resume", [&] { return determinism_resume(work); });
  report("curriculum", "curriculum contract", curriculum_contract);
  report("ratio", "ratio harness", [&] { return ratio_harness(work, log); });
  return failures == 0 ? 0 : 1;
}
