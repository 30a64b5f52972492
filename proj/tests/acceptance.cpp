// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// the number of failures. Pass criterion ids as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "facestyle/annotation.hpp"
#include "facestyle/corpus.hpp"
#include "facestyle/diffusion.hpp"
#include "facestyle/io.hpp"
#include "facestyle/metrics.hpp"
#include "facestyle/pipeline.hpp"
#include "facestyle/stylea.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace facestyle;
namespace fs = std::filesystem;
using Json = nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Eigen::MatrixXd normal_matrix(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

ConditionVector plain_condition(int frames, int text, int identity, int audio) {
  return assemble_condition(Eigen::VectorXd::Ones(text), Eigen::VectorXd::Ones(identity),
                            Eigen::MatrixXd::Zero(frames, audio));
}

// Small run config; `patch` is merged over the defaults below.
RunConfig toy_config(const Json& patch) {
  Json j = {{"seed", 3},
            {"corpus", {{"num_videos", 4}, {"frames_per_video", 8}, {"resolution", 32}}},
            {"style_e",
             {{"diffusion_steps", 200},
              {"batch_size", 4},
              {"checkpoint_every", 1000000},
              {"log_every", 1000000},
              {"denoiser", {{"hidden_width", 32}, {"num_blocks", 1}, {"time_embed_dim", 16}}}}},
            {"style_a",
             {{"model", {{"channels", 8}, {"style_dim", 16}}},
              {"frames_per_step", 4},
              {"checkpoint_every", 1000000},
              {"log_every", 1000000}}}};
  j.merge_patch(patch);
  return RunConfig::from_json(j);
}

FeatureMap ramp(int c, int h, int w, double offset = 0.0) {
  FeatureMap m{{c, h, w}, ArrayX<double>(c * h * w)};
  for (int i = 0; i < m.values.size(); ++i) m.values(i) = offset + 0.5 * i + 0.01 * i * i;
  return m;
}

// 1: q_sample marginal
void diffusion_marginal(Outcome& o) {
  const int T = 1000, n = 10000;
  for (auto kind : {ScheduleKind::kLinear, ScheduleKind::kCosine}) {
    const NoiseSchedule s = make_schedule(T, kind);
    for (int t : {1, T / 2, T}) {
      const Eigen::MatrixXd x = q_sample(Eigen::MatrixXd::Zero(n, 1), t, s, normal_matrix(n, 1, 100 + t));
      const double mean = x.mean();
      const double sd = std::sqrt((x.array() - mean).square().sum() / (n - 1));
      const double rel = std::abs(sd / std::sqrt(1.0 - s.alpha_bar(t)) - 1.0);
      o.detail << schedule_kind_name(kind) << " t=" << t << " rel=" << rel << " ";
      o.check(rel < 0.02, "std off by more than 2%");
    }
  }
}

// 2: DDIM with an oracle denoiser
void ddim_fixed_point(Outcome& o) {
  const int T = 1000;
  const NoiseSchedule s = make_schedule(T, ScheduleKind::kLinear);
  const Eigen::MatrixXd x0 = 0.3 * normal_matrix(16, 64, 5);
  const DenoiseFn oracle = [&](const ad::Var&, const ConditionVector&, int) {
    ad::RowMatrix rm = x0;
    return ad::Var::constant(Eigen::Map<ad::Array>(rm.data(), rm.size()), {16, 64});
  };
  for (int steps : {1, 5, T}) {
    const double err = (ddim_sample(oracle, plain_condition(16, 2, 2, 2), s, steps, 9, 16, 64) - x0)
                           .cwiseAbs()
                           .maxCoeff();
    o.detail << "steps=" << steps << " err=" << err << " ";
    o.check(err < 1e-6, "oracle not recovered");
  }
}

// 3: 5-step vs 1000-step sampling cost
void sampling_efficiency(Outcome& o) {
  DenoiserConfig c;
  const Denoiser net(c, 1);
  const NoiseSchedule s = make_schedule(1000, ScheduleKind::kLinear);
  const ConditionVector cond = plain_condition(c.sequence_length, kDefaultTextDim, kDefaultIdentityDim,
                                               kDefaultAudioDim);
  const DenoiseFn inner = net.as_function();
  auto timed = [&](int steps, int repeats, int& calls) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
      calls = 0;
      const DenoiseFn counted = [&](const ad::Var& x, const ConditionVector& cv, int t) {
        ++calls;
        return inner(x, cv, t);
      };
      const auto start = Clock::now();
      ddim_sample(counted, cond, s, steps, 4, c.sequence_length, c.d_exp);
      best = std::min(best, seconds_since(start));
    }
    return best;
  };
  int few = 0, many = 0;
  const double t_few = timed(5, 20, few);
  const double t_many = timed(1000, 3, many);
  o.detail << "calls " << few << " vs " << many << ", " << t_few * 1e3 << "ms vs " << t_many * 1e3
           << "ms, ratio " << t_many / t_few;
  o.check(few == 5 && many == 1000, "call counts");
  o.check(t_many / t_few >= 50.0, "ratio below 50");
}

// 4: stage E overfits one sequence
void stage_e_overfit(Outcome& o) {
  testutil::TempDir dir("accept_overfit");
  const RunConfig c = toy_config({{"corpus", {{"num_videos", 1}, {"frames_per_video", 16}}},
                                  {"style_e",
                                   {{"diffusion_steps", 1000},
                                    {"steps", 500},
                                    {"batch_size", 8},
                                    {"lr", 2e-3},
                                    {"denoiser", {{"hidden_width", 64}, {"num_blocks", 2}}}}}});
  synth_data(dir / "corpus", c.corpus, c.seed);
  run_annotation(c, dir / "corpus", dir / "ann");
  const TrainResult r = train_style_e(c, dir / "corpus", dir / "ann" / "records", dir / "e");
  const int window = 50;
  std::vector<double> means;
  for (std::size_t i = 0; i + window <= r.losses.size(); i += window) {
    double s = 0;
    for (int k = 0; k < window; ++k) s += r.losses[i + k];
    means.push_back(s / window);
  }
  int rises = 0;
  for (std::size_t i = 1; i < means.size(); ++i) rises += means[i] > means[i - 1];
  o.detail << "steps " << r.losses.size() << ", first window " << means.front() << ", final window "
           << means.back() << ", rising windows " << rises << "/" << means.size() - 1;
  o.check(means.back() < 1e-3, "final MSE");
  o.check(rises == 0, "window means not monotone");
}

// 5: AdaIN
void adain_invariants(Outcome& o) {
  FeatureMap x{{1, 2, 2}, ArrayX<double>(4)};
  x.values << 1, 2, 3, 4;
  const FeatureMap hand = adain(x, {ArrayX<double>::Constant(1, 2.0), ArrayX<double>::Constant(1, 1.0)});
  const double expected[] = {-1.683281572999748, 0.105572809000084, 1.894427190999916, 3.683281572999748};
  double err = 0;
  for (int i = 0; i < 4; ++i) err = std::max(err, std::abs(hand.values(i) - expected[i]));
  x.values << 1, 3, 1, 3;
  const FeatureMap cols = adain(x, {ArrayX<double>::Constant(1, 2.0), ArrayX<double>::Constant(1, 5.0)});
  const double expected_cols[] = {3, 7, 3, 7};
  for (int i = 0; i < 4; ++i) err = std::max(err, std::abs(cols.values(i) - expected_cols[i]));
  o.detail << "hand " << err;
  o.check(err < 1e-6, "2x2 cases");

  const FeatureMap m = ramp(3, 4, 4, -2.0);
  const FeatureMap n = adain(m, {ArrayX<double>::Ones(3), ArrayX<double>::Zero(3)});
  AdaINParams stats{ArrayX<double>(3), ArrayX<double>(3)};
  double norm_err = 0;
  for (int c = 0; c < 3; ++c) {
    const ArrayX<double> seg = n.values.segment(c * 16, 16);
    norm_err = std::max({norm_err, std::abs(seg.mean()), std::abs(std::sqrt(seg.square().mean()) - 1.0)});
    const ArrayX<double> in = m.values.segment(c * 16, 16);
    stats.bias(c) = in.mean();
    stats.scale(c) = std::sqrt((in - in.mean()).square().mean());
  }
  const double id_err = (adain(m, stats).values - m.values).abs().maxCoeff();
  o.detail << ", normalization " << norm_err << ", identity " << id_err;
  o.check(norm_err < 1e-6, "normalization");
  o.check(id_err < 1e-6, "identity reconstruction");
}

// 6: warp
void warp_invariants(Outcome& o) {
  const FeatureMap m = ramp(2, 4, 4);
  o.check((warp(m, FlowField::zeros(4, 4)).values == m.values).all(), "zero flow");
  double shift = 0, mid = 0;
  const FeatureMap right = warp(m, FlowField::constant(4, 4, 1.0, 0.0));
  const FeatureMap half = warp(m, FlowField::constant(4, 4, 0.5, 0.5));
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) {
        shift = std::max(shift, std::abs(right.at(c, y, x) - m.at(c, y, std::min(x + 1, 3))));
        if (x < 3 && y < 3) {
          const double avg = (m.at(c, y, x) + m.at(c, y, x + 1) + m.at(c, y + 1, x) + m.at(c, y + 1, x + 1)) / 4;
          mid = std::max(mid, std::abs(half.at(c, y, x) - avg));
        }
      }
  FlowField f = FlowField::zeros(4, 4);
  f.displacement = testutil::random_array(32, 3, 1.3);
  const FeatureMap b = ramp(2, 4, 4, 5.0);
  const FeatureMap combo{m.shape, 2.5 * m.values - 0.75 * b.values};
  const double lin = (warp(combo, f).values - (2.5 * warp(m, f).values - 0.75 * warp(b, f).values)).abs().maxCoeff();
  o.detail << "shift " << shift << ", midpoint " << mid << ", linearity " << lin;
  o.check(shift < 1e-6, "shift");
  o.check(mid < 1e-6, "midpoint");
  o.check(lin < 1e-12, "linearity");
}

// 7: finite-difference gradients
void gradient_checks(Outcome& o) {
  using testutil::gradient_error;
  using testutil::random_array;
  using testutil::weighted_sum;
  const double e_adain = gradient_error(
      [](const std::vector<ad::Var>& p) { return weighted_sum(ad::adain(p[0], p[1], p[2], 1e-5)); },
      {random_array(32, 1), random_array(2, 2), random_array(2, 3)}, {{2, 4, 4}, {2}, {2}});

  ad::Array flow = random_array(32, 5, 0.6);
  for (auto& v : flow) v = std::floor(v) + 0.25 + 0.5 * (v - std::floor(v));
  const double e_warp = gradient_error(
      [](const std::vector<ad::Var>& p) { return weighted_sum(ad::warp(p[0], p[1])); },
      {random_array(32, 4), flow}, {{2, 4, 4}, {4, 4, 2}});

  StyleAConfig sc;
  sc.resolution = 32;
  sc.channels = 2;
  sc.style_dim = 8;
  Refiner refiner(sc, 3);
  ad::Array rp = refiner.params().flatten();
  rp += random_array(rp.size(), 4, 0.3);
  refiner.params().assign(rp);
  const double e_refine = gradient_error(
      [&](const std::vector<ad::Var>& p) { return weighted_sum(refiner.forward(p[0], p[1])); },
      {random_array(32, 6), random_array(32, 7)}, {{2, 4, 4}, {2, 4, 4}});

  const NoiseSchedule s = make_schedule(10, ScheduleKind::kLinear);
  DiffusionBatch batch;
  for (int b = 0; b < 2; ++b) {
    batch.clean.push_back(normal_matrix(4, 3, 10 + b));
    batch.noise.push_back(normal_matrix(4, 3, 20 + b));
    batch.t.push_back(3 + 4 * b);
  }
  const ConditionVector cond = plain_condition(4, 1, 1, 1);
  const double e_loss = gradient_error(
      [&](const std::vector<ad::Var>& p) {
        const DenoiseFn fn = [&](const ad::Var& x, const ConditionVector&, int t) {
          return ad::add_row_bias(ad::matmul(ad::tanh(x), p[0]), ad::scale(p[1], 1.0 / t));
        };
        return training_loss(fn, batch, {cond, cond}, s);
      },
      {random_array(9, 30), random_array(3, 31)}, {{3, 3}, {3}});
  o.detail << "adain " << e_adain << ", warp " << e_warp << ", refine " << e_refine << ", training_loss "
           << e_loss;
  o.check(std::max({e_adain, e_warp, e_refine, e_loss}) < 1e-4, "relative error above 1e-4");
}

// 8: zero-init contracts
void zero_init(Outcome& o) {
  StyleAConfig c;
  c.resolution = 32;
  c.channels = 8;
  c.style_dim = 16;
  const MotionGenerator g(c, 9);
  SynthFaceParams p;
  p.mouth_open = 0.8;
  const FlowField f = g.flow(render_synthetic_frame(p, 32), Eigen::VectorXd::LinSpaced(c.d_exp, -1, 1));
  o.check((f.displacement == 0.0).all(), "motion generator flow");
  const Generator gen(c, 1);
  const StyleCode wi{RowMatrixX<double>::Random(c.num_layers(), c.style_dim)};
  const StyleCode ws{RowMatrixX<double>::Random(c.num_layers(), c.style_dim)};
  o.check(gen.modres_merge(wi, ws, 1.0).values == wi.values, "ModRes");
  const Refiner r(c, 2);
  const FeatureMap m = ramp(c.channels, 8, 8), ctx = ramp(c.channels, 8, 8, 3.0);
  o.check((r.refine(m, ctx).values == m.values).all(), "refiner");
  o.detail << "max |flow| " << f.displacement.abs().maxCoeff();
}

// 9: frozen inversion weights
void frozen_weights(Outcome& o) {
  testutil::TempDir dir("accept_frozen");
  const RunConfig c = toy_config({{"style_a", {{"steps", 100}, {"pretrain_steps", 20}}}});
  synth_data(dir / "corpus", c.corpus, c.seed);
  pretrain_inversion(c, dir / "corpus", dir / "pre");
  StyleAModel reference(c.style_a.model, 0);
  load_groups(dir / "pre", read_manifest(dir / "pre"),
              {{"style_encoder", &reference.style_encoder().params()},
               {"generator", &reference.generator().params()}});
  const TrainResult r = train_style_a(c, dir / "corpus", dir / "pre", dir / "a");
  const LoadedStyleA trained = load_style_a(dir / "a");
  const auto es0 = reference.style_encoder().params().hash(), g0 = reference.generator().params().hash();
  const auto es1 = trained.model->style_encoder().params().hash(), g1 = trained.model->generator().params().hash();
  o.detail << "steps " << r.losses.size() << ", E_s " << std::hex << es0 << "/" << es1 << ", G " << g0 << "/"
           << g1 << std::dec;
  o.check(r.losses.size() == 100, "step count");
  o.check(es0 == es1 && g0 == g1, "hash changed");
  o.check(r.frozen_before == r.frozen_after, "in-run hashes");
}

// 10: skip and refiner ablations, one paired comparison per seed
void ablations(Outcome& o) {
  for (int seed : {3, 5, 7}) {
    testutil::TempDir dir("accept_ablation");
    const RunConfig full = toy_config({{"seed", seed},
                                       {"corpus", {{"num_videos", 6}, {"frames_per_video", 16}}},
                                       {"style_a", {{"steps", 300}, {"pretrain_steps", 150}, {"lr", 3e-3}}}});
    synth_data(dir / "corpus", full.corpus, full.seed);
    pretrain_inversion(full, dir / "corpus", dir / "pre");
    RunConfig noskip = full, norefine = full;
    noskip.style_a.model.use_skips = false;
    norefine.style_a.model.use_refine = false;
    const double l_full = train_style_a(full, dir / "corpus", dir / "pre", dir / "full").heldout_rec;
    const double l_noskip = train_style_a(noskip, dir / "corpus", dir / "pre", dir / "noskip").heldout_rec;
    const double l_norefine = train_style_a(norefine, dir / "corpus", dir / "pre", dir / "norefine").heldout_rec;
    o.detail << "seed " << seed << ": full " << l_full << ", w/o skips " << l_noskip << ", w/o R " << l_norefine
             << "; ";
    o.check(l_noskip > l_full, "skips, seed " + std::to_string(seed));
    o.check(l_norefine > l_full, "refiner, seed " + std::to_string(seed));
  }
}

// 11: annotation pipeline
void annotation(Outcome& o) {
  testutil::TempDir dir("accept_annotation");
  const RunConfig c = toy_config({{"corpus", {{"num_videos", 8}}}});
  synth_data(dir / "corpus", c.corpus, c.seed);
  run_annotation(c, dir / "corpus", dir / "a");
  run_annotation(c, dir / "corpus", dir / "b");
  const CorpusInfo info = read_corpus_info(dir / "corpus");
  const auto records = load_records(dir / "a" / "records", info.video_ids);
  const MockTextEncoder text(c.annotation.pipeline.embed_dim);
  const MockImageEncoder image(c.annotation.pipeline.embed_dim);
  int identical = 0, oracle_ok = 0;
  for (std::size_t v = 0; v < records.size(); ++v) {
    const auto& id = info.video_ids[v];
    const auto& rec = records[v];
    o.check(rec.candidates.size() == 5, id + " has " + std::to_string(rec.candidates.size()) + " candidates");
    identical += testutil::slurp(dir / "a" / "records" / (id + ".json")) ==
                 testutil::slurp(dir / "b" / "records" / (id + ".json"));

    const VideoSample video = load_video(dir / "corpus", id, info, true);
    const auto levels = activate_and_level(read_au_intensities(dir / "corpus" / id / "aus.json"),
                                           c.annotation.pipeline.leveling);
    const auto all = generate_candidates(id, video.emotion, levels, MockLLMClient(), c.annotation.pipeline.candidates,
                                         c.annotation.pipeline.seed);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(c.annotation.pipeline.embed_dim);
    for (const auto& f : video.frames) mean += image.encode(f);
    mean /= static_cast<double>(video.frames.size());
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& s : all) {
      const Eigen::VectorXd t = text.encode(s);
      scored.push_back({t.dot(mean) / (t.norm() * mean.norm()), s});
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    bool match = rec.candidates.size() == 5;
    for (std::size_t i = 0; match && i < 5; ++i) {
      match = rec.candidates[i].text == scored[i].second && std::abs(rec.candidates[i].score - scored[i].first) < 1e-12;
    }
    oracle_ok += match;
  }
  o.check(identical == static_cast<int>(records.size()), "re-run differs");
  o.check(oracle_ok == static_cast<int>(records.size()), "top-5 differs from sort oracle");

  const int draws = 100000;
  const double p = 0.2, sigma = std::sqrt(draws * p * (1 - p));
  Rng rng(2024);
  std::map<std::string, int> counts;
  for (int i = 0; i < draws; ++i) ++counts[sample_training_text(records[0], rng)];
  double worst = 0;
  for (const auto& [s, n] : counts) worst = std::max(worst, std::abs(n - draws * p) / sigma);
  o.check(counts.size() == 5, "sampled texts");
  o.check(worst < 3.0, "sampling beyond 3 sigma");
  o.detail << records.size() << " records, identical " << identical << ", oracle matches " << oracle_ok
           << ", max sampling deviation " << worst << " sigma";
}

// 12: metrics
void metrics(Outcome& o) {
  auto random_frame = [](int h, int w, std::uint64_t seed) {
    Frame f{h, w, ArrayX<double>(3 * h * w), {}};
    Rng rng(seed);
    for (auto& v : f.pixels) v = uniform(rng);
    return f;
  };
  double self = 0, ssim_err = 0, lmd_err = 0;
  for (int k = 0; k < 4; ++k) {
    const int h = 8 + 5 * k, w = 12 + 3 * k;
    const Frame a = random_frame(h, w, 10 + k), b = random_frame(h, w, 20 + k);
    self = std::max(self, std::abs(ssim(a, a) - 1.0));
    ssim_err = std::max(ssim_err, std::abs(ssim(a, b) - oracle::ssim(a, b)));
    Rng rng(30 + k);
    Landmarks la(landmarks::kCount), lb(landmarks::kCount);
    for (int i = 0; i < landmarks::kCount; ++i) {
      la[i] = {uniform(rng, 0, 32), uniform(rng, 0, 32)};
      lb[i] = {uniform(rng, 0, 32), uniform(rng, 0, 32)};
    }
    lmd_err = std::max({lmd_err,
                        std::abs(lmd(la, lb, LandmarkSubset::kMouth) -
                                 oracle::lmd(la, lb, landmarks::kMouthBegin, landmarks::kMouthCount)),
                        std::abs(lmd(la, lb, LandmarkSubset::kFace) - oracle::lmd(la, lb, 0, landmarks::kCount))});
  }
  const Landmarks zero(landmarks::kCount, Eigen::Vector2d::Zero());
  const Landmarks far(landmarks::kCount, Eigen::Vector2d(3.0, 4.0));
  const double m345 = lmd(zero, far, LandmarkSubset::kMouth), f345 = lmd(zero, far, LandmarkSubset::kFace);
  o.detail << "|ssim(a,a)-1| " << self << ", ssim vs oracle " << ssim_err << ", lmd vs oracle " << lmd_err
           << ", 3-4-5 -> " << m345 << "/" << f345;
  o.check(self < 1e-9, "self similarity");
  o.check(ssim_err < 1e-9, "ssim oracle");
  o.check(lmd_err < 1e-9, "lmd oracle");
  o.check(m345 == 5.0 && f345 == 5.0, "3-4-5");
}

// 13: end-to-end generation
void end_to_end(Outcome& o) {
  testutil::TempDir dir("accept_e2e");
  const RunConfig c = toy_config({{"corpus", {{"num_videos", 6}, {"frames_per_video", 16}}},
                                  {"style_e", {{"steps", 300}}},
                                  {"style_a", {{"steps", 100}, {"pretrain_steps", 100}}}});
  synth_data(dir / "corpus", c.corpus, c.seed);
  run_annotation(c, dir / "corpus", dir / "ann");
  train_style_e(c, dir / "corpus", dir / "ann" / "records", dir / "e");
  pretrain_inversion(c, dir / "corpus", dir / "pre");
  train_style_a(c, dir / "corpus", dir / "pre", dir / "a");

  const CorpusInfo info = read_corpus_info(dir / "corpus");
  const VideoSample v = load_video(dir / "corpus", info.video_ids.back(), info, true);
  GenerationInputs in;
  in.identity = v.frames[0];
  in.audio = v.audio;
  in.art = io::read_png(ArtStyle::load(dir / "corpus" / "art_style.json").reference_image);
  in.text = "a joyful face, cheeks raised and lip corners pulled up";
  const auto happy1 = generate(in, dir / "e", dir / "a", 21);
  const auto happy2 = generate(in, dir / "e", dir / "a", 21);
  write_generation(dir / "g1", happy1);
  write_generation(dir / "g2", happy2);
  const int n = c.corpus.frames_per_video, res = c.corpus.resolution;
  bool shapes = static_cast<int>(happy1.frames.size()) == n;
  for (const auto& f : happy1.frames) shapes = shapes && f.height == res && f.width == res;
  bool identical = testutil::slurp(dir / "g1" / "coeffs.bin") == testutil::slurp(dir / "g2" / "coeffs.bin");
  for (int i = 0; i < n; ++i) {
    const fs::path f = fs::path("frames") / io::frame_filename(i);
    identical = identical && fs::exists(dir / "g1" / f) && testutil::slurp(dir / "g1" / f) == testutil::slurp(dir / "g2" / f);
  }
  in.text = "a sorrowful face, inner brows raised and lip corners pulled down";
  const auto sad = generate(in, dir / "e", dir / "a", 21);

  const int d_exp = c.style_e.denoiser.d_exp;
  const Landmarks neutral = face_landmarks(coeffs_to_params(Eigen::VectorXd::Zero(d_exp), d_exp), res);
  auto f_lmd = [&](const GenerationResult& g) {
    std::vector<Landmarks> pred, ref;
    for (int i = 0; i < g.coeffs.rows(); ++i) {
      pred.push_back(face_landmarks(coeffs_to_params(g.coeffs.row(i), d_exp), res));
      ref.push_back(neutral);
    }
    return lmd(pred, ref, LandmarkSubset::kFace);
  };
  const double a = f_lmd(happy1), b = f_lmd(sad);
  o.detail << n << " frames at " << res << "px, denoiser calls " << happy1.denoiser_calls
           << ", F-LMD vs neutral " << a << " / " << b << ", difference " << std::abs(a - b);
  o.check(shapes, "frame count or shape");
  o.check(identical, "seeded runs differ");
  o.check(std::abs(a - b) > 0.0, "emotion texts indistinguishable");
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "diffusion marginal", 5, diffusion_marginal},
      {2, "DDIM oracle fixed point", 5, ddim_fixed_point},
      {3, "5-step sampling efficiency", 30, sampling_efficiency},
      {4, "stage E overfit", 180, stage_e_overfit},
      {5, "AdaIN invariants", 1, adain_invariants},
      {6, "warp invariants", 1, warp_invariants},
      {7, "gradient checks", 30, gradient_checks},
      {8, "zero-init contracts", 1, zero_init},
      {9, "frozen E_s and G", 120, frozen_weights},
      {10, "skip and refiner ablations", 600, ablations},
      {11, "annotation pipeline", 30, annotation},
      {12, "metrics", 5, metrics},
      {13, "end-to-end generate", 300, end_to_end},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    const auto start = Clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double elapsed = seconds_since(start);
    if (elapsed >= c.limit_s) o.check(false, "over time limit");
    failures += !o.pass;
    std::printf("criterion %2d %-28s %s  %7.2fs / %4.0fs  %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", elapsed,
                c.limit_s, o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failures;
}
