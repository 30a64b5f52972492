#include "facestyle/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "facestyle/io.hpp"
#include "facestyle/losses.hpp"
#include "facestyle/random.hpp"

namespace facestyle {

using Json = nlohmann::json;

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void log_line(std::ostream* out, const Json& j) {
  if (out) *out << j.dump() << '\n' << std::flush;
}

int final_step(int configured, const TrainOptions& options) {
  if (options.stop_after >= 0) return std::min(configured, options.stop_after);
  return configured;
}

std::vector<std::string> select_videos(const CorpusInfo& info, const TrainOptions& options) {
  if (options.videos.empty()) return info.video_ids;
  for (const auto& id : options.videos) {
    if (std::find(info.video_ids.begin(), info.video_ids.end(), id) == info.video_ids.end()) {
      throw DataError("video '" + id + "' is not in the corpus");
    }
  }
  return options.videos;
}

Eigen::MatrixXd coeffs_double(const CoeffMatrix& m) { return m.cast<double>(); }

Frame load_art_frame(const fs::path& corpus_dir) {
  const ArtStyle art = ArtStyle::load(corpus_dir / "art_style.json");
  return io::read_png(art.reference_image);
}

double cosine_lr(double base, int step, int total) {
  if (total <= 1) return base;
  const double progress = std::clamp(static_cast<double>(step) / total, 0.0, 1.0);
  return base * (0.1 + 0.9 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

Json clients_json(const RunConfig& config) {
  return {{"text", to_json(config.text_client)},
          {"image", to_json(config.image_client)},
          {"audio", to_json(config.audio_client)}};
}

ClientRegistry clients_from_json(const Json& j) {
  ClientRegistry r;
  for (const char* key : {"text", "image", "audio"}) r.add(make_client(client_config_from_json(j.at(key))));
  return r;
}

}  // namespace

std::vector<VideoSample> synth_data(const fs::path& out_dir, const CorpusConfig& corpus,
                                    std::uint64_t seed) {
  CorpusOptions options;
  options.resolution = corpus.resolution;
  options.fps = corpus.fps;
  options.art_palette = corpus.art_palette;
  auto videos = generate_corpus(corpus.num_videos, corpus.frames_per_video, seed, options);
  write_corpus(out_dir, videos, options);
  return videos;
}

AnnotationSummary run_annotation(const RunConfig& config, const fs::path& corpus_dir,
                                 const fs::path& out_dir) {
  std::unique_ptr<LLMClient> llm;
  if (config.annotation.llm_backend == "http") {
    llm = std::make_unique<HttpLLMClient>(config.annotation.llm_endpoint);
  } else {
    llm = std::make_unique<MockLLMClient>();
  }
  if (config.text_client.backend == "http" || config.image_client.backend == "http") {
    const ClientRegistry r = config.clients();
    return annotate_corpus(corpus_dir, out_dir, config.annotation.pipeline, *llm, r.text(), r.image());
  }
  const int dim = config.annotation.pipeline.embed_dim;
  return annotate_corpus(corpus_dir, out_dir, config.annotation.pipeline, *llm,
                         MockTextEncoder(dim), MockImageEncoder(dim));
}

Json style_e_model_json(const RunConfig& config) {
  Json j = config.style_e.model_json();
  j["clients"] = clients_json(config);
  return j;
}

Json inversion_model_json(const StyleAConfig& c) {
  return {{"resolution", c.resolution},
          {"channels", c.channels},
          {"style_dim", c.style_dim},
          {"layers", c.num_layers()},
          {"blend", c.blend},
          {"eps", c.eps}};
}

// ---------------------------------------------------------------- stage E

TrainResult train_style_e(const RunConfig& config, const fs::path& corpus_dir,
                          const fs::path& records_dir, const fs::path& out_dir,
                          const TrainOptions& options) {
  config.validate();
  const StyleEConfig& ec = config.style_e;
  const CorpusInfo info = read_corpus_info(corpus_dir);
  const std::vector<std::string> ids = select_videos(info, options);
  const std::vector<EmotionTextRecord> records = load_records(records_dir, ids);
  const ClientRegistry clients = config.clients();
  const NoiseSchedule schedule = ec.make_schedule();

  struct Item {
    Eigen::MatrixXd coeffs;
    EmotionTextRecord record;
    std::vector<ConditionVector> conditions;  // one per retained sentence
  };
  std::vector<Item> items;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    VideoSample v = load_video(corpus_dir, ids[i], info, false);
    if (v.sequence.frames() != ec.denoiser.sequence_length || v.sequence.dim() != ec.denoiser.d_exp) {
      throw DataError("video '" + ids[i] + "' is " + std::to_string(v.sequence.frames()) + "x" +
                      std::to_string(v.sequence.dim()) + ", denoiser expects " +
                      std::to_string(ec.denoiser.sequence_length) + "x" +
                      std::to_string(ec.denoiser.d_exp));
    }
    const Frame identity = io::read_png(corpus_dir / ids[i] / "frames" / io::frame_filename(0));
    const Eigen::VectorXd id_emb = clients.image().encode(identity);
    const Eigen::MatrixXd audio_emb = clients.audio().encode(v.audio);
    Item item{coeffs_double(v.sequence.values), records[i], {}};
    for (const auto& c : item.record.candidates) {
      item.conditions.push_back(assemble_condition(clients.text().encode(c.text), id_emb, audio_emb));
    }
    items.push_back(std::move(item));
  }
  if (items.empty()) throw DataError("no training videos");

  Denoiser denoiser(ec.denoiser, derive_seed(config.seed, fnv1a64("denoiser")));
  nn::Adam adam({&denoiser.params()}, {.lr = ec.lr});

  CheckpointManifest manifest;
  manifest.stage = "E";
  manifest.phase = "train";
  manifest.model = style_e_model_json(config);
  manifest.config_hash = config_hash(manifest.model);
  manifest.schedule = schedule.descriptor();
  manifest.extra = {{"seed", config.seed}, {"videos", ids}};

  int start = 0;
  if (options.resume && has_checkpoint(out_dir)) {
    const CheckpointManifest prev = read_manifest(out_dir);
    check_manifest(prev, "E", manifest.config_hash, options.allow_config_mismatch);
    load_groups(out_dir, prev, {{"denoiser", &denoiser.params()}});
    adam.load_state(load_optimizer(out_dir, prev, "denoiser"));
    start = static_cast<int>(prev.step);
  }

  auto save = [&](int step) {
    manifest.step = step;
    save_checkpoint(out_dir, manifest, {{"denoiser", &denoiser.params()}}, {{"denoiser", adam.state()}});
  };

  TrainResult result;
  const int last = final_step(ec.steps, options);
  const DenoiseFn fn = denoiser.as_function();
  const Stopwatch clock;
  for (int step = start; step < last; ++step) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(step)));
    std::uniform_int_distribution<int> pick_video(0, static_cast<int>(items.size()) - 1);
    std::uniform_int_distribution<int> pick_t(1, schedule.steps());
    std::uniform_int_distribution<int> pick_text(0, kRetainedCandidates - 1);
    DiffusionBatch batch;
    std::vector<ConditionVector> conds;
    for (int b = 0; b < ec.batch_size; ++b) {
      const Item& item = items[pick_video(rng)];
      batch.t.push_back(pick_t(rng));
      Eigen::MatrixXd noise(item.coeffs.rows(), item.coeffs.cols());
      for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = normal(rng);
      batch.noise.push_back(std::move(noise));
      batch.clean.push_back(item.coeffs);
      conds.push_back(item.conditions[pick_text(rng)]);
    }
    const double lr = ec.cosine_decay ? cosine_lr(ec.lr, step, ec.steps) : ec.lr;
    adam.set_lr(lr);
    const ad::Var loss = training_loss(fn, batch, conds, schedule);
    const double value = loss.item();
    if (!std::isfinite(value)) throw NumericError("stage E loss is not finite at step " + std::to_string(step));
    loss.backward();
    adam.step();
    result.losses.push_back(value);
    const int done = step + 1;
    if (ec.log_every > 0 && (done % ec.log_every == 0 || done == last)) {
      log_line(options.log, {{"stage", "E"}, {"step", done}, {"loss", value}, {"lr", lr},
                             {"elapsed_s", clock.seconds()}});
    }
    if (ec.checkpoint_every > 0 && done % ec.checkpoint_every == 0 && done != last) save(done);
  }
  save(std::max(last, start));
  result.manifest = manifest;
  return result;
}

// ---------------------------------------------------------------- stage A

namespace {

struct StyleAVideo {
  std::string id;
  Frame identity;
  Eigen::MatrixXd coeffs;
  std::vector<Frame> natural;
  std::vector<Frame> targets;
  int train_frames = 0;
};

std::vector<StyleAVideo> load_style_a_videos(const fs::path& corpus_dir, const CorpusInfo& info,
                                             const std::vector<std::string>& ids,
                                             const StyleATrainConfig& config) {
  if (info.resolution != config.model.resolution) {
    throw ConfigError("corpus resolution " + std::to_string(info.resolution) +
                      " differs from the model resolution " + std::to_string(config.model.resolution));
  }
  std::vector<StyleAVideo> out;
  for (const auto& id : ids) {
    VideoSample v = load_video(corpus_dir, id, info, true);
    const int n = v.sequence.frames();
    if (v.styled.size() != static_cast<std::size_t>(n)) throw DataError("'" + id + "' lacks styled targets");
    const int held = config.holdout_fraction > 0
                         ? std::max(1, static_cast<int>(std::lround(n * config.holdout_fraction)))
                         : 0;
    if (held >= n) throw ConfigError("holdout fraction leaves no training frames");
    StyleAVideo s{id, v.frames[0], coeffs_double(v.sequence.values), std::move(v.frames),
                  std::move(v.styled), n - held};
    out.push_back(std::move(s));
  }
  if (out.empty()) throw DataError("no training videos");
  return out;
}

ad::Var coeff_row(const Eigen::MatrixXd& coeffs, int n) {
  return ad::Var::constant(coeffs.row(n).transpose().array(), {1, static_cast<int>(coeffs.cols())});
}

std::map<std::string, std::uint64_t> inversion_hashes(const StyleAModel& model) {
  return {{"style_encoder", model.style_encoder().params().hash()},
          {"generator", model.generator().params().hash()}};
}

Json hashes_json(const std::map<std::string, std::uint64_t>& h) {
  Json j = Json::object();
  for (const auto& [k, v] : h) j[k] = std::to_string(v);
  return j;
}

}  // namespace

TrainResult pretrain_inversion(const RunConfig& config, const fs::path& corpus_dir,
                               const fs::path& out_dir, const TrainOptions& options) {
  config.validate();
  const StyleATrainConfig& ac = config.style_a;
  const CorpusInfo info = read_corpus_info(corpus_dir);
  const auto videos = load_style_a_videos(corpus_dir, info, select_videos(info, options), ac);
  const Frame art = load_art_frame(corpus_dir);
  const auto backbone = fixed_random_backbone(ac.backbone_seed, ac.backbone_depth);

  StyleAModel model(ac.model, derive_seed(config.seed, fnv1a64("style_a")));
  nn::Adam adam({&model.style_encoder().params(), &model.generator().params()},
                {.lr = ac.pretrain_lr, .clip_norm = ac.clip_norm});
  const ParamGroups groups = {{"style_encoder", &model.style_encoder().params()},
                              {"generator", &model.generator().params()}};

  CheckpointManifest manifest;
  manifest.stage = "A";
  manifest.phase = "pretrain";
  manifest.model = inversion_model_json(ac.model);
  manifest.config_hash = config_hash(manifest.model);
  manifest.extra = {{"seed", config.seed}};

  int start = 0;
  if (options.resume && has_checkpoint(out_dir)) {
    const CheckpointManifest prev = read_manifest(out_dir);
    check_manifest(prev, "A", manifest.config_hash, options.allow_config_mismatch);
    if (prev.phase != "pretrain") throw ConfigError("checkpoint in " + out_dir.string() + " is not a pretrain checkpoint");
    load_groups(out_dir, prev, groups);
    adam.load_state(load_optimizer(out_dir, prev, "inversion"));
    start = static_cast<int>(prev.step);
  }
  auto save = [&](int step) {
    manifest.step = step;
    save_checkpoint(out_dir, manifest, groups, {{"inversion", adam.state()}});
  };

  TrainResult result;
  const int last = final_step(ac.pretrain_steps, options);
  const ad::Var art_img = image_var(art);
  const Stopwatch clock;
  for (int step = start; step < last; ++step) {
    Rng rng(derive_seed(derive_seed(config.seed, fnv1a64("pretrain")), static_cast<std::uint64_t>(step)));
    std::uniform_int_distribution<int> pick_video(0, static_cast<int>(videos.size()) - 1);
    const ad::Var w_s = model.style_encoder().forward(art_img);
    ad::Var total;
    double rec = 0.0;
    for (int f = 0; f < ac.frames_per_step; ++f) {
      const StyleAVideo& v = videos[pick_video(rng)];
      const int n = std::uniform_int_distribution<int>(0, v.train_frames - 1)(rng);
      const ad::Var x = image_var(v.natural[n]);
      const ad::Var w_i = model.style_encoder().forward(x);
      const Style2Loss natural = style2_loss(model.generator().synthesize(w_i), x, *backbone, ac.lambda);
      const Style2Loss styled = style2_loss(
          model.generator().synthesize(model.generator().modres(w_i, w_s, ac.model.blend)),
          image_var(v.targets[n]), *backbone, ac.lambda);
      const ad::Var l = natural.total + styled.total;
      rec += styled.rec.item();
      total = total.defined() ? total + l : l;
    }
    total = ad::scale(total, 1.0 / ac.frames_per_step);
    const double value = total.item();
    if (!std::isfinite(value)) throw NumericError("inversion loss is not finite at step " + std::to_string(step));
    adam.set_lr(cosine_lr(ac.pretrain_lr, step, ac.pretrain_steps));
    total.backward();
    const double grad_norm = adam.step();
    result.losses.push_back(value);
    const int done = step + 1;
    if (ac.log_every > 0 && (done % ac.log_every == 0 || done == last)) {
      log_line(options.log, {{"stage", "A"}, {"phase", "pretrain"}, {"step", done}, {"loss", value},
                             {"rec_styled", rec / ac.frames_per_step}, {"grad_norm", grad_norm},
                             {"elapsed_s", clock.seconds()}});
    }
    if (ac.checkpoint_every > 0 && done % ac.checkpoint_every == 0 && done != last) save(done);
  }
  save(std::max(last, start));
  result.manifest = manifest;
  return result;
}

namespace {

// Mean RMS pixel error over the selected frames of every video.
double mean_rec(const StyleAModel& model, const std::vector<StyleAVideo>& videos,
                const std::vector<ad::Var>& styles, bool heldout) {
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    const StyleAVideo& v = videos[i];
    const auto prepared = model.prepare(v.identity, styles[i]);
    const int begin = heldout ? v.train_frames : 0;
    const int end = heldout ? static_cast<int>(v.targets.size()) : v.train_frames;
    for (int n = begin; n < end; ++n) {
      const ad::Var pred = model.render(prepared, coeff_row(v.coeffs, n));
      sum += reconstruction_loss(ad::detach(pred), image_var(v.targets[n])).item();
      ++count;
    }
  }
  return count ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

TrainResult train_style_a(const RunConfig& config, const fs::path& corpus_dir,
                          const fs::path& pretrain_dir, const fs::path& out_dir,
                          const TrainOptions& options) {
  config.validate();
  const StyleATrainConfig& ac = config.style_a;
  const CorpusInfo info = read_corpus_info(corpus_dir);
  const auto videos = load_style_a_videos(corpus_dir, info, select_videos(info, options), ac);
  const Frame art = load_art_frame(corpus_dir);
  const auto backbone = fixed_random_backbone(ac.backbone_seed, ac.backbone_depth);

  StyleAModel model(ac.model, derive_seed(config.seed, fnv1a64("style_a")));
  const CheckpointManifest pre = read_manifest(pretrain_dir);
  check_manifest(pre, "A", config_hash(inversion_model_json(ac.model)), options.allow_config_mismatch);
  if (pre.phase != "pretrain") throw ConfigError(pretrain_dir.string() + " is not a pretrain checkpoint");
  load_groups(pretrain_dir, pre,
              {{"style_encoder", &model.style_encoder().params()}, {"generator", &model.generator().params()}});
  model.freeze_inversion();

  std::vector<const nn::ParamStore*> trainable = {&model.content_encoder().params(),
                                                  &model.motion_generator().params()};
  if (ac.model.use_refine) trainable.push_back(&model.refiner().params());
  nn::Adam adam(trainable, {.lr = ac.lr, .clip_norm = ac.clip_norm});
  nn::Adam disc_adam({&model.discriminator().params()}, {.lr = ac.disc_lr, .clip_norm = ac.clip_norm});

  CheckpointManifest manifest;
  manifest.stage = "A";
  manifest.phase = "train";
  manifest.model = ac.model_json();
  manifest.config_hash = config_hash(manifest.model);

  int start = 0;
  if (options.resume && has_checkpoint(out_dir)) {
    const CheckpointManifest prev = read_manifest(out_dir);
    check_manifest(prev, "A", manifest.config_hash, options.allow_config_mismatch);
    if (prev.phase != "train") throw ConfigError(out_dir.string() + " is not a stage A training checkpoint");
    load_groups(out_dir, prev, model.groups());
    adam.load_state(load_optimizer(out_dir, prev, "generator_side"));
    disc_adam.load_state(load_optimizer(out_dir, prev, "discriminator"));
    start = static_cast<int>(prev.step);
  }

  TrainResult result;
  result.frozen_before = inversion_hashes(model);
  auto check_frozen = [&]() {
    result.frozen_after = inversion_hashes(model);
    if (result.frozen_after != result.frozen_before) {
      throw InvariantError("frozen style encoder or generator changed during stage A training");
    }
  };
  auto save = [&](int step) {
    check_frozen();
    manifest.step = step;
    manifest.extra = {{"seed", config.seed},
                      {"pretrain_hash", pre.config_hash},
                      {"frozen_hashes", hashes_json(result.frozen_before)}};
    if (std::isfinite(result.heldout_rec)) manifest.extra["heldout_rec"] = result.heldout_rec;
    save_checkpoint(out_dir, manifest, model.groups(),
                    {{"generator_side", adam.state()}, {"discriminator", disc_adam.state()}});
  };

  // E_s and G are frozen, so each video's merged style is a constant.
  std::vector<ad::Var> styles;
  for (const auto& v : videos) styles.push_back(ad::detach(model.merged_style(v.identity, art)));

  const DiscriminatorFn disc = [&](const ad::Var& x) { return model.discriminator().forward(x); };
  const int last = final_step(ac.steps, options);
  const Stopwatch clock;
  for (int step = start; step < last; ++step) {
    Rng rng(derive_seed(derive_seed(config.seed, fnv1a64("stage_a")), static_cast<std::uint64_t>(step)));
    std::uniform_int_distribution<int> pick_video(0, static_cast<int>(videos.size()) - 1);
    std::map<int, StyleAModel::Prepared> prepared;
    ad::Var gen_total, disc_total;
    double rec = 0.0, prec = 0.0, adv_gen = 0.0, adv_disc = 0.0;
    for (int f = 0; f < ac.frames_per_step; ++f) {
      const int vi = pick_video(rng);
      const StyleAVideo& v = videos[vi];
      const int n = std::uniform_int_distribution<int>(0, v.train_frames - 1)(rng);
      auto it = prepared.find(vi);
      if (it == prepared.end()) it = prepared.emplace(vi, model.prepare(v.identity, styles[vi])).first;
      const ad::Var pred = model.render(it->second, coeff_row(v.coeffs, n));
      const ad::Var target = image_var(v.targets[n]);
      const Style2Loss l = style2_loss(pred, target, *backbone, ac.lambda);
      ad::Var g = l.total;
      rec += l.rec.item();
      prec += l.prec.item();
      if (ac.adv_weight > 0) {
        const AdversarialLoss adv = adversarial_losses(disc, target, pred);
        g = g + ad::scale(adv.gen, ac.adv_weight);
        adv_gen += adv.gen.item();
        adv_disc += adv.disc.item();
        disc_total = disc_total.defined() ? disc_total + adv.disc : adv.disc;
      }
      gen_total = gen_total.defined() ? gen_total + g : g;
    }
    const double k = 1.0 / ac.frames_per_step;
    gen_total = ad::scale(gen_total, k);
    const double value = gen_total.item();
    if (!std::isfinite(value)) throw NumericError("stage A loss is not finite at step " + std::to_string(step));
    adam.set_lr(cosine_lr(ac.lr, step, ac.steps));
    gen_total.backward();
    const double grad_norm = adam.step();
    if (disc_total.defined()) {
      model.discriminator().params().zero_grad();
      ad::scale(disc_total, k).backward();
      disc_adam.step();
    }
    result.losses.push_back(value);
    const int done = step + 1;
    if (ac.log_every > 0 && (done % ac.log_every == 0 || done == last)) {
      log_line(options.log, {{"stage", "A"}, {"phase", "train"}, {"step", done}, {"total", value},
                             {"rec", rec * k}, {"prec", prec * k}, {"adv_gen", adv_gen * k},
                             {"adv_disc", adv_disc * k}, {"grad_norm", grad_norm},
                             {"elapsed_s", clock.seconds()}});
    }
    if (ac.checkpoint_every > 0 && done % ac.checkpoint_every == 0 && done != last) save(done);
  }
  result.heldout_rec = mean_rec(model, videos, styles, true);
  result.train_rec = mean_rec(model, videos, styles, false);
  save(std::max(last, start));
  result.manifest = manifest;
  return result;
}

// ---------------------------------------------------------------- loading

LoadedStyleE load_style_e(const fs::path& dir, const RunConfig* config, bool allow_mismatch) {
  LoadedStyleE out;
  out.manifest = read_manifest(dir);
  if (config) {
    check_manifest(out.manifest, "E", config_hash(style_e_model_json(*config)), allow_mismatch);
  } else {
    check_manifest(out.manifest, "E", out.manifest.config_hash, false);
  }
  const Json& model = out.manifest.model;
  const DenoiserConfig dc = DenoiserConfig::from_json(model.at("denoiser"));
  out.denoiser = std::make_unique<Denoiser>(dc, 0);
  load_groups(dir, out.manifest, {{"denoiser", &out.denoiser->params()}});
  out.schedule = NoiseSchedule::from_descriptor(out.manifest.schedule);
  out.clients = config ? config->clients() : clients_from_json(model.at("clients"));
  return out;
}

LoadedStyleA load_style_a(const fs::path& dir, const RunConfig* config, bool allow_mismatch) {
  LoadedStyleA out;
  out.manifest = read_manifest(dir);
  const std::string expected =
      config ? config_hash(config->style_a.model_json()) : out.manifest.config_hash;
  check_manifest(out.manifest, "A", expected, allow_mismatch);
  if (out.manifest.phase != "train") throw ConfigError(dir.string() + " is not a stage A training checkpoint");
  out.model = std::make_unique<StyleAModel>(StyleAConfig::from_json(out.manifest.model), 0);
  load_groups(dir, out.manifest, out.model->groups());
  out.model->freeze_inversion();
  return out;
}

// ---------------------------------------------------------------- generation

GenerationResult generate(const GenerationInputs& inputs, const LoadedStyleE& style_e,
                          const StyleAModel& style_a, std::uint64_t seed, int num_steps) {
  const DenoiserConfig& dc = style_e.denoiser->config();
  if (inputs.audio.rows() != dc.sequence_length) {
    throw ShapeError("audio has " + std::to_string(inputs.audio.rows()) +
                     " frames, the checkpoint generates " + std::to_string(dc.sequence_length));
  }
  const int res = style_a.config().resolution;
  for (const Frame* f : {&inputs.identity, &inputs.art}) {
    if (f->height != res || f->width != res) {
      throw ShapeError("input image is " + std::to_string(f->height) + "x" + std::to_string(f->width) +
                       ", the model expects " + std::to_string(res) + "x" + std::to_string(res));
    }
  }
  const ConditionVector cond = build_condition(inputs.text, inputs.identity, inputs.audio, style_e.clients);

  GenerationResult out;
  out.fps = inputs.fps;
  const DenoiseFn inner = style_e.denoiser->as_function();
  const DenoiseFn counted = [&](const ad::Var& x, const ConditionVector& c, int t) {
    ++out.denoiser_calls;
    return inner(x, c, t);
  };
  out.coeffs = ddim_sample(counted, cond, style_e.schedule, num_steps, seed, dc.sequence_length, dc.d_exp);

  const auto prepared = style_a.prepare(inputs.identity, inputs.art);
  for (Eigen::Index n = 0; n < out.coeffs.rows(); ++n) {
    const Eigen::VectorXd row = out.coeffs.row(n).transpose();
    Frame frame = style_a.render_frame(prepared, row);
    frame.landmarks = face_landmarks(coeffs_to_params(row, dc.d_exp), res);
    out.frames.push_back(std::move(frame));
  }
  return out;
}

GenerationResult generate(const GenerationInputs& inputs, const fs::path& style_e_dir,
                          const fs::path& style_a_dir, std::uint64_t seed,
                          const GenerateOptions& options) {
  const LoadedStyleE e = load_style_e(style_e_dir, options.config, options.allow_config_mismatch);
  const LoadedStyleA a = load_style_a(style_a_dir, options.config, options.allow_config_mismatch);
  return generate(inputs, e, *a.model, seed, options.num_steps);
}

void write_generation(const fs::path& out_dir, const GenerationResult& result) {
  fs::create_directories(out_dir / "frames");
  Json lms = Json::array();
  for (std::size_t n = 0; n < result.frames.size(); ++n) {
    io::write_png(out_dir / "frames" / io::frame_filename(static_cast<int>(n)), result.frames[n]);
    lms.push_back(io::landmarks_to_json(result.frames[n].landmarks));
  }
  io::write_f32(out_dir / "coeffs.bin", result.coeffs.cast<float>());
  const int res = result.frames.empty() ? 0 : result.frames[0].height;
  io::write_json(out_dir / "index.json", {{"fps", result.fps},
                                          {"N", result.frames.size()},
                                          {"D_exp", result.coeffs.cols()},
                                          {"resolution", res},
                                          {"denoiser_calls", result.denoiser_calls},
                                          {"landmarks", lms}});
}

// ---------------------------------------------------------------- evaluation

namespace {

std::vector<Frame> read_frames(const fs::path& dir, int n, const Json& landmarks) {
  if (landmarks.size() != static_cast<std::size_t>(n)) {
    throw DataError(dir.string() + ": " + std::to_string(landmarks.size()) + " landmark sets for " +
                    std::to_string(n) + " frames");
  }
  std::vector<Frame> frames;
  for (int i = 0; i < n; ++i) {
    const fs::path p = dir / io::frame_filename(i);
    if (!fs::exists(p)) throw DataError("missing frame " + p.string());
    Frame f = io::read_png(p);
    f.landmarks = io::landmarks_from_json(landmarks.at(i));
    frames.push_back(std::move(f));
  }
  return frames;
}

std::vector<Frame> read_reference(const fs::path& dir) {
  fs::path meta = dir / "meta.json";
  if (!fs::exists(meta)) meta = dir / "index.json";
  if (!fs::exists(meta)) throw DataError("no meta.json or index.json in " + dir.string());
  const Json j = io::read_json(meta);
  const int n = j.at("N").get<int>();
  const fs::path frames = fs::exists(dir / "styled") ? dir / "styled" : dir / "frames";
  return read_frames(frames, n, j.at("landmarks"));
}

std::vector<Frame> read_prediction(const fs::path& dir) {
  const Json j = io::read_json(dir / "index.json");
  return read_frames(dir / "frames", j.at("N").get<int>(), j.at("landmarks"));
}

}  // namespace

EvalReport evaluate_dirs(const fs::path& pred_dir, const fs::path& gt_dir) {
  if (!fs::is_directory(pred_dir)) throw DataError("prediction directory " + pred_dir.string() + " not found");
  if (!fs::is_directory(gt_dir)) throw DataError("reference directory " + gt_dir.string() + " not found");
  EvalReport report;
  auto reference_for = [&](const std::string& name) {
    if (fs::exists(gt_dir / "meta.json") || fs::exists(gt_dir / "index.json")) return gt_dir;
    const fs::path p = gt_dir / name;
    if (!fs::is_directory(p)) throw DataError("no reference video '" + name + "' in " + gt_dir.string());
    return p;
  };
  if (fs::exists(pred_dir / "index.json")) {
    const std::string name = pred_dir.filename().string();
    report.add(evaluate_sequence(name, read_prediction(pred_dir), read_reference(reference_for(name))));
    return report;
  }
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(pred_dir)) {
    if (e.is_directory() && fs::exists(e.path() / "index.json")) subdirs.push_back(e.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  if (subdirs.empty()) throw DataError("no generated videos under " + pred_dir.string());
  for (const auto& d : subdirs) {
    const std::string name = d.filename().string();
    report.add(evaluate_sequence(name, read_prediction(d), read_reference(reference_for(name))));
  }
  return report;
}

}  // namespace facestyle
