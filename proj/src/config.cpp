#include "facestyle/config.hpp"

#include <cstdio>
#include <filesystem>

#include "facestyle/error.hpp"
#include "facestyle/io.hpp"
#include "facestyle/random.hpp"

namespace facestyle {

namespace {

using Json = nlohmann::json;

std::string type_name(const Json& v) {
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer() || v.is_number_unsigned()) return "integer";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_object()) return "object";
  if (v.is_array()) return "array";
  return "null";
}

// Rejects keys absent from `reference` and values of the wrong type.
void check_against(const Json& given, const Json& reference, const std::string& path) {
  if (!given.is_object()) throw ConfigError("'" + path + "' must be an object");
  for (const auto& [key, value] : given.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!reference.contains(key)) throw ConfigError("unknown key '" + where + "'");
    const Json& ref = reference.at(key);
    const std::string want = type_name(ref), got = type_name(value);
    const bool ok = want == got || (want == "number" && got == "integer");
    if (!ok) throw ConfigError("'" + where + "' must be " + want + ", got " + got);
    if (ref.is_object()) check_against(value, ref, where);
  }
}

Json client_json(const ClientConfig& c) {
  Json j = to_json(c);
  j["endpoint"] = c.endpoint;
  j["raw_dim"] = c.raw_dim;
  return j;
}

ClientConfig client_from(const Json& j, Modality expected) {
  ClientConfig c = client_config_from_json(j);
  if (c.modality != expected) {
    throw ConfigError("client slot for " + modality_name(expected) + " configured as " +
                      modality_name(c.modality));
  }
  return c;
}

Json describe(const Json& defaults) {
  Json out = Json::object();
  for (const auto& [key, value] : defaults.items()) {
    if (value.is_object()) {
      out[key] = {{"type", "object"}, {"fields", describe(value)}};
    } else {
      out[key] = {{"type", type_name(value)}, {"default", value}};
    }
  }
  return out;
}

}  // namespace

NoiseSchedule StyleEConfig::make_schedule() const {
  return facestyle::make_schedule(diffusion_steps, schedule, beta_start, beta_end);
}

Json StyleEConfig::model_json() const {
  return {{"denoiser", denoiser.to_json()},
          {"schedule",
           {{"kind", schedule_kind_name(schedule)},
            {"T", diffusion_steps},
            {"beta_start", beta_start},
            {"beta_end", beta_end}}}};
}

Json StyleATrainConfig::model_json() const { return model.to_json(); }

std::string config_hash(const Json& section) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(section.dump())));
  return buf;
}

Json RunConfig::to_json() const {
  const auto& e = style_e;
  const auto& a = style_a;
  const auto& an = annotation.pipeline;
  return {
      {"seed", seed},
      {"corpus_dir", corpus_dir},
      {"records_dir", records_dir},
      {"output_dir", output_dir},
      {"corpus",
       {{"num_videos", corpus.num_videos},
        {"frames_per_video", corpus.frames_per_video},
        {"resolution", corpus.resolution},
        {"art_palette", corpus.art_palette},
        {"fps", corpus.fps}}},
      {"annotation",
       {{"threshold", an.leveling.threshold},
        {"levels", {{"lower", an.leveling.lower}, {"upper", an.leveling.upper}}},
        {"candidates", an.candidates},
        {"seed", an.seed},
        {"embed_dim", an.embed_dim},
        {"llm", {{"backend", annotation.llm_backend}, {"endpoint", annotation.llm_endpoint}}}}},
      {"style_e",
       {{"diffusion_steps", e.diffusion_steps},
        {"schedule", schedule_kind_name(e.schedule)},
        {"beta_start", e.beta_start},
        {"beta_end", e.beta_end},
        {"denoiser", e.denoiser.to_json()},
        {"lr", e.lr},
        {"cosine_decay", e.cosine_decay},
        {"steps", e.steps},
        {"batch_size", e.batch_size},
        {"checkpoint_every", e.checkpoint_every},
        {"log_every", e.log_every},
        {"sample_steps", e.sample_steps}}},
      {"style_a",
       {{"model", a.model.to_json()},
        {"lambda", a.lambda},
        {"adv_weight", a.adv_weight},
        {"lr", a.lr},
        {"disc_lr", a.disc_lr},
        {"clip_norm", a.clip_norm},
        {"steps", a.steps},
        {"frames_per_step", a.frames_per_step},
        {"checkpoint_every", a.checkpoint_every},
        {"log_every", a.log_every},
        {"pretrain_steps", a.pretrain_steps},
        {"pretrain_lr", a.pretrain_lr},
        {"backbone_depth", a.backbone_depth},
        {"backbone_seed", a.backbone_seed},
        {"holdout_fraction", a.holdout_fraction}}},
      {"clients",
       {{"text", client_json(text_client)},
        {"image", client_json(image_client)},
        {"audio", client_json(audio_client)}}},
  };
}

RunConfig RunConfig::from_json(const Json& given) {
  const RunConfig defaults;
  Json merged = defaults.to_json();
  check_against(given, merged, "");
  merged.merge_patch(given);

  RunConfig c;
  try {
    c.seed = merged.at("seed").get<std::uint64_t>();
    c.corpus_dir = merged.at("corpus_dir").get<std::string>();
    c.records_dir = merged.at("records_dir").get<std::string>();
    c.output_dir = merged.at("output_dir").get<std::string>();

    const Json& co = merged.at("corpus");
    c.corpus.num_videos = co.at("num_videos").get<int>();
    c.corpus.frames_per_video = co.at("frames_per_video").get<int>();
    c.corpus.resolution = co.at("resolution").get<int>();
    c.corpus.art_palette = co.at("art_palette").get<int>();
    c.corpus.fps = co.at("fps").get<double>();

    const Json& an = merged.at("annotation");
    c.annotation.pipeline.leveling.threshold = an.at("threshold").get<double>();
    c.annotation.pipeline.leveling.lower = an.at("levels").at("lower").get<double>();
    c.annotation.pipeline.leveling.upper = an.at("levels").at("upper").get<double>();
    c.annotation.pipeline.candidates = an.at("candidates").get<int>();
    c.annotation.pipeline.seed = an.at("seed").get<std::uint64_t>();
    c.annotation.pipeline.embed_dim = an.at("embed_dim").get<int>();
    c.annotation.llm_backend = an.at("llm").at("backend").get<std::string>();
    c.annotation.llm_endpoint = an.at("llm").at("endpoint").get<std::string>();

    const Json& clients = merged.at("clients");
    c.text_client = client_from(clients.at("text"), Modality::kText);
    c.image_client = client_from(clients.at("image"), Modality::kImage);
    c.audio_client = client_from(clients.at("audio"), Modality::kAudio);

    const Json& e = merged.at("style_e");
    c.style_e.diffusion_steps = e.at("diffusion_steps").get<int>();
    c.style_e.schedule = schedule_kind_from_name(e.at("schedule").get<std::string>());
    c.style_e.beta_start = e.at("beta_start").get<double>();
    c.style_e.beta_end = e.at("beta_end").get<double>();
    Json den = e.at("denoiser");
    // The condition width follows the client dimensions unless set explicitly.
    if (!(given.contains("style_e") && given["style_e"].contains("denoiser") &&
          given["style_e"]["denoiser"].contains("condition_dim"))) {
      den["condition_dim"] = c.condition_dim();
    }
    if (!(given.contains("style_e") && given["style_e"].contains("denoiser") &&
          given["style_e"]["denoiser"].contains("sequence_length"))) {
      den["sequence_length"] = c.corpus.frames_per_video;
    }
    c.style_e.denoiser = DenoiserConfig::from_json(den);
    c.style_e.lr = e.at("lr").get<double>();
    c.style_e.cosine_decay = e.at("cosine_decay").get<bool>();
    c.style_e.steps = e.at("steps").get<int>();
    c.style_e.batch_size = e.at("batch_size").get<int>();
    c.style_e.checkpoint_every = e.at("checkpoint_every").get<int>();
    c.style_e.log_every = e.at("log_every").get<int>();
    c.style_e.sample_steps = e.at("sample_steps").get<int>();

    const Json& a = merged.at("style_a");
    Json model = a.at("model");
    if (!(given.contains("style_a") && given["style_a"].contains("model") &&
          given["style_a"]["model"].contains("resolution"))) {
      model["resolution"] = c.corpus.resolution;
    }
    if (!(given.contains("style_a") && given["style_a"].contains("model") &&
          given["style_a"]["model"].contains("warp_resolution"))) {
      model["warp_resolution"] = 0;
    }
    c.style_a.model = StyleAConfig::from_json(model);
    c.style_a.lambda = a.at("lambda").get<double>();
    c.style_a.adv_weight = a.at("adv_weight").get<double>();
    c.style_a.lr = a.at("lr").get<double>();
    c.style_a.disc_lr = a.at("disc_lr").get<double>();
    c.style_a.clip_norm = a.at("clip_norm").get<double>();
    c.style_a.steps = a.at("steps").get<int>();
    c.style_a.frames_per_step = a.at("frames_per_step").get<int>();
    c.style_a.checkpoint_every = a.at("checkpoint_every").get<int>();
    c.style_a.log_every = a.at("log_every").get<int>();
    c.style_a.pretrain_steps = a.at("pretrain_steps").get<int>();
    c.style_a.pretrain_lr = a.at("pretrain_lr").get<double>();
    c.style_a.backbone_depth = a.at("backbone_depth").get<int>();
    c.style_a.backbone_seed = a.at("backbone_seed").get<std::uint64_t>();
    c.style_a.holdout_fraction = a.at("holdout_fraction").get<double>();
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("malformed config: ") + ex.what());
  }
  c.validate(false);
  return c;
}

void RunConfig::validate(bool check_paths) const {
  if (corpus.num_videos < 1) throw ConfigError("corpus.num_videos must be >= 1");
  if (corpus.frames_per_video < 2) throw ConfigError("corpus.frames_per_video must be >= 2");
  if (!is_supported_resolution(corpus.resolution)) {
    throw ConfigError("corpus.resolution must be 32, 64, 128 or 256");
  }
  if (corpus.art_palette < 1 || corpus.art_palette >= kNumPalettes) {
    throw ConfigError("corpus.art_palette must be in [1, " + std::to_string(kNumPalettes - 1) + "]");
  }
  if (!(corpus.fps > 0)) throw ConfigError("corpus.fps must be positive");
  annotation.pipeline.validate();
  if (annotation.llm_backend != "mock" && annotation.llm_backend != "http") {
    throw ConfigError("annotation.llm.backend must be mock or http");
  }
  if (annotation.llm_backend == "http" && annotation.llm_endpoint.empty()) {
    throw ConfigError("annotation.llm.endpoint is required for the http backend");
  }

  const auto& e = style_e;
  if (e.diffusion_steps < 1) throw ConfigError("style_e.diffusion_steps must be >= 1");
  e.make_schedule();
  e.denoiser.validate();
  if (e.denoiser.condition_dim != condition_dim()) {
    throw ConfigError("style_e.denoiser.condition_dim " + std::to_string(e.denoiser.condition_dim) +
                      " != text + identity + audio dims " + std::to_string(condition_dim()));
  }
  if (!(e.lr > 0)) throw ConfigError("style_e.lr must be positive");
  if (e.steps < 0 || e.batch_size < 1 || e.checkpoint_every < 1 || e.log_every < 1) {
    throw ConfigError("style_e step counts must be positive");
  }
  if (e.sample_steps < 1 || e.sample_steps > e.diffusion_steps) {
    throw ConfigError("style_e.sample_steps must lie in [1, diffusion_steps]");
  }

  const auto& a = style_a;
  a.model.validate();
  if (a.model.d_exp != e.denoiser.d_exp) throw ConfigError("style_a.model.d_exp != denoiser d_exp");
  if (!(a.lambda >= 0)) throw ConfigError("style_a.lambda must be >= 0");
  if (!(a.adv_weight >= 0)) throw ConfigError("style_a.adv_weight must be >= 0");
  if (!(a.lr > 0 && a.disc_lr > 0 && a.pretrain_lr > 0)) {
    throw ConfigError("style_a learning rates must be positive");
  }
  if (a.steps < 0 || a.pretrain_steps < 0 || a.frames_per_step < 1 || a.checkpoint_every < 1 ||
      a.log_every < 1) {
    throw ConfigError("style_a step counts must be positive");
  }
  if (a.backbone_depth < 1) throw ConfigError("style_a.backbone_depth must be >= 1");
  if (!(a.holdout_fraction >= 0 && a.holdout_fraction < 1)) {
    throw ConfigError("style_a.holdout_fraction must lie in [0, 1)");
  }

  if (check_paths) {
    for (const auto& [key, path] : {std::pair<std::string, std::string>{"corpus_dir", corpus_dir},
                                    {"records_dir", records_dir}}) {
      if (!path.empty() && !std::filesystem::exists(path)) {
        throw ConfigError(key + " '" + path + "' does not exist");
      }
    }
  }
}

RunConfig RunConfig::load(const std::string& path) {
  Json j;
  try {
    j = io::read_json(path);
  } catch (const DataError& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  return from_json(j);
}

Json RunConfig::schema() { return describe(RunConfig{}.to_json()); }

ClientRegistry RunConfig::clients() const {
  ClientRegistry r;
  r.add(make_client(text_client));
  r.add(make_client(image_client));
  r.add(make_client(audio_client));
  return r;
}

}  // namespace facestyle
