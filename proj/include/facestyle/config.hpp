#pragma once

// Run configuration. Every section and default is listed by
// RunConfig::schema(); unknown keys are rejected.

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "facestyle/annotation.hpp"
#include "facestyle/conditioning.hpp"
#include "facestyle/denoiser.hpp"
#include "facestyle/diffusion.hpp"
#include "facestyle/losses.hpp"
#include "facestyle/stylea.hpp"

namespace facestyle {

struct CorpusConfig {
  int num_videos = 16;
  int frames_per_video = 32;
  int resolution = 64;
  int art_palette = 1;
  double fps = 25.0;
};

struct StyleEConfig {
  int diffusion_steps = 1000;
  ScheduleKind schedule = ScheduleKind::kLinear;
  double beta_start = 1e-4;
  double beta_end = 2e-2;
  DenoiserConfig denoiser;
  double lr = 1e-3;
  bool cosine_decay = true;
  int steps = 2000;
  int batch_size = 8;
  int checkpoint_every = 500;
  int log_every = 10;
  int sample_steps = 5;

  NoiseSchedule make_schedule() const;
  // Architecture and schedule only; hashed into checkpoints.
  nlohmann::json model_json() const;
};

struct StyleATrainConfig {
  StyleAConfig model;
  double lambda = kDefaultPerceptualWeight;
  double adv_weight = 0.01;
  double lr = 2e-4;
  double disc_lr = 2e-4;
  double clip_norm = 1.0;
  int steps = 1000;
  int frames_per_step = 4;
  int checkpoint_every = 500;
  int log_every = 10;
  int pretrain_steps = 1500;
  double pretrain_lr = 1e-3;
  int backbone_depth = 3;
  std::uint64_t backbone_seed = 7;
  double holdout_fraction = 0.25;

  nlohmann::json model_json() const;
};

struct AnnotationRunConfig {
  AnnotationConfig pipeline;
  std::string llm_backend = "mock";
  std::string llm_endpoint;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string corpus_dir;
  std::string records_dir;
  std::string output_dir;
  CorpusConfig corpus;
  AnnotationRunConfig annotation;
  StyleEConfig style_e;
  StyleATrainConfig style_a;
  ClientConfig text_client{Modality::kText, "mock", "", kDefaultTextDim, kDefaultAudioDim};
  ClientConfig image_client{Modality::kImage, "mock", "", kDefaultIdentityDim, kDefaultAudioDim};
  ClientConfig audio_client{Modality::kAudio, "mock", "", kDefaultAudioDim, kDefaultAudioDim};

  // ConfigError on invalid values; with check_paths, also on configured
  // directories that do not exist.
  void validate(bool check_paths = false) const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
  // {"key": {"type", "default"}} for every field.
  static nlohmann::json schema();

  int condition_dim() const { return text_client.dim + image_client.dim + audio_client.dim; }
  ClientRegistry clients() const;
};

// 16 hex digits of FNV-1a over the canonical dump of `section`.
std::string config_hash(const nlohmann::json& section);

}  // namespace facestyle
