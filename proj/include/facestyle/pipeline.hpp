#pragma once

// Corpus synthesis, annotation, the two training stages, generation and
// evaluation. All entry points are deterministic given (config, seed).

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "facestyle/annotation.hpp"
#include "facestyle/checkpoint.hpp"
#include "facestyle/config.hpp"
#include "facestyle/corpus.hpp"
#include "facestyle/denoiser.hpp"
#include "facestyle/metrics.hpp"
#include "facestyle/stylea.hpp"

namespace facestyle {

namespace fs = std::filesystem;

std::vector<VideoSample> synth_data(const fs::path& out_dir, const CorpusConfig& corpus,
                                    std::uint64_t seed);

AnnotationSummary run_annotation(const RunConfig& config, const fs::path& corpus_dir,
                                 const fs::path& out_dir);

struct TrainOptions {
  bool resume = false;
  bool allow_config_mismatch = false;
  std::ostream* log = nullptr;  // NDJSON, one record per logged step
  int stop_after = -1;          // stop early (with a checkpoint) at this step
  std::vector<std::string> videos;  // restrict training to these ids
};

struct TrainResult {
  CheckpointManifest manifest;
  std::vector<double> losses;  // one per step run in this call
  double heldout_rec = std::numeric_limits<double>::quiet_NaN();
  double train_rec = std::numeric_limits<double>::quiet_NaN();
  std::map<std::string, std::uint64_t> frozen_before, frozen_after;
};

// Stage-E model section: denoiser, schedule and client layout.
nlohmann::json style_e_model_json(const RunConfig& config);
// E_s / G architecture section shared by pretraining and stage A.
nlohmann::json inversion_model_json(const StyleAConfig& config);

TrainResult train_style_e(const RunConfig& config, const fs::path& corpus_dir,
                          const fs::path& records_dir, const fs::path& out_dir,
                          const TrainOptions& options = {});

// Trains E_s and G (with ModRes) as a stylizing autoencoder.
TrainResult pretrain_inversion(const RunConfig& config, const fs::path& corpus_dir,
                               const fs::path& out_dir, const TrainOptions& options = {});

// Trains E_c, G_m, R and D against styled targets with E_s and G frozen.
TrainResult train_style_a(const RunConfig& config, const fs::path& corpus_dir,
                          const fs::path& pretrain_dir, const fs::path& out_dir,
                          const TrainOptions& options = {});

struct LoadedStyleE {
  std::unique_ptr<Denoiser> denoiser;
  NoiseSchedule schedule;
  ClientRegistry clients;
  CheckpointManifest manifest;
};
LoadedStyleE load_style_e(const fs::path& dir, const RunConfig* config = nullptr,
                          bool allow_mismatch = false);

struct LoadedStyleA {
  std::unique_ptr<StyleAModel> model;
  CheckpointManifest manifest;
};
LoadedStyleA load_style_a(const fs::path& dir, const RunConfig* config = nullptr,
                          bool allow_mismatch = false);

struct GenerationInputs {
  Frame identity;
  CoeffMatrix audio;  // (N, raw audio dim)
  std::string text;
  Frame art;
  double fps = 25.0;
};

struct GenerateOptions {
  int num_steps = 5;
  const RunConfig* config = nullptr;
  bool allow_config_mismatch = false;
};

struct GenerationResult {
  Eigen::MatrixXd coeffs;     // (N, D_exp)
  std::vector<Frame> frames;  // landmarks from the coefficients
  int denoiser_calls = 0;
  double fps = 25.0;
};

GenerationResult generate(const GenerationInputs& inputs, const fs::path& style_e_dir,
                          const fs::path& style_a_dir, std::uint64_t seed,
                          const GenerateOptions& options = {});
GenerationResult generate(const GenerationInputs& inputs, const LoadedStyleE& style_e,
                          const StyleAModel& style_a, std::uint64_t seed, int num_steps = 5);

// frames/%05d.png, coeffs.bin and index.json {fps, N, resolution, landmarks}.
void write_generation(const fs::path& out_dir, const GenerationResult& result);

// Compares a generated directory (or a directory of them) against corpus
// video directories of the same names; styled targets are preferred.
EvalReport evaluate_dirs(const fs::path& pred_dir, const fs::path& gt_dir);

}  // namespace facestyle
