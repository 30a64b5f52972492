#pragma once

// On-disk corpus layout:
//   corpus.json, art_style.json, art_reference.png
//   <video_id>/coeffs.bin   float32 LE, N x D_exp
//   <video_id>/audio.bin    float32 LE, N x d_audio
//   <video_id>/meta.json    video_id, fps, emotion_class, N, D_exp, landmarks, ...
//   <video_id>/aus.json     per-frame AU intensities
//   <video_id>/frames/%05d.png, <video_id>/styled/%05d.png

#include <Eigen/Dense>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "facestyle/coeffspace.hpp"

namespace facestyle {

struct CorpusInfo {
  std::vector<std::string> video_ids;
  int resolution = 64;
  double fps = 25.0;
  int d_exp = kDefaultExpressionDim;
  int audio_dim = kDefaultAudioDim;
  int art_palette = 1;
  int frames_per_video = 0;

  nlohmann::json to_json() const;
  static CorpusInfo from_json(const nlohmann::json& j);
};

struct ArtStyle {
  int palette_id = 1;
  std::filesystem::path reference_image;  // resolved against the json's directory

  static ArtStyle load(const std::filesystem::path& path);
};

void write_corpus(const std::filesystem::path& dir, const std::vector<VideoSample>& corpus,
                  const CorpusOptions& options);

CorpusInfo read_corpus_info(const std::filesystem::path& dir);

// Loads one video; frames and styled targets only when with_frames is set.
VideoSample load_video(const std::filesystem::path& dir, const std::string& video_id,
                       const CorpusInfo& info, bool with_frames);

// Mean per-AU intensity over the frames in an aus.json file.
Eigen::VectorXd read_au_intensities(const std::filesystem::path& path);

}  // namespace facestyle
