#pragma once

// SSIM and landmark distances (M-LMD over mouth points, F-LMD over all).

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "facestyle/coeffspace.hpp"

namespace facestyle {

// Mean local SSIM over valid 11x11 Gaussian windows (sigma 1.5), with
// C1 = 0.01^2, C2 = 0.03^2, averaged over channels. Images smaller than
// the window use one window covering the whole image.
double ssim(const Frame& a, const Frame& b);

enum class LandmarkSubset { kMouth, kFace };

// Mean Euclidean distance over the selected landmarks.
double lmd(const Landmarks& pred, const Landmarks& target, LandmarkSubset subset);
// Mean over the selected landmarks of every frame.
double lmd(const std::vector<Landmarks>& pred, const std::vector<Landmarks>& target,
           LandmarkSubset subset);

struct EvalRow {
  std::string video_id;
  int frames = 0;
  double ssim = 0.0;
  double m_lmd = 0.0;
  double f_lmd = 0.0;
};

// Aggregates are frame-weighted means of the rows.
struct EvalReport {
  double ssim = 0.0;
  double m_lmd = 0.0;
  double f_lmd = 0.0;
  std::vector<EvalRow> rows;

  void add(const EvalRow& row);  // appends and recomputes aggregates
  nlohmann::json to_json() const;
  std::string table() const;
};

EvalRow evaluate_sequence(const std::string& video_id, const std::vector<Frame>& pred,
                          const std::vector<Frame>& target);

}  // namespace facestyle
