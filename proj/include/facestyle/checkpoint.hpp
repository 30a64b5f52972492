#pragma once

// Checkpoint directory: manifest.json plus one little-endian float64 blob
// per parameter group and one for optimizer state.

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "facestyle/nn.hpp"

namespace facestyle {

struct CheckpointManifest {
  std::string stage;  // "E" or "A"
  std::string phase;  // "train" or "pretrain"
  std::int64_t step = 0;
  std::string config_hash;
  nlohmann::json model;     // architecture section the hash was computed from
  nlohmann::json schedule;  // diffusion schedule descriptor (stage E)
  std::map<std::string, std::string> blobs;             // group -> file
  std::map<std::string, std::int64_t> parameter_counts;  // group -> values
  std::map<std::string, std::string> optimizers;        // name -> file
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
  static CheckpointManifest from_json(const nlohmann::json& j);
};

using ParamGroups = std::vector<std::pair<std::string, nn::ParamStore*>>;

void save_checkpoint(const std::filesystem::path& dir, CheckpointManifest manifest,
                     const ParamGroups& groups,
                     const std::vector<std::pair<std::string, ad::Array>>& optimizer_states = {});

bool has_checkpoint(const std::filesystem::path& dir);
CheckpointManifest read_manifest(const std::filesystem::path& dir);

// ConfigError when the stage differs, or when the hash differs and
// allow_mismatch is not set.
void check_manifest(const CheckpointManifest& m, const std::string& stage,
                    const std::string& expected_hash, bool allow_mismatch);

// Assigns every listed group from its blob; DataError for missing groups or
// wrong sizes.
void load_groups(const std::filesystem::path& dir, const CheckpointManifest& m,
                 const ParamGroups& groups);
ad::Array load_optimizer(const std::filesystem::path& dir, const CheckpointManifest& m,
                         const std::string& name);

}  // namespace facestyle
