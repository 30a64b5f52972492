#include "facestyle/checkpoint.hpp"

#include "facestyle/error.hpp"
#include "facestyle/io.hpp"

namespace facestyle {

namespace fs = std::filesystem;

nlohmann::json CheckpointManifest::to_json() const {
  return {{"stage", stage},
          {"phase", phase},
          {"step", step},
          {"config_hash", config_hash},
          {"model", model},
          {"schedule", schedule},
          {"blobs", blobs},
          {"parameter_counts", parameter_counts},
          {"optimizers", optimizers},
          {"extra", extra}};
}

CheckpointManifest CheckpointManifest::from_json(const nlohmann::json& j) {
  CheckpointManifest m;
  try {
    m.stage = j.at("stage").get<std::string>();
    m.phase = j.at("phase").get<std::string>();
    m.step = j.at("step").get<std::int64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.model = j.at("model");
    m.schedule = j.value("schedule", nlohmann::json());
    m.blobs = j.at("blobs").get<std::map<std::string, std::string>>();
    m.parameter_counts = j.at("parameter_counts").get<std::map<std::string, std::int64_t>>();
    m.optimizers = j.value("optimizers", std::map<std::string, std::string>{});
    m.extra = j.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  if (m.stage != "E" && m.stage != "A") throw DataError("unknown checkpoint stage '" + m.stage + "'");
  return m;
}

void save_checkpoint(const fs::path& dir, CheckpointManifest manifest, const ParamGroups& groups,
                     const std::vector<std::pair<std::string, ad::Array>>& optimizer_states) {
  fs::create_directories(dir);
  manifest.blobs.clear();
  manifest.parameter_counts.clear();
  manifest.optimizers.clear();
  for (const auto& [name, store] : groups) {
    const std::string file = name + ".bin";
    io::write_f64(dir / file, store->flatten());
    manifest.blobs[name] = file;
    manifest.parameter_counts[name] = store->count();
  }
  for (const auto& [name, state] : optimizer_states) {
    const std::string file = "optimizer." + name + ".bin";
    io::write_f64(dir / file, state);
    manifest.optimizers[name] = file;
  }
  io::write_json(dir / "manifest.json", manifest.to_json());
}

bool has_checkpoint(const fs::path& dir) { return fs::exists(dir / "manifest.json"); }

CheckpointManifest read_manifest(const fs::path& dir) {
  if (!has_checkpoint(dir)) throw DataError("no checkpoint manifest in '" + dir.string() + "'");
  return CheckpointManifest::from_json(io::read_json(dir / "manifest.json"));
}

void check_manifest(const CheckpointManifest& m, const std::string& stage,
                    const std::string& expected_hash, bool allow_mismatch) {
  if (m.stage != stage) {
    throw ConfigError("expected a stage-" + stage + " checkpoint, found stage " + m.stage);
  }
  if (!expected_hash.empty() && m.config_hash != expected_hash && !allow_mismatch) {
    throw ConfigError("checkpoint config hash " + m.config_hash + " does not match " +
                      expected_hash + " (pass the override flag to load anyway)");
  }
}

void load_groups(const fs::path& dir, const CheckpointManifest& m, const ParamGroups& groups) {
  for (const auto& [name, store] : groups) {
    const auto it = m.blobs.find(name);
    if (it == m.blobs.end()) throw DataError("checkpoint has no parameter group '" + name + "'");
    store->assign(io::read_f64(dir / it->second));
  }
}

ad::Array load_optimizer(const fs::path& dir, const CheckpointManifest& m, const std::string& name) {
  const auto it = m.optimizers.find(name);
  if (it == m.optimizers.end()) throw DataError("checkpoint has no optimizer state '" + name + "'");
  return io::read_f64(dir / it->second);
}

}  // namespace facestyle
