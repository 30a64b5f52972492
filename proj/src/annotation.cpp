#include "facestyle/annotation.hpp"

#include <algorithm>
#include <numeric>

#include "facestyle/corpus.hpp"
#include "facestyle/error.hpp"
#include "facestyle/io.hpp"

namespace facestyle {

namespace fs = std::filesystem;

namespace {

constexpr std::array<ActionUnit, kNumActionUnits> kRegistry = {{
    {1, "raised inner brow"},
    {2, "raised outer brow"},
    {4, "lowered brow"},
    {5, "raised upper eyelid"},
    {6, "raised cheeks"},
    {7, "tightened eyelids"},
    {9, "wrinkled nose"},
    {10, "raised upper lip"},
    {12, "pulled lip corners"},
    {14, "dimpled cheeks"},
    {15, "depressed lip corners"},
    {17, "raised chin"},
    {20, "stretched lips"},
    {23, "tightened lips"},
    {25, "parted lips"},
    {26, "dropped jaw"},
    {45, "blinking eyes"},
}};

constexpr std::array<const char*, 3> kLevels = {"slightly", "moderately", "strongly"};

constexpr std::array<std::array<const char*, 3>, kNumEmotions> kSynonyms = {{
    {"angry", "furious", "irritated"},
    {"contemptuous", "scornful", "disdainful"},
    {"disgusted", "repulsed", "revolted"},
    {"fearful", "scared", "frightened"},
    {"happy", "joyful", "cheerful"},
    {"neutral", "calm", "composed"},
    {"sad", "sorrowful", "unhappy"},
    {"surprised", "astonished", "amazed"},
}};

// {E} = emotion synonym, {A} = joined AU descriptions.
struct Template {
  const char* with_aus;
  const char* without_aus;
};
constexpr std::array<Template, 10> kTemplates = {{
    {"The face looks {E}, with {A}.", "The face looks {E}."},
    {"The speaker appears {E}, showing {A}.", "The speaker appears {E}."},
    {"Showing {A}, the person seems {E}.", "The person seems {E}."},
    {"An expression that reads as {E}: {A}.", "An expression that reads as {E}."},
    {"With {A}, they come across as {E}.", "They come across as {E}."},
    {"Someone {E} is talking, with {A}.", "Someone {E} is talking."},
    {"Their mood is {E}; note the {A}.", "Their mood is clearly {E}."},
    {"A talking face, {E}, marked by {A}.", "A talking face, visibly {E}."},
    {"This speaker is {E} and has {A}.", "This speaker is {E} while speaking."},
    {"Looking {E}, the speaker talks with {A}.", "Looking {E}, the speaker talks on."},
}};

std::string join_descriptions(const std::vector<std::string>& d) {
  std::string out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i > 0) out += i + 1 == d.size() ? " and " : ", ";
    out += d[i];
  }
  return out;
}

std::string fill(std::string text, const std::string& emotion, const std::string& aus) {
  auto replace = [&](const std::string& key, const std::string& value) {
    for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
      text.replace(pos, key.size(), value);
    }
  };
  replace("{E}", emotion);
  replace("{A}", aus);
  return text;
}

}  // namespace

const std::array<ActionUnit, kNumActionUnits>& au_registry() { return kRegistry; }

const std::array<const char*, 3>& level_adjectives() { return kLevels; }

int au_index(int au_id) {
  for (int i = 0; i < kNumActionUnits; ++i) {
    if (kRegistry[i].id == au_id) return i;
  }
  throw IndexError("AU" + std::to_string(au_id) + " is not in the registry");
}

std::string AUAnnotation::description() const {
  const std::string phrase = kRegistry[au_index(au_id)].phrase;
  if (!activated || !level) return phrase;
  return std::string(kLevels.at(*level - 1)) + " " + phrase;
}

void LevelingConfig::validate() const {
  if (!(threshold >= 0 && lower > threshold && upper > lower)) {
    throw ConfigError("level bounds must satisfy threshold < lower < upper");
  }
}

std::vector<AUAnnotation> activate_and_level(const Eigen::VectorXd& intensities,
                                             const LevelingConfig& config) {
  config.validate();
  if (intensities.size() != kNumActionUnits) {
    throw ShapeError("expected " + std::to_string(kNumActionUnits) + " AU intensities, got " +
                     std::to_string(intensities.size()));
  }
  std::vector<AUAnnotation> out;
  out.reserve(kNumActionUnits);
  for (int i = 0; i < kNumActionUnits; ++i) {
    const double v = intensities(i);
    if (!(v >= 0.0 && v <= 5.0)) {
      throw DataError("AU" + std::to_string(kRegistry[i].id) + " intensity " + std::to_string(v) +
                      " outside [0, 5]");
    }
    AUAnnotation a;
    a.au_id = kRegistry[i].id;
    a.activated = v > config.threshold;
    if (a.activated) a.level = v <= config.lower ? 1 : v <= config.upper ? 2 : 3;
    out.push_back(a);
  }
  return out;
}

Eigen::VectorXd mock_au_intensities(const SynthFaceParams& p, Emotion emotion) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(kNumActionUnits);
  auto set = [&](int id, double value) { v(au_index(id)) += value; };
  set(1, 3.0 * std::max(0.0, p.brow_raise));
  set(2, 2.5 * std::max(0.0, p.brow_raise));
  set(4, 3.0 * std::max(0.0, -p.brow_raise));
  set(5, 8.0 * std::max(0.0, p.eye_open - 0.6));
  set(7, 8.0 * std::max(0.0, 0.4 - p.eye_open));
  set(45, 20.0 * std::max(0.0, 0.15 - p.eye_open));
  set(25, 3.0 * p.mouth_open);
  set(26, 6.0 * std::max(0.0, p.mouth_open - 0.5));
  switch (emotion) {
    case Emotion::kAngry: set(23, 2.2); set(9, 0.8); break;
    case Emotion::kContempt: set(14, 2.4); break;
    case Emotion::kDisgusted: set(9, 2.6); set(10, 2.0); break;
    case Emotion::kFear: set(20, 2.1); break;
    case Emotion::kHappy: set(6, 2.6); set(12, 3.3); break;
    case Emotion::kNeutral: break;
    case Emotion::kSad: set(15, 2.0); set(17, 1.2); break;
    case Emotion::kSurprised: set(26, 1.0); break;
  }
  return v.cwiseMax(0.0).cwiseMin(5.0);
}

std::array<std::string, 3> emotion_synonyms(Emotion e) {
  const auto& s = kSynonyms.at(static_cast<int>(e));
  return {s[0], s[1], s[2]};
}

std::vector<std::string> MockLLMClient::complete(const CandidateRequest& r) const {
  if (r.count < 1 || r.count > kCapacity) {
    throw ConfigError("mock LLM produces 1.." + std::to_string(kCapacity) + " sentences, asked for " +
                      std::to_string(r.count));
  }
  std::vector<int> order(kCapacity);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(r.seed, fnv1a64(r.video_id)));
  std::shuffle(order.begin(), order.end(), rng);

  const auto synonyms = emotion_synonyms(r.emotion);
  const std::string aus = join_descriptions(r.au_descriptions);
  std::vector<std::string> out;
  for (int i = 0; i < r.count; ++i) {
    const Template& t = kTemplates[order[i] / 3];
    out.push_back(fill(aus.empty() ? t.without_aus : t.with_aus, synonyms[order[i] % 3], aus));
  }
  return out;
}

std::string HttpLLMClient::prompt(const CandidateRequest& r) {
  std::string p = "Write " + std::to_string(r.count) +
                  " different one-sentence descriptions of a talking face that looks " +
                  emotion_name(r.emotion) + ". Vary the syntax.";
  if (!r.au_descriptions.empty()) {
    p += " Every sentence must mention: " + join_descriptions(r.au_descriptions) + ".";
  }
  return p;
}

std::vector<std::string> HttpLLMClient::complete(const CandidateRequest& r) const {
  const auto reply = post_json(endpoint_,
                               {{"prompt", prompt(r)}, {"n", r.count}, {"seed", r.seed}},
                               r.video_id);
  try {
    return reply.at("candidates").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw RetriableError(r.video_id, std::string("malformed LLM reply: ") + e.what());
  }
}

std::vector<std::string> generate_candidates(const std::string& video_id, Emotion emotion,
                                             const std::vector<AUAnnotation>& annotations,
                                             const LLMClient& llm, int k, std::uint64_t seed) {
  if (k < kRetainedCandidates) {
    throw ConfigError("need at least " + std::to_string(kRetainedCandidates) + " candidates");
  }
  CandidateRequest req{video_id, emotion, {}, k, seed};
  for (const auto& a : annotations) {
    if (a.activated) req.au_descriptions.push_back(a.description());
  }
  std::vector<std::string> out;
  try {
    out = llm.complete(req);
  } catch (const RetriableError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw RetriableError(video_id, llm.name() + " failed: " + e.what());
  }
  if (static_cast<int>(out.size()) != k) {
    throw RetriableError(video_id, llm.name() + " returned " + std::to_string(out.size()) +
                                       " sentences, asked for " + std::to_string(k));
  }
  return out;
}

Eigen::VectorXd mean_frame_embedding(const std::vector<Frame>& frames, const ImageEncoder& encoder) {
  if (frames.empty()) throw DataError("no frames to embed");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(encoder.dim());
  for (const Frame& f : frames) sum += encoder.encode(f);
  return sum / static_cast<double>(frames.size());
}

std::vector<ScoredSentence> rank_and_filter(const std::vector<std::string>& candidates,
                                            const std::vector<Frame>& frames,
                                            const TextEncoder& text_encoder,
                                            const ImageEncoder& image_encoder,
                                            const std::string& video_id) {
  if (static_cast<int>(candidates.size()) < kRetainedCandidates) {
    throw DataError("ranking needs at least " + std::to_string(kRetainedCandidates) + " candidates");
  }
  if (frames.empty()) throw DataError("ranking needs at least one frame");
  if (text_encoder.dim() != image_encoder.dim()) {
    throw ConfigError("text and image embedders must share a dimension");
  }
  std::vector<ScoredSentence> scored;
  try {
    const Eigen::VectorXd image = mean_frame_embedding(frames, image_encoder);
    for (const auto& c : candidates) {
      scored.push_back({c, cosine_similarity(text_encoder.encode(c), image)});
    }
  } catch (const RetriableError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw RetriableError(video_id, std::string("embedding failed: ") + e.what());
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredSentence& a, const ScoredSentence& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.text < b.text;
  });
  scored.resize(kRetainedCandidates);
  return scored;
}

void EmotionTextRecord::validate() const {
  if (candidates.size() != kRetainedCandidates) {
    throw DataError("record '" + video_id + "' has " + std::to_string(candidates.size()) +
                    " candidates, expected " + std::to_string(kRetainedCandidates));
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double s = candidates[i].score;
    if (!(s >= -1.0 && s <= 1.0)) throw DataError("record '" + video_id + "' score out of range");
    if (i > 0 && s > candidates[i - 1].score) {
      throw DataError("record '" + video_id + "' candidates not sorted");
    }
  }
  for (const auto& a : au_annotations) {
    au_index(a.au_id);
    if (a.activated != a.level.has_value()) {
      throw DataError("record '" + video_id + "' AU" + std::to_string(a.au_id) +
                      " level present iff activated");
    }
  }
}

nlohmann::json EmotionTextRecord::to_json() const {
  nlohmann::json aus = nlohmann::json::array();
  for (const auto& a : au_annotations) {
    nlohmann::json j = {{"au_id", a.au_id}, {"activated", a.activated}};
    j["level"] = a.level ? nlohmann::json(*a.level) : nlohmann::json(nullptr);
    aus.push_back(j);
  }
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : candidates) cands.push_back({{"sentence", c.text}, {"score", c.score}});
  return {{"video_id", video_id},
          {"emotion_class", emotion_name(emotion)},
          {"au_annotations", aus},
          {"candidates", cands}};
}

EmotionTextRecord EmotionTextRecord::from_json(const nlohmann::json& j) {
  EmotionTextRecord r;
  try {
    r.video_id = j.at("video_id").get<std::string>();
    r.emotion = emotion_from_name(j.at("emotion_class").get<std::string>());
    for (const auto& a : j.at("au_annotations")) {
      AUAnnotation au;
      au.au_id = a.at("au_id").get<int>();
      au.activated = a.at("activated").get<bool>();
      if (!a.at("level").is_null()) au.level = a.at("level").get<int>();
      r.au_annotations.push_back(au);
    }
    for (const auto& c : j.at("candidates")) {
      r.candidates.push_back({c.at("sentence").get<std::string>(), c.at("score").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed emotion-text record: ") + e.what());
  }
  r.validate();
  return r;
}

const std::string& sample_training_text(const EmotionTextRecord& record, Rng& rng) {
  record.validate();
  std::uniform_int_distribution<int> pick(0, kRetainedCandidates - 1);
  return record.candidates[pick(rng)].text;
}

void AnnotationConfig::validate() const {
  leveling.validate();
  if (candidates < kRetainedCandidates) {
    throw ConfigError("candidates must be >= " + std::to_string(kRetainedCandidates));
  }
  if (embed_dim <= 0) throw ConfigError("embed_dim must be positive");
}

nlohmann::json AnnotationSummary::to_json() const {
  nlohmann::json f = nlohmann::json::array();
  for (const auto& x : failures) f.push_back({{"video_id", x.video_id}, {"error", x.error}});
  return {{"total", total},
          {"written", static_cast<int>(written.size())},
          {"skipped", static_cast<int>(failures.size())},
          {"records", written},
          {"failures", f}};
}

EmotionTextRecord annotate_video(const std::string& video_id, Emotion emotion,
                                 const Eigen::VectorXd& intensities,
                                 const std::vector<Frame>& frames, const AnnotationConfig& config,
                                 const LLMClient& llm, const TextEncoder& text_encoder,
                                 const ImageEncoder& image_encoder) {
  EmotionTextRecord r;
  r.video_id = video_id;
  r.emotion = emotion;
  r.au_annotations = activate_and_level(intensities, config.leveling);
  const auto candidates =
      generate_candidates(video_id, emotion, r.au_annotations, llm, config.candidates, config.seed);
  r.candidates = rank_and_filter(candidates, frames, text_encoder, image_encoder, video_id);
  r.validate();
  return r;
}

AnnotationSummary annotate_corpus(const fs::path& corpus_dir, const fs::path& out_dir,
                                  const AnnotationConfig& config, const LLMClient& llm,
                                  const TextEncoder& text_encoder,
                                  const ImageEncoder& image_encoder) {
  config.validate();
  const CorpusInfo info = read_corpus_info(corpus_dir);
  AnnotationSummary summary;
  summary.total = static_cast<int>(info.video_ids.size());
  for (const auto& id : info.video_ids) {
    try {
      const VideoSample v = load_video(corpus_dir, id, info, /*with_frames=*/true);
      const Eigen::VectorXd aus = read_au_intensities(corpus_dir / id / "aus.json");
      const EmotionTextRecord r =
          annotate_video(id, v.emotion, aus, v.frames, config, llm, text_encoder, image_encoder);
      io::write_json(out_dir / "records" / (id + ".json"), r.to_json());
      summary.written.push_back(id);
    } catch (const RetriableError& e) {
      summary.failures.push_back({id, e.what()});
    }
  }
  io::write_json(out_dir / "summary.json", summary.to_json());
  return summary;
}

std::vector<EmotionTextRecord> load_records(const fs::path& records_dir,
                                            const std::vector<std::string>& video_ids) {
  std::vector<std::string> missing;
  for (const auto& id : video_ids) {
    if (!fs::exists(records_dir / (id + ".json"))) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw DataError("missing annotation records for: " + list);
  }
  std::vector<EmotionTextRecord> out;
  for (const auto& id : video_ids) {
    out.push_back(EmotionTextRecord::from_json(io::read_json(records_dir / (id + ".json"))));
  }
  return out;
}

}  // namespace facestyle
