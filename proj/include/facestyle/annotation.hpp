#pragma once

// Emotion-text annotation: AU activation and leveling, templated candidate
// sentences, similarity ranking against the video's frames and per-iteration
// sampling of one retained sentence.

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "facestyle/coeffspace.hpp"
#include "facestyle/conditioning.hpp"
#include "facestyle/random.hpp"

namespace facestyle {

inline constexpr int kNumActionUnits = 17;
inline constexpr int kRetainedCandidates = 5;

struct ActionUnit {
  int id;              // FACS number
  const char* phrase;  // e.g. "raised inner brow"
};

// OpenFace intensity AUs in registry order.
const std::array<ActionUnit, kNumActionUnits>& au_registry();
int au_index(int au_id);  // IndexError for ids outside the registry
const std::array<const char*, 3>& level_adjectives();

struct AUAnnotation {
  int au_id = 0;
  bool activated = false;
  std::optional<int> level;  // 1..3, present iff activated

  // "<adjective> <phrase>"; only meaningful when activated.
  std::string description() const;
  bool operator==(const AUAnnotation&) const = default;
};

struct LevelingConfig {
  double threshold = 0.5;
  double lower = 1.5;
  double upper = 3.0;
  void validate() const;
};

// intensity <= threshold -> inactive; then level 1 up to `lower`, 2 up to
// `upper`, 3 above. One entry per registry AU, in registry order.
std::vector<AUAnnotation> activate_and_level(const Eigen::VectorXd& intensities,
                                             const LevelingConfig& config = {});

// Synthetic OpenFace stand-in: intensities follow brow, eye and mouth params
// plus fixed per-emotion offsets, clamped to [0, 5].
Eigen::VectorXd mock_au_intensities(const SynthFaceParams& params, Emotion emotion);

std::array<std::string, 3> emotion_synonyms(Emotion e);

struct CandidateRequest {
  std::string video_id;
  Emotion emotion = Emotion::kNeutral;
  std::vector<std::string> au_descriptions;
  int count = 8;
  std::uint64_t seed = 0;
};

class LLMClient {
 public:
  virtual ~LLMClient() = default;
  virtual std::string name() const = 0;
  virtual std::vector<std::string> complete(const CandidateRequest& request) const = 0;
};

// Fills a bank of 10 sentence templates x 3 emotion synonyms, taken in a
// permutation seeded by (seed, video_id). At most 30 distinct sentences.
class MockLLMClient : public LLMClient {
 public:
  static constexpr int kCapacity = 30;
  std::string name() const override { return "mock-llm"; }
  std::vector<std::string> complete(const CandidateRequest& request) const override;
};

// POSTs {"prompt", "n", "seed"} and expects {"candidates": [...]}.
class HttpLLMClient : public LLMClient {
 public:
  explicit HttpLLMClient(std::string endpoint) : endpoint_(std::move(endpoint)) {}
  std::string name() const override { return "http-llm"; }
  std::vector<std::string> complete(const CandidateRequest& request) const override;

  static std::string prompt(const CandidateRequest& request);

 private:
  std::string endpoint_;
};

// k >= 5 sentences naming the emotion and every activated AU. Client
// failures are rethrown as RetriableError tagged with the video id.
std::vector<std::string> generate_candidates(const std::string& video_id, Emotion emotion,
                                             const std::vector<AUAnnotation>& annotations,
                                             const LLMClient& llm, int k, std::uint64_t seed);

struct ScoredSentence {
  std::string text;
  double score = 0.0;
  bool operator==(const ScoredSentence&) const = default;
};

Eigen::VectorXd mean_frame_embedding(const std::vector<Frame>& frames, const ImageEncoder& encoder);

// Cosine similarity of each candidate to the mean frame embedding; the top
// five by descending score, ties in lexicographic order.
std::vector<ScoredSentence> rank_and_filter(const std::vector<std::string>& candidates,
                                            const std::vector<Frame>& frames,
                                            const TextEncoder& text_encoder,
                                            const ImageEncoder& image_encoder,
                                            const std::string& video_id = {});

struct EmotionTextRecord {
  std::string video_id;
  Emotion emotion = Emotion::kNeutral;
  std::vector<AUAnnotation> au_annotations;
  std::vector<ScoredSentence> candidates;

  // DataError unless there are exactly 5 candidates, sorted, in [-1, 1].
  void validate() const;
  nlohmann::json to_json() const;
  static EmotionTextRecord from_json(const nlohmann::json& j);
};

// Uniform over the 5 candidates.
const std::string& sample_training_text(const EmotionTextRecord& record, Rng& rng);

struct AnnotationConfig {
  LevelingConfig leveling;
  int candidates = 8;
  std::uint64_t seed = 0;
  int embed_dim = 32;
  void validate() const;
};

struct AnnotationFailure {
  std::string video_id;
  std::string error;
};

struct AnnotationSummary {
  int total = 0;
  std::vector<std::string> written;
  std::vector<AnnotationFailure> failures;
  nlohmann::json to_json() const;
};

// Reads a corpus directory, writes records/<video_id>.json and summary.json
// under out_dir. Retriable per-video failures are recorded and skipped.
AnnotationSummary annotate_corpus(const std::filesystem::path& corpus_dir,
                                  const std::filesystem::path& out_dir,
                                  const AnnotationConfig& config, const LLMClient& llm,
                                  const TextEncoder& text_encoder,
                                  const ImageEncoder& image_encoder);

EmotionTextRecord annotate_video(const std::string& video_id, Emotion emotion,
                                 const Eigen::VectorXd& intensities,
                                 const std::vector<Frame>& frames, const AnnotationConfig& config,
                                 const LLMClient& llm, const TextEncoder& text_encoder,
                                 const ImageEncoder& image_encoder);

// Loads records/<video_id>.json for each id; DataError names every missing id.
std::vector<EmotionTextRecord> load_records(const std::filesystem::path& records_dir,
                                            const std::vector<std::string>& video_ids);

}  // namespace facestyle
