#pragma once

// Condition vector c = text ⊕ identity ⊕ audio and the pluggable encoders
// that produce each segment.

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>

#include "facestyle/coeffspace.hpp"

namespace facestyle {

inline constexpr int kDefaultTextDim = 32;
inline constexpr int kDefaultIdentityDim = 16;

struct ConditionVector {
  Eigen::VectorXd text_emb;
  Eigen::VectorXd identity_emb;
  Eigen::MatrixXd audio_emb;  // (N, d_A)

  int frames() const { return static_cast<int>(audio_emb.rows()); }
  int fused_dim() const {
    return static_cast<int>(text_emb.size() + identity_emb.size() + audio_emb.cols());
  }
  // Row n is [text_emb, identity_emb, audio_emb[n]].
  Eigen::MatrixXd fused() const;
};

enum class Modality { kText, kImage, kAudio };
std::string modality_name(Modality m);
Modality modality_from_name(const std::string& name);

class EncoderClient {
 public:
  virtual ~EncoderClient() = default;
  virtual std::string name() const = 0;
  virtual Modality modality() const = 0;
  virtual int dim() const = 0;
};

class TextEncoder : public EncoderClient {
 public:
  Modality modality() const override { return Modality::kText; }
  virtual Eigen::VectorXd encode(const std::string& text) const = 0;
};

class ImageEncoder : public EncoderClient {
 public:
  Modality modality() const override { return Modality::kImage; }
  virtual Eigen::VectorXd encode(const Frame& frame) const = 0;
};

// Maps raw per-frame audio features (N, raw) to embeddings (N, dim).
class AudioEncoder : public EncoderClient {
 public:
  Modality modality() const override { return Modality::kAudio; }
  virtual Eigen::MatrixXd encode(const CoeffMatrix& audio) const = 0;
};

// Unit-norm sum of per-token Gaussian vectors seeded by a hash of each
// lowercased alphanumeric token. Related words share no structure.
class MockTextEncoder : public TextEncoder {
 public:
  explicit MockTextEncoder(int dim = kDefaultTextDim) : dim_(dim) {}
  std::string name() const override { return "mock-text"; }
  int dim() const override { return dim_; }
  Eigen::VectorXd encode(const std::string& text) const override;

 private:
  int dim_;
};

// Channel means plus a 4x4 grid of pooled intensities, projected by a
// fixed seeded Gaussian matrix.
class MockImageEncoder : public ImageEncoder {
 public:
  explicit MockImageEncoder(int dim = kDefaultIdentityDim, std::uint64_t seed = 0x1d3a);
  std::string name() const override { return "mock-image"; }
  int dim() const override { return dim_; }
  Eigen::VectorXd encode(const Frame& frame) const override;

  static Eigen::VectorXd pooled_features(const Frame& frame);

 private:
  int dim_;
  Eigen::MatrixXd projection_;
};

class MockAudioEncoder : public AudioEncoder {
 public:
  MockAudioEncoder(int raw_dim = kDefaultAudioDim, int dim = kDefaultAudioDim,
                   std::uint64_t seed = 0xa0d1);
  std::string name() const override { return "mock-audio"; }
  int dim() const override { return dim_; }
  Eigen::MatrixXd encode(const CoeffMatrix& audio) const override;

 private:
  int raw_dim_, dim_;
  Eigen::MatrixXd weight_;
};

// Adapters for hosted embedding services. Each request is a JSON POST to
// `endpoint`; the response carries "embedding" (or "embeddings" for audio).
// A fresh connection is used per call so instances are safe to share.
class HttpTextEncoder : public TextEncoder {
 public:
  HttpTextEncoder(std::string endpoint, int dim) : endpoint_(std::move(endpoint)), dim_(dim) {}
  std::string name() const override { return "http-text"; }
  int dim() const override { return dim_; }
  Eigen::VectorXd encode(const std::string& text) const override;

 private:
  std::string endpoint_;
  int dim_;
};

class HttpImageEncoder : public ImageEncoder {
 public:
  HttpImageEncoder(std::string endpoint, int dim) : endpoint_(std::move(endpoint)), dim_(dim) {}
  std::string name() const override { return "http-image"; }
  int dim() const override { return dim_; }
  Eigen::VectorXd encode(const Frame& frame) const override;

 private:
  std::string endpoint_;
  int dim_;
};

class HttpAudioEncoder : public AudioEncoder {
 public:
  HttpAudioEncoder(std::string endpoint, int dim) : endpoint_(std::move(endpoint)), dim_(dim) {}
  std::string name() const override { return "http-audio"; }
  int dim() const override { return dim_; }
  Eigen::MatrixXd encode(const CoeffMatrix& audio) const override;

 private:
  std::string endpoint_;
  int dim_;
};

// POSTs `body` to an http://host:port/path endpoint and parses the reply.
// Transport or status failures raise RetriableError tagged with `what`.
nlohmann::json post_json(const std::string& endpoint, const nlohmann::json& body,
                         const std::string& what);

// One client slot per modality; registration order is irrelevant.
class ClientRegistry {
 public:
  void set_text(std::shared_ptr<const TextEncoder> c) { text_ = std::move(c); }
  void set_image(std::shared_ptr<const ImageEncoder> c) { image_ = std::move(c); }
  void set_audio(std::shared_ptr<const AudioEncoder> c) { audio_ = std::move(c); }
  // Dispatches on the client's modality.
  void add(std::shared_ptr<const EncoderClient> client);

  // Throw ConfigError when the slot is empty.
  const TextEncoder& text() const;
  const ImageEncoder& image() const;
  const AudioEncoder& audio() const;

  static ClientRegistry mocks(int d_text = kDefaultTextDim, int d_identity = kDefaultIdentityDim,
                              int d_audio = kDefaultAudioDim, int raw_audio = kDefaultAudioDim);

 private:
  std::shared_ptr<const TextEncoder> text_;
  std::shared_ptr<const ImageEncoder> image_;
  std::shared_ptr<const AudioEncoder> audio_;
};

// Client config block: {"modality", "backend": "mock"|"http", "endpoint"?,
// "dim", "raw_dim"?}.
struct ClientConfig {
  Modality modality = Modality::kText;
  std::string backend = "mock";
  std::string endpoint;
  int dim = kDefaultTextDim;
  int raw_dim = kDefaultAudioDim;
};
ClientConfig client_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ClientConfig& c);
std::shared_ptr<const EncoderClient> make_client(const ClientConfig& c);

// Throws ConfigError for a missing client and DataError for non-finite or
// wrongly sized embeddings.
ConditionVector build_condition(const std::string& text, const Frame& identity,
                                const CoeffMatrix& audio, const ClientRegistry& clients);

// Assembles a condition from precomputed segments with the same checks.
ConditionVector assemble_condition(Eigen::VectorXd text_emb, Eigen::VectorXd identity_emb,
                                   Eigen::MatrixXd audio_emb);

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace facestyle
