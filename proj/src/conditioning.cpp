#include "facestyle/conditioning.hpp"

#include <httplib.h>

#include <cctype>
#include <cmath>
#include <regex>

#include "facestyle/error.hpp"
#include "facestyle/random.hpp"

namespace facestyle {

Eigen::MatrixXd ConditionVector::fused() const {
  const int n = frames();
  const int dt = static_cast<int>(text_emb.size()), di = static_cast<int>(identity_emb.size());
  Eigen::MatrixXd out(n, fused_dim());
  out.leftCols(dt).rowwise() = text_emb.transpose();
  out.middleCols(dt, di).rowwise() = identity_emb.transpose();
  out.rightCols(audio_emb.cols()) = audio_emb;
  return out;
}

std::string modality_name(Modality m) {
  switch (m) {
    case Modality::kText: return "text";
    case Modality::kImage: return "image";
    case Modality::kAudio: return "audio";
  }
  return "unknown";
}

Modality modality_from_name(const std::string& name) {
  if (name == "text") return Modality::kText;
  if (name == "image") return Modality::kImage;
  if (name == "audio") return Modality::kAudio;
  throw ConfigError("unknown modality '" + name + "'");
}

Eigen::VectorXd MockTextEncoder::encode(const std::string& text) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
  std::string token;
  int tokens = 0;
  auto flush = [&]() {
    if (token.empty()) return;
    Rng rng(fnv1a64(token));
    for (int i = 0; i < dim_; ++i) v(i) += normal(rng);
    token.clear();
    ++tokens;
  };
  for (unsigned char ch : text) {
    if (std::isalnum(ch)) {
      token.push_back(static_cast<char>(std::tolower(ch)));
    } else {
      flush();
    }
  }
  flush();
  if (tokens == 0) throw DataError("text encoder given an empty string");
  return v / v.norm();
}

MockImageEncoder::MockImageEncoder(int dim, std::uint64_t seed) : dim_(dim) {
  Rng rng(seed);
  projection_.resize(dim, 19);
  for (Eigen::Index i = 0; i < projection_.size(); ++i) {
    projection_.data()[i] = normal(rng) / std::sqrt(19.0);
  }
}

Eigen::VectorXd MockImageEncoder::pooled_features(const Frame& frame) {
  Eigen::VectorXd f(19);
  const int plane = frame.height * frame.width;
  for (int c = 0; c < 3; ++c) f(c) = frame.pixels.segment(c * plane, plane).mean() - 0.5;
  for (int gy = 0; gy < 4; ++gy) {
    for (int gx = 0; gx < 4; ++gx) {
      double s = 0.0;
      int count = 0;
      for (int y = gy * frame.height / 4; y < (gy + 1) * frame.height / 4; ++y) {
        for (int x = gx * frame.width / 4; x < (gx + 1) * frame.width / 4; ++x) {
          s += (frame.at(0, y, x) + frame.at(1, y, x) + frame.at(2, y, x)) / 3.0;
          ++count;
        }
      }
      f(3 + gy * 4 + gx) = (count ? s / count : 0.0) - 0.5;
    }
  }
  return f;
}

Eigen::VectorXd MockImageEncoder::encode(const Frame& frame) const {
  if (frame.height < 4 || frame.width < 4) throw ShapeError("image encoder needs at least 4x4");
  return 4.0 * projection_ * pooled_features(frame);
}

MockAudioEncoder::MockAudioEncoder(int raw_dim, int dim, std::uint64_t seed)
    : raw_dim_(raw_dim), dim_(dim), weight_(raw_dim, dim) {
  Rng rng(seed);
  for (Eigen::Index i = 0; i < weight_.size(); ++i) {
    weight_.data()[i] = normal(rng) / std::sqrt(static_cast<double>(raw_dim));
  }
}

Eigen::MatrixXd MockAudioEncoder::encode(const CoeffMatrix& audio) const {
  if (audio.cols() != raw_dim_) {
    throw ShapeError("audio features have " + std::to_string(audio.cols()) +
                     " columns, encoder expects " + std::to_string(raw_dim_));
  }
  return (audio.cast<double>() * weight_).array().tanh().matrix();
}

nlohmann::json post_json(const std::string& endpoint, const nlohmann::json& body,
                         const std::string& what) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(endpoint, m, kUrl)) throw ConfigError("bad endpoint '" + endpoint + "'");
  httplib::Client client(m[1].str());
  client.set_connection_timeout(5);
  client.set_read_timeout(30);
  const std::string path = m[2].matched ? m[2].str() : "/";
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) throw RetriableError(what, "request to " + endpoint + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw RetriableError(what, "request to " + endpoint + " returned HTTP " + std::to_string(res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw RetriableError(what, std::string("malformed response: ") + e.what());
  }
}

namespace {

Eigen::VectorXd json_vector(const nlohmann::json& j, int dim, const std::string& what) {
  const auto values = j.get<std::vector<double>>();
  if (static_cast<int>(values.size()) != dim) {
    throw DataError(what + " returned " + std::to_string(values.size()) + " values, declared " +
                    std::to_string(dim));
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(), dim);
}

}  // namespace

Eigen::VectorXd HttpTextEncoder::encode(const std::string& text) const {
  const auto reply = post_json(endpoint_, {{"modality", "text"}, {"input", text}}, name());
  return json_vector(reply.at("embedding"), dim_, name());
}

Eigen::VectorXd HttpImageEncoder::encode(const Frame& frame) const {
  std::vector<double> pixels(frame.pixels.data(), frame.pixels.data() + frame.pixels.size());
  const nlohmann::json body = {{"modality", "image"},
                               {"height", frame.height},
                               {"width", frame.width},
                               {"pixels", pixels}};
  return json_vector(post_json(endpoint_, body, name()).at("embedding"), dim_, name());
}

Eigen::MatrixXd HttpAudioEncoder::encode(const CoeffMatrix& audio) const {
  nlohmann::json frames = nlohmann::json::array();
  for (Eigen::Index n = 0; n < audio.rows(); ++n) {
    frames.push_back(std::vector<float>(audio.row(n).data(), audio.row(n).data() + audio.cols()));
  }
  const auto reply = post_json(endpoint_, {{"modality", "audio"}, {"frames", frames}}, name());
  const auto& rows = reply.at("embeddings");
  if (rows.size() != static_cast<std::size_t>(audio.rows())) {
    throw DataError(name() + " returned a different frame count");
  }
  Eigen::MatrixXd out(audio.rows(), dim_);
  for (Eigen::Index n = 0; n < audio.rows(); ++n) {
    out.row(n) = json_vector(rows[n], dim_, name()).transpose();
  }
  return out;
}

void ClientRegistry::add(std::shared_ptr<const EncoderClient> client) {
  switch (client->modality()) {
    case Modality::kText:
      text_ = std::dynamic_pointer_cast<const TextEncoder>(client);
      break;
    case Modality::kImage:
      image_ = std::dynamic_pointer_cast<const ImageEncoder>(client);
      break;
    case Modality::kAudio:
      audio_ = std::dynamic_pointer_cast<const AudioEncoder>(client);
      break;
  }
}

const TextEncoder& ClientRegistry::text() const {
  if (!text_) throw ConfigError("no text encoder registered");
  return *text_;
}

const ImageEncoder& ClientRegistry::image() const {
  if (!image_) throw ConfigError("no image encoder registered");
  return *image_;
}

const AudioEncoder& ClientRegistry::audio() const {
  if (!audio_) throw ConfigError("no audio encoder registered");
  return *audio_;
}

ClientRegistry ClientRegistry::mocks(int d_text, int d_identity, int d_audio, int raw_audio) {
  ClientRegistry r;
  r.set_text(std::make_shared<MockTextEncoder>(d_text));
  r.set_image(std::make_shared<MockImageEncoder>(d_identity));
  r.set_audio(std::make_shared<MockAudioEncoder>(raw_audio, d_audio));
  return r;
}

ClientConfig client_config_from_json(const nlohmann::json& j) {
  ClientConfig c;
  c.modality = modality_from_name(j.at("modality").get<std::string>());
  c.backend = j.value("backend", std::string("mock"));
  c.endpoint = j.value("endpoint", std::string());
  c.dim = j.at("dim").get<int>();
  c.raw_dim = j.value("raw_dim", kDefaultAudioDim);
  if (c.backend != "mock" && c.backend != "http") {
    throw ConfigError("unknown client backend '" + c.backend + "'");
  }
  if (c.backend == "http" && c.endpoint.empty()) throw ConfigError("http client needs an endpoint");
  if (c.dim <= 0) throw ConfigError("client dim must be positive");
  return c;
}

nlohmann::json to_json(const ClientConfig& c) {
  nlohmann::json j = {{"modality", modality_name(c.modality)}, {"backend", c.backend}, {"dim", c.dim}};
  if (!c.endpoint.empty()) j["endpoint"] = c.endpoint;
  if (c.modality == Modality::kAudio) j["raw_dim"] = c.raw_dim;
  return j;
}

std::shared_ptr<const EncoderClient> make_client(const ClientConfig& c) {
  const bool http = c.backend == "http";
  switch (c.modality) {
    case Modality::kText:
      if (http) return std::make_shared<HttpTextEncoder>(c.endpoint, c.dim);
      return std::make_shared<MockTextEncoder>(c.dim);
    case Modality::kImage:
      if (http) return std::make_shared<HttpImageEncoder>(c.endpoint, c.dim);
      return std::make_shared<MockImageEncoder>(c.dim);
    case Modality::kAudio:
      if (http) return std::make_shared<HttpAudioEncoder>(c.endpoint, c.dim);
      return std::make_shared<MockAudioEncoder>(c.raw_dim, c.dim);
  }
  throw ConfigError("unhandled modality");
}

ConditionVector assemble_condition(Eigen::VectorXd text_emb, Eigen::VectorXd identity_emb,
                                   Eigen::MatrixXd audio_emb) {
  if (!text_emb.allFinite()) throw DataError("text embedding is not finite");
  if (!identity_emb.allFinite()) throw DataError("identity embedding is not finite");
  if (!audio_emb.allFinite()) throw DataError("audio embedding is not finite");
  if (audio_emb.rows() < 1) throw DataError("audio embedding has no frames");
  return {std::move(text_emb), std::move(identity_emb), std::move(audio_emb)};
}

ConditionVector build_condition(const std::string& text, const Frame& identity,
                                const CoeffMatrix& audio, const ClientRegistry& clients) {
  const TextEncoder& te = clients.text();
  const ImageEncoder& ie = clients.image();
  const AudioEncoder& ae = clients.audio();
  Eigen::VectorXd t = te.encode(text);
  Eigen::VectorXd i = ie.encode(identity);
  Eigen::MatrixXd a = ae.encode(audio);
  if (t.size() != te.dim() || i.size() != ie.dim() || a.cols() != ae.dim()) {
    throw DataError("encoder output does not match its declared dimension");
  }
  return assemble_condition(std::move(t), std::move(i), std::move(a));
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw ShapeError("cosine similarity of different lengths");
  const double denom = a.norm() * b.norm();
  if (denom == 0.0) return 0.0;
  return std::clamp(a.dot(b) / denom, -1.0, 1.0);
}

}  // namespace facestyle
