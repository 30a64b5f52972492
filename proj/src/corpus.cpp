#include "facestyle/corpus.hpp"

#include "facestyle/annotation.hpp"
#include "facestyle/io.hpp"

namespace facestyle {

namespace fs = std::filesystem;

nlohmann::json CorpusInfo::to_json() const {
  return {{"videos", video_ids}, {"resolution", resolution},  {"fps", fps},
          {"d_exp", d_exp},      {"audio_dim", audio_dim},    {"art_palette", art_palette},
          {"frames_per_video", frames_per_video}};
}

CorpusInfo CorpusInfo::from_json(const nlohmann::json& j) {
  CorpusInfo c;
  try {
    c.video_ids = j.at("videos").get<std::vector<std::string>>();
    c.resolution = j.at("resolution").get<int>();
    c.fps = j.at("fps").get<double>();
    c.d_exp = j.at("d_exp").get<int>();
    c.audio_dim = j.at("audio_dim").get<int>();
    c.art_palette = j.at("art_palette").get<int>();
    c.frames_per_video = j.at("frames_per_video").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corpus.json: ") + e.what());
  }
  if (c.video_ids.empty()) throw DataError("corpus.json lists no videos");
  return c;
}

ArtStyle ArtStyle::load(const fs::path& path) {
  const auto j = io::read_json(path);
  ArtStyle a;
  try {
    a.palette_id = j.at("palette_id").get<int>();
    a.reference_image = j.at("reference_image").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("art style '" + path.string() + "': " + e.what());
  }
  if (a.palette_id < 0 || a.palette_id >= kNumPalettes) {
    throw DataError("art style palette " + std::to_string(a.palette_id) + " out of range");
  }
  if (a.reference_image.is_relative()) a.reference_image = path.parent_path() / a.reference_image;
  return a;
}

void write_corpus(const fs::path& dir, const std::vector<VideoSample>& corpus,
                  const CorpusOptions& options) {
  if (corpus.empty()) throw ConfigError("empty corpus");
  CorpusInfo info;
  info.resolution = options.resolution;
  info.fps = options.fps;
  info.d_exp = options.d_exp;
  info.audio_dim = options.audio_dim;
  info.art_palette = options.art_palette;
  info.frames_per_video = corpus.front().sequence.frames();

  for (const VideoSample& v : corpus) {
    const fs::path vdir = dir / v.sequence.video_id;
    info.video_ids.push_back(v.sequence.video_id);
    io::write_f32(vdir / "coeffs.bin", v.sequence.values);
    io::write_f32(vdir / "audio.bin", v.audio);

    const auto params = v.frame_params(0);
    nlohmann::json lm = nlohmann::json::array();
    nlohmann::json au_frames = nlohmann::json::array();
    for (const auto& p : params) {
      lm.push_back(io::landmarks_to_json(face_landmarks(p, options.resolution)));
      const Eigen::VectorXd a = mock_au_intensities(p, v.emotion);
      au_frames.push_back(std::vector<double>(a.data(), a.data() + a.size()));
    }
    io::write_json(vdir / "meta.json", {{"video_id", v.sequence.video_id},
                                        {"fps", v.sequence.fps},
                                        {"emotion_class", emotion_name(v.emotion)},
                                        {"N", v.sequence.frames()},
                                        {"D_exp", v.sequence.dim()},
                                        {"identity_hue", v.identity_hue},
                                        {"art_palette", v.art_palette},
                                        {"resolution", options.resolution},
                                        {"landmarks", lm}});
    std::vector<int> ids;
    for (const auto& au : au_registry()) ids.push_back(au.id);
    io::write_json(vdir / "aus.json",
                   {{"video_id", v.sequence.video_id}, {"au_ids", ids}, {"frames", au_frames}});
    for (std::size_t n = 0; n < v.frames.size(); ++n) {
      io::write_png(vdir / "frames" / io::frame_filename(static_cast<int>(n)), v.frames[n]);
    }
    for (std::size_t n = 0; n < v.styled.size(); ++n) {
      io::write_png(vdir / "styled" / io::frame_filename(static_cast<int>(n)), v.styled[n]);
    }
  }
  io::write_png(dir / "art_reference.png",
                render_palette_reference(options.art_palette, options.resolution));
  io::write_json(dir / "art_style.json",
                 {{"palette_id", options.art_palette}, {"reference_image", "art_reference.png"}});
  io::write_json(dir / "corpus.json", info.to_json());
}

CorpusInfo read_corpus_info(const fs::path& dir) {
  if (!fs::exists(dir / "corpus.json")) {
    throw DataError("'" + dir.string() + "' is not a corpus directory (no corpus.json)");
  }
  return CorpusInfo::from_json(io::read_json(dir / "corpus.json"));
}

VideoSample load_video(const fs::path& dir, const std::string& video_id, const CorpusInfo& info,
                       bool with_frames) {
  const fs::path vdir = dir / video_id;
  const auto meta = io::read_json(vdir / "meta.json");
  VideoSample v;
  try {
    v.sequence.video_id = meta.at("video_id").get<std::string>();
    v.sequence.fps = meta.at("fps").get<double>();
    v.emotion = emotion_from_name(meta.at("emotion_class").get<std::string>());
    v.identity_hue = meta.at("identity_hue").get<double>();
    v.art_palette = meta.at("art_palette").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("meta.json of '" + video_id + "': " + e.what());
  }
  const int n = meta.at("N").get<int>();
  v.sequence.values = io::read_f32(vdir / "coeffs.bin", info.d_exp);
  v.audio = io::read_f32(vdir / "audio.bin", info.audio_dim);
  if (v.sequence.frames() != n || v.audio.rows() != n) {
    throw DataError("video '" + video_id + "' has inconsistent frame counts");
  }
  v.sequence.validate();
  if (with_frames) {
    for (int i = 0; i < n; ++i) {
      v.frames.push_back(io::read_png(vdir / "frames" / io::frame_filename(i)));
      v.styled.push_back(io::read_png(vdir / "styled" / io::frame_filename(i)));
    }
    const auto lm = meta.at("landmarks");
    for (int i = 0; i < n; ++i) v.frames[i].landmarks = io::landmarks_from_json(lm.at(i));
  }
  return v;
}

Eigen::VectorXd read_au_intensities(const fs::path& path) {
  const auto j = io::read_json(path);
  std::vector<std::vector<double>> frames;
  std::vector<int> ids;
  try {
    frames = j.at("frames").get<std::vector<std::vector<double>>>();
    ids = j.at("au_ids").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path.string() + "': " + e.what());
  }
  if (frames.empty()) throw DataError("'" + path.string() + "' has no frames");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(kNumActionUnits);
  for (const auto& f : frames) {
    if (f.size() != ids.size()) throw DataError("'" + path.string() + "' row length mismatch");
    for (std::size_t k = 0; k < ids.size(); ++k) mean(au_index(ids[k])) += f[k];
  }
  return mean / static_cast<double>(frames.size());
}

}  // namespace facestyle
