// facestyle command-line interface.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric or
// invariant error, 1 anything else.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "facestyle/io.hpp"
#include "facestyle/pipeline.hpp"

namespace fsty = facestyle;
namespace fs = std::filesystem;

namespace {

fsty::RunConfig load_config(const std::string& path) {
  return path.empty() ? fsty::RunConfig{} : fsty::RunConfig::load(path);
}

std::vector<double> parse_levels(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw fsty::ConfigError("--levels expects two numbers like 1.5,3.0, got '" + s + "'");
    }
  }
  if (out.size() != 2) throw fsty::ConfigError("--levels expects two comma-separated thresholds");
  return out;
}

struct LogSink {
  std::unique_ptr<std::ofstream> file;
  std::ostream* stream = &std::cout;

  explicit LogSink(const std::string& path) {
    if (path.empty()) return;
    file = std::make_unique<std::ofstream>(path, std::ios::app);
    if (!*file) throw fsty::ConfigError("cannot open log file " + path);
    stream = file.get();
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Emotion-text driven, art-styled talking-face generation on a synthetic corpus"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "Render the procedural corpus");
  std::string synth_out;
  int videos = -1, frames = -1, resolution = -1, palette = -1;
  std::int64_t synth_seed = -1;
  synth->add_option("--out", synth_out, "Corpus directory")->required();
  synth->add_option("--videos", videos, "Number of videos");
  synth->add_option("--frames", frames, "Frames per video");
  synth->add_option("--resolution", resolution, "Frame size (32, 64, 128 or 256)");
  synth->add_option("--palette", palette, "Art palette id for styled targets");
  synth->add_option("--seed", synth_seed, "Seed");

  // annotate
  auto* annotate = app.add_subcommand("annotate", "Write emotion-text records for a corpus");
  std::string ann_corpus, ann_out, levels;
  double threshold = -1;
  int candidates = -1;
  std::int64_t ann_seed = -1;
  annotate->add_option("--corpus", ann_corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  annotate->add_option("--out", ann_out, "Records directory")->required();
  annotate->add_option("--threshold", threshold, "AU activation threshold");
  annotate->add_option("--levels", levels, "Level boundaries, e.g. 1.5,3.0");
  annotate->add_option("--candidates", candidates, "Candidate sentences per video (>= 5)");
  annotate->add_option("--seed", ann_seed, "Seed");

  // shared training flags
  struct TrainFlags {
    std::string corpus, out, log;
    int steps = -1;
    std::int64_t seed = -1;
    bool resume = false, allow_mismatch = false;
  };
  auto add_train_flags = [](CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--corpus", f.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
    cmd->add_option("--out", f.out, "Checkpoint directory")->required();
    cmd->add_option("--steps", f.steps, "Override the configured step count");
    cmd->add_option("--seed", f.seed, "Seed");
    cmd->add_option("--log", f.log, "NDJSON log file (default stdout)");
    cmd->add_flag("--resume", f.resume, "Continue from the checkpoint in --out");
    cmd->add_flag("--allow-hash-mismatch", f.allow_mismatch, "Load checkpoints from a different config");
  };

  auto* pre = app.add_subcommand("pretrain-inversion", "Train the style encoder and generator");
  TrainFlags pre_flags;
  add_train_flags(pre, pre_flags);

  auto* style_e = app.add_subcommand("train-style-e", "Train the expression diffusion model");
  TrainFlags e_flags;
  std::string records;
  add_train_flags(style_e, e_flags);
  style_e->add_option("--records", records, "Annotation records directory")->required()->check(CLI::ExistingDirectory);

  auto* style_a = app.add_subcommand("train-style-a", "Train the art-style motion networks");
  TrainFlags a_flags;
  std::string pretrained;
  add_train_flags(style_a, a_flags);
  style_a->add_option("--pretrained", pretrained, "pretrain-inversion checkpoint")->required()->check(CLI::ExistingDirectory);

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a stylized talking-face sequence");
  std::string identity, audio, text, art, gen_out, ckpt_e, ckpt_a;
  std::int64_t gen_seed = 0;
  int sample_steps = -1;
  double fps = 25.0;
  bool gen_allow = false;
  gen->add_option("--identity", identity, "Identity PNG")->required()->check(CLI::ExistingFile);
  gen->add_option("--audio", audio, "float32 audio features (N x d_audio)")->required()->check(CLI::ExistingFile);
  gen->add_option("--text", text, "Emotion description")->required();
  gen->add_option("--art", art, "Art-style JSON")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--style-e", ckpt_e, "Stage E checkpoint")->required()->check(CLI::ExistingDirectory);
  gen->add_option("--style-a", ckpt_a, "Stage A checkpoint")->required()->check(CLI::ExistingDirectory);
  gen->add_option("--seed", gen_seed, "Sampling seed");
  gen->add_option("--steps", sample_steps, "DDIM steps (default from config)");
  gen->add_option("--fps", fps, "Frame rate recorded in index.json");
  gen->add_flag("--allow-hash-mismatch", gen_allow, "Load checkpoints from a different config");

  // eval
  auto* eval = app.add_subcommand("eval", "SSIM, M-LMD and F-LMD against reference videos");
  std::string pred, gt, report_path;
  eval->add_option("--pred", pred, "Generated video directory (or a directory of them)")->required();
  eval->add_option("--gt", gt, "Reference video directory (or corpus root)")->required();
  eval->add_option("--report", report_path, "Report path (default <pred>/report.json)");

  auto* schema = app.add_subcommand("config-schema", "Print every config key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (schema->parsed()) {
    std::cout << fsty::RunConfig::schema().dump(2) << '\n';
    return 0;
  }

  fsty::RunConfig config = load_config(config_path);

  if (synth->parsed()) {
    if (videos > 0) config.corpus.num_videos = videos;
    if (frames > 0) config.corpus.frames_per_video = frames;
    if (resolution > 0) config.corpus.resolution = resolution;
    if (palette >= 0) config.corpus.art_palette = palette;
    if (synth_seed >= 0) config.seed = static_cast<std::uint64_t>(synth_seed);
    config.validate();
    const auto corpus = fsty::synth_data(synth_out, config.corpus, config.seed);
    std::cout << "wrote " << corpus.size() << " videos to " << synth_out << '\n';
    return 0;
  }

  if (annotate->parsed()) {
    auto& p = config.annotation.pipeline;
    if (threshold >= 0) p.leveling.threshold = threshold;
    if (!levels.empty()) {
      const auto l = parse_levels(levels);
      p.leveling.lower = l[0];
      p.leveling.upper = l[1];
    }
    if (candidates >= 0) p.candidates = candidates;
    if (ann_seed >= 0) p.seed = static_cast<std::uint64_t>(ann_seed);
    config.validate();
    const auto summary = fsty::run_annotation(config, ann_corpus, ann_out);
    std::cout << summary.to_json().dump() << '\n';
    for (const auto& f : summary.failures) {
      std::cerr << "skipped " << f.video_id << ": " << f.error << '\n';
    }
    return 0;
  }

  auto apply = [&](const TrainFlags& f, int& steps_field) {
    if (f.seed >= 0) config.seed = static_cast<std::uint64_t>(f.seed);
    if (f.steps >= 0) steps_field = f.steps;
    config.validate();
  };
  auto options = [](const TrainFlags& f, std::ostream* log) {
    fsty::TrainOptions o;
    o.resume = f.resume;
    o.allow_config_mismatch = f.allow_mismatch;
    o.log = log;
    return o;
  };

  if (pre->parsed()) {
    apply(pre_flags, config.style_a.pretrain_steps);
    LogSink log(pre_flags.log);
    const auto r = fsty::pretrain_inversion(config, pre_flags.corpus, pre_flags.out, options(pre_flags, log.stream));
    std::cerr << "pretrain checkpoint at step " << r.manifest.step << " in " << pre_flags.out << '\n';
    return 0;
  }

  if (style_e->parsed()) {
    apply(e_flags, config.style_e.steps);
    LogSink log(e_flags.log);
    const auto r = fsty::train_style_e(config, e_flags.corpus, records, e_flags.out, options(e_flags, log.stream));
    std::cerr << "stage E checkpoint at step " << r.manifest.step << " in " << e_flags.out << '\n';
    return 0;
  }

  if (style_a->parsed()) {
    apply(a_flags, config.style_a.steps);
    LogSink log(a_flags.log);
    const auto r = fsty::train_style_a(config, a_flags.corpus, pretrained, a_flags.out, options(a_flags, log.stream));
    std::cerr << "stage A checkpoint at step " << r.manifest.step << " in " << a_flags.out
              << ", held-out L_rec " << r.heldout_rec << '\n';
    return 0;
  }

  if (gen->parsed()) {
    fsty::GenerateOptions opts;
    opts.num_steps = sample_steps > 0 ? sample_steps : config.style_e.sample_steps;
    opts.allow_config_mismatch = gen_allow;
    if (!config_path.empty()) opts.config = &config;
    const auto e = fsty::load_style_e(ckpt_e, opts.config, gen_allow);
    const auto a = fsty::load_style_a(ckpt_a, opts.config, gen_allow);
    const int raw_audio = e.manifest.model.at("clients").at("audio").value("raw_dim", fsty::kDefaultAudioDim);
    fsty::GenerationInputs in;
    in.identity = fsty::io::read_png(identity);
    in.audio = fsty::io::read_f32(audio, opts.config ? config.audio_client.raw_dim : raw_audio);
    in.text = text;
    in.art = fsty::io::read_png(fsty::ArtStyle::load(art).reference_image);
    in.fps = fps;
    const auto result = fsty::generate(in, e, *a.model, static_cast<std::uint64_t>(gen_seed), opts.num_steps);
    fsty::write_generation(gen_out, result);
    std::cout << "wrote " << result.frames.size() << " frames to " << gen_out << " ("
              << result.denoiser_calls << " denoiser calls)\n";
    return 0;
  }

  if (eval->parsed()) {
    const auto report = fsty::evaluate_dirs(pred, gt);
    const fs::path out = report_path.empty() ? fs::path(pred) / "report.json" : fs::path(report_path);
    fsty::io::write_json(out, report.to_json());
    std::cout << report.table();
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const fsty::Error& e) {
    std::cerr << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
