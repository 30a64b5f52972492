#include "facestyle/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "facestyle/error.hpp"

namespace facestyle {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

Eigen::MatrixXd gaussian_window(int size) {
  Eigen::VectorXd g(size);
  const double center = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i) g(i) = std::exp(-(i - center) * (i - center) / (2 * kSigma * kSigma));
  g /= g.sum();
  return g * g.transpose();
}

double channel_ssim(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const int wy = std::min<int>(kWindow, static_cast<int>(x.rows()));
  const int wx = std::min<int>(kWindow, static_cast<int>(x.cols()));
  const int win = std::min(wx, wy);
  const Eigen::MatrixXd w = gaussian_window(win);
  double total = 0.0;
  int count = 0;
  for (int i = 0; i + win <= x.rows(); ++i) {
    for (int j = 0; j + win <= x.cols(); ++j) {
      const auto bx = x.block(i, j, win, win).array();
      const auto by = y.block(i, j, win, win).array();
      const double mx = (w.array() * bx).sum();
      const double my = (w.array() * by).sum();
      const double sxx = (w.array() * (bx - mx).square()).sum();
      const double syy = (w.array() * (by - my).square()).sum();
      const double sxy = (w.array() * (bx - mx) * (by - my)).sum();
      total += ((2 * mx * my + kC1) * (2 * sxy + kC2)) /
               ((mx * mx + my * my + kC1) * (sxx + syy + kC2));
      ++count;
    }
  }
  return total / count;
}

}  // namespace

double ssim(const Frame& a, const Frame& b) {
  if (a.height != b.height || a.width != b.width || a.pixels.size() != b.pixels.size()) {
    throw ShapeError("ssim on frames of different size");
  }
  if (a.height < 1 || a.width < 1) throw ShapeError("ssim on an empty frame");
  const int channels = static_cast<int>(a.pixels.size() / (a.height * a.width));
  double sum = 0.0;
  for (int c = 0; c < channels; ++c) {
    using RowMap = Eigen::Map<const RowMatrixX<double>>;
    const int plane = a.height * a.width;
    const Eigen::MatrixXd x = RowMap(a.pixels.data() + c * plane, a.height, a.width);
    const Eigen::MatrixXd y = RowMap(b.pixels.data() + c * plane, b.height, b.width);
    sum += channel_ssim(x, y);
  }
  return sum / channels;
}

double lmd(const Landmarks& pred, const Landmarks& target, LandmarkSubset subset) {
  if (pred.size() != target.size()) {
    throw DataError("landmark counts differ: " + std::to_string(pred.size()) + " vs " +
                    std::to_string(target.size()));
  }
  std::size_t begin = 0, end = pred.size();
  if (subset == LandmarkSubset::kMouth) {
    if (pred.size() < landmarks::kMouthBegin + landmarks::kMouthCount) {
      throw DataError("landmark set too small for the mouth subset");
    }
    begin = landmarks::kMouthBegin;
    end = landmarks::kMouthBegin + landmarks::kMouthCount;
  }
  if (end == begin) throw DataError("empty landmark set");
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) sum += (pred[i] - target[i]).norm();
  return sum / static_cast<double>(end - begin);
}

double lmd(const std::vector<Landmarks>& pred, const std::vector<Landmarks>& target,
           LandmarkSubset subset) {
  if (pred.size() != target.size()) throw DataError("landmark sequences differ in length");
  if (pred.empty()) throw DataError("empty landmark sequence");
  double sum = 0.0;
  for (std::size_t n = 0; n < pred.size(); ++n) sum += lmd(pred[n], target[n], subset);
  return sum / static_cast<double>(pred.size());
}

void EvalReport::add(const EvalRow& row) {
  rows.push_back(row);
  double s = 0, m = 0, f = 0;
  int n = 0;
  for (const auto& r : rows) {
    s += r.ssim * r.frames;
    m += r.m_lmd * r.frames;
    f += r.f_lmd * r.frames;
    n += r.frames;
  }
  if (n > 0) {
    ssim = s / n;
    m_lmd = m / n;
    f_lmd = f / n;
  }
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json rj = nlohmann::json::array();
  for (const auto& r : rows) {
    rj.push_back({{"video_id", r.video_id},
                  {"frames", r.frames},
                  {"ssim", r.ssim},
                  {"m_lmd", r.m_lmd},
                  {"f_lmd", r.f_lmd}});
  }
  return {{"ssim", ssim}, {"m_lmd", m_lmd}, {"f_lmd", f_lmd}, {"videos", rj}};
}

std::string EvalReport::table() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-24s %8s %8s %8s %8s\n", "video", "frames", "SSIM", "M-LMD",
                "F-LMD");
  out += line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-24s %8d %8.4f %8.4f %8.4f\n", r.video_id.c_str(), r.frames,
                  r.ssim, r.m_lmd, r.f_lmd);
    out += line;
  }
  int n = 0;
  for (const auto& r : rows) n += r.frames;
  std::snprintf(line, sizeof(line), "%-24s %8d %8.4f %8.4f %8.4f\n", "all", n, ssim, m_lmd, f_lmd);
  out += line;
  return out;
}

EvalRow evaluate_sequence(const std::string& video_id, const std::vector<Frame>& pred,
                          const std::vector<Frame>& target) {
  if (pred.size() != target.size()) {
    throw DataError("'" + video_id + "': " + std::to_string(pred.size()) + " predicted frames vs " +
                    std::to_string(target.size()) + " reference frames");
  }
  if (pred.empty()) throw DataError("'" + video_id + "' has no frames");
  EvalRow row;
  row.video_id = video_id;
  row.frames = static_cast<int>(pred.size());
  std::vector<Landmarks> lp, lt;
  for (std::size_t n = 0; n < pred.size(); ++n) {
    row.ssim += ssim(pred[n], target[n]);
    lp.push_back(pred[n].landmarks);
    lt.push_back(target[n].landmarks);
  }
  row.ssim /= row.frames;
  row.m_lmd = lmd(lp, lt, LandmarkSubset::kMouth);
  row.f_lmd = lmd(lp, lt, LandmarkSubset::kFace);
  return row;
}

}  // namespace facestyle
