#include "facestyle/io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "facestyle/error.hpp"

namespace facestyle::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw DataError("cannot open '" + path.string() + "'");
  return f;
}

template <typename T>
std::vector<char> to_le_bytes(const T* data, std::size_t n) {
  std::vector<char> bytes(n * sizeof(T));
  std::memcpy(bytes.data(), data, bytes.size());
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < n; ++i) std::reverse(&bytes[i * sizeof(T)], &bytes[(i + 1) * sizeof(T)]);
  }
  return bytes;
}

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
std::vector<T> from_le_bytes(const std::string& bytes, const fs::path& path) {
  if (bytes.size() % sizeof(T) != 0) throw DataError("truncated binary file '" + path.string() + "'");
  std::vector<T> out(bytes.size() / sizeof(T));
  std::string copy = bytes;
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::reverse(copy.begin() + i * sizeof(T), copy.begin() + (i + 1) * sizeof(T));
    }
  }
  std::memcpy(out.data(), copy.data(), copy.size());
  return out;
}

void write_bytes_atomic(const fs::path& path, const char* data, std::size_t n) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out.write(data, static_cast<std::streamsize>(n));
    if (!out) throw DataError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

}  // namespace

void write_png(const fs::path& path, const Frame& frame) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("PNG encode failed for '" + path.string() + "'");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, frame.width, frame.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> rowbuf(3 * frame.width);
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(frame.at(c, y, x), 0.0, 1.0);
        rowbuf[3 * x + c] = static_cast<png_byte>(std::lround(v * 255.0));
      }
    }
    png_write_row(png, rowbuf.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Frame read_png(const fs::path& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("PNG decode failed for '" + path.string() + "'");
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_gray_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  Frame frame;
  frame.width = static_cast<int>(png_get_image_width(png, info));
  frame.height = static_cast<int>(png_get_image_height(png, info));
  frame.pixels.resize(3 * frame.width * frame.height);
  std::vector<png_byte> rowbuf(png_get_rowbytes(png, info));
  for (int y = 0; y < frame.height; ++y) {
    png_read_row(png, rowbuf.data(), nullptr);
    for (int x = 0; x < frame.width; ++x) {
      for (int c = 0; c < 3; ++c) frame.at(c, y, x) = rowbuf[3 * x + c] / 255.0;
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return frame;
}

void write_f32(const fs::path& path, const CoeffMatrix& m) {
  const auto bytes = to_le_bytes(m.data(), static_cast<std::size_t>(m.size()));
  write_bytes_atomic(path, bytes.data(), bytes.size());
}

CoeffMatrix read_f32(const fs::path& path, int cols) {
  const auto values = from_le_bytes<float>(read_all(path), path);
  if (cols <= 0 || values.size() % cols != 0) {
    throw DataError("'" + path.string() + "' does not hold rows of " + std::to_string(cols));
  }
  const auto rows = static_cast<Eigen::Index>(values.size() / cols);
  return Eigen::Map<const CoeffMatrix>(values.data(), rows, cols);
}

void write_f64(const fs::path& path, const Eigen::ArrayXd& v) {
  const auto bytes = to_le_bytes(v.data(), static_cast<std::size_t>(v.size()));
  write_bytes_atomic(path, bytes.data(), bytes.size());
}

Eigen::ArrayXd read_f64(const fs::path& path) {
  const auto values = from_le_bytes<double>(read_all(path), path);
  return Eigen::Map<const Eigen::ArrayXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  write_bytes_atomic(path, text.data(), text.size());
}

void write_json(const fs::path& path, const Json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_all(path));
  } catch (const Json::parse_error& e) {
    throw DataError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

Json landmarks_to_json(const Landmarks& l) {
  Json arr = Json::array();
  for (const auto& p : l) arr.push_back({p.x(), p.y()});
  return arr;
}

Landmarks landmarks_from_json(const Json& j) {
  Landmarks out;
  for (const auto& p : j) out.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  return out;
}

std::string frame_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05d.png", index);
  return buf;
}

}  // namespace facestyle::io
