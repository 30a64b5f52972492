#pragma once

// File formats: PNG frames, little-endian float32 matrices, JSON helpers and
// atomic writes.

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "facestyle/coeffspace.hpp"

namespace facestyle::io {

namespace fs = std::filesystem;
using Json = nlohmann::json;

// 8-bit RGB PNG; values are rounded from [0, 1].
void write_png(const fs::path& path, const Frame& frame);
Frame read_png(const fs::path& path);

// Row-major little-endian float32 matrix with the row count implied by the
// file size.
void write_f32(const fs::path& path, const CoeffMatrix& m);
CoeffMatrix read_f32(const fs::path& path, int cols);

// Little-endian float64 blob.
void write_f64(const fs::path& path, const Eigen::ArrayXd& v);
Eigen::ArrayXd read_f64(const fs::path& path);

// Writes to a sibling temporary then renames over the target.
void write_text_atomic(const fs::path& path, const std::string& text);
void write_json(const fs::path& path, const Json& j);
Json read_json(const fs::path& path);

Json landmarks_to_json(const Landmarks& l);
Landmarks landmarks_from_json(const Json& j);

std::string frame_filename(int index);

}  // namespace facestyle::io
