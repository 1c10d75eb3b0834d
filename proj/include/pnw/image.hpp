#pragma once

#include <cstdint>
#include <span>
#include <string>

#include <Eigen/Core>

#include "pnw/common.hpp"

namespace pnw {

using Index = Eigen::Index;

enum class ImageKind : std::uint8_t { Gray2D = 0, Color2D = 1, Volume3D = 2 };

inline const char* image_kind_name(ImageKind k) {
  switch (k) {
    case ImageKind::Gray2D: return "gray2d";
    case ImageKind::Color2D: return "color2d";
    case ImageKind::Volume3D: return "volume3d";
  }
  return "?";
}

/// Shape of one raw image. Meaning of (d0, d1, d2) by kind:
///   Gray2D    rows, cols, 1
///   Color2D   rows, cols, 3    (pixels interleaved R,G,B)
///   Volume3D  depth, rows, cols
struct ImageShape {
  ImageKind kind = ImageKind::Gray2D;
  Index d0 = 0;
  Index d1 = 0;
  Index d2 = 1;

  Index byte_count() const { return d0 * d1 * d2; }

  bool operator==(const ImageShape&) const = default;

  std::string to_string() const {
    std::string s = image_kind_name(kind);
    s += " " + std::to_string(d0) + "x" + std::to_string(d1);
    if (kind != ImageKind::Gray2D) s += "x" + std::to_string(d2);
    return s;
  }
};

/// Non-owning view of one image's raw 8-bit pixels. Layouts:
///   Gray2D    bytes[y * cols + x]
///   Color2D   bytes[(y * cols + x) * 3 + channel]
///   Volume3D  bytes[(z * rows + y) * cols + x]
/// Logical pixel values are bytes / 255 in [0, 1]; normalization happens when
/// a feature transform vectorizes the image, the raw bytes stay untouched so
/// duplicate detection can compare them exactly.
struct ImageView {
  ImageShape shape;
  std::span<const std::uint8_t> bytes;

  std::uint8_t at_gray(Index y, Index x) const {
    return bytes[y * shape.d1 + x];
  }
  std::uint8_t at_color(Index y, Index x, Index channel) const {
    return bytes[(y * shape.d1 + x) * 3 + channel];
  }
  std::uint8_t at_volume(Index z, Index y, Index x) const {
    return bytes[(z * shape.d1 + y) * shape.d2 + x];
  }
};

}  // namespace pnw
