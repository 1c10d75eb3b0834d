#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "pnw/common.hpp"
#include "pnw/image.hpp"

namespace pnw {

enum class FeatureKind : std::uint8_t {
  IdentityVector = 0,  // grayscale image flattened row-major
  DownsampleTrim = 1,  // grayscale: 2x2 average pool, then drop the 1-pixel border
  ChannelSelect = 2,   // one RGB channel plane of a color image
  ChannelStack = 3,    // all three channel planes, concatenated R,G,B
  GrayBinary = 4,      // grayscale thresholded to {0, 1}
  Volume3D = 5,        // 3D volume flattened depth-major
};

inline const char* feature_kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::IdentityVector: return "identity";
    case FeatureKind::DownsampleTrim: return "downsample_trim";
    case FeatureKind::ChannelSelect: return "channel";
    case FeatureKind::ChannelStack: return "channel_stack";
    case FeatureKind::GrayBinary: return "gray_binary";
    case FeatureKind::Volume3D: return "volume";
  }
  return "?";
}

/// One deterministic transform image -> feature vector.
///
/// `reduce` applies the 2x2-average-pool-plus-trim reduction to every channel
/// plane before vectorization (ChannelSelect / ChannelStack only). This is how
/// 64x64 color images become 900-per-channel and 2700-stacked inputs.
///
/// `output_dims` is the expected vector length. 0 means "infer from the image
/// shape"; a nonzero value is checked against the analytic length and a
/// mismatch is a ShapeMismatch error.
struct FeatureSpec {
  FeatureKind kind = FeatureKind::IdentityVector;
  int channel = 0;          // ChannelSelect: 0=R 1=G 2=B
  double threshold = 0.5;   // GrayBinary
  bool reduce = false;      // ChannelSelect / ChannelStack
  Index output_dims = 0;

  bool operator==(const FeatureSpec&) const = default;
};

namespace detail {

inline void require(bool ok, const FeatureSpec& spec, const ImageShape& shape,
                    const char* why) {
  if (!ok) {
    fail(ErrorCode::ShapeMismatch,
         std::string(feature_kind_name(spec.kind)) + " on " +
             shape.to_string() + ": " + why);
  }
}

inline Index reduced_side(Index side) { return side / 2 - 2; }

}  // namespace detail

/// Analytic output length of `spec` applied to images of `shape`.
/// Throws ShapeMismatch when the image kind or geometry is incompatible.
inline Index feature_output_dim(const FeatureSpec& spec,
                                const ImageShape& shape) {
  using detail::require;
  const Index rows = shape.kind == ImageKind::Volume3D ? shape.d1 : shape.d0;
  const Index cols = shape.kind == ImageKind::Volume3D ? shape.d2 : shape.d1;
  auto plane_dim = [&](bool reduce) -> Index {
    if (!reduce) return rows * cols;
    require(rows % 2 == 0 && cols % 2 == 0, spec, shape,
            "pooling needs even side lengths");
    const Index r = detail::reduced_side(rows);
    const Index c = detail::reduced_side(cols);
    require(r > 0 && c > 0, spec, shape, "image too small to pool and trim");
    return r * c;
  };

  Index analytic = 0;
  switch (spec.kind) {
    case FeatureKind::IdentityVector:
      require(shape.kind == ImageKind::Gray2D, spec, shape,
              "needs a grayscale image");
      analytic = rows * cols;
      break;
    case FeatureKind::DownsampleTrim:
      require(shape.kind == ImageKind::Gray2D, spec, shape,
              "needs a grayscale image");
      analytic = plane_dim(true);
      break;
    case FeatureKind::ChannelSelect:
      require(shape.kind == ImageKind::Color2D, spec, shape,
              "needs a color image");
      require(spec.channel >= 0 && spec.channel < 3, spec, shape,
              "channel must be 0, 1 or 2");
      analytic = plane_dim(spec.reduce);
      break;
    case FeatureKind::ChannelStack:
      require(shape.kind == ImageKind::Color2D, spec, shape,
              "needs a color image");
      analytic = 3 * plane_dim(spec.reduce);
      break;
    case FeatureKind::GrayBinary:
      require(shape.kind == ImageKind::Gray2D, spec, shape,
              "needs a grayscale image");
      analytic = rows * cols;
      break;
    case FeatureKind::Volume3D:
      require(shape.kind == ImageKind::Volume3D, spec, shape,
              "needs a 3D volume");
      analytic = shape.d0 * shape.d1 * shape.d2;
      break;
  }
  if (spec.output_dims != 0 && spec.output_dims != analytic) {
    fail(ErrorCode::ShapeMismatch,
         std::string(feature_kind_name(spec.kind)) + " on " +
             shape.to_string() + " yields " + std::to_string(analytic) +
             " values, spec expects " + std::to_string(spec.output_dims));
  }
  return analytic;
}

namespace detail {

// 2x2 average pool then drop the outer 1-pixel frame of the pooled plane.
// `pixel(y, x)` reads raw bytes; output is normalized to [0, 1].
template <typename Scalar, typename PixelFn>
void pool_trim_plane(Index rows, Index cols, PixelFn pixel,
                     Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& out,
                     Index offset) {
  const Index out_rows = reduced_side(rows);
  const Index out_cols = reduced_side(cols);
  for (Index y = 0; y < out_rows; ++y) {
    const Index sy = 2 * (y + 1);  // +1 skips the trimmed border
    for (Index x = 0; x < out_cols; ++x) {
      const Index sx = 2 * (x + 1);
      const int sum = int(pixel(sy, sx)) + int(pixel(sy, sx + 1)) +
                      int(pixel(sy + 1, sx)) + int(pixel(sy + 1, sx + 1));
      out[offset + y * out_cols + x] = Scalar(sum) / Scalar(4 * 255);
    }
  }
}

template <typename Scalar, typename PixelFn>
void flatten_plane(Index rows, Index cols, PixelFn pixel,
                   Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& out,
                   Index offset) {
  for (Index y = 0; y < rows; ++y)
    for (Index x = 0; x < cols; ++x)
      out[offset + y * cols + x] = Scalar(pixel(y, x)) / Scalar(255);
}

}  // namespace detail

/// Applies `spec` to one image. Pure: identical (spec, image) pairs produce
/// bit-identical vectors. Elements lie in [0, 1]; GrayBinary yields {0, 1}.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> apply_feature(const FeatureSpec& spec,
                                                       ImageView image) {
  const ImageShape& shape = image.shape;
  if (static_cast<Index>(image.bytes.size()) != shape.byte_count()) {
    fail(ErrorCode::ShapeMismatch, "image byte count does not match its shape");
  }
  const Index n = feature_output_dim(spec, shape);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(n);

  const Index rows = shape.kind == ImageKind::Volume3D ? shape.d1 : shape.d0;
  const Index cols = shape.kind == ImageKind::Volume3D ? shape.d2 : shape.d1;
  auto gray = [&](Index y, Index x) { return image.at_gray(y, x); };

  switch (spec.kind) {
    case FeatureKind::IdentityVector:
      detail::flatten_plane<Scalar>(rows, cols, gray, out, 0);
      break;
    case FeatureKind::DownsampleTrim:
      detail::pool_trim_plane<Scalar>(rows, cols, gray, out, 0);
      break;
    case FeatureKind::ChannelSelect: {
      auto plane = [&](Index y, Index x) {
        return image.at_color(y, x, spec.channel);
      };
      if (spec.reduce)
        detail::pool_trim_plane<Scalar>(rows, cols, plane, out, 0);
      else
        detail::flatten_plane<Scalar>(rows, cols, plane, out, 0);
      break;
    }
    case FeatureKind::ChannelStack: {
      const Index plane_n = n / 3;
      for (Index ch = 0; ch < 3; ++ch) {
        auto plane = [&](Index y, Index x) { return image.at_color(y, x, ch); };
        if (spec.reduce)
          detail::pool_trim_plane<Scalar>(rows, cols, plane, out, ch * plane_n);
        else
          detail::flatten_plane<Scalar>(rows, cols, plane, out, ch * plane_n);
      }
      break;
    }
    case FeatureKind::GrayBinary:
      for (Index y = 0; y < rows; ++y)
        for (Index x = 0; x < cols; ++x)
          out[y * cols + x] =
              (Scalar(gray(y, x)) / Scalar(255) >= Scalar(spec.threshold))
                  ? Scalar(1)
                  : Scalar(0);
      break;
    case FeatureKind::Volume3D:
      for (Index z = 0; z < shape.d0; ++z)
        for (Index y = 0; y < shape.d1; ++y)
          for (Index x = 0; x < shape.d2; ++x)
            out[(z * shape.d1 + y) * shape.d2 + x] =
                Scalar(image.at_volume(z, y, x)) / Scalar(255);
      break;
  }
  return out;
}

/// n_f channel features cycling R, G, B, R, G, B, ...
inline std::vector<FeatureSpec> cyclic_channel_specs(int n_f,
                                                     bool reduce = false) {
  if (n_f < 1) fail(ErrorCode::ZeroDimension, "cyclic_channel_specs needs n_f >= 1");
  std::vector<FeatureSpec> specs;
  specs.reserve(static_cast<std::size_t>(n_f));
  for (int k = 0; k < n_f; ++k) {
    FeatureSpec s;
    s.kind = FeatureKind::ChannelSelect;
    s.channel = k % 3;
    s.reduce = reduce;
    specs.push_back(s);
  }
  return specs;
}

}  // namespace pnw
