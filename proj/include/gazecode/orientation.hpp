#pragma once

#include "gazecode/error.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

namespace gazecode {

// Axis convention, used everywhere in the library: the device is described
// in its native portrait frame with +x to the right and +y down the screen.
// An accelerometer reading of (0, -g, 0) means the device is held upright in
// Portrait.

enum class OrientationMode { Portrait, ReversePortrait, Landscape, ReverseLandscape };

inline constexpr std::array<OrientationMode, 4> kAllOrientations = {
    OrientationMode::Portrait, OrientationMode::ReversePortrait, OrientationMode::Landscape,
    OrientationMode::ReverseLandscape};

/// Result of classifying one accelerometer sample; empty means indeterminate
/// (device close to flat).
using OrientationReading = std::optional<OrientationMode>;

constexpr std::string_view to_string(OrientationMode mode) noexcept {
  switch (mode) {
  case OrientationMode::Portrait: return "portrait";
  case OrientationMode::ReversePortrait: return "reverse_portrait";
  case OrientationMode::Landscape: return "landscape";
  case OrientationMode::ReverseLandscape: return "reverse_landscape";
  }
  return "portrait";
}

inline constexpr std::string_view kIndeterminate = "indeterminate";

constexpr std::string_view to_string(const OrientationReading& reading) noexcept {
  return reading ? to_string(*reading) : kIndeterminate;
}

inline std::optional<OrientationReading> parse_orientation(std::string_view text) {
  for (auto mode : kAllOrientations) {
    if (text == to_string(mode)) {
      return OrientationReading{mode};
    }
  }
  if (text == kIndeterminate) {
    return OrientationReading{};
  }
  return std::nullopt;
}

constexpr bool is_landscape(OrientationMode mode) noexcept {
  return mode == OrientationMode::Landscape || mode == OrientationMode::ReverseLandscape;
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

/// Physical screen description in the native portrait frame.
struct DeviceGeometry {
  int screen_w_px = 1080;
  int screen_h_px = 1920;
  double dpi = 432.0;
  /// Front camera position in inches relative to the screen's top-left
  /// corner; negative y means the camera sits above the active area.
  Vec2 camera_offset_in{1.25, -0.2};

  friend bool operator==(const DeviceGeometry&, const DeviceGeometry&) = default;

  void validate() const {
    if (screen_w_px <= 0 || screen_h_px <= 0) {
      throw Error(ErrorCode::InvalidArgument, "screen dimensions must be positive");
    }
    if (!(dpi > 0.0) || !std::isfinite(dpi)) {
      throw Error(ErrorCode::InvalidArgument, "dpi must be positive");
    }
    if (!std::isfinite(camera_offset_in.x) || !std::isfinite(camera_offset_in.y)) {
      throw Error(ErrorCode::InvalidArgument, "camera offset must be finite");
    }
  }

  /// Pixel size of the screen as displayed in `mode`.
  [[nodiscard]] constexpr Vec2 displayed_px(OrientationMode mode) const noexcept {
    return is_landscape(mode) ? Vec2{static_cast<double>(screen_h_px), static_cast<double>(screen_w_px)}
                              : Vec2{static_cast<double>(screen_w_px), static_cast<double>(screen_h_px)};
  }
};

inline constexpr double kStandardGravity = 9.80665;
inline constexpr double kFlatThreshold = kStandardGravity / 2.0; // ~4.9 m/s^2
inline constexpr std::size_t kGateSamples = 10;

/// Maps an accelerometer sample to the held orientation. The dominant
/// in-plane gravity component decides; ties go to the portrait pair.
inline OrientationReading classify_orientation(const Vec3& accel) {
  if (!std::isfinite(accel.x) || !std::isfinite(accel.y) || !std::isfinite(accel.z)) {
    throw Error(ErrorCode::InvalidArgument, "accelerometer sample must be finite");
  }
  if (std::hypot(accel.x, accel.y) < kFlatThreshold) {
    return std::nullopt;
  }
  if (std::abs(accel.y) >= std::abs(accel.x)) {
    return accel.y < 0 ? OrientationMode::Portrait : OrientationMode::ReversePortrait;
  }
  return accel.x < 0 ? OrientationMode::Landscape : OrientationMode::ReverseLandscape;
}

/// True once the newest `required_run` readings all match `required`.
inline bool check_orientation_gate(OrientationMode required, std::span<const OrientationReading> recent,
                                   std::size_t required_run = kGateSamples) {
  if (required_run == 0 || recent.size() < required_run) {
    return false;
  }
  for (std::size_t i = recent.size() - required_run; i < recent.size(); ++i) {
    if (recent[i] != required) {
      return false;
    }
  }
  return true;
}

/// Visual angle subtended by an on-screen offset, in degrees.
inline double eccentricity_deg(double radius_in, double viewing_distance_in) {
  if (!(viewing_distance_in > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "viewing distance must be positive");
  }
  if (radius_in < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "radius must be non-negative");
  }
  return std::atan(radius_in / viewing_distance_in) * (180.0 / 3.14159265358979323846);
}

/// Native-portrait pixel position of a normalized point displayed in `mode`.
inline Vec2 displayed_to_portrait_px(double u, double v, OrientationMode mode, const DeviceGeometry& g) {
  const double w = g.screen_w_px;
  const double h = g.screen_h_px;
  switch (mode) {
  case OrientationMode::Portrait: return {u * w, v * h};
  case OrientationMode::ReversePortrait: return {(1.0 - u) * w, (1.0 - v) * h};
  // Displayed "down" is physical +x; displayed "right" is physical -y.
  case OrientationMode::Landscape: return {v * w, (1.0 - u) * h};
  // Displayed "down" is physical -x; displayed "right" is physical +y.
  case OrientationMode::ReverseLandscape: return {(1.0 - v) * w, u * h};
  }
  return {};
}

/// Offset in inches from the front camera to a displayed target, expressed in
/// the native portrait frame.
inline Vec2 target_offset_from_camera(double u, double v, OrientationMode mode, const DeviceGeometry& g) {
  if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0) {
    throw Error(ErrorCode::InvalidArgument, "normalized coordinates must lie in [0,1]");
  }
  const Vec2 px = displayed_to_portrait_px(u, v, mode, g);
  return {px.x / g.dpi - g.camera_offset_in.x, px.y / g.dpi - g.camera_offset_in.y};
}

/// Rotates a portrait-frame offset into the frame the participant sees in
/// `mode` (+x right, +y down as displayed). This is the frame in which
/// "above/below/left/right of the camera" is meaningful to the viewer.
constexpr Vec2 to_viewer_frame(const Vec2& portrait_offset, OrientationMode mode) noexcept {
  switch (mode) {
  case OrientationMode::Portrait: return portrait_offset;
  case OrientationMode::ReversePortrait: return {-portrait_offset.x, -portrait_offset.y};
  case OrientationMode::Landscape: return {-portrait_offset.y, portrait_offset.x};
  case OrientationMode::ReverseLandscape: return {portrait_offset.y, -portrait_offset.x};
  }
  return portrait_offset;
}

} // namespace gazecode
