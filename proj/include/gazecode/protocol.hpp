#pragma once

#include "gazecode/error.hpp"
#include "gazecode/orientation.hpp"
#include "gazecode/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gazecode {

using TrialId = std::uint64_t;

inline constexpr std::uint32_t kDecimalAlphabet = 10;

/// Issued or entered code. Digits are symbols of an alphabet (decimal
/// unless stated otherwise); repeats are allowed.
struct Code {
  std::vector<int> digits;

  [[nodiscard]] std::size_t size() const noexcept { return digits.size(); }
  [[nodiscard]] bool empty() const noexcept { return digits.empty(); }
  friend bool operator==(const Code&, const Code&) = default;

  [[nodiscard]] std::string str() const {
    std::string out;
    out.reserve(digits.size());
    for (int d : digits) {
      out += static_cast<char>('0' + d);
    }
    return out;
  }

  [[nodiscard]] bool valid(std::uint32_t alphabet = kDecimalAlphabet) const noexcept {
    return std::all_of(digits.begin(), digits.end(),
                       [alphabet](int d) { return d >= 0 && d < static_cast<int>(alphabet); });
  }
};

struct VerificationResult {
  bool accepted = false;
  std::vector<bool> per_digit_correct;
  friend bool operator==(const VerificationResult&, const VerificationResult&) = default;
};

/// Draws `code_length` i.i.d. uniform symbols. Deterministic in `seed`.
inline Code generate_code(int code_length, std::uint64_t seed, std::uint32_t alphabet = kDecimalAlphabet) {
  if (code_length < 1) {
    throw Error(ErrorCode::InvalidArgument, "code length must be at least 1");
  }
  if (alphabet < 2) {
    throw Error(ErrorCode::InvalidArgument, "alphabet needs at least two symbols");
  }
  SplitMix64 rng(seed);
  Code code;
  code.digits.resize(static_cast<std::size_t>(code_length));
  for (auto& d : code.digits) {
    d = static_cast<int>(rng.below(alphabet));
  }
  return code;
}

/// Element-wise comparison. A length mismatch is a rejection, not an error;
/// per-digit flags cover the common prefix.
inline VerificationResult verify_entry(const Code& issued, const Code& entered) {
  if (issued.empty()) {
    throw Error(ErrorCode::InvalidArgument, "issued code is empty");
  }
  const std::size_t n = std::min(issued.size(), entered.size());
  VerificationResult result;
  result.per_digit_correct.resize(n);
  bool all = issued.size() == entered.size();
  for (std::size_t i = 0; i < n; ++i) {
    result.per_digit_correct[i] = issued.digits[i] == entered.digits[i];
    all = all && result.per_digit_correct[i];
  }
  result.accepted = all;
  return result;
}

namespace detail {
inline double integer_power(std::uint32_t base, int exponent) {
  double out = 1.0;
  for (int i = 0; i < exponent; ++i) {
    out *= base;
  }
  return out;
}
} // namespace detail

/// Probability that a uniform guess matches an N-symbol code. For the
/// decimal alphabet this is exactly the double nearest 10^-N.
inline double p_guess(int code_length, std::uint32_t alphabet = kDecimalAlphabet) {
  if (code_length < 1) {
    throw Error(ErrorCode::InvalidArgument, "code length must be at least 1");
  }
  return 1.0 / detail::integer_power(alphabet, code_length);
}

inline double expected_random_successes(int code_length, std::uint64_t trials,
                                        std::uint32_t alphabet = kDecimalAlphabet) {
  if (code_length < 1) {
    throw Error(ErrorCode::InvalidArgument, "code length must be at least 1");
  }
  // Dividing keeps the result correctly rounded (1000 / 10^5 == 0.01).
  return static_cast<double>(trials) / detail::integer_power(alphabet, code_length);
}

struct TimeModelParams {
  double t_setup_ms = 2000.0;
  double t_digit_ms = 800.0;
  double t_entry_ms = 3000.0;
  friend bool operator==(const TimeModelParams&, const TimeModelParams&) = default;

  void validate() const {
    if (!(t_setup_ms >= 0.0) || !(t_digit_ms >= 0.0) || !(t_entry_ms >= 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "time model terms must be non-negative");
    }
  }
};

/// Affine trial duration model: setup + N * per-digit + entry.
inline double trial_time(const TimeModelParams& params, int code_length) {
  if (code_length < 1) {
    throw Error(ErrorCode::InvalidArgument, "code length must be at least 1");
  }
  params.validate();
  return params.t_setup_ms + code_length * params.t_digit_ms + params.t_entry_ms;
}

struct StimulusParams {
  double opacity = 1.0;
  /// Empty when the digit stays until the participant taps.
  std::optional<double> digit_duration_ms = 300.0;
  double inter_digit_gap_ms = 200.0;
  int bubble_diameter_px = 48;
  friend bool operator==(const StimulusParams&, const StimulusParams&) = default;

  [[nodiscard]] bool tap_terminated() const noexcept { return !digit_duration_ms.has_value(); }

  void validate() const {
    if (!(opacity > 0.0 && opacity <= 1.0)) {
      throw Error(ErrorCode::InvalidConfiguration, "opacity must lie in (0,1]");
    }
    if (digit_duration_ms && !(*digit_duration_ms > 0.0)) {
      throw Error(ErrorCode::InvalidConfiguration, "digit duration must be positive");
    }
    if (!(inter_digit_gap_ms >= 0.0)) {
      throw Error(ErrorCode::InvalidConfiguration, "inter-digit gap must be non-negative");
    }
    if (bubble_diameter_px <= 0) {
      throw Error(ErrorCode::InvalidConfiguration, "bubble diameter must be positive");
    }
  }
};

enum class ConditionKind { Control, Tap, Ring, Interval };

constexpr std::string_view to_string(ConditionKind kind) noexcept {
  switch (kind) {
  case ConditionKind::Control: return "CONTROL";
  case ConditionKind::Tap: return "TAP";
  case ConditionKind::Ring: return "RING";
  case ConditionKind::Interval: return "INTERVAL";
  }
  return "CONTROL";
}

inline std::optional<ConditionKind> parse_condition_kind(std::string_view text) {
  for (auto kind : {ConditionKind::Control, ConditionKind::Tap, ConditionKind::Ring, ConditionKind::Interval}) {
    if (text == to_string(kind)) {
      return kind;
    }
  }
  return std::nullopt;
}

struct Condition {
  ConditionKind kind = ConditionKind::Control;
  std::optional<double> ring_radius_in;
  std::optional<double> duration_ms;
  friend bool operator==(const Condition&, const Condition&) = default;

  static Condition control(double duration_ms = 300.0) { return {ConditionKind::Control, std::nullopt, duration_ms}; }
  static Condition tap() { return {ConditionKind::Tap, std::nullopt, std::nullopt}; }
  static Condition ring(double radius_in) { return {ConditionKind::Ring, radius_in, std::nullopt}; }
  static Condition interval(double duration_ms) { return {ConditionKind::Interval, std::nullopt, duration_ms}; }

  /// Short human-readable label, e.g. "RING(0.13in)".
  [[nodiscard]] std::string label() const {
    std::string out(to_string(kind));
    auto trim = [](double x) {
      std::string s = std::to_string(x);
      s.erase(s.find_last_not_of('0') + 1);
      if (!s.empty() && s.back() == '.') {
        s.pop_back();
      }
      return s;
    };
    if (ring_radius_in) {
      out += "(" + trim(*ring_radius_in) + "in)";
    } else if (duration_ms) {
      out += "(" + trim(*duration_ms) + "ms)";
    }
    return out;
  }
};

/// Per-session protocol configuration. Defaults follow the prototype:
/// N = 4, 300 ms digits, ring radii 0.13/0.23/0.33 in.
struct SessionConfig {
  int code_length = 4;
  StimulusParams stimulus{};
  double margin_px = 16.0;
  TimeModelParams time_model{};
  std::vector<double> ring_radii_in{0.13, 0.23, 0.33};
  double viewing_distance_in = 12.0;
  std::size_t gate_samples = kGateSamples;
  /// Symbols per code position; 2 models a binary probe.
  std::uint32_t alphabet_size = kDecimalAlphabet;
  friend bool operator==(const SessionConfig&, const SessionConfig&) = default;

  void validate() const {
    if (code_length < 1) {
      throw Error(ErrorCode::InvalidConfiguration, "code length must be at least 1");
    }
    if (alphabet_size < 2 || alphabet_size > kDecimalAlphabet) {
      throw Error(ErrorCode::InvalidConfiguration, "alphabet size must lie in [2,10]");
    }
    stimulus.validate();
    time_model.validate();
    if (!(margin_px >= 0.0)) {
      throw Error(ErrorCode::InvalidConfiguration, "margin must be non-negative");
    }
    if (!(viewing_distance_in > 0.0)) {
      throw Error(ErrorCode::InvalidConfiguration, "viewing distance must be positive");
    }
    for (double r : ring_radii_in) {
      if (!(r > 0.0)) {
        throw Error(ErrorCode::InvalidConfiguration, "ring radii must be positive");
      }
    }
  }
};

inline void validate_condition(const Condition& c, const SessionConfig& config) {
  switch (c.kind) {
  case ConditionKind::Control:
  case ConditionKind::Interval:
    if (!c.duration_ms || !(*c.duration_ms > 0.0) || c.ring_radius_in) {
      throw Error(ErrorCode::InvalidConfiguration, "CONTROL and INTERVAL need a positive duration and no radius");
    }
    break;
  case ConditionKind::Tap:
    if (c.duration_ms || c.ring_radius_in) {
      throw Error(ErrorCode::InvalidConfiguration, "TAP carries neither duration nor radius");
    }
    break;
  case ConditionKind::Ring:
    if (!c.ring_radius_in || c.duration_ms) {
      throw Error(ErrorCode::InvalidConfiguration, "RING needs exactly one radius");
    }
    if (std::find(config.ring_radii_in.begin(), config.ring_radii_in.end(), *c.ring_radius_in) ==
        config.ring_radii_in.end()) {
      throw Error(ErrorCode::InvalidConfiguration, "ring radius is not in the configured set");
    }
    break;
  }
}

/// A condition shown `repeats` times in a row at a fixed opacity.
struct ConditionBlock {
  Condition condition;
  double opacity = 1.0;
  int repeats = 6;
  friend bool operator==(const ConditionBlock&, const ConditionBlock&) = default;

  [[nodiscard]] std::string label() const {
    return condition.label() + (opacity == 1.0 ? "/visible" : "/faint");
  }
};

/// The four study conditions crossed with visible (1.0) and faint (0.1)
/// opacity, six repeats each.
inline std::vector<ConditionBlock> formative_schedule(int repeats = 6) {
  std::vector<ConditionBlock> out;
  for (double opacity : {1.0, 0.1}) {
    out.push_back({Condition::control(300.0), opacity, repeats});
    out.push_back({Condition::tap(), opacity, repeats});
    for (double r : {0.13, 0.23, 0.33}) {
      out.push_back({Condition::ring(r), opacity, repeats});
    }
    for (double d : {50.0, 150.0, 300.0}) {
      out.push_back({Condition::interval(d), opacity, repeats});
    }
  }
  return out;
}

/// Display window of one digit relative to trial start. For tap-terminated
/// stimuli `disappear_ms` is empty and `appear_ms` counts from the previous
/// digit's tap (zero for the first digit).
struct DigitWindow {
  double appear_ms = 0.0;
  std::optional<double> disappear_ms;
  friend bool operator==(const DigitWindow&, const DigitWindow&) = default;
};

struct RingLayout {
  Vec2 center;
  double radius_in = 0.0;
  std::array<Vec2, 4> fixation_dots{}; // N, E, S, W
  friend bool operator==(const RingLayout&, const RingLayout&) = default;
};

struct TrialSpec {
  TrialId trial_id = 0;
  Code code;
  Condition condition;
  StimulusParams stimulus;
  OrientationMode required_orientation = OrientationMode::Portrait;
  std::vector<Vec2> digit_placements;
  std::vector<DigitWindow> schedule;
  std::optional<RingLayout> ring_layout;
  friend bool operator==(const TrialSpec&, const TrialSpec&) = default;
};

/// Stimulus actually used for a condition: CONTROL/INTERVAL override the
/// duration, TAP removes it, RING keeps the configured default.
inline StimulusParams effective_stimulus(const SessionConfig& config, const Condition& condition) {
  StimulusParams s = config.stimulus;
  switch (condition.kind) {
  case ConditionKind::Control:
  case ConditionKind::Interval: s.digit_duration_ms = condition.duration_ms; break;
  case ConditionKind::Tap: s.digit_duration_ms.reset(); break;
  case ConditionKind::Ring:
    if (!s.digit_duration_ms) {
      s.digit_duration_ms = 300.0;
    }
    break;
  }
  return s;
}

/// Sequential, non-overlapping windows separated by the inter-digit gap.
inline std::vector<DigitWindow> build_schedule(const StimulusParams& stimulus, int code_length) {
  std::vector<DigitWindow> windows(static_cast<std::size_t>(code_length));
  if (stimulus.tap_terminated()) {
    for (std::size_t i = 0; i < windows.size(); ++i) {
      windows[i].appear_ms = i == 0 ? 0.0 : stimulus.inter_digit_gap_ms;
    }
    return windows;
  }
  const double duration = *stimulus.digit_duration_ms;
  const double period = duration + stimulus.inter_digit_gap_ms;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    windows[i].appear_ms = static_cast<double>(i) * period;
    windows[i].disappear_ms = windows[i].appear_ms + duration;
  }
  return windows;
}

/// Inset (in displayed pixels) that keeps a bubble fully on-screen.
inline double placement_inset_px(const SessionConfig& config) {
  return config.stimulus.bubble_diameter_px / 2.0 + config.margin_px;
}

/**
 * @brief Plans one trial: code, orientation, placements, schedule and, for
 * RING, the fixation layout.
 *
 * Placements are uniform over the displayed screen inset by the bubble
 * radius plus the margin. In RING trials every digit is shown at the ring
 * center and the center is drawn so the whole ring stays on-screen.
 * Deterministic in `seed`.
 */
inline TrialSpec plan_trial(const SessionConfig& config, const Condition& condition, const DeviceGeometry& geometry,
                            std::uint64_t seed, TrialId trial_id = 0) {
  geometry.validate();
  config.validate();
  validate_condition(condition, config);

  TrialSpec spec;
  spec.trial_id = trial_id;
  spec.condition = condition;
  spec.stimulus = effective_stimulus(config, condition);
  spec.code = generate_code(config.code_length, derive_seed(seed, stream::code), config.alphabet_size);

  SplitMix64 orientation_rng(derive_seed(seed, stream::orientation));
  spec.required_orientation = kAllOrientations[orientation_rng.below(4)];

  const Vec2 screen = geometry.displayed_px(spec.required_orientation);
  double inset = placement_inset_px(config);
  if (2.0 * inset >= screen.x || 2.0 * inset >= screen.y) {
    throw Error(ErrorCode::InvalidConfiguration, "bubble plus margin does not fit on the screen");
  }

  SplitMix64 placement_rng(derive_seed(seed, stream::placement));
  auto draw_point = [&](double inset_px) {
    const double x = inset_px + placement_rng.uniform() * (screen.x - 2.0 * inset_px);
    const double y = inset_px + placement_rng.uniform() * (screen.y - 2.0 * inset_px);
    return Vec2{x / screen.x, y / screen.y};
  };

  const auto n = static_cast<std::size_t>(config.code_length);
  spec.digit_placements.reserve(n);
  if (condition.kind == ConditionKind::Ring) {
    const double radius_px = *condition.ring_radius_in * geometry.dpi;
    inset = std::max(radius_px, config.stimulus.bubble_diameter_px / 2.0) + config.margin_px;
    if (2.0 * inset >= screen.x || 2.0 * inset >= screen.y) {
      throw Error(ErrorCode::InvalidConfiguration, "ring does not fit on the screen");
    }
    const Vec2 center = draw_point(inset);
    RingLayout ring;
    ring.center = center;
    ring.radius_in = *condition.ring_radius_in;
    const double du = radius_px / screen.x;
    const double dv = radius_px / screen.y;
    ring.fixation_dots = {Vec2{center.x, center.y - dv}, Vec2{center.x + du, center.y},
                          Vec2{center.x, center.y + dv}, Vec2{center.x - du, center.y}};
    spec.ring_layout = ring;
    spec.digit_placements.assign(n, center);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      spec.digit_placements.push_back(draw_point(inset));
    }
  }

  spec.schedule = build_schedule(spec.stimulus, config.code_length);
  return spec;
}

} // namespace gazecode
