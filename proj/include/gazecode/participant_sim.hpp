#pragma once

#include "gazecode/error.hpp"
#include "gazecode/orientation.hpp"
#include "gazecode/protocol.hpp"
#include "gazecode/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace gazecode {

inline constexpr double kTapDuration = std::numeric_limits<double>::infinity();

/// Default duration multipliers over {50, 150, 300, TAP} ms.
inline std::map<double, double> default_duration_multipliers() {
  return {{50.0, 0.9}, {150.0, 0.95}, {300.0, 1.0}, {kTapDuration, 1.0}};
}

/**
 * @brief Probability of identifying a digit as a function of opacity,
 * display duration and distance from fixation.
 *
 * p = base(opacity) * multiplier(duration) * exp(-k * eccentricity), clamped
 * to [0, 1]. The multiplier is a step function: the entry with the largest
 * key not above the duration (the smallest entry for shorter durations).
 * Opacity must match a table key exactly.
 */
struct ReadabilityParams {
  std::map<double, double> base_by_opacity;
  double decay_k_per_in = 0.0;
  std::map<double, double> duration_multiplier = default_duration_multipliers();
  friend bool operator==(const ReadabilityParams&, const ReadabilityParams&) = default;

  void validate() const {
    for (const auto& [opacity, base] : base_by_opacity) {
      if (!(base >= 0.0 && base <= 1.0)) {
        throw Error(ErrorCode::InvalidConfiguration, "base readability must lie in [0,1]");
      }
    }
    for (const auto& [duration, m] : duration_multiplier) {
      if (!(m >= 0.0)) {
        throw Error(ErrorCode::InvalidConfiguration, "duration multipliers must be non-negative");
      }
    }
    if (!(decay_k_per_in >= 0.0)) {
      throw Error(ErrorCode::InvalidConfiguration, "decay rate must be non-negative");
    }
  }

  [[nodiscard]] double base(double opacity) const {
    const auto it = base_by_opacity.find(opacity);
    if (it == base_by_opacity.end()) {
      throw Error(ErrorCode::InvalidConfiguration, "no readability base for opacity " + std::to_string(opacity));
    }
    return it->second;
  }

  [[nodiscard]] double multiplier(double duration_ms) const {
    if (duration_multiplier.empty()) {
      return 1.0;
    }
    auto it = duration_multiplier.upper_bound(duration_ms);
    if (it == duration_multiplier.begin()) {
      return it->second;
    }
    return std::prev(it)->second;
  }
};

inline double readability(const ReadabilityParams& params, double eccentricity_in, double opacity,
                          double duration_ms = 300.0) {
  if (!(eccentricity_in >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "eccentricity must be non-negative");
  }
  const double p = params.base(opacity) * params.multiplier(duration_ms) *
                   std::exp(-params.decay_k_per_in * eccentricity_in);
  return std::clamp(p, 0.0, 1.0);
}

struct ExponentialFit {
  double base = 0.0;
  double k_per_in = 0.0;
};

/// Solves base * exp(-k * ecc) through two points.
inline ExponentialFit fit_two_point_exponential(double ecc1, double p1, double ecc2, double p2) {
  if (!(p1 > 0.0 && p1 <= 1.0) || !(p2 > 0.0 && p2 <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "probabilities must lie in (0,1]");
  }
  if (ecc1 == ecc2) {
    throw Error(ErrorCode::InvalidArgument, "eccentricities must differ");
  }
  const double k = std::log(p1 / p2) / (ecc2 - ecc1);
  return {p1 * std::exp(k * ecc1), k};
}

/// Faint-digit readability calibrated to the RING endpoints (33% at 0.13 in,
/// 11% at 0.33 in); visible digits keep base 1.
inline ReadabilityParams calibrated_peripheral_readability() {
  const auto fit = fit_two_point_exponential(0.13, 0.33, 0.33, 0.11);
  ReadabilityParams p;
  p.base_by_opacity = {{0.1, fit.base}, {1.0, 1.0}};
  p.decay_k_per_in = fit.k_per_in;
  return p;
}

struct Guesser {
  friend bool operator==(const Guesser&, const Guesser&) = default;
};

/// Attentive participant: perceives each digit at fixation with
/// probability identify(opacity, duration), then may misremember or
/// mistype each digit independently.
struct Foveator {
  ReadabilityParams identify;
  /// Overrides `identify` with a stimulus-independent probability.
  std::optional<double> fixed_identify;
  double eps_memory_per_digit = 0.0;
  double eps_entry_per_digit = 0.0;
  friend bool operator==(const Foveator&, const Foveator&) = default;

  /// Constant identification probability, independent of the stimulus.
  static Foveator constant(double p_identify, double eps_memory = 0.0, double eps_entry = 0.0) {
    Foveator f;
    f.fixed_identify = p_identify;
    f.eps_memory_per_digit = eps_memory;
    f.eps_entry_per_digit = eps_entry;
    return f;
  }

  /// Error-free perception with per-digit entry errors chosen so a whole
  /// code of `code_length` digits is accepted with probability `acceptance`.
  static Foveator with_trial_acceptance(double acceptance, int code_length) {
    if (!(acceptance > 0.0 && acceptance <= 1.0) || code_length < 1) {
      throw Error(ErrorCode::InvalidArgument, "acceptance must lie in (0,1] and code length >= 1");
    }
    return constant(1.0, 0.0, 1.0 - std::pow(acceptance, 1.0 / code_length));
  }

  [[nodiscard]] double p_identify(double opacity, double duration_ms) const {
    if (fixed_identify) {
      return *fixed_identify;
    }
    return readability(identify, 0.0, opacity, duration_ms);
  }
};

/// Calibrated default: visible digits always identified at 300 ms. Faint
/// digits are identified often enough that, counting lucky guesses after a
/// miss, a four-digit faint CONTROL code succeeds 67% of the time.
inline Foveator default_foveator() {
  const double per_digit = std::pow(0.67, 0.25);
  Foveator f;
  f.identify.base_by_opacity = {{0.1, (per_digit - 0.1) / 0.9}, {1.0, 1.0}};
  return f;
}

/// Keeps fixation on the nearest ring dot (RING) or the screen center and
/// tries to read digits peripherally.
struct PeripheralReader {
  ReadabilityParams readability = calibrated_peripheral_readability();
  friend bool operator==(const PeripheralReader&, const PeripheralReader&) = default;
};

using ParticipantModel = std::variant<Guesser, Foveator, PeripheralReader>;

inline std::string_view model_kind(const ParticipantModel& m) {
  static constexpr std::string_view names[] = {"guesser", "foveator", "peripheral"};
  return names[m.index()];
}

inline void validate_model(const ParticipantModel& m) {
  if (const auto* f = std::get_if<Foveator>(&m)) {
    f->identify.validate();
    if (f->fixed_identify && !(*f->fixed_identify >= 0.0 && *f->fixed_identify <= 1.0)) {
      throw Error(ErrorCode::InvalidConfiguration, "identification probability must lie in [0,1]");
    }
    if (!(f->eps_memory_per_digit >= 0.0 && f->eps_memory_per_digit < 1.0) ||
        !(f->eps_entry_per_digit >= 0.0 && f->eps_entry_per_digit < 1.0)) {
      throw Error(ErrorCode::InvalidConfiguration, "per-digit error rates must lie in [0,1)");
    }
  } else if (const auto* p = std::get_if<PeripheralReader>(&m)) {
    p->readability.validate();
  }
}

/// Acceptance probability in closed form where one exists (Guesser, and a
/// Foveator with stimulus-independent identification).
inline std::optional<double> analytic_acceptance(const ParticipantModel& m, int code_length,
                                                 std::uint32_t alphabet = kDecimalAlphabet) {
  if (std::holds_alternative<Guesser>(m)) {
    return p_guess(code_length, alphabet);
  }
  if (const auto* f = std::get_if<Foveator>(&m); f != nullptr && f->fixed_identify) {
    const double a = alphabet;
    const double p = *f->fixed_identify;
    // Correct after a uniform-redraw corruption step with rate eps.
    auto corrupt = [a](double c, double eps) { return c * (1.0 - eps) + (1.0 - c) * eps / (a - 1.0); };
    double c = p + (1.0 - p) / a;
    c = corrupt(c, f->eps_memory_per_digit);
    c = corrupt(c, f->eps_entry_per_digit);
    return std::pow(c, code_length);
  }
  return std::nullopt;
}

struct SimContext {
  DeviceGeometry geometry;
  std::uint32_t alphabet = kDecimalAlphabet;
};

struct SimOutcome {
  TrialId trial_id = 0;
  Code entered;
  bool accepted = false;
  std::vector<bool> foveated_per_digit;
  std::string_view model_kind;
};

namespace detail {

/// Uniform redraw over the other alphabet symbols.
inline int other_symbol(int d, std::uint32_t alphabet, SplitMix64& rng) {
  return static_cast<int>((static_cast<std::uint32_t>(d) + 1 + rng.below(alphabet - 1)) % alphabet);
}

inline double stimulus_duration(const StimulusParams& s) {
  return s.digit_duration_ms ? *s.digit_duration_ms : kTapDuration;
}

/// Distance in inches between two normalized points displayed in `mode`.
inline double distance_in(const Vec2& a, const Vec2& b, OrientationMode mode, const DeviceGeometry& g) {
  const Vec2 screen = g.displayed_px(mode);
  return std::hypot((a.x - b.x) * screen.x, (a.y - b.y) * screen.y) / g.dpi;
}

} // namespace detail

/// Fixation point a peripheral reader holds while digit `placement` is shown.
inline Vec2 peripheral_fixation(const TrialSpec& spec, const Vec2& placement, const DeviceGeometry& g) {
  if (!spec.ring_layout) {
    return {0.5, 0.5};
  }
  const auto& dots = spec.ring_layout->fixation_dots;
  return *std::min_element(dots.begin(), dots.end(), [&](const Vec2& a, const Vec2& b) {
    return detail::distance_in(a, placement, spec.required_orientation, g) <
           detail::distance_in(b, placement, spec.required_orientation, g);
  });
}

/**
 * @brief Runs one trial for one participant model.
 *
 * Guesser: uniform symbols. Foveator: identify, then memory and entry
 * corruption. PeripheralReader: reads each digit from its fixation point
 * with the readability curve and guesses on failure. Only the Foveator
 * marks digits as foveated.
 */
inline SimOutcome simulate_trial(const ParticipantModel& model, const TrialSpec& spec, SplitMix64& rng,
                                 const SimContext& ctx = {}) {
  const std::uint32_t alphabet = ctx.alphabet;
  const std::size_t n = spec.code.size();
  SimOutcome out;
  out.trial_id = spec.trial_id;
  out.model_kind = model_kind(model);
  out.entered.digits.resize(n);
  out.foveated_per_digit.assign(n, false);
  const double duration = detail::stimulus_duration(spec.stimulus);

  if (std::holds_alternative<Guesser>(model)) {
    for (auto& d : out.entered.digits) {
      d = static_cast<int>(rng.below(alphabet));
    }
  } else if (const auto* f = std::get_if<Foveator>(&model)) {
    const double p = f->p_identify(spec.stimulus.opacity, duration);
    for (std::size_t i = 0; i < n; ++i) {
      int d = rng.bernoulli(p) ? spec.code.digits[i] : static_cast<int>(rng.below(alphabet));
      if (rng.bernoulli(f->eps_memory_per_digit)) {
        d = detail::other_symbol(d, alphabet, rng);
      }
      if (rng.bernoulli(f->eps_entry_per_digit)) {
        d = detail::other_symbol(d, alphabet, rng);
      }
      out.entered.digits[i] = d;
      out.foveated_per_digit[i] = true;
    }
  } else {
    const auto& reader = std::get<PeripheralReader>(model);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2& placement = spec.digit_placements[i];
      const Vec2 fixation = peripheral_fixation(spec, placement, ctx.geometry);
      const double ecc = detail::distance_in(fixation, placement, spec.required_orientation, ctx.geometry);
      const double p = readability(reader.readability, ecc, spec.stimulus.opacity, duration);
      out.entered.digits[i] = rng.bernoulli(p) ? spec.code.digits[i] : static_cast<int>(rng.below(alphabet));
    }
  }
  out.accepted = verify_entry(spec.code, out.entered).accepted;
  return out;
}

} // namespace gazecode
