#pragma once

#include "gazecode/error.hpp"
#include "gazecode/protocol.hpp"
#include "gazecode/session_log.hpp"

#include <string>
#include <vector>

namespace gazecode {

// JSON codecs for protocol values exchanged over the service API and stored
// in session metadata. Decoders throw InvalidConfiguration with the offending
// key in the message.

namespace detail {

[[noreturn]] inline void bad_config(const std::string& what) { throw Error(ErrorCode::InvalidConfiguration, what); }

inline double config_number(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number()) {
    bad_config(std::string("'") + key + "' must be a number");
  }
  return it->get<double>();
}

inline std::int64_t config_integer(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number_integer()) {
    bad_config(std::string("'") + key + "' must be an integer");
  }
  return it->get<std::int64_t>();
}

inline const Json& config_object(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_object()) {
    bad_config(std::string("'") + key + "' must be an object");
  }
  return *it;
}

inline Json point_to_json(const Vec2& p) { return Json{{"u", p.x}, {"v", p.y}}; }

inline Vec2 point_from_json(const Json& j) {
  if (!j.is_object()) {
    bad_config("point must be an object");
  }
  return {config_number(j, "u"), config_number(j, "v")};
}

} // namespace detail

inline Json to_json(const Condition& c) {
  Json j{{"kind", to_string(c.kind)}};
  if (c.duration_ms) {
    j["duration_ms"] = *c.duration_ms;
  }
  if (c.ring_radius_in) {
    j["radius_in"] = *c.ring_radius_in;
  }
  return j;
}

inline Condition condition_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    detail::bad_config("condition needs a string 'kind'");
  }
  const auto kind = parse_condition_kind(j["kind"].get<std::string>());
  if (!kind) {
    detail::bad_config("unknown condition kind '" + j["kind"].get<std::string>() + "'");
  }
  Condition c{*kind, std::nullopt, std::nullopt};
  if (j.contains("duration_ms")) {
    c.duration_ms = detail::config_number(j, "duration_ms");
  }
  if (j.contains("radius_in")) {
    c.ring_radius_in = detail::config_number(j, "radius_in");
  }
  return c;
}

inline Json to_json(const ConditionBlock& b) {
  Json j = to_json(b.condition);
  j["opacity"] = b.opacity;
  j["repeats"] = b.repeats;
  return j;
}

inline ConditionBlock condition_block_from_json(const Json& j) {
  ConditionBlock b;
  b.condition = condition_from_json(j);
  b.opacity = j.contains("opacity") ? detail::config_number(j, "opacity") : 1.0;
  b.repeats = j.contains("repeats") ? static_cast<int>(detail::config_integer(j, "repeats")) : 1;
  return b;
}

inline Json to_json(const StimulusParams& s) {
  Json j{{"opacity", s.opacity}};
  j["digit_duration_ms"] = s.digit_duration_ms ? Json(*s.digit_duration_ms) : Json(nullptr);
  j["inter_digit_gap_ms"] = s.inter_digit_gap_ms;
  j["bubble_diameter_px"] = s.bubble_diameter_px;
  return j;
}

inline StimulusParams stimulus_from_json(const Json& j) {
  StimulusParams s;
  s.opacity = detail::config_number(j, "opacity");
  const auto d = j.find("digit_duration_ms");
  if (d == j.end()) {
    detail::bad_config("'digit_duration_ms' is required (null for tap-terminated)");
  }
  s.digit_duration_ms = d->is_null() ? std::nullopt : std::optional<double>(detail::config_number(j, "digit_duration_ms"));
  s.inter_digit_gap_ms = detail::config_number(j, "inter_digit_gap_ms");
  s.bubble_diameter_px = static_cast<int>(detail::config_integer(j, "bubble_diameter_px"));
  return s;
}

inline Json to_json(const TimeModelParams& t) {
  return Json{{"t_setup_ms", t.t_setup_ms}, {"t_digit_ms", t.t_digit_ms}, {"t_entry_ms", t.t_entry_ms}};
}

inline TimeModelParams time_model_from_json(const Json& j) {
  return {detail::config_number(j, "t_setup_ms"), detail::config_number(j, "t_digit_ms"),
          detail::config_number(j, "t_entry_ms")};
}

inline Json to_json(const SessionConfig& c) {
  return Json{{"code_length", c.code_length},
              {"alphabet_size", c.alphabet_size},
              {"stimulus", to_json(c.stimulus)},
              {"margin_px", c.margin_px},
              {"time_model", to_json(c.time_model)},
              {"ring_radii_in", c.ring_radii_in},
              {"viewing_distance_in", c.viewing_distance_in},
              {"gate_samples", c.gate_samples}};
}

inline SessionConfig session_config_from_json(const Json& j) {
  if (!j.is_object()) {
    detail::bad_config("session config must be an object");
  }
  SessionConfig c;
  c.code_length = static_cast<int>(detail::config_integer(j, "code_length"));
  const auto alphabet = detail::config_integer(j, "alphabet_size");
  const auto gate = detail::config_integer(j, "gate_samples");
  if (alphabet < 0 || gate < 1) {
    detail::bad_config("alphabet_size and gate_samples must be positive");
  }
  c.alphabet_size = static_cast<std::uint32_t>(alphabet);
  c.gate_samples = static_cast<std::size_t>(gate);
  c.stimulus = stimulus_from_json(detail::config_object(j, "stimulus"));
  c.margin_px = detail::config_number(j, "margin_px");
  c.time_model = time_model_from_json(detail::config_object(j, "time_model"));
  const auto radii = j.find("ring_radii_in");
  if (radii == j.end() || !radii->is_array()) {
    detail::bad_config("'ring_radii_in' must be an array");
  }
  c.ring_radii_in.clear();
  for (const auto& r : *radii) {
    if (!r.is_number()) {
      detail::bad_config("ring radii must be numbers");
    }
    c.ring_radii_in.push_back(r.get<double>());
  }
  c.viewing_distance_in = detail::config_number(j, "viewing_distance_in");
  c.validate();
  return c;
}

inline Json to_json(const TrialSpec& s) {
  Json schedule = Json::array();
  for (const auto& w : s.schedule) {
    schedule.push_back(Json{{"appear_ms", w.appear_ms},
                            {"disappear_ms", w.disappear_ms ? Json(*w.disappear_ms) : Json(nullptr)}});
  }
  Json placements = Json::array();
  for (const auto& p : s.digit_placements) {
    placements.push_back(detail::point_to_json(p));
  }
  Json j{{"trial_id", s.trial_id},
         {"code", s.code.str()},
         {"condition", to_json(s.condition)},
         {"label", s.condition.label()},
         {"stimulus", to_json(s.stimulus)},
         {"required_orientation", to_string(s.required_orientation)},
         {"digit_placements", std::move(placements)},
         {"schedule", std::move(schedule)}};
  if (s.ring_layout) {
    Json dots = Json::array();
    for (const auto& d : s.ring_layout->fixation_dots) {
      dots.push_back(detail::point_to_json(d));
    }
    j["ring_layout"] = Json{{"center", detail::point_to_json(s.ring_layout->center)},
                            {"radius_in", s.ring_layout->radius_in},
                            {"fixation_dots", std::move(dots)}};
  } else {
    j["ring_layout"] = nullptr;
  }
  return j;
}

inline Code code_from_string(const std::string& text) {
  Code c;
  for (char ch : text) {
    if (ch < '0' || ch > '9') {
      throw Error(ErrorCode::InvalidArgument, "code must consist of decimal digits");
    }
    c.digits.push_back(ch - '0');
  }
  return c;
}

inline TrialSpec trial_spec_from_json(const Json& j) {
  TrialSpec s;
  s.trial_id = static_cast<TrialId>(detail::config_integer(j, "trial_id"));
  s.code = code_from_string(j.at("code").get<std::string>());
  s.condition = condition_from_json(j.at("condition"));
  s.stimulus = stimulus_from_json(j.at("stimulus"));
  const auto mode = parse_orientation(j.at("required_orientation").get<std::string>());
  if (!mode || !*mode) {
    detail::bad_config("required_orientation must be one of the four modes");
  }
  s.required_orientation = **mode;
  for (const auto& p : j.at("digit_placements")) {
    s.digit_placements.push_back(detail::point_from_json(p));
  }
  for (const auto& w : j.at("schedule")) {
    DigitWindow d;
    d.appear_ms = detail::config_number(w, "appear_ms");
    if (!w.at("disappear_ms").is_null()) {
      d.disappear_ms = detail::config_number(w, "disappear_ms");
    }
    s.schedule.push_back(d);
  }
  if (const auto it = j.find("ring_layout"); it != j.end() && !it->is_null()) {
    RingLayout r;
    r.center = detail::point_from_json(it->at("center"));
    r.radius_in = detail::config_number(*it, "radius_in");
    const auto& dots = it->at("fixation_dots");
    for (std::size_t i = 0; i < r.fixation_dots.size() && i < dots.size(); ++i) {
      r.fixation_dots[i] = detail::point_from_json(dots[i]);
    }
    s.ring_layout = r;
  }
  return s;
}

} // namespace gazecode
