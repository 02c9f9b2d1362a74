#pragma once

#include "gazecode/error.hpp"
#include "gazecode/orientation.hpp"
#include "gazecode/protocol.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace gazecode {

using Json = nlohmann::ordered_json;

/// Nanoseconds on the session-monotonic clock (zero at session creation).
using TimestampNs = std::int64_t;

inline constexpr std::string_view kSchemaVersion = "gazecode-log/1";

struct MetaRecord {
  std::string session_id;
  std::string created_utc;
  std::string schema_version{kSchemaVersion};
  DeviceGeometry geometry;
  Json config = Json::object();
  friend bool operator==(const MetaRecord&, const MetaRecord&) = default;
};

struct TargetEvent {
  TrialId trial = 0;
  int digit_index = 0;
  int digit = 0;
  double u = 0.0;
  double v = 0.0;
  double opacity = 1.0;
  TimestampNs ts_appear = 0;
  TimestampNs ts_disappear = 0;
  friend bool operator==(const TargetEvent&, const TargetEvent&) = default;
};

enum class ImuSensor { Accel, Gyro };

struct ImuSample {
  TimestampNs ts = 0;
  ImuSensor sensor = ImuSensor::Accel;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  friend bool operator==(const ImuSample&, const ImuSample&) = default;
};

struct FrameRecord {
  TimestampNs ts = 0;
  std::uint64_t frame_index = 0;
  std::optional<std::string> media;
  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct EntryRecord {
  TrialId trial = 0;
  Code entered;
  TimestampNs ts = 0;
  bool accepted = false;
  /// Tap timestamps (TAP condition only); serialized only when non-empty.
  std::vector<TimestampNs> taps;
  friend bool operator==(const EntryRecord&, const EntryRecord&) = default;
};

struct OrientRecord {
  TimestampNs ts = 0;
  OrientationReading mode;
  /// Set when the client had no motion sensor and the pose was selected by hand.
  bool simulated = false;
  friend bool operator==(const OrientRecord&, const OrientRecord&) = default;
};

/// Marks a trial abandoned without an entry.
struct VoidRecord {
  TrialId trial = 0;
  TimestampNs ts = 0;
  std::string reason;
  friend bool operator==(const VoidRecord&, const VoidRecord&) = default;
};

/// Any line whose type tag is not recognised; kept verbatim.
struct UnknownRecord {
  Json raw;
  friend bool operator==(const UnknownRecord&, const UnknownRecord&) = default;
};

using Record = std::variant<TargetEvent, ImuSample, FrameRecord, EntryRecord, OrientRecord, VoidRecord, UnknownRecord>;

inline constexpr std::size_t kStreamCount = std::variant_size_v<Record>;

struct SessionLog {
  MetaRecord meta;
  /// Non-meta records in file order.
  std::vector<Record> records;
  friend bool operator==(const SessionLog&, const SessionLog&) = default;

  /// All records of one type, in file order.
  template <typename T>
  [[nodiscard]] std::vector<T> collect() const {
    std::vector<T> out;
    for (const auto& r : records) {
      if (const auto* p = std::get_if<T>(&r)) {
        out.push_back(*p);
      }
    }
    return out;
  }
};

/// Type tag written in the "t" field.
inline std::string_view record_tag(const Record& r) {
  struct Visitor {
    std::string_view operator()(const TargetEvent&) const { return "target"; }
    std::string_view operator()(const ImuSample&) const { return "imu"; }
    std::string_view operator()(const FrameRecord&) const { return "frame"; }
    std::string_view operator()(const EntryRecord&) const { return "entry"; }
    std::string_view operator()(const OrientRecord&) const { return "orient"; }
    std::string_view operator()(const VoidRecord&) const { return "void"; }
    std::string_view operator()(const UnknownRecord& u) const {
      const auto it = u.raw.find("t");
      return it != u.raw.end() && it->is_string() ? std::string_view(it->get_ref<const std::string&>())
                                                  : std::string_view("?");
    }
  };
  return std::visit(Visitor{}, r);
}

/// Timestamp used for per-stream monotonicity; empty for unknown records.
inline std::optional<TimestampNs> stream_timestamp(const Record& r) {
  struct Visitor {
    std::optional<TimestampNs> operator()(const TargetEvent& e) const { return e.ts_appear; }
    std::optional<TimestampNs> operator()(const ImuSample& e) const { return e.ts; }
    std::optional<TimestampNs> operator()(const FrameRecord& e) const { return e.ts; }
    std::optional<TimestampNs> operator()(const EntryRecord& e) const { return e.ts; }
    std::optional<TimestampNs> operator()(const OrientRecord& e) const { return e.ts; }
    std::optional<TimestampNs> operator()(const VoidRecord& e) const { return e.ts; }
    std::optional<TimestampNs> operator()(const UnknownRecord&) const { return std::nullopt; }
  };
  return std::visit(Visitor{}, r);
}

// ---------------------------------------------------------------------------
// Encoding

inline Json geometry_to_json(const DeviceGeometry& g) {
  return Json{{"w_px", g.screen_w_px},
              {"h_px", g.screen_h_px},
              {"dpi", g.dpi},
              {"cam_x_in", g.camera_offset_in.x},
              {"cam_y_in", g.camera_offset_in.y}};
}

inline Json to_json(const MetaRecord& m) {
  return Json{{"t", "meta"},
              {"session_id", m.session_id},
              {"created_utc", m.created_utc},
              {"schema_version", m.schema_version},
              {"geometry", geometry_to_json(m.geometry)},
              {"config", m.config}};
}

inline Json to_json(const Record& record) {
  struct Visitor {
    Json operator()(const TargetEvent& e) const {
      return Json{{"t", "target"},       {"trial", e.trial},     {"idx", e.digit_index},
                  {"digit", e.digit},    {"u", e.u},             {"v", e.v},
                  {"opacity", e.opacity}, {"ts_appear", e.ts_appear}, {"ts_disappear", e.ts_disappear}};
    }
    Json operator()(const ImuSample& e) const {
      return Json{{"t", "imu"},
                  {"ts", e.ts},
                  {"sensor", e.sensor == ImuSensor::Accel ? "accel" : "gyro"},
                  {"x", e.x},
                  {"y", e.y},
                  {"z", e.z}};
    }
    Json operator()(const FrameRecord& e) const {
      Json j{{"t", "frame"}, {"ts", e.ts}, {"idx", e.frame_index}};
      if (e.media) {
        j["media"] = *e.media;
      }
      return j;
    }
    Json operator()(const EntryRecord& e) const {
      Json j{{"t", "entry"}, {"trial", e.trial}, {"entered", e.entered.digits}, {"ts", e.ts}, {"accepted", e.accepted}};
      if (!e.taps.empty()) {
        j["taps"] = e.taps;
      }
      return j;
    }
    Json operator()(const OrientRecord& e) const {
      Json j{{"t", "orient"}, {"ts", e.ts}, {"mode", std::string(to_string(e.mode))}};
      if (e.simulated) {
        j["simulated"] = true;
      }
      return j;
    }
    Json operator()(const VoidRecord& e) const {
      return Json{{"t", "void"}, {"trial", e.trial}, {"ts", e.ts}, {"reason", e.reason}};
    }
    Json operator()(const UnknownRecord& e) const { return e.raw; }
  };
  return std::visit(Visitor{}, record);
}

inline std::string to_line(const Json& j) { return j.dump() + '\n'; }

inline std::string serialize_session(const SessionLog& log) {
  std::string out = to_line(to_json(log.meta));
  for (const auto& r : log.records) {
    out += to_line(to_json(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decoding

namespace detail {

[[noreturn]] inline void malformed(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::MalformedRecord, what, line);
}

inline const Json& field(const Json& j, const char* name, std::size_t line) {
  const auto it = j.find(name);
  if (it == j.end()) {
    malformed(line, std::string("missing field '") + name + "'");
  }
  return *it;
}

inline TimestampNs timestamp(const Json& j, const char* name, std::size_t line) {
  const Json& f = field(j, name, line);
  if (!f.is_number_integer() || f.get<std::int64_t>() < 0) {
    malformed(line, std::string("field '") + name + "' must be a non-negative integer nanosecond timestamp");
  }
  return f.get<TimestampNs>();
}

inline std::uint64_t unsigned_int(const Json& j, const char* name, std::size_t line) {
  const Json& f = field(j, name, line);
  if (!f.is_number_integer() || (f.is_number_integer() && !f.is_number_unsigned() && f.get<std::int64_t>() < 0)) {
    malformed(line, std::string("field '") + name + "' must be a non-negative integer");
  }
  return f.get<std::uint64_t>();
}

inline double real(const Json& j, const char* name, std::size_t line) {
  const Json& f = field(j, name, line);
  if (!f.is_number()) {
    malformed(line, std::string("field '") + name + "' must be a number");
  }
  const double x = f.get<double>();
  if (!std::isfinite(x)) {
    malformed(line, std::string("field '") + name + "' must be finite");
  }
  return x;
}

inline std::string text(const Json& j, const char* name, std::size_t line) {
  const Json& f = field(j, name, line);
  if (!f.is_string()) {
    malformed(line, std::string("field '") + name + "' must be a string");
  }
  return f.get<std::string>();
}

inline bool boolean(const Json& j, const char* name, std::size_t line) {
  const Json& f = field(j, name, line);
  if (!f.is_boolean()) {
    malformed(line, std::string("field '") + name + "' must be a boolean");
  }
  return f.get<bool>();
}

inline Code digits(const Json& j, const char* name, std::size_t line) {
  const Json& f = field(j, name, line);
  if (!f.is_array()) {
    malformed(line, std::string("field '") + name + "' must be an array of digits");
  }
  Code code;
  for (const auto& d : f) {
    if (!d.is_number_integer() || d.get<int>() < 0 || d.get<int>() > 9) {
      malformed(line, std::string("field '") + name + "' holds a non-digit");
    }
    code.digits.push_back(d.get<int>());
  }
  return code;
}

} // namespace detail

inline DeviceGeometry geometry_from_json(const Json& g, std::size_t line = 0) {
  if (!g.is_object()) {
    detail::malformed(line, "geometry must be an object");
  }
  DeviceGeometry geo;
  const Json& w = detail::field(g, "w_px", line);
  const Json& h = detail::field(g, "h_px", line);
  if (!w.is_number_integer() || !h.is_number_integer()) {
    detail::malformed(line, "geometry dimensions must be integers");
  }
  geo.screen_w_px = w.get<int>();
  geo.screen_h_px = h.get<int>();
  geo.dpi = detail::real(g, "dpi", line);
  geo.camera_offset_in = {detail::real(g, "cam_x_in", line), detail::real(g, "cam_y_in", line)};
  return geo;
}

inline MetaRecord meta_from_json(const Json& j, std::size_t line) {
  MetaRecord m;
  m.session_id = detail::text(j, "session_id", line);
  m.created_utc = detail::text(j, "created_utc", line);
  m.schema_version = detail::text(j, "schema_version", line);
  if (m.schema_version != kSchemaVersion) {
    detail::malformed(line, "unsupported schema_version '" + m.schema_version + "'");
  }
  m.geometry = geometry_from_json(detail::field(j, "geometry", line), line);
  m.config = detail::field(j, "config", line);
  return m;
}

/// Decodes one non-meta record object. `line` is used for diagnostics only.
inline Record record_from_json(const Json& j, std::size_t line = 0) {
  if (!j.is_object()) {
    detail::malformed(line, "record must be an object");
  }
  const std::string tag = detail::text(j, "t", line);
  if (tag == "target") {
    TargetEvent e;
    e.trial = detail::unsigned_int(j, "trial", line);
    e.digit_index = static_cast<int>(detail::unsigned_int(j, "idx", line));
    const auto digit = detail::unsigned_int(j, "digit", line);
    if (digit > 9) {
      detail::malformed(line, "digit out of range");
    }
    e.digit = static_cast<int>(digit);
    e.u = detail::real(j, "u", line);
    e.v = detail::real(j, "v", line);
    e.opacity = detail::real(j, "opacity", line);
    e.ts_appear = detail::timestamp(j, "ts_appear", line);
    e.ts_disappear = detail::timestamp(j, "ts_disappear", line);
    return e;
  }
  if (tag == "imu") {
    ImuSample e;
    e.ts = detail::timestamp(j, "ts", line);
    const std::string sensor = detail::text(j, "sensor", line);
    if (sensor == "accel") {
      e.sensor = ImuSensor::Accel;
    } else if (sensor == "gyro") {
      e.sensor = ImuSensor::Gyro;
    } else {
      detail::malformed(line, "unknown sensor '" + sensor + "'");
    }
    e.x = detail::real(j, "x", line);
    e.y = detail::real(j, "y", line);
    e.z = detail::real(j, "z", line);
    return e;
  }
  if (tag == "frame") {
    FrameRecord e;
    e.ts = detail::timestamp(j, "ts", line);
    e.frame_index = detail::unsigned_int(j, "idx", line);
    if (const auto it = j.find("media"); it != j.end() && !it->is_null()) {
      if (!it->is_string()) {
        detail::malformed(line, "field 'media' must be a string");
      }
      e.media = it->get<std::string>();
    }
    return e;
  }
  if (tag == "entry") {
    EntryRecord e;
    e.trial = detail::unsigned_int(j, "trial", line);
    e.entered = detail::digits(j, "entered", line);
    e.ts = detail::timestamp(j, "ts", line);
    e.accepted = detail::boolean(j, "accepted", line);
    if (const auto it = j.find("taps"); it != j.end()) {
      if (!it->is_array()) {
        detail::malformed(line, "field 'taps' must be an array");
      }
      for (const auto& t : *it) {
        if (!t.is_number_integer() || t.get<std::int64_t>() < 0) {
          detail::malformed(line, "tap timestamps must be non-negative integers");
        }
        e.taps.push_back(t.get<TimestampNs>());
      }
    }
    return e;
  }
  if (tag == "orient") {
    OrientRecord e;
    e.ts = detail::timestamp(j, "ts", line);
    const auto mode = parse_orientation(detail::text(j, "mode", line));
    if (!mode) {
      detail::malformed(line, "unknown orientation mode");
    }
    e.mode = *mode;
    if (const auto it = j.find("simulated"); it != j.end()) {
      if (!it->is_boolean()) {
        detail::malformed(line, "field 'simulated' must be a boolean");
      }
      e.simulated = it->get<bool>();
    }
    return e;
  }
  if (tag == "void") {
    VoidRecord e;
    e.trial = detail::unsigned_int(j, "trial", line);
    e.ts = detail::timestamp(j, "ts", line);
    if (const auto it = j.find("reason"); it != j.end() && it->is_string()) {
      e.reason = it->get<std::string>();
    }
    return e;
  }
  if (tag == "meta") {
    throw Error(ErrorCode::DuplicateMeta, "meta record may only appear once, as the first line", line);
  }
  return UnknownRecord{j};
}

/// Parses a whole session file. Blank lines are ignored; every other line
/// must be one JSON object.
inline SessionLog parse_session(std::string_view bytes) {
  SessionLog log;
  bool have_meta = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    std::size_t end = bytes.find('\n', pos);
    if (end == std::string_view::npos) {
      end = bytes.size();
    }
    std::string_view line = bytes.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      continue;
    }
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(ErrorCode::MalformedRecord, "line is not a valid JSON object", line_no);
    }
    if (!j.is_object()) {
      throw Error(ErrorCode::MalformedRecord, "line is not a JSON object", line_no);
    }
    const auto tag = j.find("t");
    if (tag == j.end() || !tag->is_string()) {
      throw Error(ErrorCode::MalformedRecord, "missing record type field 't'", line_no);
    }
    if (!have_meta) {
      if (*tag != "meta") {
        throw Error(ErrorCode::MissingMeta, "first record must be meta", line_no);
      }
      log.meta = meta_from_json(j, line_no);
      have_meta = true;
      continue;
    }
    log.records.push_back(record_from_json(j, line_no));
  }
  if (!have_meta) {
    throw Error(ErrorCode::MissingMeta, "file holds no meta record");
  }
  return log;
}

// ---------------------------------------------------------------------------
// Writer

/**
 * @brief Append-only writer for one session.
 *
 * Each stream (record type) must be appended in non-decreasing timestamp
 * order. Every accepted record is written to the sink and flushed before
 * `append` returns. Not thread-safe; callers serialize access per session.
 */
class LogWriter {
public:
  explicit LogWriter(MetaRecord meta, std::unique_ptr<std::ostream> sink = nullptr)
      : sink_(std::move(sink)) {
    log_.meta = std::move(meta);
    last_ts_.fill(-1);
    write(to_line(to_json(log_.meta)));
  }

  /// Index of the first record in `batch` that would violate monotonicity
  /// given what has been appended so far, or empty when the batch is clean.
  [[nodiscard]] std::optional<std::size_t> first_violation(std::span<const Record> batch) const {
    auto last = last_ts_;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto ts = stream_timestamp(batch[i]);
      if (!ts) {
        continue;
      }
      auto& prev = last[batch[i].index()];
      if (*ts < 0 || *ts < prev) {
        return i;
      }
      prev = *ts;
    }
    return std::nullopt;
  }

  /// Appends one record; returns its 1-based line number in the file.
  std::size_t append(Record record) {
    if (closed_) {
      throw Error(ErrorCode::ClosedLog, "log is finalized");
    }
    if (const auto ts = stream_timestamp(record)) {
      if (*ts < 0) {
        throw Error(ErrorCode::InvalidArgument, "timestamps must be non-negative");
      }
      auto& prev = last_ts_[record.index()];
      if (*ts < prev) {
        throw Error(ErrorCode::MonotonicityViolation,
                    std::string(record_tag(record)) + " timestamp " + std::to_string(*ts) +
                        " precedes " + std::to_string(prev));
      }
      prev = *ts;
    }
    write(to_line(to_json(record)));
    log_.records.push_back(std::move(record));
    return log_.records.size() + 1;
  }

  void finalize() {
    if (sink_) {
      sink_->flush();
    }
    closed_ = true;
  }

  [[nodiscard]] bool closed() const noexcept { return closed_; }
  [[nodiscard]] const SessionLog& log() const noexcept { return log_; }

private:
  void write(const std::string& line) {
    if (!sink_) {
      return;
    }
    *sink_ << line;
    sink_->flush();
    if (!*sink_) {
      throw Error(ErrorCode::Storage, "failed to write session log");
    }
  }

  SessionLog log_;
  std::unique_ptr<std::ostream> sink_;
  std::array<TimestampNs, kStreamCount> last_ts_{};
  bool closed_ = false;
};

} // namespace gazecode
