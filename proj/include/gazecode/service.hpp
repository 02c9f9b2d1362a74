#pragma once

#include "gazecode/error.hpp"
#include "gazecode/protocol.hpp"
#include "gazecode/protocol_json.hpp"
#include "gazecode/session_analysis.hpp"
#include "gazecode/session_log.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace gazecode {

/// What happens when a trial's orientation gate was met and the device is
/// later seen in a different orientation before the entry arrives.
enum class OrientationPolicy { Warn, Void };

inline std::string_view to_string(OrientationPolicy p) noexcept { return p == OrientationPolicy::Void ? "void" : "warn"; }

enum class TrialStatus { Issued, EventsReceived, Entered, Voided };

inline std::string_view to_string(TrialStatus s) noexcept {
  switch (s) {
  case TrialStatus::Issued: return "issued";
  case TrialStatus::EventsReceived: return "events_received";
  case TrialStatus::Entered: return "entered";
  case TrialStatus::Voided: return "voided";
  }
  return "issued";
}

/// Everything a session needs besides device geometry.
struct ServiceSessionConfig {
  SessionConfig protocol{};
  std::vector<ConditionBlock> schedule = formative_schedule();
  OrientationPolicy orientation_policy = OrientationPolicy::Warn;
  std::optional<std::uint64_t> seed;
};

inline Json to_json(const ServiceSessionConfig& c) {
  Json j = to_json(c.protocol);
  Json blocks = Json::array();
  for (const auto& b : c.schedule) {
    blocks.push_back(to_json(b));
  }
  j["schedule"] = std::move(blocks);
  j["orientation_policy"] = to_string(c.orientation_policy);
  if (c.seed) {
    j["seed"] = *c.seed;
  }
  return j;
}

inline ServiceSessionConfig service_config_from_json(const Json& j) {
  ServiceSessionConfig c;
  c.protocol = session_config_from_json(j);
  const auto sched = j.find("schedule");
  if (sched == j.end() || !sched->is_array() || sched->empty()) {
    throw Error(ErrorCode::InvalidConfiguration, "'schedule' must be a non-empty array");
  }
  c.schedule.clear();
  for (const auto& b : *sched) {
    c.schedule.push_back(condition_block_from_json(b));
    const auto& block = c.schedule.back();
    if (block.repeats < 1 || !(block.opacity > 0.0 && block.opacity <= 1.0)) {
      throw Error(ErrorCode::InvalidConfiguration, "schedule blocks need repeats >= 1 and opacity in (0,1]");
    }
    validate_condition(block.condition, c.protocol);
  }
  if (const auto p = j.find("orientation_policy"); p != j.end()) {
    if (*p == "warn") {
      c.orientation_policy = OrientationPolicy::Warn;
    } else if (*p == "void") {
      c.orientation_policy = OrientationPolicy::Void;
    } else {
      throw Error(ErrorCode::InvalidConfiguration, "orientation_policy must be \"warn\" or \"void\"");
    }
  }
  if (const auto s = j.find("seed"); s != j.end()) {
    if (!s->is_number_unsigned()) {
      throw Error(ErrorCode::InvalidConfiguration, "'seed' must be a non-negative integer");
    }
    c.seed = s->get<std::uint64_t>();
  }
  return c;
}

/// Maps error codes onto HTTP status classes.
inline int http_status(ErrorCode code) noexcept {
  switch (code) {
  case ErrorCode::InvalidArgument:
  case ErrorCode::InvalidConfiguration:
  case ErrorCode::MalformedRecord:
  case ErrorCode::MissingMeta:
  case ErrorCode::DuplicateMeta: return 400;
  case ErrorCode::NotFound: return 404;
  case ErrorCode::Conflict:
  case ErrorCode::ClosedLog: return 409;
  case ErrorCode::MonotonicityViolation: return 422;
  case ErrorCode::Storage: return 500;
  }
  return 500;
}

inline std::string utc_now_iso8601() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/**
 * @brief Session store behind the collection HTTP API.
 *
 * Each session lives in `<data_dir>/<session_id>/` as `session.jsonl` (the
 * log), `trials.jsonl` (issued trial specs, one per line) and `meta.json`
 * (descriptor plus a finalized flag). Methods are safe to call from many
 * threads: the store map has its own lock and every session is mutated under
 * its own mutex, so records of one session are never interleaved.
 *
 * Request and response bodies are JSON; failures throw gazecode::Error and
 * http_status() gives the status class. A monotonicity failure carries the
 * 1-based batch position in Error::line().
 */
class CollectionService {
public:
  explicit CollectionService(std::filesystem::path data_dir, ServiceSessionConfig defaults = {})
      : data_dir_(std::move(data_dir)), defaults_(std::move(defaults)) {
    std::error_code ec;
    std::filesystem::create_directories(data_dir_, ec);
    if (ec) {
      throw Error(ErrorCode::Storage, "cannot create data directory " + data_dir_.string() + ": " + ec.message());
    }
    load_existing();
  }

  CollectionService(const CollectionService&) = delete;
  CollectionService& operator=(const CollectionService&) = delete;

  [[nodiscard]] const std::filesystem::path& data_dir() const noexcept { return data_dir_; }

  /// Body: {"geometry": {...}, "config": {overrides}, "created_utc": optional}.
  /// Returns {"session_id", "created_utc", "geometry", "config"}.
  Json create_session(const Json& request) {
    if (!request.is_object() || !request.contains("geometry")) {
      throw Error(ErrorCode::InvalidArgument, "request needs a 'geometry' object");
    }
    DeviceGeometry geometry;
    try {
      geometry = geometry_from_json(request["geometry"]);
      geometry.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidArgument, std::string("invalid geometry: ") + e.message());
    }

    Json effective = to_json(defaults_);
    if (const auto it = request.find("config"); it != request.end() && !it->is_null()) {
      if (!it->is_object()) {
        throw Error(ErrorCode::InvalidConfiguration, "'config' must be an object");
      }
      effective.merge_patch(*it);
    }
    ServiceSessionConfig config = service_config_from_json(effective);
    if (!config.seed) {
      std::random_device rd;
      config.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    }
    std::string created;
    if (const auto it = request.find("created_utc"); it != request.end()) {
      if (!it->is_string()) {
        throw Error(ErrorCode::InvalidArgument, "'created_utc' must be a string");
      }
      created = it->get<std::string>();
    } else {
      created = utc_now_iso8601();
    }

    auto session = std::make_shared<Session>();
    session->config = config;
    session->geometry = geometry;
    for (std::size_t b = 0; b < config.schedule.size(); ++b) {
      session->expanded.insert(session->expanded.end(), static_cast<std::size_t>(config.schedule[b].repeats), b);
    }

    std::lock_guard store_lock(store_mutex_);
    const std::string id = next_id();
    const auto dir = data_dir_ / id;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
      throw Error(ErrorCode::Storage, "cannot create session directory: " + ec.message());
    }
    MetaRecord meta;
    meta.session_id = id;
    meta.created_utc = created;
    meta.geometry = geometry;
    meta.config = to_json(config);
    session->dir = dir;
    session->writer = std::make_unique<LogWriter>(meta, open_sink(dir / "session.jsonl", std::ios::trunc));
    session->trials_sink = open_sink(dir / "trials.jsonl", std::ios::trunc);
    session->descriptor = Json{{"session_id", id},
                               {"created_utc", created},
                               {"geometry", geometry_to_json(geometry)},
                               {"config", meta.config}};
    write_meta_file(*session);
    sessions_[id] = session;
    return session->descriptor;
  }

  /// Plans trial k = number of trials issued so far.
  Json next_trial(const std::string& id) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    require_open(*s);
    if (!s->trials.empty() && pending(s->trials.back().status)) {
      throw Error(ErrorCode::Conflict,
                  "trial " + std::to_string(s->trials.back().spec.trial_id) + " has no entry yet; submit or void it first");
    }
    const TrialId k = s->trials.size();
    const ConditionBlock& block = s->config.schedule[s->expanded[k % s->expanded.size()]];
    SessionConfig protocol = s->config.protocol;
    protocol.stimulus.opacity = block.opacity;
    TrialState state;
    state.spec = plan_trial(protocol, block.condition, s->geometry, derive_seed(*s->config.seed, k), k);
    Json out = to_json(state.spec);
    out["block"] = block.label();
    *s->trials_sink << to_line(out);
    s->trials_sink->flush();
    if (!*s->trials_sink) {
      throw Error(ErrorCode::Storage, "failed to persist trial spec");
    }
    s->trials.push_back(std::move(state));
    return out;
  }

  /// Body: array of session-log records (target, imu, frame, orient, or
  /// unknown types). The batch is appended atomically or not at all.
  Json submit_events(const std::string& id, TrialId tid, const Json& batch) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    require_open(*s);
    TrialState& trial = find_trial(*s, tid);
    if (!batch.is_array()) {
      throw Error(ErrorCode::InvalidArgument, "event batch must be an array");
    }

    std::vector<Record> records;
    records.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      Record r = record_from_json(batch[i], i + 1);
      if (std::holds_alternative<EntryRecord>(r) || std::holds_alternative<VoidRecord>(r)) {
        throw Error(ErrorCode::InvalidArgument, "entry and void records have their own endpoints", i + 1);
      }
      if (const auto* t = std::get_if<TargetEvent>(&r)) {
        const auto& code = trial.spec.code.digits;
        if (t->trial != tid || t->digit_index < 0 || static_cast<std::size_t>(t->digit_index) >= code.size() ||
            code[static_cast<std::size_t>(t->digit_index)] != t->digit) {
          throw Error(ErrorCode::InvalidArgument, "target record does not match the issued trial", i + 1);
        }
      }
      records.push_back(std::move(r));
    }
    if (const auto bad = s->writer->first_violation(records)) {
      throw Error(ErrorCode::MonotonicityViolation,
                  "timestamp regression in " + std::string(record_tag(records[*bad])) + " stream", *bad + 1);
    }

    Json counts{{"target", 0}, {"imu", 0}, {"frame", 0}, {"orient", 0}, {"other", 0}};
    std::optional<TimestampNs> lost_at;
    for (auto& r : records) {
      if (const auto* o = std::get_if<OrientRecord>(&r)) {
        trial.orientation_history.push_back(o->mode);
        if (!trial.gate_passed) {
          trial.gate_passed = check_orientation_gate(trial.spec.required_orientation, trial.orientation_history,
                                                     s->config.protocol.gate_samples);
        } else if (o->mode && *o->mode != trial.spec.required_orientation && !lost_at) {
          trial.orientation_lost = true;
          lost_at = o->ts;
        }
      }
      const std::string tag(record_tag(r));
      auto& slot = counts.contains(tag) ? counts[tag] : counts["other"];
      slot = slot.get<int>() + 1;
      track_time(*s, r);
      s->writer->append(std::move(r));
    }
    if (trial.status == TrialStatus::Issued) {
      trial.status = TrialStatus::EventsReceived;
    }
    if (lost_at && s->config.orientation_policy == OrientationPolicy::Void && pending(trial.status)) {
      void_locked(*s, trial, *lost_at, "orientation-lost");
    }
    return Json{{"trial", tid},
                {"counts", counts},
                {"gate_passed", trial.gate_passed},
                {"orientation_lost", trial.orientation_lost},
                {"status", to_string(trial.status)}};
  }

  /// Body: {"entered": "4711" | [4,7,1,1], "ts": ns, "taps": [ns...] optional}.
  Json submit_entry(const std::string& id, TrialId tid, const Json& body) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    require_open(*s);
    TrialState& trial = find_trial(*s, tid);
    if (trial.status == TrialStatus::Entered) {
      throw Error(ErrorCode::Conflict, "trial " + std::to_string(tid) + " already has an entry");
    }
    if (trial.status == TrialStatus::Voided) {
      throw Error(ErrorCode::Conflict, "trial " + std::to_string(tid) + " was voided");
    }
    if (!body.is_object()) {
      throw Error(ErrorCode::InvalidArgument, "entry body must be an object");
    }
    Json line{{"t", "entry"}, {"trial", tid}, {"entered", body.value("entered", Json())},
              {"ts", body.value("ts", Json())}, {"accepted", false}};
    if (line["entered"].is_string()) {
      Json digits = Json::array();
      for (char c : line["entered"].get<std::string>()) {
        if (c < '0' || c > '9') {
          throw Error(ErrorCode::InvalidArgument, "entered code must consist of decimal digits");
        }
        digits.push_back(c - '0');
      }
      line["entered"] = std::move(digits);
    }
    if (body.contains("taps")) {
      line["taps"] = body["taps"];
    }
    EntryRecord entry;
    try {
      entry = std::get<EntryRecord>(record_from_json(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidArgument, e.message());
    }
    entry.accepted = verify_entry(trial.spec.code, entry.entered).accepted;
    const Record rec = entry;
    if (s->writer->first_violation(std::span<const Record>(&rec, 1))) {
      throw Error(ErrorCode::MonotonicityViolation, "entry timestamp precedes the previous entry", 1);
    }
    track_time(*s, rec);
    s->writer->append(rec);
    trial.status = TrialStatus::Entered;
    trial.accepted = entry.accepted;
    return Json{{"trial", tid}, {"accepted", entry.accepted}, {"gate_passed", trial.gate_passed},
                {"orientation_lost", trial.orientation_lost}};
  }

  /// Body: {"ts": ns, "reason": text} (both optional).
  Json void_trial(const std::string& id, TrialId tid, const Json& body) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    require_open(*s);
    TrialState& trial = find_trial(*s, tid);
    if (!pending(trial.status)) {
      throw Error(ErrorCode::Conflict, "trial " + std::to_string(tid) + " is already " +
                                           std::string(to_string(trial.status)));
    }
    const TimestampNs ts = timestamp_or(body, "ts", s->max_ts);
    const std::string reason = body.is_object() ? body.value("reason", std::string("abandoned")) : "abandoned";
    void_locked(*s, trial, ts, reason);
    return Json{{"trial", tid}, {"status", "voided"}};
  }

  /// Voids a pending trial, closes the log and marks the session read-only.
  Json finalize(const std::string& id, const Json& body = Json::object()) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    require_open(*s);
    if (!s->trials.empty() && pending(s->trials.back().status)) {
      void_locked(*s, s->trials.back(), timestamp_or(body, "ts", s->max_ts), "finalized");
    }
    s->writer->finalize();
    s->finalized = true;
    s->summary = summarize(*s);
    write_meta_file(*s);
    s->writer.reset();
    s->trials_sink.reset();
    return s->summary;
  }

  /// Byte-exact session log. Requires a finalized session.
  std::string export_session(const std::string& id) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    require_finalized(*s);
    return read_file(s->dir / "session.jsonl");
  }

  /// Frame/target label table for accepted trials. Requires a finalized session.
  std::string export_labels(const std::string& id) {
    const std::string bytes = export_session(id);
    return labels_to_csv(extract_labels(parse_session(bytes)).labels);
  }

  Json describe(const std::string& id) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    Json out = s->descriptor;
    out["finalized"] = s->finalized;
    out["trials_issued"] = s->trials.size();
    return out;
  }

private:
  struct TrialState {
    TrialSpec spec;
    TrialStatus status = TrialStatus::Issued;
    std::vector<OrientationReading> orientation_history;
    bool gate_passed = false;
    bool orientation_lost = false;
    std::optional<bool> accepted;
  };

  struct Session {
    std::mutex mutex;
    std::filesystem::path dir;
    Json descriptor;
    ServiceSessionConfig config;
    DeviceGeometry geometry;
    std::vector<std::size_t> expanded;
    std::unique_ptr<LogWriter> writer;
    std::unique_ptr<std::ostream> trials_sink;
    std::vector<TrialState> trials;
    TimestampNs max_ts = 0;
    TimestampNs last_void_ts = 0;
    bool finalized = false;
    /// Loaded from disk after a restart; never writable again.
    bool interrupted = false;
    Json summary;
  };

  static bool pending(TrialStatus s) noexcept { return s == TrialStatus::Issued || s == TrialStatus::EventsReceived; }

  static std::unique_ptr<std::ostream> open_sink(const std::filesystem::path& path, std::ios::openmode mode) {
    auto out = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::out | mode);
    if (!*out) {
      throw Error(ErrorCode::Storage, "cannot open " + path.string());
    }
    return out;
  }

  static std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      throw Error(ErrorCode::Storage, "cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static TimestampNs timestamp_or(const Json& body, const char* key, TimestampNs fallback) {
    if (!body.is_object() || !body.contains(key)) {
      return fallback;
    }
    const Json& v = body[key];
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      throw Error(ErrorCode::InvalidArgument, std::string("'") + key + "' must be a non-negative integer");
    }
    return v.get<TimestampNs>();
  }

  static void track_time(Session& s, const Record& r) {
    if (const auto* t = std::get_if<TargetEvent>(&r)) {
      s.max_ts = std::max(s.max_ts, t->ts_disappear);
    }
    if (const auto ts = stream_timestamp(r)) {
      s.max_ts = std::max(s.max_ts, *ts);
    }
  }

  static void void_locked(Session& s, TrialState& trial, TimestampNs ts, const std::string& reason) {
    // Void records form their own stream; keep it monotone even when a
    // caller passes an older timestamp.
    ts = std::max(ts, s.last_void_ts);
    s.writer->append(VoidRecord{trial.spec.trial_id, ts, reason});
    s.last_void_ts = ts;
    s.max_ts = std::max(s.max_ts, ts);
    trial.status = TrialStatus::Voided;
  }

  static Json summarize(const Session& s) {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t voided = 0;
    for (const auto& t : s.trials) {
      if (t.status == TrialStatus::Voided) {
        ++voided;
      } else if (t.accepted.value_or(false)) {
        ++accepted;
      } else {
        ++rejected;
      }
    }
    return Json{{"session_id", s.descriptor["session_id"]},
                {"finalized", true},
                {"trials", s.trials.size()},
                {"accepted", accepted},
                {"rejected", rejected},
                {"voided", voided}};
  }

  void write_meta_file(const Session& s) const {
    Json meta = s.descriptor;
    meta["finalized"] = s.finalized;
    if (s.finalized) {
      meta["summary"] = s.summary;
    }
    const auto tmp = s.dir / "meta.json.tmp";
    {
      auto out = open_sink(tmp, std::ios::trunc);
      *out << meta.dump(2) << '\n';
      out->flush();
      if (!*out) {
        throw Error(ErrorCode::Storage, "failed to write session meta");
      }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, s.dir / "meta.json", ec);
    if (ec) {
      throw Error(ErrorCode::Storage, "failed to write session meta: " + ec.message());
    }
  }

  std::shared_ptr<Session> find(const std::string& id) {
    std::lock_guard lock(store_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) {
      throw Error(ErrorCode::NotFound, "unknown session '" + id + "'");
    }
    return it->second;
  }

  static TrialState& find_trial(Session& s, TrialId tid) {
    if (tid >= s.trials.size()) {
      throw Error(ErrorCode::NotFound, "unknown trial " + std::to_string(tid));
    }
    return s.trials[tid];
  }

  static void require_open(const Session& s) {
    if (s.finalized) {
      throw Error(ErrorCode::Conflict, "session is finalized");
    }
    if (s.interrupted) {
      throw Error(ErrorCode::Conflict, "session was interrupted by a restart and is read-only");
    }
  }

  static void require_finalized(const Session& s) {
    if (!s.finalized) {
      throw Error(ErrorCode::Conflict, "session is not finalized");
    }
  }

  std::string next_id() {
    std::string id;
    do {
      id = std::to_string(++counter_);
      id = "s" + std::string(id.size() < 6 ? 6 - id.size() : 0, '0') + id;
    } while (std::filesystem::exists(data_dir_ / id));
    return id;
  }

  /// Registers session directories left by a previous run. Finalized ones
  /// stay exportable; unfinished ones are read-only.
  void load_existing() {
    for (const auto& entry : std::filesystem::directory_iterator(data_dir_)) {
      const auto meta_path = entry.path() / "meta.json";
      if (!entry.is_directory() || !std::filesystem::exists(meta_path)) {
        continue;
      }
      const std::string name = entry.path().filename().string();
      if (name.size() > 1 && name[0] == 's' && name.find_first_not_of("0123456789", 1) == std::string::npos) {
        counter_ = std::max<std::uint64_t>(counter_, std::stoull(name.substr(1)));
      }
      Json meta;
      try {
        meta = Json::parse(read_file(meta_path));
      } catch (const std::exception&) {
        continue;
      }
      auto s = std::make_shared<Session>();
      s->dir = entry.path();
      s->finalized = meta.value("finalized", false);
      s->interrupted = !s->finalized;
      s->summary = meta.value("summary", Json::object());
      meta.erase("finalized");
      meta.erase("summary");
      s->descriptor = meta;
      sessions_[meta.value("session_id", name)] = s;
    }
  }

  std::filesystem::path data_dir_;
  ServiceSessionConfig defaults_;
  std::mutex store_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t counter_ = 0;
};

} // namespace gazecode
