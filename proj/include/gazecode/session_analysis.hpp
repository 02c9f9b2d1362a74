#pragma once

#include "gazecode/error.hpp"
#include "gazecode/session_log.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace gazecode {

struct Violation {
  std::string kind;
  std::string message;
  std::optional<TrialId> trial;
  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ImuGap {
  TimestampNs from = 0;
  TimestampNs to = 0;
  friend bool operator==(const ImuGap&, const ImuGap&) = default;
};

inline constexpr TimestampNs kImuGapThresholdNs = 500'000'000;

struct ValidationReport {
  std::vector<Violation> violations;
  /// From the median inter-frame interval; empty with fewer than two frames.
  std::optional<double> frame_rate_fps;
  /// IMU coverage gaps longer than 500 ms. Reported, not counted as violations.
  std::vector<ImuGap> imu_gaps;
  std::size_t trials = 0;
  std::size_t accepted_trials = 0;
  std::size_t rejected_trials = 0;
  std::size_t voided_trials = 0;

  [[nodiscard]] bool ok() const noexcept { return violations.empty(); }

  [[nodiscard]] std::vector<TrialId> flagged_trials(std::string_view kind) const {
    std::vector<TrialId> out;
    for (const auto& v : violations) {
      if (v.kind == kind && v.trial) {
        out.push_back(*v.trial);
      }
    }
    return out;
  }
};

/// Lookup structure shared by the alignment queries.
class SessionIndex {
public:
  explicit SessionIndex(const SessionLog& log) {
    for (const auto& r : log.records) {
      if (const auto* t = std::get_if<TargetEvent>(&r)) {
        targets_[t->trial].emplace(t->digit_index, *t);
      } else if (const auto* f = std::get_if<FrameRecord>(&r)) {
        frames_.push_back(*f);
      } else if (const auto* e = std::get_if<EntryRecord>(&r)) {
        entries_.emplace(e->trial, *e);
      } else if (const auto* o = std::get_if<OrientRecord>(&r)) {
        orients_.push_back(*o);
      }
    }
    const auto by_ts = [](const auto& a, const auto& b) { return a.ts < b.ts; };
    std::stable_sort(frames_.begin(), frames_.end(), by_ts);
    std::stable_sort(orients_.begin(), orients_.end(), by_ts);
  }

  [[nodiscard]] const TargetEvent* target(TrialId trial, int digit_index) const {
    const auto t = targets_.find(trial);
    if (t == targets_.end()) {
      return nullptr;
    }
    const auto d = t->second.find(digit_index);
    return d == t->second.end() ? nullptr : &d->second;
  }

  [[nodiscard]] const std::map<TrialId, std::map<int, TargetEvent>>& targets() const noexcept { return targets_; }
  [[nodiscard]] const std::map<TrialId, EntryRecord>& entries() const noexcept { return entries_; }

  /// Frames with appear <= ts < disappear, in time order.
  [[nodiscard]] std::vector<FrameRecord> frames_between(TimestampNs begin, TimestampNs end) const {
    const auto lo = std::lower_bound(frames_.begin(), frames_.end(), begin,
                                     [](const FrameRecord& f, TimestampNs t) { return f.ts < t; });
    const auto hi = std::lower_bound(lo, frames_.end(), end,
                                     [](const FrameRecord& f, TimestampNs t) { return f.ts < t; });
    return {lo, hi};
  }

  /// Most recent orientation record at or before `ts`.
  [[nodiscard]] OrientationReading orientation_at(TimestampNs ts) const {
    const auto it = std::upper_bound(orients_.begin(), orients_.end(), ts,
                                     [](TimestampNs t, const OrientRecord& o) { return t < o.ts; });
    if (it == orients_.begin()) {
      return std::nullopt;
    }
    return std::prev(it)->mode;
  }

private:
  std::map<TrialId, std::map<int, TargetEvent>> targets_;
  std::map<TrialId, EntryRecord> entries_;
  std::vector<FrameRecord> frames_;
  std::vector<OrientRecord> orients_;
};

/**
 * @brief Audits a parsed session.
 *
 * Violations: per-stream timestamp regressions, frame indices that do not
 * increase with time, target windows with ts_appear >= ts_disappear,
 * duplicate targets or entries, trials with targets but neither entry nor
 * void, entries without targets, and entries whose stored verdict disagrees
 * with the logged digits.
 */
inline ValidationReport validate_session(const SessionLog& log) {
  ValidationReport report;
  std::array<std::optional<TimestampNs>, kStreamCount> last_ts{};
  std::set<std::pair<TrialId, int>> seen_targets;
  std::map<TrialId, std::vector<const EntryRecord*>> entries;
  std::set<TrialId> voided;
  std::optional<FrameRecord> prev_frame;
  std::vector<TimestampNs> frame_ts;
  std::optional<TimestampNs> prev_imu;

  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const Record& r = log.records[i];
    const std::size_t line = i + 2;
    if (const auto ts = stream_timestamp(r)) {
      auto& last = last_ts[r.index()];
      if (last && *ts < *last) {
        report.violations.push_back({"monotonicity",
                                     "line " + std::to_string(line) + ": " + std::string(record_tag(r)) +
                                         " timestamp " + std::to_string(*ts) + " precedes " + std::to_string(*last),
                                     std::nullopt});
      }
      last = last ? std::max(*last, *ts) : *ts;
    }
    if (const auto* t = std::get_if<TargetEvent>(&r)) {
      if (t->ts_appear >= t->ts_disappear) {
        report.violations.push_back({"window",
                                     "line " + std::to_string(line) + ": target " + std::to_string(t->trial) + "/" +
                                         std::to_string(t->digit_index) + " has ts_appear >= ts_disappear",
                                     t->trial});
      }
      if (!seen_targets.emplace(t->trial, t->digit_index).second) {
        report.violations.push_back({"duplicate-target",
                                     "line " + std::to_string(line) + ": repeated target " +
                                         std::to_string(t->trial) + "/" + std::to_string(t->digit_index),
                                     t->trial});
      }
    } else if (const auto* f = std::get_if<FrameRecord>(&r)) {
      if (prev_frame && f->frame_index <= prev_frame->frame_index) {
        report.violations.push_back(
            {"frame-index", "line " + std::to_string(line) + ": frame index does not increase", std::nullopt});
      }
      prev_frame = *f;
      frame_ts.push_back(f->ts);
    } else if (const auto* e = std::get_if<EntryRecord>(&r)) {
      entries[e->trial].push_back(e);
    } else if (const auto* v = std::get_if<VoidRecord>(&r)) {
      voided.insert(v->trial);
    } else if (const auto* m = std::get_if<ImuSample>(&r)) {
      if (prev_imu && m->ts - *prev_imu > kImuGapThresholdNs) {
        report.imu_gaps.push_back({*prev_imu, m->ts});
      }
      prev_imu = prev_imu ? std::max(*prev_imu, m->ts) : m->ts;
    }
  }

  const SessionIndex index(log);
  std::set<TrialId> trials;
  for (const auto& [trial, _] : index.targets()) {
    trials.insert(trial);
  }
  for (const auto& [trial, list] : entries) {
    trials.insert(trial);
  }
  report.trials = trials.size();

  for (TrialId trial : trials) {
    const auto t = index.targets().find(trial);
    const auto e = entries.find(trial);
    const bool has_targets = t != index.targets().end();
    const bool has_entry = e != entries.end();
    const std::string name = "trial " + std::to_string(trial);
    if (voided.contains(trial)) {
      ++report.voided_trials;
    }
    if (has_targets && !has_entry && !voided.contains(trial)) {
      report.violations.push_back({"missing-entry", name + " has targets but no entry", trial});
    }
    if (has_entry && !has_targets) {
      report.violations.push_back({"orphan-entry", name + " has an entry but no target events", trial});
    }
    if (!has_entry) {
      continue;
    }
    if (e->second.size() > 1) {
      report.violations.push_back({"duplicate-entry", name + " has more than one entry", trial});
    }
    const EntryRecord& entry = *e->second.front();
    entry.accepted ? ++report.accepted_trials : ++report.rejected_trials;
    if (!has_targets) {
      continue;
    }
    // Verdict check needs the complete code: digit indices 0..n-1.
    Code shown;
    bool contiguous = true;
    int expected = 0;
    for (const auto& [idx, target] : t->second) {
      contiguous = contiguous && idx == expected++;
      shown.digits.push_back(target.digit);
    }
    if (contiguous && verify_entry(shown, entry.entered).accepted != entry.accepted) {
      report.violations.push_back({"entry-verdict", name + " stored verdict disagrees with its target digits", trial});
    }
  }

  if (frame_ts.size() >= 2) {
    std::vector<TimestampNs> deltas;
    deltas.reserve(frame_ts.size() - 1);
    for (std::size_t i = 1; i < frame_ts.size(); ++i) {
      deltas.push_back(frame_ts[i] - frame_ts[i - 1]);
    }
    std::sort(deltas.begin(), deltas.end());
    const std::size_t mid = deltas.size() / 2;
    const double median = deltas.size() % 2 == 1 ? static_cast<double>(deltas[mid])
                                                 : 0.5 * static_cast<double>(deltas[mid - 1] + deltas[mid]);
    if (median > 0.0) {
      report.frame_rate_fps = 1e9 / median;
    }
  }
  return report;
}

inline std::string format_report(const ValidationReport& report) {
  std::ostringstream out;
  out << "trials: " << report.trials << " (accepted " << report.accepted_trials << ", rejected "
      << report.rejected_trials << ", voided " << report.voided_trials << ")\n";
  out << "frame_rate_fps: ";
  if (report.frame_rate_fps) {
    out << *report.frame_rate_fps << '\n';
  } else {
    out << "n/a\n";
  }
  out << "imu_gaps: " << report.imu_gaps.size() << '\n';
  for (const auto& g : report.imu_gaps) {
    out << "  gap " << g.from << " -> " << g.to << " ns\n";
  }
  out << "violations: " << report.violations.size() << '\n';
  for (const auto& v : report.violations) {
    out << "  [" << v.kind << "] " << v.message << '\n';
  }
  return out.str();
}

/// Frames captured while digit `digit_index` of `trial` was visible.
inline std::vector<FrameRecord> frames_in_window(const SessionIndex& index, TrialId trial, int digit_index) {
  const TargetEvent* target = index.target(trial, digit_index);
  if (target == nullptr) {
    throw Error(ErrorCode::NotFound,
                "no target event for trial " + std::to_string(trial) + " digit " + std::to_string(digit_index));
  }
  return index.frames_between(target->ts_appear, target->ts_disappear);
}

inline std::vector<FrameRecord> frames_in_window(const SessionLog& log, TrialId trial, int digit_index) {
  return frames_in_window(SessionIndex(log), trial, digit_index);
}

struct LabelPair {
  std::uint64_t frame_index = 0;
  std::optional<std::string> media;
  TimestampNs ts = 0;
  double u = 0.0;
  double v = 0.0;
  OrientationReading orientation;
  TrialId trial = 0;
  int digit_index = 0;
  friend bool operator==(const LabelPair&, const LabelPair&) = default;
};

struct LabelExtraction {
  std::vector<LabelPair> labels;
  std::size_t accepted_trials = 0;
  std::size_t rejected_trials = 0;
};

/// One label per frame inside each visible digit window of every accepted
/// trial. Rejected trials only add to `rejected_trials`.
inline LabelExtraction extract_labels(const SessionLog& log) {
  const SessionIndex index(log);
  LabelExtraction out;
  for (const auto& [trial, entry] : index.entries()) {
    if (!entry.accepted) {
      ++out.rejected_trials;
      continue;
    }
    ++out.accepted_trials;
    const auto targets = index.targets().find(trial);
    if (targets == index.targets().end()) {
      continue;
    }
    for (const auto& [idx, target] : targets->second) {
      for (const auto& frame : index.frames_between(target.ts_appear, target.ts_disappear)) {
        out.labels.push_back(LabelPair{frame.frame_index, frame.media, frame.ts, target.u, target.v,
                                       index.orientation_at(frame.ts), trial, idx});
      }
    }
  }
  return out;
}

inline constexpr std::string_view kLabelHeader = "frame_index,ts,u,v,orientation,trial,digit_index\n";

inline std::string labels_to_csv(const std::vector<LabelPair>& labels) {
  std::string out(kLabelHeader);
  for (const auto& l : labels) {
    // Reuse the JSON number formatter so u/v round-trip exactly.
    out += std::to_string(l.frame_index) + ',' + std::to_string(l.ts) + ',' + Json(l.u).dump() + ',' +
           Json(l.v).dump() + ',' + std::string(to_string(l.orientation)) + ',' + std::to_string(l.trial) + ',' +
           std::to_string(l.digit_index) + '\n';
  }
  return out;
}

} // namespace gazecode
