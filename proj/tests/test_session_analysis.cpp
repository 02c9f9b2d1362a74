#include "gazecode/session_analysis.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

using namespace gazecode;

namespace {

constexpr TimestampNs kMs = 1'000'000;
constexpr TimestampNs kFramePeriod = 62'500'000; // 16 fps

std::string read_fixture(const std::string& name) {
  std::ifstream in(std::string(GAZECODE_FIXTURE_DIR) + "/" + name, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SessionLog frames_only(TimestampNs phase, int count, TimestampNs period = kFramePeriod) {
  SessionLog log;
  for (int k = 0; k < count; ++k) {
    log.records.push_back(FrameRecord{phase + k * period, static_cast<std::uint64_t>(k), std::nullopt});
  }
  return log;
}

/// Writes one trial of `code` with 300 ms windows every 500 ms from `start`.
void add_trial(SessionLog& log, TrialId trial, const Code& code, const Code& entered, TimestampNs start) {
  for (std::size_t i = 0; i < code.size(); ++i) {
    const TimestampNs appear = start + static_cast<TimestampNs>(i) * 500 * kMs;
    log.records.push_back(TargetEvent{trial, static_cast<int>(i), code.digits[i], 0.1 * static_cast<double>(i + 1),
                                      0.5, 0.1, appear, appear + 300 * kMs});
  }
  log.records.push_back(
      EntryRecord{trial, entered, start + 2500 * kMs, verify_entry(code, entered).accepted, {}});
}

/// Independent count of frames inside [begin, end): scans every frame.
std::size_t brute_force_count(const SessionLog& log, TimestampNs begin, TimestampNs end) {
  std::size_t n = 0;
  for (const auto& f : log.collect<FrameRecord>()) {
    n += (f.ts >= begin && f.ts < end) ? 1 : 0;
  }
  return n;
}

} // namespace

TEST(FramesInWindow, HalfOpenBoundaries) {
  SessionLog log = frames_only(0, 6); // 0, 62.5, 125, 187.5, 250, 312.5 ms
  log.records.push_back(TargetEvent{0, 0, 3, 0.5, 0.5, 1.0, 10 * kMs, 310 * kMs});
  log.records.push_back(TargetEvent{0, 1, 3, 0.5, 0.5, 1.0, 0, 300 * kMs});
  const auto a = frames_in_window(log, 0, 0);
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(a.front().ts, kFramePeriod);
  EXPECT_EQ(a.back().ts, 250 * kMs);
  const auto b = frames_in_window(log, 0, 1);
  ASSERT_EQ(b.size(), 5u);
  EXPECT_EQ(b.front().ts, 0);
}

TEST(FramesInWindow, EmptyFrameStream) {
  SessionLog log;
  log.records.push_back(TargetEvent{2, 0, 3, 0.5, 0.5, 1.0, 0, 300 * kMs});
  EXPECT_TRUE(frames_in_window(log, 2, 0).empty());
}

TEST(FramesInWindow, UnknownTargetIsNotFound) {
  const SessionLog log = frames_only(0, 3);
  try {
    frames_in_window(log, 5, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotFound);
  }
}

TEST(FramesInWindow, CountIsFloorOrFloorPlusOneForEveryPhase) {
  // D = 300 ms, P = 62.5 ms: floor(D/P) = 4.
  SplitMix64 rng(17);
  for (int i = 0; i < 1000; ++i) {
    const auto phase = static_cast<TimestampNs>(rng.below(static_cast<std::uint32_t>(kFramePeriod)));
    SessionLog log = frames_only(phase, 40);
    const TimestampNs appear = 500 * kMs + static_cast<TimestampNs>(rng.below(1000 * kMs));
    log.records.push_back(TargetEvent{0, 0, 1, 0.5, 0.5, 1.0, appear, appear + 300 * kMs});
    const std::size_t n = frames_in_window(log, 0, 0).size();
    EXPECT_TRUE(n == 4 || n == 5) << n;
    EXPECT_EQ(n, brute_force_count(log, appear, appear + 300 * kMs));
  }
}

TEST(FramesInWindow, DisjointAcrossDigitWindows) {
  SessionLog log = frames_only(7 * kMs, 80);
  add_trial(log, 0, Code{{1, 2, 3, 4}}, Code{{1, 2, 3, 4}}, 200 * kMs);
  std::set<std::uint64_t> seen;
  for (int d = 0; d < 4; ++d) {
    for (const auto& f : frames_in_window(log, 0, d)) {
      EXPECT_TRUE(seen.insert(f.frame_index).second);
    }
  }
}

TEST(ExtractLabels, AcceptedTrialMatchesWindowSum) {
  SessionLog log = frames_only(0, 80);
  add_trial(log, 0, Code{{4, 7, 1, 1}}, Code{{4, 7, 1, 1}}, 1000 * kMs);
  const auto result = extract_labels(log);
  std::size_t oracle = 0;
  for (int d = 0; d < 4; ++d) {
    const TimestampNs appear = 1000 * kMs + d * 500 * kMs;
    oracle += brute_force_count(log, appear, appear + 300 * kMs);
  }
  // Phase-aligned windows at 16 fps hold exactly 5 frames each.
  EXPECT_EQ(oracle, 20u);
  EXPECT_EQ(result.labels.size(), oracle);
  EXPECT_EQ(result.accepted_trials, 1u);
  EXPECT_EQ(result.rejected_trials, 0u);
  for (const auto& l : result.labels) {
    EXPECT_NEAR(l.u, 0.1 * (l.digit_index + 1), 1e-12);
    EXPECT_EQ(l.trial, 0u);
  }
}

TEST(ExtractLabels, RejectedTrialContributesNothing) {
  SessionLog log = frames_only(0, 80);
  add_trial(log, 0, Code{{4, 7, 1, 1}}, Code{{4, 7, 1, 2}}, 1000 * kMs);
  const auto result = extract_labels(log);
  EXPECT_TRUE(result.labels.empty());
  EXPECT_EQ(result.rejected_trials, 1u);
}

TEST(ExtractLabels, OnlyAcceptedTrialIds) {
  SessionLog log = frames_only(0, 120);
  add_trial(log, 0, Code{{4, 7, 1, 1}}, Code{{4, 7, 1, 2}}, 500 * kMs);
  add_trial(log, 1, Code{{9, 9, 0, 3}}, Code{{9, 9, 0, 3}}, 3500 * kMs);
  log.records.push_back(OrientRecord{0, OrientationMode::Landscape, false});
  const auto result = extract_labels(log);
  ASSERT_FALSE(result.labels.empty());
  for (const auto& l : result.labels) {
    EXPECT_EQ(l.trial, 1u);
    EXPECT_EQ(l.orientation, OrientationMode::Landscape);
  }
}

TEST(ExtractLabels, CsvHasHeaderAndOneRowPerLabel) {
  SessionLog log = frames_only(0, 80);
  add_trial(log, 0, Code{{4, 7, 1, 1}}, Code{{4, 7, 1, 1}}, 1000 * kMs);
  const auto result = extract_labels(log);
  const std::string csv = labels_to_csv(result.labels);
  EXPECT_EQ(csv.rfind(kLabelHeader, 0), 0u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), result.labels.size() + 1);
  EXPECT_EQ(labels_to_csv({}), std::string(kLabelHeader));
}

TEST(ValidateSession, WellFormedFixture) {
  const SessionLog log = parse_session(read_fixture("well_formed.jsonl"));
  const ValidationReport report = validate_session(log);
  EXPECT_TRUE(report.ok()) << format_report(report);
  ASSERT_TRUE(report.frame_rate_fps.has_value());
  EXPECT_NEAR(*report.frame_rate_fps, 16.0, 0.5);
  EXPECT_TRUE(report.imu_gaps.empty());
  EXPECT_EQ(report.accepted_trials, 1u);
  EXPECT_EQ(report.rejected_trials, 1u);
}

TEST(ValidateSession, CorruptedFixtureFlagsSwappedWindow) {
  const SessionLog log = parse_session(read_fixture("corrupted.jsonl"));
  const ValidationReport report = validate_session(log);
  ASSERT_EQ(report.violations.size(), 1u) << format_report(report);
  EXPECT_EQ(report.violations[0].kind, "window");
  EXPECT_EQ(report.violations[0].trial, 0u);
}

TEST(ValidateSession, MissingEntryFlagsExactlyThatTrial) {
  SessionLog log = frames_only(0, 80);
  add_trial(log, 0, Code{{1, 2, 3, 4}}, Code{{1, 2, 3, 4}}, 100 * kMs);
  add_trial(log, 1, Code{{5, 6, 7, 8}}, Code{{5, 6, 7, 8}}, 2000 * kMs);
  add_trial(log, 2, Code{{0, 0, 0, 0}}, Code{{0, 0, 0, 1}}, 4000 * kMs);
  std::erase_if(log.records, [](const Record& r) {
    const auto* e = std::get_if<EntryRecord>(&r);
    return e != nullptr && e->trial == 1;
  });
  const auto report = validate_session(log);
  EXPECT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.flagged_trials("missing-entry"), std::vector<TrialId>{1});
}

TEST(ValidateSession, VoidedTrialNeedsNoEntry) {
  SessionLog log;
  log.records.push_back(TargetEvent{0, 0, 3, 0.5, 0.5, 1.0, 0, 300 * kMs});
  log.records.push_back(VoidRecord{0, 400 * kMs, "tab hidden"});
  const auto report = validate_session(log);
  EXPECT_TRUE(report.ok()) << format_report(report);
  EXPECT_EQ(report.voided_trials, 1u);
}

TEST(ValidateSession, DetectsStreamAndConsistencyFaults) {
  SessionLog log;
  log.records.push_back(ImuSample{1000 * kMs, ImuSensor::Accel, 0, -9.8, 0});
  log.records.push_back(ImuSample{900 * kMs, ImuSensor::Accel, 0, -9.8, 0});
  log.records.push_back(ImuSample{2000 * kMs, ImuSensor::Accel, 0, -9.8, 0});
  log.records.push_back(FrameRecord{0, 5, std::nullopt});
  log.records.push_back(FrameRecord{kFramePeriod, 5, std::nullopt});
  log.records.push_back(EntryRecord{9, Code{{1}}, 10, true, {}});
  add_trial(log, 3, Code{{1, 1, 1, 1}}, Code{{1, 1, 1, 1}}, 0);
  // Stored verdict contradicts the logged digits.
  std::get<EntryRecord>(log.records.back()).accepted = false;
  const auto report = validate_session(log);
  std::multiset<std::string> kinds;
  for (const auto& v : report.violations) {
    kinds.insert(v.kind);
  }
  EXPECT_EQ(kinds.count("monotonicity"), 1u);
  EXPECT_EQ(kinds.count("frame-index"), 1u);
  EXPECT_EQ(kinds.count("orphan-entry"), 1u);
  EXPECT_EQ(kinds.count("entry-verdict"), 1u);
  ASSERT_EQ(report.imu_gaps.size(), 1u);
  EXPECT_EQ(report.imu_gaps[0].to, 2000 * kMs);
}

TEST(ValidateSession, DuplicateEntryAndTarget) {
  SessionLog log;
  add_trial(log, 0, Code{{1, 2}}, Code{{1, 2}}, 0);
  log.records.push_back(EntryRecord{0, Code{{1, 2}}, 5000 * kMs, true, {}});
  log.records.push_back(TargetEvent{0, 1, 2, 0.5, 0.5, 1.0, 6000 * kMs, 6300 * kMs});
  const auto report = validate_session(log);
  EXPECT_EQ(report.flagged_trials("duplicate-entry"), std::vector<TrialId>{0});
  EXPECT_EQ(report.flagged_trials("duplicate-target"), std::vector<TrialId>{0});
}

TEST(ValidateSession, FrameRateFromMedianInterval) {
  SessionLog log = frames_only(0, 10, 33'333'333);
  const auto report = validate_session(log);
  EXPECT_NEAR(*report.frame_rate_fps, 30.0, 1e-3);
  EXPECT_FALSE(validate_session(frames_only(0, 1)).frame_rate_fps.has_value());
}
