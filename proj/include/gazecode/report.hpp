#pragma once

#include "gazecode/campaign.hpp"
#include "gazecode/protocol_json.hpp"
#include "gazecode/session_analysis.hpp"

#include <charconv>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace gazecode {

enum class OutputFormat { Table, Csv, Records };

inline std::optional<OutputFormat> parse_output_format(std::string_view text) {
  if (text == "table") {
    return OutputFormat::Table;
  }
  if (text == "csv") {
    return OutputFormat::Csv;
  }
  if (text == "records") {
    return OutputFormat::Records;
  }
  return std::nullopt;
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string header_line(const Json& header) {
  std::string out = "#";
  for (const auto& [k, v] : header.items()) {
    out += ' ' + k + '=' + (v.is_string() ? v.get<std::string>() : v.dump());
  }
  return out + '\n';
}

inline std::string optional_number(const std::optional<double>& x) { return x ? format_number(*x) : "n/a"; }

inline Json frontier_row_json(const FrontierRow& r) {
  return Json{{"n", r.code_length},
              {"p_guess", r.p_guess},
              {"mislabeled_per_1000", r.mislabeled_per_1000},
              {"trial_time_ms", r.trial_time_ms},
              {"throughput_per_min", r.throughput_per_min}};
}

} // namespace detail

/// Frontier table. `header` is echoed first (as a comment line for table
/// and csv, as a leading object for records).
inline std::string render_frontier(const std::vector<FrontierRow>& rows, OutputFormat format, const Json& header) {
  std::ostringstream out;
  switch (format) {
  case OutputFormat::Records:
    out << header.dump() << '\n';
    for (const auto& r : rows) {
      out << detail::frontier_row_json(r).dump() << '\n';
    }
    break;
  case OutputFormat::Csv:
    out << detail::header_line(header) << "n,p_guess,mislabeled_per_1000,trial_time_ms,throughput_per_min\n";
    for (const auto& r : rows) {
      out << r.code_length << ',' << format_number(r.p_guess) << ',' << format_number(r.mislabeled_per_1000) << ','
          << format_number(r.trial_time_ms) << ',' << format_number(r.throughput_per_min) << '\n';
    }
    break;
  case OutputFormat::Table:
    out << detail::header_line(header);
    out << std::left << std::setw(4) << "N" << std::setw(12) << "P_guess" << std::setw(22) << "mislabeled/1000"
        << std::setw(16) << "trial_time_ms" << "trials/min\n";
    for (const auto& r : rows) {
      out << std::setw(4) << r.code_length << std::setw(12) << format_number(r.p_guess) << std::setw(22)
          << format_number(r.mislabeled_per_1000) << std::setw(16) << format_number(r.trial_time_ms)
          << format_number(r.throughput_per_min) << '\n';
    }
    break;
  }
  return out.str();
}

inline Json metrics_to_json(const CampaignMetrics& m) {
  const Interval ci = wilson_interval(m.accepted_count, m.trials_total);
  const Interval noise_ci = wilson_interval(m.accepted_without_foveation, m.accepted_count);
  Json conditions = Json::array();
  for (const auto& c : m.conditions) {
    conditions.push_back(Json{{"label", c.label}, {"trials", c.trials}, {"accepted", c.accepted},
                              {"success_rate", c.success_rate}});
  }
  Json models = Json::array();
  for (const auto& mm : m.models) {
    models.push_back(Json{{"name", mm.name},
                          {"kind", mm.kind},
                          {"weight", mm.weight},
                          {"trials", mm.trials},
                          {"accepted", mm.accepted},
                          {"acceptance_rate", mm.acceptance_rate},
                          {"analytic_acceptance", mm.analytic_acceptance ? Json(*mm.analytic_acceptance) : Json()},
                          {"foveates", mm.foveates}});
  }
  Json frontier = Json::array();
  for (const auto& r : m.frontier_rows) {
    frontier.push_back(detail::frontier_row_json(r));
  }
  return Json{{"seed", m.seed},
              {"code_length", m.code_length},
              {"alphabet", m.alphabet},
              {"trials_total", m.trials_total},
              {"accepted_count", m.accepted_count},
              {"success_rate", m.success_rate},
              {"success_rate_ci95", Json::array({ci.low, ci.high})},
              {"accepted_without_foveation", m.accepted_without_foveation},
              {"label_noise_rate", m.label_noise_rate},
              {"label_noise_rate_ci95", Json::array({noise_ci.low, noise_ci.high})},
              {"expected_label_noise_rate", m.expected_label_noise_rate ? Json(*m.expected_label_noise_rate) : Json()},
              {"trial_time_ms", m.trial_time_ms},
              {"throughput_trials_per_min", m.throughput_trials_per_min},
              {"conditions", conditions},
              {"models", models},
              {"frontier", frontier}};
}

/// Campaign summary with 95 % Wilson intervals on the rates.
inline std::string render_metrics(const CampaignMetrics& m, OutputFormat format, const Json& header) {
  const Interval ci = wilson_interval(m.accepted_count, m.trials_total);
  const Interval noise_ci = wilson_interval(m.accepted_without_foveation, m.accepted_count);
  std::ostringstream out;
  if (format == OutputFormat::Records) {
    out << header.dump() << '\n' << metrics_to_json(m).dump() << '\n';
    return out.str();
  }
  out << detail::header_line(header);
  if (format == OutputFormat::Csv) {
    out << "scope,name,trials,accepted,rate,ci_low,ci_high,expected\n";
    out << "overall,all," << m.trials_total << ',' << m.accepted_count << ',' << format_number(m.success_rate) << ','
        << format_number(ci.low) << ',' << format_number(ci.high) << ",\n";
    out << "noise,label_noise_rate," << m.accepted_count << ',' << m.accepted_without_foveation << ','
        << format_number(m.label_noise_rate) << ',' << format_number(noise_ci.low) << ','
        << format_number(noise_ci.high) << ','
        << (m.expected_label_noise_rate ? format_number(*m.expected_label_noise_rate) : "") << '\n';
    for (const auto& c : m.conditions) {
      const Interval cci = wilson_interval(c.accepted, c.trials);
      out << "condition," << c.label << ',' << c.trials << ',' << c.accepted << ',' << format_number(c.success_rate)
          << ',' << format_number(cci.low) << ',' << format_number(cci.high) << ",\n";
    }
    for (const auto& mm : m.models) {
      const Interval mci = wilson_interval(mm.accepted, mm.trials);
      out << "model," << mm.name << ',' << mm.trials << ',' << mm.accepted << ',' << format_number(mm.acceptance_rate)
          << ',' << format_number(mci.low) << ',' << format_number(mci.high) << ','
          << (mm.analytic_acceptance ? format_number(*mm.analytic_acceptance) : "") << '\n';
    }
    return out.str();
  }
  auto row = [&out](const std::string& key, const std::string& value) {
    out << std::left << std::setw(28) << key << value << '\n';
  };
  row("trials", std::to_string(m.trials_total));
  row("accepted", std::to_string(m.accepted_count));
  row("success_rate", format_number(m.success_rate) + "  95% CI [" + format_number(ci.low) + ", " +
                          format_number(ci.high) + "]");
  row("label_noise_rate", format_number(m.label_noise_rate) + "  95% CI [" + format_number(noise_ci.low) + ", " +
                              format_number(noise_ci.high) + "]");
  row("expected_label_noise_rate", detail::optional_number(m.expected_label_noise_rate));
  row("trial_time_ms", format_number(m.trial_time_ms));
  row("throughput_trials_per_min", format_number(m.throughput_trials_per_min));
  out << "\nconditions\n";
  for (const auto& c : m.conditions) {
    out << "  " << std::left << std::setw(26) << c.label << std::setw(10) << c.trials << format_number(c.success_rate)
        << '\n';
  }
  out << "\nmodels\n";
  for (const auto& mm : m.models) {
    out << "  " << std::left << std::setw(26) << (mm.name + " (" + mm.kind + ")") << std::setw(10) << mm.trials
        << format_number(mm.acceptance_rate) << "  analytic " << detail::optional_number(mm.analytic_acceptance)
        << '\n';
  }
  return out.str();
}

inline std::string render_trial_spec(const TrialSpec& spec, OutputFormat format, const Json& header) {
  std::ostringstream out;
  if (format == OutputFormat::Records) {
    out << header.dump() << '\n' << to_json(spec).dump() << '\n';
    return out.str();
  }
  out << detail::header_line(header);
  if (format == OutputFormat::Table) {
    out << "trial " << spec.trial_id << "  " << spec.condition.label() << "  code " << spec.code.str()
        << "  orientation " << to_string(spec.required_orientation) << "  opacity "
        << format_number(spec.stimulus.opacity) << '\n';
    if (spec.ring_layout) {
      out << "ring center (" << format_number(spec.ring_layout->center.x) << ", "
          << format_number(spec.ring_layout->center.y) << ") radius " << format_number(spec.ring_layout->radius_in)
          << " in\n";
    }
  }
  out << "digit_index,digit,u,v,appear_ms,disappear_ms\n";
  for (std::size_t i = 0; i < spec.code.size(); ++i) {
    const auto& w = spec.schedule[i];
    out << i << ',' << spec.code.digits[i] << ',' << format_number(spec.digit_placements[i].x) << ','
        << format_number(spec.digit_placements[i].y) << ',' << format_number(w.appear_ms) << ','
        << (w.disappear_ms ? format_number(*w.disappear_ms) : "tap") << '\n';
  }
  return out.str();
}

inline std::string render_validation(const ValidationReport& report, OutputFormat format) {
  if (format == OutputFormat::Table) {
    return format_report(report);
  }
  std::ostringstream out;
  if (format == OutputFormat::Csv) {
    out << "kind,trial,message\n";
    for (const auto& v : report.violations) {
      std::string msg = v.message;
      std::replace(msg.begin(), msg.end(), ',', ';');
      out << v.kind << ',' << (v.trial ? std::to_string(*v.trial) : "") << ',' << msg << '\n';
    }
    return out.str();
  }
  Json violations = Json::array();
  for (const auto& v : report.violations) {
    violations.push_back(Json{{"kind", v.kind}, {"trial", v.trial ? Json(*v.trial) : Json()}, {"message", v.message}});
  }
  Json gaps = Json::array();
  for (const auto& g : report.imu_gaps) {
    gaps.push_back(Json{{"from", g.from}, {"to", g.to}});
  }
  out << Json{{"ok", report.ok()},
              {"trials", report.trials},
              {"accepted", report.accepted_trials},
              {"rejected", report.rejected_trials},
              {"voided", report.voided_trials},
              {"frame_rate_fps", report.frame_rate_fps ? Json(*report.frame_rate_fps) : Json()},
              {"imu_gaps", gaps},
              {"violations", violations}}
             .dump()
      << '\n';
  return out.str();
}

inline std::string render_labels(const std::vector<LabelPair>& labels, OutputFormat format) {
  if (format != OutputFormat::Records) {
    return labels_to_csv(labels);
  }
  std::string out;
  for (const auto& l : labels) {
    out += Json{{"frame_index", l.frame_index}, {"ts", l.ts}, {"u", l.u}, {"v", l.v},
                {"orientation", to_string(l.orientation)}, {"trial", l.trial}, {"digit_index", l.digit_index}}
               .dump() +
           '\n';
  }
  return out;
}

} // namespace gazecode
