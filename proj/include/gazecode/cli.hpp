#pragma once

#include "gazecode/campaign.hpp"
#include "gazecode/http_server.hpp"
#include "gazecode/report.hpp"
#include "gazecode/session_analysis.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace gazecode {

/// Exit codes: 0 success, 1 invalid input data (violations or malformed
/// log), 2 usage or I/O error.
inline constexpr int kExitInvalidData = 1;
inline constexpr int kExitUsage = 2;

namespace cli_detail {

inline std::pair<int, int> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      const int n = std::stoi(text);
      return {n, n};
    }
    return {std::stoi(text.substr(0, dots)), std::stoi(text.substr(dots + 2))};
  } catch (const std::exception&) {
    throw CLI::ValidationError("--n", "expected N or A..B, got '" + text + "'");
  }
}

inline ParticipantModel model_by_name(const std::string& name, int code_length, double foveator_accept) {
  if (name == "guesser") {
    return Guesser{};
  }
  if (name == "foveator") {
    return Foveator::with_trial_acceptance(foveator_accept, code_length);
  }
  if (name == "foveator-calibrated") {
    return default_foveator();
  }
  if (name == "peripheral") {
    return PeripheralReader{};
  }
  throw CLI::ValidationError("--model", "unknown model '" + name +
                                           "' (guesser, foveator, foveator-calibrated, peripheral)");
}

inline std::vector<MixtureComponent> parse_mix(const std::string& text, int code_length, double foveator_accept) {
  std::vector<MixtureComponent> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError("--mix", "expected name=weight, got '" + item + "'");
    }
    const std::string name = item.substr(0, eq);
    double weight = 0.0;
    try {
      weight = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw CLI::ValidationError("--mix", "weight for '" + name + "' is not a number");
    }
    out.push_back({name, model_by_name(name, code_length, foveator_accept), weight});
  }
  if (out.empty()) {
    throw CLI::ValidationError("--mix", "empty mixture");
  }
  return out;
}

inline std::vector<ConditionBlock> schedule_by_name(const std::string& name) {
  if (name == "formative") {
    return formative_schedule();
  }
  if (name == "control") {
    return {{Condition::control(300.0), 1.0, 1}};
  }
  if (name == "ring") {
    std::vector<ConditionBlock> out;
    for (double opacity : {1.0, 0.1}) {
      for (double r : {0.13, 0.23, 0.33}) {
        out.push_back({Condition::ring(r), opacity, 1});
      }
    }
    return out;
  }
  if (name == "interval") {
    std::vector<ConditionBlock> out;
    for (double opacity : {1.0, 0.1}) {
      for (double d : {50.0, 150.0, 300.0}) {
        out.push_back({Condition::interval(d), opacity, 1});
      }
    }
    return out;
  }
  throw CLI::ValidationError("--schedule", "unknown schedule '" + name + "' (formative, control, ring, interval)");
}

inline Condition condition_from_flags(const std::string& kind, double duration, double radius) {
  if (kind == "CONTROL") {
    return Condition::control(duration);
  }
  if (kind == "TAP") {
    return Condition::tap();
  }
  if (kind == "RING") {
    return Condition::ring(radius);
  }
  if (kind == "INTERVAL") {
    return Condition::interval(duration);
  }
  throw CLI::ValidationError("--condition", "unknown condition '" + kind + "'");
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Storage, "cannot read " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline httplib::Server* g_server = nullptr;
inline volatile std::sig_atomic_t g_stopping = 0;

inline void stop_server(int) {
  g_stopping = 1;
  if (g_server != nullptr) {
    g_server->stop();
  }
}

} // namespace cli_detail

/**
 * @brief Runs the command line with `args` (program name excluded).
 *
 * Each subcommand calls one library operation and renders its result with
 * the matching render_* function, so output equals the library result byte
 * for byte. Output goes to `out` unless --out names a file.
 */
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gaze-verified code entry: simulation, log tooling and collection service", "gazecode"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 1;
  std::string out_path;
  std::string format_text = "table";
  app.add_option("--seed", seed, "Master seed, echoed in every output header")->capture_default_str();
  app.add_option("--out", out_path, "Write output to this file instead of stdout");
  app.add_option("--format", format_text, "Output format")
      ->check(CLI::IsMember({"table", "csv", "records"}))
      ->capture_default_str();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run a simulated campaign and report acceptance and label noise");
  std::string model_name = "guesser";
  std::string mix_text;
  int sim_n = 4;
  std::uint32_t alphabet = kDecimalAlphabet;
  std::uint64_t trials = 100000;
  double foveator_accept = 0.9;
  std::string schedule_name = "control";
  unsigned threads = 1;
  simulate->add_option("--model", model_name, "guesser | foveator | foveator-calibrated | peripheral")
      ->capture_default_str();
  auto* mix_opt = simulate->add_option("--mix", mix_text, "Population mixture, e.g. guesser=0.5,foveator=0.5");
  simulate->get_option("--model")->excludes(mix_opt);
  simulate->add_option("--n", sim_n, "Code length")->check(CLI::PositiveNumber)->capture_default_str();
  simulate->add_option("--alphabet", alphabet, "Symbols per position")->check(CLI::Range(2, 10))->capture_default_str();
  simulate->add_option("--trials", trials, "Number of simulated trials")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  simulate->add_option("--foveator-accept", foveator_accept, "Trial acceptance of the constant foveator")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  simulate->add_option("--schedule", schedule_name, "formative | control | ring | interval")->capture_default_str();
  simulate->add_option("--threads", threads, "Worker threads (results do not depend on this)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Entropy/throughput frontier over code lengths");
  std::string range_text = "2..5";
  TimeModelParams time_model;
  std::uint32_t sweep_alphabet = kDecimalAlphabet;
  sweep->add_option("--n", range_text, "Code length or range A..B")->capture_default_str();
  sweep->add_option("--t-setup", time_model.t_setup_ms, "Setup time per trial (ms)")->capture_default_str();
  sweep->add_option("--t-digit", time_model.t_digit_ms, "Time per digit (ms)")->capture_default_str();
  sweep->add_option("--t-entry", time_model.t_entry_ms, "Entry time per trial (ms)")->capture_default_str();
  sweep->add_option("--alphabet", sweep_alphabet, "Symbols per position")->check(CLI::Range(2, 10))->capture_default_str();

  // validate / export-labels
  auto* validate = app.add_subcommand("validate", "Check a session log; exit 1 on violations");
  std::string validate_path;
  validate->add_option("path", validate_path, "Session log (JSON lines)")->required();
  auto* export_labels = app.add_subcommand("export-labels", "Write the frame/target label table of a session log");
  std::string labels_path;
  export_labels->add_option("path", labels_path, "Session log (JSON lines)")->required();

  // plan
  auto* plan = app.add_subcommand("plan", "Plan one trial and print its spec");
  std::string condition_kind = "CONTROL";
  double duration = 300.0;
  double radius = 0.13;
  double opacity = 1.0;
  int plan_n = 4;
  TrialId trial_id = 0;
  DeviceGeometry geometry;
  plan->add_option("--condition", condition_kind, "CONTROL | TAP | RING | INTERVAL")
      ->check(CLI::IsMember({"CONTROL", "TAP", "RING", "INTERVAL"}))
      ->capture_default_str();
  plan->add_option("--duration", duration, "Digit duration for CONTROL/INTERVAL (ms)")->capture_default_str();
  plan->add_option("--radius", radius, "Ring radius for RING (in)")->capture_default_str();
  plan->add_option("--opacity", opacity, "Digit opacity")->capture_default_str();
  plan->add_option("--n", plan_n, "Code length")->check(CLI::PositiveNumber)->capture_default_str();
  plan->add_option("--trial-id", trial_id, "Trial id")->capture_default_str();
  plan->add_option("--w-px", geometry.screen_w_px, "Portrait screen width (px)")->capture_default_str();
  plan->add_option("--h-px", geometry.screen_h_px, "Portrait screen height (px)")->capture_default_str();
  plan->add_option("--dpi", geometry.dpi, "Screen density")->capture_default_str();
  plan->add_option("--cam-x", geometry.camera_offset_in.x, "Camera x offset (in)")->capture_default_str();
  plan->add_option("--cam-y", geometry.camera_offset_in.y, "Camera y offset (in)")->capture_default_str();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the collection HTTP service until interrupted");
  ServerOptions server_options = ServerOptions::from_environment();
  serve->add_option("--data-dir", server_options.data_dir, "Session storage directory [GAZECODE_DATA_DIR]")
      ->capture_default_str();
  serve->add_option("--bind", server_options.bind, "host:port [GAZECODE_BIND]")->capture_default_str();
  serve->add_option("--config", server_options.config_file, "Default session config JSON [GAZECODE_CONFIG]");
  serve->add_option("--static-dir", server_options.static_dir, "Capture UI bundle to serve at / [GAZECODE_STATIC_DIR]");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kExitUsage;
  }

  const OutputFormat format = *parse_output_format(format_text);
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::binary);
    if (!file) {
      err << "error: cannot open " << out_path << " for writing\n";
      return kExitUsage;
    }
  }
  std::ostream& sink = out_path.empty() ? out : file;

  try {
    if (*simulate) {
      CampaignConfig config;
      config.session.code_length = sim_n;
      config.session.alphabet_size = alphabet;
      config.schedule = cli_detail::schedule_by_name(schedule_name);
      config.mixture = mix_text.empty()
                           ? std::vector<MixtureComponent>{{model_name,
                                                            cli_detail::model_by_name(model_name, sim_n, foveator_accept),
                                                            1.0}}
                           : cli_detail::parse_mix(mix_text, sim_n, foveator_accept);
      config.trials_total = trials;
      config.seed = seed;
      config.threads = threads;
      const Json header{{"command", "simulate"}, {"seed", seed}, {"trials", trials}, {"n", sim_n},
                        {"alphabet", alphabet}, {"schedule", schedule_name},
                        {"population", mix_text.empty() ? model_name : mix_text}};
      sink << render_metrics(simulate_campaign(config), format, header);
      return 0;
    }
    if (*sweep) {
      const auto [lo, hi] = cli_detail::parse_range(range_text);
      const Json header{{"command", "sweep"}, {"seed", seed}, {"n", range_text}, {"alphabet", sweep_alphabet}};
      sink << render_frontier(sweep_entropy_throughput(lo, hi, time_model, sweep_alphabet), format, header);
      return 0;
    }
    if (*validate || *export_labels) {
      const std::string& path = *validate ? validate_path : labels_path;
      std::string bytes;
      try {
        bytes = cli_detail::read_text_file(path);
      } catch (const Error& e) {
        err << "error: " << e.message() << '\n';
        return kExitUsage;
      }
      SessionLog log;
      try {
        log = parse_session(bytes);
      } catch (const Error& e) {
        err << path << ':' << e.line() << ": " << e.message() << '\n';
        return kExitInvalidData;
      }
      if (*validate) {
        const ValidationReport report = validate_session(log);
        sink << render_validation(report, format);
        return report.ok() ? 0 : kExitInvalidData;
      }
      sink << render_labels(extract_labels(log).labels, format);
      return 0;
    }
    if (*plan) {
      SessionConfig config;
      config.code_length = plan_n;
      config.stimulus.opacity = opacity;
      const Condition condition = cli_detail::condition_from_flags(condition_kind, duration, radius);
      const Json header{{"command", "plan"}, {"seed", seed}, {"trial_id", trial_id}};
      sink << render_trial_spec(plan_trial(config, condition, geometry, seed, trial_id), format, header);
      return 0;
    }
    if (*serve) {
      const auto [host, port] = server_options.host_port();
      CollectionService service(server_options.data_dir, server_options.session_defaults());
      httplib::Server server;
      mount_routes(server, service, server_options.static_dir);
      cli_detail::g_server = &server;
      std::signal(SIGINT, cli_detail::stop_server);
      std::signal(SIGTERM, cli_detail::stop_server);
      err << "gazecode: serving /api/v1 on " << host << ':' << port << " (data dir " << server_options.data_dir
          << ")\n";
      const bool ok = server.listen(host, port);
      cli_detail::g_server = nullptr;
      if (!ok && cli_detail::g_stopping == 0) {
        err << "error: cannot listen on " << server_options.bind << '\n';
        return kExitUsage;
      }
      return 0;
    }
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.message() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

} // namespace gazecode
