#pragma once

#include "gazecode/error.hpp"
#include "gazecode/participant_sim.hpp"
#include "gazecode/protocol.hpp"
#include "gazecode/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace gazecode {

struct MixtureComponent {
  std::string name;
  ParticipantModel model;
  double weight = 1.0;
};

struct CampaignConfig {
  SessionConfig session{};
  DeviceGeometry geometry{};
  std::vector<ConditionBlock> schedule = formative_schedule();
  std::vector<MixtureComponent> mixture;
  std::uint64_t trials_total = 1000;
  std::uint64_t seed = 0;
  /// Worker threads; results do not depend on this value.
  unsigned threads = 1;
  int frontier_min_n = 2;
  int frontier_max_n = 5;

  void validate() const {
    session.validate();
    geometry.validate();
    if (trials_total < 1) {
      throw Error(ErrorCode::InvalidConfiguration, "trials_total must be at least 1");
    }
    if (schedule.empty()) {
      throw Error(ErrorCode::InvalidConfiguration, "condition schedule is empty");
    }
    for (const auto& block : schedule) {
      if (block.repeats < 1) {
        throw Error(ErrorCode::InvalidConfiguration, "condition repeats must be at least 1");
      }
      validate_condition(block.condition, session);
    }
    if (mixture.empty()) {
      throw Error(ErrorCode::InvalidConfiguration, "population mixture is empty");
    }
    double total = 0.0;
    for (const auto& c : mixture) {
      if (!(c.weight >= 0.0)) {
        throw Error(ErrorCode::InvalidConfiguration, "mixture weights must be non-negative");
      }
      validate_model(c.model);
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw Error(ErrorCode::InvalidConfiguration, "mixture weights must sum to 1");
    }
  }
};

struct FrontierRow {
  int code_length = 0;
  double p_guess = 0.0;
  double mislabeled_per_1000 = 0.0;
  double trial_time_ms = 0.0;
  double throughput_per_min = 0.0;
  friend bool operator==(const FrontierRow&, const FrontierRow&) = default;
};

/// Verification entropy against throughput for each N in [n_min, n_max].
inline std::vector<FrontierRow> sweep_entropy_throughput(int n_min, int n_max, const TimeModelParams& time,
                                                         std::uint32_t alphabet = kDecimalAlphabet) {
  if (n_min < 1 || n_max < n_min) {
    throw Error(ErrorCode::InvalidArgument, "code length range must be non-empty and start at 1 or above");
  }
  std::vector<FrontierRow> rows;
  for (int n = n_min; n <= n_max; ++n) {
    FrontierRow row;
    row.code_length = n;
    row.p_guess = p_guess(n, alphabet);
    row.mislabeled_per_1000 = expected_random_successes(n, 1000, alphabet);
    row.trial_time_ms = trial_time(time, n);
    row.throughput_per_min = 60000.0 / row.trial_time_ms;
    rows.push_back(row);
  }
  return rows;
}

struct ConditionMetrics {
  std::string label;
  std::uint64_t trials = 0;
  std::uint64_t accepted = 0;
  double success_rate = 0.0;
};

struct ModelMetrics {
  std::string name;
  std::string kind;
  double weight = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t accepted = 0;
  double acceptance_rate = 0.0;
  std::optional<double> analytic_acceptance;
  bool foveates = false;
};

struct CampaignMetrics {
  std::uint64_t seed = 0;
  int code_length = 0;
  std::uint32_t alphabet = kDecimalAlphabet;
  std::uint64_t trials_total = 0;
  std::uint64_t accepted_count = 0;
  std::uint64_t accepted_without_foveation = 0;
  double success_rate = 0.0;
  /// Accepted trials produced without foveation / accepted trials.
  double label_noise_rate = 0.0;
  /// Bayes closed form from analytic per-model acceptance; empty when a
  /// model has no closed form.
  std::optional<double> expected_label_noise_rate;
  std::vector<ConditionMetrics> conditions;
  std::vector<ModelMetrics> models;
  double trial_time_ms = 0.0;
  double throughput_trials_per_min = 0.0;
  std::vector<FrontierRow> frontier_rows;
};

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Wilson score interval for a binomial proportion; z = 1.96 gives 95 %.
inline Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = 1.959963984540054) {
  if (trials == 0) {
    return {0.0, 1.0};
  }
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double center = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

/// noise = sum over non-foveating models of w*a / sum over all models of w*a.
inline double bayes_label_noise(const std::vector<double>& weights, const std::vector<double>& acceptance,
                                const std::vector<bool>& foveates) {
  double cheat = 0.0;
  double all = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double mass = weights[i] * acceptance[i];
    all += mass;
    if (!foveates[i]) {
      cheat += mass;
    }
  }
  return all > 0.0 ? cheat / all : 0.0;
}

namespace detail {

struct Tally {
  std::vector<std::uint64_t> block_trials;
  std::vector<std::uint64_t> block_accepted;
  std::vector<std::uint64_t> model_trials;
  std::vector<std::uint64_t> model_accepted;
  std::uint64_t accepted_without_foveation = 0;

  Tally(std::size_t blocks, std::size_t models)
      : block_trials(blocks), block_accepted(blocks), model_trials(models), model_accepted(models) {}

  void merge(const Tally& o) {
    for (std::size_t i = 0; i < block_trials.size(); ++i) {
      block_trials[i] += o.block_trials[i];
      block_accepted[i] += o.block_accepted[i];
    }
    for (std::size_t i = 0; i < model_trials.size(); ++i) {
      model_trials[i] += o.model_trials[i];
      model_accepted[i] += o.model_accepted[i];
    }
    accepted_without_foveation += o.accepted_without_foveation;
  }
};

inline std::size_t draw_component(const std::vector<double>& cumulative, double u) {
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

} // namespace detail

/**
 * @brief Runs a simulated campaign and summarizes it.
 *
 * Trial t uses the sub-stream derive_seed(seed, t) for its participant draw,
 * its plan and its behaviour, and the block schedule[t mod schedule length]
 * (blocks expanded by their repeat counts). Shards only add integer counts,
 * so any thread count yields bit-identical metrics.
 */
inline CampaignMetrics simulate_campaign(const CampaignConfig& config) {
  config.validate();

  std::vector<std::size_t> expanded;
  for (std::size_t b = 0; b < config.schedule.size(); ++b) {
    expanded.insert(expanded.end(), static_cast<std::size_t>(config.schedule[b].repeats), b);
  }
  std::vector<SessionConfig> block_configs;
  for (const auto& block : config.schedule) {
    SessionConfig s = config.session;
    s.stimulus.opacity = block.opacity;
    block_configs.push_back(s);
  }
  std::vector<double> cumulative;
  double acc = 0.0;
  for (const auto& c : config.mixture) {
    acc += c.weight;
    cumulative.push_back(acc);
  }
  const SimContext ctx{config.geometry, config.session.alphabet_size};

  auto run = [&](std::uint64_t begin, std::uint64_t end) {
    detail::Tally tally(config.schedule.size(), config.mixture.size());
    for (std::uint64_t t = begin; t < end; ++t) {
      const std::uint64_t trial_seed = derive_seed(config.seed, t);
      SplitMix64 model_rng(derive_seed(trial_seed, stream::model));
      const std::size_t m = detail::draw_component(cumulative, model_rng.uniform() * acc);
      const std::size_t b = expanded[t % expanded.size()];
      const TrialSpec spec = plan_trial(block_configs[b], config.schedule[b].condition, config.geometry,
                                        derive_seed(trial_seed, stream::plan), t);
      SplitMix64 rng(derive_seed(trial_seed, stream::behaviour));
      const SimOutcome outcome = simulate_trial(config.mixture[m].model, spec, rng, ctx);
      ++tally.block_trials[b];
      ++tally.model_trials[m];
      if (outcome.accepted) {
        ++tally.block_accepted[b];
        ++tally.model_accepted[m];
        if (!std::holds_alternative<Foveator>(config.mixture[m].model)) {
          ++tally.accepted_without_foveation;
        }
      }
    }
    return tally;
  };

  const unsigned threads = std::max(1u, config.threads);
  detail::Tally total(config.schedule.size(), config.mixture.size());
  if (threads == 1) {
    total = run(0, config.trials_total);
  } else {
    std::vector<detail::Tally> shards(threads, detail::Tally(config.schedule.size(), config.mixture.size()));
    std::vector<std::thread> workers;
    const std::uint64_t chunk = (config.trials_total + threads - 1) / threads;
    for (unsigned i = 0; i < threads; ++i) {
      const std::uint64_t begin = std::min<std::uint64_t>(config.trials_total, i * chunk);
      const std::uint64_t end = std::min<std::uint64_t>(config.trials_total, begin + chunk);
      workers.emplace_back([&, i, begin, end] { shards[i] = run(begin, end); });
    }
    for (auto& w : workers) {
      w.join();
    }
    for (const auto& s : shards) {
      total.merge(s);
    }
  }

  CampaignMetrics out;
  out.seed = config.seed;
  out.code_length = config.session.code_length;
  out.alphabet = config.session.alphabet_size;
  out.trials_total = config.trials_total;
  out.accepted_without_foveation = total.accepted_without_foveation;
  for (std::size_t b = 0; b < config.schedule.size(); ++b) {
    out.accepted_count += total.block_accepted[b];
    ConditionMetrics cm;
    cm.label = config.schedule[b].label();
    cm.trials = total.block_trials[b];
    cm.accepted = total.block_accepted[b];
    cm.success_rate = cm.trials ? static_cast<double>(cm.accepted) / static_cast<double>(cm.trials) : 0.0;
    out.conditions.push_back(cm);
  }
  out.success_rate = static_cast<double>(out.accepted_count) / static_cast<double>(out.trials_total);
  out.label_noise_rate = out.accepted_count ? static_cast<double>(out.accepted_without_foveation) /
                                                  static_cast<double>(out.accepted_count)
                                            : 0.0;

  std::vector<double> weights;
  std::vector<double> analytic;
  std::vector<bool> foveates;
  bool closed_form = true;
  for (std::size_t m = 0; m < config.mixture.size(); ++m) {
    const auto& c = config.mixture[m];
    ModelMetrics mm;
    mm.name = c.name;
    mm.kind = std::string(model_kind(c.model));
    mm.weight = c.weight;
    mm.trials = total.model_trials[m];
    mm.accepted = total.model_accepted[m];
    mm.acceptance_rate = mm.trials ? static_cast<double>(mm.accepted) / static_cast<double>(mm.trials) : 0.0;
    mm.analytic_acceptance = analytic_acceptance(c.model, config.session.code_length, config.session.alphabet_size);
    mm.foveates = std::holds_alternative<Foveator>(c.model);
    out.models.push_back(mm);
    weights.push_back(c.weight);
    foveates.push_back(mm.foveates);
    if (mm.analytic_acceptance) {
      analytic.push_back(*mm.analytic_acceptance);
    } else {
      closed_form = false;
    }
  }
  if (closed_form) {
    out.expected_label_noise_rate = bayes_label_noise(weights, analytic, foveates);
  }

  out.trial_time_ms = trial_time(config.session.time_model, config.session.code_length);
  out.throughput_trials_per_min = out.trial_time_ms > 0.0 ? 60000.0 / out.trial_time_ms : 0.0;
  out.frontier_rows = sweep_entropy_throughput(config.frontier_min_n, config.frontier_max_n,
                                               config.session.time_model, config.session.alphabet_size);
  return out;
}

} // namespace gazecode
