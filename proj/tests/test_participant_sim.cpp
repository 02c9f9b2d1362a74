#include "gazecode/participant_sim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace gazecode;

namespace {

struct Rate {
  std::uint64_t hits = 0;
  std::uint64_t trials = 0;
  [[nodiscard]] double value() const { return static_cast<double>(hits) / static_cast<double>(trials); }
};

Rate run_trials(const ParticipantModel& model, const SessionConfig& config, const Condition& condition,
                std::uint64_t trials, std::uint64_t seed, const SimContext& ctx = {}) {
  Rate r;
  for (std::uint64_t t = 0; t < trials; ++t) {
    const auto spec = plan_trial(config, condition, ctx.geometry, derive_seed(seed, t), t);
    SplitMix64 rng(derive_seed(seed ^ 0xABCDEF, t));
    r.hits += simulate_trial(model, spec, rng, ctx).accepted ? 1 : 0;
    ++r.trials;
  }
  return r;
}

double binomial_sigma(double p, std::uint64_t m) { return std::sqrt(p * (1 - p) / static_cast<double>(m)); }

/// Probability that a Foveator keys the right symbol, by propagating the
/// full symbol distribution through identify -> memory -> entry.
double per_digit_correct_by_enumeration(double p, double eps_memory, double eps_entry, int alphabet) {
  std::vector<double> dist(static_cast<std::size_t>(alphabet), (1 - p) / alphabet);
  dist[0] += p; // symbol 0 is the truth
  auto corrupt = [alphabet](const std::vector<double>& in, double eps) {
    std::vector<double> out(in.size(), 0.0);
    for (int from = 0; from < alphabet; ++from) {
      out[from] += in[from] * (1 - eps);
      for (int to = 0; to < alphabet; ++to) {
        if (to != from) {
          out[to] += in[from] * eps / (alphabet - 1);
        }
      }
    }
    return out;
  };
  return corrupt(corrupt(dist, eps_memory), eps_entry)[0];
}

} // namespace

TEST(Readability, ZeroEccentricityReturnsBase) {
  ReadabilityParams p;
  p.base_by_opacity = {{0.1, 0.42}, {1.0, 0.97}};
  p.decay_k_per_in = 3.0;
  EXPECT_DOUBLE_EQ(readability(p, 0.0, 0.1, 300.0), 0.42);
  EXPECT_DOUBLE_EQ(readability(p, 0.0, 1.0, 300.0), 0.97);
  EXPECT_DOUBLE_EQ(readability(p, 0.0, 1.0, 50.0), 0.97 * 0.9);
}

TEST(Readability, CalibratedEndpointsBackSubstitute) {
  const ReadabilityParams p = calibrated_peripheral_readability();
  EXPECT_NEAR(readability(p, 0.13, 0.1, 300.0), 0.33, 1e-12);
  EXPECT_NEAR(readability(p, 0.33, 0.1, 300.0), 0.11, 1e-12);
}

TEST(Readability, NoDecayMeansNoEccentricityEffect) {
  ReadabilityParams p;
  p.base_by_opacity = {{0.1, 0.5}};
  for (double e : {0.0, 0.13, 0.33, 3.0}) {
    EXPECT_DOUBLE_EQ(readability(p, e, 0.1, 300.0), 0.5);
  }
}

TEST(Readability, Errors) {
  const ReadabilityParams p = calibrated_peripheral_readability();
  try {
    readability(p, 0.1, 0.5, 300.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfiguration);
  }
  EXPECT_THROW(readability(p, -0.1, 0.1, 300.0), Error);
}

TEST(Readability, MultiplierIsStepFunction) {
  ReadabilityParams p;
  EXPECT_DOUBLE_EQ(p.multiplier(10.0), 0.9);
  EXPECT_DOUBLE_EQ(p.multiplier(149.9), 0.9);
  EXPECT_DOUBLE_EQ(p.multiplier(150.0), 0.95);
  EXPECT_DOUBLE_EQ(p.multiplier(1000.0), 1.0);
  EXPECT_DOUBLE_EQ(p.multiplier(kTapDuration), 1.0);
}

TEST(Readability, MonotoneUnderRandomParameters) {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 500; ++trial) {
    ReadabilityParams p;
    const std::vector<double> opacities{0.05, 0.1, 0.3, 1.0};
    double base = rng.uniform() * 0.3;
    for (double o : opacities) {
      p.base_by_opacity[o] = base;
      base = std::min(1.0, base + rng.uniform() * 0.3);
    }
    const std::vector<double> durations{50, 150, 300, kTapDuration};
    double m = 0.5 + rng.uniform() * 0.3;
    p.duration_multiplier.clear();
    for (double d : durations) {
      p.duration_multiplier[d] = m;
      m = std::min(1.2, m + rng.uniform() * 0.2);
    }
    p.decay_k_per_in = rng.uniform() * 10.0;

    const double e1 = rng.uniform();
    const double e2 = e1 + rng.uniform();
    const double d1 = 10 + rng.uniform() * 400;
    const double d2 = d1 + rng.uniform() * 400;
    for (std::size_t i = 0; i < opacities.size(); ++i) {
      const double o = opacities[i];
      EXPECT_GE(readability(p, e1, o, d1), readability(p, e2, o, d1));
      EXPECT_LE(readability(p, e1, o, d1), readability(p, e1, o, d2));
      if (i + 1 < opacities.size()) {
        EXPECT_LE(readability(p, e1, o, d1), readability(p, e1, opacities[i + 1], d1));
      }
    }
  }
}

TEST(FitTwoPointExponential, RingEndpoints) {
  const auto fit = fit_two_point_exponential(0.13, 0.33, 0.33, 0.11);
  // Solved by hand: k = ln 3 / 0.2, base = 0.33 * exp(0.13 k).
  EXPECT_NEAR(fit.k_per_in, 5.493061443340548, 1e-12);
  EXPECT_NEAR(fit.base, 0.673973398541966, 1e-12);
  EXPECT_NEAR(fit.k_per_in, 5.4931, 1e-4);
  EXPECT_NEAR(fit.base, 0.6740, 1e-4);
  EXPECT_NEAR(fit.base * std::exp(-fit.k_per_in * 0.13), 0.33, 1e-12);
  EXPECT_NEAR(fit.base * std::exp(-fit.k_per_in * 0.33), 0.11, 1e-12);
}

TEST(FitTwoPointExponential, FlatAndErrors) {
  const auto flat = fit_two_point_exponential(0.1, 0.4, 0.7, 0.4);
  EXPECT_DOUBLE_EQ(flat.k_per_in, 0.0);
  EXPECT_DOUBLE_EQ(flat.base, 0.4);
  EXPECT_THROW(fit_two_point_exponential(0.1, 0.0, 0.2, 0.1), Error);
  EXPECT_THROW(fit_two_point_exponential(0.1, 0.3, 0.1, 0.1), Error);
  EXPECT_THROW(fit_two_point_exponential(0.1, 1.3, 0.2, 0.1), Error);
}

TEST(SimulateTrial, PerfectFoveatorAlwaysAccepted) {
  const ParticipantModel model = Foveator::constant(1.0);
  SplitMix64 rng(1);
  for (std::uint64_t s = 0; s < 2000; ++s) {
    const auto spec = plan_trial(SessionConfig{}, Condition::interval(50), DeviceGeometry{}, s, s);
    const auto out = simulate_trial(model, spec, rng);
    EXPECT_TRUE(out.accepted);
    EXPECT_EQ(out.entered, spec.code);
    EXPECT_EQ(out.foveated_per_digit, std::vector<bool>(4, true));
    EXPECT_EQ(out.trial_id, s);
  }
}

TEST(SimulateTrial, OutcomeConsistentWithVerification) {
  const std::vector<ParticipantModel> models{Guesser{}, default_foveator(), PeripheralReader{}};
  SessionConfig config;
  config.stimulus.opacity = 0.1;
  SplitMix64 rng(2);
  for (const auto& model : models) {
    for (std::uint64_t s = 0; s < 3000; ++s) {
      const auto spec = plan_trial(config, Condition::ring(0.13), DeviceGeometry{}, s);
      const auto out = simulate_trial(model, spec, rng);
      EXPECT_EQ(out.accepted, verify_entry(spec.code, out.entered).accepted);
      EXPECT_TRUE(out.entered.valid());
      EXPECT_EQ(out.model_kind, model_kind(model));
      const bool foveates = std::holds_alternative<Foveator>(model);
      EXPECT_EQ(out.foveated_per_digit, std::vector<bool>(4, foveates));
    }
  }
}

TEST(SimulateTrial, GuesserMatchesBinomialOracle) {
  SessionConfig config;
  config.code_length = 2;
  constexpr std::uint64_t kTrials = 1'000'000;
  const Rate r = run_trials(Guesser{}, config, Condition::control(), kTrials, 31);
  EXPECT_NEAR(r.value(), 1e-2, 4 * binomial_sigma(1e-2, kTrials));
}

TEST(SimulateTrial, BlindPeripheralReaderDegeneratesToGuessing) {
  PeripheralReader blind;
  blind.readability.base_by_opacity = {{1.0, 0.0}, {0.1, 0.0}};
  SessionConfig config;
  config.code_length = 2;
  constexpr std::uint64_t kTrials = 400'000;
  const Rate r = run_trials(blind, config, Condition::control(), kTrials, 32);
  EXPECT_NEAR(r.value(), 1e-2, 4 * binomial_sigma(1e-2, kTrials));
}

TEST(SimulateTrial, FoveatorErrorsMatchEnumeration) {
  for (int alphabet : {2, 3, 10}) {
    const double p = 0.8;
    const double em = 0.05;
    const double ee = 0.03;
    const ParticipantModel model = Foveator::constant(p, em, ee);
    SessionConfig config;
    config.code_length = 3;
    config.alphabet_size = static_cast<std::uint32_t>(alphabet);
    const double expected = std::pow(per_digit_correct_by_enumeration(p, em, ee, alphabet), 3);
    EXPECT_NEAR(*analytic_acceptance(model, 3, static_cast<std::uint32_t>(alphabet)), expected, 1e-12);
    constexpr std::uint64_t kTrials = 200'000;
    const Rate r = run_trials(model, config, Condition::control(), kTrials, 40 + alphabet,
                              SimContext{DeviceGeometry{}, static_cast<std::uint32_t>(alphabet)});
    EXPECT_NEAR(r.value(), expected, 4 * binomial_sigma(expected, kTrials));
  }
}

TEST(SimulateTrial, WithTrialAcceptance) {
  const auto f4 = Foveator::with_trial_acceptance(0.9, 4);
  EXPECT_NEAR(*analytic_acceptance(f4, 4), 0.9, 1e-12);
  const auto f1 = Foveator::with_trial_acceptance(0.9, 1);
  EXPECT_NEAR(*analytic_acceptance(f1, 1, 2), 0.9, 1e-12);
  EXPECT_FALSE(analytic_acceptance(PeripheralReader{}, 4).has_value());
  EXPECT_FALSE(analytic_acceptance(default_foveator(), 4).has_value());
  EXPECT_EQ(*analytic_acceptance(Guesser{}, 4), 1e-4);
}

TEST(SimulateTrial, PeripheralRingEccentricityEqualsRadius) {
  const DeviceGeometry g;
  for (double r : {0.13, 0.23, 0.33}) {
    for (std::uint64_t s = 0; s < 50; ++s) {
      const auto spec = plan_trial(SessionConfig{}, Condition::ring(r), g, s);
      const Vec2 fix = peripheral_fixation(spec, spec.digit_placements[0], g);
      const Vec2 screen = g.displayed_px(spec.required_orientation);
      const double ecc =
          std::hypot((fix.x - spec.digit_placements[0].x) * screen.x, (fix.y - spec.digit_placements[0].y) * screen.y) /
          g.dpi;
      EXPECT_NEAR(ecc, r, 1e-9);
    }
  }
}

TEST(SimulateTrial, FaintRingSuccessFallsWithRadius) {
  SessionConfig config;
  config.stimulus.opacity = 0.1;
  config.code_length = 1;
  constexpr std::uint64_t kTrials = 100'000;
  std::vector<double> rates;
  for (double r : {0.13, 0.23, 0.33}) {
    rates.push_back(run_trials(PeripheralReader{}, config, Condition::ring(r), kTrials, 50).value());
  }
  // Single digit: readability + (1 - readability)/10.
  EXPECT_NEAR(rates[0], 0.33 + 0.67 / 10, 0.01);
  EXPECT_NEAR(rates[2], 0.11 + 0.89 / 10, 0.01);
  EXPECT_GE(rates[0], rates[1]);
  EXPECT_GE(rates[1], rates[2]);
}

TEST(Models, Validation) {
  EXPECT_THROW(validate_model(Foveator::constant(1.2)), Error);
  EXPECT_THROW(validate_model(Foveator::constant(0.9, 1.0, 0.0)), Error);
  PeripheralReader bad;
  bad.readability.decay_k_per_in = -1;
  EXPECT_THROW(validate_model(bad), Error);
  EXPECT_NO_THROW(validate_model(default_foveator()));
}
