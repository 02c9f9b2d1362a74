#include "gazecode/campaign.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gazecode;

namespace {

CampaignConfig guesser_foveator_mix(int code_length, std::uint32_t alphabet, std::uint64_t trials) {
  CampaignConfig c;
  c.session.code_length = code_length;
  c.session.alphabet_size = alphabet;
  c.schedule = {{Condition::control(300.0), 1.0, 6}};
  c.mixture = {{"guesser", Guesser{}, 0.5},
               {"foveator", Foveator::with_trial_acceptance(0.9, code_length), 0.5}};
  c.trials_total = trials;
  c.seed = 2026;
  return c;
}

/// Standard error of the noise-rate estimate: a binomial proportion over
/// the accepted trials.
double noise_sigma(double q, std::uint64_t accepted) { return std::sqrt(q * (1 - q) / static_cast<double>(accepted)); }

} // namespace

TEST(Sweep, ExpectedRandomSuccessesColumn) {
  const auto rows = sweep_entropy_throughput(2, 5, TimeModelParams{});
  ASSERT_EQ(rows.size(), 4u);
  const std::vector<double> expected{10, 1, 0.1, 0.01};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].code_length, static_cast<int>(i) + 2);
    EXPECT_EQ(rows[i].mislabeled_per_1000, expected[i]);
  }
}

TEST(Sweep, ThroughputHalvesFromTwoToFourDigits) {
  const auto rows = sweep_entropy_throughput(2, 4, TimeModelParams{0, 800, 0});
  EXPECT_DOUBLE_EQ(rows[0].throughput_per_min, 37.5);
  EXPECT_DOUBLE_EQ(rows[2].throughput_per_min, 18.75);
}

TEST(Sweep, MonotoneColumnsAndSingleRow) {
  const auto rows = sweep_entropy_throughput(1, 9, TimeModelParams{1500, 450, 2500});
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_LT(rows[i].p_guess, rows[i - 1].p_guess);
    EXPECT_GT(rows[i].trial_time_ms, rows[i - 1].trial_time_ms);
    EXPECT_LT(rows[i].throughput_per_min, rows[i - 1].throughput_per_min);
  }
  EXPECT_EQ(sweep_entropy_throughput(4, 4, TimeModelParams{}).size(), 1u);
  EXPECT_THROW(sweep_entropy_throughput(5, 4, TimeModelParams{}), Error);
  EXPECT_THROW(sweep_entropy_throughput(0, 4, TimeModelParams{}), Error);
}

TEST(Campaign, BayesNoiseClosedForm) {
  EXPECT_NEAR(bayes_label_noise({0.5, 0.5}, {1e-4, 0.9}, {false, true}), 0.5e-4 / (0.5e-4 + 0.45), 1e-15);
  EXPECT_NEAR(bayes_label_noise({0.5, 0.5}, {0.5, 0.9}, {false, true}), 0.25 / 0.7, 1e-15);
  EXPECT_EQ(bayes_label_noise({1.0}, {0.9}, {true}), 0.0);
}

TEST(Campaign, DecimalCodeNoiseMatchesClosedForm) {
  const auto m = simulate_campaign(guesser_foveator_mix(4, 10, 2'000'000));
  const double q = 0.5e-4 / (0.5e-4 + 0.45);
  ASSERT_TRUE(m.expected_label_noise_rate.has_value());
  EXPECT_NEAR(*m.expected_label_noise_rate, q, 1e-12);
  EXPECT_NEAR(m.label_noise_rate, q, 3 * noise_sigma(q, m.accepted_count));
  EXPECT_LE(m.accepted_count, m.trials_total);
}

TEST(Campaign, BinaryProbeNoiseMatchesClosedForm) {
  const auto m = simulate_campaign(guesser_foveator_mix(1, 2, 200'000));
  const double q = 0.25 / 0.7;
  EXPECT_NEAR(*m.expected_label_noise_rate, q, 1e-12);
  EXPECT_NEAR(m.label_noise_rate, q, 3 * noise_sigma(q, m.accepted_count));
}

TEST(Campaign, PureFoveatorHasNoNoise) {
  CampaignConfig c = guesser_foveator_mix(4, 10, 20'000);
  c.mixture = {{"foveator", default_foveator(), 1.0}};
  c.schedule = formative_schedule();
  const auto m = simulate_campaign(c);
  EXPECT_EQ(m.label_noise_rate, 0.0);
  EXPECT_GT(m.accepted_count, 0u);
  EXPECT_FALSE(m.expected_label_noise_rate.has_value());
}

TEST(Campaign, DeterministicAcrossThreadCounts) {
  CampaignConfig c = guesser_foveator_mix(3, 10, 60'000);
  c.mixture = {{"guesser", Guesser{}, 0.2}, {"foveator", default_foveator(), 0.5}, {"peripheral", PeripheralReader{}, 0.3}};
  c.schedule = formative_schedule();
  c.threads = 1;
  const auto a = simulate_campaign(c);
  c.threads = 3;
  const auto b = simulate_campaign(c);
  const auto again = simulate_campaign(c);
  for (const auto* other : {&b, &again}) {
    EXPECT_EQ(a.accepted_count, other->accepted_count);
    EXPECT_EQ(a.accepted_without_foveation, other->accepted_without_foveation);
    EXPECT_EQ(a.label_noise_rate, other->label_noise_rate);
    ASSERT_EQ(a.conditions.size(), other->conditions.size());
    for (std::size_t i = 0; i < a.conditions.size(); ++i) {
      EXPECT_EQ(a.conditions[i].accepted, other->conditions[i].accepted);
      EXPECT_EQ(a.conditions[i].trials, other->conditions[i].trials);
    }
    for (std::size_t i = 0; i < a.models.size(); ++i) {
      EXPECT_EQ(a.models[i].accepted, other->models[i].accepted);
    }
  }
}

TEST(Campaign, ScheduleCyclesThroughBlocks) {
  CampaignConfig c = guesser_foveator_mix(4, 10, 24 * 10);
  c.schedule = formative_schedule(6);
  c.trials_total = 6 * c.schedule.size() * 3;
  const auto m = simulate_campaign(c);
  for (const auto& cond : m.conditions) {
    EXPECT_EQ(cond.trials, 18u) << cond.label;
  }
}

TEST(Campaign, FaintRingSuccessNonIncreasingInRadius) {
  CampaignConfig c;
  c.mixture = {{"peripheral", PeripheralReader{}, 1.0}};
  c.schedule = {{Condition::ring(0.13), 0.1, 1}, {Condition::ring(0.23), 0.1, 1}, {Condition::ring(0.33), 0.1, 1}};
  c.trials_total = 300'000;
  c.seed = 4;
  const auto m = simulate_campaign(c);
  ASSERT_EQ(m.conditions.size(), 3u);
  EXPECT_GE(m.conditions[0].success_rate, m.conditions[1].success_rate);
  EXPECT_GE(m.conditions[1].success_rate, m.conditions[2].success_rate);
}

TEST(Campaign, IntervalSuccessNonDecreasingInDuration) {
  CampaignConfig c;
  c.mixture = {{"foveator", default_foveator(), 1.0}};
  c.schedule = {{Condition::interval(50), 0.1, 1}, {Condition::interval(150), 0.1, 1}, {Condition::interval(300), 0.1, 1}};
  c.trials_total = 90'000;
  const auto m = simulate_campaign(c);
  EXPECT_LE(m.conditions[0].success_rate, m.conditions[1].success_rate);
  EXPECT_LE(m.conditions[1].success_rate, m.conditions[2].success_rate);
  // Faint CONTROL-length presentation reproduces the calibration target.
  EXPECT_NEAR(m.conditions[2].success_rate, 0.67, 0.01);
}

TEST(Campaign, Metrics) {
  CampaignConfig c = guesser_foveator_mix(4, 10, 1000);
  c.session.time_model = {2000, 800, 3000};
  const auto m = simulate_campaign(c);
  EXPECT_EQ(m.trial_time_ms, 8200.0);
  EXPECT_DOUBLE_EQ(m.throughput_trials_per_min, 60000.0 / 8200.0);
  EXPECT_EQ(m.frontier_rows.size(), 4u);
  EXPECT_GE(m.success_rate, 0.0);
  EXPECT_LE(m.success_rate, 1.0);
}

TEST(Campaign, InvalidConfigurations) {
  CampaignConfig c = guesser_foveator_mix(4, 10, 0);
  EXPECT_THROW(simulate_campaign(c), Error);
  c.trials_total = 10;
  c.mixture[0].weight = 0.7;
  EXPECT_THROW(simulate_campaign(c), Error);
  c.mixture.clear();
  EXPECT_THROW(simulate_campaign(c), Error);
}
