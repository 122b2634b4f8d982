#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "atomcal/error.hpp"
#include "atomcal/stats.hpp"

using namespace atomcal;
using namespace atomcal::stats;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an atomcal::Error";
  return ErrorCode::IoError;
}

void expect_rel(double got, double want, double rel) {
  EXPECT_LE(std::abs(got - want), rel * std::abs(want)) << "got " << got << " want " << want;
}

/// Two-sided exact p by enumerating every split of the pooled values.
double brute_force_mwu_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = pooled.size(), m = a.size();
  const double mu = static_cast<double>(a.size() * b.size()) / 2.0;
  const double observed = std::abs(mann_whitney_statistic(a, b) - mu);
  long total = 0, extreme = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != m) continue;
    std::vector<double> x, y;
    for (std::size_t i = 0; i < n; ++i) ((mask >> i) & 1u ? x : y).push_back(pooled[i]);
    ++total;
    if (std::abs(mann_whitney_statistic(x, y) - mu) >= observed - 1e-9) ++extreme;
  }
  return static_cast<double>(extreme) / static_cast<double>(total);
}

}  // namespace

// Reference values computed with 50-digit arithmetic.
TEST(IncompleteBeta, MatchesHighPrecisionReference) {
  struct Case {
    double x, a, b, want;
  };
  const Case cases[] = {
      {0.3, 2.5, 3.0, 0.2412375539211815824970781},
      {0.9, 0.5, 0.5, 0.7951672353008665719104665},
      {0.01, 10, 2, 1.090000000000000226693664e-19},
      {0.5, 30, 30, 0.5},
      {0.2, 1, 1, 0.2000000000000000111022302},
      {0.75, 50, 0.5, 8.769694091866920136467015e-8},
      {0.05, 3, 100, 0.8897301432712787976555742},
      {0.02, 3, 100, 0.3342498294083390101923471},
      {0.6, 200, 150, 0.8601906604801525652396862},
      {0.999, 0.5, 5, 0.999999999999999753803645},
  };
  for (const auto& c : cases) {
    SCOPED_TRACE(::testing::Message() << "x=" << c.x << " a=" << c.a << " b=" << c.b);
    expect_rel(incomplete_beta(c.a, c.b, c.x), c.want, 1e-10);
  }
  EXPECT_EQ(incomplete_beta(2, 3, 0.0), 0.0);
  EXPECT_EQ(incomplete_beta(2, 3, 1.0), 1.0);
}

TEST(StudentT, MatchesHighPrecisionReference) {
  struct Case {
    double t, df, want;
  };
  const Case cases[] = {
      {2.1909, 6, 0.07098669853092345635260706},   {1.5, 3.7, 0.2135981692020135306014281},
      {-4.2, 12.5, 0.001129366335589340577902182}, {0.3, 100, 0.7647998803003034878478328},
      {10, 2, 0.009852457023325690846726871},      {3, 1, 0.2048327646991334516491978},
  };
  for (const auto& c : cases) expect_rel(student_t_two_sided(c.t, c.df), c.want, 1e-10);
  EXPECT_EQ(student_t_two_sided(0.0, 5), 1.0);
}

TEST(StudentT, ClosedFormsAtOneAndTwoDegrees) {
  for (double t = -30; t <= 30; t += 0.37) {
    const double cauchy = 1.0 - (2.0 / std::numbers::pi) * std::atan(std::abs(t));
    const double df2 = 1.0 - std::abs(t) / std::sqrt(t * t + 2.0);
    EXPECT_NEAR(student_t_two_sided(t, 1), cauchy, 1e-10);
    EXPECT_NEAR(student_t_two_sided(t, 2), df2, 1e-10);
  }
}

TEST(Normal, TwoSided) {
  EXPECT_NEAR(normal_two_sided(1.959963984540054), 0.05, 1e-12);
  EXPECT_EQ(normal_two_sided(0.0), 1.0);
}

TEST(Welch, Examples) {
  const std::vector<double> a{1, 2, 3, 4}, b{3, 4, 5, 6};
  const auto r = welch_t(a, b);
  EXPECT_NEAR(r.statistic, -2.1908902300206647, 1e-12);
  ASSERT_TRUE(r.degrees_of_freedom);
  EXPECT_NEAR(*r.degrees_of_freedom, 6.0, 1e-12);
  EXPECT_NEAR(r.p_value, 0.0709, 1e-3);
  EXPECT_NEAR(r.p_value, 0.07098765432098755, 1e-12);
  EXPECT_EQ(r.method, Method::WelchT);

  const auto same = welch_t(a, a);
  EXPECT_EQ(same.statistic, 0.0);
  EXPECT_EQ(same.p_value, 1.0);

  const std::vector<double> zeros{0, 0, 0}, ones{1, 1, 1}, one{1};
  EXPECT_EQ(code_of([&] { welch_t(zeros, ones); }), ErrorCode::ZeroVariancePair);
  EXPECT_EQ(code_of([&] { welch_t(one, a); }), ErrorCode::InsufficientData);
}

TEST(MannWhitney, Examples) {
  const std::vector<double> a{1, 2}, b{3, 4};
  EXPECT_EQ(mann_whitney_statistic(a, b), 0.0);
  EXPECT_NEAR(mann_whitney_exact_p(a, b), 1.0 / 3.0, 1e-15);
  const std::vector<double> c{5, 1, 3}, d{3, 5, 1};
  EXPECT_EQ(mann_whitney_statistic(c, d), 4.5);
  const std::vector<double> t1{2, 2, 2}, t2{2, 2};
  const auto r = mann_whitney_u(t1, t2);
  EXPECT_EQ(r.statistic, 3.0);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_EQ(mann_whitney_normal_p(t1, t2), 1.0);
  const std::vector<double> empty;
  EXPECT_EQ(code_of([&] { mann_whitney_u(empty, a); }), ErrorCode::InsufficientData);
}

TEST(MannWhitney, ExactMatchesBruteForceWithTies) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t na = 1 + rng() % 6, nb = 1 + rng() % 6;
    std::vector<double> a, b;
    for (std::size_t i = 0; i < na; ++i) a.push_back(static_cast<double>(rng() % 5));
    for (std::size_t i = 0; i < nb; ++i) b.push_back(static_cast<double>(rng() % 5));
    ASSERT_NEAR(mann_whitney_exact_p(a, b), brute_force_mwu_p(a, b), 1e-12);
  }
}

TEST(MannWhitney, ExactSwitchAndLargeSamples) {
  std::vector<double> a(20), b(20);
  std::iota(a.begin(), a.end(), 0.0);
  std::iota(b.begin(), b.end(), 10.5);
  EXPECT_TRUE(mann_whitney_u(a, b).exact);
  std::vector<double> big_a(30), big_b(20);
  std::iota(big_a.begin(), big_a.end(), 0.0);
  std::iota(big_b.begin(), big_b.end(), 5.5);
  const auto r = mann_whitney_u(big_a, big_b);
  EXPECT_FALSE(r.exact);
  EXPECT_EQ(r.p_value, mann_whitney_normal_p(big_a, big_b));
}

TEST(PointBiserial, Examples) {
  const std::vector<int> two{0, 1};
  const std::vector<double> v2{1, 2};
  EXPECT_NEAR(point_biserial(two, v2).statistic, 1.0, 1e-15);
  const std::vector<int> bin{0, 0, 1, 1};
  const std::vector<double> vals{1, 2, 3, 4};
  EXPECT_NEAR(point_biserial(bin, vals).statistic, 0.8944, 1e-4);
  EXPECT_NEAR(point_biserial(bin, vals).statistic, 0.894427190999916, 1e-12);
  const std::vector<double> flat{3, 3, 3, 3};
  EXPECT_EQ(code_of([&] { point_biserial(bin, flat); }), ErrorCode::DegenerateInput);
  const std::vector<int> one_class{1, 1, 1, 1};
  EXPECT_EQ(code_of([&] { point_biserial(one_class, vals); }), ErrorCode::DegenerateInput);
}

TEST(StatsProperties, PointBiserialEqualsPearsonAndSwapSymmetry) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> norm(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 40);
    std::vector<int> bin(n);
    std::vector<double> x(n), vals(n);
    for (int i = 0; i < n; ++i) {
      bin[i] = static_cast<int>(rng() % 2);
      vals[i] = norm(rng) + bin[i];
    }
    bin[0] = 0;
    bin[1] = 1;
    for (int i = 0; i < n; ++i) x[i] = bin[i];
    ASSERT_NEAR(point_biserial(bin, vals).statistic, pearson(x, vals), 1e-12);

    std::vector<double> a, b;
    for (int i = 0; i < n; ++i) (bin[i] ? a : b).push_back(vals[i]);
    if (a.size() >= 2 && b.size() >= 2) {
      const auto ab = welch_t(a, b), ba = welch_t(b, a);
      ASSERT_NEAR(ab.statistic, -ba.statistic, 1e-12);
      ASSERT_NEAR(ab.p_value, ba.p_value, 1e-12);
    }
    const auto uab = mann_whitney_u(a, b), uba = mann_whitney_u(b, a);
    ASSERT_NEAR(uab.statistic, static_cast<double>(a.size() * b.size()) - uba.statistic, 1e-9);
    ASSERT_NEAR(uab.p_value, uba.p_value, 1e-12);
    ASSERT_GE(uab.p_value, 0.0);
    ASSERT_LE(uab.p_value, 1.0);
  }
}

namespace {

VerificationRecord record_with(int yes, int no) {
  VerificationRecord r;
  for (int i = 0; i < yes; ++i) r.samples.push_back({i, Answer::Yes, std::nullopt});
  for (int i = 0; i < no; ++i) r.samples.push_back({yes + i, Answer::No, std::nullopt});
  return r;
}

}  // namespace

TEST(VarianceObservations, Examples) {
  const auto all_yes = record_with(10, 0), half = record_with(5, 5), seven = record_with(7, 3);
  const auto obs = variance_observations({{"a", &all_yes, Answer::Yes, std::nullopt},
                                          {"b", &half, Answer::Yes, Answer::Yes},
                                          {"c", &seven, Answer::No, std::nullopt}});
  ASSERT_EQ(obs.size(), 3u);
  EXPECT_EQ(obs[0].p_yes, 1.0);
  EXPECT_EQ(obs[0].variance, 0.0);
  EXPECT_TRUE(obs[0].correct);
  EXPECT_EQ(obs[1].variance, 0.25);
  EXPECT_TRUE(obs[1].correct);
  EXPECT_NEAR(obs[2].variance, 0.21, 1e-15);
  EXPECT_FALSE(obs[2].correct);
  EXPECT_EQ(code_of([&] { variance_observations({{"a", &all_yes, std::nullopt, std::nullopt}}); }), ErrorCode::MissingGold);
}

TEST(VarianceReport, PerfectSeparation) {
  std::vector<VarianceObservation> obs;
  for (int i = 0; i < 5; ++i) obs.push_back({"c" + std::to_string(i), 1.0, 0.0, true});
  for (int i = 0; i < 5; ++i) obs.push_back({"i" + std::to_string(i), 0.5, 0.25, false});
  const auto r = variance_correctness_report(obs);
  EXPECT_EQ(r.mean_var_correct, 0.0);
  EXPECT_EQ(r.mean_var_incorrect, 0.25);
  ASSERT_TRUE(r.pbc);
  EXPECT_NEAR(r.pbc->statistic, -1.0, 1e-12);
  obs.resize(5);
  EXPECT_EQ(code_of([&] { variance_correctness_report(obs); }), ErrorCode::SingleClass);
}

TEST(VarianceReport, IdenticalDistributions) {
  std::vector<VarianceObservation> obs;
  for (double v : {0.09, 0.16, 0.21, 0.24}) {
    obs.push_back({"c", 0, v, true});
    obs.push_back({"i", 0, v, false});
  }
  const auto r = variance_correctness_report(obs);
  ASSERT_TRUE(r.welch);
  EXPECT_EQ(r.welch->p_value, 1.0);
}

TEST(VarianceReport, SyntheticCohortWithInjectedEffect) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<VarianceObservation> obs;
  for (int i = 0; i < 200; ++i) {
    const bool correct = u(rng) < 0.6;
    // Correct answers come from confident paraphrase agreement.
    const double p = correct ? 0.85 + 0.15 * u(rng) : 0.35 + 0.3 * u(rng);
    obs.push_back({std::to_string(i), p, p * (1 - p), correct});
  }
  const auto r = variance_correctness_report(obs);
  EXPECT_LT(r.mean_var_correct, r.mean_var_incorrect);
  ASSERT_TRUE(r.pbc);
  EXPECT_LT(r.pbc->statistic, 0.0);
  ASSERT_TRUE(r.welch);
  EXPECT_LT(r.welch->p_value, 0.05);
}
