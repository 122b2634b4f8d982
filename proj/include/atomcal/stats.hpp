#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atomcal/answer.hpp"
#include "atomcal/record.hpp"

namespace atomcal::stats {

// Special functions ----------------------------------------------------------

/// Regularized incomplete beta I_x(a, b) by continued fraction (modified
/// Lentz), using the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) where the fraction
/// converges faster.
double incomplete_beta(double a, double b, double x);

/// Two-sided P(|T| >= |t|) for Student's t with `df` degrees of freedom
/// (df may be fractional).
double student_t_two_sided(double t, double df);

/// Two-sided P(|Z| >= |z|) for a standard normal.
double normal_two_sided(double z);

// Tests ----------------------------------------------------------------------

enum class Method { WelchT, MannWhitneyU, PointBiserial };

std::string_view to_string(Method m) noexcept;

struct TestResult {
  double statistic = 0.0;
  std::optional<double> degrees_of_freedom;
  double p_value = 1.0;
  Method method = Method::WelchT;
  bool exact = false;  // Mann-Whitney only: p from the exact null distribution

  bool operator==(const TestResult&) const = default;
};

/// Welch's unequal-variance t-test, two-sided. Throws
/// Error(InsufficientData) for groups smaller than 2 and
/// Error(ZeroVariancePair) when both sample variances are zero.
TestResult welch_t(std::span<const double> a, std::span<const double> b);

/// Cutoff on n_a * n_b below which mann_whitney_u enumerates exactly.
inline constexpr long kExactMannWhitneyLimit = 400;

/// U for group a (rank sum with midranks minus n_a(n_a+1)/2).
double mann_whitney_statistic(std::span<const double> a, std::span<const double> b);

/// Two-sided p: P(|U - mu| >= |u - mu|) over the exact permutation
/// distribution of midranks, ties included.
double mann_whitney_exact_p(std::span<const double> a, std::span<const double> b);

/// Two-sided p from the normal approximation with continuity correction and
/// tie-corrected variance.
double mann_whitney_normal_p(std::span<const double> a, std::span<const double> b);

/// Exact when n_a * n_b <= kExactMannWhitneyLimit, normal otherwise.
/// Throws Error(InsufficientData) if either group is empty.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

/// Pearson correlation between a 0/1 indicator and values, with the usual
/// t-based two-sided p (df = n - 2; p = 1 when n < 3). Throws
/// Error(DegenerateInput) for one-class indicators or constant values.
TestResult point_biserial(std::span<const int> binary, std::span<const double> values);

/// Plain Pearson correlation. Throws Error(DegenerateInput) on zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

// Variance analysis ----------------------------------------------------------

struct VarianceObservation {
  std::string example_id;
  double p_yes = 0.0;
  double variance = 0.0;  // p_yes * (1 - p_yes)
  bool correct = false;

  bool operator==(const VarianceObservation&) const = default;
};

struct VarianceInput {
  std::string example_id;
  const VerificationRecord* record = nullptr;
  std::optional<Answer> gold;
  std::optional<Answer> original_answer;  // tie-break for the majority vote
};

/// p_yes over parseable samples; correct = (majority vote == gold). Throws
/// Error(MissingGold) or Error(NoParseableSamples).
std::vector<VarianceObservation> variance_observations(const std::vector<VarianceInput>& inputs);

struct VarianceReport {
  double mean_var_correct = 0.0;
  double mean_var_incorrect = 0.0;
  long n_correct = 0;
  long n_incorrect = 0;
  std::optional<TestResult> welch;
  std::string welch_error;  // set when welch could not be computed
  TestResult mwu;
  std::optional<TestResult> pbc;
  std::string pbc_error;
};

/// Splits variances by correctness and runs Welch (correct vs incorrect),
/// Mann-Whitney, and point-biserial with correct coded 1. Throws
/// Error(SingleClass) unless both classes are present.
VarianceReport variance_correctness_report(const std::vector<VarianceObservation>& observations);

}  // namespace atomcal::stats
