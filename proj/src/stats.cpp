#include "atomcal/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "atomcal/confidence.hpp"
#include "atomcal/error.hpp"

namespace atomcal::stats {

namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIterations = 100000;

// Continued fraction for I_x(a, b), valid for x < (a + 1) / (a + b + 2).
double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorCode::DegenerateInput, "incomplete beta needs a, b > 0");
  if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
  if (!(df > 0.0)) throw Error(ErrorCode::DegenerateInput, "t distribution needs df > 0");
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  return std::clamp(incomplete_beta(0.5 * df, 0.5, x), 0.0, 1.0);
}

double normal_two_sided(double z) { return std::clamp(std::erfc(std::abs(z) / std::sqrt(2.0)), 0.0, 1.0); }

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::WelchT: return "welch_t";
    case Method::MannWhitneyU: return "mann_whitney_u";
    case Method::PointBiserial: return "point_biserial";
  }
  return "welch_t";
}

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

TestResult welch_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw Error(ErrorCode::InsufficientData, "Welch t-test needs at least 2 values per group");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  const double va = sample_variance(a, ma);
  const double vb = sample_variance(b, mb);
  if (va == 0.0 && vb == 0.0) throw Error(ErrorCode::ZeroVariancePair, "both groups have zero variance");
  const double sa = va / na;
  const double sb = vb / nb;
  TestResult r;
  r.method = Method::WelchT;
  r.statistic = (ma - mb) / std::sqrt(sa + sb);
  const double df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  r.degrees_of_freedom = df;
  r.p_value = student_t_two_sided(r.statistic, df);
  return r;
}

namespace {

struct Ranked {
  std::vector<double> ranks_a;  // midranks of group a
  std::vector<double> all_ranks;
  double tie_term = 0.0;        // sum over tie groups of t^3 - t
};

Ranked rank_groups(std::span<const double> a, std::span<const double> b) {
  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(a.size() + b.size());
  for (double x : a) pooled.emplace_back(x, 0);
  for (double x : b) pooled.emplace_back(x, 1);
  std::sort(pooled.begin(), pooled.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
  Ranked out;
  out.all_ranks.resize(pooled.size());
  std::size_t i = 0;
  while (i < pooled.size()) {
    std::size_t j = i;
    while (j + 1 < pooled.size() && pooled[j + 1].first == pooled[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    const double t = static_cast<double>(j - i + 1);
    out.tie_term += t * t * t - t;
    for (std::size_t k = i; k <= j; ++k) {
      out.all_ranks[k] = midrank;
      if (pooled[k].second == 0) out.ranks_a.push_back(midrank);
    }
    i = j + 1;
  }
  return out;
}

void require_nonempty(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::InsufficientData, "Mann-Whitney U needs two non-empty groups");
}

}  // namespace

double mann_whitney_statistic(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, b);
  const auto ranked = rank_groups(a, b);
  const double ra = std::accumulate(ranked.ranks_a.begin(), ranked.ranks_a.end(), 0.0);
  const double na = static_cast<double>(a.size());
  return ra - na * (na + 1.0) / 2.0;
}

double mann_whitney_exact_p(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, b);
  const auto ranked = rank_groups(a, b);
  const auto n = ranked.all_ranks.size();
  // Work on the smaller group's rank sum; doubled midranks are integers.
  const bool a_small = a.size() <= b.size();
  const std::size_t m = a_small ? a.size() : b.size();
  std::vector<long> doubled(n);
  for (std::size_t i = 0; i < n; ++i) doubled[i] = std::lround(2.0 * ranked.all_ranks[i]);
  std::vector<long> sorted = doubled;
  std::sort(sorted.begin(), sorted.end());
  const long max_sum = std::accumulate(sorted.end() - static_cast<long>(m), sorted.end(), 0L);

  // ways[k][s]: number of k-subsets with doubled rank sum s.
  std::vector<std::vector<double>> ways(m + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
  ways[0][0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const long r = doubled[i];
    for (std::size_t k = std::min(m, i + 1); k >= 1; --k) {
      auto& dst = ways[k];
      const auto& src = ways[k - 1];
      for (long s = max_sum; s >= r; --s) dst[static_cast<std::size_t>(s)] += src[static_cast<std::size_t>(s - r)];
    }
  }

  long observed = 0;
  if (a_small) {
    for (double r : ranked.ranks_a) observed += std::lround(2.0 * r);
  } else {
    const long total = std::accumulate(doubled.begin(), doubled.end(), 0L);
    long sum_a = 0;
    for (double r : ranked.ranks_a) sum_a += std::lround(2.0 * r);
    observed = total - sum_a;
  }
  // Null mean of the doubled rank sum is m * (n + 1), an integer, so the
  // tail comparison is exact.
  const long centre2 = static_cast<long>(m) * static_cast<long>(n + 1);
  const long observed_dev = std::labs(observed - centre2);
  double total_ways = 0.0;
  double extreme = 0.0;
  for (long s = 0; s <= max_sum; ++s) {
    const double w = ways[m][static_cast<std::size_t>(s)];
    if (w == 0.0) continue;
    total_ways += w;
    if (std::labs(s - centre2) >= observed_dev) extreme += w;
  }
  return std::clamp(extreme / total_ways, 0.0, 1.0);
}

double mann_whitney_normal_p(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, b);
  const auto ranked = rank_groups(a, b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double n = na + nb;
  const double ra = std::accumulate(ranked.ranks_a.begin(), ranked.ranks_a.end(), 0.0);
  const double u = ra - na * (na + 1.0) / 2.0;
  const double mu = na * nb / 2.0;
  const double var = na * nb / 12.0 * ((n + 1.0) - ranked.tie_term / (n * (n - 1.0)));
  if (!(var > 0.0)) return 1.0;
  const double z = std::max(std::abs(u - mu) - 0.5, 0.0) / std::sqrt(var);
  return normal_two_sided(z);
}

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, b);
  TestResult r;
  r.method = Method::MannWhitneyU;
  r.statistic = mann_whitney_statistic(a, b);
  r.exact = static_cast<long>(a.size()) * static_cast<long>(b.size()) <= kExactMannWhitneyLimit;
  r.p_value = r.exact ? mann_whitney_exact_p(a, b) : mann_whitney_normal_p(a, b);
  return r;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::DegenerateInput, "pearson needs equal lengths >= 2");
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::DegenerateInput, "pearson undefined for constant input");
  return sxy / std::sqrt(sxx * syy);
}

TestResult point_biserial(std::span<const int> binary, std::span<const double> values) {
  if (binary.size() != values.size() || binary.size() < 2) {
    throw Error(ErrorCode::DegenerateInput, "point-biserial needs equal lengths >= 2");
  }
  double sum1 = 0.0, sum0 = 0.0;
  long n1 = 0, n0 = 0;
  for (std::size_t i = 0; i < binary.size(); ++i) {
    if (binary[i] == 1) {
      sum1 += values[i];
      ++n1;
    } else if (binary[i] == 0) {
      sum0 += values[i];
      ++n0;
    } else {
      throw Error(ErrorCode::DegenerateInput, "point-biserial indicator must be 0 or 1");
    }
  }
  if (n1 == 0 || n0 == 0) throw Error(ErrorCode::DegenerateInput, "point-biserial needs both classes");
  const double n = static_cast<double>(values.size());
  const double m = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  const double sd_pop = std::sqrt(ss / n);
  if (sd_pop == 0.0) throw Error(ErrorCode::DegenerateInput, "point-biserial undefined for constant values");

  TestResult r;
  r.method = Method::PointBiserial;
  const double m1 = sum1 / static_cast<double>(n1);
  const double m0 = sum0 / static_cast<double>(n0);
  r.statistic = std::clamp((m1 - m0) / sd_pop * std::sqrt(static_cast<double>(n1) * static_cast<double>(n0) / (n * n)), -1.0, 1.0);
  if (values.size() < 3) {
    r.p_value = 1.0;
  } else {
    const double df = n - 2.0;
    r.degrees_of_freedom = df;
    const double one_minus_r2 = 1.0 - r.statistic * r.statistic;
    r.p_value = one_minus_r2 <= 0.0 ? 0.0 : student_t_two_sided(r.statistic * std::sqrt(df / one_minus_r2), df);
  }
  return r;
}

std::vector<VarianceObservation> variance_observations(const std::vector<VarianceInput>& inputs) {
  std::vector<VarianceObservation> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) {
    if (!in.gold || (*in.gold != Answer::Yes && *in.gold != Answer::No)) {
      throw Error(ErrorCode::MissingGold, in.example_id + " has no Yes/No gold label");
    }
    if (in.record == nullptr) throw Error(ErrorCode::NoParseableSamples, in.example_id + " has no verification record");
    const auto& samples = in.record->samples;
    long yes = 0, parsed = 0;
    for (const auto& s : samples) {
      if (s.answer == Answer::Unparseable) continue;
      ++parsed;
      if (s.answer == Answer::Yes) ++yes;
    }
    if (parsed == 0) throw Error(ErrorCode::NoParseableSamples, in.example_id + " has no parseable samples");
    VarianceObservation obs;
    obs.example_id = in.example_id;
    obs.p_yes = static_cast<double>(yes) / static_cast<double>(parsed);
    obs.variance = obs.p_yes * (1.0 - obs.p_yes);
    obs.correct = majority_vote(samples, in.original_answer) == *in.gold;
    out.push_back(std::move(obs));
  }
  return out;
}

VarianceReport variance_correctness_report(const std::vector<VarianceObservation>& observations) {
  std::vector<double> correct, incorrect, all;
  std::vector<int> indicator;
  for (const auto& o : observations) {
    (o.correct ? correct : incorrect).push_back(o.variance);
    all.push_back(o.variance);
    indicator.push_back(o.correct ? 1 : 0);
  }
  if (correct.empty() || incorrect.empty()) {
    throw Error(ErrorCode::SingleClass, "variance analysis needs both correct and incorrect predictions (got " +
                                            std::to_string(correct.size()) + " correct, " +
                                            std::to_string(incorrect.size()) + " incorrect)");
  }
  VarianceReport rep;
  rep.n_correct = static_cast<long>(correct.size());
  rep.n_incorrect = static_cast<long>(incorrect.size());
  rep.mean_var_correct = mean_of(correct);
  rep.mean_var_incorrect = mean_of(incorrect);
  try {
    rep.welch = welch_t(correct, incorrect);
  } catch (const Error& e) {
    rep.welch_error = e.what();
  }
  rep.mwu = mann_whitney_u(correct, incorrect);
  try {
    rep.pbc = point_biserial(indicator, all);
  } catch (const Error& e) {
    rep.pbc_error = e.what();
  }
  return rep;
}

}  // namespace atomcal::stats
