#include <gtest/gtest.h>

#include "atomcal/error.hpp"
#include "atomcal/metrics.hpp"
#include "metric_oracle.hpp"

using namespace atomcal;

namespace {

constexpr Answer Y = Answer::Yes;
constexpr Answer N = Answer::No;

LabeledPrediction lp(Answer pred, Answer gold, GroupKeys keys = {}) {
  static int counter = 0;
  return LabeledPrediction{std::to_string(counter++), pred, gold, std::move(keys)};
}

std::vector<LabeledPrediction> from_confusion(int tp, int fp, int fn, int tn) {
  std::vector<LabeledPrediction> out;
  for (int i = 0; i < tp; ++i) out.push_back(lp(Y, Y));
  for (int i = 0; i < fp; ++i) out.push_back(lp(Y, N));
  for (int i = 0; i < fn; ++i) out.push_back(lp(N, Y));
  for (int i = 0; i < tn; ++i) out.push_back(lp(N, N));
  return out;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an atomcal::Error";
  return ErrorCode::IoError;
}

GenerativePrediction gen(std::set<std::string> mentioned, std::set<std::string> annotated, std::set<std::string> targets = {}) {
  return GenerativePrediction{"g", std::move(mentioned), std::move(annotated), std::move(targets)};
}

}  // namespace

TEST(Confusion, Counts) {
  EXPECT_EQ(confusion(from_confusion(3, 0, 0, 3)), (Confusion{3, 0, 0, 3, 0, 0}));
  EXPECT_EQ(confusion({lp(Y, Y), lp(Y, Y), lp(Y, N), lp(Y, N)}), (Confusion{2, 2, 0, 0, 0, 0}));
  EXPECT_EQ(confusion({lp(N, Y)}), (Confusion{0, 0, 1, 0, 0, 0}));
  EXPECT_EQ(confusion({lp(Answer::Unparseable, Y)}).unparseable_yes, 1);
  EXPECT_EQ(code_of([] { confusion({}); }), ErrorCode::EmptyInput);
}

TEST(AccuracyF1, Examples) {
  auto s = accuracy_f1(from_confusion(3, 0, 0, 3));
  EXPECT_EQ(s.accuracy, 1.0);
  EXPECT_EQ(s.f1, 1.0);
  s = accuracy_f1(from_confusion(2, 1, 1, 2));
  EXPECT_NEAR(s.accuracy, 0.6667, 1e-4);
  EXPECT_NEAR(s.precision, 0.6667, 1e-4);
  EXPECT_NEAR(s.recall, 0.6667, 1e-4);
  EXPECT_NEAR(s.f1, 0.6667, 1e-4);
  s = accuracy_f1(from_confusion(2, 2, 0, 0));
  EXPECT_DOUBLE_EQ(s.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(s.precision, 0.5);
  EXPECT_DOUBLE_EQ(s.recall, 1.0);
  EXPECT_NEAR(s.f1, 2.0 / 3.0, 1e-12);
  s = accuracy_f1(from_confusion(0, 0, 0, 4));
  EXPECT_EQ(s.precision, 0.0);
  EXPECT_NE(std::find(s.degenerate.begin(), s.degenerate.end(), "precision"), s.degenerate.end());
}

TEST(AccuracyF1, UnparseableCountsAsWrong) {
  const auto s = accuracy_f1({lp(Y, Y), lp(Answer::Unparseable, Y), lp(N, N), lp(Answer::Unparseable, N)});
  EXPECT_DOUBLE_EQ(s.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(s.recall, 0.5);
  EXPECT_DOUBLE_EQ(s.precision, 1.0);
}

TEST(MmeScore, Examples) {
  auto k = [](std::string img) { return GroupKeys{{"subtask", "color"}, {"image_id", std::move(img)}}; };
  std::vector<LabeledPrediction> perfect{lp(Y, Y, k("a")), lp(N, N, k("a"))};
  EXPECT_DOUBLE_EQ(mme_score(perfect).at("color"), 200.0);
  // 4 images, 6 of 8 right, 2 images fully right.
  std::vector<LabeledPrediction> p{lp(Y, Y, k("a")), lp(N, N, k("a")), lp(Y, Y, k("b")), lp(N, N, k("b")),
                                   lp(N, Y, k("c")), lp(N, N, k("c")), lp(Y, Y, k("d")), lp(Y, N, k("d"))};
  EXPECT_DOUBLE_EQ(mme_score(p).at("color"), 125.0);
  p.push_back(lp(Y, Y, k("a")));
  EXPECT_EQ(code_of([&] { mme_score(p); }), ErrorCode::MalformedGrouping);
  EXPECT_EQ(code_of([] { mme_score({lp(Y, Y)}); }), ErrorCode::MissingGroupKey);
}

TEST(Hallusion, Examples) {
  auto k = [](std::string pair, std::string fig, std::string diff) {
    return GroupKeys{{"pair_id", std::move(pair)}, {"figure_id", std::move(fig)}, {"difficulty", std::move(diff)}};
  };
  const std::vector<LabeledPrediction> p{lp(Y, Y, k("p1", "f1", "easy")), lp(N, N, k("p1", "f2", "easy")),
                                         lp(Y, Y, k("p2", "f3", "hard")), lp(Y, N, k("p2", "f3", "hard"))};
  const auto s = hallusion_metrics(p);
  EXPECT_DOUBLE_EQ(s.qacc, 0.5);
  EXPECT_DOUBLE_EQ(s.aacc, 0.75);
  EXPECT_NEAR(s.facc, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(s.easy_aacc, 1.0);
  EXPECT_EQ(s.hard_aacc, 0.5);
  EXPECT_EQ(code_of([] { hallusion_metrics({lp(Y, Y, {{"figure_id", "f"}})}); }), ErrorCode::MissingGroupKey);
}

TEST(YesBias, Examples) {
  // 6 predicted Yes, 5 gold Yes out of 10.
  auto preds = from_confusion(5, 1, 0, 4);
  EXPECT_NEAR(yes_bias(preds).pct_diff, 0.1, 1e-15);
  EXPECT_EQ(yes_bias(from_confusion(2, 3, 3, 2)).fp_ratio, 0.5);
  const auto perfect = yes_bias(from_confusion(3, 0, 0, 3));
  EXPECT_EQ(perfect.pct_diff, 0.0);
  EXPECT_FALSE(perfect.fp_ratio);
}

TEST(YesBias, ZeroWhenCountsMatch) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    std::vector<Answer> gold;
    for (int i = 0; i < 20; ++i) gold.push_back(rng() % 2 ? Y : N);
    auto pred = gold;
    std::shuffle(pred.begin(), pred.end(), rng);
    std::vector<LabeledPrediction> preds;
    for (int i = 0; i < 20; ++i) preds.push_back(lp(pred[i], gold[i]));
    EXPECT_EQ(yes_bias(preds).pct_diff, 0.0);
  }
}

TEST(Amber, Examples) {
  const auto s = amber_metrics({gen({"dog", "frisbee", "car"}, {"dog", "frisbee"}, {"car"})});
  EXPECT_NEAR(s.chair, 100.0 / 3.0, 1e-9);
  EXPECT_DOUBLE_EQ(s.cover, 100.0);
  EXPECT_DOUBLE_EQ(s.hal, 100.0);
  EXPECT_NEAR(s.cog, 100.0 / 3.0, 1e-9);
  const auto clean = amber_metrics({gen({"dog"}, {"dog", "cat"}), gen({}, {"cat"})});
  EXPECT_EQ(clean.chair, 0.0);
  EXPECT_EQ(clean.hal, 0.0);
  EXPECT_EQ(clean.cog, 0.0);
  EXPECT_EQ(clean.skipped_empty, 1);
  EXPECT_DOUBLE_EQ(amber_metrics({gen({"dog", "car"}, {"dog"}), gen({"dog"}, {"dog"})}).hal, 50.0);
  EXPECT_EQ(code_of([] { amber_metrics({gen({"dog"}, {})}); }), ErrorCode::EmptyAnnotation);
  EXPECT_EQ(code_of([] { amber_metrics({}); }), ErrorCode::EmptyInput);
}

TEST(ExtractObjects, LongestMatch) {
  const Lexicon lex({{"dogs", "dog"}, {"dog", "dog"}, {"frisbee", "frisbee"}, {"hot dog", "hot dog"}});
  EXPECT_EQ(extract_objects("Two dogs chase a frisbee.", lex), (std::set<std::string>{"dog", "frisbee"}));
  EXPECT_TRUE(extract_objects("", lex).empty());
  EXPECT_EQ(extract_objects("A hot dog on a plate.", lex), (std::set<std::string>{"hot dog"}));
  EXPECT_EQ(extract_objects("HOT   DOG", lex), (std::set<std::string>{"hot dog"}));
  EXPECT_ANY_THROW(Lexicon::from_json(nlohmann::json::array()));
}

TEST(MetricOracle, RandomFixturesMatchRecount) {
  std::mt19937_64 rng(99);
  for (int run = 0; run < 100; ++run) {
    const auto preds = oracle::random_binary(rng);
    const auto s = accuracy_f1(preds);
    const auto o = oracle::binary(preds);
    ASSERT_NEAR(s.accuracy, o.accuracy, 1e-9);
    ASSERT_NEAR(s.precision, o.precision, 1e-9);
    ASSERT_NEAR(s.recall, o.recall, 1e-9);
    ASSERT_NEAR(s.f1, o.f1, 1e-9);
    const auto mme = mme_score(preds);
    const auto omme = oracle::mme(preds);
    ASSERT_EQ(mme.size(), omme.size());
    for (const auto& [k, v] : omme) {
      ASSERT_NEAR(mme.at(k), v, 1e-9);
      ASSERT_GE(mme.at(k), 0.0);
      ASSERT_LE(mme.at(k), 200.0);
    }
    const auto h = hallusion_metrics(preds);
    ASSERT_NEAR(h.qacc, oracle::group_all_correct(preds, "pair_id"), 1e-9);
    ASSERT_NEAR(h.facc, oracle::group_all_correct(preds, "figure_id"), 1e-9);
    ASSERT_NEAR(h.aacc, o.accuracy, 1e-9);
    ASSERT_EQ(h.easy_aacc.has_value(), oracle::slice_accuracy(preds, "easy").has_value());
    if (h.easy_aacc) ASSERT_NEAR(*h.easy_aacc, *oracle::slice_accuracy(preds, "easy"), 1e-9);
    if (h.hard_aacc) ASSERT_NEAR(*h.hard_aacc, *oracle::slice_accuracy(preds, "hard"), 1e-9);
    const auto b = yes_bias(preds);
    ASSERT_NEAR(b.pct_diff, oracle::pct_diff(preds), 1e-9);
    ASSERT_EQ(b.fp_ratio.has_value(), oracle::fp_ratio(preds).has_value());
    if (b.fp_ratio) ASSERT_NEAR(*b.fp_ratio, *oracle::fp_ratio(preds), 1e-9);

    const auto gens = oracle::random_generative(rng);
    const auto a = amber_metrics(gens);
    const auto oa = oracle::amber(gens);
    ASSERT_NEAR(a.chair, oa.chair, 1e-9);
    ASSERT_NEAR(a.cover, oa.cover, 1e-9);
    ASSERT_NEAR(a.hal, oa.hal, 1e-9);
    ASSERT_NEAR(a.cog, oa.cog, 1e-9);
    ASSERT_EQ(a.chair == 0.0, a.hal == 0.0);
    for (double v : {a.chair, a.cover, a.hal, a.cog}) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 100.0);
    }
  }
}
