#include <gtest/gtest.h>

#include "atomcal/refinement.hpp"
#include "atomcal/text.hpp"
#include "test_util.hpp"

using namespace atomcal;

namespace {

AtomicQuery q(int id, std::string text, bool passthrough = false) { return AtomicQuery{id, std::move(text), std::nullopt, passthrough}; }

VerificationRecord record(int id, std::string text, Answer a, double score) {
  VerificationRecord r;
  r.query = q(id, std::move(text));
  r.result = ConfidenceResult{a, score, Estimator::SelfConsistency, Aggregator::Mean, 10};
  return r;
}

}  // namespace

TEST(ShouldRefine, PassthroughOnly) {
  EXPECT_FALSE(should_refine({q(1, "Is there a dog?", true)}));
  EXPECT_TRUE(should_refine({q(1, "Is there a dog?"), q(2, "Is the dog brown?"), q(3, "Is it running?")}));
  EXPECT_TRUE(should_refine({q(1, "Is there a dog?")}));
}

TEST(VerificationContext, ThresholdAndOrder) {
  const std::vector<VerificationRecord> records{record(2, "Is the dog brown?", Answer::No, 0.6),
                                                record(1, "Is there a dog?", Answer::Yes, 0.9)};
  const auto all = format_verification_context(records);
  ASSERT_EQ(all.entries.size(), 2u);
  EXPECT_EQ(all.render(), "Q: Is there a dog? A: Yes\nQ: Is the dog brown? A: No");
  const auto strict = format_verification_context(records, 0.7);
  ASSERT_EQ(strict.entries.size(), 1u);
  EXPECT_EQ(strict.entries[0].question, "Is there a dog?");
  EXPECT_TRUE(format_verification_context({}).empty());
  EXPECT_ANY_THROW(format_verification_context(records, 1.5));
}

TEST(VerificationContext, SkipsRecordsWithoutResult) {
  VerificationRecord none;
  none.query = q(3, "Is it raining?");
  const auto ctx = format_verification_context({record(1, "Is there a dog?", Answer::Yes, 0.9), none});
  EXPECT_EQ(ctx.entries.size(), 1u);
}

TEST(RefinePrompt, MatchesReferenceTemplate) {
  const std::string ref = atomcal::testing::slurp(atomcal::testing::test_dir() / "golden" / "refine_prompt.txt");
  VerificationContext ctx{{{"Is there a dog?", Answer::Yes, 0.9}, {"Are there two dogs?", Answer::No, 0.8}}};
  std::string expected = text::replace_all(ref, "{question}", "Describe the image.");
  expected = text::replace_all(expected, "{answer}", "Two dogs play.");
  expected = text::replace_all(expected, "{verification_qa}", ctx.render());
  EXPECT_EQ(build_refine_prompt("Describe the image.", "Two dogs play.", ctx), expected);
}

TEST(RefinePrompt, SlotsRoundTripWithQuotesAndFences) {
  VerificationContext ctx{{{"Is the sign \"STOP\"?", Answer::Yes, 0.9}, {"Is there ``` a fence?", Answer::No, 0.7}}};
  const std::string question = "What does the \"sign\" say? \\ ";
  const std::string answer = "It says \"STOP\".\"\n\nVerification context:";
  const auto slots = extract_refine_slots(build_refine_prompt(question, answer, ctx));
  EXPECT_EQ(slots.question, question);
  EXPECT_EQ(slots.initial_answer, answer);
  EXPECT_EQ(slots.context, ctx.render());
}

TEST(RefinePrompt, EmptyContextLeavesEmptyFence) {
  const std::string p = build_refine_prompt("Q", "A", {});
  EXPECT_NE(p.find("Verification context:\n```\n\n```"), std::string::npos);
}

TEST(Refine, ShortCircuits) {
  int calls = 0;
  TextModel llm = [&](const std::string&) {
    ++calls;
    return std::string("changed");
  };
  VerificationContext ctx{{{"Is there a dog?", Answer::Yes, 0.9}}};
  auto out = refine("Is there a dog?", "Yes", ctx, {q(1, "Is there a dog?", true)}, llm);
  EXPECT_EQ(out.text, "Yes");
  EXPECT_FALSE(out.llm_called);
  out = refine("Describe.", "A dog.", {}, {q(1, "Is there a dog?"), q(2, "Is it brown?")}, llm);
  EXPECT_EQ(out.text, "A dog.");
  EXPECT_EQ(calls, 0);
}

TEST(Refine, UsesScriptedRefiner) {
  VerificationContext ctx{{{"Are there two dogs?", Answer::No, 0.8}, {"Is there one dog?", Answer::Yes, 0.9}}};
  std::string seen;
  TextModel llm = [&](const std::string& prompt) {
    seen = prompt;
    const auto slots = extract_refine_slots(prompt);
    return "  \"" + text::replace_all(slots.initial_answer, "two dogs", "one dog") + "\"\n";
  };
  const auto out = refine("Describe.", "There are two dogs on the grass.", ctx, {q(1, "a?"), q(2, "b?")}, llm);
  EXPECT_TRUE(out.llm_called);
  EXPECT_EQ(out.text, "There are one dog on the grass.");
  EXPECT_FALSE(out.empty_refinement);
  EXPECT_EQ(extract_refine_slots(seen).context, ctx.render());
}

TEST(Refine, EmptyOutputFallsBack) {
  VerificationContext ctx{{{"Is there a dog?", Answer::Yes, 0.9}}};
  TextModel llm = [](const std::string&) { return std::string(" \"\" "); };
  const auto out = refine("Describe.", "A dog.", ctx, {q(1, "Is there a dog?")}, llm);
  EXPECT_EQ(out.text, "A dog.");
  EXPECT_TRUE(out.empty_refinement);
}
