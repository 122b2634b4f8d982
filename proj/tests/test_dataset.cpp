#include <gtest/gtest.h>

#include "atomcal/dataset.hpp"
#include "atomcal/error.hpp"
#include "atomcal/hashing.hpp"
#include "test_util.hpp"

using namespace atomcal;
using atomcal::testing::TempDir;

namespace {

std::filesystem::path data(const std::string& name) { return atomcal::testing::test_dir() / "data" / name; }

Error capture(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "expected an atomcal::Error";
  return Error(ErrorCode::IoError, "none");
}

}  // namespace

TEST(Dataset, PopeLayout) {
  const auto exs = load_dataset(data("coco_pope_adversarial.json"), DatasetFormat::Auto);
  ASSERT_EQ(exs.size(), 3u);
  EXPECT_EQ(exs[0].example_id, "adversarial-1");
  EXPECT_EQ(exs[0].gold, Answer::Yes);
  EXPECT_EQ(exs[1].gold, Answer::No);
  EXPECT_EQ(exs[0].group_keys.at("split"), "adversarial");
  EXPECT_EQ(exs[0].question, "Is there a snowboard in the image?");
  EXPECT_EQ(exs[0].image_ref, name_digest("COCO_val2014_000000310196.jpg"));
  EXPECT_EQ(exs[0].image_ref, exs[1].image_ref);
  EXPECT_NE(exs[0].image_ref, exs[2].image_ref);
}

TEST(Dataset, MmeTsvPairsShareImageKey) {
  EXPECT_EQ(detect_format(data("scene.txt")), DatasetFormat::Mme);
  const auto exs = load_dataset(data("scene.txt"), DatasetFormat::Auto);
  ASSERT_EQ(exs.size(), 4u);
  EXPECT_EQ(exs[0].group_keys.at("image_id"), exs[1].group_keys.at("image_id"));
  EXPECT_NE(exs[1].group_keys.at("image_id"), exs[2].group_keys.at("image_id"));
  EXPECT_EQ(exs[0].group_keys.at("subtask"), "scene");
  EXPECT_EQ(exs[0].gold, Answer::Yes);
  EXPECT_EQ(exs[1].gold, Answer::No);
}

TEST(Dataset, HallusionGroups) {
  const auto exs = load_dataset(data("hallusion.json"), DatasetFormat::Auto);
  ASSERT_EQ(exs.size(), 3u);
  EXPECT_EQ(exs[0].group_keys.at("pair_id"), exs[1].group_keys.at("pair_id"));
  EXPECT_NE(exs[0].group_keys.at("figure_id"), exs[1].group_keys.at("figure_id"));
  EXPECT_EQ(exs[0].group_keys.at("difficulty"), "easy");
  EXPECT_EQ(exs[1].group_keys.at("difficulty"), "hard");
  EXPECT_EQ(exs[2].group_keys.at("difficulty"), "no_image");
  EXPECT_EQ(exs[0].gold, Answer::Yes);
  EXPECT_EQ(exs[1].gold, Answer::No);
  EXPECT_TRUE(exs[2].image.empty());
}

TEST(Dataset, AmberGenerativeAndDiscriminative) {
  const auto exs = load_dataset(data("amber.json"), DatasetFormat::Auto);
  ASSERT_EQ(exs.size(), 2u);
  EXPECT_EQ(exs[0].gold_objects, (std::set<std::string>{"beach", "sky", "umbrella"}));
  EXPECT_EQ(exs[0].hallucination_targets, (std::set<std::string>{"person", "chair"}));
  EXPECT_FALSE(exs[0].gold);
  EXPECT_EQ(exs[1].gold, Answer::No);
  EXPECT_FALSE(exs[1].gold_objects);
}

TEST(Dataset, ImageRootHashesFileBytes) {
  TempDir dir;
  atomcal::testing::spit(dir / "COCO_val2014_000000310196.jpg", "JPEGBYTES");
  LoadOptions opts;
  opts.image_root = dir.path();
  const auto exs = load_dataset(data("coco_pope_adversarial.json"), DatasetFormat::Pope, opts);
  EXPECT_EQ(exs[0].image_ref, sha256_hex("JPEGBYTES"));
  EXPECT_EQ(exs[2].image_ref, name_digest("COCO_val2014_000000210789.jpg"));
}

TEST(Dataset, UnifiedRoundTrip) {
  TempDir dir;
  std::vector<DatasetExample> all;
  for (const auto* f : {"coco_pope_adversarial.json", "scene.txt", "hallusion.json", "amber.json"}) {
    for (auto& ex : load_dataset(data(f), DatasetFormat::Auto)) all.push_back(std::move(ex));
  }
  all[0].initial_answer = "Yes, there is.";
  write_unified(dir / "u.jsonl", all);
  EXPECT_EQ(detect_format(dir / "u.jsonl"), DatasetFormat::Unified);
  EXPECT_EQ(load_dataset(dir / "u.jsonl", DatasetFormat::Auto), all);
  for (const auto& ex : all) EXPECT_EQ(example_from_json(to_json(ex)), ex);
}

TEST(Dataset, Errors) {
  TempDir dir;
  atomcal::testing::spit(dir / "bad.jsonl", "{\"image\": \"a.jpg\", \"text\": \"Is it?\", \"label\": \"yes\"}\n{not json\n");
  auto e = capture([&] { load_dataset(dir / "bad.jsonl", DatasetFormat::Pope); });
  EXPECT_EQ(e.code(), ErrorCode::ParseError);
  EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);

  atomcal::testing::spit(dir / "missing.jsonl", "{\"image\": \"a.jpg\", \"label\": \"yes\"}\n");
  e = capture([&] { load_dataset(dir / "missing.jsonl", DatasetFormat::Pope); });
  EXPECT_EQ(e.code(), ErrorCode::SchemaError);
  EXPECT_NE(std::string(e.what()).find("'text'"), std::string::npos);

  atomcal::testing::spit(dir / "label.jsonl", "{\"image\": \"a.jpg\", \"text\": \"Is it?\", \"label\": \"maybe\"}\n");
  EXPECT_EQ(capture([&] { load_dataset(dir / "label.jsonl", DatasetFormat::Pope); }).code(), ErrorCode::SchemaError);

  atomcal::testing::spit(dir / "dup.jsonl",
                         "{\"question_id\": 1, \"image\": \"a.jpg\", \"text\": \"Is it?\", \"label\": \"yes\"}\n"
                         "{\"question_id\": 1, \"image\": \"b.jpg\", \"text\": \"Is it?\", \"label\": \"no\"}\n");
  EXPECT_EQ(capture([&] { load_dataset(dir / "dup.jsonl", DatasetFormat::Pope); }).code(), ErrorCode::SchemaError);

  EXPECT_EQ(capture([&] { load_dataset(dir / "absent.jsonl", DatasetFormat::Pope); }).code(), ErrorCode::IoError);

  atomcal::testing::spit(dir / "odd.jsonl", "{\"foo\": 1}\n");
  EXPECT_EQ(capture([&] { detect_format(dir / "odd.jsonl"); }).code(), ErrorCode::SchemaError);
}

TEST(Dataset, FormatNames) {
  for (auto f : {DatasetFormat::Auto, DatasetFormat::Unified, DatasetFormat::Pope, DatasetFormat::Mme,
                 DatasetFormat::Hallusion, DatasetFormat::Amber}) {
    EXPECT_EQ(dataset_format_from_string(to_string(f)), f);
  }
}
