#include <gtest/gtest.h>

#include "crowdsim/dataset.hpp"
#include "crowdsim/error.hpp"
#include "crowdsim/scale.hpp"
#include "test_support.hpp"

using namespace crowdsim;
using crowdsim::testing::scratch_dir;
using crowdsim::testing::write_file;

TEST(Scale, RejectsInvalidConstruction) {
  EXPECT_THROW(DecisionScale::continuous(1.0, 1.0), ConfigError);
  EXPECT_THROW(DecisionScale::ordinal({1.0}), ConfigError);
  EXPECT_THROW(DecisionScale::ordinal({1.0, 3.0, 2.0}), ConfigError);
  EXPECT_THROW(DecisionScale::choice(1), ConfigError);
}

TEST(Scale, ProjectClampsAndRounds) {
  const auto c = DecisionScale::continuous(1.0, 5.0);
  EXPECT_EQ(c.project(7.0), 5.0);
  EXPECT_EQ(c.project(-2.0), 1.0);
  EXPECT_EQ(c.project(4.7), 4.7);
  const auto o = DecisionScale::ordinal({1, 2, 3, 4, 5});
  EXPECT_EQ(o.project(3.4), 3.0);
  EXPECT_EQ(o.project(3.5), 4.0);  // ties go up
  EXPECT_EQ(o.project(99.0), 5.0);
  const auto m = DecisionScale::choice(3);
  EXPECT_EQ(m.levels(), (std::vector<double>{1, 2, 3}));
  EXPECT_TRUE(m.contains(2.0));
  EXPECT_FALSE(m.contains(2.5));
}

TEST(Scale, JsonRoundTrip) {
  for (const auto& s : {DecisionScale::continuous(-1, 2), DecisionScale::ordinal({0, 0.5, 1}), DecisionScale::choice(4)}) {
    nlohmann::json j;
    to_json(j, s);
    EXPECT_EQ(scale_from_json(j), s);
  }
}

TEST(Features, HashedFeaturesAreNormalisedAndStable) {
  const auto a = hashed_features("The quick brown fox", 16);
  const auto b = hashed_features("the QUICK brown fox!", 16);
  EXPECT_EQ(a, b);
  double n = 0.0;
  for (double v : a) n += v * v;
  EXPECT_NEAR(n, 1.0, 1e-12);
  const auto empty = hashed_features("", 8);
  EXPECT_EQ(empty, std::vector<double>(8, 0.0));
}

class ResponsesFile : public ::testing::Test {
protected:
  void SetUp() override {
    dir = scratch_dir("responses");
    problems.add({"p1", "d", "r", "c", DecisionScale::ordinal({1, 2, 3, 4, 5}), {0.0}});
    problems.add({"p2", "d", "r", "c", DecisionScale::ordinal({1, 2, 3, 4, 5}), {0.0}});
  }
  std::filesystem::path dir;
  ProblemSet problems;
};

TEST_F(ResponsesFile, EmptyFileGivesEmptyMatrix) {
  write_file(dir / "empty.csv", "");
  const auto m = load_responses(dir / "empty.csv", ResponseFormat::csv, problems);
  EXPECT_TRUE(m.empty());
  EXPECT_TRUE(m.problems().empty());
}

TEST_F(ResponsesFile, CountsPerProblem) {
  write_file(dir / "r.csv", "participant_id,problem_id,value\nw1,p1,2\nw2,p1,3\nw1,p2,5\n");
  const auto m = load_responses(dir / "r.csv", ResponseFormat::csv, problems);
  EXPECT_EQ(m.count("p1"), 2u);
  EXPECT_EQ(m.count("p2"), 1u);
  EXPECT_EQ(m.tasks_of("w1"), 2u);
  EXPECT_TRUE(m.participates("w2", "p1"));
  EXPECT_FALSE(m.participates("w2", "p2"));
}

TEST_F(ResponsesFile, JsonLinesMatchesCsv) {
  write_file(dir / "r.csv", "participant_id,problem_id,value\nw1,p1,2\nw2,p1,3\n");
  write_file(dir / "r.jsonl",
             "{\"participant_id\":\"w1\",\"problem_id\":\"p1\",\"value\":2}\n"
             "{\"participant_id\":\"w2\",\"problem_id\":\"p1\",\"value\":3}\n");
  EXPECT_EQ(load_responses(dir / "r.csv", ResponseFormat::csv, problems),
            load_responses(dir / "r.jsonl", ResponseFormat::jsonl, problems));
}

TEST_F(ResponsesFile, OffScaleValueIsRejectedWithLine) {
  write_file(dir / "r.csv", "participant_id,problem_id,value\nw1,p1,2\nw1,p2,9\n");
  try {
    load_responses(dir / "r.csv", ResponseFormat::csv, problems);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST_F(ResponsesFile, DuplicatesAndUnknownProblemsAreRejected) {
  write_file(dir / "dup.csv", "participant_id,problem_id,value\nw1,p1,2\nw1,p1,3\n");
  EXPECT_THROW(load_responses(dir / "dup.csv", ResponseFormat::csv, problems), DataError);
  write_file(dir / "unk.csv", "participant_id,problem_id,value\nw1,p9,2\n");
  EXPECT_THROW(load_responses(dir / "unk.csv", ResponseFormat::csv, problems), DataError);
  write_file(dir / "bad.csv", "participant_id,problem_id,value\nw1,p1\n");
  EXPECT_THROW(load_responses(dir / "bad.csv", ResponseFormat::csv, problems), DataError);
}

TEST_F(ResponsesFile, SaveLoadRoundTrip) {
  ResponseMatrix m;
  m.add({"a", "p1", 4}, problems.at("p1").scale);
  m.add({"b", "p2", 1}, problems.at("p2").scale);
  save_responses(m, dir / "out.csv");
  EXPECT_EQ(load_responses(dir / "out.csv", ResponseFormat::csv, problems), m);
}

TEST(Problems, LoadFillsHashedFeatures) {
  const auto dir = scratch_dir("problems");
  write_file(dir / "p.jsonl",
             "{\"id\":\"a\",\"description\":\"rate this\",\"scale\":{\"kind\":\"choice\",\"m\":3}}\n"
             "{\"id\":\"b\",\"description\":\"x\",\"scale\":{\"kind\":\"continuous\",\"lo\":0,\"hi\":1}}\n");
  const auto set = load_problems(dir / "p.jsonl", 12);
  ASSERT_EQ(set.size(), 2u);
  EXPECT_EQ(set.feature_dim(), 12u);
  EXPECT_EQ(set.at("a").features, hashed_features("rate this", 12));
  save_problems(set, dir / "q.jsonl");
  const auto again = load_problems(dir / "q.jsonl", 12);
  EXPECT_EQ(again.problems(), set.problems());
}
