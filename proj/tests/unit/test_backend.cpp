#include <gtest/gtest.h>

#include <cmath>

#include "crowdsim/backend.hpp"
#include "crowdsim/error.hpp"
#include "test_support.hpp"

using namespace crowdsim;

namespace {

Problem likert() {
  return {"p1", "How offensive is this remark?", "Answer 1 to 5.", "Forum moderation.",
          DecisionScale::ordinal({1, 2, 3, 4, 5}), {}};
}

}  // namespace

TEST(Prompt, ZeroShotContainsAllParts) {
  const auto b = render_prompt(likert(), PromptStrategy::zero_shot);
  for (const char* part : {"How offensive is this remark?", "Answer 1 to 5.", "Forum moderation."})
    EXPECT_NE(b.text.find(part), std::string::npos) << part;
  EXPECT_EQ(b.text, render_prompt(likert(), PromptStrategy::zero_shot).text);
}

TEST(Prompt, PersonaAddsProfileFields) {
  const ProfileSpec spec({{"Age", UniformField{18, 80}, std::nullopt},
                          {"Occupation", CategoricalField{{"teacher", "nurse"}, {0.5, 0.5}, {}}, std::nullopt}});
  const auto who = make_profile(spec, "v1", {30.0, std::string("teacher")});
  const auto zero = render_prompt(likert(), PromptStrategy::zero_shot);
  const auto multi = render_prompt(likert(), PromptStrategy::multi_persona, who);
  EXPECT_NE(multi.text.find("Age"), std::string::npos);
  EXPECT_NE(multi.text.find("30"), std::string::npos);
  EXPECT_NE(multi.text.find("teacher"), std::string::npos);
  EXPECT_EQ(zero.text.find("teacher"), std::string::npos);
  EXPECT_THROW(render_prompt(likert(), PromptStrategy::multi_persona), ConfigError);
  EXPECT_THROW(render_prompt(likert(), PromptStrategy::zero_shot, who), ConfigError);
}

TEST(Parse, ExtractsOnScaleValues) {
  EXPECT_EQ(parse_decision("I rate this 4 out of 5", DecisionScale::ordinal({1, 2, 3, 4, 5})), 4.0);
  EXPECT_EQ(parse_decision("4.7", DecisionScale::continuous(1, 5)), 4.7);
  EXPECT_EQ(parse_decision("maybe 9", DecisionScale::continuous(1, 5)), 5.0);
  EXPECT_THROW(parse_decision("no idea", DecisionScale::ordinal({1, 2, 3, 4, 5})), UnparseableResponse);
}

TEST(Reference, CycleStubAggregates) {
  CycleStub stub({"3", "3", "4", "3", "5", "3", "3", "4"});
  ReferenceOptions o;
  o.samples = 8;
  o.aggregator = AggregateMethod::mean;
  const auto mean = generate_reference(likert(), stub, o, 0);
  EXPECT_DOUBLE_EQ(mean.value, 3.5);
  EXPECT_EQ(mean.samples.size(), 8u);
  o.aggregator = AggregateMethod::majority;
  EXPECT_DOUBLE_EQ(generate_reference(likert(), stub, o, 0).value, 3.0);
  o.samples = 1;
  EXPECT_DOUBLE_EQ(generate_reference(likert(), stub, o, 4).value, 5.0);
}

TEST(Reference, RetriesUnparseableReplies) {
  // K=2: samples use seeds 0 and 1; seed 1 fails and its retry seed 1 + 2 = 3 succeeds.
  CycleStub stub({"2", "junk", "junk", "4"});
  ReferenceOptions o;
  o.samples = 2;
  o.parse_retries = 1;
  const auto r = generate_reference(likert(), stub, o, 0);
  EXPECT_EQ(r.samples, (std::vector<double>{2, 4}));
  CycleStub never({"junk"});
  EXPECT_THROW(generate_reference(likert(), never, o, 0), UnparseableResponse);
}

TEST(Variance, EstimatorCases) {
  HashStub det(1, 5, 1.0, {1, 2, 3, 4, 5});
  EXPECT_EQ(estimate_backend_variance(likert(), det, 0.0, 10, 1), 0.0);
  CycleStub alt({"2", "4"});
  EXPECT_NEAR(estimate_backend_variance(likert(), alt, 0.7, 100, 0), 100.0 / 99.0, 1e-12);
  CycleStub same({"3"});
  EXPECT_EQ(estimate_backend_variance(likert(), same, 0.7, 2, 0), 0.0);
}

TEST(HashStubTest, PureFunctionOnLevels) {
  HashStub s(1, 5, 1.0, {1, 2, 3, 4, 5});
  const auto a = s.complete("prompt", 0.5, 7);
  EXPECT_EQ(a, s.complete("prompt", 0.5, 7));
  const auto scale = DecisionScale::ordinal({1, 2, 3, 4, 5});
  const double v = parse_decision(a, scale);
  EXPECT_EQ(v, std::round(v));
  EXPECT_EQ(s.complete("prompt", 0.0, 1), s.complete("prompt", 0.0, 2));
}

TEST(Cache, ReplaysJournalWithoutLiveCalls) {
  const auto dir = crowdsim::testing::scratch_dir("cache");
  const auto journal = dir / "j.jsonl";
  auto inner = std::make_shared<HashStub>(1, 5, 1.0);
  std::string first;
  {
    CachedBackend b(inner, std::make_shared<ResponseCache>(journal));
    first = b.complete("hello", 0.5, 3);
    EXPECT_EQ(b.complete("hello", 0.5, 3), first);
    EXPECT_EQ(b.live_calls(), 1u);
  }
  CachedBackend again(inner, std::make_shared<ResponseCache>(journal));
  EXPECT_EQ(again.complete("hello", 0.5, 3), first);
  EXPECT_EQ(again.live_calls(), 0u);
  again.complete("hello", 0.5, 4);
  EXPECT_EQ(again.live_calls(), 1u);
}

TEST(Http, UnreachableServerRaisesBackendError) {
  HttpBackendOptions o;
  o.base_url = "http://127.0.0.1:9/v1";
  o.model = "m";
  o.max_retries = 1;
  o.backoff = std::chrono::milliseconds(1);
  o.timeout = std::chrono::seconds(2);
  HttpBackend b(o);
  EXPECT_THROW(b.complete("x", 0.0, 0), BackendError);
}
