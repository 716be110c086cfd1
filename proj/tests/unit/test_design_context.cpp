#include <random>

#include <gtest/gtest.h>
#include <json.hpp>

#include "refine/common/error.h"
#include "refine/paper/design_context.h"

using namespace refine;
using nlohmann::json;

TEST(Dimensions, NamesRoundTripInCanonicalOrder) {
  std::vector<std::string> names;
  for (Dimension d : kDimensions) {
    names.emplace_back(dimension_name(d));
    EXPECT_EQ(dimension_from_name(dimension_name(d)), d);
  }
  EXPECT_EQ(names, (std::vector<std::string>{"target_user", "domain", "modality", "pain_point",
                                             "client", "metric"}));
  EXPECT_FALSE(dimension_from_name("audience").has_value());
}

TEST(DesignContext, BlankValuesAreAbsent) {
  DesignContext ctx;
  ctx.set(Dimension::kDomain, "  travel  ");
  ctx.set(Dimension::kClient, "   ");
  ctx.set(Dimension::kMetric, std::nullopt);
  EXPECT_EQ(*ctx.get(Dimension::kDomain), "travel");
  EXPECT_FALSE(ctx.is_present(Dimension::kClient));
  EXPECT_EQ(ctx.present_count(), 1u);
  EXPECT_EQ(ctx.present_dimensions(), std::vector<Dimension>{Dimension::kDomain});
}

TEST(DesignContext, JsonRoundTripOverRandomContexts) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> words = {"a", "Travel app", "mobile", "émigré", "x y z"};
  for (int trial = 0; trial < 300; ++trial) {
    DesignContext ctx(trial % 2 ? ContextOrigin::kMockup : ContextOrigin::kPaper);
    for (Dimension d : kDimensions) {
      if (rng() % 3 == 0) ctx.set(d, words[rng() % words.size()]);
    }
    json j = to_json(ctx);
    for (Dimension d : kDimensions) ASSERT_TRUE(j.contains(std::string(dimension_name(d))));
    EXPECT_EQ(context_from_json(j), ctx);
    EXPECT_EQ(to_json(context_from_json(j)).dump(), j.dump());
  }
}

TEST(DesignContext, ModelOutputAbstentionsAreAbsent) {
  json answer = {{"target_user", "Frequent flyers"}, {"domain", "N/A"},
                 {"modality", "Not specified."},     {"pain_point", nullptr},
                 {"client", 42},                     {"metric", "none"},
                 {"extra", "ignored"}};
  DesignContext ctx = context_from_model_output(answer, ContextOrigin::kMockup);
  EXPECT_EQ(ctx.origin(), ContextOrigin::kMockup);
  EXPECT_EQ(ctx.present_dimensions(), std::vector<Dimension>{Dimension::kTargetUser});
  EXPECT_EQ(context_from_model_output(json::object(), ContextOrigin::kPaper).present_count(), 0u);
}

TEST(DesignContext, AbstentionMustBeTheWholeValue) {
  DesignContext ctx = context_from_model_output({{"pain_point", "none of the fares are clear"}},
                                                ContextOrigin::kPaper);
  EXPECT_TRUE(ctx.is_present(Dimension::kPainPoint));
}
