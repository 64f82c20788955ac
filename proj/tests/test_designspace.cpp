#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "xpert/costmodel.hpp"
#include "xpert/designspace.hpp"

using namespace xpert;

namespace {

bool has_violation(const std::vector<Violation>& v, int layer, const std::string& field) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.layer == layer && x.field == field; });
}

CandidateModel default_model(const DesignSpace& s) {
  std::vector<std::size_t> idx(s.layer_count(), 0);
  return model_from_phase1(s, idx);
}

}  // namespace

TEST(DesignSpace, DefaultOptionCounts) {
  const DesignSpace s = vgg16_space();
  ASSERT_EQ(s.layer_count(), 14u);
  for (std::size_t l = 0; l + 1 < s.layer_count(); ++l) EXPECT_EQ(enumerate_phase1_options(s, l).size(), 40u) << l;
  for (std::size_t l = 0; l < s.layer_count(); ++l) EXPECT_EQ(enumerate_phase2_options(s, l).size(), 12u);
}

TEST(DesignSpace, Phase1OrderIsCdThenCsThenAt) {
  const DesignSpace s = vgg16_space();
  const auto opts = enumerate_phase1_options(s, 2);
  const auto& cds = s.cd_options_per_layer[2];
  std::size_t i = 0;
  for (int cd : cds)
    for (int cs : s.cs_options)
      for (AdcType at : s.at_options) {
        ASSERT_LT(i, opts.size());
        EXPECT_EQ(opts[i], (Phase1Option{cd, cs, at})) << i;
        ++i;
      }
  EXPECT_EQ(i, opts.size());
}

TEST(DesignSpace, Phase2OrderIsApMajor) {
  const DesignSpace s = vgg16_space();
  const auto opts = enumerate_phase2_options(s, 0);
  EXPECT_EQ(opts.front(), (Phase2Option{5, 3}));
  EXPECT_EQ(opts[5], (Phase2Option{5, 8}));
  EXPECT_EQ(opts[6], (Phase2Option{6, 3}));
  EXPECT_EQ(opts.back(), (Phase2Option{6, 8}));
}

TEST(DesignSpace, EnumerationIsStable) {
  const DesignSpace s = vgg16_space();
  EXPECT_EQ(enumerate_phase1_options(s, 5), enumerate_phase1_options(s, 5));
  EXPECT_EQ(enumerate_phase2_options(s, 5), enumerate_phase2_options(s, 5));
}

TEST(DesignSpace, DegenerateSpaceHasOneOption) {
  DesignSpace s;
  s.shapes = {LayerShape{3, 8, 8, 1, false}};
  s.cd_options_per_layer = {{16}};
  s.cs_options = {8};
  s.at_options = {AdcType::Flash};
  s.ap_options = {6};
  s.ip_options = {8};
  EXPECT_EQ(enumerate_phase1_options(s, 0).size(), 1u);
  EXPECT_EQ(enumerate_phase2_options(s, 0).size(), 1u);
}

TEST(DesignSpace, LayerOutOfRangeThrows) {
  const DesignSpace s = vgg16_space();
  EXPECT_THROW(enumerate_phase1_options(s, 14), std::out_of_range);
  EXPECT_THROW(enumerate_phase2_options(s, 99), std::out_of_range);
}

TEST(DesignSpace, Vgg16WidthsAreMultiplesOfEight) {
  const DesignSpace s = vgg16_space();
  for (std::size_t l = 0; l + 1 < s.layer_count(); ++l) {
    ASSERT_EQ(s.cd_options_per_layer[l].size(), 4u);
    for (int cd : s.cd_options_per_layer[l]) EXPECT_EQ(cd % 8, 0);
    EXPECT_TRUE(std::is_sorted(s.cd_options_per_layer[l].begin(), s.cd_options_per_layer[l].end()));
  }
  EXPECT_TRUE(s.shapes.back().is_fc);
}

TEST(ValidateCandidate, DefaultMembersAreAccepted) {
  const DesignSpace s = vgg16_space();
  const PlatformParams p;
  const CandidateModel m = default_model(s);
  EXPECT_EQ(m.layers.size(), 14u);
  EXPECT_TRUE(validate_candidate(m, s, p).empty());
  EXPECT_NO_THROW(model_cost(m, s, p));
}

TEST(ValidateCandidate, AdcPrecisionAboveEightIsReported) {
  const DesignSpace s = vgg16_space();
  CandidateModel m = default_model(s);
  m.layers[3].choice.ap = 9;
  const auto v = validate_candidate(m, s, PlatformParams{});
  EXPECT_TRUE(has_violation(v, 3, "ap"));
  EXPECT_THROW(model_cost(m, s, PlatformParams{}), InvalidModel);
}

TEST(ValidateCandidate, ChainingMismatchIsReported) {
  DesignSpace s = vgg16_space();
  s.cd_options_per_layer[2].push_back(128);
  CandidateModel m = default_model(s);
  m.layers[2].choice.cd_out = 128;
  m.layers[3].declared_cd_in = 64;
  const auto v = validate_candidate(m, s, PlatformParams{});
  EXPECT_TRUE(has_violation(v, 3, "chaining"));
}

TEST(ValidateCandidate, ReportsEveryViolation) {
  const DesignSpace s = vgg16_space();
  CandidateModel m = default_model(s);
  m.layers[0].choice.cs = 3;
  m.layers[5].choice.ip = 0;
  m.layers[7].choice.cd_out = 7;
  const auto v = validate_candidate(m, s, PlatformParams{});
  EXPECT_TRUE(has_violation(v, 0, "cs"));
  EXPECT_TRUE(has_violation(v, 5, "ip"));
  EXPECT_TRUE(has_violation(v, 7, "cd_out"));
}

TEST(ValidateCandidate, EmptyModelAndPlatformFaults) {
  const DesignSpace s = vgg16_space();
  EXPECT_TRUE(has_violation(validate_candidate(CandidateModel{}, s, PlatformParams{}), -1, "layers"));
  PlatformParams bad;
  bad.weight_slice_bits = 3;
  EXPECT_FALSE(validate_candidate(default_model(s), s, bad).empty());
}

TEST(ValidateCandidate, AllPhase1MembersAcceptedByCostModel) {
  DesignSpace s;
  s.input_channels = 3;
  s.shapes = {LayerShape{3, 8, 8, 1, false}, LayerShape{1, 1, 1, 1, true}};
  s.cd_options_per_layer = {{8, 16}, {10}};
  const PlatformParams p;
  for (std::size_t a = 0; a < s.phase1_option_count(0); ++a)
    for (std::size_t b = 0; b < s.phase1_option_count(1); ++b) {
      const CandidateModel m = model_from_phase1(s, {a, b});
      ASSERT_TRUE(validate_candidate(m, s, p).empty());
      const CostReport r = model_cost(m, s, p);
      EXPECT_GT(r.area_mm2, 0);
      EXPECT_GT(r.delay_ns, 0);
    }
}
