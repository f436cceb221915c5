#include <gtest/gtest.h>

#include <random>

#include "toposeg/fusion.hpp"

using namespace toposeg;

namespace {

EnsembleMember member(std::string name, std::vector<std::vector<float>> per_channel, Extent e) {
  EnsembleMember m{std::move(name), {}};
  for (const auto& values : per_channel) {
    Volume<float> ch(e);
    for (std::size_t i = 0; i < ch.size(); ++i) ch[i] = values[i % values.size()];
    m.probs.channels.push_back(ch);
  }
  return m;
}

ProbabilityVolume random_probs(std::mt19937_64& rng, Extent e, std::size_t classes) {
  std::gamma_distribution<double> g(1.0, 1.0);
  ProbabilityVolume pv;
  for (std::size_t c = 0; c < classes; ++c) pv.channels.emplace_back(e);
  for (std::size_t i = 0; i < pv.voxel_count(); ++i) {
    std::vector<double> x(classes);
    double s = 0.0;
    for (auto& v : x) s += (v = g(rng) + 1e-6);
    for (std::size_t c = 0; c < classes; ++c) pv.channels[c][i] = float(x[c] / s);
  }
  return pv;
}

const ClassTable kTwoClasses{{0, 1}};

}  // namespace

TEST(SoftVote, TwoMemberExample) {
  const Extent e{1, 1, 1};
  EnsembleInput in{{member("a", {{0.6F}, {0.4F}}, e), member("b", {{0.2F}, {0.8F}}, e)}, {}};
  const auto out = soft_vote(in);
  EXPECT_EQ(out.channels[0][0], 0.4F);
  EXPECT_EQ(out.channels[1][0], 0.6F);
  EXPECT_EQ(fuse_to_labels(in, kTwoClasses)[0], 1);
}

TEST(SoftVote, WeightedExample) {
  const Extent e{1, 1, 1};
  EnsembleInput in{{member("a", {{0.6F}, {0.4F}}, e), member("b", {{0.2F}, {0.8F}}, e)}, {3.0, 1.0}};
  const auto out = soft_vote(in);
  EXPECT_EQ(out.channels[0][0], 0.5F);
  EXPECT_EQ(out.channels[1][0], 0.5F);
  EXPECT_EQ(fuse_to_labels(in, kTwoClasses)[0], 0);  // tie goes to the lower class
}

TEST(SoftVote, FusionCanPickClassNoMemberRankedFirstTogether) {
  const Extent e{1, 1, 1};
  EnsembleInput in{{member("a", {{0.55F}, {0.45F}}, e), member("b", {{0.40F}, {0.60F}}, e)}, {}};
  const auto out = soft_vote(in);
  // 0.475 has no exact float; the double mean of the float inputs rounds to a neighbour.
  EXPECT_FLOAT_EQ(out.channels[0][0], 0.475F);
  EXPECT_FLOAT_EQ(out.channels[1][0], 0.525F);
  EXPECT_LT(out.channels[0][0], out.channels[1][0]);
  EXPECT_EQ(fuse_to_labels(in, kTwoClasses)[0], 1);
}

TEST(SoftVote, SingleMemberIsIdentity) {
  std::mt19937_64 rng(1);
  const auto p = random_probs(rng, {5, 4, 3}, 4);
  const auto out = soft_vote(EnsembleInput{{{"only", p}}, {}});
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(out.channels[c].storage(), p.channels[c].storage());
  const auto w = soft_vote(EnsembleInput{{{"only", p}}, {7.5}});
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(w.channels[c].storage(), p.channels[c].storage());
}

TEST(SoftVote, PermutationAndWeightScaling) {
  std::mt19937_64 rng(2);
  const Extent e{10, 10, 1};
  std::vector<EnsembleMember> ms;
  for (int k = 0; k < 3; ++k) ms.push_back({"m" + std::to_string(k), random_probs(rng, e, 4)});
  const std::vector<double> w{0.5, 2.0, 1.25};
  const auto base = soft_vote(EnsembleInput{ms, w});
  const auto labels = fuse_to_labels(EnsembleInput{ms, w});

  const std::vector<EnsembleMember> rev{ms[2], ms[0], ms[1]};
  const auto perm = soft_vote(EnsembleInput{rev, {w[2], w[0], w[1]}});
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < perm.voxel_count(); ++i) EXPECT_NEAR(perm.channels[c][i], base.channels[c][i], 1e-6);

  for (double k : {0.1, 3.0, 1000.0}) {
    const auto scaled = soft_vote(EnsembleInput{ms, {w[0] * k, w[1] * k, w[2] * k}});
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t i = 0; i < scaled.voxel_count(); ++i)
        EXPECT_NEAR(scaled.channels[c][i], base.channels[c][i], 1e-6);
    EXPECT_EQ(fuse_to_labels(EnsembleInput{ms, {w[0] * k, w[1] * k, w[2] * k}}), labels);
  }
}

TEST(SoftVote, OutputStaysAProbability) {
  std::mt19937_64 rng(3);
  const Extent e{6, 6, 6};
  EnsembleInput in{{{"a", random_probs(rng, e, 4)}, {"b", random_probs(rng, e, 4)}}, {1.0, 2.0}};
  EXPECT_NO_THROW(validate_probabilities(soft_vote(in)));
  EXPECT_EQ(soft_vote(in, 1).channels[2].storage(), soft_vote(in, 4).channels[2].storage());
}

TEST(SoftVote, Mismatches) {
  EnsembleInput none;
  EXPECT_THROW((void)soft_vote(none), ValidationError);

  const auto a = member("a.nii.gz", {{0.5F}, {0.5F}}, {2, 2, 2});
  const auto b = member("b.nii.gz", {{0.5F}, {0.5F}}, {2, 2, 3});
  try {
    (void)soft_vote(EnsembleInput{{a, b}, {}});
    FAIL();
  } catch (const GeometryError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("a.nii.gz"), std::string::npos) << msg;
    EXPECT_NE(msg.find("b.nii.gz"), std::string::npos) << msg;
  }
  const auto c = member("c.nii.gz", {{0.2F}, {0.3F}, {0.5F}}, {2, 2, 2});
  EXPECT_THROW((void)soft_vote(EnsembleInput{{a, c}, {}}), GeometryError);
  EXPECT_THROW((void)soft_vote(EnsembleInput{{a, a}, {1.0}}), ValidationError);
  EXPECT_THROW((void)soft_vote(EnsembleInput{{a, a}, {1.0, 0.0}}), ValidationError);
  EXPECT_THROW((void)soft_vote(EnsembleInput{{a, a}, {1.0, -2.0}}), ValidationError);
}
