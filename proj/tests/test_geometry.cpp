#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace advgame;
using namespace testing_support;

namespace {

constexpr double kTau = 1e-6;

std::vector<Region> all_regions(int k, int n, int y, const MixedStrategy& p) {
  auto it = enumerate_regions(k, n, y, p);
  std::vector<Region> out;
  while (auto r = it.next()) out.push_back(*r);
  return out;
}

ClassifierSet random_linear_set(int n, int k, int d, std::mt19937_64& rng) {
  std::vector<Classifier> members;
  for (int i = 0; i < n; ++i) {
    if (k == 2) {
      members.emplace_back(LinearClassifier::binary(random_vector(d, rng), random_vector(1, rng, 0.5)[0]));
    } else {
      members.emplace_back(LinearClassifier(random_matrix(k, d, rng), random_vector(k, rng, 0.5)));
    }
  }
  return ClassifierSet(members);
}

}  // namespace

TEST(EnumerateRegions, BinaryPairLossOrder) {
  const auto regions = all_regions(2, 2, 0, MixedStrategy({0.7, 0.3}));
  ASSERT_EQ(regions.size(), 4u);
  EXPECT_DOUBLE_EQ(regions[0].loss, 1.0);
  EXPECT_DOUBLE_EQ(regions[1].loss, 0.7);
  EXPECT_DOUBLE_EQ(regions[2].loss, 0.3);
  EXPECT_DOUBLE_EQ(regions[3].loss, 0.0);
  EXPECT_EQ(regions[1].labels, (std::vector<int>{1, 0}));
  EXPECT_EQ(regions[3].labels, (std::vector<int>{0, 0}));
}

TEST(EnumerateRegions, ThreeClassesSingleModel) {
  const auto regions = all_regions(3, 1, 0, MixedStrategy({1.0}));
  ASSERT_EQ(regions.size(), 3u);
  EXPECT_EQ(regions[0].labels, std::vector<int>{1});
  EXPECT_EQ(regions[1].labels, std::vector<int>{2});
  EXPECT_EQ(regions[2].labels, std::vector<int>{0});
  EXPECT_DOUBLE_EQ(regions[0].loss, 1.0);
  EXPECT_DOUBLE_EQ(regions[1].loss, 1.0);
  EXPECT_DOUBLE_EQ(regions[2].loss, 0.0);
}

TEST(EnumerateRegions, UniformTieBreakIsLexicographic) {
  const auto regions = all_regions(2, 2, 0, MixedStrategy::uniform(2));
  ASSERT_EQ(regions.size(), 4u);
  EXPECT_EQ(regions[0].labels, (std::vector<int>{1, 1}));
  EXPECT_EQ(regions[1].labels, (std::vector<int>{1, 0}));
  EXPECT_EQ(regions[2].labels, (std::vector<int>{0, 1}));
  EXPECT_EQ(regions[3].labels, (std::vector<int>{0, 0}));
}

TEST(EnumerateRegions, CoversEveryLabelVectorOnceInDescendingLoss) {
  std::mt19937_64 rng(8);
  for (int k = 2; k <= 4; ++k) {
    for (int n = 1; n <= 4; ++n) {
      const MixedStrategy p = random_strategy(static_cast<std::size_t>(n), rng);
      for (int y = 0; y < k; ++y) {
        const auto regions = all_regions(k, n, y, p);
        std::set<std::vector<int>> seen;
        double prev = 2.0;
        for (const auto& r : regions) {
          EXPECT_TRUE(seen.insert(r.labels).second);
          double loss = 0.0;
          for (int i = 0; i < n; ++i) {
            if (r.labels[i] != y) loss += p[i];
          }
          EXPECT_NEAR(loss, r.loss, 1e-15);
          EXPECT_LE(r.loss, prev + 1e-15);
          prev = r.loss;
        }
        std::size_t total = 1;
        for (int i = 0; i < n; ++i) total *= static_cast<std::size_t>(k);
        EXPECT_EQ(seen.size(), total);
      }
    }
  }
}

TEST(EnumerateRegions, CapErrorCarriesCap) {
  try {
    enumerate_regions(2, 20, 0, MixedStrategy::uniform(20), 60000);
    FAIL() << "expected EnumerationCapError";
  } catch (const EnumerationCapError& e) {
    EXPECT_EQ(e.cap(), 60000u);
  }
  EXPECT_NO_THROW(enumerate_regions(2, 15, 0, MixedStrategy::uniform(15), 60000));
}

TEST(MinNormToRegion, SingleHalfspaceProjection) {
  const ClassifierSet set({binary({3, 4}, 0)});
  const auto v = min_norm_to_region(set, vec({3, 4}), Region{{1}, 1.0});
  ASSERT_TRUE(v);
  EXPECT_NEAR(v->norm(), (25.0 + kTau) / 5.0, 1e-12);
  EXPECT_TRUE((*v / v->norm()).isApprox(vec({-0.6, -0.8}), 1e-12));
}

TEST(MinNormToRegion, CornerOfTwoHalfspaces) {
  const auto v = min_norm_to_region(axis_pair(), vec({1, 1}), Region{{1, 1}, 1.0});
  ASSERT_TRUE(v);
  EXPECT_NEAR((*v)[0], -1.0 - kTau, 1e-12);
  EXPECT_NEAR((*v)[1], -1.0 - kTau, 1e-12);
  EXPECT_NEAR(v->norm(), std::sqrt(2.0) * (1.0 + kTau), 1e-12);
}

TEST(MinNormToRegion, ContradictoryRegionIsInfeasible) {
  // Same hyperplane twice with opposite required labels.
  const ClassifierSet set({binary({1, 0}, 0), binary({1, 0}, 0)});
  EXPECT_FALSE(min_norm_to_region(set, vec({1, 1}), Region{{0, 1}, 0.5}));
}

TEST(MinNormToRegion, SolutionLandsInItsRegion) {
  std::mt19937_64 rng(31);
  int solved = 0;
  for (int t = 0; t < 150; ++t) {
    const int k = 2 + t % 3, n = 1 + t % 3, d = 2 + t % 2;
    const ClassifierSet set = random_linear_set(n, k, d, rng);
    const Vector x = random_vector(d, rng);
    auto it = enumerate_regions(k, n, 0, MixedStrategy::uniform(static_cast<std::size_t>(n)));
    while (auto r = it.next()) {
      const auto v = min_norm_to_region(set, x, *r);
      if (!v) continue;
      ++solved;
      for (int i = 0; i < n; ++i) EXPECT_EQ(set[i].predict(x + *v), r->labels[i]);
    }
  }
  EXPECT_GT(solved, 300);
}

TEST(MinNormToRegion, RegionsAreDisjoint) {
  std::mt19937_64 rng(32);
  for (int t = 0; t < 40; ++t) {
    const ClassifierSet set = random_linear_set(2, 3, 2, rng);
    const Vector x = random_vector(2, rng);
    auto it = enumerate_regions(3, 2, 0, MixedStrategy::uniform(2));
    while (auto r = it.next()) {
      const auto v = min_norm_to_region(set, x, *r);
      if (!v) continue;
      // The point satisfies no other label vector.
      std::vector<int> actual = {set[0].predict(x + *v), set[1].predict(x + *v)};
      EXPECT_EQ(actual, r->labels);
    }
  }
}

TEST(ExactBestResponse, BudgetBelowCorner) {
  const MixedStrategy p = MixedStrategy::uniform(2);
  const BestResponse br = exact_best_response(p, axis_pair(), vec({1, 1}), 0, AttackBudget(Norm::l2, 1.2));
  EXPECT_DOUBLE_EQ(br.loss, 0.5);
  EXPECT_NEAR(br.v[0], -1.0 - kTau, 1e-12);
  EXPECT_NEAR(br.v[1], 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(grid_best_loss_2d(p, axis_pair(), vec({1, 1}), 0, 1.2), 0.5);
}

TEST(ExactBestResponse, BudgetAboveCorner) {
  const MixedStrategy p = MixedStrategy::uniform(2);
  const BestResponse br = exact_best_response(p, axis_pair(), vec({1, 1}), 0, AttackBudget(Norm::l2, 1.5));
  EXPECT_DOUBLE_EQ(br.loss, 1.0);
  EXPECT_NEAR(br.v[0], -1.0 - kTau, 1e-12);
  EXPECT_NEAR(br.v[1], -1.0 - kTau, 1e-12);
  EXPECT_DOUBLE_EQ(grid_best_loss_2d(p, axis_pair(), vec({1, 1}), 0, 1.5), 1.0);
}

TEST(ExactBestResponse, BelowEveryMarginReturnsZero) {
  const BestResponse br =
      exact_best_response(MixedStrategy::uniform(2), axis_pair(), vec({1, 1}), 0, AttackBudget(Norm::l2, 0.9));
  EXPECT_EQ(br.loss, 0.0);
  EXPECT_TRUE(br.v.isZero());
}

TEST(ExactBestResponse, MatchesGridSearchOnRandomPlanarInstances) {
  std::mt19937_64 rng(33);
  for (int t = 0; t < 25; ++t) {
    const int k = 2 + t % 2, n = 1 + t % 3;
    const ClassifierSet set = random_linear_set(n, k, 2, rng);
    const Vector x = random_vector(2, rng);
    const int y = set[0].predict(x);
    const MixedStrategy p = random_strategy(static_cast<std::size_t>(n), rng);
    const double eps = 0.3 + 0.1 * t;
    const BestResponse br = exact_best_response(p, set, x, y, AttackBudget(Norm::l2, eps));
    EXPECT_NEAR(br.loss, direct_zero_one(p, set, x, br.v, y), 1e-15);
    EXPECT_LE(br.v.norm(), eps);
    const double grid = grid_best_loss_2d(p, set, x, y, eps, 150, 720);
    EXPECT_GE(br.loss, grid - 1e-12) << "instance " << t;
  }
}

TEST(ExactBestResponse, MonotoneInBudget) {
  std::mt19937_64 rng(34);
  for (int t = 0; t < 30; ++t) {
    const ClassifierSet set = random_linear_set(3, 3, 3, rng);
    const Vector x = random_vector(3, rng);
    const MixedStrategy p = random_strategy(3, rng);
    ExactOracle oracle(set, x, 0);
    double prev = 0.0;
    for (double eps = 0.1; eps < 4.0; eps += 0.3) {
      const double loss = oracle.best_response(p, AttackBudget(Norm::l2, eps)).loss;
      EXPECT_GE(loss, prev);
      prev = loss;
    }
  }
}

TEST(ExactBestResponse, MarginAboveBudgetMeansNoLoss) {
  std::mt19937_64 rng(35);
  for (int t = 0; t < 50; ++t) {
    const LinearClassifier c(random_matrix(3, 3, rng), random_vector(3, rng));
    const Vector x = random_vector(3, rng);
    const int y = c.predict(x);
    const double m = margin(c, x, y);
    if (m < 1e-3) continue;
    const BestResponse br = exact_best_response(MixedStrategy({1.0}), ClassifierSet({c}), x, y,
                                                AttackBudget(Norm::l2, m * 0.99));
    EXPECT_EQ(br.loss, 0.0);
  }
}

TEST(ExactBestResponse, RejectsNonlinearMembers) {
  std::mt19937_64 rng(36);
  const ClassifierSet set({random_mlp(2, 3, 2, rng)});
  EXPECT_THROW(exact_best_response(MixedStrategy({1.0}), set, vec({0, 0}), 0, AttackBudget(Norm::l2, 1)),
               ContractError);
}

TEST(ExactBestResponse, BoxConstraintsRespected) {
  GeometryConfig cfg;
  cfg.box = Box::unit(2);
  const ClassifierSet set({binary({1, 0}, -0.5)});
  // Needs v1 < -0.3 from x1 = 0.8; the box allows down to -0.8.
  const BestResponse br =
      exact_best_response(MixedStrategy({1.0}), set, vec({0.8, 0.5}), 0, AttackBudget(Norm::l2, 1.0), cfg);
  EXPECT_EQ(br.loss, 1.0);
  const Vector z = vec({0.8, 0.5}) + br.v;
  EXPECT_GE(z.minCoeff(), -1e-12);
  EXPECT_LE(z.maxCoeff(), 1.0 + 1e-12);
  // A boundary outside the box is unreachable.
  const ClassifierSet far({binary({1, 0}, 0.5)});
  EXPECT_EQ(exact_best_response(MixedStrategy({1.0}), far, vec({0.2, 0.5}), 0, AttackBudget(Norm::l2, 5.0), cfg)
                .loss,
            0.0);
}

TEST(Margin, Examples) {
  EXPECT_NEAR(margin(binary({0.6, 0.8}, 0), vec({3, 4}), 0), 5.0, 1e-12);
  EXPECT_NEAR(margin(binary({1, 0}, -2), vec({5, 0}), 0), 3.0, 1e-12);
  const LinearClassifier c3(Matrix::Identity(3, 3), Vector::Zero(3));
  EXPECT_NEAR(margin(c3, vec({1, 0.2, 0}), 0), 0.8 / std::sqrt(2.0), 1e-12);
}

TEST(Margin, MisclassifiedPointIsContractError) {
  EXPECT_THROW(margin(binary({1, 0}, 0), vec({-1, 0}), 0), ContractError);
}

TEST(Margin, EqualsDistanceToBinaryHyperplane) {
  std::mt19937_64 rng(37);
  for (int t = 0; t < 50; ++t) {
    const Vector w = random_vector(4, rng);
    const double b = random_vector(1, rng)[0];
    const Vector x = random_vector(4, rng);
    const LinearClassifier c = LinearClassifier::binary(w, b);
    const int y = c.predict(x);
    EXPECT_NEAR(margin(c, x, y), std::abs(w.dot(x) + b) / w.norm(), 1e-10);
  }
}

TEST(Margin, ScalingOneMemberLeavesOthersAlone) {
  std::mt19937_64 rng(38);
  for (int t = 0; t < 20; ++t) {
    const LinearClassifier a(random_matrix(3, 2, rng), random_vector(3, rng));
    const LinearClassifier b(random_matrix(3, 2, rng), random_vector(3, rng));
    const LinearClassifier a_scaled(a.weights() * 3.7, a.biases() * 3.7);
    const Vector x = random_vector(2, rng);
    EXPECT_NEAR(margin(a, x, a.predict(x)), margin(a_scaled, x, a.predict(x)), 1e-10);
    EXPECT_EQ(a.predict(x), a_scaled.predict(x));
    // Region solutions for the pair only depend on the argmax structure.
    const ClassifierSet s1({a, b}), s2({a_scaled, b});
    for (int l0 = 0; l0 < 3; ++l0) {
      for (int l1 = 0; l1 < 3; ++l1) {
        GeometryConfig cfg;
        cfg.strict_slack = 1e-9;
        const auto v1 = min_norm_to_region(s1, x, Region{{l0, l1}, 0.0}, cfg);
        const auto v2 = min_norm_to_region(s2, x, Region{{l0, l1}, 0.0}, cfg);
        ASSERT_EQ(v1.has_value(), v2.has_value());
        if (v1) {
          EXPECT_NEAR(v1->norm(), v2->norm(), 1e-6);
        }
      }
    }
  }
}

TEST(MinNormMisclassification, ThreeClassNearestTiePlane) {
  const LinearClassifier c(Matrix::Identity(3, 3), Vector::Zero(3));
  const auto v = min_norm_misclassification(c, vec({1, 0.2, 0}), 0);
  ASSERT_TRUE(v);
  EXPECT_NEAR(v->norm(), 0.8 / std::sqrt(2.0), 1e-6);
  EXPECT_EQ(c.predict(vec({1, 0.2, 0}) + *v), 1);
}

TEST(LinfFeasiblePoint, Examples) {
  const ClassifierSet single({binary({1, 0}, 0)});
  const auto v = linf_feasible_point(single, vec({0.5, 0}), Region{{1}, 1.0}, 1.0);
  ASSERT_TRUE(v);
  EXPECT_LE((*v)[0], -0.5 - kTau + 1e-12);
  EXPECT_LE(v->lpNorm<Eigen::Infinity>(), 1.0 + 1e-12);
  EXPECT_FALSE(linf_feasible_point(single, vec({0.5, 0}), Region{{1}, 1.0}, 0.3));

  const auto corner = linf_feasible_point(axis_pair(), vec({1, 1}), Region{{1, 1}, 1.0}, 1.05);
  ASSERT_TRUE(corner);
  EXPECT_LE(corner->lpNorm<Eigen::Infinity>(), 1.05 + 1e-12);
  EXPECT_EQ(axis_pair()[0].predict(vec({1, 1}) + *corner), 1);
  EXPECT_EQ(axis_pair()[1].predict(vec({1, 1}) + *corner), 1);
}

TEST(LinfFeasiblePoint, LinfBudgetReachesCornerThatL2Cannot) {
  const MixedStrategy p = MixedStrategy::uniform(2);
  EXPECT_DOUBLE_EQ(exact_best_response(p, axis_pair(), vec({1, 1}), 0, AttackBudget(Norm::linf, 1.05)).loss, 1.0);
  EXPECT_DOUBLE_EQ(exact_best_response(p, axis_pair(), vec({1, 1}), 0, AttackBudget(Norm::l2, 1.2)).loss, 0.5);
}
