#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "g2l/game.hpp"

using namespace g2l;

namespace {

Game two_player() { return table_game(2, {0.0, 1.0, 2.0, 4.0}); }

// Shapley value by averaging marginal contributions over all orderings;
// independent of the subset-weight formula used by the library.
std::vector<double> shapley_by_permutations(const Game& g) {
  std::vector<std::size_t> order(g.players);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> phi(g.players, 0.0);
  double count = 0;
  do {
    Coalition u = 0;
    for (std::size_t p : order) {
      phi[p] += g(u | player_bit(p)) - g(u);
      u |= player_bit(p);
    }
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  for (double& v : phi) v /= count;
  return phi;
}

AlignmentGame random_alignment_game(std::size_t nv, std::size_t nq, RngStream& rng) {
  AlignmentGame ag;
  ag.scores = random_normal_matrix(nv, nq, rng, 2.0);
  return ag;
}

}  // namespace

TEST(CoalitionWeight, Values) {
  EXPECT_DOUBLE_EQ(coalition_weight(1, 3), 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(coalition_weight(0, 1), 1.0);
  EXPECT_THROW(coalition_weight(3, 3), DomainError);
  double total = 0.0;
  for (std::size_t s = 0; s <= 4; ++s) total += binomial(4, s) * coalition_weight(s, 5);
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(ShapleyValue, TwoPlayerHandEnumeration) {
  const Game g = two_player();
  EXPECT_NEAR(shapley_value_exact(g, 0), 1.5, 1e-15);
  EXPECT_NEAR(shapley_value_exact(g, 1), 2.5, 1e-15);
  EXPECT_THROW(shapley_value_exact(g, 2), DomainError);
}

TEST(ShapleyValue, DummyAndSymmetry) {
  RngStream rng(1, 0);
  const Game base = random_table_game(4, rng);
  const Game with_dummy{5, [&](Coalition u) { return base(u & 15) + ((u & 16) ? 0.7 : 0.0); }};
  EXPECT_NEAR(shapley_value_exact(with_dummy, 4), 0.7, 1e-12);

  // Players 0 and 1 interchangeable: score depends on |U & {0,1}| and the rest.
  const Game sym{4, [&](Coalition u) {
                   const int pair = std::popcount(u & 3);
                   return base(u & 12) + 0.3 * pair + (pair == 2 ? 1.1 : 0.0);
                 }};
  EXPECT_NEAR(shapley_value_exact(sym, 0), shapley_value_exact(sym, 1), 1e-12);
}

TEST(ShapleyValue, MatchesPermutationOracle) {
  RngStream rng(2, 0);
  for (int t = 0; t < 20; ++t) {
    const Game g = random_table_game(1 + rng.uniform_index(6), rng);
    const auto oracle = shapley_by_permutations(g);
    const auto all = shapley_values_exact(g);
    for (std::size_t i = 0; i < g.players; ++i) {
      EXPECT_NEAR(shapley_value_exact(g, i), oracle[i], 1e-12);
      EXPECT_NEAR(all[i], oracle[i], 1e-12);
    }
  }
}

TEST(ShapleyValue, CapacityBound) {
  const Game big{21, [](Coalition) { return 0.0; }};
  EXPECT_THROW(shapley_value_exact(big, 0), CapacityError);
}

TEST(ShapleyInteraction, TwoPlayerAndAdditive) {
  EXPECT_NEAR(shapley_interaction_exact(two_player(), 0b11), 1.0, 1e-15);

  const std::vector<double> c{0.3, -1.2, 2.5, 0.9, -0.4};
  const Game additive{5, [&](Coalition u) {
                        double s = 0.0;
                        for (std::size_t i = 0; i < 5; ++i)
                          if (u & player_bit(i)) s += c[i];
                        return s;
                      }};
  for (Coalition s = 1; s < 32; ++s) EXPECT_NEAR(shapley_interaction_exact(additive, s), 0.0, 1e-12);
  EXPECT_THROW(shapley_interaction_exact(additive, 0), DomainError);
  EXPECT_THROW(shapley_interaction_exact(additive, 64), DomainError);
}

TEST(ShapleyInteraction, PairEqualsExpectationForm) {
  RngStream rng(3, 0);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 2 + rng.uniform_index(5);
    const Game g = random_table_game(n, rng);
    const std::size_t i = rng.uniform_index(n);
    const std::size_t j = (i + 1 + rng.uniform_index(n - 1)) % n;
    EXPECT_NEAR(shapley_interaction_exact(g, player_bit(i) | player_bit(j)),
                pair_interaction_expectation_exact(g, i, j), 1e-12);
  }
}

TEST(Psi, Examples) {
  AlignmentGame ag;
  ag.scores = Matrix(2, 2, std::vector<double>{2, 0, 0, 2});
  const double s = std::exp(2.0) / (std::exp(2.0) + 1.0);
  EXPECT_NEAR(psi_game_score(ag, 0b1111), s, 1e-15);
  EXPECT_NEAR(psi_game_score(ag, 0b0101), 1.0, 1e-15);  // moment 0, query 0
  EXPECT_EQ(psi_game_score(ag, 0b0011), 0.0);           // moments only
  EXPECT_EQ(psi_game_score(ag, 0), 0.0);

  AlignmentGame flat;
  flat.scores = Matrix(3, 2, 0.7);
  EXPECT_NEAR(psi_game_score(flat, 0b11111), 0.5 * (1.0 / 2.0 + 1.0 / 3.0), 1e-15);
}

TEST(Psi, InvariantUnderRelabeling) {
  RngStream rng(4, 0);
  for (int t = 0; t < 20; ++t) {
    const AlignmentGame ag = random_alignment_game(4, 3, rng);
    std::vector<std::size_t> pv{0, 1, 2, 3}, pq{0, 1, 2};
    rng.shuffle(pv);
    rng.shuffle(pq);
    AlignmentGame perm;
    perm.scores = Matrix(4, 3);
    for (std::size_t x = 0; x < 4; ++x)
      for (std::size_t y = 0; y < 3; ++y) perm.scores(pv[x], pq[y]) = ag.scores(x, y);
    const Coalition active = rng.uniform_index(128);
    Coalition mapped = 0;
    for (std::size_t x = 0; x < 4; ++x)
      if (active & player_bit(x)) mapped |= player_bit(pv[x]);
    for (std::size_t y = 0; y < 3; ++y)
      if (active & player_bit(4 + y)) mapped |= player_bit(4 + pq[y]);
    EXPECT_NEAR(psi_game_score(ag, active), psi_game_score(perm, mapped), 1e-14);
  }
}

TEST(SemanticInteraction, AdditiveGameNearZero) {
  const std::vector<double> c{0.2, -0.5, 0.9, 0.1};
  const Game additive{4, [&](Coalition u) {
                        double s = 0.0;
                        for (std::size_t i = 0; i < 4; ++i)
                          if (u & player_bit(i)) s += c[i];
                        return s;
                      }};
  RngStream rng(5, 0);
  EXPECT_LT(std::abs(pair_interaction_sampled(additive, 0, 3, 10000, rng).mean), 0.01);
}

TEST(SemanticInteraction, MatchesEnumerationWithinThreeStandardErrors) {
  RngStream gen(6, 0);
  AlignmentGame ag = random_alignment_game(2, 2, gen);
  const double exact = pair_interaction_expectation_exact(as_game(ag), 1, ag.query_player(0));
  RngStream rng(6, 1);
  const Estimate est = semantic_interaction_estimate(ag, 1, 0, 10000, rng);
  EXPECT_LT(std::abs(est.mean - exact), 3.0 * est.std_error + 1e-12);
}

TEST(SemanticInteraction, DeterministicAndValidated) {
  RngStream gen(7, 0);
  const AlignmentGame ag = random_alignment_game(3, 2, gen);
  RngStream a(1, 2), b(1, 2);
  EXPECT_EQ(semantic_interaction_sampled(ag, 2, 1, 500, a), semantic_interaction_sampled(ag, 2, 1, 500, b));
  EXPECT_THROW(semantic_interaction_sampled(ag, 0, 0, 0, a), DomainError);
  EXPECT_THROW(semantic_interaction_sampled(ag, 3, 0, 10, a), DomainError);
}

TEST(InteractionMatrix, Normalization) {
  Matrix equal(3, 2, 0.4);
  const InteractionMatrix u = normalize_interactions(equal);
  for (double v : u.normalized.data()) EXPECT_NEAR(v, 1.0 / 6.0, 1e-15);

  Matrix dominant(10, 10, 0.0);
  dominant(3, 4) = 10.0;
  EXPECT_GT(normalize_interactions(dominant).normalized(3, 4), 0.99);

  constexpr double ninf = -std::numeric_limits<double>::infinity();
  Matrix partial(2, 2, std::vector<double>{0.1, ninf, ninf, 0.3});
  const InteractionMatrix p = normalize_interactions(partial);
  EXPECT_EQ(p.normalized(0, 1), 0.0);
  EXPECT_NEAR(p.normalized(0, 0) + p.normalized(1, 1), 1.0, 1e-15);
}

TEST(InteractionMatrix, IncludedPairsOnlyAndSumsToOne) {
  RngStream gen(8, 0);
  const auto hv = make_embeddings(random_normal_matrix(6, 4, gen));
  const auto hq = make_embeddings(random_normal_matrix(2, 4, gen));
  const AlignmentGame ag = AlignmentGame::from_embeddings(hv, hq, {0, 0, 0, 1, 1, 1});
  const InteractionMatrix im = interaction_matrix(ag, 200, RngStream(3, 0));
  double total = 0.0;
  for (std::size_t x = 0; x < 6; ++x)
    for (std::size_t y = 0; y < 2; ++y) {
      const bool inc = ag.owner[x] == y;
      EXPECT_EQ(std::isinf(im.raw(x, y)), !inc);
      EXPECT_GE(im.normalized(x, y), 0.0);
      if (!inc) {
        EXPECT_EQ(im.normalized(x, y), 0.0);
      }
      total += im.normalized(x, y);
    }
  EXPECT_NEAR(total, 1.0, 1e-9);
  const InteractionMatrix again = interaction_matrix(ag, 200, RngStream(3, 0));
  EXPECT_EQ(im.raw, again.raw);
}

TEST(Axioms, RandomGamesSatisfyAll) {
  RngStream rng(9, 0);
  for (int t = 0; t < 20; ++t) {
    const Game g = random_table_game(1 + rng.uniform_index(6), rng);
    const AxiomReport rep = check_axioms(g, 3, rng);
    EXPECT_LT(rep.efficiency, 1e-9);
    EXPECT_LT(rep.dummy, 1e-9);
    EXPECT_LT(rep.symmetry, 1e-9);
    EXPECT_LT(rep.linearity, 1e-9);
  }
  EXPECT_THROW(check_axioms(random_table_game(11, rng), 1, rng), DomainError);
}

TEST(ShapleyValue, SampledWithinThreeStandardErrors) {
  RngStream gen(10, 0);
  const Game g = random_table_game(5, gen);
  const auto exact = shapley_values_exact(g);
  RngStream rng(10, 1);
  for (std::size_t i = 0; i < 5; ++i) {
    const Estimate e = shapley_value_sampled(g, i, 20000, rng);
    EXPECT_LT(std::abs(e.mean - exact[i]), 3.0 * e.std_error + 1e-12) << "player " << i;
  }
  const Game one = table_game(1, {0.0, 2.5});
  EXPECT_EQ(shapley_value_sampled(one, 0, 10, rng).mean, 2.5);
}
