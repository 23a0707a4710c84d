#pragma once

// Cooperative games over at most 64 players, coalitions as bitmasks.
// Exact Shapley values / interactions by enumeration, the moment-query
// alignment game score, and the sampled pairwise interaction estimator.

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "g2l/errors.hpp"
#include "g2l/numcore.hpp"
#include "g2l/parallel.hpp"

namespace g2l {

using Coalition = std::uint64_t;

inline constexpr std::size_t kMaxExactPlayers = 20;

inline constexpr Coalition player_bit(std::size_t i) { return Coalition{1} << i; }
inline constexpr Coalition full_coalition(std::size_t n) {
  return n >= 64 ? ~Coalition{0} : player_bit(n) - 1;
}

struct Game {
  std::size_t players = 0;
  std::function<double(Coalition)> score;

  double operator()(Coalition u) const { return score(u); }
};

// Game given by an explicit table indexed by coalition bitmask.
inline Game table_game(std::size_t players, std::vector<double> values) {
  if (values.size() != (std::size_t{1} << players))
    throw DomainError("table_game: need 2^players values");
  auto table = std::make_shared<const std::vector<double>>(std::move(values));
  return Game{players, [table](Coalition u) { return (*table)[u]; }};
}

inline Game random_table_game(std::size_t players, RngStream& rng) {
  std::vector<double> values(std::size_t{1} << players);
  for (double& v : values) v = 2.0 * rng.uniform() - 1.0;
  return table_game(players, std::move(values));
}

inline std::vector<double> tabulate(const Game& game) {
  std::vector<double> out(std::size_t{1} << game.players);
  for (Coalition u = 0; u < out.size(); ++u) out[u] = game(u);
  return out;
}

inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

// |U|! (|N| - |U| - 1)! / |N|!  ==  1 / (|N| * C(|N|-1, |U|))
inline double coalition_weight(std::size_t u_size, std::size_t n_players) {
  if (n_players == 0 || u_size >= n_players)
    throw DomainError("coalition_weight: need coalition size < player count");
  return 1.0 / (static_cast<double>(n_players) * binomial(n_players - 1, u_size));
}

inline void require_exact_bound(std::size_t players, const char* who) {
  if (players > kMaxExactPlayers)
    throw CapacityError(std::string(who) + ": " + std::to_string(players) +
                        " players exceeds exact enumeration bound of " +
                        std::to_string(kMaxExactPlayers) + "; use the sampled estimator");
}

inline double shapley_value_exact(const Game& game, std::size_t player) {
  require_exact_bound(game.players, "shapley_value_exact");
  if (player >= game.players) throw DomainError("shapley_value_exact: player out of range");
  const Coalition all = full_coalition(game.players);
  const Coalition others = all & ~player_bit(player);
  const Coalition me = player_bit(player);
  double phi = 0.0;
  // Enumerate every submask of `others`, including the empty one.
  Coalition u = others;
  while (true) {
    phi += coalition_weight(static_cast<std::size_t>(std::popcount(u)), game.players) *
           (game(u | me) - game(u));
    if (u == 0) break;
    u = (u - 1) & others;
  }
  return phi;
}

// All Shapley values from one tabulation of the game.
inline std::vector<double> shapley_values_exact(const Game& game) {
  require_exact_bound(game.players, "shapley_values_exact");
  const std::size_t n = game.players;
  const std::vector<double> v = tabulate(game);
  std::vector<double> weight(n);
  for (std::size_t s = 0; s < n; ++s) weight[s] = coalition_weight(s, n);
  std::vector<double> phi(n, 0.0);
  for (Coalition u = 0; u < v.size(); ++u) {
    const auto size = static_cast<std::size_t>(std::popcount(u));
    for (std::size_t i = 0; i < n; ++i) {
      if (u & player_bit(i)) continue;
      phi[i] += weight[size] * (v[u | player_bit(i)] - v[u]);
    }
  }
  return phi;
}

// Game on `members` (original player indices) plus an optional merged
// player, which stands for all of `merged` at once. Reduced-game player k
// maps to members[k]; the merged player, if any, is last.
inline Game subgame(const Game& game, std::vector<std::size_t> members, Coalition merged) {
  const std::size_t count = members.size() + (merged ? 1 : 0);
  return Game{count, [&game, members = std::move(members), merged](Coalition u) {
                Coalition orig = 0;
                for (std::size_t k = 0; k < members.size(); ++k)
                  if (u & player_bit(k)) orig |= player_bit(members[k]);
                if (merged && (u & player_bit(members.size()))) orig |= merged;
                return game(orig);
              }};
}

// I([S]) = phi([S] | N\S + [S]) - sum_{i in S} phi(i | N\S + i)
inline double shapley_interaction_exact(const Game& game, Coalition coalition) {
  const Coalition all = full_coalition(game.players);
  if (coalition == 0 || (coalition & ~all))
    throw DomainError("shapley_interaction_exact: coalition must be a nonempty subset of players");
  std::vector<std::size_t> rest;
  std::vector<std::size_t> inside;
  for (std::size_t i = 0; i < game.players; ++i)
    (coalition & player_bit(i) ? inside : rest).push_back(i);
  require_exact_bound(rest.size() + 1, "shapley_interaction_exact");

  const std::size_t merged_slot = rest.size();
  double result = shapley_value_exact(subgame(game, rest, coalition), merged_slot);
  for (std::size_t i : inside) result -= shapley_value_exact(subgame(game, rest, player_bit(i)), merged_slot);
  return result;
}

// E_C E_{|U|=C} [f(U+i+j) - f(U+i) - f(U+j) + f(U)] by full enumeration,
// C uniform on {0..n-2} and U uniform among subsets of N\{i,j} of size C.
inline double pair_interaction_expectation_exact(const Game& game, std::size_t i, std::size_t j) {
  const std::size_t n = game.players;
  if (i >= n || j >= n || i == j) throw DomainError("pair interaction: need two distinct players");
  require_exact_bound(n, "pair_interaction_expectation_exact");
  const Coalition bi = player_bit(i);
  const Coalition bj = player_bit(j);
  const Coalition others = full_coalition(n) & ~bi & ~bj;
  const double sizes = static_cast<double>(n - 1);
  double total = 0.0;
  Coalition u = others;
  while (true) {
    const auto c = static_cast<std::size_t>(std::popcount(u));
    const double w = 1.0 / (sizes * binomial(n - 2, c));
    total += w * (game(u | bi | bj) - game(u | bi) - game(u | bj) + game(u));
    if (u == 0) break;
    u = (u - 1) & others;
  }
  return total;
}

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

// Monte-Carlo version of pair_interaction_expectation_exact.
inline Estimate pair_interaction_sampled(const Game& game, std::size_t i, std::size_t j,
                                         std::size_t samples, RngStream& rng) {
  const std::size_t n = game.players;
  if (samples == 0) throw DomainError("sampled interaction: samples must be >= 1");
  if (i >= n || j >= n || i == j) throw DomainError("pair interaction: need two distinct players");
  const Coalition bi = player_bit(i);
  const Coalition bj = player_bit(j);
  std::vector<std::size_t> pool;
  for (std::size_t p = 0; p < n; ++p)
    if (p != i && p != j) pool.push_back(p);

  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t c = static_cast<std::size_t>(rng.uniform_index(n - 1));
    Coalition u = 0;
    for (std::size_t k = 0; k < c; ++k) {
      const std::size_t pick = k + static_cast<std::size_t>(rng.uniform_index(pool.size() - k));
      std::swap(pool[k], pool[pick]);
      u |= player_bit(pool[k]);
    }
    const double delta = game(u | bi | bj) - game(u | bi) - game(u | bj) + game(u);
    const double d = delta - mean;
    mean += d / static_cast<double>(s + 1);
    m2 += d * (delta - mean);
  }
  Estimate est;
  est.mean = mean;
  est.samples = samples;
  est.std_error = samples > 1 ? std::sqrt(m2 / static_cast<double>(samples - 1) / static_cast<double>(samples)) : 0.0;
  return est;
}

// phi_i as E[f(U + i) - f(U)] with |U| uniform on {0..n-1} and U uniform of
// that size among the other players.
inline Estimate shapley_value_sampled(const Game& game, std::size_t i, std::size_t samples, RngStream& rng) {
  const std::size_t n = game.players;
  if (samples == 0) throw DomainError("sampled shapley value: samples must be >= 1");
  if (i >= n) throw DomainError("shapley value: player " + std::to_string(i) + " out of range");
  std::vector<std::size_t> pool;
  for (std::size_t p = 0; p < n; ++p)
    if (p != i) pool.push_back(p);

  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t c = static_cast<std::size_t>(rng.uniform_index(n));
    Coalition u = 0;
    for (std::size_t k = 0; k < c; ++k) {
      const std::size_t pick = k + static_cast<std::size_t>(rng.uniform_index(pool.size() - k));
      std::swap(pool[k], pool[pick]);
      u |= player_bit(pool[k]);
    }
    const double delta = game(u | player_bit(i)) - game(u);
    const double d = delta - mean;
    mean += d / static_cast<double>(s + 1);
    m2 += d * (delta - mean);
  }
  Estimate est;
  est.mean = mean;
  est.samples = samples;
  est.std_error = samples > 1 ? std::sqrt(m2 / static_cast<double>(samples - 1) / static_cast<double>(samples)) : 0.0;
  return est;
}

// Moments (rows of `scores`) and queries (columns) as players. Player x in
// [0, N_v) is moment x; player N_v + y is query y.
struct AlignmentGame {
  Matrix scores;                   // a_xy = h^V_x . h^Q_y
  std::vector<std::size_t> owner;  // query each moment slot was sampled for; empty = all pairs

  std::size_t moment_count() const { return scores.rows(); }
  std::size_t query_count() const { return scores.cols(); }
  std::size_t players() const { return moment_count() + query_count(); }
  std::size_t query_player(std::size_t y) const { return moment_count() + y; }

  bool included(std::size_t x, std::size_t y) const { return owner.empty() || owner[x] == y; }

  static AlignmentGame from_embeddings(const EmbeddingMatrix& moments, const EmbeddingMatrix& queries,
                                       std::vector<std::size_t> owner = {}) {
    if (moments.dim() != queries.dim()) throw DomainError("AlignmentGame: dimension mismatch");
    AlignmentGame ag;
    ag.scores = Matrix(moments.rows(), queries.rows());
    for (std::size_t x = 0; x < moments.rows(); ++x)
      for (std::size_t y = 0; y < queries.rows(); ++y) ag.scores(x, y) = dot(moments.row(x), queries.row(y));
    if (!owner.empty()) {
      if (owner.size() != moments.rows()) throw DomainError("AlignmentGame: owner size mismatch");
      if (queries.rows() == 0 || moments.rows() % queries.rows() != 0)
        throw DomainError("AlignmentGame: moment count must be K x query count");
      for (std::size_t y : owner)
        if (y >= queries.rows()) throw DomainError("AlignmentGame: owner out of range");
    }
    ag.owner = std::move(owner);
    return ag;
  }
};

// psi = (psi1 + psi2) / 2 over the active players; 0 when a modality is absent.
inline double psi_game_score(const AlignmentGame& ag, Coalition active) {
  const std::size_t nv = ag.moment_count();
  const std::size_t nq = ag.query_count();
  std::vector<std::size_t> xs;
  std::vector<std::size_t> ys;
  for (std::size_t x = 0; x < nv; ++x)
    if (active & player_bit(x)) xs.push_back(x);
  for (std::size_t y = 0; y < nq; ++y)
    if (active & player_bit(nv + y)) ys.push_back(y);
  if (xs.empty() || ys.empty()) return 0.0;

  std::vector<double> buf;
  double psi1 = 0.0;
  buf.resize(ys.size());
  for (std::size_t x : xs) {
    for (std::size_t k = 0; k < ys.size(); ++k) buf[k] = ag.scores(x, ys[k]);
    softmax_inplace(buf);
    psi1 += *std::max_element(buf.begin(), buf.end());
  }
  psi1 /= static_cast<double>(xs.size());

  double psi2 = 0.0;
  buf.resize(xs.size());
  for (std::size_t y : ys) {
    for (std::size_t k = 0; k < xs.size(); ++k) buf[k] = ag.scores(xs[k], y);
    softmax_inplace(buf);
    psi2 += *std::max_element(buf.begin(), buf.end());
  }
  psi2 /= static_cast<double>(ys.size());
  return 0.5 * (psi1 + psi2);
}

inline Game as_game(const AlignmentGame& ag) {
  if (ag.players() > 64) throw CapacityError("alignment game exceeds 64 players");
  return Game{ag.players(), [&ag](Coalition u) { return psi_game_score(ag, u); }};
}

inline Estimate semantic_interaction_estimate(const AlignmentGame& ag, std::size_t x, std::size_t y,
                                              std::size_t samples, RngStream& rng) {
  if (x >= ag.moment_count() || y >= ag.query_count())
    throw DomainError("semantic interaction: moment/query index out of range");
  return pair_interaction_sampled(as_game(ag), x, ag.query_player(y), samples, rng);
}

inline double semantic_interaction_sampled(const AlignmentGame& ag, std::size_t x, std::size_t y,
                                           std::size_t samples, RngStream& rng) {
  return semantic_interaction_estimate(ag, x, y, samples, rng).mean;
}

struct InteractionMatrix {
  Matrix raw;         // -inf where the pair is excluded
  Matrix normalized;  // softmax over included pairs; 0 elsewhere
};

inline InteractionMatrix normalize_interactions(Matrix raw) {
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  InteractionMatrix im{raw, Matrix(raw.rows(), raw.cols())};
  double mx = ninf;
  for (double v : raw.data()) mx = std::max(mx, v);
  if (mx == ninf) return im;
  double total = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = raw.data()[i];
    const double e = v == ninf ? 0.0 : std::exp(v - mx);
    im.normalized.data()[i] = e;
    total += e;
  }
  for (double& v : im.normalized.data()) v /= total;
  return im;
}

// Per-pair estimates use stream rng.derive(x * N_q + y).
inline InteractionMatrix interaction_matrix(const AlignmentGame& ag, std::size_t samples,
                                            const RngStream& rng) {
  if (samples == 0) throw DomainError("interaction_matrix: samples must be >= 1");
  const std::size_t nv = ag.moment_count();
  const std::size_t nq = ag.query_count();
  Matrix raw(nv, nq, -std::numeric_limits<double>::infinity());
  parallel_for(nv * nq, [&](std::size_t idx) {
    const std::size_t x = idx / nq;
    const std::size_t y = idx % nq;
    if (!ag.included(x, y)) return;
    RngStream stream = rng.derive(x * nq + y);
    raw(x, y) = semantic_interaction_sampled(ag, x, y, samples, stream);
  });
  return normalize_interactions(std::move(raw));
}

struct AxiomReport {
  double efficiency = 0.0;
  double dummy = 0.0;
  double symmetry = 0.0;
  double linearity = 0.0;

  double worst() const { return std::max({efficiency, dummy, symmetry, linearity}); }
};

inline double efficiency_residual(const Game& game) {
  const std::vector<double> phi = shapley_values_exact(game);
  double sum = 0.0;
  for (double p : phi) sum += p;
  return std::abs(sum - (game(full_coalition(game.players)) - game(0)));
}

// Maximum violation of each Shapley axiom over `trials` constructed games
// derived from `game`.
inline AxiomReport check_axioms(const Game& game, std::size_t trials, RngStream& rng) {
  const std::size_t n = game.players;
  if (n == 0 || n > 10) throw DomainError("check_axioms: need 1..10 players");
  AxiomReport rep;
  rep.efficiency = efficiency_residual(game);
  const std::vector<double> phi_f = shapley_values_exact(game);

  for (std::size_t t = 0; t < trials; ++t) {
    // Dummy: extra player adding a fixed amount to every coalition.
    const double c = 2.0 * rng.uniform() - 1.0;
    const Coalition dummy = player_bit(n);
    const Game with_dummy{n + 1, [&game, c, dummy](Coalition u) {
                            return game(u & ~dummy) + ((u & dummy) ? c : 0.0);
                          }};
    const double standalone = with_dummy(dummy) - with_dummy(0);
    rep.dummy = std::max(rep.dummy, std::abs(shapley_value_exact(with_dummy, n) - standalone));
    rep.efficiency = std::max(rep.efficiency, efficiency_residual(with_dummy));

    // Symmetry: f(U) + f(swap_pq(U)) makes p and q interchangeable.
    if (n >= 2) {
      const std::size_t p = static_cast<std::size_t>(rng.uniform_index(n));
      std::size_t q = static_cast<std::size_t>(rng.uniform_index(n - 1));
      if (q >= p) ++q;
      const Coalition bp = player_bit(p);
      const Coalition bq = player_bit(q);
      const Game sym{n, [&game, bp, bq](Coalition u) {
                       Coalition s = u & ~(bp | bq);
                       if (u & bp) s |= bq;
                       if (u & bq) s |= bp;
                       return game(u) + game(s);
                     }};
      const std::vector<double> phi = shapley_values_exact(sym);
      rep.symmetry = std::max(rep.symmetry, std::abs(phi[p] - phi[q]));
    }

    // Linearity against a random table game.
    const Game v = random_table_game(n, rng);
    const Game w{n, [&game, &v](Coalition u) { return game(u) + v(u); }};
    const std::vector<double> phi_v = shapley_values_exact(v);
    const std::vector<double> phi_w = shapley_values_exact(w);
    for (std::size_t i = 0; i < n; ++i)
      rep.linearity = std::max(rep.linearity, std::abs(phi_w[i] - phi_f[i] - phi_v[i]));
  }
  return rep;
}

}  // namespace g2l
