#pragma once

// Training objectives over one mini-batch: grounding cross-entropy, vanilla
// InfoNCE, geodesic-guided contrastive loss and the Shapley soft-label
// alignment loss. Every term returns its value together with analytic
// gradients w.r.t. the query and moment rows of the batch.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "g2l/errors.hpp"
#include "g2l/game.hpp"
#include "g2l/geodesic.hpp"
#include "g2l/numcore.hpp"

namespace g2l {

// Queries and the moment blocks of every distinct video they come from.
// Moments of one video are contiguous. Inner products are taken on the rows
// as stored; callers pass unit-norm rows.
struct Batch {
  EmbeddingMatrix queries;
  EmbeddingMatrix moments;
  std::vector<std::size_t> targets;       // per query, row in `moments`
  std::vector<std::size_t> query_video;   // per query
  std::vector<std::size_t> moment_video;  // per moment

  std::size_t size() const { return queries.rows(); }

  void validate() const {
    if (queries.rows() == 0) throw DomainError("batch: need at least one query");
    if (queries.dim() != moments.dim()) throw DomainError("batch: query/moment dimension mismatch");
    if (targets.size() != queries.rows() || query_video.size() != queries.rows())
      throw DomainError("batch: per-query metadata length mismatch");
    if (moment_video.size() != moments.rows()) throw DomainError("batch: per-moment metadata length mismatch");
    std::map<std::size_t, std::size_t> per_video;
    for (std::size_t v : moment_video) ++per_video[v];
    for (const auto& [video, count] : per_video)
      if (count < 2) throw DomainError("batch: video " + std::to_string(video) + " has fewer than 2 moments");
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (targets[i] >= moments.rows()) throw DomainError("batch: target index out of range");
      if (moment_video[targets[i]] != query_video[i])
        throw DomainError("batch: target of query " + std::to_string(i) + " lies outside its video");
    }
  }

  std::vector<std::size_t> moments_of_video(std::size_t video) const {
    std::vector<std::size_t> rows;
    for (std::size_t j = 0; j < moment_video.size(); ++j)
      if (moment_video[j] == video) rows.push_back(j);
    return rows;
  }
};

// How the denominator of the geodesic contrastive loss is formed.
enum class DenominatorMode {
  literal,   // sum_j s_ij / tau
  tempered,  // sum_j exp(log s_ij / tau)
  plain,     // sum_j exp(q.m_j / tau); drops the geodesic weighting entirely
};

struct GclConfig {
  double temperature = 0.1;
  double grounding_temperature = 0.1;
  std::size_t topk = 4;
  std::size_t neighbors = 10;
  double g_cap = kDefaultGeodesicCap;
  std::size_t ssi_moments_per_query = 3;  // K
  std::size_t ssi_mc_samples = 100;
  DenominatorMode denominator = DenominatorMode::literal;
  bool negate_weight = false;

  void validate() const {
    if (!(temperature > 0.0)) throw DomainError("gcl config: temperature must be > 0");
    if (!(grounding_temperature > 0.0)) throw DomainError("gcl config: grounding temperature must be > 0");
    if (topk < 1) throw DomainError("gcl config: topk must be >= 1");
    if (neighbors < 1) throw DomainError("gcl config: neighbours must be >= 1");
    if (!(g_cap > 0.0)) throw DomainError("gcl config: g_cap must be > 0");
    if (ssi_moments_per_query < 1) throw DomainError("gcl config: K must be >= 1");
    if (ssi_mc_samples < 1) throw DomainError("gcl config: Monte-Carlo samples must be >= 1");
  }
};

struct LossPart {
  double value = 0.0;
  Matrix grad_queries;
  Matrix grad_moments;

  LossPart() = default;
  explicit LossPart(const Batch& b)
      : grad_queries(b.queries.rows(), b.queries.dim()), grad_moments(b.moments.rows(), b.moments.dim()) {}
};

struct LossBundle {
  double l_vg = 0.0;
  double l_vcl = 0.0;
  double l_gcl = 0.0;
  double l_ssi = 0.0;
  double l_total = 0.0;
  Matrix grad_queries;
  Matrix grad_moments;
};

namespace detail {

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline double log_sum_exp(std::span<const double> xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : xs) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : xs) s += std::exp(v - mx);
  return mx + std::log(s);
}

// Softmax weights of xs, computed alongside log_sum_exp.
inline std::vector<double> softmax_of(std::span<const double> xs) {
  std::vector<double> w(xs.begin(), xs.end());
  softmax_inplace(w);
  return w;
}

}  // namespace detail


// Cross-entropy of each query against the moments of its own video.
inline LossPart grounding_loss(const Batch& batch, double temperature) {
  if (!(temperature > 0.0)) throw DomainError("grounding_loss: temperature must be > 0");
  LossPart out(batch);
  std::vector<double> logits;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto q = batch.queries.row(i);
    const std::vector<std::size_t> rows = batch.moments_of_video(batch.query_video[i]);
    logits.resize(rows.size());
    std::size_t target_slot = 0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      logits[k] = dot(q, batch.moments.row(rows[k])) / temperature;
      if (rows[k] == batch.targets[i]) target_slot = k;
    }
    out.value += detail::log_sum_exp(logits) - logits[target_slot];
    const std::vector<double> p = detail::softmax_of(logits);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const double coef = (p[k] - (k == target_slot ? 1.0 : 0.0)) / temperature;
      detail::axpy(coef, batch.moments.row(rows[k]), out.grad_queries.row(i));
      detail::axpy(coef, q, out.grad_moments.row(rows[k]));
    }
  }
  return out;
}

// InfoNCE over every moment in the batch, target as the only positive.
inline LossPart vanilla_contrastive_loss(const Batch& batch, double temperature) {
  if (!(temperature > 0.0)) throw DomainError("vanilla_contrastive_loss: temperature must be > 0");
  LossPart out(batch);
  const std::size_t nm = batch.moments.rows();
  std::vector<double> logits(nm);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto q = batch.queries.row(i);
    for (std::size_t j = 0; j < nm; ++j) logits[j] = dot(q, batch.moments.row(j)) / temperature;
    const std::size_t t = batch.targets[i];
    out.value += detail::log_sum_exp(logits) - logits[t];
    const std::vector<double> p = detail::softmax_of(logits);
    for (std::size_t j = 0; j < nm; ++j) {
      const double coef = (p[j] - (j == t ? 1.0 : 0.0)) / temperature;
      detail::axpy(coef, batch.moments.row(j), out.grad_queries.row(i));
      detail::axpy(coef, q, out.grad_moments.row(j));
    }
  }
  return out;
}

// Node order by (unreachable last, geodesic distance, index).
inline std::vector<std::size_t> geodesic_order(const GeodesicTable& table) {
  std::vector<std::size_t> order(table.distances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (table.reachable[a] != table.reachable[b]) return static_cast<bool>(table.reachable[a]);
    return table.distances[a] < table.distances[b];
  });
  return order;
}

// The k moments geodesically closest to the table's source (the source first).
inline std::vector<std::size_t> select_semantic_positives(const GeodesicTable& table, std::size_t k) {
  if (k < 1 || k > table.distances.size())
    throw DomainError("select_semantic_positives: need 1 <= k <= node count");
  std::vector<std::size_t> order = geodesic_order(table);
  order.resize(k);
  return order;
}

// s(q, m) = exp((q.m) (m_hat.m) log(1/exp(g+1))), the log taken as -(g+1).
inline double geodesic_weighting(std::span<const double> q, std::span<const double> target,
                                 std::span<const double> m, double g) {
  if (!(g >= 0.0)) throw DomainError("geodesic_weighting: distance must be >= 0");
  return std::exp(dot(q, m) * dot(target, m) * -(g + 1.0));
}

// Positives come from each query's geodesic table; tables[i] must be sourced
// at targets[i] over the batch-wide moment graph. Distances and the positive
// sets are constants for differentiation.
inline LossPart geodesic_contrastive_loss(const Batch& batch, std::span<const GeodesicTable> tables,
                                          const GclConfig& cfg) {
  const double tau = cfg.temperature;
  if (!(tau > 0.0)) throw DomainError("geodesic_contrastive_loss: temperature must be > 0");
  if (tables.size() != batch.size()) throw DomainError("geodesic_contrastive_loss: need one table per query");
  const std::size_t nm = batch.moments.rows();
  const double sign = cfg.negate_weight ? 1.0 : -1.0;
  LossPart out(batch);

  std::vector<double> pos_logits;
  std::vector<double> log_c(nm);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const GeodesicTable& table = tables[i];
    const std::size_t t = batch.targets[i];
    if (table.source != t || table.distances.size() != nm)
      throw DomainError("geodesic_contrastive_loss: table " + std::to_string(i) + " not sourced at its target");
    const auto q = batch.queries.row(i);
    const auto target = batch.moments.row(t);
    auto gq = out.grad_queries.row(i);

    // Numerator: -log sum_{p in P} exp(q.p / tau).
    const std::vector<std::size_t> positives = select_semantic_positives(table, std::min(cfg.topk, nm));
    pos_logits.resize(positives.size());
    for (std::size_t k = 0; k < positives.size(); ++k)
      pos_logits[k] = dot(q, batch.moments.row(positives[k])) / tau;
    out.value -= detail::log_sum_exp(pos_logits);
    const std::vector<double> w = detail::softmax_of(pos_logits);
    for (std::size_t k = 0; k < positives.size(); ++k) {
      detail::axpy(-w[k] / tau, batch.moments.row(positives[k]), gq);
      detail::axpy(-w[k] / tau, q, out.grad_moments.row(positives[k]));
    }

    // Denominator: +log sum_j c_j.
    for (std::size_t j = 0; j < nm; ++j) {
      const auto m = batch.moments.row(j);
      switch (cfg.denominator) {
        case DenominatorMode::plain:
          log_c[j] = dot(q, m) / tau;
          break;
        case DenominatorMode::literal:
          log_c[j] = sign * (table.distances[j] + 1.0) * dot(q, m) * dot(target, m) - std::log(tau);
          break;
        case DenominatorMode::tempered:
          log_c[j] = sign * (table.distances[j] + 1.0) * dot(q, m) * dot(target, m) / tau;
          break;
      }
    }
    out.value += detail::log_sum_exp(log_c);
    const std::vector<double> r = detail::softmax_of(log_c);
    for (std::size_t j = 0; j < nm; ++j) {
      const auto m = batch.moments.row(j);
      if (cfg.denominator == DenominatorMode::plain) {
        detail::axpy(r[j] / tau, m, gq);
        detail::axpy(r[j] / tau, q, out.grad_moments.row(j));
        continue;
      }
      const double scale = cfg.denominator == DenominatorMode::tempered ? 1.0 / tau : 1.0;
      const double gamma = sign * (table.distances[j] + 1.0) * r[j] * scale;
      const double a = dot(q, m);
      const double b = dot(target, m);
      detail::axpy(gamma * b, m, gq);
      detail::axpy(gamma * b, q, out.grad_moments.row(j));
      detail::axpy(gamma * a, target, out.grad_moments.row(j));
      detail::axpy(gamma * a, m, out.grad_moments.row(t));
    }
  }
  return out;
}

// One video's alignment game: K geodesic positives per query of that video
// present in the batch, with their Shapley soft labels.
struct SsiGroup {
  std::size_t video = 0;
  std::vector<std::size_t> moment_rows;  // batch moment row per moment player
  std::vector<std::size_t> query_rows;   // batch query row per query player
  std::vector<std::size_t> owner;        // local query index each moment player was sampled for
  InteractionMatrix interactions;
};

// -sum_groups 1/(N_v N_q) sum_{included x,y} I'_xy log softmax_y(a_x.)_y
// with I' held constant.
inline LossPart ssi_loss(const Batch& batch, std::span<const SsiGroup> groups) {
  LossPart out(batch);
  for (const SsiGroup& g : groups) {
    const std::size_t nv = g.moment_rows.size();
    const std::size_t nq = g.query_rows.size();
    const Matrix& soft = g.interactions.normalized;
    if (soft.rows() != nv || soft.cols() != nq) throw DomainError("ssi_loss: interaction shape mismatch");
    const double norm_factor = 1.0 / static_cast<double>(nv * nq);
    std::vector<double> row(nq);
    for (std::size_t x = 0; x < nv; ++x) {
      const auto hv = batch.moments.row(g.moment_rows[x]);
      for (std::size_t y = 0; y < nq; ++y) row[y] = dot(hv, batch.queries.row(g.query_rows[y]));
      const double lse = detail::log_sum_exp(row);
      double label_mass = 0.0;
      for (std::size_t y = 0; y < nq; ++y) {
        const double label = soft(x, y);
        if (label == 0.0) continue;
        out.value -= norm_factor * label * (row[y] - lse);
        label_mass += label;
      }
      for (std::size_t y = 0; y < nq; ++y) {
        const double prob = std::exp(row[y] - lse);
        const double coef = norm_factor * (label_mass * prob - soft(x, y));
        detail::axpy(coef, batch.queries.row(g.query_rows[y]), out.grad_moments.row(g.moment_rows[x]));
        detail::axpy(coef, hv, out.grad_queries.row(g.query_rows[y]));
      }
    }
  }
  return out;
}

enum class Mode { baseline, g2l };

// Which terms enter the total; built from a mode plus ablation switches.
struct LossTerms {
  bool vg = true;
  bool vcl = false;
  bool gcl = true;
  bool ssi = true;

  static LossTerms for_mode(Mode mode) {
    return mode == Mode::baseline ? LossTerms{true, true, false, false} : LossTerms{true, false, true, true};
  }
  bool needs_geometry() const { return gcl || ssi; }
};

// Per-step constants: geodesic tables from each target and SSI soft labels.
struct GeometryContext {
  std::vector<GeodesicTable> tables;
  std::vector<SsiGroup> groups;
};

inline std::vector<SsiGroup> build_ssi_groups(const Batch& batch, std::span<const GeodesicTable> tables,
                                              const GclConfig& cfg, const RngStream& rng) {
  std::map<std::size_t, std::vector<std::size_t>> queries_by_video;
  for (std::size_t i = 0; i < batch.size(); ++i) queries_by_video[batch.query_video[i]].push_back(i);

  std::vector<SsiGroup> groups;
  for (const auto& [video, qrows] : queries_by_video) {
    SsiGroup g;
    g.video = video;
    g.query_rows = qrows;
    const std::size_t video_moments = batch.moments_of_video(video).size();
    const std::size_t k = std::min(cfg.ssi_moments_per_query, video_moments);
    for (std::size_t local = 0; local < qrows.size(); ++local) {
      std::size_t taken = 0;
      for (std::size_t node : geodesic_order(tables[qrows[local]])) {
        if (batch.moment_video[node] != video) continue;
        g.moment_rows.push_back(node);
        g.owner.push_back(local);
        if (++taken == k) break;
      }
    }
    if (g.moment_rows.size() + g.query_rows.size() > 64)
      throw CapacityError("ssi: alignment game for video " + std::to_string(video) + " exceeds 64 players");

    EmbeddingMatrix hv{Matrix(g.moment_rows.size(), batch.moments.dim()), true};
    EmbeddingMatrix hq{Matrix(g.query_rows.size(), batch.queries.dim()), true};
    for (std::size_t x = 0; x < g.moment_rows.size(); ++x)
      std::ranges::copy(batch.moments.row(g.moment_rows[x]), hv.values.row(x).begin());
    for (std::size_t y = 0; y < g.query_rows.size(); ++y)
      std::ranges::copy(batch.queries.row(g.query_rows[y]), hq.values.row(y).begin());
    const AlignmentGame game = AlignmentGame::from_embeddings(hv, hq, g.owner);
    g.interactions = interaction_matrix(game, cfg.ssi_mc_samples, rng.derive(video));
    groups.push_back(std::move(g));
  }
  return groups;
}

inline GeometryContext prepare_geometry(const Batch& batch, const GclConfig& cfg, const LossTerms& terms,
                                        const RngStream& rng) {
  GeometryContext ctx;
  if (!terms.needs_geometry()) return ctx;
  const std::size_t n = std::min(cfg.neighbors, batch.moments.rows() - 1);
  const MomentGraph graph = build_knn_graph(batch.moments, n);
  ctx.tables.reserve(batch.size());
  for (std::size_t t : batch.targets) ctx.tables.push_back(dijkstra(graph, t, cfg.g_cap));
  if (terms.ssi) ctx.groups = build_ssi_groups(batch, ctx.tables, cfg, rng);
  return ctx;
}

// Sum of the enabled terms with geometry held fixed.
inline LossBundle evaluate_losses(const Batch& batch, const GeometryContext& ctx, const GclConfig& cfg,
                                  const LossTerms& terms) {
  LossBundle out;
  out.grad_queries = Matrix(batch.queries.rows(), batch.queries.dim());
  out.grad_moments = Matrix(batch.moments.rows(), batch.moments.dim());
  auto add = [&](const LossPart& part, double& slot) {
    slot = part.value;
    out.grad_queries += part.grad_queries;
    out.grad_moments += part.grad_moments;
  };
  if (terms.vg) add(grounding_loss(batch, cfg.grounding_temperature), out.l_vg);
  if (terms.vcl) add(vanilla_contrastive_loss(batch, cfg.temperature), out.l_vcl);
  if (terms.gcl) add(geodesic_contrastive_loss(batch, ctx.tables, cfg), out.l_gcl);
  if (terms.ssi) add(ssi_loss(batch, ctx.groups), out.l_ssi);
  out.l_total = out.l_vg + out.l_vcl + out.l_gcl + out.l_ssi;
  return out;
}

inline LossBundle total_loss(const Batch& batch, const GclConfig& cfg, const LossTerms& terms,
                             const RngStream& rng) {
  batch.validate();
  cfg.validate();
  return evaluate_losses(batch, prepare_geometry(batch, cfg, terms, rng), cfg, terms);
}

inline LossBundle total_loss(const Batch& batch, const GclConfig& cfg, Mode mode, const RngStream& rng) {
  return total_loss(batch, cfg, LossTerms::for_mode(mode), rng);
}

}  // namespace g2l
