#pragma once

// Toy dual encoder trained with the baseline or G2L objective on a
// SynthDataset, plus the alignment / uniformity / R@n diagnostics.
//
// Checkpoint layout:
//   "G2LE1" | u64 input | u64 hidden | u64 output | f64 LE weights
//   (video w1, video w2, query w1, query w2; w2 absent when hidden == 0)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "g2l/errors.hpp"
#include "g2l/losses.hpp"
#include "g2l/numcore.hpp"
#include "g2l/synthdata.hpp"
#include "json.hpp"

namespace g2l {

// One modality: x -> [tanh(x w1)] w2, or x -> x w1 without a hidden layer.
struct Tower {
  Matrix w1;
  Matrix w2;

  bool has_hidden() const { return w2.size() > 0; }
  bool operator==(const Tower&) const = default;
};

struct Encoder {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;  // 0: single linear map
  std::size_t output_dim = 0;
  Tower video;
  Tower query;

  static Encoder random(std::size_t input, std::size_t hidden, std::size_t output, RngStream& rng) {
    if (input < 1 || output < 1) throw DomainError("encoder: dimensions must be >= 1");
    Encoder e;
    e.input_dim = input;
    e.hidden_dim = hidden;
    e.output_dim = output;
    for (Tower* t : {&e.video, &e.query}) {
      if (hidden == 0) {
        t->w1 = random_normal_matrix(input, output, rng, 1.0 / std::sqrt(static_cast<double>(input)));
      } else {
        t->w1 = random_normal_matrix(input, hidden, rng, 1.0 / std::sqrt(static_cast<double>(input)));
        t->w2 = random_normal_matrix(hidden, output, rng, 1.0 / std::sqrt(static_cast<double>(hidden)));
      }
    }
    return e;
  }

  // Same shapes, all zeros; used as the gradient accumulator.
  Encoder zeros_like() const {
    Encoder z = *this;
    for (Matrix* m : z.parameters()) std::ranges::fill(m->data(), 0.0);
    return z;
  }

  std::vector<Matrix*> parameters() {
    std::vector<Matrix*> p{&video.w1};
    if (video.has_hidden()) p.push_back(&video.w2);
    p.push_back(&query.w1);
    if (query.has_hidden()) p.push_back(&query.w2);
    return p;
  }
  std::vector<const Matrix*> parameters() const {
    std::vector<const Matrix*> p;
    for (Matrix* m : const_cast<Encoder*>(this)->parameters()) p.push_back(m);
    return p;
  }

  bool finite() const {
    for (const Matrix* m : parameters())
      for (double v : m->data())
        if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const Encoder&) const = default;
};

// Forward pass of one tower over a set of input rows, keeping what backward needs.
struct TowerPass {
  Matrix inputs;
  Matrix hidden;  // tanh activations, empty without a hidden layer
  Matrix output;  // unit rows
  std::vector<double> lengths;
};

namespace detail {

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

// out += a^T b
inline void add_at_b(const Matrix& a, const Matrix& b, Matrix& out) {
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ari = a(r, i);
      if (ari == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += ari * b(r, j);
    }
}

// a b^T
inline Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(a.row(i), b.row(j));
  return c;
}

inline Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) std::ranges::copy(m.row(rows[i]), out.row(i).begin());
  return out;
}

}  // namespace detail

inline TowerPass tower_forward(const Tower& t, Matrix inputs) {
  TowerPass p;
  p.inputs = std::move(inputs);
  Matrix y = detail::matmul(p.inputs, t.w1);
  if (t.has_hidden()) {
    for (double& v : y.data()) v = std::tanh(v);
    p.hidden = std::move(y);
    y = detail::matmul(p.hidden, t.w2);
  }
  p.lengths.resize(y.rows());
  for (std::size_t r = 0; r < y.rows(); ++r) {
    const double n = norm(y.row(r));
    if (!(n > kMinRowNorm) || !std::isfinite(n))
      throw DomainError("encoder: output row " + std::to_string(r) + " has degenerate norm");
    p.lengths[r] = n;
    for (double& v : y.row(r)) v /= n;
  }
  p.output = std::move(y);
  return p;
}

// Accumulates d(loss)/d(weights) into `grad` given d(loss)/d(unit outputs).
inline void tower_backward(const Tower& t, const TowerPass& p, const Matrix& upstream, Tower& grad) {
  Matrix dy(upstream.rows(), upstream.cols());
  for (std::size_t r = 0; r < upstream.rows(); ++r)
    normalize_backward(p.output.row(r), p.lengths[r], upstream.row(r), dy.row(r));
  if (!t.has_hidden()) {
    detail::add_at_b(p.inputs, dy, grad.w1);
    return;
  }
  detail::add_at_b(p.hidden, dy, grad.w2);
  Matrix dh = detail::matmul_bt(dy, t.w2);
  for (std::size_t i = 0; i < dh.size(); ++i) {
    const double h = p.hidden.data()[i];
    dh.data()[i] *= 1.0 - h * h;
  }
  detail::add_at_b(p.inputs, dh, grad.w1);
}

struct EncodedDataset {
  EmbeddingMatrix moments;
  EmbeddingMatrix queries;
};

inline void check_encoder_fits(const Encoder& enc, const SynthDataset& ds) {
  if (enc.input_dim != ds.dim())
    throw DomainError("encoder input dim " + std::to_string(enc.input_dim) + " does not match dataset dim " +
                      std::to_string(ds.dim()));
}

inline EncodedDataset encode_dataset(const Encoder& enc, const SynthDataset& ds) {
  check_encoder_fits(enc, ds);
  return {EmbeddingMatrix{tower_forward(enc.video, ds.moments.values).output, true},
          EmbeddingMatrix{tower_forward(enc.query, ds.queries.values).output, true}};
}

// ---------------------------------------------------------------- metrics

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Mean squared distance between positive pairs.
inline double alignment_metric(const EmbeddingMatrix& queries, const EmbeddingMatrix& targets) {
  if (queries.rows() == 0 || queries.rows() != targets.rows() || queries.dim() != targets.dim())
    throw DomainError("alignment_metric: need equally shaped, nonempty pair lists");
  std::vector<double> d(queries.rows());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = squared_distance(queries.row(i), targets.row(i));
  return pairwise_sum(d) / static_cast<double>(d.size());
}

// log mean over unordered pairs of exp(-2 |zi - zj|^2)
inline double uniformity_metric(const EmbeddingMatrix& points) {
  const std::size_t n = points.rows();
  if (n < 2) throw DomainError("uniformity_metric: need at least 2 points");
  std::vector<double> e;
  e.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) e.push_back(-2.0 * squared_distance(points.row(i), points.row(j)));
  return detail::log_sum_exp(e) - std::log(static_cast<double>(e.size()));
}

// Fraction of queries whose target ranks in the top n of its own video.
inline double recall_at_n(const EncodedDataset& enc, const SynthDataset& ds, std::size_t n) {
  if (n < 1) throw DomainError("recall_at_n: n must be >= 1");
  if (ds.query_count() == 0) return 0.0;
  const std::size_t nm = ds.moments_per_video();
  std::size_t hits = 0;
  for (std::size_t q = 0; q < ds.query_count(); ++q) {
    const std::size_t base = ds.query_video[q] * nm;
    const std::size_t target = ds.query_target[q] - base;
    const double st = dot(enc.queries.row(q), enc.moments.row(ds.query_target[q]));
    // Rank = moments strictly better, plus equal ones at a lower index.
    std::size_t ahead = 0;
    for (std::size_t k = 0; k < nm; ++k) {
      const double s = dot(enc.queries.row(q), enc.moments.row(base + k));
      if (s > st || (s == st && k < target)) ++ahead;
    }
    hits += ahead < n;
  }
  return static_cast<double>(hits) / static_cast<double>(ds.query_count());
}

inline double recall_at_n(const Encoder& enc, const SynthDataset& ds, std::size_t n) {
  return recall_at_n(encode_dataset(enc, ds), ds, n);
}

struct EvalMetrics {
  double r1 = 0.0;
  double r5 = 0.0;
  double alignment = 0.0;
  double uniformity = 0.0;
};

// Alignment over (query, target) pairs; uniformity over the encoded moments.
inline EvalMetrics evaluate(const Encoder& enc, const SynthDataset& ds) {
  const EncodedDataset e = encode_dataset(enc, ds);
  EvalMetrics m;
  m.r1 = recall_at_n(e, ds, 1);
  m.r5 = recall_at_n(e, ds, 5);
  EmbeddingMatrix targets{detail::gather_rows(e.moments.values, ds.query_target), true};
  m.alignment = alignment_metric(e.queries, targets);
  m.uniformity = uniformity_metric(e.moments);
  return m;
}

// ---------------------------------------------------------------- config

enum class OptimizerKind { sgd, adam };

// Table-4 style switches. sa: positives reduced to the target (k = 1);
// su: weighting replaced by exp(q.m / tau); vcl: drop L_VCL from baseline.
struct Ablation {
  bool vcl = false;
  bool gcl = false;
  bool ssi = false;
  bool sa = false;
  bool su = false;

  bool operator==(const Ablation&) const = default;
};

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Mode mode = Mode::g2l;
  GclConfig gcl;
  std::uint64_t seed = 0;
  std::size_t hidden_dim = 0;
  std::size_t output_dim = 0;  // 0: same as the data
  std::size_t warmup_epochs = 0;
  Ablation ablate;
  bool record_time = false;

  static double default_learning_rate(OptimizerKind k) { return k == OptimizerKind::sgd ? 1e-2 : 1e-3; }

  void validate(std::size_t dataset_queries) const {
    if (epochs < 1) throw DomainError("train config: epochs must be >= 1");
    if (batch_size < 1) throw DomainError("train config: batch size must be >= 1");
    if (batch_size > dataset_queries)
      throw DomainError("train config: batch size " + std::to_string(batch_size) + " exceeds dataset queries " +
                        std::to_string(dataset_queries));
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw DomainError("train config: learning rate must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw DomainError("train config: adam betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw DomainError("train config: epsilon must be > 0");
    effective_gcl().validate();
  }

  LossTerms terms_for_epoch(std::size_t epoch) const {
    LossTerms t = LossTerms::for_mode(mode);
    if (ablate.vcl) t.vcl = false;
    if (ablate.gcl) t.gcl = false;
    if (ablate.ssi) t.ssi = false;
    if (epoch < warmup_epochs) t.gcl = t.ssi = false;
    return t;
  }

  GclConfig effective_gcl() const {
    GclConfig g = gcl;
    if (ablate.sa) g.topk = 1;
    if (ablate.su) g.denominator = DenominatorMode::plain;
    return g;
  }
};

inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }
inline const char* to_string(Mode m) { return m == Mode::baseline ? "baseline" : "g2l"; }
inline const char* to_string(DenominatorMode d) {
  switch (d) {
    case DenominatorMode::literal: return "literal";
    case DenominatorMode::tempered: return "tempered";
    case DenominatorMode::plain: return "plain";
  }
  return "?";
}

inline nlohmann::json to_json(const GclConfig& g) {
  return {{"temperature", g.temperature},
          {"grounding_temperature", g.grounding_temperature},
          {"topk", g.topk},
          {"neighbors", g.neighbors},
          {"g_cap", g.g_cap},
          {"ssi_moments_per_query", g.ssi_moments_per_query},
          {"ssi_mc_samples", g.ssi_mc_samples},
          {"denominator", to_string(g.denominator)},
          {"negate_weight", g.negate_weight}};
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"optimizer", to_string(c.optimizer)},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"mode", to_string(c.mode)},
          {"gcl", to_json(c.gcl)},
          {"seed", c.seed},
          {"hidden_dim", c.hidden_dim},
          {"output_dim", c.output_dim},
          {"warmup_epochs", c.warmup_epochs},
          {"ablate",
           {{"vcl", c.ablate.vcl}, {"gcl", c.ablate.gcl}, {"ssi", c.ablate.ssi}, {"sa", c.ablate.sa},
            {"su", c.ablate.su}}}};
}

// ---------------------------------------------------------------- optimizer

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const Encoder& shape) : cfg_(cfg) {
    if (cfg.optimizer == OptimizerKind::adam) {
      m_ = shape.zeros_like();
      v_ = shape.zeros_like();
    }
  }

  void step(Encoder& enc, Encoder& grad) {
    ++t_;
    const auto params = enc.parameters();
    const auto grads = grad.parameters();
    if (cfg_.optimizer == OptimizerKind::sgd) {
      for (std::size_t p = 0; p < params.size(); ++p)
        for (std::size_t i = 0; i < params[p]->size(); ++i)
          params[p]->data()[i] -= cfg_.learning_rate * grads[p]->data()[i];
      return;
    }
    const auto ms = m_.parameters();
    const auto vs = v_.parameters();
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t p = 0; p < params.size(); ++p) {
      double* w = params[p]->data().data();
      const double* g = grads[p]->data().data();
      double* m = ms[p]->data().data();
      double* v = vs[p]->data().data();
      for (std::size_t i = 0; i < params[p]->size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        w[i] -= cfg_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.epsilon);
      }
    }
  }

 private:
  TrainConfig cfg_;
  Encoder m_;
  Encoder v_;
  std::size_t t_ = 0;
};

// ---------------------------------------------------------------- batches

// Dataset rows behind one Batch: the selected queries and every moment of
// the videos they come from (video blocks in order of first appearance).
struct BatchRows {
  std::vector<std::size_t> query_rows;
  std::vector<std::size_t> moment_rows;
  std::vector<std::size_t> query_video;
  std::vector<std::size_t> moment_video;
  std::vector<std::size_t> targets;  // row in the batch moment block
};

inline BatchRows batch_rows(const SynthDataset& ds, std::span<const std::size_t> queries) {
  BatchRows b;
  const std::size_t nm = ds.moments_per_video();
  std::map<std::size_t, std::size_t> block_of;
  for (std::size_t q : queries) {
    if (q >= ds.query_count()) throw DomainError("batch: query " + std::to_string(q) + " out of range");
    const std::size_t v = ds.query_video[q];
    auto [it, fresh] = block_of.try_emplace(v, block_of.size());
    if (fresh)
      for (std::size_t k = 0; k < nm; ++k) {
        b.moment_rows.push_back(v * nm + k);
        b.moment_video.push_back(v);
      }
    b.query_rows.push_back(q);
    b.query_video.push_back(v);
    b.targets.push_back(it->second * nm + (ds.query_target[q] - v * nm));
  }
  return b;
}

struct BatchPass {
  BatchRows rows;
  TowerPass moments;
  TowerPass queries;
  Batch batch;
};

inline BatchPass encode_batch(const Encoder& enc, const SynthDataset& ds, std::span<const std::size_t> queries) {
  BatchPass p;
  p.rows = batch_rows(ds, queries);
  p.moments = tower_forward(enc.video, detail::gather_rows(ds.moments.values, p.rows.moment_rows));
  p.queries = tower_forward(enc.query, detail::gather_rows(ds.queries.values, p.rows.query_rows));
  p.batch.queries = EmbeddingMatrix{p.queries.output, true};
  p.batch.moments = EmbeddingMatrix{p.moments.output, true};
  p.batch.targets = p.rows.targets;
  p.batch.query_video = p.rows.query_video;
  p.batch.moment_video = p.rows.moment_video;
  return p;
}

struct StepResult {
  LossBundle losses;
  Encoder grad;
};

// Loss and weight gradient for one batch with geometry held fixed.
inline StepResult batch_loss(const Encoder& enc, const BatchPass& pass, const GeometryContext& ctx,
                             const GclConfig& cfg, const LossTerms& terms) {
  StepResult r;
  r.losses = evaluate_losses(pass.batch, ctx, cfg, terms);
  r.grad = enc.zeros_like();
  tower_backward(enc.video, pass.moments, r.losses.grad_moments, r.grad.video);
  tower_backward(enc.query, pass.queries, r.losses.grad_queries, r.grad.query);
  return r;
}

// ---------------------------------------------------------------- report

struct EpochMetrics {
  std::size_t epoch = 0;
  double l_total = 0.0;
  double l_vg = 0.0;
  double l_cl = 0.0;  // L_VCL in baseline mode, L_GCL in g2l mode
  double l_ssi = 0.0;
  double alignment = 0.0;
  double uniformity = 0.0;
  double r1 = 0.0;
  double r5 = 0.0;
  double seconds = 0.0;

  bool operator==(const EpochMetrics&) const = default;
};

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct MetricsReport {
  std::vector<EpochMetrics> epochs;

  static constexpr const char* kCsvHeader = "epoch,l_total,l_vg,l_cl,l_ssi,alignment,uniformity,r1,r5,seconds";

  std::string to_csv() const {
    std::string out = std::string(kCsvHeader) + "\n";
    for (const EpochMetrics& e : epochs) {
      out += std::to_string(e.epoch);
      for (double v : {e.l_total, e.l_vg, e.l_cl, e.l_ssi, e.alignment, e.uniformity, e.r1, e.r5, e.seconds})
        out += "," + format_double(v);
      out += "\n";
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const EpochMetrics& e : epochs)
      rows.push_back({{"epoch", e.epoch},
                      {"l_total", e.l_total},
                      {"l_vg", e.l_vg},
                      {"l_cl", e.l_cl},
                      {"l_ssi", e.l_ssi},
                      {"alignment", e.alignment},
                      {"uniformity", e.uniformity},
                      {"r1", e.r1},
                      {"r5", e.r5},
                      {"seconds", e.seconds}});
    return {{"epochs", rows}};
  }

  const EpochMetrics& final() const {
    if (epochs.empty()) throw DomainError("metrics report is empty");
    return epochs.back();
  }

  bool operator==(const MetricsReport&) const = default;
};

struct TrainResult {
  Encoder encoder;
  MetricsReport report;
};

// RNG streams: 10 init, 11 shuffling (per epoch), 12 geometry (per epoch, step).
inline TrainResult train(const SynthDataset& ds, const TrainConfig& cfg) {
  cfg.validate(ds.query_count());
  const GclConfig gcl = cfg.effective_gcl();
  RngStream init_rng(cfg.seed, 10);
  TrainResult out;
  out.encoder = Encoder::random(ds.dim(), cfg.hidden_dim, cfg.output_dim ? cfg.output_dim : ds.dim(), init_rng);
  Encoder& enc = out.encoder;
  Optimizer opt(cfg, enc);

  std::vector<std::size_t> order(ds.query_count());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream shuffle_rng = RngStream(cfg.seed, 11).derive(epoch);
    shuffle_rng.shuffle(order);
    const RngStream epoch_rng = RngStream(cfg.seed, 12).derive(epoch);
    const LossTerms terms = cfg.terms_for_epoch(epoch);

    EpochMetrics m;
    m.epoch = epoch;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++steps) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> ids(order.data() + start, stop - start);
      StepResult r;
      try {
        const BatchPass pass = encode_batch(enc, ds, ids);
        const GeometryContext ctx = prepare_geometry(pass.batch, gcl, terms, epoch_rng.derive(steps));
        r = batch_loss(enc, pass, ctx, gcl, terms);
      } catch (const DomainError& e) {
        throw DivergenceError(std::string("training diverged: ") + e.what(), epoch, steps);
      }
      if (!std::isfinite(r.losses.l_total))
        throw DivergenceError("training diverged: non-finite loss at epoch " + std::to_string(epoch) + " step " +
                                  std::to_string(steps),
                              epoch, steps);
      m.l_total += r.losses.l_total;
      m.l_vg += r.losses.l_vg;
      m.l_cl += r.losses.l_vcl + r.losses.l_gcl;
      m.l_ssi += r.losses.l_ssi;
      opt.step(enc, r.grad);
      if (!enc.finite())
        throw DivergenceError("training diverged: non-finite weights at epoch " + std::to_string(epoch) +
                                  " step " + std::to_string(steps),
                              epoch, steps);
    }
    const double inv = 1.0 / static_cast<double>(steps);
    m.l_total *= inv;
    m.l_vg *= inv;
    m.l_cl *= inv;
    m.l_ssi *= inv;
    const EvalMetrics ev = evaluate(enc, ds);
    m.alignment = ev.alignment;
    m.uniformity = ev.uniformity;
    m.r1 = ev.r1;
    m.r5 = ev.r5;
    if (cfg.record_time)
      m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    out.report.epochs.push_back(m);
  }
  return out;
}

// ---------------------------------------------------------------- checkpoint

inline constexpr char kEncoderMagic[] = "G2LE1";

inline std::string serialize(const Encoder& enc) {
  std::string out(kEncoderMagic);
  detail::put_u64(out, enc.input_dim);
  detail::put_u64(out, enc.hidden_dim);
  detail::put_u64(out, enc.output_dim);
  for (const Matrix* m : enc.parameters())
    for (double v : m->data()) detail::put_f64(out, v);
  return out;
}

inline Encoder deserialize_encoder(const std::string& bytes) {
  detail::Reader r(bytes, "encoder");
  r.expect_magic(kEncoderMagic);
  Encoder e;
  e.input_dim = r.u64();
  e.hidden_dim = r.u64();
  e.output_dim = r.u64();
  constexpr std::uint64_t kMaxDim = 1u << 20;
  if (e.input_dim < 1 || e.output_dim < 1 || e.input_dim > kMaxDim || e.hidden_dim > kMaxDim ||
      e.output_dim > kMaxDim)
    r.fail("implausible encoder dimensions");
  for (Tower* t : {&e.video, &e.query}) {
    if (e.hidden_dim == 0) {
      t->w1 = Matrix(e.input_dim, e.output_dim);
    } else {
      t->w1 = Matrix(e.input_dim, e.hidden_dim);
      t->w2 = Matrix(e.hidden_dim, e.output_dim);
    }
  }
  for (Matrix* m : e.parameters()) r.read_matrix(*m);
  if (!r.at_end()) r.fail("trailing bytes after weights");
  return e;
}

inline void save(const Encoder& enc, const std::filesystem::path& path) {
  detail::write_file_atomic(path, serialize(enc));
}

inline Encoder load_encoder(const std::filesystem::path& path) {
  return deserialize_encoder(detail::read_file(path));
}

}  // namespace g2l
