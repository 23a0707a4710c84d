#include <cmath>

#include <gtest/gtest.h>

#include "g2l/losses.hpp"
#include "test_support.hpp"

using namespace g2l;
using g2l::testing::gradient_check;
using g2l::testing::random_small_batch;

namespace {

Batch hand_batch(std::size_t dim, std::vector<double> q, std::vector<double> m, std::size_t target) {
  Batch b;
  const std::size_t nq = q.size() / dim, nm = m.size() / dim;
  b.queries = EmbeddingMatrix{Matrix(nq, dim, std::move(q)), true};
  b.moments = EmbeddingMatrix{Matrix(nm, dim, std::move(m)), true};
  b.targets = {target};
  b.query_video = {0};
  b.moment_video.assign(b.moments.rows(), 0);
  return b;
}

GeodesicTable flat_table(std::size_t source, std::vector<double> d) {
  GeodesicTable t;
  t.source = source;
  t.reachable.assign(d.size(), true);
  t.parent.assign(d.size(), kNoParent);
  t.distances = std::move(d);
  return t;
}

GeometryContext context_for(const Batch& b, const GclConfig& cfg, std::uint64_t seed) {
  LossTerms terms;
  return prepare_geometry(b, cfg, terms, RngStream(seed, 99));
}

}  // namespace

TEST(BatchValidate, RejectsBadTargets) {
  Batch b = hand_batch(2, {1, 0}, {1, 0, 0, 1}, 0);
  EXPECT_NO_THROW(b.validate());
  b.targets = {5};
  EXPECT_THROW(b.validate(), DomainError);
  b.targets = {0};
  b.moment_video = {0, 1};
  EXPECT_THROW(b.validate(), DomainError);  // single-moment videos
}

TEST(VanillaContrastive, HandValues) {
  const Batch b = hand_batch(2, {1, 0}, {1, 0, 0, 1}, 0);
  EXPECT_NEAR(vanilla_contrastive_loss(b, 1.0).value, -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0)), 1e-15);

  const Batch flat = hand_batch(3, {0, 0, 1}, {1, 0, 0, 0, 1, 0, -1, 0, 0, 0.6, 0.8, 0}, 2);
  EXPECT_NEAR(vanilla_contrastive_loss(flat, 0.37).value, std::log(4.0), 1e-14);
}

TEST(VanillaContrastive, InvariantToNonTargetPermutation) {
  RngStream rng(1, 0);
  Batch b = g2l::testing::random_batch(rng, 1, 1, 6, 5);
  const double before = vanilla_contrastive_loss(b, 0.1).value;
  const std::size_t t = b.targets[0];
  const std::size_t a = (t + 1) % 6, c = (t + 3) % 6;
  Matrix& m = b.moments.values;
  for (std::size_t k = 0; k < 5; ++k) std::swap(m(a, k), m(c, k));
  EXPECT_NEAR(vanilla_contrastive_loss(b, 0.1).value, before, 1e-12);
}

TEST(SemanticPositives, Selection) {
  const GeodesicTable t = [] {
    GeodesicTable x = flat_table(0, {0.0, 0.2, 0.9, kDefaultGeodesicCap});
    x.reachable[3] = false;
    return x;
  }();
  EXPECT_EQ(select_semantic_positives(t, 1), (std::vector<std::size_t>{0}));
  EXPECT_EQ(select_semantic_positives(t, 2), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(select_semantic_positives(t, 4), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_THROW(select_semantic_positives(t, 5), DomainError);

  // Unreachable nodes come last even when a reachable path is longer than the cap.
  GeodesicTable far = flat_table(1, {12.0, 0.0, kDefaultGeodesicCap});
  far.reachable[2] = false;
  EXPECT_EQ(select_semantic_positives(far, 2), (std::vector<std::size_t>{1, 0}));

  // Ties break to the lower index.
  EXPECT_EQ(select_semantic_positives(flat_table(2, {0.5, 0.5, 0.0, 0.5}), 2), (std::vector<std::size_t>{2, 0}));
}

TEST(GeodesicWeighting, Examples) {
  const Vector q{0.6, 0.8}, target{1, 0};
  EXPECT_NEAR(geodesic_weighting(q, target, target, 0.0), std::exp(-0.6), 1e-15);
  EXPECT_DOUBLE_EQ(geodesic_weighting(Vector{0, 1}, target, Vector{1, 0}, 7.0), 1.0);
  EXPECT_NEAR(geodesic_weighting(target, target, target, 10.0), std::exp(-11.0), 1e-20);
  EXPECT_NEAR(std::exp(-11.0), 1.67e-5, 1e-7);
  EXPECT_THROW(geodesic_weighting(q, target, target, -1.0), DomainError);
}

TEST(GeodesicContrastive, LiteralHandValue) {
  const Batch b = hand_batch(3, {0, 0, 1}, {1, 0, 0, 0, 1, 0}, 0);
  const std::vector<GeodesicTable> tables{flat_table(0, {0.0, 0.0})};
  GclConfig cfg;
  cfg.temperature = 1.0;
  cfg.topk = 2;
  EXPECT_NEAR(geodesic_contrastive_loss(b, tables, cfg).value, 0.0, 1e-15);
}

TEST(GeodesicContrastive, DirectFormulaAgreement) {
  RngStream rng(2, 0);
  for (int t = 0; t < 10; ++t) {
    const Batch b = random_small_batch(rng);
    GclConfig cfg;
    cfg.topk = 1 + rng.uniform_index(3);
    const GeometryContext ctx = context_for(b, cfg, t);
    // Direct evaluation of the printed formula with geodesic_weighting.
    double expect = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
      const auto q = b.queries.row(i);
      double num = 0.0;
      for (std::size_t p : select_semantic_positives(ctx.tables[i], std::min(cfg.topk, b.moments.rows())))
        num += std::exp(dot(q, b.moments.row(p)) / cfg.temperature);
      double den = 0.0;
      for (std::size_t j = 0; j < b.moments.rows(); ++j)
        den += geodesic_weighting(q, b.moments.row(b.targets[i]), b.moments.row(j), ctx.tables[i].distances[j]) /
               cfg.temperature;
      expect -= std::log(num / den);
    }
    EXPECT_NEAR(geodesic_contrastive_loss(b, ctx.tables, cfg).value, expect, 1e-10 * std::max(1.0, std::abs(expect)));
  }
}

TEST(GeodesicContrastive, ReducesToVanillaWithSinglePositiveAndPlainDenominator) {
  RngStream rng(3, 0);
  for (int t = 0; t < 20; ++t) {
    const Batch b = random_small_batch(rng);
    GclConfig cfg;
    cfg.topk = 1;
    cfg.denominator = DenominatorMode::plain;
    const GeometryContext ctx = context_for(b, cfg, t);
    EXPECT_NEAR(geodesic_contrastive_loss(b, ctx.tables, cfg).value, vanilla_contrastive_loss(b, cfg.temperature).value,
                1e-12);
  }
}

TEST(GeodesicContrastive, TemperatureDoesNotChangePositives) {
  RngStream rng(4, 0);
  const Batch b = random_small_batch(rng);
  GclConfig cfg;
  const GeometryContext ctx = context_for(b, cfg, 1);
  cfg.temperature *= 2.0;
  const GeometryContext ctx2 = context_for(b, cfg, 1);
  for (std::size_t i = 0; i < b.size(); ++i)
    EXPECT_EQ(select_semantic_positives(ctx.tables[i], 2), select_semantic_positives(ctx2.tables[i], 2));
}

TEST(GeodesicContrastive, RejectsMismatchedTables) {
  const Batch b = hand_batch(2, {1, 0}, {1, 0, 0, 1}, 0);
  const std::vector<GeodesicTable> wrong{flat_table(1, {0.3, 0.0})};
  EXPECT_THROW(geodesic_contrastive_loss(b, wrong, GclConfig{}), DomainError);
}

TEST(GroundingLoss, UniformAndSaturated) {
  std::vector<double> m;
  for (int k = 0; k < 16; ++k) {
    m.push_back(std::cos(k * 0.4));
    m.push_back(std::sin(k * 0.4));
    m.push_back(0.0);
  }
  const Batch b = hand_batch(3, {0, 0, 1}, m, 5);
  EXPECT_NEAR(grounding_loss(b, 0.1).value, std::log(16.0), 1e-14);

  const Batch sharp = hand_batch(2, {1, 0}, {1, 0, 0, 1, -1, 0}, 0);
  EXPECT_LT(grounding_loss(sharp, 1e-3).value, 1e-300 + 1e-12);
}

TEST(SsiLoss, UniformAndOneHotLabels) {
  // One video, two queries, K=1: moment rows 0 and 1 sampled for queries 0 and 1.
  Batch b;
  b.queries = EmbeddingMatrix{Matrix(2, 2, std::vector<double>{0, 1, 0, 1}), true};
  b.moments = EmbeddingMatrix{Matrix(3, 2, std::vector<double>{1, 0, -1, 0, 0.6, 0.8}), true};
  b.targets = {0, 1};
  b.query_video = {0, 0};
  b.moment_video = {0, 0, 0};

  SsiGroup g;
  g.moment_rows = {0, 1};
  g.query_rows = {0, 1};
  g.owner = {0, 1};
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  g.interactions = normalize_interactions(Matrix(2, 2, std::vector<double>{0.3, ninf, ninf, 0.3}));
  // Identical queries make every softmax row uniform over 2 entries; labels
  // sum to one, so the loss is log(2) / (N_v N_q).
  const std::vector<SsiGroup> groups{g};
  EXPECT_NEAR(ssi_loss(b, groups).value, std::log(2.0) / 4.0, 1e-15);

  // One-hot label on (1, 0) with distinct queries.
  b.queries = EmbeddingMatrix{Matrix(2, 2, std::vector<double>{1, 0, 0, 1}), true};
  SsiGroup h = g;
  h.interactions.normalized = Matrix(2, 2, std::vector<double>{0, 0, 1, 0});
  const double a_tilde = std::exp(-1.0) / (std::exp(-1.0) + 1.0);
  const std::vector<SsiGroup> hg{h};
  EXPECT_NEAR(ssi_loss(b, hg).value, -std::log(a_tilde) / 4.0, 1e-15);
}

TEST(Gradients, AllTermsMatchFiniteDifferences) {
  RngStream rng(5, 0);
  for (int t = 0; t < 20; ++t) {
    const Batch b = random_small_batch(rng);
    GclConfig cfg;
    cfg.topk = 1 + rng.uniform_index(4);
    cfg.ssi_moments_per_query = 1 + rng.uniform_index(3);
    cfg.ssi_mc_samples = 50;
    const GeometryContext ctx = context_for(b, cfg, t);

    auto check = [&](auto term) {
      const LossPart part = term(b);
      return gradient_check(b, [&](const Batch& p) { return term(p).value; }, part.grad_queries, part.grad_moments);
    };
    EXPECT_LT(check([&](const Batch& p) { return vanilla_contrastive_loss(p, cfg.temperature); }), 1e-5);
    EXPECT_LT(check([&](const Batch& p) { return grounding_loss(p, cfg.grounding_temperature); }), 1e-5);
    EXPECT_LT(check([&](const Batch& p) { return ssi_loss(p, ctx.groups); }), 1e-5);
    for (auto mode : {DenominatorMode::literal, DenominatorMode::tempered, DenominatorMode::plain})
      for (bool negate : {false, true}) {
        GclConfig c = cfg;
        c.denominator = mode;
        c.negate_weight = negate;
        EXPECT_LT(check([&](const Batch& p) { return geodesic_contrastive_loss(p, ctx.tables, c); }), 1e-5)
            << "mode " << static_cast<int>(mode) << " negate " << negate;
      }
  }
}

TEST(TotalLoss, AdditivityAndModes) {
  RngStream rng(6, 0);
  const Batch b = g2l::testing::random_batch(rng, 4, 2, 6, 8);
  GclConfig cfg;
  const RngStream stream(1, 1);
  const LossBundle g2l_bundle = total_loss(b, cfg, Mode::g2l, stream);
  EXPECT_NEAR(g2l_bundle.l_total, g2l_bundle.l_vg + g2l_bundle.l_gcl + g2l_bundle.l_ssi, 1e-12);
  EXPECT_EQ(g2l_bundle.l_vcl, 0.0);

  const LossBundle base = total_loss(b, cfg, Mode::baseline, stream);
  EXPECT_EQ(base.l_vg, g2l_bundle.l_vg);
  EXPECT_NEAR(base.l_total, base.l_vg + base.l_vcl, 1e-12);
  EXPECT_EQ(base.l_gcl, 0.0);

  // Gradient of the total is the sum of the component gradients.
  const GeometryContext ctx = prepare_geometry(b, cfg, LossTerms::for_mode(Mode::g2l), stream);
  Matrix sum_q(b.queries.rows(), b.queries.dim()), sum_m(b.moments.rows(), b.moments.dim());
  for (const LossPart& p : {grounding_loss(b, cfg.grounding_temperature), geodesic_contrastive_loss(b, ctx.tables, cfg),
                            ssi_loss(b, ctx.groups)}) {
    sum_q += p.grad_queries;
    sum_m += p.grad_moments;
  }
  for (std::size_t i = 0; i < sum_q.size(); ++i) EXPECT_NEAR(g2l_bundle.grad_queries.data()[i], sum_q.data()[i], 1e-12);
  for (std::size_t i = 0; i < sum_m.size(); ++i) EXPECT_NEAR(g2l_bundle.grad_moments.data()[i], sum_m.data()[i], 1e-12);
}

TEST(TotalLoss, FiniteForNormalizedBatches) {
  RngStream rng(7, 0);
  for (int t = 0; t < 10; ++t) {
    const Batch b = g2l::testing::random_batch(rng, 8, 4, 8, 16);
    const LossBundle l = total_loss(b, GclConfig{}, Mode::g2l, RngStream(t, 0));
    EXPECT_TRUE(std::isfinite(l.l_total));
    for (double v : l.grad_queries.data()) EXPECT_TRUE(std::isfinite(v));
    for (double v : l.grad_moments.data()) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(TotalLoss, GradientMatchesFiniteDifferences) {
  RngStream rng(8, 0);
  for (int t = 0; t < 5; ++t) {
    const Batch b = random_small_batch(rng);
    GclConfig cfg;
    cfg.ssi_mc_samples = 30;
    const LossTerms terms = LossTerms::for_mode(Mode::g2l);
    const GeometryContext ctx = prepare_geometry(b, cfg, terms, RngStream(t, 3));
    const LossBundle l = evaluate_losses(b, ctx, cfg, terms);
    EXPECT_LT(gradient_check(b, [&](const Batch& p) { return evaluate_losses(p, ctx, cfg, terms).l_total; },
                             l.grad_queries, l.grad_moments),
              1e-5);
  }
}
