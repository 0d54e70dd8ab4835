#include <gtest/gtest.h>

#include <json.hpp>

#include "lap/perturb.hpp"
#include "lap/synthetic.hpp"

using namespace lap;

namespace {

GridLayout two_tables() {
  GridLayout l = empty_synthetic_layout();
  for (int i = 0; i < 2; ++i) {
    GridBox g;
    g.id = i;
    g.class_name = "table";
    g.pos = {20 + 30 * i, 0, 30};
    g.size = {10, 8, 10};
    g.yaw_idx = 12;
    l.objects.push_back(g);
  }
  return l;
}

} // namespace

TEST(Perturbation, NoContinuationTouchesOneObject) {
  Rng rng(4);
  PerturbConfig cfg;
  cfg.p_continue = 0.0;
  for (int t = 0; t < 100; ++t) {
    const GridLayout l = random_gt_layout(rng);
    const auto p = sample_perturbation(l, cfg, rng);
    EXPECT_EQ(touched_objects(p.perturb_seq).size(), 1u);
    EXPECT_TRUE(std::holds_alternative<Stop>(p.perturb_seq.back()));
    EXPECT_TRUE(validate(p.perturb_seq, l).empty());
  }
}

TEST(Perturbation, RangesRespected) {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const auto p = sample_perturbation(random_gt_layout(rng), PerturbConfig{}, rng);
    for (const Action& a : p.perturb_seq) {
      if (auto* m = std::get_if<Move>(&a)) {
        EXPECT_TRUE(m->dx || m->dy || m->dz);
        EXPECT_LE(std::max({std::abs(m->dx), std::abs(m->dy), std::abs(m->dz)}), 3);
      } else if (auto* r = std::get_if<RotateY>(&a)) {
        EXPECT_NE(r->d, 0);
        EXPECT_LE(std::abs(r->d), 4);
      } else if (auto* z = std::get_if<Resize>(&a)) {
        EXPECT_NE(z->ds, 0);
        EXPECT_LE(std::abs(z->ds), 2);
      }
    }
    for (const auto& o : p.perturbed.objects) EXPECT_GE(o.pos[1], 0);
  }
}

TEST(Perturbation, EmptyLayoutRejected) {
  Rng rng(1);
  EXPECT_THROW(sample_perturbation(empty_synthetic_layout(), PerturbConfig{}, rng), Error);
}

TEST(Degrade, DirectionFlip) {
  Rng rng(1);
  const std::array kinds{DegradationKind::DirectionFlip};
  EXPECT_EQ(degrade({Select{1}, Move{2, 0, -1}, Stop{}}, kinds, 3, rng), (ActionSequence{Select{1}, Move{-2, 0, 1}, Stop{}}));
}

TEST(Degrade, PrematureStop) {
  Rng rng(1);
  const std::array kinds{DegradationKind::PrematureStop};
  EXPECT_EQ(degrade({Select{0}, Move{1, 0, -2}, Stop{}}, kinds, 3, rng), (ActionSequence{Stop{}}));
}

TEST(Degrade, ScalingArithmetic) {
  Action a = Move{1, 0, -2};
  detail::for_each_param(a, [](int& p) { p = detail::scale_param(p, 2.0); });
  EXPECT_EQ(a, Action(Move{2, 0, -4}));
  EXPECT_EQ(detail::scale_param(1, 0.3), 1);
  EXPECT_EQ(detail::scale_param(-1, 0.3), -1);
}

TEST(Degrade, OvershootGrowsMagnitude) {
  Rng rng(2);
  const std::array kinds{DegradationKind::MagnitudeOvershoot};
  for (int t = 0; t < 50; ++t) {
    const auto out = degrade({Select{0}, Move{2, 0, 0}, Stop{}}, kinds, 3, rng);
    const auto& m = std::get<Move>(out[1]);
    EXPECT_GE(m.dx, 3);
    EXPECT_LE(m.dx, 5);
  }
}

TEST(Degrade, AlwaysDiffersOrThrows) {
  Rng rng(3);
  for (int t = 0; t < 300; ++t) {
    const GridLayout l = random_gt_layout(rng);
    const auto p = sample_perturbation(l, PerturbConfig{}, rng);
    const auto kinds = sample_degradation_kinds(rng);
    try {
      EXPECT_NE(serialize(degrade(p.gt_seq, kinds, l.objects.size(), rng)), serialize(p.gt_seq));
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::DegenerateDegradation);
    }
  }
}

TEST(Degrade, PrematureStopOfStopIsDegenerate) {
  Rng rng(1);
  const std::array kinds{DegradationKind::PrematureStop};
  try {
    degrade({Stop{}}, kinds, 3, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateDegradation);
  }
}

TEST(Sft, StopCompletionAndReparse) {
  const GridLayout l = two_tables();
  const SftRecord r = build_sft_record(l, {Stop{}});
  EXPECT_EQ(r.completion, "STOP");
  EXPECT_NE(r.user.find("obj_1"), std::string::npos);
  Rng rng(9);
  const auto p = sample_perturbation(l, PerturbConfig{}, rng);
  EXPECT_EQ(parse(build_sft_record(p.perturbed, p.gt_seq).completion).actions, p.gt_seq);
}

TEST(Dpo, Examples) {
  const GridLayout gt = two_tables();
  const ActionSequence perturb{Select{0}, Move{0, 3, 2}, Stop{}};
  const GridLayout start = lap::apply(gt, perturb);
  const ActionSequence gt_seq{Select{0}, Move{0, -3, -2}, Stop{}};
  const std::vector<Candidate> cands{
      {{Stop{}}, {"premature_stop"}},
      {gt_seq, {"copy"}},
      {{Select{1}, Move{1, 0, 0}, Stop{}}, {"disjoint"}},
      {{Select{0}, Move{0, -3, -1}, Stop{}}, {"undershoot"}},
  };
  const auto r = build_dpo_pairs(start, gt_seq, cands, gt);
  ASSERT_EQ(r.pairs.size(), 2u);
  EXPECT_EQ(r.discarded, 2u);
  EXPECT_EQ(r.pairs[0].rejected, (ActionSequence{Stop{}}));
  EXPECT_EQ(r.pairs[0].provenance, (std::vector<std::string>{"premature_stop"}));
  EXPECT_EQ(r.pairs[1].provenance, (std::vector<std::string>{"undershoot"}));
  for (const auto& p : r.pairs) {
    EXPECT_TRUE(dominates(p.selected_metrics, p.rejected_metrics));
    EXPECT_EQ(p.selected, gt_seq);
  }
}

TEST(Dpo, DominanceIsStrictPartialOrder) {
  const MetricVector a{0, 0, 0, 1}, b{0, 0, 0, 2}, c{0, 1, 0, 0};
  EXPECT_TRUE(dominates(a, b));
  EXPECT_FALSE(dominates(b, a));
  EXPECT_FALSE(dominates(a, a));
  EXPECT_FALSE(dominates(a, c));
  EXPECT_FALSE(dominates(c, a));
}

TEST(Forge, DeterministicAndWellFormed) {
  Rng rng(21);
  ForgeConfig cfg;
  cfg.seed = 17;
  for (int t = 0; t < 20; ++t) {
    const CorpusScene scene{"scene_" + std::to_string(t), "img.png", random_gt_layout(rng)};
    ForgeStats stats;
    const auto a = forge_scene(scene, cfg, &stats);
    EXPECT_EQ(a, forge_scene(scene, cfg));
    ASSERT_GE(a.size(), 1u);
    EXPECT_EQ(stats.sft_records, 1u);
    EXPECT_EQ(a.size(), stats.sft_records + stats.dpo_records);
    for (const auto& line : a) {
      const auto j = nlohmann::json::parse(line);
      EXPECT_EQ(j["meta"]["scene_id"], scene.scene_id);
      if (j["kind"] == "DPO") EXPECT_NE(j["selected"], j["rejected"]);
    }
  }
}

TEST(Forge, SeedChangesOutput) {
  Rng rng(22);
  const CorpusScene scene{"a", "", random_gt_layout(rng)};
  ForgeConfig c1, c2;
  c1.seed = 1;
  c2.seed = 2;
  EXPECT_NE(forge_scene(scene, c1), forge_scene(scene, c2));
}
