#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include <json.hpp>

#include "lap/external_policy.hpp"
#include "lap/metrics.hpp"
#include "lap/refine.hpp"
#include "lap/synthetic.hpp"

#include <httplib.h>

using namespace lap;

namespace {

GridBox box(int id, IVec3 pos, IVec3 size) {
  GridBox g;
  g.id = id;
  g.class_name = "box";
  g.pos = pos;
  g.size = size;
  g.yaw_idx = 12;
  return g;
}

GridLayout layout_of(std::vector<GridBox> objs) {
  GridLayout l = empty_synthetic_layout();
  l.objects = std::move(objs);
  return l;
}

ContactGraph all_floor(const GridLayout& l) {
  ContactGraph g;
  for (const auto& o : l.objects) g[o.id] = Relation::floor();
  return g;
}

/// Planner endpoint answering every request with the next scripted reply.
class MockPlanner {
public:
  explicit MockPlanner(std::vector<std::string> replies) : replies_(std::move(replies)) {
    server_.Post("/plan", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = nlohmann::json::parse(req.body);
      if (!body.contains("system") || !body.contains("user")) {
        res.status = 400;
        return;
      }
      const std::size_t k = calls_++;
      res.set_content(nlohmann::json{{"text", replies_[std::min(k, replies_.size() - 1)]}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockPlanner() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/plan"; }
  std::size_t calls() const { return calls_; }

private:
  std::vector<std::string> replies_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<std::size_t> calls_{0};
};

} // namespace

TEST(Refine, StopPolicyConvergesInOneRound) {
  const GridLayout l = layout_of({box(0, {10, 0, 10}, {5, 5, 5})});
  StopPolicy p;
  const auto r = refine(l, p, RefineConfig{});
  EXPECT_FALSE(r.error);
  EXPECT_EQ(r.trajectory.rounds_used, 1);
  EXPECT_TRUE(r.trajectory.converged);
  ASSERT_EQ(r.trajectory.states.size(), 2u);
  EXPECT_EQ(r.trajectory.states[0], l);
  EXPECT_EQ(r.trajectory.states[1], l);
}

TEST(Refine, RoundLimit) {
  const GridLayout l = layout_of({box(0, {10, 0, 10}, {5, 5, 5})});
  ScriptedPolicy p({"SELECT obj_0\nMOVE [1, 0, 0]", "SELECT obj_0\nMOVE [1, 0, 0]"});
  RefineConfig cfg;
  cfg.max_rounds = 1;
  const auto r = refine(l, p, cfg);
  EXPECT_EQ(r.trajectory.rounds_used, 1);
  EXPECT_FALSE(r.trajectory.converged);
  EXPECT_EQ(r.trajectory.states.back().objects[0].pos[0], 11);
}

TEST(Refine, InvalidConfig) {
  StopPolicy p;
  RefineConfig cfg;
  cfg.max_rounds = 0;
  EXPECT_THROW(refine(layout_of({}), p, cfg), Error);
}

TEST(RulePolicy, CleanLayoutStops) {
  const GridLayout l = layout_of({box(0, {10, 0, 10}, {5, 5, 5}), box(1, {30, 0, 10}, {5, 5, 5})});
  EXPECT_EQ(rule_policy(l, all_floor(l)), (ActionSequence{Stop{}}));
  RulePolicy p(all_floor(l));
  const auto r = refine(l, p, RefineConfig{});
  EXPECT_EQ(r.trajectory.sequences, (std::vector<ActionSequence>{{Stop{}}}));
}

TEST(RulePolicy, FloatingFloorObjectDrops) {
  const GridLayout l = layout_of({box(0, {40, 0, 40}, {5, 5, 5}), box(1, {10, 5, 10}, {5, 5, 5})});
  EXPECT_EQ(rule_policy(l, all_floor(l)), (ActionSequence{Select{1}, Move{0, -5, 0}, Stop{}}));
}

TEST(RulePolicy, SeparatesAlongMinimumPenetrationAxis) {
  const GridLayout l = layout_of({box(0, {10, 0, 10}, {10, 5, 10}), box(1, {18, 0, 13}, {10, 5, 10})});
  const ActionSequence seq = rule_policy(l, all_floor(l));
  const GridLayout out = lap::apply(l, seq);
  const int dx = (out.objects[1].pos[0] - out.objects[0].pos[0]) - (l.objects[1].pos[0] - l.objects[0].pos[0]);
  EXPECT_EQ(dx, 3);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(out.objects[i].pos[1], l.objects[i].pos[1]);
    EXPECT_EQ(out.objects[i].pos[2], l.objects[i].pos[2]);
  }
  EXPECT_EQ(collision_count(out), 0);
}

TEST(RulePolicy, FloatingChainReachesZeroViolations) {
  const GridLayout l = layout_of({box(0, {20, 6, 20}, {12, 6, 12}), box(1, {20, 12, 20}, {8, 4, 8}),
                                  box(2, {20, 16, 20}, {4, 4, 4})});
  const ContactGraph g{{0, Relation::floor()}, {1, Relation::on(0)}, {2, Relation::on(1)}};
  const auto t = iterate_rule_to_fixpoint(l, g, RefineConfig{});
  EXPECT_TRUE(t.converged);
  EXPECT_LE(t.rounds_used, 4);
  const GridLayout& end = t.states.back();
  EXPECT_EQ(support_violation_rate(end), 0.0);
  EXPECT_EQ(end.objects[0].pos[1], 0);
  EXPECT_EQ(end.objects[1].pos[1], 6);
  EXPECT_EQ(end.objects[2].pos[1], 10);
}

TEST(RulePolicy, EmptySceneStops) {
  const auto t = iterate_rule_to_fixpoint(layout_of({}), {}, RefineConfig{});
  EXPECT_EQ(t.sequences, (std::vector<ActionSequence>{{Stop{}}}));
}

TEST(RulePolicy, CyclicGraphRejected) {
  const GridLayout l = layout_of({box(0, {10, 0, 10}, {5, 5, 5}), box(1, {30, 0, 10}, {5, 5, 5})});
  EXPECT_THROW(iterate_rule_to_fixpoint(l, {{0, Relation::on(1)}, {1, Relation::on(0)}}, RefineConfig{}), Error);
}

TEST(RulePolicy, SyntheticScenesBecomeClean) {
  Rng rng(41);
  for (int t = 0; t < 60; ++t) {
    const GridLayout gt = random_gt_layout(rng);
    const auto p = sample_perturbation(gt, PerturbConfig{}, rng);
    const auto traj = iterate_rule_to_fixpoint(p.perturbed, infer_contact_graph(gt), RefineConfig{});
    const GridLayout& end = traj.states.back();
    EXPECT_EQ(support_violation_rate(end), 0.0) << t;
    EXPECT_EQ(collision_count(end, collision_pairs(gt)), 0) << t;
    for (std::size_t i = 0; i < end.objects.size(); ++i) EXPECT_EQ(end.objects[i].yaw_idx, p.perturbed.objects[i].yaw_idx);
  }
}

TEST(ExternalPolicy, StopReply) {
  MockPlanner mock({"STOP"});
  const GridLayout l = layout_of({box(0, {10, 0, 10}, {5, 5, 5})});
  ExternalPolicy p(mock.url(), 5.0);
  const auto r = refine(l, p, RefineConfig{});
  EXPECT_FALSE(r.error);
  EXPECT_TRUE(r.trajectory.converged);
  EXPECT_EQ(r.trajectory.sequences, (std::vector<ActionSequence>{{Stop{}}}));
  EXPECT_EQ(mock.calls(), 1u);
}

TEST(ExternalPolicy, LenientReplyKeepsValidLines) {
  MockPlanner mock({"SELECT obj_0\nMOVE [2, 0, 0]\nWIGGLE [1]\nSTOP", "STOP"});
  const GridLayout l = layout_of({box(0, {10, 0, 10}, {5, 5, 5})});
  ExternalPolicy p(mock.url(), 5.0);
  const auto r = refine(l, p, RefineConfig{});
  ASSERT_FALSE(r.error);
  EXPECT_EQ(r.trajectory.sequences[0], (ActionSequence{Select{0}, Move{2, 0, 0}, Stop{}}));
  ASSERT_EQ(r.trajectory.diagnostics[0].size(), 1u);
  EXPECT_EQ(r.trajectory.diagnostics[0][0].line, 3);
  EXPECT_EQ(r.trajectory.rounds_used, 2);
  EXPECT_EQ(r.trajectory.states.back().objects[0].pos[0], 12);
}

TEST(ExternalPolicy, MultiRoundUntilStop) {
  MockPlanner mock({"SELECT obj_0\nMOVE [1, 0, 0]", "STOP"});
  const GridLayout l = layout_of({box(0, {10, 0, 10}, {5, 5, 5})});
  ExternalPolicy p(mock.url(), 5.0);
  const auto r = refine(l, p, RefineConfig{});
  EXPECT_EQ(r.trajectory.rounds_used, 2);
  EXPECT_TRUE(r.trajectory.converged);
}

TEST(ExternalPolicy, UnreachableEndpoint) {
  const GridLayout l = layout_of({box(0, {10, 0, 10}, {5, 5, 5})});
  ExternalPolicy p("http://127.0.0.1:1/plan", 1.0);
  try {
    p.request({"", &l, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == ErrorCode::TransportError || e.code() == ErrorCode::Timeout);
  }
  const auto r = refine(l, p, RefineConfig{});
  ASSERT_TRUE(r.error);
  EXPECT_EQ(r.error->code(), ErrorCode::PolicyError);
  EXPECT_EQ(r.trajectory.states.size(), 1u);
}

TEST(ExternalPolicy, EmptyReply) {
  MockPlanner mock({"  \n"});
  const GridLayout l = layout_of({box(0, {10, 0, 10}, {5, 5, 5})});
  ExternalPolicy p(mock.url(), 5.0);
  try {
    p.request({"", &l, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyResponse);
  }
}

TEST(ExternalPolicy, EndpointNeedsScheme) { EXPECT_THROW(ExternalPolicy("localhost:9", 1.0), Error); }
