#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"

#include "bxrl/common/errors.hpp"
#include "bxrl/common/rng.hpp"
#include "bxrl/env/highway.hpp"
#include "bxrl/env/rollout_archive.hpp"
#include "geometry_oracle.hpp"

using namespace bxrl;
using namespace bxrl::env;
using namespace bxrl::testing;

namespace {

double idm_closed_form(double v, double v0, double T, double s0, double a, double b, double delta,
                       double dv, double s) {
  const double star = s0 + std::max(0.0, v * T + v * dv / (2.0 * std::sqrt(a * b)));
  return a * (1.0 - std::pow(v / v0, delta) - (star / s) * (star / s));
}

EnvState empty_road(int lane, double speed, int target_lane, double target_speed) {
  HighwayEnv env(EnvConfig{});
  EnvState s = env.reset(1).state;
  s.npcs.clear();
  s.ego = car(0.0, 4.0 * lane, 0.0, speed);
  s.ego_control = {target_lane, target_speed};
  return s;
}

}  // namespace

TEST_CASE("reset is deterministic and spawns fifty vehicles") {
  HighwayEnv env;
  const auto a = env.reset(7);
  const auto b = env.reset(7);
  CHECK(a.state == b.state);
  CHECK(a.observation == b.observation);
  CHECK(a.state.npcs.size() == 50);
  CHECK_FALSE(env.reset(8).state == a.state);
}

TEST_CASE("reset never spawns overlapping vehicles") {
  HighwayEnv env;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const EnvState s = env.reset(seed).state;
    std::vector<VehicleState> all{s.ego};
    for (const Npc& n : s.npcs) all.push_back(n.vehicle);
    for (std::size_t i = 0; i < all.size(); ++i)
      for (std::size_t j = i + 1; j < all.size(); ++j)
        REQUIRE_FALSE(sat_overlap(all[i], all[j]));
  }
}

TEST_CASE("invalid config is rejected") {
  EnvConfig c;
  c.lanes = 0;
  CHECK_THROWS_AS(HighwayEnv{c}, ConfigError);
  EnvConfig d;
  d.spawn_spacing = 4.0;
  CHECK_THROWS_AS(HighwayEnv{d}, ConfigError);
}

TEST_CASE("config json round trip preserves the hash") {
  EnvConfig c;
  c.horizon = 33;
  c.npc_defaults.idm.min_gap = 7.5;
  const EnvConfig back = EnvConfig::from_json(c.to_json());
  CHECK(back.hash() == c.hash());
  CHECK(back.horizon == 33);
  CHECK(c.hash() != EnvConfig{}.hash());
}

TEST_CASE("apply_action") {
  CHECK(apply_action({0, 25}, Action::Left) == EgoControl{0, 25});
  CHECK(apply_action({2, 20}, Action::Faster) == EgoControl{2, 25});
  CHECK(apply_action({2, 25}, Action::Idle) == EgoControl{2, 25});
  CHECK(apply_action({3, 25}, Action::Right) == EgoControl{3, 25});
  CHECK(apply_action({1, 30}, Action::Faster) == EgoControl{1, 30});
  CHECK(apply_action({1, 20}, Action::Slower) == EgoControl{1, 20});
  CHECK(apply_action({1, 30}, Action::Slower) == EgoControl{1, 25});
  CHECK(apply_action({1, 25}, Action::Left) == EgoControl{0, 25});
  CHECK(apply_action({1, 25}, Action::Right) == EgoControl{2, 25});
}

TEST_CASE("idm acceleration") {
  IdmParams p;
  CHECK(idm_acceleration(car(0, 0, 0, 25.0), nullptr, p) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(idm_acceleration(car(0, 0, 0, 0.0), nullptr, p) == doctest::Approx(3.0).epsilon(1e-15));

  // Equal speeds at gap s0 + v0 T.
  const double gap = p.min_gap + p.desired_speed * p.time_headway;
  const VehicleState follower = car(0, 0, 0, 25.0);
  const VehicleState leader = car(gap + 5.0, 0, 0, 25.0);
  const double expected = idm_closed_form(25, 25, 1.5, 10, 3, 5, 4, 0.0, gap);
  CHECK(expected == doctest::Approx(-3.0).epsilon(1e-12));
  CHECK(idm_acceleration(follower, &leader, p) == doctest::Approx(expected).epsilon(1e-12));

  // Closing in on a slower leader.
  const VehicleState slow = car(45.0, 0, 0, 18.0);
  const VehicleState f2 = car(0, 0, 0, 22.0);
  const double e2 = std::max(-9.0, idm_closed_form(22, 25, 1.5, 10, 3, 5, 4, 4.0, 40.0));
  CHECK(idm_acceleration(f2, &slow, p) == doctest::Approx(e2).epsilon(1e-12));

  // Overlapping bumpers trigger the emergency clamp.
  const VehicleState touching = car(4.0, 0, 0, 25.0);
  CHECK(idm_acceleration(follower, &touching, p) == -p.hard_brake);
}

TEST_CASE("mobil decisions") {
  NpcParams p;
  const VehicleState me = car(0.0, 4.0, 0.0, 25.0);
  MobilNeighbors empty;
  empty.left = LaneNeighbors{};
  empty.right = LaneNeighbors{};
  CHECK(mobil_decision(me, empty, p) == LaneChange::Keep);

  // Slow leader ahead, left lane free, right lane blocked by the same slow car.
  NpcParams selfish = p;
  selfish.mobil.politeness = 0.0;
  const VehicleState slow = car(20.0, 4.0, 0.0, 10.0);
  const VehicleState slow_right = car(20.0, 8.0, 0.0, 10.0);
  MobilNeighbors n;
  n.current.leader = &slow;
  n.left = LaneNeighbors{};
  n.right = LaneNeighbors{&slow_right, nullptr};
  const double gain = idm_acceleration(me, nullptr, selfish.idm) - idm_acceleration(me, &slow, selfish.idm);
  REQUIRE(gain > selfish.mobil.accel_threshold);
  CHECK(mobil_decision(me, n, selfish) == LaneChange::Left);
  CHECK(mobil_incentive(me, n.current, *n.left, selfish).value() == doctest::Approx(gain).epsilon(1e-12));

  // Same, but a fast car right behind in the left lane would have to brake hard.
  const VehicleState tailgater = car(-6.0, 0.0, 0.0, 30.0);
  n.left = LaneNeighbors{nullptr, &tailgater};
  CHECK_FALSE(mobil_incentive(me, n.current, *n.left, selfish).has_value());
  CHECK(mobil_decision(me, n, selfish) == LaneChange::Keep);
}

TEST_CASE("reward values") {
  EnvConfig c;
  const RewardBreakdown slow_left = compute_reward(car(0, 0, 0, 20.0), false, c);
  CHECK(slow_left.total == 0.0);
  CHECK(std::abs(slow_left.normalized - 2.0 / 3.0) <= 1e-12);
  const RewardBreakdown fast_right = compute_reward(car(0, 12, 0, 30.0), false, c);
  CHECK(std::abs(fast_right.total - 0.5) <= 1e-12);
  CHECK(std::abs(fast_right.normalized - 1.0) <= 1e-12);
  const RewardBreakdown crash = compute_reward(car(0, 12, 0, 30.0), true, c);
  CHECK(std::abs(crash.total - -0.5) <= 1e-12);
  CHECK(crash.collision_term == -1.0);
  double last = -1.0;
  for (double v = 20.0; v <= 30.0; v += 0.25) {
    const double term = compute_reward(car(0, 0, 0, v), false, c).speed_term;
    CHECK(term >= last);
    last = term;
  }
}

TEST_CASE("collision terminates with the penalty") {
  HighwayEnv env;
  EnvState s = empty_road(1, 25.0, 1, 25.0);
  Npc blocker;
  blocker.vehicle = car(6.0, 4.0, 0.0, 0.0);
  blocker.target_lane = 1;
  s.npcs.push_back(blocker);
  const StepResult r = env.step(s, Action::Idle);
  CHECK(r.done);
  CHECK(r.state.collided);
  CHECK(r.reward.collision_term == -1.0);
  CHECK(r.reward.total < 0.0);
  CHECK_THROWS_AS(env.step(r.state, Action::Idle), ContractError);
}

TEST_CASE("episode ends at the horizon") {
  EnvConfig c;
  c.horizon = 3;
  c.npc_count = 0;
  HighwayEnv env(c);
  EnvState s = env.reset(3).state;
  bool done = false;
  for (int i = 0; i < 3; ++i) {
    CHECK_FALSE(done);
    env.step_inplace(s, Action::Idle, done);
  }
  CHECK(done);
}

TEST_CASE("controllers settle on an empty road") {
  HighwayEnv env;
  EnvState s = empty_road(1, 20.0, 2, 30.0);
  bool done = false;
  for (int i = 0; i < 5; ++i) env.step_inplace(s, Action::Idle, done);
  CHECK(s.ego.speed == doctest::Approx(30.0).epsilon(1e-3));
  for (int i = 0; i < 20; ++i) env.step_inplace(s, Action::Idle, done);
  CHECK(std::abs(s.ego.y - 8.0) < 0.05);
  CHECK(s.ego.lane_index == 2);
  CHECK(std::abs(s.ego.heading) < 1e-3);
}

TEST_CASE("observation layout") {
  HighwayEnv env;
  EnvState s = empty_road(3, 30.0, 3, 30.0);
  s.ego.x = 5000.0;
  Observation o = env.observe(s);
  CHECK(o[0] == 1.0);
  CHECK(o[1] == 1.0);
  CHECK(o[2] == 0.75);
  CHECK(o[3] == 0.375);
  CHECK(o[4] == 0.0);
  for (int i = 5; i < kObsSize; ++i) CHECK(o[static_cast<std::size_t>(i)] == 0.0);

  Npc left;
  left.vehicle = car(5000.0, 8.0, 0.0, 30.0);
  s.npcs.push_back(left);
  o = env.observe(s);
  CHECK(o[obs_index(1, 0)] == 1.0);
  CHECK(o[obs_index(1, 1)] == 0.0);
  CHECK(o[obs_index(1, 2)] == -0.25);
  CHECK(o[obs_index(1, 3)] == 0.0);
}

TEST_CASE("observation keeps the four nearest vehicles sorted by relative x") {
  HighwayEnv env;
  EnvState s = empty_road(0, 25.0, 0, 25.0);
  for (double x : {60.0, -3.0, 20.0, 150.0, 8.0, 40.0, -30.0}) {
    Npc n;
    n.vehicle = car(x, 4.0, 0.0, 20.0);
    s.npcs.push_back(n);
  }
  s.npcs[2].vehicle.alive = false;
  const Observation o = env.observe(s);
  CHECK(o[obs_index(1, 1)] == doctest::Approx(-0.03));
  CHECK(o[obs_index(2, 1)] == doctest::Approx(0.08));
  CHECK(o[obs_index(3, 1)] == doctest::Approx(0.40));
  CHECK(o[obs_index(4, 1)] == doctest::Approx(0.60));
  CHECK(o[obs_index(1, 3)] == doctest::Approx(-5.0 / 80.0));
  for (double v : o) CHECK(std::abs(v) <= 1.0);
}

TEST_CASE("random rollouts keep invariants and replay identically") {
  HighwayEnv env;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng = Rng::stream(seed, "test.actions");
    EnvState s = env.reset(seed).state;
    EnvState replay = s;
    bool done = false;
    while (!done) {
      const Action a = static_cast<Action>(rng.uniform_int(kNumActions));
      const RewardBreakdown r = env.step_inplace(s, a, done);
      bool done2 = false;
      const StepResult pure = env.step(replay, a);
      replay = pure.state;
      done2 = pure.done;
      REQUIRE(replay == s);
      REQUIRE(done2 == done);
      REQUIRE(r == pure.reward);
      CHECK(r.normalized >= 0.0);
      CHECK(r.normalized <= 1.0);
      CHECK(r.total == doctest::Approx(r.collision_term + r.speed_term + r.lane_term));
      CHECK(s.ego.speed >= 0.0);
      CHECK(s.ego.lane_index >= 0);
      CHECK(s.ego.lane_index <= 3);
      for (double v : pure.observation) CHECK(std::abs(v) <= 1.0);
    }
  }
}

TEST_CASE("sat basics") {
  const VehicleState a = car(0, 0);
  CHECK(sat_overlap(a, a));
  CHECK_FALSE(sat_overlap(a, car(5.5, 0)));
  CHECK(sat_overlap(a, car(4.9, 0)));
  CHECK(sat_overlap(a, car(5.0, 0)));
  CHECK_FALSE(sat_overlap(a, car(0, 2.1)));
  // Rotated so that the corner pokes into the gap that the axis-aligned box would miss.
  CHECK(sat_overlap(a, car(3.2, 1.9, std::numbers::pi / 4)));
  CHECK_FALSE(sat_overlap(a, car(4.3, 3.4, std::numbers::pi / 4)));
}

TEST_CASE("sat agrees with point sampling on random pairs") {
  Rng rng(2024);
  int disagreements = 0;
  for (int i = 0; i < 500; ++i) {
    const VehicleState a = car(0.0, 0.0, rng.uniform(-3.2, 3.2));
    const VehicleState b = car(rng.uniform(-6, 6), rng.uniform(-4, 4), rng.uniform(-3.2, 3.2));
    CHECK(sat_overlap(a, b) == sat_overlap(b, a));
    if (sat_overlap(a, b) != raster_overlap(a, b)) {
      ++disagreements;
      CHECK(sat_overlap(resized(a, 0.01), b) != sat_overlap(resized(a, -0.01), b));
    }
  }
  CHECK(disagreements <= 1);
}

TEST_CASE("rollout archive formats round trip") {
  RolloutArchive a;
  a.header = {"abc123", 42, "ffee00"};
  for (int t = 0; t < 3; ++t) {
    RolloutRecord r;
    r.epoch = 2;
    r.t = t;
    r.obs[0] = 1.0;
    r.obs[3] = 0.1 * t + 1.0 / 3.0;
    r.action = static_cast<Action>(t);
    r.reward.speed_term = 0.123456789;
    r.reward.total = 0.123456789;
    r.reward.normalized = (0.123456789 + 1.0) / 1.5;
    r.done = t == 2;
    a.records.push_back(r);
  }
  CHECK(parse_jsonl(to_jsonl(a)) == a);
  CHECK(parse_binary(to_binary(a)) == a);
  CHECK(to_jsonl(parse_jsonl(to_jsonl(a))) == to_jsonl(a));

  const auto dir = std::filesystem::temp_directory_path() / "bxrl_test_archive";
  std::filesystem::create_directories(dir);
  save_archive(dir / "a.jsonl", a);
  save_archive(dir / "a.bin", a);
  CHECK(load_archive(dir / "a.jsonl") == a);
  CHECK(load_archive(dir / "a.bin") == a);

  CHECK(a.at(2, 1).action == Action::Idle);
  CHECK_THROWS_AS(a.at(3, 1), LookupError);
  a.validate_unique();
  RolloutArchive dup = a;
  dup.records.push_back(a.records[0]);
  CHECK_THROWS_AS(dup.validate_unique(), DuplicateError);
}

TEST_CASE("corrupt archive names the record") {
  RolloutArchive a;
  a.header = {"h", 1, "c"};
  RolloutRecord r;
  a.records = {r, r, r};
  a.records[1].t = 1;
  a.records[2].t = 2;
  std::string text = to_jsonl(a);
  const auto third = text.find("\"t\":1");
  text.replace(third, 5, "\"t\":\"x\"");
  try {
    parse_jsonl(text);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("record 1") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_jsonl(""), FormatError);
  auto bytes = to_binary(a);
  bytes.resize(bytes.size() - 10);
  CHECK_THROWS_AS(parse_binary(bytes), FormatError);
}
