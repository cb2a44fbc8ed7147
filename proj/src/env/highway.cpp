#include "bxrl/env/highway.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bxrl/common/errors.hpp"
#include "bxrl/common/hashing.hpp"

namespace bxrl::env {
namespace {

double wrap_to_pi(double angle) {
  return std::remainder(angle, 2.0 * std::numbers::pi);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid environment config: " + what);
}

int speed_slot(double speed) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(kTargetSpeeds.size()); ++i)
    if (std::abs(kTargetSpeeds[i] - speed) < std::abs(kTargetSpeeds[best] - speed)) best = i;
  return best;
}

NpcParams jitter_params(const NpcParams& base, double j, Rng& rng) {
  auto scale = [&](double v) { return v * rng.uniform(1.0 - j, 1.0 + j); };
  NpcParams p = base;
  p.idm.desired_speed = scale(base.idm.desired_speed);
  p.idm.time_headway = scale(base.idm.time_headway);
  p.idm.min_gap = scale(base.idm.min_gap);
  p.idm.max_accel = scale(base.idm.max_accel);
  p.idm.comfort_decel = scale(base.idm.comfort_decel);
  p.idm.exponent = scale(base.idm.exponent);
  p.mobil.politeness = std::clamp(scale(base.mobil.politeness), 0.0, 1.0);
  p.mobil.accel_threshold = scale(base.mobil.accel_threshold);
  p.mobil.safe_braking = scale(base.mobil.safe_braking);
  return p;
}

// One entry per simulated vehicle for the duration of a sub-step.
struct Slot {
  VehicleState* vehicle;
  int npc;  // -1 for the ego
};

}  // namespace

void EnvConfig::validate() const {
  require(lanes >= 1, "lanes must be >= 1");
  require(lane_width > 0.0, "lane_width must be > 0");
  require(vehicle_length > 0.0 && vehicle_width > 0.0, "vehicle dimensions must be > 0");
  require(npc_count >= 0, "npc_count must be >= 0");
  require(horizon >= 1, "horizon must be >= 1");
  require(substeps >= 1, "substeps must be >= 1");
  require(step_seconds > 0.0, "step_seconds must be > 0");
  require(ego_initial_speed >= 0.0, "ego_initial_speed must be >= 0");
  require(npc_speed_min >= 0.0 && npc_speed_min <= npc_speed_max, "npc speed range");
  require(spawn_spacing > vehicle_length, "spawn_spacing must exceed vehicle_length");
  require(spawn_jitter >= 0.0 && spawn_spacing * std::exp(-spawn_jitter) > vehicle_length,
          "spawn_jitter allows overlapping spawns");
  require(param_jitter >= 0.0 && param_jitter < 1.0, "param_jitter must be in [0, 1)");
  require(obs_x_range > 0.0 && obs_y_range > 0.0 && obs_v_range > 0.0,
          "observation ranges must be > 0");
  require(sensing_range > 0.0 && sensing_behind >= 0.0, "sensing ranges");
  const IdmParams& idm = npc_defaults.idm;
  require(idm.desired_speed > 0 && idm.time_headway > 0 && idm.min_gap > 0 &&
              idm.max_accel > 0 && idm.comfort_decel > 0 && idm.exponent > 0 &&
              idm.hard_brake > 0,
          "IDM parameters must be positive");
  require(npc_defaults.mobil.politeness >= 0 && npc_defaults.mobil.politeness <= 1,
          "politeness must be in [0, 1]");
  require(npc_defaults.mobil.accel_threshold > 0 && npc_defaults.mobil.safe_braking > 0,
          "MOBIL thresholds must be positive");
  require(gains.speed > 0 && gains.lateral > 0 && gains.heading > 0 && gains.max_steering > 0,
          "controller gains must be positive");
}

json EnvConfig::to_json() const {
  const IdmParams& idm = npc_defaults.idm;
  const MobilParams& mobil = npc_defaults.mobil;
  return json{
      {"lanes", lanes},
      {"lane_width", lane_width},
      {"vehicle_length", vehicle_length},
      {"vehicle_width", vehicle_width},
      {"npc_count", npc_count},
      {"horizon", horizon},
      {"substeps", substeps},
      {"step_seconds", step_seconds},
      {"ego_initial_speed", ego_initial_speed},
      {"npc_speed_min", npc_speed_min},
      {"npc_speed_max", npc_speed_max},
      {"spawn_spacing", spawn_spacing},
      {"spawn_jitter", spawn_jitter},
      {"param_jitter", param_jitter},
      {"idm",
       {{"desired_speed", idm.desired_speed},
        {"time_headway", idm.time_headway},
        {"min_gap", idm.min_gap},
        {"max_accel", idm.max_accel},
        {"comfort_decel", idm.comfort_decel},
        {"exponent", idm.exponent},
        {"hard_brake", idm.hard_brake}}},
      {"mobil",
       {{"politeness", mobil.politeness},
        {"accel_threshold", mobil.accel_threshold},
        {"safe_braking", mobil.safe_braking}}},
      {"gains",
       {{"speed", gains.speed},
        {"lateral", gains.lateral},
        {"heading", gains.heading},
        {"max_steering", gains.max_steering}}},
      {"obs_x_range", obs_x_range},
      {"obs_y_range", obs_y_range},
      {"obs_v_range", obs_v_range},
      {"sensing_range", sensing_range},
      {"sensing_behind", sensing_behind},
  };
}

EnvConfig EnvConfig::from_json(const json& j) {
  EnvConfig c;
  auto get = [&](const json& obj, const char* key, auto& field) {
    if (obj.contains(key)) field = obj.at(key).get<std::decay_t<decltype(field)>>();
  };
  get(j, "lanes", c.lanes);
  get(j, "lane_width", c.lane_width);
  get(j, "vehicle_length", c.vehicle_length);
  get(j, "vehicle_width", c.vehicle_width);
  get(j, "npc_count", c.npc_count);
  get(j, "horizon", c.horizon);
  get(j, "substeps", c.substeps);
  get(j, "step_seconds", c.step_seconds);
  get(j, "ego_initial_speed", c.ego_initial_speed);
  get(j, "npc_speed_min", c.npc_speed_min);
  get(j, "npc_speed_max", c.npc_speed_max);
  get(j, "spawn_spacing", c.spawn_spacing);
  get(j, "spawn_jitter", c.spawn_jitter);
  get(j, "param_jitter", c.param_jitter);
  if (j.contains("idm")) {
    const json& idm = j.at("idm");
    get(idm, "desired_speed", c.npc_defaults.idm.desired_speed);
    get(idm, "time_headway", c.npc_defaults.idm.time_headway);
    get(idm, "min_gap", c.npc_defaults.idm.min_gap);
    get(idm, "max_accel", c.npc_defaults.idm.max_accel);
    get(idm, "comfort_decel", c.npc_defaults.idm.comfort_decel);
    get(idm, "exponent", c.npc_defaults.idm.exponent);
    get(idm, "hard_brake", c.npc_defaults.idm.hard_brake);
  }
  if (j.contains("mobil")) {
    const json& mobil = j.at("mobil");
    get(mobil, "politeness", c.npc_defaults.mobil.politeness);
    get(mobil, "accel_threshold", c.npc_defaults.mobil.accel_threshold);
    get(mobil, "safe_braking", c.npc_defaults.mobil.safe_braking);
  }
  if (j.contains("gains")) {
    const json& g = j.at("gains");
    get(g, "speed", c.gains.speed);
    get(g, "lateral", c.gains.lateral);
    get(g, "heading", c.gains.heading);
    get(g, "max_steering", c.gains.max_steering);
  }
  get(j, "obs_x_range", c.obs_x_range);
  get(j, "obs_y_range", c.obs_y_range);
  get(j, "obs_v_range", c.obs_v_range);
  get(j, "sensing_range", c.sensing_range);
  get(j, "sensing_behind", c.sensing_behind);
  return c;
}

std::string EnvConfig::hash() const { return sha256_hex(to_json().dump()).substr(0, 16); }

EgoControl apply_action(const EgoControl& control, Action action, int lanes) {
  EgoControl next = control;
  const int slot = speed_slot(control.target_speed);
  const int top = static_cast<int>(kTargetSpeeds.size()) - 1;
  switch (action) {
    case Action::Left: next.target_lane = std::max(0, control.target_lane - 1); break;
    case Action::Right: next.target_lane = std::min(lanes - 1, control.target_lane + 1); break;
    case Action::Faster: next.target_speed = kTargetSpeeds[std::min(top, slot + 1)]; break;
    case Action::Slower: next.target_speed = kTargetSpeeds[std::max(0, slot - 1)]; break;
    case Action::Idle: break;
  }
  return next;
}

RewardBreakdown compute_reward(const VehicleState& ego, bool collided, const EnvConfig& config) {
  RewardBreakdown r;
  const double forward_speed = ego.speed * std::cos(ego.heading);
  const double speed_fraction = std::clamp((forward_speed - 20.0) / 10.0, 0.0, 1.0);
  const double lane_fraction =
      config.lanes > 1 ? static_cast<double>(ego.lane_index) / (config.lanes - 1) : 0.0;
  r.collision_term = collided ? -1.0 : 0.0;
  r.speed_term = 0.4 * speed_fraction;
  r.lane_term = 0.1 * lane_fraction;
  r.total = r.collision_term + r.speed_term + r.lane_term;
  r.normalized = (r.total + 1.0) / 1.5;
  return r;
}

HighwayEnv::HighwayEnv(EnvConfig config) : config_(std::move(config)) { config_.validate(); }

int HighwayEnv::nearest_lane(double y) const {
  const int lane = static_cast<int>(std::lround(y / config_.lane_width));
  return std::clamp(lane, 0, config_.lanes - 1);
}

bool HighwayEnv::is_terminal(const EnvState& state) const {
  return state.collided || state.t >= config_.horizon;
}

HighwayEnv::ResetResult HighwayEnv::reset(std::uint64_t seed) const {
  ResetResult out;
  EnvState& s = out.state;
  s.rng = Rng::stream(seed, "highway.reset");

  const int ego_lane = s.rng.uniform_int(config_.lanes);
  s.ego = VehicleState{0.0,  lane_center(ego_lane), 0.0,  config_.ego_initial_speed,
                       config_.vehicle_length, config_.vehicle_width, ego_lane, true};
  s.ego_control = {ego_lane, kTargetSpeeds[speed_slot(config_.ego_initial_speed)]};

  s.npcs.resize(static_cast<std::size_t>(config_.npc_count));
  double x = s.ego.x;
  for (Npc& npc : s.npcs) {
    x += config_.spawn_spacing * std::exp(s.rng.uniform(-config_.spawn_jitter, config_.spawn_jitter));
    const int lane = s.rng.uniform_int(config_.lanes);
    const double speed = s.rng.uniform(config_.npc_speed_min, config_.npc_speed_max);
    npc.vehicle = VehicleState{x, lane_center(lane), 0.0, speed,
                               config_.vehicle_length, config_.vehicle_width, lane, true};
    npc.params = jitter_params(config_.npc_defaults, config_.param_jitter, s.rng);
    npc.target_lane = lane;
  }
  s.t = 0;
  s.collided = false;
  out.observation = observe(s);
  return out;
}

StepResult HighwayEnv::step(const EnvState& state, Action action) const {
  StepResult out;
  out.state = state;
  out.reward = step_inplace(out.state, action, out.done);
  out.observation = observe(out.state);
  return out;
}

RewardBreakdown HighwayEnv::step_inplace(EnvState& state, Action action, bool& done) const {
  if (is_terminal(state))
    throw ContractError("step called on a terminal state (t=" + std::to_string(state.t) + ")");
  state.ego_control = apply_action(state.ego_control, action, config_.lanes);
  update_npc_lane_targets(state);
  const double dt = config_.step_seconds / config_.substeps;
  for (int i = 0; i < config_.substeps && !state.collided; ++i) substep(state, dt);
  ++state.t;
  done = is_terminal(state);
  return compute_reward(state.ego, state.collided, config_);
}

double HighwayEnv::steering_command(const VehicleState& v, int target_lane) const {
  const ControllerGains& g = config_.gains;
  const double speed = std::max(v.speed, 1e-2);
  const double lateral_speed = -g.lateral * (v.y - lane_center(target_lane));
  const double heading_cmd = std::asin(std::clamp(lateral_speed / speed, -1.0, 1.0));
  const double heading_ref = std::clamp(heading_cmd, -g.max_steering, g.max_steering);
  const double heading_rate = g.heading * wrap_to_pi(heading_ref - v.heading);
  const double slip =
      std::asin(std::clamp(0.5 * v.length / speed * heading_rate, -1.0, 1.0));
  return std::clamp(std::atan(2.0 * std::tan(slip)), -g.max_steering, g.max_steering);
}

void HighwayEnv::update_npc_lane_targets(EnvState& state) const {
  // Per-lane lists sorted by x, ego included.
  std::vector<std::vector<const VehicleState*>> lanes(static_cast<std::size_t>(config_.lanes));
  lanes[static_cast<std::size_t>(state.ego.lane_index)].push_back(&state.ego);
  for (const Npc& npc : state.npcs)
    if (npc.vehicle.alive) lanes[static_cast<std::size_t>(npc.vehicle.lane_index)].push_back(&npc.vehicle);
  for (auto& lane : lanes)
    std::stable_sort(lane.begin(), lane.end(),
                     [](const VehicleState* a, const VehicleState* b) { return a->x < b->x; });

  auto neighbors_in = [&](int lane, const VehicleState& self) {
    LaneNeighbors n;
    for (const VehicleState* other : lanes[static_cast<std::size_t>(lane)]) {
      if (other == &self) continue;
      if (other->x > self.x) {
        if (n.leader == nullptr) n.leader = other;
      } else {
        n.follower = other;
      }
    }
    return n;
  };

  for (Npc& npc : state.npcs) {
    VehicleState& v = npc.vehicle;
    if (!v.alive) continue;
    // Only vehicles settled in their lane consider a new change.
    if (npc.target_lane != v.lane_index) continue;
    MobilNeighbors n;
    n.current = neighbors_in(v.lane_index, v);
    if (v.lane_index > 0) n.left = neighbors_in(v.lane_index - 1, v);
    if (v.lane_index + 1 < config_.lanes) n.right = neighbors_in(v.lane_index + 1, v);
    switch (mobil_decision(v, n, npc.params)) {
      case LaneChange::Left: npc.target_lane = v.lane_index - 1; break;
      case LaneChange::Right: npc.target_lane = v.lane_index + 1; break;
      case LaneChange::Keep: break;
    }
  }
}

void HighwayEnv::substep(EnvState& state, double dt) const {
  std::vector<Slot> slots;
  slots.reserve(state.npcs.size() + 1);
  slots.push_back({&state.ego, -1});
  for (std::size_t i = 0; i < state.npcs.size(); ++i)
    if (state.npcs[i].vehicle.alive) slots.push_back({&state.npcs[i].vehicle, static_cast<int>(i)});

  // Front-to-back sweep assigns each vehicle its leader in its own lane and,
  // while changing lanes, in its target lane.
  std::vector<std::size_t> order(slots.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return slots[a].vehicle->x > slots[b].vehicle->x;
  });

  const std::size_t lane_count = static_cast<std::size_t>(config_.lanes);
  std::vector<const VehicleState*> front(lane_count, nullptr);
  std::vector<double> accel(slots.size());
  std::vector<double> steer(slots.size());
  for (std::size_t idx : order) {
    const Slot& slot = slots[idx];
    const VehicleState& v = *slot.vehicle;
    const auto lane = static_cast<std::size_t>(v.lane_index);
    if (slot.npc < 0) {
      accel[idx] = config_.gains.speed * (state.ego_control.target_speed - v.speed);
      steer[idx] = steering_command(v, state.ego_control.target_lane);
    } else {
      const Npc& npc = state.npcs[static_cast<std::size_t>(slot.npc)];
      double a = idm_acceleration(v, front[lane], npc.params.idm);
      if (npc.target_lane != v.lane_index)
        a = std::min(a, idm_acceleration(v, front[static_cast<std::size_t>(npc.target_lane)],
                                         npc.params.idm));
      accel[idx] = a;
      steer[idx] = steering_command(v, npc.target_lane);
    }
    front[lane] = &v;
  }

  const double y_min = -0.5 * config_.lane_width;
  const double y_max = (config_.lanes - 0.5) * config_.lane_width;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    VehicleState& v = *slots[i].vehicle;
    const double beta = std::atan(0.5 * std::tan(steer[i]));
    v.x += v.speed * std::cos(v.heading + beta) * dt;
    v.y = std::clamp(v.y + v.speed * std::sin(v.heading + beta) * dt, y_min, y_max);
    v.heading = wrap_to_pi(v.heading + v.speed * std::sin(beta) / (0.5 * v.length) * dt);
    v.speed = std::max(0.0, v.speed + accel[i] * dt);
    v.lane_index = nearest_lane(v.y);
  }

  // Collisions, checked between neighbours in x order.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return slots[a].vehicle->x > slots[b].vehicle->x;
  });
  const double reach = std::hypot(config_.vehicle_length, config_.vehicle_width);
  for (std::size_t a = 0; a < order.size(); ++a) {
    const Slot& sa = slots[order[a]];
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const Slot& sb = slots[order[b]];
      if (sa.vehicle->x - sb.vehicle->x > reach) break;
      if (!sa.vehicle->alive || !sb.vehicle->alive) continue;
      if (!may_overlap(*sa.vehicle, *sb.vehicle) || !sat_overlap(*sa.vehicle, *sb.vehicle))
        continue;
      if (sa.npc < 0 || sb.npc < 0) {
        state.collided = true;
      } else {
        sa.vehicle->alive = false;
        sb.vehicle->alive = false;
      }
    }
  }
}

Observation HighwayEnv::observe(const EnvState& state) const {
  Observation obs{};
  const VehicleState& ego = state.ego;
  const double ego_vx = ego.speed * std::cos(ego.heading);
  const double ego_vy = ego.speed * std::sin(ego.heading);
  auto put = [&](int row, double x, double y, double vx, double vy) {
    obs[obs_index(row, 0)] = 1.0;
    obs[obs_index(row, 1)] = std::clamp(x / config_.obs_x_range, -1.0, 1.0);
    obs[obs_index(row, 2)] = std::clamp(y / config_.obs_y_range, -1.0, 1.0);
    obs[obs_index(row, 3)] = std::clamp(vx / config_.obs_v_range, -1.0, 1.0);
    obs[obs_index(row, 4)] = std::clamp(vy / config_.obs_v_range, -1.0, 1.0);
  };
  put(0, ego.x, ego.y, ego_vx, ego_vy);

  struct Candidate {
    double dx;
    std::size_t index;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < state.npcs.size(); ++i) {
    const VehicleState& v = state.npcs[i].vehicle;
    if (!v.alive) continue;
    const double dx = v.x - ego.x;
    if (dx < -config_.sensing_behind || dx > config_.sensing_range) continue;
    candidates.push_back({dx, i});
  }
  const std::size_t keep = std::min<std::size_t>(kObsRows - 1, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                    candidates.end(), [](const Candidate& a, const Candidate& b) {
                      const double da = std::abs(a.dx), db = std::abs(b.dx);
                      return da != db ? da < db : a.index < b.index;
                    });
  candidates.resize(keep);
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.dx != b.dx ? a.dx < b.dx : a.index < b.index;
  });
  for (std::size_t r = 0; r < candidates.size(); ++r) {
    const VehicleState& v = state.npcs[candidates[r].index].vehicle;
    put(static_cast<int>(r) + 1, v.x - ego.x, v.y - ego.y,
        v.speed * std::cos(v.heading) - ego_vx, v.speed * std::sin(v.heading) - ego_vy);
  }
  return obs;
}

}  // namespace bxrl::env
