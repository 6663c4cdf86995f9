#include "agil/env/course.hpp"

#include <cmath>

namespace agil::env {

namespace {
constexpr double kPi = 3.14159265358979323846;

// body-frame point of a world point relative to (pos, yaw)
Eigen::Vector2d to_body(const Eigen::Vector2d& world, const Eigen::Vector2d& pos,
                        double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  const Eigen::Vector2d d = world - pos;
  return {c * d.x() + s * d.y(), -s * d.x() + c * d.y()};
}

Eigen::Vector2d to_world(const Eigen::Vector2d& body, const Eigen::Vector2d& pos,
                         double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {pos.x() + c * body.x() - s * body.y(), pos.y() + s * body.x() + c * body.y()};
}

double obstacle_intensity(int kind) { return 0.4 + 0.1 * kind; }

bool inside_obstacle(const Obstacle& ob, const Eigen::Vector2d& p) {
  const Eigen::Vector2d local = to_body(p, {ob.x, ob.y}, ob.yaw);
  switch (ob.kind) {
    case kBarJump:
      return std::abs(local.x()) <= 0.08 && std::abs(local.y()) <= 1.2;
    case kTireJump:
      return std::abs(local.x()) <= 0.08 && std::abs(local.y()) <= 0.7;
    case kGate:
      return std::abs(local.x()) <= 0.08 && std::abs(local.y()) <= 2.4 &&
             std::abs(local.y() - ob.gap) > 0.55;
    case kPoles:
      for (double off : {-1.2, 0.0, 1.2})
        if (std::abs(local.x()) <= 0.15 && std::abs(local.y() - off) <= 0.15)
          return true;
      return false;
    case kTunnel:
      return std::abs(local.x()) <= 0.8 && std::abs(local.y()) <= 1.4 &&
             std::abs(local.y()) >= 0.45;
    case kBlock:
      return std::abs(local.x()) <= 0.4 &&
             std::abs(local.y() - (ob.gap >= 0.0 ? 0.45 : -0.45)) <= 1.0;
    default:
      return false;
  }
}

}  // namespace

CourseLayout random_course(Rng& rng, int n_obstacles) {
  CourseLayout layout;
  // one obstacle of each kind in random order (extras cycle through kinds)
  std::vector<int> kinds;
  for (int i = 0; i < n_obstacles; ++i) kinds.push_back(i % kObstacleKinds);
  for (int i = n_obstacles - 1; i > 0; --i)
    std::swap(kinds[static_cast<std::size_t>(i)],
              kinds[static_cast<std::size_t>(rng.randint(i + 1))]);

  double x = 4.0;
  for (int i = 0; i < n_obstacles; ++i) {
    Obstacle ob;
    ob.kind = kinds[static_cast<std::size_t>(i)];
    ob.x = x + rng.uniform(-0.6, 0.6);
    ob.y = rng.uniform(-1.0, 1.0);
    ob.yaw = rng.uniform(-0.25, 0.25);
    ob.gap = rng.uniform(-1.2, 1.2);
    layout.obstacles.push_back(ob);
    x += 4.0;
  }
  layout.goal_x = x;
  for (const Obstacle& ob : layout.obstacles) {
    Eigen::Vector2d wpt(ob.x, ob.y);
    if (ob.kind == kGate) wpt = to_world({0.0, ob.gap}, {ob.x, ob.y}, ob.yaw);
    if (ob.kind == kPoles) wpt = to_world({0.0, 0.6}, {ob.x, ob.y}, ob.yaw);
    if (ob.kind == kBlock) wpt = to_world({0.0, ob.gap >= 0.0 ? -1.3 : 1.3},
                                          {ob.x, ob.y}, ob.yaw);
    layout.waypoints.push_back(wpt);
  }
  layout.waypoints.emplace_back(layout.goal_x, 0.0);
  return layout;
}

CourseEnv::CourseEnv(CourseLayout layout, CourseConfig config)
    : layout_(std::move(layout)),
      config_(config),
      gait_ctrl_(0, 0.0, GaitCommand{}, 0.0) {
  require(!layout_.obstacles.empty(), "CourseEnv: layout has no obstacles");
  require(layout_.waypoints.size() == layout_.obstacles.size() + 1,
          "CourseEnv: one waypoint per obstacle plus the goal required");
}

void CourseEnv::reset(Rng& rng) {
  state_ = CourseState{};
  state_.position = {0.5, rng.uniform(-0.6, 0.6)};
  state_.yaw = rng.uniform(-0.2, 0.2);
  GaitCommand cmd;
  cmd.mode = 2;
  cmd.vx = 0.8;
  gait_ctrl_ = ScriptedGaitController(2, 0.0, cmd, rng.uniform(0.0, 2.0 * kPi));
  state_.gait = gait_ctrl_.settled_state(config_.gait);
  state_.gait.body_velocity[0] = 0.0;
}

double CourseEnv::occupancy(double x, double y) const {
  const Eigen::Vector2d p(x, y);
  for (const Obstacle& ob : layout_.obstacles)
    if (inside_obstacle(ob, p)) return obstacle_intensity(ob.kind);
  return 0.0;
}

bool CourseEnv::jump_cleared(const Obstacle& ob) const {
  // all-in-phase pattern within tolerance
  double worst = 0.0;
  for (int i = 1; i < kLimbs; ++i)
    worst = std::max(worst, std::abs(wrap_angle_pi(state_.gait.limb_phase[i] -
                                                   state_.gait.limb_phase[0])));
  if (worst > config_.jump_pattern_tol) return false;
  const double amp = state_.gait.limb_amplitude.mean();
  const double need = ob.kind == kBarJump ? config_.bar_amp_need : config_.tire_amp_need;
  return amp >= need;
}

bool CourseEnv::collides_at(const Eigen::Vector2d& pos) const {
  // sample the robot disc at its center and four cardinal points
  const double r = config_.robot_radius;
  const Eigen::Vector2d probes[5] = {
      pos, pos + Eigen::Vector2d(r, 0), pos + Eigen::Vector2d(-r, 0),
      pos + Eigen::Vector2d(0, r), pos + Eigen::Vector2d(0, -r)};
  for (const Obstacle& ob : layout_.obstacles) {
    const bool jump_kind = ob.kind == kBarJump || ob.kind == kTireJump;
    for (const auto& p : probes) {
      if (!inside_obstacle(ob, p)) continue;
      if (!jump_kind) return true;
      if (!jump_cleared(ob)) return true;
    }
  }
  return false;
}

StepEvents CourseEnv::apply(const rl::HybridAction& command) {
  require(!state_.done, "CourseEnv::apply: episode already finished");
  const rl::HybridAction cmd = clamp_command(command);

  GaitCommand gc;
  gc.mode = cmd.mode;
  gc.vx = cmd.continuous[1];
  gc.vy = cmd.continuous[2];
  gc.yaw_rate = cmd.continuous[3];
  gc.height = cmd.continuous[4];
  gait_ctrl_.set_mode(cmd.mode);
  gait_ctrl_.set_style(cmd.continuous[0]);
  gait_ctrl_.set_command(gc);

  MultiGaitParams p = config_.gait;
  p.freq *= 1.0 + 0.15 * cmd.continuous[5];

  const Vector u = gait_ctrl_.act(state_.gait, p);
  state_.gait = step_multigait(state_.gait, u, p);

  state_.yaw_rate = state_.gait.heading_rate;
  state_.yaw = wrap_angle_pi(state_.yaw + state_.yaw_rate * config_.dt);
  const Eigen::Vector2d v_world = world_velocity();
  state_.position += v_world * config_.dt;
  state_.step_count += 1;

  StepEvents ev;
  Eigen::Vector2d wpt = current_waypoint();
  if ((wpt - state_.position).norm() < config_.reach_radius) {
    ev.reached = true;
    state_.waypoint_index += 1;
    if (state_.waypoint_index >= static_cast<int>(layout_.waypoints.size())) {
      state_.success = true;
      state_.done = true;
    }
  }
  if (!state_.done && collides_at(state_.position)) {
    ev.collided = true;
    ev.terminated = true;
    state_.terminated = true;
    state_.done = true;
  }
  if (!state_.done && state_.step_count >= config_.step_limit) {
    ev.terminated = true;
    state_.terminated = true;
    state_.done = true;
  }
  return ev;
}

Eigen::Vector2d CourseEnv::current_waypoint() const {
  const int i = std::min(state_.waypoint_index,
                         static_cast<int>(layout_.waypoints.size()) - 1);
  return layout_.waypoints[static_cast<std::size_t>(i)];
}

Eigen::Vector2d CourseEnv::next_waypoint() const {
  const int i = std::min(state_.waypoint_index + 1,
                         static_cast<int>(layout_.waypoints.size()) - 1);
  return layout_.waypoints[static_cast<std::size_t>(i)];
}

int CourseEnv::current_obstacle_kind() const {
  const int i = std::min(state_.waypoint_index,
                         static_cast<int>(layout_.obstacles.size()) - 1);
  return layout_.obstacles[static_cast<std::size_t>(i)].kind;
}

double CourseEnv::delta_yaw() const {
  const Eigen::Vector2d d = current_waypoint() - state_.position;
  return wrap_angle_pi(std::atan2(d.y(), d.x()) - state_.yaw);
}

double CourseEnv::delta_yaw_next() const {
  const Eigen::Vector2d d = next_waypoint() - state_.position;
  return wrap_angle_pi(std::atan2(d.y(), d.x()) - state_.yaw);
}

Eigen::Vector2d CourseEnv::world_velocity() const {
  const double c = std::cos(state_.yaw), s = std::sin(state_.yaw);
  const double vx = state_.gait.body_velocity[0], vy = state_.gait.body_velocity[1];
  return {c * vx - s * vy, s * vx + c * vy};
}

Vector CourseEnv::scandots() const {
  Vector out(kScanRows * kScanCols);
  int k = 0;
  for (int r = 0; r < kScanRows; ++r) {
    const double bx = 0.2 + 3.2 * r / (kScanRows - 1);
    for (int c = 0; c < kScanCols; ++c, ++k) {
      const double by = -1.8 + 3.6 * c / (kScanCols - 1);
      const Eigen::Vector2d w = to_world({bx, by}, state_.position, state_.yaw);
      out[k] = occupancy(w.x(), w.y());
    }
  }
  return out;
}

Vector CourseEnv::raster() const {
  Vector out(kRasterG * kRasterG);
  int k = 0;
  for (int r = 0; r < kRasterG; ++r) {
    const double bx = 0.125 + 4.0 * r / kRasterG;
    for (int c = 0; c < kRasterG; ++c, ++k) {
      const double by = -2.0 + 0.125 + 4.0 * c / kRasterG;
      const Eigen::Vector2d w = to_world({bx, by}, state_.position, state_.yaw);
      out[k] = std::min(1.0, std::max(0.0, occupancy(w.x(), w.y())));
    }
  }
  return out;
}

Vector CourseEnv::proprio() const {
  Vector o(kCourseProprioDim);
  o[0] = state_.gait.body_velocity[0];
  o[1] = state_.gait.body_velocity[1];
  o[2] = state_.yaw_rate;
  o[3] = state_.gait.height;
  for (int i = 0; i < kLimbs; ++i) {
    o[4 + i] = std::sin(state_.gait.limb_phase[i]);
    o[8 + i] = std::cos(state_.gait.limb_phase[i]);
    o[12 + i] = state_.gait.limb_amplitude[i];
  }
  return o;
}

Vector CourseEnv::gait_feature_row() const { return gait_features(state_.gait); }

CourseRewardBreakdown course_rewards(const Eigen::Vector2d& velocity_world,
                                     const Eigen::Vector2d& position, double yaw,
                                     const Eigen::Vector2d& waypoint, double v_target,
                                     const Vector& action_vec,
                                     const Vector& prev_action_vec,
                                     const StepEvents& events) {
  CourseRewardBreakdown b;
  const Eigen::Vector2d diff = waypoint - position;
  const double dist = diff.norm();
  bool reached = events.reached;
  if (dist < 1e-9) {
    reached = true;  // counted reached before any direction is computed
  } else {
    const Eigen::Vector2d d_wpt = diff / dist;
    b.velocity = 0.3 * std::min(velocity_world.dot(d_wpt), v_target);
    const double dyaw = wrap_angle_pi(std::atan2(diff.y(), diff.x()) - yaw);
    b.yaw = 2.0 * std::exp(-dyaw * dyaw);
  }
  b.waypoint = reached ? 5.0 : 0.0;
  b.termination = events.terminated ? -50.0 : 0.0;
  b.collision = events.collided ? -20.0 : 0.0;
  b.smoothness = -0.1 * (action_vec - prev_action_vec).squaredNorm();
  b.total = b.velocity + b.yaw + b.waypoint + b.termination + b.collision + b.smoothness;
  return b;
}

Vector hybrid_action_vector(const rl::HybridAction& action, int num_modes) {
  Vector v = Vector::Zero(num_modes + action.continuous.size());
  v[action.mode] = 1.0;
  v.segment(num_modes, action.continuous.size()) = action.continuous;
  return v;
}

rl::HybridAction clamp_command(const rl::HybridAction& raw) {
  require(raw.continuous.size() == kCommandDim, "clamp_command: command width");
  rl::HybridAction out = raw;
  const CommandRanges r = command_ranges(raw.mode);
  auto cl = [](double x, double lo, double hi) {
    require_finite(x, "clamp_command: non-finite command");
    return std::min(hi, std::max(lo, x));
  };
  out.continuous[0] = cl(raw.continuous[0], -1.0, 1.0);
  out.continuous[1] = cl(raw.continuous[1], r.vx_lo, r.vx_hi);
  out.continuous[2] = cl(raw.continuous[2], r.vy_lo, r.vy_hi);
  out.continuous[3] = cl(raw.continuous[3], r.wz_lo, r.wz_hi);
  out.continuous[4] = cl(raw.continuous[4], r.h_lo, r.h_hi);
  out.continuous[5] = cl(raw.continuous[5], -1.0, 1.0);
  return out;
}

}  // namespace agil::env
