#pragma once

#include <vector>

#include "agil/env/expert.hpp"
#include "agil/env/multigait.hpp"
#include "agil/rl/core.hpp"

namespace agil::env {

inline constexpr int kObstacleKinds = 6;
inline constexpr int kRasterG = 16;
inline constexpr int kScanRows = 11;
inline constexpr int kScanCols = 12;
inline constexpr int kCourseProprioDim = 16;
inline constexpr int kCommandDim = 6;  // style, vx, vy, wz, height, freq trim

// Kinds 0 and 1 must be cleared in a mode-4 jump with enough amplitude; the
// other four are solid and must be steered around through their gaps.
enum ObstacleKind : int {
  kBarJump = 0,
  kTireJump = 1,
  kGate = 2,
  kPoles = 3,
  kTunnel = 4,
  kBlock = 5,
};

struct Obstacle {
  int kind = kBarJump;
  double x = 0.0;   // center
  double y = 0.0;
  double yaw = 0.0;
  double gap = 0.0;  // lateral gap offset for steer kinds
};

struct CourseLayout {
  std::vector<Obstacle> obstacles;
  std::vector<Eigen::Vector2d> waypoints;  // one per obstacle plus final goal
  double goal_x = 26.0;
};

CourseLayout random_course(Rng& rng, int n_obstacles = 6);

struct CourseConfig {
  double dt = kControlDt;
  int step_limit = 1200;
  double reach_radius = 0.4;
  double robot_radius = 0.15;
  double v_target = 2.0;
  double bar_amp_need = 0.95;
  double tire_amp_need = 1.10;
  double jump_pattern_tol = 0.7;  // rad
  MultiGaitParams gait;
};

struct CourseState {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double yaw = 0.0;
  double yaw_rate = 0.0;
  MultiGaitState gait;
  int waypoint_index = 0;
  int step_count = 0;
  bool done = false;
  bool terminated = false;
  bool success = false;
};

struct StepEvents {
  bool reached = false;
  bool collided = false;
  bool terminated = false;
};

// Course world: a lane of randomized obstacles traversed by waypoints. The
// hybrid command is executed by the scripted gait layer (the command-tracking
// law shared with the expert generator), which also produces the imitation
// features scored by the frozen discriminator.
class CourseEnv {
 public:
  CourseEnv(CourseLayout layout, CourseConfig config);

  void reset(Rng& rng);
  StepEvents apply(const rl::HybridAction& command);

  const CourseState& state() const { return state_; }
  const CourseLayout& layout() const { return layout_; }
  const CourseConfig& config() const { return config_; }

  Eigen::Vector2d current_waypoint() const;
  Eigen::Vector2d next_waypoint() const;
  int current_obstacle_kind() const;
  double delta_yaw() const;
  double delta_yaw_next() const;
  Eigen::Vector2d world_velocity() const;

  Vector scandots() const;          // kScanRows * kScanCols ground-truth grid
  Vector raster() const;            // kRasterG^2 student view
  Vector proprio() const;           // kCourseProprioDim
  Vector gait_feature_row() const;  // o^I features of the internal gait

  // Occupancy intensity at a world point (0 when free). Jump kinds report
  // their footprint too; clearing them is a matter of gait, not geometry.
  double occupancy(double x, double y) const;

 private:
  bool collides_at(const Eigen::Vector2d& pos) const;
  bool jump_cleared(const Obstacle& ob) const;

  CourseLayout layout_;
  CourseConfig config_;
  CourseState state_;
  ScriptedGaitController gait_ctrl_;
};

struct CourseRewardBreakdown {
  double velocity = 0.0;
  double yaw = 0.0;
  double waypoint = 0.0;
  double termination = 0.0;
  double collision = 0.0;
  double smoothness = 0.0;
  double total = 0.0;
};

// 0.3 min(<v, d_wpt>, v_target) + 2 exp(-dyaw^2) + 5 I_reach - 50 I_term
// - 20 I_collision - 0.1 ||a - a_prev||^2. d_wpt is the unit direction to the
// waypoint; at distances below 1e-9 the waypoint counts as reached before any
// direction is computed and the direction-based terms contribute zero.
CourseRewardBreakdown course_rewards(const Eigen::Vector2d& velocity_world,
                                     const Eigen::Vector2d& position, double yaw,
                                     const Eigen::Vector2d& waypoint, double v_target,
                                     const Vector& action_vec,
                                     const Vector& prev_action_vec,
                                     const StepEvents& events);

// Flattened [onehot(mode); continuous] vector used for the smoothness term.
Vector hybrid_action_vector(const rl::HybridAction& action, int num_modes);

// Clamps raw policy commands into the per-mode execution ranges.
rl::HybridAction clamp_command(const rl::HybridAction& raw);

}  // namespace agil::env
