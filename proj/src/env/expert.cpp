#include "agil/env/expert.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace agil::env {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kPhaseKp = 1.5;
constexpr double kVelKp = 1.2;
constexpr double kYawKp = 1.2;
}  // namespace

const std::array<std::array<double, kLimbs>, kModes>& mode_phase_offsets() {
  static const std::array<std::array<double, kLimbs>, kModes> offsets = {{
      {0.0, 0.5 * kPi, kPi, 1.5 * kPi},  // walk
      {0.0, kPi, 0.0, kPi},              // pace (lateral pairs)
      {0.0, kPi, kPi, 0.0},              // trot (diagonal pairs)
      {0.0, 0.0, 0.0, kPi},              // canter (3-1 grouping)
      {0.0, 0.0, 0.0, 0.0},              // jump (all in phase)
  }};
  return offsets;
}

ScriptedGaitController::ScriptedGaitController(int mode, double style,
                                               GaitCommand command,
                                               double initial_ref_phase)
    : mode_(mode), style_(style), command_(command), ref_phase_(initial_ref_phase) {
  require(mode >= 0 && mode < kModes, "ScriptedGaitController: mode out of range");
}

double ScriptedGaitController::base_drive(const MultiGaitParams& p) const {
  if (mode_ == 4) {
    // peak pulse height: h_base + pulse_gain * (1 - deadband) * amp; invert
    // for the commanded jump height
    const double amp_needed =
        (command_.height - p.h_base) / (p.pulse_gain * (1.0 - p.pulse_deadband));
    return std::min(1.0, std::max(-1.0, (amp_needed / p.amp_base - 1.0) / p.amp_gain));
  }
  return std::min(1.0, std::max(-1.0, 0.5 * style_));
}

Vector ScriptedGaitController::act(const MultiGaitState& s, const MultiGaitParams& p) {
  const double u_base = base_drive(p);
  const auto& offsets = mode_phase_offsets()[static_cast<std::size_t>(mode_)];
  Vector u = Vector::Zero(kGaitActionDim);
  for (int i = 0; i < kLimbs; ++i) {
    const double err = wrap_angle_pi(ref_phase_ + offsets[static_cast<std::size_t>(i)] -
                                     s.limb_phase[i]);
    u[i] = std::min(1.0, std::max(-1.0, u_base + kPhaseKp * err));
  }
  u[4] = std::min(1.0, std::max(-1.0, p.drag * command_.vx / p.acc_gain +
                                          kVelKp * (command_.vx - s.body_velocity[0])));
  u[5] = std::min(1.0, std::max(-1.0, p.drag * command_.vy / p.acc_gain +
                                          kVelKp * (command_.vy - s.body_velocity[1])));
  u[6] = std::min(1.0, std::max(-1.0, p.turn_drag * command_.yaw_rate / p.turn_gain +
                                          kYawKp * (command_.yaw_rate - s.heading_rate)));
  ref_phase_ = wrap_angle_2pi(ref_phase_ + (p.freq + p.freq_gain * u_base) * p.dt);
  return u;
}

MultiGaitState ScriptedGaitController::settled_state(const MultiGaitParams& p) const {
  MultiGaitState s;
  const auto& offsets = mode_phase_offsets()[static_cast<std::size_t>(mode_)];
  const double amp = p.amp_base * (1.0 + p.amp_gain * base_drive(p));
  for (int i = 0; i < kLimbs; ++i) {
    s.limb_phase[i] =
        wrap_angle_2pi(ref_phase_ + offsets[static_cast<std::size_t>(i)]);
    s.limb_amplitude[i] = amp;
  }
  s.body_velocity[0] = command_.vx;
  s.body_velocity[1] = command_.vy;
  s.heading_rate = command_.yaw_rate;
  s.height = p.h_base;
  return s;
}

Matrix scripted_trajectory(int mode, double style, double vx, int steps,
                           double initial_ref_phase, const MultiGaitParams& params) {
  GaitCommand cmd;
  cmd.mode = mode;
  cmd.vx = vx;
  cmd.height = mode == 4 ? 0.5 + 0.06 * style : 0.3;
  ScriptedGaitController ctrl(mode, style, cmd, initial_ref_phase);
  MultiGaitState s = ctrl.settled_state(params);
  Matrix rows(steps, kGaitFeatureDim);
  for (int t = 0; t < steps; ++t) {
    rows.row(t) = gait_features(s).transpose();
    s = step_multigait(s, ctrl.act(s, params), params);
  }
  return rows;
}

void DemoDataset::validate() const {
  require(horizon == kWindowH, "DemoDataset: unexpected horizon");
  require(!windows.empty(), "DemoDataset: empty");
  require(labels.size() == windows.size(), "DemoDataset: one label slot per window");
  for (const auto& w : windows)
    require(static_cast<int>(w.size()) == horizon * feature_width,
            "DemoDataset: window width mismatch");
  int labeled = 0;
  for (int y : labels) {
    require(y >= -1 && y < kModes, "DemoDataset: label out of range");
    if (y >= 0) ++labeled;
  }
  require(static_cast<double>(labeled) / static_cast<double>(windows.size()) < 0.05,
          "DemoDataset: label fraction must stay below 5%");
}

std::vector<int> DemoDataset::labeled_indices() const {
  std::vector<int> idx;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0) idx.push_back(static_cast<int>(i));
  return idx;
}

std::vector<int> DemoDataset::balanced_labeled_pool() const {
  std::array<std::vector<int>, kModes> per_mode;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0)
      per_mode[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
  std::size_t widest = 0;
  for (const auto& v : per_mode) widest = std::max(widest, v.size());
  std::vector<int> pool;
  for (const auto& v : per_mode) {
    if (v.empty()) continue;
    // labeled data is simply repeated to rebalance minority modes
    for (std::size_t k = 0; k < widest; ++k) pool.push_back(v[k % v.size()]);
  }
  return pool;
}

DemoDataset generate_expert_demos(const DemoGenConfig& cfg) {
  require(cfg.n_per_mode >= kWindowH + 1,
          "generate_expert_demos: n_per_mode must be at least H+1");
  require(cfg.style_lo <= cfg.style_hi, "generate_expert_demos: bad style range");
  require(cfg.label_fraction < 0.05, "generate_expert_demos: label fraction >= 5%");
  double prop_sum = 0.0;
  for (double p : cfg.proportions) prop_sum += p;
  require(std::abs(prop_sum - 1.0) < 1e-9,
          "generate_expert_demos: proportions must sum to 1");

  MultiGaitParams params;
  Rng rng(cfg.seed);
  DemoDataset data;
  data.mode_proportions = Vector::Zero(kModes);

  const int total_target = kModes * cfg.n_per_mode;
  std::array<int, kModes> counts{};
  for (int mode = 0; mode < kModes; ++mode) {
    const int want = std::max(
        1, static_cast<int>(std::lround(total_target * cfg.proportions[static_cast<std::size_t>(mode)])));
    counts[static_cast<std::size_t>(mode)] = want;
    int have = 0;
    Rng mode_rng = rng.split(static_cast<std::uint64_t>(mode) + 1);
    while (have < want) {
      const double style = mode_rng.uniform(cfg.style_lo, cfg.style_hi);
      const CommandRanges cr = command_ranges(mode);
      const double vx = mode_rng.uniform(cr.vx_lo, cr.vx_hi);
      const double psi0 = mode_rng.uniform(0.0, 2.0 * kPi);
      Matrix rows = scripted_trajectory(mode, style, vx, cfg.traj_len, psi0, params);
      for (int t = 0; t + kWindowH <= cfg.traj_len && have < want; ++t, ++have) {
        Vector w(kWindowH * kGaitFeatureDim);
        for (int hstep = 0; hstep < kWindowH; ++hstep)
          w.segment(hstep * kGaitFeatureDim, kGaitFeatureDim) = rows.row(t + hstep);
        data.windows.push_back(std::move(w));
        data.labels.push_back(-1);
        data.true_modes.push_back(mode);
        data.true_styles.push_back(style);
      }
    }
    data.mode_proportions[mode] = static_cast<double>(want);
  }
  data.mode_proportions /= data.mode_proportions.sum();

  // deterministic sparse labeling, proportional per mode
  Rng label_rng = rng.split(1000);
  int first = 0;
  for (int mode = 0; mode < kModes; ++mode) {
    const int count = counts[static_cast<std::size_t>(mode)];
    const int n_label =
        std::max(1, static_cast<int>(std::lround(cfg.label_fraction * count)));
    std::vector<int> picked;
    while (static_cast<int>(picked.size()) < std::min(n_label, count)) {
      const int idx = first + label_rng.randint(count);
      bool dup = false;
      for (int q : picked) dup |= (q == idx);
      if (!dup) picked.push_back(idx);
    }
    for (int idx : picked) data.labels[static_cast<std::size_t>(idx)] = mode;
    first += count;
  }
  int labeled = 0;
  for (int y : data.labels)
    if (y >= 0) ++labeled;
  data.label_fraction =
      static_cast<double>(labeled) / static_cast<double>(data.count());
  data.validate();
  return data;
}

DemoDataset generate_expert_demos(int n_per_mode, double style_lo, double style_hi,
                                  std::uint64_t seed) {
  DemoGenConfig cfg;
  cfg.n_per_mode = n_per_mode;
  cfg.style_lo = style_lo;
  cfg.style_hi = style_hi;
  cfg.seed = seed;
  return generate_expert_demos(cfg);
}

void save_demos_ndjson(const std::filesystem::path& path, const DemoDataset& data) {
  std::ofstream os(path);
  require(os.good(), "save_demos_ndjson: cannot open " + path.string());
  for (int i = 0; i < data.count(); ++i) {
    nlohmann::json rec;
    nlohmann::json feats = nlohmann::json::array();
    for (int hstep = 0; hstep < data.horizon; ++hstep) {
      nlohmann::json row = nlohmann::json::array();
      for (int f = 0; f < data.feature_width; ++f)
        row.push_back(data.windows[static_cast<std::size_t>(i)][hstep * data.feature_width + f]);
      feats.push_back(row);
    }
    rec["features"] = feats;
    if (data.labels[static_cast<std::size_t>(i)] >= 0)
      rec["label"] = data.labels[static_cast<std::size_t>(i)];
    else
      rec["label"] = nullptr;
    os << rec.dump() << "\n";
  }
}

DemoDataset load_demos_ndjson(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(is.good(), "load_demos_ndjson: cannot open " + path.string());
  DemoDataset data;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    require(!rec.is_discarded(),
            "load_demos_ndjson: malformed JSON at line " + std::to_string(line_no));
    const auto& feats = rec.at("features");
    require(static_cast<int>(feats.size()) == kWindowH,
            "load_demos_ndjson: horizon mismatch at line " + std::to_string(line_no));
    for (const auto& row : feats)
      require(static_cast<int>(row.size()) == kGaitFeatureDim,
              "load_demos_ndjson: feature width mismatch at line " +
                  std::to_string(line_no));
    Vector w(kWindowH * kGaitFeatureDim);
    for (int hstep = 0; hstep < kWindowH; ++hstep)
      for (int f = 0; f < kGaitFeatureDim; ++f)
        w[hstep * kGaitFeatureDim + f] = feats[static_cast<std::size_t>(hstep)]
                                              [static_cast<std::size_t>(f)]
                                                  .get<double>();
    data.windows.push_back(std::move(w));
    data.labels.push_back(rec.at("label").is_null() ? -1 : rec.at("label").get<int>());
  }
  int labeled = 0;
  for (int y : data.labels)
    if (y >= 0) ++labeled;
  data.label_fraction = data.count() > 0
                            ? static_cast<double>(labeled) / static_cast<double>(data.count())
                            : 0.0;
  data.validate();
  return data;
}

bool window_has_height_pulse(const Vector& window, double h_base, double threshold) {
  for (int hstep = 0; hstep * kGaitFeatureDim < window.size(); ++hstep) {
    const double h = window[hstep * kGaitFeatureDim + 3 * kLimbs];
    if (h - h_base > threshold) return true;
  }
  return false;
}

double window_mean_amplitude(const Vector& window) {
  double s = 0.0;
  int n = 0;
  for (int hstep = 0; hstep * kGaitFeatureDim < window.size(); ++hstep)
    for (int i = 0; i < kLimbs; ++i, ++n)
      s += window[hstep * kGaitFeatureDim + 2 * kLimbs + i];
  return s / n;
}

}  // namespace agil::env
