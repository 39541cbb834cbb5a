#pragma once

// Massless-leg quadruped model: a rigid trunk carried by four spring-damper
// foot contacts whose positions are the commanded foot targets.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "eetg/terrain.hpp"
#include "eetg/tg.hpp"

namespace eetg {

inline constexpr int kObsDim = 33;
inline constexpr int kNumRewardTerms = 5;

struct SimConfig {
  double mass = 12.0;
  // Trunk plus lumped leg inertia about the CoM, body axes.
  Eigen::Vector3d inertia{0.11, 0.27, 0.34};
  double leg_length = 0.35;
  std::array<Eigen::Vector3d, kNumLegs> hip_offsets{
      Eigen::Vector3d{0.183, 0.047, 0.0}, Eigen::Vector3d{0.183, -0.047, 0.0},
      Eigen::Vector3d{-0.183, 0.047, 0.0}, Eigen::Vector3d{-0.183, -0.047, 0.0}};
  double contact_stiffness = 4000.0;  // N/m, per foot
  double contact_damping = 120.0;     // N s/m, per foot
  double friction = 0.7;
  double contact_tolerance = 0.002;   // m
  double gravity = 9.81;
  double control_dt = 1.0 / 60.0;
  double physics_dt = 1.0 / 240.0;
  double max_episode_s = 10.0;
  double fall_height = 0.12;   // trunk height above local ground
  double tilt_limit_deg = 60.0;
  double offbeam_z = -0.5;
  bool horizontal_targets = true;  // targets in the yaw-aligned hip frame
  TGConfig tg;
  TerrainConfig terrain;

  int substeps() const { return static_cast<int>(std::lround(control_dt / physics_dt)); }
  int max_steps() const { return static_cast<int>(std::lround(max_episode_s / control_dt)); }

  void validate() const {
    if (!(physics_dt > 0.0) || !(control_dt > 0.0)) throw std::invalid_argument("time steps must be positive");
    if (std::abs(control_dt / physics_dt - substeps()) > 1e-9 || substeps() < 1)
      throw std::invalid_argument("control_dt must be an integer multiple of physics_dt");
    if (!(mass > 0.0) || !(inertia.minCoeff() > 0.0)) throw std::invalid_argument("mass and inertia must be positive");
    if (!(leg_length > 0.0)) throw std::invalid_argument("leg_length must be positive");
  }
};

struct RewardWeights {
  double w_lv = 1.0;
  double w_avt = 0.3;
  double w_avp = 0.05;
  double w_s = 0.01;
  double w_tp = 1e-5;
  double v_target = 0.25;  // reachable by an open-loop TG (stance sweep tops out near 0.2 m/s)
  double sigma_v = 0.25;
  double sigma_w = 0.5;
};

struct TrunkState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d linear_velocity = Eigen::Vector3d::Zero();   // world frame
  Eigen::Vector3d angular_velocity = Eigen::Vector3d::Zero();  // world frame
};

struct FootContact {
  bool active = false;
  Eigen::Vector2d anchor = Eigen::Vector2d::Zero();  // ground point the foot is stuck to
};

struct SimState {
  TrunkState trunk;
  std::array<FootContact, kNumLegs> contacts{};
  FootTargets targets{};       // applied on the last control step, hip frame
  FootTargets prev_targets{};  // applied on the step before
  double time = 0.0;
};

struct StepDiagnostics {
  double grf_sq = 0.0;  // sum over feet of |GRF|^2, averaged over substeps
  int contacts = 0;     // feet in stance at the end of the step
  bool workspace_ok = true;
};

inline Eigen::Vector3d clamp_to_workspace(const Eigen::Vector3d& target, double leg_length) {
  const double n = target.norm();
  if (n <= leg_length || n == 0.0) return target;
  return target * (leg_length / n);
}

inline bool finite(const TrunkState& s) {
  return s.position.allFinite() && s.orientation.coeffs().allFinite() && s.linear_velocity.allFinite() &&
         s.angular_velocity.allFinite();
}

// Trunk placed so that the nominal stance feet just touch flat ground.
inline SimState reset_state(const SimConfig& cfg, const FootTargets& initial_targets) {
  SimState s;
  s.trunk.position = Eigen::Vector3d(0.0, 0.0, -cfg.tg.nominal_height);
  s.targets = initial_targets;
  s.prev_targets = initial_targets;
  return s;
}

namespace detail {

// Orientation of the frame foot targets are expressed in: the trunk frame, or
// its yaw-only (horizontal) counterpart.
inline Eigen::Matrix3d target_frame(const Eigen::Matrix3d& rot, const SimConfig& cfg) {
  if (!cfg.horizontal_targets) return rot;
  const double yaw = std::atan2(rot(1, 0), rot(0, 0));
  return Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

struct Wrench {
  Eigen::Vector3d force = Eigen::Vector3d::Zero();
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();  // world frame, about the CoM
  double grf_sq = 0.0;
  int contacts = 0;
};

// Contact and gravity wrench at the current state. Updates the stick/slip
// anchors of the stance feet.
inline Wrench contact_wrench(SimState& s, const Terrain& terrain, const SimConfig& cfg,
                             const FootTargets& target_rate) {
  Wrench w;
  w.force.z() = -cfg.mass * cfg.gravity;
  const Eigen::Matrix3d rot = s.trunk.orientation.toRotationMatrix();
  const Eigen::Matrix3d target_rot = target_frame(rot, cfg);
  const double k = cfg.contact_stiffness;
  const double c = cfg.contact_damping;
  for (int i = 0; i < kNumLegs; ++i) {
    const Eigen::Vector3d r = rot * cfg.hip_offsets[i] + target_rot * s.targets[i];
    const Eigen::Vector3d foot = s.trunk.position + r;
    const double ground = terrain.ground_height(foot.x(), foot.y());
    FootContact& contact = s.contacts[i];
    if (foot.z() > ground + cfg.contact_tolerance) {
      contact.active = false;
      continue;
    }
    const Eigen::Vector3d foot_vel =
        s.trunk.linear_velocity + s.trunk.angular_velocity.cross(r) + target_rot * target_rate[i];
    if (!contact.active) {
      contact.active = true;
      contact.anchor = foot.head<2>();
    }
    const double penetration = ground - foot.z();
    const double normal = std::max(0.0, k * penetration - c * foot_vel.z());

    Eigen::Vector2d tangential = Eigen::Vector2d::Zero();
    const double cap = cfg.friction * normal;
    if (cap > 0.0 && k > 0.0) {
      const Eigen::Vector2d spring = -k * (foot.head<2>() - contact.anchor);
      tangential = spring - c * foot_vel.head<2>();
      const double mag = tangential.norm();
      if (mag > cap) {
        tangential *= cap / mag;
        // slip: drag the anchor so the spring alone sits on the cone boundary
        contact.anchor = foot.head<2>() + tangential / k;
      }
    } else {
      contact.anchor = foot.head<2>();
    }

    const Eigen::Vector3d f(tangential.x(), tangential.y(), normal);
    w.force += f;
    w.torque += r.cross(f);
    w.grf_sq += f.squaredNorm();
    ++w.contacts;
  }
  return w;
}

struct Accel {
  Eigen::Vector3d linear;
  Eigen::Vector3d angular_body;
};

inline Accel accelerations(const TrunkState& t, const Wrench& w, const SimConfig& cfg) {
  const Eigen::Matrix3d rot = t.orientation.toRotationMatrix();
  const Eigen::Vector3d omega_b = rot.transpose() * t.angular_velocity;
  const Eigen::Vector3d torque_b = rot.transpose() * w.torque;
  const Eigen::Vector3d l_b = cfg.inertia.cwiseProduct(omega_b);
  return {w.force / cfg.mass, (torque_b - omega_b.cross(l_b)).cwiseQuotient(cfg.inertia)};
}

inline void kick(TrunkState& t, const Accel& a, double h) {
  t.linear_velocity += a.linear * h;
  t.angular_velocity += t.orientation.toRotationMatrix() * (a.angular_body * h);
}

inline void drift(TrunkState& t, double h) {
  t.position += t.linear_velocity * h;
  const Eigen::Vector3d omega_b = t.orientation.conjugate() * t.angular_velocity;
  const double angle = omega_b.norm() * h;
  if (angle > 0.0) {
    t.orientation = t.orientation * Eigen::Quaterniond(Eigen::AngleAxisd(angle, omega_b.normalized()));
  }
  // Keep the world-frame angular velocity consistent with the new attitude.
  t.angular_velocity = t.orientation * omega_b;
  t.orientation.normalize();
}

}  // namespace detail

// Applies new hip-frame foot targets and integrates one control period with
// velocity-Verlet substeps (exact for ballistic flight).
inline StepDiagnostics step_control(SimState& s, const FootTargets& targets, const Terrain& terrain,
                                    const SimConfig& cfg) {
  StepDiagnostics diag;
  s.prev_targets = s.targets;
  for (int i = 0; i < kNumLegs; ++i) {
    s.targets[i] = clamp_to_workspace(targets[i], cfg.leg_length);
    if (s.targets[i].norm() > cfg.leg_length * (1.0 + 1e-12)) diag.workspace_ok = false;
  }
  FootTargets rate;
  for (int i = 0; i < kNumLegs; ++i) rate[i] = (s.targets[i] - s.prev_targets[i]) / cfg.control_dt;

  const int n = cfg.substeps();
  const double h = cfg.physics_dt;
  detail::Wrench w = detail::contact_wrench(s, terrain, cfg, rate);
  for (int k = 0; k < n; ++k) {
    detail::kick(s.trunk, detail::accelerations(s.trunk, w, cfg), 0.5 * h);
    detail::drift(s.trunk, h);
    w = detail::contact_wrench(s, terrain, cfg, rate);
    detail::kick(s.trunk, detail::accelerations(s.trunk, w, cfg), 0.5 * h);
    diag.grf_sq += w.grf_sq / n;
  }
  diag.contacts = w.contacts;
  s.time += cfg.control_dt;
  return diag;
}

using RewardTerms = std::array<double, kNumRewardTerms>;

// Per-step reward terms (linear velocity tracking, yaw-rate tracking,
// roll/pitch-rate penalty, target smoothness, torque proxy).
inline RewardTerms reward_step(const TrunkState& next, const FootTargets& targets, const FootTargets& prev_targets,
                               double grf_sq, const RewardWeights& w) {
  const Eigen::Vector3d& v = next.linear_velocity;
  const Eigen::Vector3d& om = next.angular_velocity;
  const double dv = v.x() - w.v_target;
  double smooth = 0.0;
  for (int i = 0; i < kNumLegs; ++i) smooth += (targets[i] - prev_targets[i]).squaredNorm();
  return {w.w_lv * std::exp(-dv * dv / (w.sigma_v * w.sigma_v)),
          w.w_avt * std::exp(-om.z() * om.z() / (w.sigma_w * w.sigma_w)),
          -w.w_avp * (om.x() * om.x() + om.y() * om.y()), -w.w_s * smooth, -w.w_tp * grf_sq};
}

using RobotObs = Eigen::Matrix<double, kObsDim, 1>;

// gravity in base (3), base linear velocity (3), base angular velocity (3),
// foot positions in base (12), foot velocities in base (12)
inline RobotObs observe(const SimState& s, const SimConfig& cfg) {
  RobotObs obs;
  const Eigen::Matrix3d rt = s.trunk.orientation.toRotationMatrix().transpose();
  obs.segment<3>(0) = rt * Eigen::Vector3d(0.0, 0.0, -1.0);
  obs.segment<3>(3) = rt * s.trunk.linear_velocity;
  obs.segment<3>(6) = rt * s.trunk.angular_velocity;
  for (int i = 0; i < kNumLegs; ++i) {
    obs.segment<3>(9 + 3 * i) = cfg.hip_offsets[i] + s.targets[i];
    obs.segment<3>(21 + 3 * i) = (s.targets[i] - s.prev_targets[i]) / cfg.control_dt;
  }
  return obs;
}

struct Attitude {
  double roll;
  double pitch;
};

inline Attitude attitude(const Eigen::Quaterniond& q) {
  const Eigen::Matrix3d r = q.toRotationMatrix();
  return {std::atan2(r(2, 1), r(2, 2)), std::asin(std::clamp(-r(2, 0), -1.0, 1.0))};
}

enum class Termination : int { TimeLimit = 0, Fell = 1, OffBeam = 2, Diverged = 3 };

inline const char* termination_name(Termination t) {
  switch (t) {
    case Termination::TimeLimit: return "TimeLimit";
    case Termination::Fell: return "Fell";
    case Termination::OffBeam: return "OffBeam";
    case Termination::Diverged: return "Diverged";
  }
  return "?";
}

inline Termination parse_termination(std::string_view s) {
  for (auto t : {Termination::TimeLimit, Termination::Fell, Termination::OffBeam, Termination::Diverged})
    if (s == termination_name(t)) return t;
  throw std::invalid_argument("unknown termination '" + std::string(s) + "'");
}

// nullopt while the episode may continue.
inline std::optional<Termination> check_termination(const SimState& s, const Terrain& terrain, const SimConfig& cfg) {
  if (!finite(s.trunk)) return Termination::Diverged;
  const Eigen::Vector3d& p = s.trunk.position;
  if (p.z() < cfg.offbeam_z) return Termination::OffBeam;
  if (p.z() - terrain.ground_height(p.x(), p.y()) < cfg.fall_height) return Termination::Fell;
  const auto att = attitude(s.trunk.orientation);
  const double limit = cfg.tilt_limit_deg * std::numbers::pi / 180.0;
  if (std::abs(att.roll) > limit || std::abs(att.pitch) > limit) return Termination::Fell;
  return std::nullopt;
}

}  // namespace eetg
