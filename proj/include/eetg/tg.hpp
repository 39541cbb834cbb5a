#pragma once

// Closed-form foot trajectory generator shared by all four legs.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace eetg {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr int kNumLegs = 4;
inline constexpr int kNumTGParams = 5;

enum class Leg : int { FrontLeft = 0, FrontRight = 1, RearLeft = 2, RearRight = 3 };

// +1 for left legs, -1 for right legs.
constexpr double leg_side(int leg) { return (leg == 0 || leg == 2) ? 1.0 : -1.0; }

enum class Gait : int { Walk = 0, Trot = 1, Bound = 2, Pronk = 3 };

inline const char* gait_name(Gait g) {
  switch (g) {
    case Gait::Walk: return "walk";
    case Gait::Trot: return "trot";
    case Gait::Bound: return "bound";
    case Gait::Pronk: return "pronk";
  }
  return "?";
}

struct TGParams {
  double swing = 0.0;     // m, [0, 0.08]
  double turn = 0.0;      // m, [0, 0.15]
  double lift = 0.0;      // m, [0, 0.2]
  double y_offset = 0.0;  // m, [-0.05, 0.12]
  double gait_latent = 0.0;  // [0, 4), floored to a Gait

  using Vector = std::array<double, kNumTGParams>;

  static constexpr Vector lower() { return {0.0, 0.0, 0.0, -0.05, 0.0}; }
  static constexpr Vector upper() { return {0.08, 0.15, 0.2, 0.12, 4.0}; }
  static Vector width() {
    Vector w{};
    for (int i = 0; i < kNumTGParams; ++i) w[i] = upper()[i] - lower()[i];
    return w;
  }

  Vector to_vector() const { return {swing, turn, lift, y_offset, gait_latent}; }
  static TGParams from_vector(std::span<const double> v) {
    if (v.size() != kNumTGParams) throw std::invalid_argument("TGParams needs 5 components");
    return {v[0], v[1], v[2], v[3], v[4]};
  }

  friend bool operator==(const TGParams&, const TGParams&) = default;
};

// Largest representable latent strictly below 4.
inline const double kMaxGaitLatent = std::nextafter(4.0, 0.0);

inline double clamp_gait_latent(double latent) {
  if (!std::isfinite(latent)) return 0.0;
  return std::clamp(latent, 0.0, kMaxGaitLatent);
}

// Projects every component onto its range. Idempotent.
inline TGParams clamp(const TGParams& p) {
  auto v = p.to_vector();
  const auto lo = TGParams::lower();
  const auto hi = TGParams::upper();
  for (int i = 0; i < 4; ++i) v[i] = std::isfinite(v[i]) ? std::clamp(v[i], lo[i], hi[i]) : lo[i];
  v[4] = clamp_gait_latent(v[4]);
  return TGParams::from_vector(v);
}

inline bool in_range(const TGParams& p) {
  auto v = p.to_vector();
  const auto lo = TGParams::lower();
  const auto hi = TGParams::upper();
  for (int i = 0; i < 4; ++i)
    if (!(v[i] >= lo[i] && v[i] <= hi[i])) return false;
  return v[4] >= 0.0 && v[4] < 4.0;
}

struct GaitOffsets {
  Gait gait = Gait::Walk;
  std::array<double, kNumLegs> offsets{};  // FL, FR, RL, RR as cycle fractions
};

inline GaitOffsets gait_offsets(Gait g) {
  switch (g) {
    case Gait::Walk: return {g, {0.0, 0.25, 0.5, 0.75}};
    case Gait::Trot: return {g, {0.0, 0.5, 0.5, 0.0}};
    case Gait::Bound: return {g, {0.0, 0.5, 0.0, 0.5}};
    case Gait::Pronk: return {g, {0.0, 0.0, 0.0, 0.0}};
  }
  throw std::invalid_argument("unknown gait");
}

inline GaitOffsets decode_gait(double latent) {
  return gait_offsets(static_cast<Gait>(static_cast<int>(std::floor(clamp_gait_latent(latent)))));
}

inline double encode_gait(Gait g) { return static_cast<double>(static_cast<int>(g)); }

struct TGConfig {
  double base_freq = 1.25;        // Hz
  double nominal_height = -0.27;  // m, foot z below the hip during stance
  double lateral_offset = 0.08;   // m, |y| of the nominal foot relative to its hip
};

inline double wrap_2pi(double phi) {
  double w = std::fmod(phi, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

struct TGState {
  std::array<double, kNumLegs> phase{};
  std::array<double, kNumLegs> freq{};  // total frequency applied on the last advance, Hz
};

inline TGState initial_tg_state(const GaitOffsets& gait, const TGConfig& cfg = {}) {
  TGState s;
  for (int i = 0; i < kNumLegs; ++i) {
    s.phase[i] = wrap_2pi(kTwoPi * gait.offsets[i]);
    s.freq[i] = cfg.base_freq;
  }
  return s;
}

struct PhaseAdvance {
  TGState state;
  int nonfinite_residuals = 0;
};

// Integrates each leg's phase by 2*pi*(f0 + f_i)*dt. The total frequency is
// kept in [0, 2 f0] so the phase never runs backwards.
inline PhaseAdvance advance_phase(const TGState& state, std::span<const double, kNumLegs> freq_residuals,
                                  double dt, const TGConfig& cfg = {}) {
  if (!(dt > 0.0)) throw std::invalid_argument("advance_phase: dt must be positive");
  PhaseAdvance out{state, 0};
  for (int i = 0; i < kNumLegs; ++i) {
    double res = freq_residuals[i];
    if (!std::isfinite(res)) {
      res = 0.0;
      ++out.nonfinite_residuals;
    }
    const double f = std::clamp(cfg.base_freq + res, 0.0, 2.0 * cfg.base_freq);
    out.state.freq[i] = f;
    out.state.phase[i] = wrap_2pi(state.phase[i] + kTwoPi * f * dt);
  }
  return out;
}

// Lateral foot position at the centre of the trajectory, hip frame.
inline double lateral_center(const TGParams& p, int leg, const TGConfig& cfg = {}) {
  return leg_side(leg) * (cfg.lateral_offset + p.y_offset);
}

using FootTarget = Eigen::Vector3d;
using FootTargets = std::array<FootTarget, kNumLegs>;

// Foot position in the hip frame for a given phase. The first half cycle
// keeps the foot at the nominal height while it sweeps from x = s back to 0;
// the second half lifts it by up to l and moves it laterally by up to t.
inline FootTarget foot_target(const TGParams& p, double phase, int leg, const TGConfig& cfg = {}) {
  const double phi = wrap_2pi(phase);
  const double beta1 = (std::sin(phi + std::numbers::pi / 2.0) - 1.0) / 2.0;
  const double beta2 = (std::sin(2.0 * phi + std::numbers::pi / 2.0) - 1.0) / 2.0;
  const double y_delta = lateral_center(p, leg, cfg);
  const double h = cfg.nominal_height;

  FootTarget target;
  target.x() = p.swing * beta1 + p.swing;
  if (phi <= std::numbers::pi) {
    target.y() = y_delta;
    target.z() = h;
  } else {
    target.y() = y_delta - p.turn * beta2;
    target.z() = h - p.lift * beta2;
  }
  return target;
}

inline FootTargets foot_targets(const TGParams& p, const TGState& s, const TGConfig& cfg = {}) {
  FootTargets out;
  for (int i = 0; i < kNumLegs; ++i) out[i] = foot_target(p, s.phase[i], i, cfg);
  return out;
}

}  // namespace eetg
