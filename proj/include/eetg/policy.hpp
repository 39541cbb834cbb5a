#pragma once

// Residual policy over a trajectory generator: input assembly, the linear /
// one-hidden-layer map, output clamps and target composition.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "eetg/rng.hpp"
#include "eetg/sim.hpp"
#include "eetg/terrain.hpp"
#include "eetg/tg.hpp"

namespace eetg {

inline constexpr int kPolicyOutputDim = 16;  // 12 foot residuals (leg-major xyz) + 4 frequency residuals
inline constexpr int kBaseInputDim = kObsDim + 2 * kNumLegs + kNumLegs + 3;
inline constexpr double kMaxFootResidual = 0.05;   // m
inline constexpr double kMaxFreqResidual = 0.625;  // Hz, half the base frequency

enum class EnvEncoding : int { None = 0, Compact = 1, OneHot = 2 };

inline const char* env_encoding_name(EnvEncoding e) {
  switch (e) {
    case EnvEncoding::None: return "none";
    case EnvEncoding::Compact: return "compact";
    case EnvEncoding::OneHot: return "onehot";
  }
  return "?";
}

inline EnvEncoding parse_env_encoding(std::string_view s) {
  for (auto e : {EnvEncoding::None, EnvEncoding::Compact, EnvEncoding::OneHot})
    if (s == env_encoding_name(e)) return e;
  throw std::invalid_argument("unknown env encoding '" + std::string(s) + "'");
}

// Input vector layout, in order:
//   robot observation (33), sin/cos of each leg phase (8), total leg
//   frequencies (4), TG swing/turn/lift (3),
//   [full TG parameter vector (5) when TG-conditioned],
//   [environment encoding: 4-way type one-hot + variation/19 (compact), or an
//    80-way cell one-hot].
struct PolicyLayout {
  bool tg_conditioned = false;
  EnvEncoding encoding = EnvEncoding::None;
  int hidden = 0;  // 0 selects the linear map
  // Physical size of one raw output unit (m, Hz). Foot targets feed straight
  // into stiff contacts, so a unit-scale map would saturate the clamps under
  // normalised inputs.
  double foot_scale = 0.01;
  double freq_scale = 0.01;

  int input_dim() const {
    int d = kBaseInputDim;
    if (tg_conditioned) d += kNumTGParams;
    if (encoding == EnvEncoding::Compact) d += kNumEnvTypes + 1;
    if (encoding == EnvEncoding::OneHot) d += kNumCells;
    return d;
  }

  int param_dim() const {
    const int in = input_dim();
    if (hidden <= 0) return in * kPolicyOutputDim + kPolicyOutputDim;
    return hidden * in + hidden + kPolicyOutputDim * hidden + kPolicyOutputDim;
  }

  std::vector<std::string> input_names() const {
    std::vector<std::string> names;
    for (auto axis : {"x", "y", "z"}) names.push_back(std::string("gravity_") + axis);
    for (auto axis : {"x", "y", "z"}) names.push_back(std::string("lin_vel_") + axis);
    for (auto axis : {"x", "y", "z"}) names.push_back(std::string("ang_vel_") + axis);
    for (int i = 0; i < kNumLegs; ++i)
      for (auto axis : {"x", "y", "z"}) names.push_back("foot" + std::to_string(i) + "_pos_" + axis);
    for (int i = 0; i < kNumLegs; ++i)
      for (auto axis : {"x", "y", "z"}) names.push_back("foot" + std::to_string(i) + "_vel_" + axis);
    for (int i = 0; i < kNumLegs; ++i) {
      names.push_back("phase" + std::to_string(i) + "_sin");
      names.push_back("phase" + std::to_string(i) + "_cos");
    }
    for (int i = 0; i < kNumLegs; ++i) names.push_back("freq" + std::to_string(i));
    for (auto n : {"tg_swing", "tg_turn", "tg_lift"}) names.push_back(n);
    if (tg_conditioned)
      for (auto n : {"cond_swing", "cond_turn", "cond_lift", "cond_y_offset", "cond_gait"}) names.push_back(n);
    if (encoding == EnvEncoding::Compact) {
      for (auto t : kEnvTypes) names.push_back(std::string("env_") + env_type_name(t));
      names.push_back("env_variation");
    } else if (encoding == EnvEncoding::OneHot) {
      for (int c = 0; c < kNumCells; ++c) names.push_back("env_cell" + std::to_string(c));
    }
    return names;
  }

  friend bool operator==(const PolicyLayout&, const PolicyLayout&) = default;
};

inline Eigen::VectorXd assemble_input(const PolicyLayout& layout, const RobotObs& obs, const TGState& tg_state,
                                      const TGParams& tg, const EnvCell& cell) {
  Eigen::VectorXd in(layout.input_dim());
  int k = 0;
  in.segment<kObsDim>(0) = obs;
  k += kObsDim;
  for (int i = 0; i < kNumLegs; ++i) {
    in[k++] = std::sin(tg_state.phase[i]);
    in[k++] = std::cos(tg_state.phase[i]);
  }
  for (int i = 0; i < kNumLegs; ++i) in[k++] = tg_state.freq[i];
  in[k++] = tg.swing;
  in[k++] = tg.turn;
  in[k++] = tg.lift;
  if (layout.tg_conditioned) {
    for (double v : tg.to_vector()) in[k++] = v;
  }
  if (layout.encoding == EnvEncoding::Compact) {
    for (auto t : kEnvTypes) in[k++] = (t == cell.type) ? 1.0 : 0.0;
    in[k++] = static_cast<double>(cell.variation) / (kNumVariations - 1);
  } else if (layout.encoding == EnvEncoding::OneHot) {
    for (int c = 0; c < kNumCells; ++c) in[k++] = (c == cell.index()) ? 1.0 : 0.0;
  }
  return in;
}

// Running mean / variance (population) with deterministic pairwise merge.
class RunningStats {
 public:
  RunningStats() = default;
  explicit RunningStats(int dim) : mean_(Eigen::VectorXd::Zero(dim)), m2_(Eigen::VectorXd::Zero(dim)) {}
  RunningStats(double count, Eigen::VectorXd mean, Eigen::VectorXd m2)
      : count_(count), mean_(std::move(mean)), m2_(std::move(m2)) {}

  int dim() const { return static_cast<int>(mean_.size()); }
  double count() const { return count_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& m2() const { return m2_; }

  void push(const Eigen::VectorXd& x) {
    count_ += 1.0;
    const Eigen::VectorXd delta = x - mean_;
    mean_ += delta / count_;
    m2_ += delta.cwiseProduct(x - mean_);
  }

  void merge(const RunningStats& o) {
    if (o.count_ == 0.0) return;
    if (count_ == 0.0) {
      *this = o;
      return;
    }
    const double n = count_ + o.count_;
    const Eigen::VectorXd delta = o.mean_ - mean_;
    mean_ += delta * (o.count_ / n);
    m2_ += o.m2_ + delta.cwiseProduct(delta) * (count_ * o.count_ / n);
    count_ = n;
  }

  Eigen::VectorXd variance() const {
    if (count_ < 2.0) return Eigen::VectorXd::Ones(dim());
    return m2_ / count_;
  }

  // (x - mean) / std, with unit scale on dimensions that have not varied.
  Eigen::VectorXd normalize(const Eigen::VectorXd& x) const {
    if (count_ < 2.0) return x;
    Eigen::VectorXd out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double var = m2_[i] / count_;
      const double sd = var > 1e-8 ? std::sqrt(var) : 1.0;
      out[i] = (x[i] - mean_[i]) / sd;
    }
    return out;
  }

  friend bool operator==(const RunningStats& a, const RunningStats& b) {
    return a.count_ == b.count_ && a.mean_ == b.mean_ && a.m2_ == b.m2_;
  }

 private:
  double count_ = 0.0;
  Eigen::VectorXd mean_;
  Eigen::VectorXd m2_;
};

struct PolicyOutput {
  std::array<Eigen::Vector3d, kNumLegs> foot_residuals{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(),
                                                       Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};
  std::array<double, kNumLegs> freq_residuals{};
  int nonfinite = 0;  // raw outputs that were not finite and were replaced by 0
};

inline PolicyOutput clamp_output(const Eigen::Ref<const Eigen::VectorXd>& raw) {
  if (raw.size() != kPolicyOutputDim) throw std::invalid_argument("policy output must have 16 entries");
  PolicyOutput out;
  auto sanitize = [&](double v, double bound) {
    if (!std::isfinite(v)) {
      ++out.nonfinite;
      return 0.0;
    }
    return std::clamp(v, -bound, bound);
  };
  for (int i = 0; i < kNumLegs; ++i)
    for (int a = 0; a < 3; ++a) out.foot_residuals[i][a] = sanitize(raw[3 * i + a], kMaxFootResidual);
  for (int i = 0; i < kNumLegs; ++i) out.freq_residuals[i] = sanitize(raw[12 + i], kMaxFreqResidual);
  return out;
}

using PolicyParams = Eigen::VectorXd;

inline Eigen::VectorXd raw_forward(const PolicyLayout& layout, const PolicyParams& params,
                                   const Eigen::VectorXd& x) {
  const int in = layout.input_dim();
  if (x.size() != in || params.size() != layout.param_dim())
    throw std::invalid_argument("policy dimension mismatch");
  if (layout.hidden <= 0) {
    Eigen::Map<const Eigen::MatrixXd> w(params.data(), kPolicyOutputDim, in);
    Eigen::Map<const Eigen::VectorXd> b(params.data() + in * kPolicyOutputDim, kPolicyOutputDim);
    return w * x + b;
  }
  const int h = layout.hidden;
  const double* p = params.data();
  Eigen::Map<const Eigen::MatrixXd> w1(p, h, in);
  p += h * in;
  Eigen::Map<const Eigen::VectorXd> b1(p, h);
  p += h;
  Eigen::Map<const Eigen::MatrixXd> w2(p, kPolicyOutputDim, h);
  p += kPolicyOutputDim * h;
  Eigen::Map<const Eigen::VectorXd> b2(p, kPolicyOutputDim);
  const Eigen::VectorXd hid = (w1 * x + b1).array().tanh().matrix();
  return w2 * hid + b2;
}

struct Policy {
  PolicyLayout layout;
  PolicyParams params;
  RunningStats normalizer;

  PolicyOutput forward(const Eigen::VectorXd& input) const {
    Eigen::VectorXd raw = raw_forward(layout, params, normalizer.normalize(input));
    raw.head<12>() *= layout.foot_scale;
    raw.tail<kNumLegs>() *= layout.freq_scale;
    return clamp_output(raw);
  }

  void check() const {
    if (params.size() != layout.param_dim())
      throw std::invalid_argument("policy has " + std::to_string(params.size()) + " parameters, layout needs " +
                                  std::to_string(layout.param_dim()));
    if (normalizer.dim() != layout.input_dim()) throw std::invalid_argument("normalizer dimension mismatch");
  }

  friend bool operator==(const Policy& a, const Policy& b) {
    return a.layout == b.layout && a.params.size() == b.params.size() && a.params == b.params &&
           a.normalizer.dim() == b.normalizer.dim() && a.normalizer == b.normalizer;
  }
};

inline PolicyOutput policy_forward(const Policy& policy, const Eigen::VectorXd& input) { return policy.forward(input); }

// Outputs start at exactly zero so training begins from the pure TG prior.
// The hidden-layer variant gets a small random first layer; with both layers
// zero the finite-difference search would see no first-order signal.
inline Policy make_initial_policy(const PolicyLayout& layout, std::uint64_t seed = 0) {
  Policy p{layout, PolicyParams::Zero(layout.param_dim()), RunningStats(layout.input_dim())};
  if (layout.hidden > 0) {
    Rng rng = make_rng(seed, Stream::PolicyInit);
    std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(static_cast<double>(layout.input_dim())));
    for (int i = 0; i < layout.hidden * layout.input_dim(); ++i) p.params[i] = n(rng);
  }
  return p;
}

// Nominal targets plus clamped residuals, then projected into each leg's
// workspace sphere.
inline FootTargets compose_targets(const FootTargets& nominal, const PolicyOutput& out, double leg_length) {
  FootTargets t;
  for (int i = 0; i < kNumLegs; ++i) {
    const Eigen::Vector3d res = out.foot_residuals[i].cwiseMax(-kMaxFootResidual).cwiseMin(kMaxFootResidual);
    t[i] = clamp_to_workspace(nominal[i] + res, leg_length);
  }
  return t;
}

}  // namespace eetg
