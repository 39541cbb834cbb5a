#pragma once

// CMA-ES (maximisation), rank-one + rank-mu covariance update with
// cumulative step-size adaptation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "eetg/rng.hpp"

namespace eetg {

inline int cma_default_lambda(int n) { return 4 + static_cast<int>(std::floor(3.0 * std::log(n))); }

struct CmaState {
  int n = 0;
  int lambda = 0;
  int mu = 0;
  Eigen::VectorXd weights;  // mu positive, non-increasing, sum 1
  double mu_eff = 0.0;
  double c_sigma = 0.0, d_sigma = 0.0, c_c = 0.0, c_1 = 0.0, c_mu = 0.0, chi_n = 0.0;

  Eigen::VectorXd mean;
  double sigma = 1.0;
  Eigen::MatrixXd cov;
  Eigen::VectorXd p_sigma;
  Eigen::VectorXd p_c;
  long generation = 0;
  long evaluations = 0;

  Eigen::VectorXd best_x;
  double best_f = -std::numeric_limits<double>::infinity();
};

inline CmaState cma_init(const Eigen::VectorXd& mean, double sigma, int lambda = 0) {
  if (mean.size() < 1) throw std::invalid_argument("cma_init: empty mean");
  if (!(sigma > 0.0)) throw std::invalid_argument("cma_init: sigma must be positive");
  CmaState s;
  const int n = static_cast<int>(mean.size());
  s.n = n;
  s.lambda = lambda > 0 ? lambda : cma_default_lambda(n);
  s.mu = s.lambda / 2;
  s.weights.resize(s.mu);
  for (int i = 0; i < s.mu; ++i) s.weights[i] = std::log(s.mu + 0.5) - std::log(i + 1.0);
  s.weights /= s.weights.sum();
  s.mu_eff = 1.0 / s.weights.squaredNorm();

  const double nd = n;
  s.c_sigma = (s.mu_eff + 2.0) / (nd + s.mu_eff + 5.0);
  s.d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((s.mu_eff - 1.0) / (nd + 1.0)) - 1.0) + s.c_sigma;
  s.c_c = (4.0 + s.mu_eff / nd) / (nd + 4.0 + 2.0 * s.mu_eff / nd);
  s.c_1 = 2.0 / ((nd + 1.3) * (nd + 1.3) + s.mu_eff);
  s.c_mu = std::min(1.0 - s.c_1, 2.0 * (s.mu_eff - 2.0 + 1.0 / s.mu_eff) / ((nd + 2.0) * (nd + 2.0) + s.mu_eff));
  s.chi_n = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));

  s.mean = mean;
  s.sigma = sigma;
  s.cov = Eigen::MatrixXd::Identity(n, n);
  s.p_sigma = Eigen::VectorXd::Zero(n);
  s.p_c = Eigen::VectorXd::Zero(n);
  return s;
}

struct CmaDecomposition {
  Eigen::MatrixXd basis;      // eigenvectors of C
  Eigen::VectorXd scale;      // sqrt of eigenvalues
  bool repaired = false;
};

// Eigen-decomposes C; eigenvalues are floored so the condition number stays
// below 1e14 (non-positive ones included), and C is rebuilt from the repair.
inline CmaDecomposition cma_decompose(CmaState& s) {
  s.cov = 0.5 * (s.cov + s.cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.cov);
  Eigen::VectorXd ev = es.eigenvalues();
  CmaDecomposition d;
  d.basis = es.eigenvectors();
  const double max_ev = ev.maxCoeff();
  const double floor = (max_ev > 0.0 ? max_ev : 1.0) / 1e14;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (!(ev[i] > floor)) {
      ev[i] = floor;
      d.repaired = true;
    }
  }
  if (!(max_ev > 0.0) || !ev.allFinite()) {
    ev.setOnes();
    d.basis.setIdentity();
    d.repaired = true;
  }
  if (d.repaired) s.cov = d.basis * ev.asDiagonal() * d.basis.transpose();
  d.scale = ev.cwiseSqrt();
  return d;
}

// lambda samples mean + sigma * B D z.
inline std::vector<Eigen::VectorXd> cma_ask(CmaState& s, Rng& rng) {
  const CmaDecomposition d = cma_decompose(s);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> out;
  out.reserve(s.lambda);
  for (int k = 0; k < s.lambda; ++k) {
    Eigen::VectorXd z(s.n);
    for (int i = 0; i < s.n; ++i) z[i] = normal(rng);
    out.push_back(s.mean + s.sigma * (d.basis * d.scale.cwiseProduct(z)));
  }
  return out;
}

// Higher fitness is better; non-finite fitness ranks last. Candidates with
// equal fitness share the average of their rank weights, so the update is
// invariant to permutations of tied candidates.
inline void cma_tell(CmaState& s, const std::vector<Eigen::VectorXd>& xs, const std::vector<double>& fitness) {
  if (static_cast<int>(xs.size()) != s.lambda || fitness.size() != xs.size())
    throw std::invalid_argument("cma_tell: expected lambda candidates and fitnesses");
  const int lambda = s.lambda;
  std::vector<double> f(fitness);
  for (auto& v : f)
    if (!std::isfinite(v)) v = -std::numeric_limits<double>::infinity();

  for (int k = 0; k < lambda; ++k) {
    if (f[k] > s.best_f) {
      s.best_f = f[k];
      s.best_x = xs[k];
    }
  }
  s.evaluations += lambda;
  ++s.generation;

  std::vector<int> order(lambda);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return f[a] > f[b]; });

  // per-rank weights over all lambda ranks (zero below mu), averaged over ties
  std::vector<double> rank_w(lambda, 0.0);
  for (int i = 0; i < s.mu; ++i) rank_w[i] = s.weights[i];
  std::vector<double> w(lambda, 0.0);
  int groups = 0;
  for (int i = 0; i < lambda;) {
    int j = i;
    while (j + 1 < lambda && f[order[j + 1]] == f[order[i]]) ++j;
    double avg = 0.0;
    for (int k = i; k <= j; ++k) avg += rank_w[k];
    avg /= (j - i + 1);
    for (int k = i; k <= j; ++k) w[order[k]] = avg;
    ++groups;
    i = j + 1;
  }

  if (groups == 1) {
    // flat fitness: no ranking information; widen the search
    s.sigma *= std::exp(0.2 + s.c_sigma / s.d_sigma);
    return;
  }

  const Eigen::VectorXd old_mean = s.mean;
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(s.n);
  for (int k = 0; k < lambda; ++k)
    if (w[k] != 0.0) shift += w[k] * (xs[k] - old_mean);
  s.mean = old_mean + shift;
  const Eigen::VectorXd y_w = shift / s.sigma;

  const CmaDecomposition d = cma_decompose(s);
  const Eigen::MatrixXd inv_sqrt_c = d.basis * d.scale.cwiseInverse().asDiagonal() * d.basis.transpose();

  s.p_sigma = (1.0 - s.c_sigma) * s.p_sigma + std::sqrt(s.c_sigma * (2.0 - s.c_sigma) * s.mu_eff) * (inv_sqrt_c * y_w);
  const double ps_norm = s.p_sigma.norm();
  const double denom = std::sqrt(1.0 - std::pow(1.0 - s.c_sigma, 2.0 * static_cast<double>(s.generation)));
  const bool h_sigma = ps_norm / denom < (1.4 + 2.0 / (s.n + 1.0)) * s.chi_n;
  s.p_c = (1.0 - s.c_c) * s.p_c + (h_sigma ? std::sqrt(s.c_c * (2.0 - s.c_c) * s.mu_eff) : 0.0) * y_w;

  Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(s.n, s.n);
  for (int k = 0; k < lambda; ++k) {
    if (w[k] == 0.0) continue;
    const Eigen::VectorXd y = (xs[k] - old_mean) / s.sigma;
    rank_mu += w[k] * y * y.transpose();
  }
  const double delta_h = h_sigma ? 0.0 : s.c_c * (2.0 - s.c_c);
  s.cov = (1.0 - s.c_1 - s.c_mu + s.c_1 * delta_h) * s.cov + s.c_1 * s.p_c * s.p_c.transpose() + s.c_mu * rank_mu;
  s.cov = 0.5 * (s.cov + s.cov.transpose());

  s.sigma *= std::exp((s.c_sigma / s.d_sigma) * (ps_norm / s.chi_n - 1.0));
}

}  // namespace eetg
