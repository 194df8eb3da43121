#pragma once

#include "rdhte/localfit.hpp"
#include "rdhte/model.hpp"

#include <Eigen/Dense>

#include <vector>

namespace rdhte {

// Per-observation HC weights w_i for the rows of a fit's design.
//   hc0  1
//   hc1  N / (N - 2 tr Q + tr QQ), N = observations on the side
//   hc2  1 / (1 - L_i)
//   hc3  1 / (1 - L_i)^2
Eigen::VectorXd hc_weights(VceKind kind, const SideFit& fit);

// V = (1/(n h)) sum_i w_i K_i^2 r_i r_i' u_i^2
Eigen::MatrixXd meat_matrix(const SideFit& fit, const Eigen::Ref<const Eigen::VectorXd>& weights);

struct ClusterMeat {
  Eigen::MatrixXd meat;    // (1/(n h)) sum_g S_g S_g', S_g = sum_{i in g} K_i r_i u_i
  Eigen::Index clusters = 0;
  double factor = 1.0;     // small-sample factor applied at contraction
};

ClusterMeat cluster_meat(const SideFit& fit, const std::vector<std::int64_t>& clusters);

// (G-1) n / ((G-1)(n - p - 1 - d))
double cluster_factor(Eigen::Index clusters, Eigen::Index n, int p, Eigen::Index d);

// Meat for a variance kind, with the cluster factor folded in.
Eigen::MatrixXd side_meat(const SideFit& fit, const RdSample& sample, VceKind kind);

// a' G^{-1} V G^{-1} a
double sandwich_contraction(const SideFit& fit, const Eigen::Ref<const Eigen::MatrixXd>& meat,
                            const Eigen::Ref<const Eigen::VectorXd>& a);

// Influence weights of a' theta_hat on the in-window observations:
// omega_i = a' H^{-1} G^{-1} r_i K_i / (n h), so that a' theta_hat = sum_i omega_i Y_i.
Eigen::VectorXd influence(const SideFit& fit, const Eigen::Ref<const Eigen::VectorXd>& a);

// Variance of a' theta_hat for one side, (H^{-1}a)' G^{-1} V G^{-1} (H^{-1}a) / (n h).
double side_variance(const SideFit& fit, const RdSample& sample,
                     const Eigen::Ref<const Eigen::VectorXd>& a, VceKind kind);

struct VarianceEstimate {
  VceKind kind = VceKind::hc0;
  double left = 0.0;
  double right = 0.0;
  double variance = 0.0;
  double se = 0.0;
  Eigen::Index clusters_left = 0;
  Eigen::Index clusters_right = 0;
};

// Variance of a'(theta_right - theta_left); sides are independent.
VarianceEstimate coef_variance(const RdSample& sample, const SideFit& left, const SideFit& right,
                               const Eigen::Ref<const Eigen::VectorXd>& a, VceKind kind);

double rbc_point(double point, double bias_contrast, double h, int p, int s, int nu);

// Bias of a' theta_hat from the pilot fit, together with the pilot-side
// functional g such that the bias equals g' theta_pilot.
struct BiasComposition {
  double bias = 0.0;
  Eigen::VectorXd pilot_functional;
};

BiasComposition compose_bias(const SideFit& main, const SideFit& pilot, const RdSample& sample,
                             const Eigen::Ref<const Eigen::VectorXd>& a);

// Linear representation of the bias-corrected side estimate over the union
// of the main and pilot windows.
struct RbcInfluence {
  std::vector<Eigen::Index> rows;
  Eigen::VectorXd omega;
  Eigen::VectorXd residuals; // from the pilot polynomial
  Eigen::VectorXd weights;   // HC weights from the pilot fit
};

RbcInfluence rbc_influence(const SideFit& main, const SideFit& pilot, const RdSample& sample,
                           const Eigen::Ref<const Eigen::VectorXd>& a, VceKind kind);

double rbc_side_variance(const SideFit& main, const SideFit& pilot, const RdSample& sample,
                         const Eigen::Ref<const Eigen::VectorXd>& a, VceKind kind);

VarianceEstimate rbc_variance(const RdSample& sample, const SideFit& left, const SideFit& right,
                              const SideFit& pilot_left, const SideFit& pilot_right,
                              const Eigen::Ref<const Eigen::VectorXd>& a, VceKind kind);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  bool zero_se = false;
};

Interval ci_pvalue(double point, double se, double level);

double normal_critical_value(double level);

} // namespace rdhte
