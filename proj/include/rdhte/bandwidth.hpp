#pragma once

#include "rdhte/localfit.hpp"
#include "rdhte/model.hpp"

#include <Eigen/Dense>

#include <utility>

namespace rdhte {

// zeta = (1/(n h)) sum K_i r_i u_i^{a+1};  phi = (1/(n h)) sum K_i r_i W_i' u_i^{a+1}
struct MomentVectors {
  Eigen::VectorXd zeta;
  Eigen::MatrixXd phi; // k x d
};

MomentVectors moment_vectors(const RdSample& sample, Side side, double h, int p, int s, int a,
                             KernelKind kernel);

// Same quantities on the window of an existing fit.
MomentVectors moment_vectors(const SideFit& fit, const RdSample& sample, int a);

inline constexpr double kPilotConstant = 2.576;

// b = 2.576 min(sd, IQR/1.349) N^{-1/(2 max(p,s) + 5)}, widened if needed so
// that at least 5(p+2) observations get positive kernel weight.
double pilot_bandwidth(const RdSample& sample, Side side, int p, int s,
                       KernelKind kernel = KernelKind::triangular);

struct BiasConstants {
  Side side = Side::right;
  Eigen::VectorXd b0;     // G^{-1} zeta_p alpha_{p+1}
  Eigen::VectorXd b1;     // G^{-1} phi_s lambda_{s+1}
  Eigen::VectorXd total;  // 1(p<=s) b0 + 1(p>=s) b1
  double alpha = 0.0;     // alpha^{(p+1)}(c) / (p+1)!
  Eigen::VectorXd lambda; // lambda^{(s+1)}(c) / (s+1)!
  double contraction = 0.0;
};

// Bias constants from a main fit (Gram, moments) and a pilot fit of order
// (p+1, s+1) (derivatives). contraction = a' total.
BiasConstants bias_constants(const SideFit& main, const SideFit& pilot, const RdSample& sample,
                             const Eigen::Ref<const Eigen::VectorXd>& a);

// Both fits at pilot_b; contraction with e_nu(0).
BiasConstants bias_constants(const RdSample& sample, Side side, int p, int s, int nu,
                             KernelKind kernel, double pilot_b);

struct VarianceConstants {
  Eigen::MatrixXd meat;
  Eigen::MatrixXd gram;
  double contraction = 0.0; // a' G^{-1} V G^{-1} a
};

VarianceConstants variance_constants(const SideFit& fit, const RdSample& sample,
                                     const Eigen::Ref<const Eigen::VectorXd>& a, VceKind vce);

VarianceConstants variance_constants(const RdSample& sample, Side side, double h, int p, int s,
                                     int nu, KernelKind kernel, VceKind vce);

// [(1+2nu) / (2(1 + p^s - nu) n) * v / b2]^{1/(3 + 2 p^s)}
double mse_bandwidth_formula(double v, double b2, double n, int p, int s, int nu);

inline constexpr double kBiasRegularization = 1e-2;

struct BandwidthChoice {
  double left = 0.0;
  double right = 0.0;
  double pilot_left = 0.0;
  double pilot_right = 0.0;
  double v_left = 0.0;
  double v_right = 0.0;
  double bias_left = 0.0;
  double bias_right = 0.0;
  bool regularized = false; // regularizer exceeded the squared bias
};

// Smallest bandwidth that keeps params + 2 observations in the window.
double min_bandwidth(const RdSample& sample, Side side, Eigen::Index params);
// Largest distance to the cutoff on the side.
double max_bandwidth(const RdSample& sample, Side side);

BandwidthChoice mse_bandwidth(const RdSample& sample, const FitSpec& spec,
                              const Eigen::Ref<const Eigen::VectorXd>& selector, SelectMode mode);

// Pilot bandwidths per side: the spec override or the pilot rule.
std::pair<double, double> resolve_pilot(const RdSample& sample, const FitSpec& spec);

} // namespace rdhte
