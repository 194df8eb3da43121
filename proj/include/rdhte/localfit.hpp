#pragma once

#include "rdhte/kernel.hpp"
#include "rdhte/model.hpp"

#include <Eigen/Dense>

#include <vector>

namespace rdhte {

enum class Side { left, right };

std::string_view to_string(Side side);

inline bool on_side(double x, double cutoff, Side side) {
  return side == Side::right ? x >= cutoff : x < cutoff;
}

// Design of one side of the cutoff at bandwidth h. Only observations with a
// strictly positive kernel weight are kept.
struct SideDesign {
  Side side = Side::right;
  double h = 0.0;
  int p = 1;
  int s = 1;
  KernelKind kind = KernelKind::triangular;
  std::vector<Eigen::Index> rows; // indices into the sample
  Eigen::MatrixXd r;              // r_{p,s}((X_i - c)/h, W_i), one row per kept observation
  Eigen::VectorXd kernel;         // K((X_i - c)/h)
  Eigen::VectorXd weights;        // K((X_i - c)/h) / h
};

SideDesign side_design(const RdSample& sample, Side side, double h, int p, int s,
                       KernelKind kernel);

struct SideFit {
  Side side = Side::right;
  double h = 0.0;
  int p = 1;
  int s = 1;
  Eigen::Index d = 0;
  Eigen::Index n_total = 0; // n, the full sample size used in all 1/n scalings
  Eigen::Index n_side = 0;  // N, all observations on this side of the cutoff
  Eigen::Index eff_n = 0;   // observations with positive kernel weight

  SideDesign design;
  Eigen::MatrixXd gram;     // R'K_h R / n on the scaled basis
  Eigen::MatrixXd gram_inv;
  Eigen::VectorXd score;    // R'K_h Y / n
  Eigen::VectorXd theta;    // coefficients in powers of (X - c)
  Eigen::VectorXd residuals;  // per design row
  Eigen::VectorXd leverages;  // per design row
  double trace_q = 0.0;
  double trace_qq = 0.0;
  double rcond = 0.0;

  Eigen::Index dim() const { return theta.size(); }
};

// Reciprocal condition estimate below which a Gram matrix is treated as singular.
inline constexpr double kSingularRcond = 1e-12;

SideFit fit_side(const RdSample& sample, Side side, double h, int p, int s, KernelKind kernel);

// Solves the weighted least squares problem on a prepared design. Exposed so
// callers can alter the design weights (e.g. rescale the kernel).
SideFit fit_design(const RdSample& sample, SideDesign design);

// Polynomial of a fit evaluated at an arbitrary observation (unscaled).
double fitted_value(const SideFit& fit, const RdSample& sample, Eigen::Index row);

// Coefficients of the long fully interacted regression on both sides with a
// common bandwidth: (b_0, b_T) where b_0 = theta_left and b_T = theta_right - theta_left.
struct LongFit {
  Eigen::VectorXd base;
  Eigen::VectorXd jump;
};

LongFit long_regression(const RdSample& sample, double h, int p, int s, KernelKind kernel);

bool long_short_equivalence_check(const RdSample& sample, double h, int p, int s,
                                  KernelKind kernel, double tol = 1e-10);

double max_relative_error(const Eigen::Ref<const Eigen::VectorXd>& a,
                          const Eigen::Ref<const Eigen::VectorXd>& b);

} // namespace rdhte
