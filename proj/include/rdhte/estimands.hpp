#pragma once

#include "rdhte/localfit.hpp"
#include "rdhte/model.hpp"

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <vector>

namespace rdhte {

// e_nu(w): nu! at position nu of the main block and nu! * w_l at position nu
// of covariate block l.
Eigen::VectorXd extractor(int nu, const Eigen::Ref<const Eigen::VectorXd>& w, int p, int s);

// Short-form functional for a long-form selector (s_0, s_1, ..., s_d):
// nu! * s_0 in the main block and nu! * s_l in covariate block l.
Eigen::VectorXd short_functional(int nu, const Eigen::Ref<const Eigen::VectorXd>& selector,
                                 int p, int s);

// M such that varsigma = M [theta_left; theta_right]; (1 + d) x 2k.
Eigen::MatrixXd long_form_map(int nu, int p, int s, Eigen::Index d);

struct EstimateRecord {
  std::string label;
  Eigen::VectorXd selector; // long form, length 1 + d

  double point = 0.0;
  double variance = 0.0;
  double se = 0.0;

  double bias = 0.0; // estimated leading bias of point (already h-scaled)
  double rbc_point = 0.0;
  double rbc_variance = 0.0;
  double rbc_se = 0.0;

  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  bool zero_se = false;
  bool extrapolation = false;
};

struct HteResult {
  std::shared_ptr<const RdSample> sample;
  FitSpec spec;
  VceKind vce = VceKind::hc3;

  SideFit left;
  SideFit right;
  SideFit pilot_left;  // order (p+1, s+1) at the pilot bandwidth
  SideFit pilot_right;

  double h_left = 0.0;
  double h_right = 0.0;
  double b_left = 0.0;
  double b_right = 0.0;
  std::string bandwidth_source; // fixed | common | mse_one_sided | mse_two_sided
  bool regularized = false;

  Eigen::VectorXd bias_left;  // B vectors at the main bandwidth
  Eigen::VectorXd bias_right;

  Eigen::VectorXd varsigma;
  std::vector<EstimateRecord> estimates;

  Eigen::Index eff_n() const { return left.eff_n + right.eff_n; }
};

HteResult fit_hte(const RdSample& sample, const FitSpec& spec);

EstimateRecord cate_at(const HteResult& result, const Eigen::Ref<const Eigen::VectorXd>& w);

EstimateRecord contrast(const HteResult& result, const Eigen::Ref<const Eigen::VectorXd>& selector,
                        const std::string& label = "contrast");

// Default estimand set implied by the covariate blocks of a sample.
std::vector<EstimandRequest> default_estimands(const RdSample& sample);

// True when any coordinate of w lies outside the observed range of that column.
bool is_extrapolation(const RdSample& sample, const Eigen::Ref<const Eigen::VectorXd>& w);

} // namespace rdhte
