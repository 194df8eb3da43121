#include "rdhte/inference.hpp"

#include "rdhte/bandwidth.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace rdhte {

namespace {

constexpr double kLeverageCeiling = 1.0 - 1e-10;

double hc1_scalar(const SideFit& fit) {
  const double big_n = static_cast<double>(fit.n_side);
  const double denom = big_n - 2.0 * fit.trace_q + fit.trace_qq;
  if (!(denom > 0.0))
    throw Error(ErrorCode::LeverageOne, "HC1 undefined: N - 2 tr(Q) + tr(QQ) <= 0 on the " +
                                            std::string(to_string(fit.side)) + " side");
  return big_n / denom;
}

Eigen::VectorXd scaled_functional(const SideFit& fit, const Eigen::Ref<const Eigen::VectorXd>& a) {
  if (a.size() != fit.dim())
    throw Error(ErrorCode::DimensionMismatch, "functional has length " + std::to_string(a.size()) +
                                                  ", fit has " + std::to_string(fit.dim()) +
                                                  " parameters");
  return a.cwiseQuotient(scaling_diagonal(fit.h, fit.p, fit.s, fit.d));
}

const std::vector<std::int64_t>& require_clusters(const RdSample& sample) {
  if (!sample.cluster)
    throw Error(ErrorCode::InvalidArgument, "cluster variance requested without cluster labels");
  return *sample.cluster;
}

} // namespace

Eigen::VectorXd hc_weights(VceKind kind, const SideFit& fit) {
  const Eigen::Index m = fit.leverages.size();
  switch (kind) {
  case VceKind::hc0:
  case VceKind::cluster:
    return Eigen::VectorXd::Ones(m);
  case VceKind::hc1:
    return Eigen::VectorXd::Constant(m, hc1_scalar(fit));
  case VceKind::hc2:
  case VceKind::hc3: {
    if (m > 0 && fit.leverages.maxCoeff() >= kLeverageCeiling)
      throw Error(ErrorCode::LeverageOne,
                  "an observation has leverage 1 on the " + std::string(to_string(fit.side)) +
                      " side; HC2/HC3 are undefined (use hc0 or hc1)");
    Eigen::VectorXd w = (1.0 - fit.leverages.array()).inverse().matrix();
    if (kind == VceKind::hc3)
      w = w.cwiseProduct(w);
    return w;
  }
  }
  return Eigen::VectorXd::Ones(m);
}

Eigen::MatrixXd meat_matrix(const SideFit& fit, const Eigen::Ref<const Eigen::VectorXd>& weights) {
  const auto& des = fit.design;
  const Eigen::VectorXd c = weights.cwiseProduct(des.kernel.cwiseAbs2())
                                .cwiseProduct(fit.residuals.cwiseAbs2());
  Eigen::MatrixXd v = des.r.transpose() * c.asDiagonal() * des.r;
  v /= static_cast<double>(fit.n_total) * fit.h;
  return 0.5 * (v + v.transpose());
}

double cluster_factor(Eigen::Index clusters, Eigen::Index n, int p, Eigen::Index d) {
  const double g = static_cast<double>(clusters);
  const double nn = static_cast<double>(n);
  const double dof = nn - p - 1.0 - static_cast<double>(d);
  if (!(dof > 0.0))
    throw Error(ErrorCode::InvalidArgument, "cluster small-sample factor undefined: n <= p + 1 + d");
  return ((g - 1.0) * nn) / ((g - 1.0) * dof);
}

ClusterMeat cluster_meat(const SideFit& fit, const std::vector<std::int64_t>& clusters) {
  if (static_cast<Eigen::Index>(clusters.size()) != fit.n_total)
    throw Error(ErrorCode::LengthMismatch, "cluster labels do not match sample size");
  const auto& des = fit.design;
  const Eigen::Index k = fit.dim();
  std::map<std::int64_t, Eigen::VectorXd> sums;
  for (Eigen::Index j = 0; j < des.r.rows(); ++j) {
    const auto g = clusters[static_cast<std::size_t>(des.rows[static_cast<std::size_t>(j)])];
    auto it = sums.try_emplace(g, Eigen::VectorXd::Zero(k)).first;
    it->second += des.r.row(j).transpose() * (des.kernel[j] * fit.residuals[j]);
  }
  ClusterMeat out;
  out.clusters = static_cast<Eigen::Index>(sums.size());
  if (out.clusters < 2)
    throw Error(ErrorCode::TooFewClusters,
                "cluster-robust variance needs at least 2 clusters in the window on the " +
                    std::string(to_string(fit.side)) + " side, found " +
                    std::to_string(out.clusters));
  out.meat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [g, sg] : sums)
    out.meat.noalias() += sg * sg.transpose();
  out.meat /= static_cast<double>(fit.n_total) * fit.h;
  out.factor = cluster_factor(out.clusters, fit.n_total, fit.p, fit.d);
  return out;
}

Eigen::MatrixXd side_meat(const SideFit& fit, const RdSample& sample, VceKind kind) {
  if (kind == VceKind::cluster) {
    ClusterMeat cm = cluster_meat(fit, require_clusters(sample));
    return cm.factor * cm.meat;
  }
  return meat_matrix(fit, hc_weights(kind, fit));
}

double sandwich_contraction(const SideFit& fit, const Eigen::Ref<const Eigen::MatrixXd>& meat,
                            const Eigen::Ref<const Eigen::VectorXd>& a) {
  const Eigen::VectorXd c = fit.gram_inv * a;
  return std::max(0.0, c.dot(meat * c));
}

Eigen::VectorXd influence(const SideFit& fit, const Eigen::Ref<const Eigen::VectorXd>& a) {
  const Eigen::VectorXd c = fit.gram_inv * scaled_functional(fit, a);
  return (fit.design.r * c).cwiseProduct(fit.design.weights) / static_cast<double>(fit.n_total);
}

double side_variance(const SideFit& fit, const RdSample& sample,
                     const Eigen::Ref<const Eigen::VectorXd>& a, VceKind kind) {
  const Eigen::VectorXd ah = scaled_functional(fit, a);
  return sandwich_contraction(fit, side_meat(fit, sample, kind), ah) /
         (static_cast<double>(fit.n_total) * fit.h);
}

VarianceEstimate coef_variance(const RdSample& sample, const SideFit& left, const SideFit& right,
                               const Eigen::Ref<const Eigen::VectorXd>& a, VceKind kind) {
  VarianceEstimate out;
  out.kind = kind;
  out.left = side_variance(left, sample, a, kind);
  out.right = side_variance(right, sample, a, kind);
  out.variance = out.left + out.right;
  out.se = std::sqrt(out.variance);
  if (kind == VceKind::cluster) {
    out.clusters_left = cluster_meat(left, require_clusters(sample)).clusters;
    out.clusters_right = cluster_meat(right, require_clusters(sample)).clusters;
  }
  return out;
}

double rbc_point(double point, double bias_contrast, double h, int p, int s, int nu) {
  if (!(h > 0.0))
    throw Error(ErrorCode::NonPositiveBandwidth, "bandwidth must be positive");
  return point - std::pow(h, 1 + std::min(p, s) - nu) * bias_contrast;
}

BiasComposition compose_bias(const SideFit& main, const SideFit& pilot, const RdSample& sample,
                             const Eigen::Ref<const Eigen::VectorXd>& a) {
  const int p = main.p;
  const int s = main.s;
  if (pilot.p != p + 1 || pilot.s != s + 1 || pilot.side != main.side)
    throw Error(ErrorCode::InvalidArgument, "pilot fit must have order (p+1, s+1) on the same side");
  const Eigen::VectorXd c = main.gram_inv * scaled_functional(main, a);
  BiasComposition out;
  out.pilot_functional = Eigen::VectorXd::Zero(pilot.dim());
  if (p <= s) {
    const MomentVectors mv = moment_vectors(main, sample, p);
    out.pilot_functional[p + 1] += c.dot(mv.zeta);
  }
  if (p >= s) {
    const MomentVectors mv = moment_vectors(main, sample, s);
    for (Eigen::Index l = 0; l < main.d; ++l)
      out.pilot_functional[(p + 2) + l * (s + 2) + (s + 1)] += c.dot(mv.phi.col(l));
  }
  out.pilot_functional *= std::pow(main.h, 1 + std::min(p, s));
  out.bias = out.pilot_functional.dot(pilot.theta);
  return out;
}

RbcInfluence rbc_influence(const SideFit& main, const SideFit& pilot, const RdSample& sample,
                           const Eigen::Ref<const Eigen::VectorXd>& a, VceKind kind) {
  const BiasComposition bc = compose_bias(main, pilot, sample, a);
  const Eigen::VectorXd wm = influence(main, a);
  const Eigen::VectorXd wp = influence(pilot, bc.pilot_functional);
  Eigen::VectorXd hcw = hc_weights(kind, pilot);
  const double outside = kind == VceKind::hc1 ? hc1_scalar(pilot) : 1.0;

  const auto& rm = main.design.rows;
  const auto& rp = pilot.design.rows;
  RbcInfluence out;
  std::vector<double> omega, resid, weight;
  std::size_t i = 0, j = 0;
  while (i < rm.size() || j < rp.size()) {
    const bool take_m = i < rm.size() && (j >= rp.size() || rm[i] <= rp[j]);
    const bool take_p = j < rp.size() && (i >= rm.size() || rp[j] <= rm[i]);
    const Eigen::Index row = take_m ? rm[i] : rp[j];
    double w = 0.0;
    if (take_m)
      w += wm[static_cast<Eigen::Index>(i)];
    if (take_p) {
      w -= wp[static_cast<Eigen::Index>(j)];
      resid.push_back(pilot.residuals[static_cast<Eigen::Index>(j)]);
      weight.push_back(hcw[static_cast<Eigen::Index>(j)]);
    } else {
      resid.push_back(sample.y[row] - fitted_value(pilot, sample, row));
      weight.push_back(outside);
    }
    out.rows.push_back(row);
    omega.push_back(w);
    if (take_m)
      ++i;
    if (take_p)
      ++j;
  }
  const auto m = static_cast<Eigen::Index>(out.rows.size());
  out.omega = Eigen::Map<Eigen::VectorXd>(omega.data(), m);
  out.residuals = Eigen::Map<Eigen::VectorXd>(resid.data(), m);
  out.weights = Eigen::Map<Eigen::VectorXd>(weight.data(), m);
  return out;
}

double rbc_side_variance(const SideFit& main, const SideFit& pilot, const RdSample& sample,
                         const Eigen::Ref<const Eigen::VectorXd>& a, VceKind kind) {
  const RbcInfluence inf = rbc_influence(main, pilot, sample, a, kind);
  if (kind != VceKind::cluster)
    return (inf.omega.cwiseAbs2().cwiseProduct(inf.weights).cwiseProduct(inf.residuals.cwiseAbs2()))
        .sum();
  const auto& labels = require_clusters(sample);
  std::map<std::int64_t, double> sums;
  for (std::size_t j = 0; j < inf.rows.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    sums[labels[static_cast<std::size_t>(inf.rows[j])]] += inf.omega[jj] * inf.residuals[jj];
  }
  const auto g = static_cast<Eigen::Index>(sums.size());
  if (g < 2)
    throw Error(ErrorCode::TooFewClusters,
                "cluster-robust variance needs at least 2 clusters in the window on the " +
                    std::string(to_string(main.side)) + " side, found " + std::to_string(g));
  double total = 0.0;
  for (const auto& [label, v] : sums)
    total += v * v;
  return cluster_factor(g, main.n_total, main.p, main.d) * total;
}

VarianceEstimate rbc_variance(const RdSample& sample, const SideFit& left, const SideFit& right,
                              const SideFit& pilot_left, const SideFit& pilot_right,
                              const Eigen::Ref<const Eigen::VectorXd>& a, VceKind kind) {
  VarianceEstimate out;
  out.kind = kind;
  out.left = rbc_side_variance(left, pilot_left, sample, a, kind);
  out.right = rbc_side_variance(right, pilot_right, sample, a, kind);
  out.variance = out.left + out.right;
  out.se = std::sqrt(out.variance);
  return out;
}

double normal_critical_value(double level) {
  if (!(level > 0.0 && level < 1.0))
    throw Error(ErrorCode::InvalidArgument, "confidence level must lie in (0, 1)");
  const boost::math::normal_distribution<double> nd;
  return boost::math::quantile(nd, 1.0 - (1.0 - level) / 2.0);
}

Interval ci_pvalue(double point, double se, double level) {
  if (!(se >= 0.0) || !std::isfinite(se) || !std::isfinite(point))
    throw Error(ErrorCode::NonFinite, "point estimate and standard error must be finite");
  const double crit = normal_critical_value(level);
  Interval out;
  if (se == 0.0) {
    out.zero_se = true;
    out.lower = out.upper = point;
    out.p_value = point != 0.0 ? 0.0 : 1.0;
    out.z = point == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), point);
    return out;
  }
  out.lower = point - crit * se;
  out.upper = point + crit * se;
  out.z = point / se;
  out.p_value = std::min(1.0, std::erfc(std::abs(out.z) / std::sqrt(2.0)));
  return out;
}

} // namespace rdhte
