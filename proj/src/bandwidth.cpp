#include "rdhte/bandwidth.hpp"

#include "rdhte/estimands.hpp"
#include "rdhte/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>
#include <vector>

namespace rdhte {

namespace {

MomentVectors moments_from_design(const SideDesign& des, const RdSample& sample, int a) {
  const Eigen::Index k = des.r.cols();
  const Eigen::Index d = sample.d();
  MomentVectors out{Eigen::VectorXd::Zero(k), Eigen::MatrixXd::Zero(k, d)};
  for (Eigen::Index j = 0; j < des.r.rows(); ++j) {
    const Eigen::Index i = des.rows[static_cast<std::size_t>(j)];
    const double u = (sample.x[i] - sample.cutoff) / des.h;
    const double c = des.kernel[j] * std::pow(u, a + 1);
    out.zeta.noalias() += c * des.r.row(j).transpose();
    if (d > 0)
      out.phi.noalias() += (c * des.r.row(j).transpose()) * sample.w.row(i);
  }
  const double scale = static_cast<double>(sample.n()) * des.h;
  out.zeta /= scale;
  out.phi /= scale;
  return out;
}

std::vector<double> side_values(const RdSample& sample, Side side) {
  std::vector<double> v;
  for (Eigen::Index i = 0; i < sample.n(); ++i)
    if (on_side(sample.x[i], sample.cutoff, side))
      v.push_back(sample.x[i]);
  return v;
}

std::vector<double> side_distances(const RdSample& sample, Side side) {
  std::vector<double> v = side_values(sample, side);
  for (double& x : v)
    x = std::abs(x - sample.cutoff);
  std::sort(v.begin(), v.end());
  return v;
}

} // namespace

MomentVectors moment_vectors(const RdSample& sample, Side side, double h, int p, int s, int a,
                             KernelKind kernel) {
  if (a < 0)
    throw Error(ErrorCode::InvalidArgument, "moment order must be non-negative");
  return moments_from_design(side_design(sample, side, h, p, s, kernel), sample, a);
}

MomentVectors moment_vectors(const SideFit& fit, const RdSample& sample, int a) {
  return moments_from_design(fit.design, sample, a);
}

double pilot_bandwidth(const RdSample& sample, Side side, int p, int s, KernelKind kernel) {
  std::vector<double> xs = side_values(sample, side);
  const auto big_n = xs.size();
  if (big_n < 10)
    throw Error(ErrorCode::TooFewObservations,
                "pilot bandwidth needs at least 10 observations on the " +
                    std::string(to_string(side)) + " side, found " + std::to_string(big_n));
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(big_n);
  double ss = 0.0;
  for (double x : xs)
    ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(big_n - 1));
  std::sort(xs.begin(), xs.end());
  const double iqr = quantile_sorted(xs, 0.75) - quantile_sorted(xs, 0.25);
  double spread = std::min(sd, iqr / 1.349);
  if (!(spread > 0.0))
    spread = std::max(sd, iqr / 1.349);
  const int q = std::max(p, s);
  double b = kPilotConstant * spread *
             std::pow(static_cast<double>(big_n), -1.0 / (2.0 * q + 5.0));

  const std::vector<double> dist = side_distances(sample, side);
  const std::size_t need = static_cast<std::size_t>(5 * (p + 2));
  std::size_t inside = 0;
  for (double dd : dist)
    if (kernel_eval(dd / b, kernel) > 0.0)
      ++inside;
  if (!(b > 0.0) || inside < need) {
    const std::size_t idx = std::min(need, dist.size()) - 1;
    b = dist[idx] * (1.0 + 1e-9);
    if (!(b > 0.0))
      throw Error(ErrorCode::TooFewObservations,
                  "pilot bandwidth degenerate: observations sit on the cutoff");
  }
  return b;
}

BiasConstants bias_constants(const SideFit& main, const SideFit& pilot, const RdSample& sample,
                             const Eigen::Ref<const Eigen::VectorXd>& a) {
  const int p = main.p;
  const int s = main.s;
  if (pilot.p != p + 1 || pilot.s != s + 1)
    throw Error(ErrorCode::InvalidArgument, "pilot fit must have order (p+1, s+1)");
  if (a.size() != main.dim())
    throw Error(ErrorCode::DimensionMismatch, "functional does not match the fit dimension");
  BiasConstants out;
  out.side = main.side;
  out.alpha = pilot.theta[p + 1];
  out.lambda.resize(main.d);
  for (Eigen::Index l = 0; l < main.d; ++l)
    out.lambda[l] = pilot.theta[(p + 2) + l * (s + 2) + (s + 1)];
  out.b0 = main.gram_inv * moment_vectors(main, sample, p).zeta * out.alpha;
  out.b1 = main.gram_inv * (moment_vectors(main, sample, s).phi * out.lambda);
  out.total = Eigen::VectorXd::Zero(main.dim());
  if (p <= s)
    out.total += out.b0;
  if (p >= s)
    out.total += out.b1;
  out.contraction = a.dot(out.total);
  return out;
}

BiasConstants bias_constants(const RdSample& sample, Side side, int p, int s, int nu,
                             KernelKind kernel, double pilot_b) {
  const SideFit main = fit_side(sample, side, pilot_b, p, s, kernel);
  const SideFit pilot = fit_side(sample, side, pilot_b, p + 1, s + 1, kernel);
  return bias_constants(main, pilot, sample,
                        extractor(nu, Eigen::VectorXd::Zero(sample.d()), p, s));
}

VarianceConstants variance_constants(const SideFit& fit, const RdSample& sample,
                                     const Eigen::Ref<const Eigen::VectorXd>& a, VceKind vce) {
  VarianceConstants out;
  out.meat = side_meat(fit, sample, vce);
  out.gram = fit.gram;
  out.contraction = sandwich_contraction(fit, out.meat, a);
  return out;
}

VarianceConstants variance_constants(const RdSample& sample, Side side, double h, int p, int s,
                                     int nu, KernelKind kernel, VceKind vce) {
  const SideFit fit = fit_side(sample, side, h, p, s, kernel);
  return variance_constants(fit, sample, extractor(nu, Eigen::VectorXd::Zero(sample.d()), p, s),
                            vce);
}

double mse_bandwidth_formula(double v, double b2, double n, int p, int s, int nu) {
  const int m = std::min(p, s);
  const double lead = (1.0 + 2.0 * nu) / (2.0 * (1.0 + m - nu) * n);
  return std::pow(lead * v / b2, 1.0 / (3.0 + 2.0 * m));
}

double min_bandwidth(const RdSample& sample, Side side, Eigen::Index params) {
  const std::vector<double> dist = side_distances(sample, side);
  if (dist.empty())
    throw Error(ErrorCode::TooFewObservations,
                "no observations on the " + std::string(to_string(side)) + " side");
  const auto want = static_cast<std::size_t>(params + 2);
  return dist[std::min(want, dist.size()) - 1] * (1.0 + 1e-10);
}

double max_bandwidth(const RdSample& sample, Side side) {
  const std::vector<double> dist = side_distances(sample, side);
  if (dist.empty())
    throw Error(ErrorCode::TooFewObservations,
                "no observations on the " + std::string(to_string(side)) + " side");
  return dist.back();
}

std::pair<double, double> resolve_pilot(const RdSample& sample, const FitSpec& spec) {
  if (spec.pilot_bandwidth)
    return {spec.pilot_bandwidth->left, spec.pilot_bandwidth->right};
  return {pilot_bandwidth(sample, Side::left, spec.p, spec.s, spec.kernel),
          pilot_bandwidth(sample, Side::right, spec.p, spec.s, spec.kernel)};
}

BandwidthChoice mse_bandwidth(const RdSample& sample, const FitSpec& spec,
                              const Eigen::Ref<const Eigen::VectorXd>& selector, SelectMode mode) {
  validate_spec(spec);
  if (selector.size() != 1 + sample.d())
    throw Error(ErrorCode::DimensionMismatch, "bandwidth selector must have length 1 + d");
  const int p = spec.p;
  const int s = spec.s;
  const VceKind vce = resolve_vce(spec, sample);
  const Eigen::VectorXd a = short_functional(spec.nu, selector, p, s);

  BandwidthChoice out;
  std::tie(out.pilot_left, out.pilot_right) = resolve_pilot(sample, spec);

  auto constants = [&](Side side, double b, double& v, double& bias) {
    const SideFit main = fit_side(sample, side, b, p, s, spec.kernel);
    const SideFit pilot = fit_side(sample, side, b, p + 1, s + 1, spec.kernel);
    v = variance_constants(main, sample, a, vce).contraction;
    bias = bias_constants(main, pilot, sample, a).contraction;
  };
  constants(Side::left, out.pilot_left, out.v_left, out.bias_left);
  constants(Side::right, out.pilot_right, out.v_right, out.bias_right);

  const double n = static_cast<double>(sample.n());
  const double expo = 3.0 + 2.0 * std::min(p, s);
  const Eigen::Index params = interacted_dim(p, s, sample.d());
  const double lo_l = min_bandwidth(sample, Side::left, params);
  const double lo_r = min_bandwidth(sample, Side::right, params);
  const double hi_l = max_bandwidth(sample, Side::left);
  const double hi_r = max_bandwidth(sample, Side::right);

  auto finish = [&](double v, double b2, double reg, double lo, double hi) {
    const double h = mse_bandwidth_formula(v, b2 + reg, n, p, s, spec.nu);
    if (!std::isfinite(h) || !(h > 0.0)) {
      if (v == 0.0 && std::isfinite(b2))
        return lo; // zero variance: the smallest admissible window
      throw Error(ErrorCode::BiasDegenerate,
                  "MSE-optimal bandwidth is not finite (variance " + std::to_string(v) +
                      ", squared bias " + std::to_string(b2) + ")");
    }
    return std::clamp(h, lo, std::max(lo, hi));
  };

  if (mode == SelectMode::two_sided) {
    const double b2 = (out.bias_right - out.bias_left) * (out.bias_right - out.bias_left);
    const double reg = kBiasRegularization *
                       (out.v_right / std::pow(out.pilot_right, expo) +
                        out.v_left / std::pow(out.pilot_left, expo)) /
                       n;
    out.regularized = reg > b2;
    const double h = finish(out.v_left + out.v_right, b2, reg, std::max(lo_l, lo_r),
                            std::max(hi_l, hi_r));
    out.left = out.right = h;
  } else {
    const double b2l = out.bias_left * out.bias_left;
    const double b2r = out.bias_right * out.bias_right;
    const double regl = kBiasRegularization * out.v_left / (n * std::pow(out.pilot_left, expo));
    const double regr = kBiasRegularization * out.v_right / (n * std::pow(out.pilot_right, expo));
    out.regularized = regl > b2l || regr > b2r;
    out.left = finish(out.v_left, b2l, regl, lo_l, hi_l);
    out.right = finish(out.v_right, b2r, regr, lo_r, hi_r);
  }
  return out;
}

} // namespace rdhte
