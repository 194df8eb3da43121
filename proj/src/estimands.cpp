#include "rdhte/estimands.hpp"

#include "rdhte/bandwidth.hpp"
#include "rdhte/inference.hpp"

#include <cmath>
#include <cstdio>
#include <tuple>

namespace rdhte {

namespace {

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i)
    f *= i;
  return f;
}

void check_nu(int nu, int p, int s) {
  if (nu < 0 || nu > std::min(p, s))
    throw Error(ErrorCode::NuOutOfRange,
                "derivative order " + std::to_string(nu) + " outside [0, min(p, s)]");
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string column_label(const RdSample& sample, Eigen::Index j) {
  if (j < static_cast<Eigen::Index>(sample.w_labels.size()))
    return sample.w_labels[static_cast<std::size_t>(j)];
  return "w" + std::to_string(j + 1);
}

std::string point_label(const RdSample& sample, const Eigen::Ref<const Eigen::VectorXd>& w) {
  std::string out = "kappa(";
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (j > 0)
      out += ",";
    out += column_label(sample, j) + "=" + format_number(w[j]);
  }
  return out + ")";
}

EstimateRecord make_record(const HteResult& res, const std::string& label,
                           const Eigen::Ref<const Eigen::VectorXd>& selector) {
  const RdSample& sample = *res.sample;
  if (selector.size() != 1 + sample.d())
    throw Error(ErrorCode::DimensionMismatch, "selector has length " +
                                                  std::to_string(selector.size()) +
                                                  ", expected 1 + d = " +
                                                  std::to_string(1 + sample.d()));
  const FitSpec& spec = res.spec;
  EstimateRecord rec;
  rec.label = label;
  rec.selector = selector;
  const Eigen::VectorXd a = short_functional(spec.nu, selector, spec.p, spec.s);
  rec.point = a.dot(res.right.theta - res.left.theta);

  const VarianceEstimate v = coef_variance(sample, res.left, res.right, a, res.vce);
  rec.variance = v.variance;
  rec.se = v.se;

  const double bias_r = compose_bias(res.right, res.pilot_right, sample, a).bias;
  const double bias_l = compose_bias(res.left, res.pilot_left, sample, a).bias;
  rec.bias = bias_r - bias_l;
  rec.rbc_point = rec.point - rec.bias;

  const VarianceEstimate rv =
      rbc_variance(sample, res.left, res.right, res.pilot_left, res.pilot_right, a, res.vce);
  rec.rbc_variance = rv.variance;
  rec.rbc_se = rv.se;

  const Interval ci = ci_pvalue(rec.rbc_point, rec.rbc_se, spec.level);
  rec.ci_lower = ci.lower;
  rec.ci_upper = ci.upper;
  rec.z = ci.z;
  rec.p_value = ci.p_value;
  rec.zero_se = ci.zero_se;
  return rec;
}

} // namespace

Eigen::VectorXd short_functional(int nu, const Eigen::Ref<const Eigen::VectorXd>& selector, int p,
                                 int s) {
  check_nu(nu, p, s);
  if (selector.size() < 1)
    throw Error(ErrorCode::DimensionMismatch, "selector must have length 1 + d");
  const Eigen::Index d = selector.size() - 1;
  const double f = factorial(nu);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(interacted_dim(p, s, d));
  a[nu] = f * selector[0];
  for (Eigen::Index l = 0; l < d; ++l)
    a[(p + 1) + l * (s + 1) + nu] = f * selector[1 + l];
  return a;
}

Eigen::VectorXd extractor(int nu, const Eigen::Ref<const Eigen::VectorXd>& w, int p, int s) {
  Eigen::VectorXd sel(1 + w.size());
  sel << 1.0, w;
  return short_functional(nu, sel, p, s);
}

Eigen::MatrixXd long_form_map(int nu, int p, int s, Eigen::Index d) {
  check_nu(nu, p, s);
  const Eigen::Index k = interacted_dim(p, s, d);
  const double f = factorial(nu);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(1 + d, 2 * k);
  m(0, nu) = -f;
  m(0, k + nu) = f;
  for (Eigen::Index l = 0; l < d; ++l) {
    const Eigen::Index pos = (p + 1) + l * (s + 1) + nu;
    m(1 + l, pos) = -f;
    m(1 + l, k + pos) = f;
  }
  return m;
}

bool is_extrapolation(const RdSample& sample, const Eigen::Ref<const Eigen::VectorXd>& w) {
  if (w.size() != sample.d())
    throw Error(ErrorCode::DimensionMismatch, "evaluation point must have length d");
  for (Eigen::Index j = 0; j < w.size(); ++j)
    if (w[j] < sample.w.col(j).minCoeff() || w[j] > sample.w.col(j).maxCoeff())
      return true;
  return false;
}

std::vector<EstimandRequest> default_estimands(const RdSample& sample) {
  const Eigen::Index d = sample.d();
  std::vector<EstimandRequest> out;
  auto unit = [&](Eigen::Index j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(1 + d);
    e[j] = 1.0;
    return e;
  };
  if (d == 0) {
    out.push_back({"tau", unit(0)});
    return out;
  }

  std::vector<CovariateBlock> blocks = sample.blocks;
  if (blocks.empty()) {
    for (Eigen::Index j = 0; j < d; ++j) {
      CovariateBlock b;
      b.source = column_label(sample, j);
      b.first = j;
      b.count = 1;
      b.level_labels.push_back(b.source);
      blocks.push_back(std::move(b));
    }
  }
  auto categorical = [](const CovariateBlock& b) { return b.kind != CovariateKind::continuous; };

  if (blocks.size() == 1 && categorical(blocks.front()))
    out.push_back({"kappa(" + blocks.front().source + "=" + blocks.front().baseline_label + ")",
                   unit(0)});
  else
    out.push_back({"theta", unit(0)});

  for (const auto& b : blocks) {
    if (categorical(b)) {
      for (Eigen::Index j = 0; j < b.count; ++j) {
        const std::string lvl = b.level_labels[static_cast<std::size_t>(j)];
        out.push_back({"kappa(" + b.source + "=" + lvl + ")", unit(0) + unit(1 + b.first + j)});
      }
      for (Eigen::Index j = 0; j < b.count; ++j) {
        const std::string lvl = b.level_labels[static_cast<std::size_t>(j)];
        out.push_back({"xi(" + b.source + "=" + lvl + ")", unit(1 + b.first + j)});
      }
    } else {
      for (Eigen::Index j = 0; j < b.count; ++j)
        out.push_back({"xi(" + column_label(sample, b.first + j) + ")", unit(1 + b.first + j)});
    }
  }
  return out;
}

HteResult fit_hte(const RdSample& sample, const FitSpec& spec) {
  validate_sample(sample);
  validate_spec(spec);
  HteResult res;
  res.sample = std::make_shared<const RdSample>(sample);
  res.spec = spec;
  res.vce = resolve_vce(spec, sample);
  const int p = spec.p;
  const int s = spec.s;

  if (const auto* f = std::get_if<FixedBandwidth>(&spec.bandwidth)) {
    res.h_left = f->left;
    res.h_right = f->right;
    res.bandwidth_source = "fixed";
    std::tie(res.b_left, res.b_right) = resolve_pilot(sample, spec);
  } else if (const auto* c = std::get_if<CommonBandwidth>(&spec.bandwidth)) {
    res.h_left = res.h_right = c->h;
    res.bandwidth_source = "common";
    std::tie(res.b_left, res.b_right) = resolve_pilot(sample, spec);
  } else if (const auto* sel = std::get_if<SelectBandwidth>(&spec.bandwidth)) {
    Eigen::VectorXd target = Eigen::VectorXd::Zero(1 + sample.d());
    target[0] = 1.0;
    if (spec.bw_selector)
      target = *spec.bw_selector;
    const BandwidthChoice bw = mse_bandwidth(sample, spec, target, sel->mode);
    res.h_left = bw.left;
    res.h_right = bw.right;
    res.b_left = bw.pilot_left;
    res.b_right = bw.pilot_right;
    res.regularized = bw.regularized;
    res.bandwidth_source = sel->mode == SelectMode::two_sided ? "mse_two_sided" : "mse_one_sided";
  }
  if (!(res.h_left > 0.0) || !(res.h_right > 0.0))
    throw Error(ErrorCode::BandwidthUnresolved, "bandwidth could not be resolved");

  res.left = fit_side(sample, Side::left, res.h_left, p, s, spec.kernel);
  res.right = fit_side(sample, Side::right, res.h_right, p, s, spec.kernel);
  res.pilot_left = fit_side(sample, Side::left, res.b_left, p + 1, s + 1, spec.kernel);
  res.pilot_right = fit_side(sample, Side::right, res.b_right, p + 1, s + 1, spec.kernel);

  const Eigen::VectorXd e0 = extractor(spec.nu, Eigen::VectorXd::Zero(sample.d()), p, s);
  res.bias_left = bias_constants(res.left, res.pilot_left, sample, e0).total;
  res.bias_right = bias_constants(res.right, res.pilot_right, sample, e0).total;

  Eigen::VectorXd stacked(2 * res.left.dim());
  stacked << res.left.theta, res.right.theta;
  res.varsigma = long_form_map(spec.nu, p, s, sample.d()) * stacked;

  const std::vector<EstimandRequest> requests =
      spec.estimands.empty() ? default_estimands(sample) : spec.estimands;
  for (const auto& req : requests)
    res.estimates.push_back(make_record(res, req.label, req.selector));
  for (const auto& w : spec.eval_points)
    res.estimates.push_back(cate_at(res, w));
  return res;
}

EstimateRecord cate_at(const HteResult& result, const Eigen::Ref<const Eigen::VectorXd>& w) {
  const RdSample& sample = *result.sample;
  if (w.size() != sample.d())
    throw Error(ErrorCode::DimensionMismatch, "evaluation point has length " +
                                                  std::to_string(w.size()) + ", expected d = " +
                                                  std::to_string(sample.d()));
  Eigen::VectorXd sel(1 + w.size());
  sel << 1.0, w;
  EstimateRecord rec = make_record(result, point_label(sample, w), sel);
  rec.extrapolation = is_extrapolation(sample, w);
  return rec;
}

EstimateRecord contrast(const HteResult& result, const Eigen::Ref<const Eigen::VectorXd>& selector,
                        const std::string& label) {
  return make_record(result, label, selector);
}

} // namespace rdhte
