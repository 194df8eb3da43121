#include "rdhte/localfit.hpp"

#include <cmath>

namespace rdhte {

std::string_view to_string(Side side) { return side == Side::left ? "left" : "right"; }

SideDesign side_design(const RdSample& sample, Side side, double h, int p, int s,
                       KernelKind kernel) {
  if (!(h > 0.0) || !std::isfinite(h))
    throw Error(ErrorCode::NonPositiveBandwidth,
                "bandwidth must be positive and finite, got " + std::to_string(h));
  if (p < 0 || s < 0)
    throw Error(ErrorCode::InvalidArgument, "polynomial orders must be non-negative");
  SideDesign out;
  out.side = side;
  out.h = h;
  out.p = p;
  out.s = s;
  out.kind = kernel;
  const Eigen::Index n = sample.n();
  std::vector<double> kern;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!on_side(sample.x[i], sample.cutoff, side))
      continue;
    const double k = kernel_eval((sample.x[i] - sample.cutoff) / h, kernel);
    if (k > 0.0) {
      out.rows.push_back(i);
      kern.push_back(k);
    }
  }
  const auto m = static_cast<Eigen::Index>(out.rows.size());
  out.r.resize(m, interacted_dim(p, s, sample.d()));
  out.kernel = Eigen::Map<Eigen::VectorXd>(kern.data(), m);
  out.weights = out.kernel / h;
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::Index i = out.rows[static_cast<std::size_t>(j)];
    interacted_basis_into((sample.x[i] - sample.cutoff) / h, sample.w.row(i), p, s,
                          out.r.row(j));
  }
  return out;
}

SideFit fit_design(const RdSample& sample, SideDesign design) {
  SideFit fit;
  fit.side = design.side;
  fit.h = design.h;
  fit.p = design.p;
  fit.s = design.s;
  fit.d = sample.d();
  fit.n_total = sample.n();
  for (Eigen::Index i = 0; i < sample.n(); ++i)
    if (on_side(sample.x[i], sample.cutoff, design.side))
      ++fit.n_side;
  const Eigen::Index m = design.r.rows();
  const Eigen::Index k = design.r.cols();
  fit.eff_n = m;
  const double n = static_cast<double>(fit.n_total);

  const std::string where = std::string(to_string(design.side)) + " side at h=" +
                            std::to_string(design.h);
  if (m < k)
    throw Error(ErrorCode::SingularGram,
                "too few observations or collinear heterogeneity covariates within bandwidth (" +
                    std::to_string(m) + " in window, " + std::to_string(k) +
                    " parameters, " + where + ")");

  Eigen::VectorXd y(m);
  for (Eigen::Index j = 0; j < m; ++j)
    y[j] = sample.y[design.rows[static_cast<std::size_t>(j)]];

  const Eigen::VectorXd sw = (design.weights / n).cwiseSqrt();
  const Eigen::MatrixXd a = sw.asDiagonal() * design.r;
  fit.gram = a.transpose() * a;
  fit.gram = (0.5 * (fit.gram + fit.gram.transpose())).eval();
  fit.score = design.r.transpose() * design.weights.cwiseProduct(y) / n;

  // Equilibrate before the condition estimate so the basis scaling does not
  // count as ill-conditioning.
  const Eigen::VectorXd diag = fit.gram.diagonal();
  if ((diag.array() <= 0.0).any())
    throw Error(ErrorCode::SingularGram,
                "too few observations or collinear heterogeneity covariates within bandwidth "
                "(zero column in window, " + where + ")");
  const Eigen::VectorXd dinv = diag.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd eq = dinv.asDiagonal() * fit.gram * dinv.asDiagonal();
  Eigen::LLT<Eigen::MatrixXd> llt(eq);
  fit.rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
  if (!(fit.rcond >= kSingularRcond))
    throw Error(ErrorCode::SingularGram,
                "too few observations or collinear heterogeneity covariates within bandwidth "
                "(reciprocal condition " + std::to_string(fit.rcond) + ", " + where + ")");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < k)
    throw Error(ErrorCode::SingularGram,
                "too few observations or collinear heterogeneity covariates within bandwidth "
                "(rank " + std::to_string(qr.rank()) + " < " + std::to_string(k) + ", " + where + ")");
  const Eigen::VectorXd beta = qr.solve(sw.cwiseProduct(y).eval());

  fit.gram_inv = dinv.asDiagonal() * llt.solve(Eigen::MatrixXd::Identity(k, k)) *
                 dinv.asDiagonal();
  fit.gram_inv = (0.5 * (fit.gram_inv + fit.gram_inv.transpose())).eval();

  fit.theta = beta.cwiseQuotient(scaling_diagonal(design.h, design.p, design.s, fit.d));
  fit.residuals = y - design.r * beta;
  fit.leverages = (design.r * fit.gram_inv).cwiseProduct(design.r).rowwise().sum();
  fit.leverages = fit.leverages.cwiseProduct(design.weights) / n;
  fit.trace_q = fit.leverages.sum();
  const Eigen::MatrixXd proj = fit.gram_inv * fit.gram;
  fit.trace_qq = proj.cwiseProduct(proj.transpose()).sum();
  fit.design = std::move(design);
  return fit;
}

SideFit fit_side(const RdSample& sample, Side side, double h, int p, int s, KernelKind kernel) {
  return fit_design(sample, side_design(sample, side, h, p, s, kernel));
}

double fitted_value(const SideFit& fit, const RdSample& sample, Eigen::Index row) {
  const Eigen::VectorXd r = interacted_basis(sample.x[row] - sample.cutoff,
                                             sample.w.row(row).transpose(), fit.p, fit.s);
  return r.dot(fit.theta);
}

LongFit long_regression(const RdSample& sample, double h, int p, int s, KernelKind kernel) {
  const SideDesign left = side_design(sample, Side::left, h, p, s, kernel);
  const SideDesign right = side_design(sample, Side::right, h, p, s, kernel);
  const Eigen::Index k = left.r.cols();
  const Eigen::Index ml = left.r.rows();
  const Eigen::Index mr = right.r.rows();
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(ml + mr, 2 * k);
  Eigen::VectorXd y(ml + mr);
  Eigen::VectorXd w(ml + mr);
  x.topLeftCorner(ml, k) = left.r;
  x.bottomLeftCorner(mr, k) = right.r;
  x.bottomRightCorner(mr, k) = right.r;
  for (Eigen::Index j = 0; j < ml; ++j)
    y[j] = sample.y[left.rows[static_cast<std::size_t>(j)]];
  for (Eigen::Index j = 0; j < mr; ++j)
    y[ml + j] = sample.y[right.rows[static_cast<std::size_t>(j)]];
  w << left.weights, right.weights;
  const Eigen::VectorXd sw = w.cwiseSqrt();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sw.asDiagonal() * x);
  if (qr.rank() < 2 * k)
    throw Error(ErrorCode::SingularGram,
                "long interacted regression is rank deficient within bandwidth");
  const Eigen::VectorXd beta = qr.solve(sw.cwiseProduct(y).eval());
  const Eigen::VectorXd hd = scaling_diagonal(h, p, s, sample.d());
  return {beta.head(k).cwiseQuotient(hd), beta.tail(k).cwiseQuotient(hd)};
}

double max_relative_error(const Eigen::Ref<const Eigen::VectorXd>& a,
                          const Eigen::Ref<const Eigen::VectorXd>& b) {
  const double scale = b.cwiseAbs().maxCoeff();
  const double diff = (a - b).cwiseAbs().maxCoeff();
  if (scale == 0.0)
    return diff;
  return diff / scale;
}

bool long_short_equivalence_check(const RdSample& sample, double h, int p, int s,
                                  KernelKind kernel, double tol) {
  const SideFit left = fit_side(sample, Side::left, h, p, s, kernel);
  const SideFit right = fit_side(sample, Side::right, h, p, s, kernel);
  const LongFit lf = long_regression(sample, h, p, s, kernel);
  return max_relative_error(lf.base, left.theta) < tol &&
         max_relative_error(lf.jump, right.theta - left.theta) < tol;
}

} // namespace rdhte
