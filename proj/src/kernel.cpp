#include "rdhte/kernel.hpp"

#include "rdhte/error.hpp"

#include <cmath>
#include <string>

namespace rdhte {

std::string_view to_string(KernelKind kind) {
  switch (kind) {
  case KernelKind::triangular:
    return "triangular";
  case KernelKind::uniform:
    return "uniform";
  case KernelKind::epanechnikov:
    return "epanechnikov";
  }
  return "unknown";
}

std::optional<KernelKind> parse_kernel(std::string_view name) {
  if (name == "tri" || name == "triangular")
    return KernelKind::triangular;
  if (name == "uni" || name == "uniform")
    return KernelKind::uniform;
  if (name == "epa" || name == "epanechnikov")
    return KernelKind::epanechnikov;
  return std::nullopt;
}

double kernel_eval(double u, KernelKind kind) {
  const double a = std::abs(u);
  if (!(a <= 1.0))
    return 0.0;
  switch (kind) {
  case KernelKind::triangular:
    return 1.0 - a;
  case KernelKind::uniform:
    return 0.5;
  case KernelKind::epanechnikov:
    return 0.75 * (1.0 - a * a);
  }
  return 0.0;
}

Eigen::VectorXd poly_basis(double u, int q) {
  if (q < 0)
    throw Error(ErrorCode::InvalidArgument, "polynomial order must be non-negative");
  Eigen::VectorXd r(q + 1);
  double acc = 1.0;
  for (int j = 0; j <= q; ++j) {
    r[j] = acc;
    acc *= u;
  }
  return r;
}

void interacted_basis_into(double u, const StridedRow& w, int p, int s, StridedRowOut out) {
  double acc = 1.0;
  for (int j = 0; j <= p; ++j) {
    out[j] = acc;
    acc *= u;
  }
  Eigen::Index pos = p + 1;
  for (Eigen::Index l = 0; l < w.size(); ++l) {
    double a = w[l];
    for (int j = 0; j <= s; ++j) {
      out[pos++] = a;
      a *= u;
    }
  }
}

Eigen::VectorXd interacted_basis(double u, const Eigen::Ref<const Eigen::VectorXd>& w,
                                 int p, int s) {
  if (p < 0 || s < 0)
    throw Error(ErrorCode::InvalidArgument, "polynomial orders must be non-negative");
  Eigen::RowVectorXd row(interacted_dim(p, s, w.size()));
  interacted_basis_into(u, w.transpose(), p, s, row);
  return row.transpose();
}

Eigen::VectorXd scaling_diagonal(double h, int p, int s, Eigen::Index d) {
  if (!(h > 0.0) || !std::isfinite(h))
    throw Error(ErrorCode::NonPositiveBandwidth,
                "bandwidth must be positive and finite, got " + std::to_string(h));
  Eigen::VectorXd diag(interacted_dim(p, s, d));
  Eigen::Index pos = 0;
  for (int j = 0; j <= p; ++j)
    diag[pos++] = std::pow(h, j);
  for (Eigen::Index l = 0; l < d; ++l)
    for (int j = 0; j <= s; ++j)
      diag[pos++] = std::pow(h, j);
  return diag;
}

Eigen::DiagonalMatrix<double, Eigen::Dynamic> scaling_matrix(double h, int p, int s,
                                                             Eigen::Index d) {
  return Eigen::DiagonalMatrix<double, Eigen::Dynamic>(scaling_diagonal(h, p, s, d));
}

} // namespace rdhte
