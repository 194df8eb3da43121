#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string_view>

namespace rdhte {

enum class KernelKind { triangular, uniform, epanechnikov };

std::string_view to_string(KernelKind kind);
std::optional<KernelKind> parse_kernel(std::string_view name);

// Symmetrized kernel K(u) = k(|u|), zero outside [-1, 1].
//   triangular    max(0, 1 - |u|)
//   uniform       1/2 on |u| <= 1
//   epanechnikov  3/4 (1 - u^2) on |u| <= 1
double kernel_eval(double u, KernelKind kind);

// (1, u, ..., u^q)'
Eigen::VectorXd poly_basis(double u, int q);

// r_{p,s}(u, w) = (r_p(u)', w' (x) r_s(u)')': the main polynomial block
// followed by one interaction block w_l * r_s(u) per covariate.
Eigen::VectorXd interacted_basis(double u, const Eigen::Ref<const Eigen::VectorXd>& w,
                                 int p, int s);

using StridedRow = Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;
using StridedRowOut = Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

// Writes interacted_basis into a preallocated row; avoids a temporary per
// observation in the design builders.
void interacted_basis_into(double u, const StridedRow& w, int p, int s, StridedRowOut out);

inline Eigen::Index interacted_dim(int p, int s, Eigen::Index d) {
  return 1 + p + d * (1 + s);
}

// Diagonal of H_{p,s}(h) = blockdiag(H_p(h), I_d (x) H_s(h)), H_q(h) = diag(h^0..h^q).
Eigen::VectorXd scaling_diagonal(double h, int p, int s, Eigen::Index d);

Eigen::DiagonalMatrix<double, Eigen::Dynamic> scaling_matrix(double h, int p, int s,
                                                             Eigen::Index d);

} // namespace rdhte
