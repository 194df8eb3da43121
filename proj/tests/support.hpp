#pragma once

#include "rdhte/kernel.hpp"
#include "rdhte/localfit.hpp"
#include "rdhte/model.hpp"
#include "rdhte/simulate.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

namespace rdhte::testing {

// Random sample with X ~ U[-1,1], c = 0, d continuous or binary covariates
// and a smooth, heteroskedastic outcome.
inline RdSample random_sample(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d,
                              bool binary = false) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> norm(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  Eigen::VectorXd x(n), y(n);
  Eigen::MatrixXd w(n, d);
  std::vector<double> beta(static_cast<std::size_t>(d));
  for (auto& b : beta)
    b = unif(rng);
  for (Eigen::Index i = 0; i < n; ++i) {
    x[i] = unif(rng);
    double mean = 0.3 + 0.7 * x[i] - 0.4 * x[i] * x[i] + (x[i] >= 0 ? 0.5 : 0.0);
    for (Eigen::Index j = 0; j < d; ++j) {
      w(i, j) = binary ? (coin(rng) ? 1.0 : 0.0) : unif(rng);
      mean += beta[static_cast<std::size_t>(j)] * w(i, j) * (1.0 + x[i]);
    }
    y[i] = mean + (0.3 + 0.2 * std::abs(x[i])) * norm(rng);
  }
  return make_sample(y, x, 0.0, w);
}

struct BruteDesign {
  std::vector<Eigen::Index> rows;
  Eigen::MatrixXd r_raw;    // basis in powers of (X - c)
  Eigen::MatrixXd r_scaled; // basis in powers of (X - c)/h
  Eigen::VectorXd k;        // K((X - c)/h)
};

// Observation by observation, without the library's design builder.
inline BruteDesign brute_design(const RdSample& s, Side side, double h, int p, int s_ord,
                                KernelKind kind) {
  BruteDesign out;
  std::vector<Eigen::VectorXd> raw, scaled;
  std::vector<double> kv;
  for (Eigen::Index i = 0; i < s.n(); ++i) {
    const bool right = s.x[i] >= s.cutoff;
    if (right != (side == Side::right))
      continue;
    const double dx = s.x[i] - s.cutoff;
    const double u = dx / h;
    double kk = 0.0;
    const double a = std::abs(u);
    if (a <= 1.0) {
      switch (kind) {
      case KernelKind::triangular: kk = 1.0 - a; break;
      case KernelKind::uniform: kk = 0.5; break;
      case KernelKind::epanechnikov: kk = 0.75 * (1.0 - u * u); break;
      }
    }
    if (!(kk > 0.0))
      continue;
    const Eigen::Index d = s.d();
    Eigen::VectorXd rr(1 + p + d * (1 + s_ord)), rs(rr.size());
    for (int j = 0; j <= p; ++j) {
      rr[j] = std::pow(dx, j);
      rs[j] = std::pow(u, j);
    }
    for (Eigen::Index l = 0; l < d; ++l)
      for (int j = 0; j <= s_ord; ++j) {
        rr[1 + p + l * (1 + s_ord) + j] = s.w(i, l) * std::pow(dx, j);
        rs[1 + p + l * (1 + s_ord) + j] = s.w(i, l) * std::pow(u, j);
      }
    out.rows.push_back(i);
    raw.push_back(rr);
    scaled.push_back(rs);
    kv.push_back(kk);
  }
  const auto m = static_cast<Eigen::Index>(raw.size());
  const Eigen::Index k = m ? raw.front().size() : 0;
  out.r_raw.resize(m, k);
  out.r_scaled.resize(m, k);
  out.k.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    out.r_raw.row(j) = raw[static_cast<std::size_t>(j)].transpose();
    out.r_scaled.row(j) = scaled[static_cast<std::size_t>(j)].transpose();
    out.k[j] = kv[static_cast<std::size_t>(j)];
  }
  return out;
}

inline Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j)
    out[static_cast<Eigen::Index>(j)] = v[rows[j]];
  return out;
}

// Brute-force sandwich a' G^{-1} V G^{-1} a on the scaled basis, with
// G = sum K/h r r' / n and V = (1/(n h)) sum w_i K_i^2 r r' u_i^2. Residuals
// and leverages are recomputed from an independent solve. hc: 0, 2 or 3.
inline double brute_sandwich(const RdSample& s, Side side, double h, int p, int s_ord,
                             KernelKind kind, const Eigen::VectorXd& a, int hc) {
  const BruteDesign des = brute_design(s, side, h, p, s_ord, kind);
  const double n = static_cast<double>(s.n());
  const Eigen::Index k = des.r_scaled.cols();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd sc = Eigen::VectorXd::Zero(k);
  const Eigen::VectorXd y = gather(s.y, des.rows);
  for (Eigen::Index i = 0; i < des.r_scaled.rows(); ++i) {
    const Eigen::VectorXd r = des.r_scaled.row(i).transpose();
    g += (des.k[i] / h) * r * r.transpose() / n;
    sc += (des.k[i] / h) * r * y[i] / n;
  }
  const Eigen::MatrixXd ginv = oracle_solve(g, Eigen::MatrixXd::Identity(k, k));
  const Eigen::VectorXd beta = ginv * sc;
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < des.r_scaled.rows(); ++i) {
    const Eigen::VectorXd r = des.r_scaled.row(i).transpose();
    const double u = y[i] - r.dot(beta);
    const double lev = (des.k[i] / h) * r.dot(ginv * r) / n;
    double wt = 1.0;
    if (hc == 2)
      wt = 1.0 / (1.0 - lev);
    else if (hc == 3)
      wt = 1.0 / ((1.0 - lev) * (1.0 - lev));
    v += wt * des.k[i] * des.k[i] * u * u * r * r.transpose() / (n * h);
  }
  return a.dot(ginv * v * ginv * a);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

} // namespace rdhte::testing
