#include "rdhte/estimands.hpp"
#include "rdhte/inference.hpp"
#include "rdhte/simulate.hpp"

#include "support.hpp"

#include <doctest.h>

#include <numeric>
#include <random>

using namespace rdhte;
using namespace rdhte::testing;

namespace {

SideFit fake_fit(Eigen::Index n_side, double tq, double tqq, Eigen::VectorXd lev) {
  SideFit f;
  f.n_side = n_side;
  f.trace_q = tq;
  f.trace_qq = tqq;
  f.leverages = std::move(lev);
  return f;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

} // namespace

TEST_SUITE("inference") {

TEST_CASE("HC weights") {
  const SideFit f = fake_fit(100, 4.0, 4.0, Eigen::Vector3d(0.5, 0.2, 0.1));
  CHECK(hc_weights(VceKind::hc0, f) == Eigen::Vector3d::Ones());
  CHECK(hc_weights(VceKind::hc1, f)[0] == doctest::Approx(100.0 / 96.0));
  CHECK(hc_weights(VceKind::hc2, f)[0] == doctest::Approx(2.0));
  CHECK(hc_weights(VceKind::hc3, f)[0] == doctest::Approx(4.0));
  CHECK(hc_weights(VceKind::hc3, f)[1] == doctest::Approx(1.0 / 0.64));
  const SideFit one = fake_fit(10, 2.0, 2.0, Eigen::Vector2d(1.0, 0.3));
  CHECK(code_of([&] { hc_weights(VceKind::hc2, one); }) == ErrorCode::LeverageOne);
  CHECK(code_of([&] { hc_weights(VceKind::hc3, one); }) == ErrorCode::LeverageOne);
  CHECK_NOTHROW(hc_weights(VceKind::hc0, one));
}

TEST_CASE("meat is zero for an in-span outcome") {
  std::mt19937_64 rng(3);
  RdSample s = random_sample(rng, 100, 1);
  for (Eigen::Index i = 0; i < s.n(); ++i)
    s.y[i] = 1 - 2 * s.x[i] + s.w(i, 0) * (0.5 + s.x[i]);
  const SideFit f = fit_side(s, Side::right, 0.9, 1, 1, KernelKind::triangular);
  CHECK(meat_matrix(f, hc_weights(VceKind::hc3, f)).cwiseAbs().maxCoeff() < 1e-20);
}

TEST_CASE("sandwich equals brute-force summation") {
  std::mt19937_64 rng(40);
  for (int rep = 0; rep < 5; ++rep) {
    const RdSample s = random_sample(rng, 40, rep % 2);
    const double h = 1.0;
    for (Side side : {Side::left, Side::right}) {
      const SideFit f = fit_side(s, side, h, 1, 1, KernelKind::triangular);
      const Eigen::VectorXd a = extractor(0, Eigen::VectorXd::Ones(s.d()), 1, 1);
      const double lib0 = sandwich_contraction(f, meat_matrix(f, hc_weights(VceKind::hc0, f)), a);
      const double lib3 = sandwich_contraction(f, meat_matrix(f, hc_weights(VceKind::hc3, f)), a);
      CHECK(rel_err(lib0, brute_sandwich(s, side, h, 1, 1, KernelKind::triangular, a, 0)) < 1e-10);
      CHECK(rel_err(lib3, brute_sandwich(s, side, h, 1, 1, KernelKind::triangular, a, 3)) < 1e-10);
    }
  }
}

TEST_CASE("HC1 meat is a scalar multiple of HC0 meat") {
  std::mt19937_64 rng(41);
  const RdSample s = random_sample(rng, 300, 2);
  const SideFit f = fit_side(s, Side::left, 0.7, 1, 1, KernelKind::triangular);
  const double n_side = static_cast<double>(f.n_side);
  const double scalar = n_side / (n_side - 2 * f.trace_q + f.trace_qq);
  const Eigen::MatrixXd m0 = meat_matrix(f, hc_weights(VceKind::hc0, f));
  const Eigen::MatrixXd m1 = meat_matrix(f, hc_weights(VceKind::hc1, f));
  CHECK((m1 - scalar * m0).cwiseAbs().maxCoeff() <= 1e-12 * m0.cwiseAbs().maxCoeff());
}

TEST_CASE("singleton clusters reproduce the HC0 meat") {
  std::mt19937_64 rng(42);
  RdSample s = random_sample(rng, 250, 1);
  std::vector<std::int64_t> ids(static_cast<std::size_t>(s.n()));
  std::iota(ids.begin(), ids.end(), 0);
  s.cluster = ids;
  const SideFit f = fit_side(s, Side::right, 0.8, 1, 1, KernelKind::triangular);
  const ClusterMeat cm = cluster_meat(f, ids);
  const Eigen::MatrixXd m0 = meat_matrix(f, hc_weights(VceKind::hc0, f));
  CHECK(cm.clusters == f.eff_n);
  CHECK((cm.meat - m0).cwiseAbs().maxCoeff() <= 1e-12 * m0.cwiseAbs().maxCoeff());
  const double factor = cluster_factor(cm.clusters, s.n(), 1, 1);
  CHECK(cm.factor == factor);
  const Eigen::MatrixXd mc = side_meat(f, s, VceKind::cluster);
  CHECK((mc - factor * m0).cwiseAbs().maxCoeff() <= 1e-12 * m0.cwiseAbs().maxCoeff());
}

TEST_CASE("two clusters by hand") {
  // four right-side points, local linear, uniform kernel so K = 1/2
  RdSample s = make_sample(Eigen::Vector4d(1.0, 3.0, 2.0, 5.0), Eigen::Vector4d(0.1, 0.2, 0.3, 0.4),
                           0.0);
  s.cluster = std::vector<std::int64_t>{7, 7, 9, 9};
  const SideFit f = fit_side(s, Side::right, 1.0, 1, 1, KernelKind::uniform);
  // OLS of y on (1, x): slope = Sxy/Sxx
  const double xb = 0.25, yb = 2.75;
  double sxy = 0, sxx = 0;
  for (int i = 0; i < 4; ++i) {
    sxy += (s.x[i] - xb) * (s.y[i] - yb);
    sxx += (s.x[i] - xb) * (s.x[i] - xb);
  }
  const double b1 = sxy / sxx, b0 = yb - b1 * xb;
  Eigen::Vector2d g1 = Eigen::Vector2d::Zero(), g2 = Eigen::Vector2d::Zero();
  for (int i = 0; i < 4; ++i) {
    const double u = s.y[i] - b0 - b1 * s.x[i];
    const Eigen::Vector2d term = 0.5 * Eigen::Vector2d(1.0, s.x[i]) * u;
    (i < 2 ? g1 : g2) += term;
  }
  const Eigen::Matrix2d want = (g1 * g1.transpose() + g2 * g2.transpose()) / 4.0;
  const ClusterMeat cm = cluster_meat(f, *s.cluster);
  CHECK(cm.clusters == 2);
  CHECK((cm.meat - want).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(cm.factor == doctest::Approx(4.0 / 2.0));
}

TEST_CASE("one cluster is not enough") {
  std::mt19937_64 rng(43);
  RdSample s = random_sample(rng, 60, 0);
  s.cluster = std::vector<std::int64_t>(60, 1);
  const SideFit f = fit_side(s, Side::right, 1.0, 1, 1, KernelKind::triangular);
  CHECK(code_of([&] { cluster_meat(f, *s.cluster); }) == ErrorCode::TooFewClusters);
}

TEST_CASE("coefficient variance") {
  std::mt19937_64 rng(60);
  const RdSample s = random_sample(rng, 60, 1);
  const double h = 1.0;
  const SideFit l = fit_side(s, Side::left, h, 1, 1, KernelKind::triangular);
  const SideFit r = fit_side(s, Side::right, h, 1, 1, KernelKind::triangular);
  CHECK(coef_variance(s, l, r, Eigen::VectorXd::Zero(4), VceKind::hc2).variance == 0.0);

  const Eigen::VectorXd a = extractor(0, Eigen::VectorXd::Constant(1, 0.5), 1, 1);
  const VarianceEstimate v = coef_variance(s, l, r, a, VceKind::hc0);
  // brute force: sum over sides of a'G^{-1}VG^{-1}a / (n h)
  const double n = static_cast<double>(s.n());
  const double want = (brute_sandwich(s, Side::left, h, 1, 1, KernelKind::triangular, a, 0) +
                       brute_sandwich(s, Side::right, h, 1, 1, KernelKind::triangular, a, 0)) /
                      (n * h);
  CHECK(rel_err(v.variance, want) < 1e-10);
  CHECK(v.se == doctest::Approx(std::sqrt(want)));

  // doubling the kernel weights leaves the variance unchanged
  SideDesign dl = l.design, dr = r.design;
  dl.weights *= 2.0;
  dl.kernel *= 2.0;
  dr.weights *= 2.0;
  dr.kernel *= 2.0;
  const VarianceEstimate v2 =
      coef_variance(s, fit_design(s, dl), fit_design(s, dr), a, VceKind::hc0);
  CHECK(rel_err(v2.variance, v.variance) < 1e-12);
}

TEST_CASE("influence weights reproduce the estimate") {
  std::mt19937_64 rng(61);
  const RdSample s = random_sample(rng, 200, 2);
  const SideFit f = fit_side(s, Side::right, 0.6, 1, 1, KernelKind::epanechnikov);
  const Eigen::VectorXd a = extractor(0, Eigen::Vector2d(0.3, -1.0), 1, 1);
  const Eigen::VectorXd om = influence(f, a);
  CHECK(om.dot(gather(s.y, f.design.rows)) == doctest::Approx(a.dot(f.theta)).epsilon(1e-12));
}

TEST_CASE("bias-corrected point") {
  CHECK(rbc_point(1.0, 0.0, 0.2, 1, 1, 0) == 1.0);
  CHECK(rbc_point(1.0, 0.5, 0.2, 1, 1, 0) == doctest::Approx(0.98));
  CHECK(rbc_point(1.0, 0.5, 0.2, 1, 1, 1) == doctest::Approx(0.9));
}

TEST_CASE("robust variance with no bias channel") {
  // in-span polynomial mean, identical main and pilot windows
  std::mt19937_64 rng(62);
  RdSample s = random_sample(rng, 400, 1);
  std::normal_distribution<double> e(0, 0.3);
  for (Eigen::Index i = 0; i < s.n(); ++i)
    s.y[i] = 1 + s.x[i] + s.w(i, 0) * (2 - s.x[i]) + e(rng);
  const double h = 0.8;
  const SideFit l = fit_side(s, Side::left, h, 1, 1, KernelKind::triangular);
  const SideFit r = fit_side(s, Side::right, h, 1, 1, KernelKind::triangular);
  const SideFit pl = fit_side(s, Side::left, h, 2, 2, KernelKind::triangular);
  const SideFit pr = fit_side(s, Side::right, h, 2, 2, KernelKind::triangular);
  const Eigen::VectorXd a = extractor(0, Eigen::VectorXd::Zero(1), 1, 1);
  const double plain = coef_variance(s, l, r, a, VceKind::hc0).variance;
  const double robust = rbc_variance(s, l, r, pl, pr, a, VceKind::hc0).variance;
  CHECK(robust >= plain);
}

TEST_CASE("confidence intervals and p-values") {
  const Interval a = ci_pvalue(0.0, 1.0, 0.95);
  CHECK(a.lower == doctest::Approx(-1.959964).epsilon(1e-6));
  CHECK(a.upper == doctest::Approx(1.959964).epsilon(1e-6));
  CHECK(a.p_value == doctest::Approx(1.0));
  CHECK(ci_pvalue(1.96, 1.0, 0.95).p_value == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(normal_critical_value(0.9) == doctest::Approx(1.644854).epsilon(1e-6));
  const Interval z = ci_pvalue(0.3, 0.0, 0.95);
  CHECK(z.zero_se);
  CHECK(z.lower == 0.3);
  CHECK(z.upper == 0.3);
  CHECK(z.p_value == 0.0);
  CHECK(ci_pvalue(0.0, 0.0, 0.95).p_value == 1.0);
  CHECK(code_of([] { ci_pvalue(0.0, 1.0, 1.5); }) == ErrorCode::InvalidArgument);
}

}
