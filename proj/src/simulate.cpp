#include "rdhte/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

namespace rdhte {

double Polynomial::operator()(double x) const {
  double acc = 0.0;
  for (auto it = coef.rbegin(); it != coef.rend(); ++it)
    acc = acc * x + *it;
  return acc;
}

double Polynomial::derivative(double x, int order) const {
  double acc = 0.0;
  for (int j = static_cast<int>(coef.size()) - 1; j >= order; --j) {
    double c = coef[static_cast<std::size_t>(j)];
    for (int t = 0; t < order; ++t)
      c *= j - t;
    acc = acc * x + c;
  }
  return acc;
}

Eigen::Index CovariateDist::columns() const {
  if (law == CovariateLaw::categorical)
    return probs.empty() ? 0 : static_cast<Eigen::Index>(probs.size()) - 1;
  return 1;
}

Eigen::Index DgpConfig::d() const {
  Eigen::Index d = 0;
  for (const auto& c : covariates)
    d += c.columns();
  return d;
}

DgpConfig canonical_preset() {
  DgpConfig c;
  c.alpha_left.coef = {0.5, 0.8, -0.6};
  c.alpha_right.coef = {1.0, 0.6, 0.9};
  c.lambda_left = {Polynomial{{0.3, 0.2}}};
  c.lambda_right = {Polynomial{{0.7, -0.1}}};
  CovariateDist w;
  w.law = CovariateLaw::binary;
  w.prob = 0.5;
  c.covariates = {w};
  c.running = RunningLaw::uniform;
  c.sigma0 = 0.5;
  c.sigma1 = 0.0;
  c.cutoff = 0.0;
  return c;
}

void validate_config(const DgpConfig& config) {
  const auto d = static_cast<std::size_t>(config.d());
  if (config.lambda_left.size() != d || config.lambda_right.size() != d)
    throw Error(ErrorCode::DimensionMismatch,
                "need one lambda polynomial per covariate column on each side");
  if (!(config.sigma0 >= 0.0) || !(config.sigma1 >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "noise sd must be non-negative");
  if (!std::isfinite(config.cutoff))
    throw Error(ErrorCode::NonFinite, "cutoff is not finite");
  for (const auto& c : config.covariates) {
    if (c.law == CovariateLaw::binary && !(c.prob >= 0.0 && c.prob <= 1.0))
      throw Error(ErrorCode::InvalidArgument, "binary covariate probability outside [0, 1]");
    if (c.law == CovariateLaw::uniform && !(c.hi > c.lo))
      throw Error(ErrorCode::InvalidArgument, "uniform covariate needs hi > lo");
    if (c.law == CovariateLaw::categorical) {
      if (c.probs.size() < 2)
        throw Error(ErrorCode::InvalidArgument, "categorical covariate needs at least 2 levels");
      for (double pr : c.probs)
        if (!(pr >= 0.0))
          throw Error(ErrorCode::InvalidArgument, "categorical probabilities must be non-negative");
    }
  }
  if (config.running == RunningLaw::beta && !(config.beta_shape > 0.0))
    throw Error(ErrorCode::InvalidArgument, "beta shape must be positive");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

} // namespace

std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t rep) {
  return splitmix64(splitmix64(seed) ^ splitmix64(rep + 0x632be59bd9b4e019ULL));
}

RdSample gen_sample(const DgpConfig& config, Eigen::Index n, std::uint64_t seed) {
  validate_config(config);
  if (n < 1)
    throw Error(ErrorCode::EmptySample, "sample size must be at least 1");
  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::gamma_distribution<double> gamma(config.beta_shape, 1.0);

  const Eigen::Index d = config.d();
  Eigen::VectorXd x(n), y(n);
  Eigen::MatrixXd w(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    double u;
    if (config.running == RunningLaw::uniform) {
      u = 2.0 * unif(rng) - 1.0;
    } else {
      const double g1 = gamma(rng);
      const double g2 = gamma(rng);
      u = 2.0 * g1 / (g1 + g2) - 1.0;
    }
    x[i] = config.cutoff + u;

    Eigen::Index col = 0;
    for (const auto& c : config.covariates) {
      switch (c.law) {
      case CovariateLaw::uniform:
        w(i, col++) = c.lo + (c.hi - c.lo) * unif(rng);
        break;
      case CovariateLaw::binary:
        w(i, col++) = unif(rng) < c.prob ? 1.0 : 0.0;
        break;
      case CovariateLaw::categorical: {
        double total = 0.0;
        for (double pr : c.probs)
          total += pr;
        const double draw = unif(rng) * total;
        std::size_t level = 0;
        double acc = c.probs[0];
        while (level + 1 < c.probs.size() && draw >= acc)
          acc += c.probs[++level];
        for (std::size_t l = 1; l < c.probs.size(); ++l)
          w(i, col++) = level == l ? 1.0 : 0.0;
        break;
      }
      }
    }

    const bool right = x[i] >= config.cutoff;
    double mean = right ? config.alpha_right(x[i]) : config.alpha_left(x[i]);
    const auto& lam = right ? config.lambda_right : config.lambda_left;
    for (Eigen::Index l = 0; l < d; ++l)
      mean += lam[static_cast<std::size_t>(l)](x[i]) * w(i, l);
    const double sd = config.sigma0 + config.sigma1 * std::abs(u);
    y[i] = mean + sd * normal(rng);
  }
  RdSample s = make_sample(std::move(y), std::move(x), config.cutoff, std::move(w));
  return s;
}

double true_effect(const DgpConfig& config, const Eigen::Ref<const Eigen::VectorXd>& selector,
                   int nu) {
  const Eigen::Index d = config.d();
  if (selector.size() != 1 + d)
    throw Error(ErrorCode::DimensionMismatch, "selector must have length 1 + d");
  const double c = config.cutoff;
  double out = selector[0] * (config.alpha_right.derivative(c, nu) -
                              config.alpha_left.derivative(c, nu));
  for (Eigen::Index l = 0; l < d; ++l) {
    const auto ul = static_cast<std::size_t>(l);
    out += selector[1 + l] * (config.lambda_right[ul].derivative(c, nu) -
                              config.lambda_left[ul].derivative(c, nu));
  }
  return out;
}

double true_cate(const DgpConfig& config, const Eigen::Ref<const Eigen::VectorXd>& w) {
  Eigen::VectorXd sel(1 + w.size());
  sel << 1.0, w;
  return true_effect(config, sel, 0);
}

Eigen::MatrixXd oracle_solve(const Eigen::Ref<const Eigen::MatrixXd>& a,
                             const Eigen::Ref<const Eigen::MatrixXd>& b) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.rows() != n)
    throw Error(ErrorCode::DimensionMismatch, "oracle_solve needs a square system");
  const Eigen::Index m = b.cols();
  // Plain row-major copies; no Eigen decompositions involved.
  std::vector<std::vector<double>> aa(static_cast<std::size_t>(n),
                                      std::vector<double>(static_cast<std::size_t>(n)));
  std::vector<std::vector<double>> bb(static_cast<std::size_t>(n),
                                      std::vector<double>(static_cast<std::size_t>(m)));
  double scale = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      aa[i][j] = a(i, j);
      scale = std::max(scale, std::abs(a(i, j)));
    }
    for (Eigen::Index j = 0; j < m; ++j)
      bb[i][j] = b(i, j);
  }
  std::vector<Eigen::Index> colperm(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j)
    colperm[j] = j;

  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index pr = k, pc = k;
    double best = 0.0;
    for (Eigen::Index i = k; i < n; ++i)
      for (Eigen::Index j = k; j < n; ++j)
        if (std::abs(aa[i][j]) > best) {
          best = std::abs(aa[i][j]);
          pr = i;
          pc = j;
        }
    if (!(best > 1e-13 * scale))
      throw Error(ErrorCode::RankDeficient, "oracle system is rank deficient");
    std::swap(aa[k], aa[pr]);
    std::swap(bb[k], bb[pr]);
    if (pc != k) {
      for (Eigen::Index i = 0; i < n; ++i)
        std::swap(aa[i][k], aa[i][pc]);
      std::swap(colperm[k], colperm[pc]);
    }
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double f = aa[i][k] / aa[k][k];
      if (f == 0.0)
        continue;
      for (Eigen::Index j = k; j < n; ++j)
        aa[i][j] -= f * aa[k][j];
      for (Eigen::Index j = 0; j < m; ++j)
        bb[i][j] -= f * bb[k][j];
    }
  }
  Eigen::MatrixXd out(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    std::vector<double> z(static_cast<std::size_t>(n));
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      double acc = bb[i][j];
      for (Eigen::Index t = i + 1; t < n; ++t)
        acc -= aa[i][t] * z[t];
      z[i] = acc / aa[i][i];
    }
    for (Eigen::Index i = 0; i < n; ++i)
      out(colperm[i], j) = z[i];
  }
  return out;
}

Eigen::VectorXd oracle_wls(const Eigen::Ref<const Eigen::MatrixXd>& x,
                           const Eigen::Ref<const Eigen::VectorXd>& w,
                           const Eigen::Ref<const Eigen::VectorXd>& y) {
  const Eigen::Index n = x.rows();
  const Eigen::Index k = x.cols();
  if (w.size() != n || y.size() != n)
    throw Error(ErrorCode::LengthMismatch, "oracle_wls inputs disagree in length");
  if (n < k)
    throw Error(ErrorCode::RankDeficient, "fewer rows than columns");
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd xty = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index a = 0; a < k; ++a) {
      xty[a] += w[i] * x(i, a) * y[i];
      for (Eigen::Index b = 0; b < k; ++b)
        xtx(a, b) += w[i] * x(i, a) * x(i, b);
    }
  // Column equilibration keeps the normal equations reasonably conditioned.
  Eigen::VectorXd dsc(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    if (!(xtx(a, a) > 0.0))
      throw Error(ErrorCode::RankDeficient, "design column " + std::to_string(a) + " is zero");
    dsc[a] = 1.0 / std::sqrt(xtx(a, a));
  }
  Eigen::MatrixXd eq(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b)
      eq(a, b) = dsc[a] * xtx(a, b) * dsc[b];
  Eigen::VectorXd rhs(k);
  for (Eigen::Index a = 0; a < k; ++a)
    rhs[a] = dsc[a] * xty[a];
  const Eigen::VectorXd z = oracle_solve(eq, rhs);
  // Collinear columns survive pivoting with a tiny pivot; check the
  // equilibrated system is not numerically singular.
  const Eigen::MatrixXd inv = oracle_solve(eq, Eigen::MatrixXd::Identity(k, k));
  double norm_eq = 0.0, norm_inv = 0.0;
  for (Eigen::Index a = 0; a < k; ++a) {
    norm_eq = std::max(norm_eq, eq.row(a).cwiseAbs().sum());
    norm_inv = std::max(norm_inv, inv.row(a).cwiseAbs().sum());
  }
  if (!(1.0 / (norm_eq * norm_inv) > 1e-13))
    throw Error(ErrorCode::RankDeficient, "weighted design is numerically rank deficient");
  Eigen::VectorXd beta(k);
  for (Eigen::Index a = 0; a < k; ++a)
    beta[a] = dsc[a] * z[a];
  return beta;
}

namespace {

// Standard errors at rounding level count as zero.
constexpr double kDegenerateSe = 1e-10;

bool counted_failure(ErrorCode code) {
  switch (code) {
  case ErrorCode::SingularGram:
  case ErrorCode::TooFewObservations:
  case ErrorCode::BiasDegenerate:
  case ErrorCode::LeverageOne:
  case ErrorCode::TooFewClusters:
  case ErrorCode::BandwidthUnresolved:
    return true;
  default:
    return false;
  }
}

Replicate run_replicate(const DgpConfig& config, const FitSpec& base, Eigen::Index n,
                        std::uint64_t seed, const MonteCarloTarget& target) {
  const RdSample sample = gen_sample(config, n, seed);
  FitSpec spec = base;
  spec.bw_selector = target.selector;
  spec.estimands = {EstimandRequest{target.label, target.selector}};
  spec.eval_points.clear();
  Replicate rep;
  try {
    const HteResult res = fit_hte(sample, spec);
    const EstimateRecord& e = res.estimates.front();
    rep.ok = true;
    rep.point = e.point;
    rep.rbc_point = e.rbc_point;
    rep.se = e.se;
    rep.rbc_se = e.rbc_se;
    rep.h_left = res.h_left;
    rep.h_right = res.h_right;
    rep.covered = e.ci_lower <= target.truth && target.truth <= e.ci_upper;
  } catch (const Error& err) {
    if (!counted_failure(err.code()))
      throw;
  }
  return rep;
}

TargetReport summarize(const MonteCarloTarget& target, std::vector<Replicate> reps) {
  TargetReport out;
  out.label = target.label;
  out.selector = target.selector;
  out.truth = target.truth;
  double s_point = 0, s_rbc = 0, s_se = 0, s_rse = 0, s_h = 0, s_hl = 0, s_hr = 0;
  double s_cov = 0, s_sq = 0, s_rsq = 0;
  bool all_zero = true;
  for (const auto& r : reps) {
    if (!r.ok) {
      ++out.failures;
      continue;
    }
    ++out.successes;
    s_point += r.point;
    s_rbc += r.rbc_point;
    s_se += r.se;
    s_rse += r.rbc_se;
    s_hl += r.h_left;
    s_hr += r.h_right;
    s_h += 0.5 * (r.h_left + r.h_right);
    s_cov += r.covered ? 1.0 : 0.0;
    s_sq += (r.point - target.truth) * (r.point - target.truth);
    s_rsq += (r.rbc_point - target.truth) * (r.rbc_point - target.truth);
    if (r.rbc_se > kDegenerateSe * (1.0 + std::abs(r.rbc_point)))
      all_zero = false;
  }
  const double total = static_cast<double>(reps.size());
  out.failure_rate = total > 0 ? static_cast<double>(out.failures) / total : 0.0;
  if (out.successes == 0) {
    out.replicates = std::move(reps);
    return out;
  }
  const double m = static_cast<double>(out.successes);
  out.mean_point = s_point / m;
  out.mean_bias = out.mean_point - target.truth;
  out.mean_rbc_bias = s_rbc / m - target.truth;
  out.rmse = std::sqrt(s_sq / m);
  out.rbc_rmse = std::sqrt(s_rsq / m);
  out.mean_se = s_se / m;
  out.mean_rbc_se = s_rse / m;
  out.coverage = s_cov / m;
  out.mean_h = s_h / m;
  out.mean_h_left = s_hl / m;
  out.mean_h_right = s_hr / m;
  out.degenerate = all_zero;
  if (out.successes > 1) {
    const double mr = s_rbc / m;
    double v = 0, vr = 0;
    for (const auto& r : reps) {
      if (!r.ok)
        continue;
      v += (r.point - out.mean_point) * (r.point - out.mean_point);
      vr += (r.rbc_point - mr) * (r.rbc_point - mr);
    }
    out.sd = std::sqrt(v / (m - 1.0));
    out.rbc_sd = std::sqrt(vr / (m - 1.0));
  }
  out.replicates = std::move(reps);
  return out;
}

} // namespace

MonteCarloReport monte_carlo(const DgpConfig& config, const FitSpec& spec, std::size_t reps,
                             Eigen::Index n, std::uint64_t seed,
                             const std::vector<MonteCarloTarget>& targets, unsigned threads) {
  if (reps < 1)
    throw Error(ErrorCode::InvalidArgument, "need at least one replication");
  validate_config(config);
  validate_spec(spec);
  for (const auto& t : targets)
    if (t.selector.size() != 1 + config.d())
      throw Error(ErrorCode::DimensionMismatch, "target selector must have length 1 + d");

  const std::size_t nt = targets.size();
  std::vector<std::vector<Replicate>> results(nt, std::vector<Replicate>(reps));
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const std::uint64_t rs = replication_seed(seed, r);
      for (std::size_t t = 0; t < nt; ++t)
        results[t][r] = run_replicate(config, spec, n, rs, targets[t]);
    }
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(reps)));
  if (threads == 1) {
    work(0, reps);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t chunk = (reps + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = std::min(reps, t * chunk);
      const std::size_t e = std::min(reps, b + chunk);
      pool.emplace_back([&, b, e, t] {
        try {
          work(b, e);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool)
      th.join();
    for (auto& e : errors)
      if (e)
        std::rethrow_exception(e);
  }

  MonteCarloReport out;
  out.reps = reps;
  out.n = n;
  out.seed = seed;
  out.level = spec.level;
  bool any_ok = false;
  for (std::size_t t = 0; t < nt; ++t) {
    out.targets.push_back(summarize(targets[t], std::move(results[t])));
    any_ok = any_ok || out.targets.back().successes > 0;
  }
  if (!any_ok && nt > 0)
    throw Error(ErrorCode::AllReplicationsFailed, "every replication failed");
  return out;
}

} // namespace rdhte
