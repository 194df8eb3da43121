#pragma once

#include "rdhte/estimands.hpp"
#include "rdhte/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace rdhte {

// c_0 + c_1 x + c_2 x^2 + ... in the raw running variable.
struct Polynomial {
  std::vector<double> coef;

  double operator()(double x) const;
  double derivative(double x, int order) const;
};

enum class CovariateLaw { uniform, binary, categorical };

struct CovariateDist {
  CovariateLaw law = CovariateLaw::binary;
  double lo = 0.0;          // uniform support
  double hi = 1.0;
  double prob = 0.5;        // binary P(W = 1)
  std::vector<double> probs; // categorical level probabilities, first level is baseline

  // Number of W columns this law produces.
  Eigen::Index columns() const;
};

enum class RunningLaw { uniform, beta };

struct DgpConfig {
  Polynomial alpha_left;
  Polynomial alpha_right;
  std::vector<Polynomial> lambda_left; // one per W column
  std::vector<Polynomial> lambda_right;
  std::vector<CovariateDist> covariates;

  RunningLaw running = RunningLaw::uniform; // on [cutoff - 1, cutoff + 1]
  double beta_shape = 2.0;                  // symmetric beta(a, a) when running = beta

  double sigma0 = 0.5; // noise sd = sigma0 + sigma1 |x - c|
  double sigma1 = 0.0;
  double cutoff = 0.0;

  Eigen::Index d() const;
};

// X ~ U[-1,1], c = 0, W binary with P = 0.5, sigma = 0.5,
// alpha-(x) = 0.5 + 0.8x - 0.6x^2, alpha+(x) = 1.0 + 0.6x + 0.9x^2,
// lambda-(x) = 0.3 + 0.2x, lambda+(x) = 0.7 - 0.1x.
DgpConfig canonical_preset();

void validate_config(const DgpConfig& config);

// Seed for replication `rep` of a run keyed by `seed`.
std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t rep);

RdSample gen_sample(const DgpConfig& config, Eigen::Index n, std::uint64_t seed);

// theta(c) + xi(c)'w
double true_cate(const DgpConfig& config, const Eigen::Ref<const Eigen::VectorXd>& w);

// selector'(theta^(nu)(c), xi^(nu)(c)')'
double true_effect(const DgpConfig& config, const Eigen::Ref<const Eigen::VectorXd>& selector,
                   int nu = 0);

// Solves A X = B by Gaussian elimination with complete pivoting.
Eigen::MatrixXd oracle_solve(const Eigen::Ref<const Eigen::MatrixXd>& a,
                             const Eigen::Ref<const Eigen::MatrixXd>& b);

// argmin sum_i w_i (y_i - x_i' beta)^2 through the normal equations.
Eigen::VectorXd oracle_wls(const Eigen::Ref<const Eigen::MatrixXd>& x,
                           const Eigen::Ref<const Eigen::VectorXd>& w,
                           const Eigen::Ref<const Eigen::VectorXd>& y);

struct MonteCarloTarget {
  std::string label;
  Eigen::VectorXd selector; // long form
  double truth = 0.0;
};

struct Replicate {
  bool ok = false;
  double point = 0.0;
  double rbc_point = 0.0;
  double se = 0.0;
  double rbc_se = 0.0;
  double h_left = 0.0;
  double h_right = 0.0;
  bool covered = false;
};

struct TargetReport {
  std::string label;
  Eigen::VectorXd selector;
  double truth = 0.0;
  std::size_t successes = 0;
  std::size_t failures = 0;
  double failure_rate = 0.0;
  double mean_point = 0.0;
  double mean_bias = 0.0;
  double mean_rbc_bias = 0.0;
  double rmse = 0.0;
  double rbc_rmse = 0.0;
  double sd = 0.0;
  double rbc_sd = 0.0;
  double mean_se = 0.0;
  double mean_rbc_se = 0.0;
  double coverage = 0.0;
  double mean_h = 0.0;
  double mean_h_left = 0.0;
  double mean_h_right = 0.0;
  bool degenerate = false; // every replication had a zero (rounding-level) standard error
  std::vector<Replicate> replicates;
};

struct MonteCarloReport {
  std::size_t reps = 0;
  Eigen::Index n = 0;
  std::uint64_t seed = 0;
  double level = 0.95;
  std::vector<TargetReport> targets;
};

// One fit per target and replication, with the bandwidth selector set to the
// target. Replications are split across `threads` workers; the report does
// not depend on the split.
MonteCarloReport monte_carlo(const DgpConfig& config, const FitSpec& spec, std::size_t reps,
                             Eigen::Index n, std::uint64_t seed,
                             const std::vector<MonteCarloTarget>& targets,
                             unsigned threads = 1);

} // namespace rdhte
