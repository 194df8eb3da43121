#pragma once

#include "rdhte/error.hpp"
#include "rdhte/kernel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace rdhte {

enum class CovariateKind { continuous, categorical, binary, quantile_bins };

std::string_view to_string(CovariateKind kind);

// How one raw column turns into heterogeneity columns.
struct CovariateSpec {
  std::string name;
  CovariateKind kind = CovariateKind::continuous;
  int power_max = 1;                  // continuous: emits w, w^2, ..., w^power_max
  int bins = 0;                       // quantile_bins: number of bins k
  std::optional<std::string> baseline;            // categorical/binary override
  std::optional<std::vector<std::string>> levels; // declared level set, if any
};

// Where a source variable landed in W.
struct CovariateBlock {
  std::string source;
  CovariateKind kind = CovariateKind::continuous;
  Eigen::Index first = 0;
  Eigen::Index count = 0;
  std::string baseline_label; // categorical-like kinds only
  std::vector<std::string> level_labels; // one per emitted column
};

// A raw column as read from a table. Numeric columns carry parsed values;
// text is always kept so categorical expansion can use the literal labels.
struct RawColumn {
  std::string name;
  std::vector<std::string> text;
  std::vector<double> numeric;
  bool is_numeric = false;

  std::size_t size() const { return text.empty() ? numeric.size() : text.size(); }
};

struct RawTable {
  std::vector<RawColumn> columns;

  const RawColumn* find(std::string_view name) const;
  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
};

struct ExpandedCovariates {
  Eigen::MatrixXd w;
  std::vector<std::string> labels;
  std::vector<CovariateBlock> blocks;
};

struct RdSample {
  Eigen::VectorXd y;
  Eigen::VectorXd x;
  double cutoff = 0.0;
  Eigen::MatrixXd w; // n x d, d may be 0
  std::optional<std::vector<std::int64_t>> cluster;

  std::vector<std::string> w_labels;
  std::vector<CovariateBlock> blocks;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index d() const { return w.cols(); }
};

enum class VceKind { hc0, hc1, hc2, hc3, cluster };

std::string_view to_string(VceKind kind);
std::optional<VceKind> parse_vce(std::string_view name);

struct FixedBandwidth {
  double left = 0.0;
  double right = 0.0;
};

struct CommonBandwidth {
  double h = 0.0;
};

enum class SelectMode { one_sided, two_sided };

struct SelectBandwidth {
  SelectMode mode = SelectMode::two_sided;
};

using BandwidthRule = std::variant<FixedBandwidth, CommonBandwidth, SelectBandwidth>;

struct EstimandRequest {
  std::string label;
  Eigen::VectorXd selector; // long form, length 1 + d
};

struct FitSpec {
  int p = 1;
  int s = 1;
  int nu = 0;
  KernelKind kernel = KernelKind::triangular;
  BandwidthRule bandwidth = SelectBandwidth{};
  std::optional<VceKind> vce; // default: hc3, or cluster when labels are present
  double level = 0.95;

  // Long-form selector whose MSE drives bandwidth selection; defaults to e_0.
  std::optional<Eigen::VectorXd> bw_selector;
  // Pilot (bias-estimation) bandwidths per side; defaults to the pilot rule.
  std::optional<FixedBandwidth> pilot_bandwidth;

  // Estimands to report. Empty means the default set derived from the
  // covariate blocks. Evaluation points are appended as kappa(w) records.
  std::vector<EstimandRequest> estimands;
  std::vector<Eigen::VectorXd> eval_points;
};

VceKind resolve_vce(const FitSpec& spec, const RdSample& sample);

// Checks shapes, finiteness and emptiness; returns the sample unchanged.
const RdSample& validate_sample(const RdSample& sample);

// Checks FitSpec invariants that do not need data.
void validate_spec(const FitSpec& spec);

ExpandedCovariates expand_covariates(const RawTable& raw,
                                     const std::vector<CovariateSpec>& specs);

// Type-7 (linear interpolation between order statistics) quantile of
// already sorted data.
double quantile_sorted(const std::vector<double>& sorted, double prob);

RdSample make_sample(Eigen::VectorXd y, Eigen::VectorXd x, double cutoff,
                     Eigen::MatrixXd w = Eigen::MatrixXd(),
                     std::optional<std::vector<std::int64_t>> cluster = std::nullopt);

} // namespace rdhte
