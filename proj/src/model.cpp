#include "rdhte/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <cstdio>
#include <numeric>

namespace rdhte {

std::string_view to_string(ErrorCode code) {
  switch (code) {
  case ErrorCode::NonFinite:
    return "NonFinite";
  case ErrorCode::LengthMismatch:
    return "LengthMismatch";
  case ErrorCode::EmptySample:
    return "EmptySample";
  case ErrorCode::UnknownLevel:
    return "UnknownLevel";
  case ErrorCode::DegenerateQuantiles:
    return "DegenerateQuantiles";
  case ErrorCode::NonPositiveBandwidth:
    return "NonPositiveBandwidth";
  case ErrorCode::SingularGram:
    return "SingularGram";
  case ErrorCode::NuOutOfRange:
    return "NuOutOfRange";
  case ErrorCode::DimensionMismatch:
    return "DimensionMismatch";
  case ErrorCode::BandwidthUnresolved:
    return "BandwidthUnresolved";
  case ErrorCode::TooFewObservations:
    return "TooFewObservations";
  case ErrorCode::BiasDegenerate:
    return "BiasDegenerate";
  case ErrorCode::LeverageOne:
    return "LeverageOne";
  case ErrorCode::TooFewClusters:
    return "TooFewClusters";
  case ErrorCode::RankDeficient:
    return "RankDeficient";
  case ErrorCode::AllReplicationsFailed:
    return "AllReplicationsFailed";
  case ErrorCode::ParseError:
    return "ParseError";
  case ErrorCode::MissingColumn:
    return "MissingColumn";
  case ErrorCode::Usage:
    return "Usage";
  case ErrorCode::InvalidArgument:
    return "InvalidArgument";
  }
  return "Unknown";
}

std::string_view to_string(CovariateKind kind) {
  switch (kind) {
  case CovariateKind::continuous:
    return "continuous";
  case CovariateKind::categorical:
    return "categorical";
  case CovariateKind::binary:
    return "binary";
  case CovariateKind::quantile_bins:
    return "quantile_bins";
  }
  return "unknown";
}

std::string_view to_string(VceKind kind) {
  switch (kind) {
  case VceKind::hc0:
    return "hc0";
  case VceKind::hc1:
    return "hc1";
  case VceKind::hc2:
    return "hc2";
  case VceKind::hc3:
    return "hc3";
  case VceKind::cluster:
    return "cluster";
  }
  return "unknown";
}

std::optional<VceKind> parse_vce(std::string_view name) {
  if (name == "hc0")
    return VceKind::hc0;
  if (name == "hc1")
    return VceKind::hc1;
  if (name == "hc2")
    return VceKind::hc2;
  if (name == "hc3")
    return VceKind::hc3;
  if (name == "cluster")
    return VceKind::cluster;
  return std::nullopt;
}

const RawColumn* RawTable::find(std::string_view name) const {
  for (const auto& c : columns)
    if (c.name == name)
      return &c;
  return nullptr;
}

VceKind resolve_vce(const FitSpec& spec, const RdSample& sample) {
  if (spec.vce) {
    if (*spec.vce == VceKind::cluster && !sample.cluster)
      throw Error(ErrorCode::InvalidArgument, "cluster variance requested without cluster labels");
    return *spec.vce;
  }
  return sample.cluster ? VceKind::cluster : VceKind::hc3;
}

namespace {

void check_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* what) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (!std::isfinite(m(i, j)))
        throw Error(ErrorCode::NonFinite, std::string("non-finite value in ") + what +
                                              " at row " + std::to_string(i) +
                                              ", column " + std::to_string(j));
}

} // namespace

const RdSample& validate_sample(const RdSample& sample) {
  const Eigen::Index n = sample.y.size();
  if (sample.x.size() != n)
    throw Error(ErrorCode::LengthMismatch, "y has " + std::to_string(n) + " rows, x has " +
                                               std::to_string(sample.x.size()));
  if (sample.w.cols() > 0 && sample.w.rows() != n)
    throw Error(ErrorCode::LengthMismatch, "y has " + std::to_string(n) + " rows, w has " +
                                               std::to_string(sample.w.rows()));
  if (sample.w.cols() == 0 && sample.w.rows() != n && sample.w.rows() != 0)
    throw Error(ErrorCode::LengthMismatch, "w row count does not match y");
  if (sample.cluster && static_cast<Eigen::Index>(sample.cluster->size()) != n)
    throw Error(ErrorCode::LengthMismatch, "cluster labels do not match sample size");
  if (n == 0)
    throw Error(ErrorCode::EmptySample, "sample is empty");
  check_finite(sample.y, "y");
  check_finite(sample.x, "x");
  if (sample.w.size() > 0)
    check_finite(sample.w, "w");
  if (!std::isfinite(sample.cutoff))
    throw Error(ErrorCode::NonFinite, "cutoff is not finite");
  return sample;
}

void validate_spec(const FitSpec& spec) {
  if (spec.p < 0 || spec.s < 0)
    throw Error(ErrorCode::InvalidArgument, "polynomial orders must be non-negative");
  if (spec.nu < 0 || spec.nu > std::min(spec.p, spec.s))
    throw Error(ErrorCode::NuOutOfRange, "derivative order " + std::to_string(spec.nu) +
                                             " outside [0, min(p, s)]");
  if (!(spec.level > 0.0 && spec.level < 1.0))
    throw Error(ErrorCode::InvalidArgument, "confidence level must lie in (0, 1)");
  auto positive = [](double h) { return h > 0.0 && std::isfinite(h); };
  if (const auto* f = std::get_if<FixedBandwidth>(&spec.bandwidth)) {
    if (!positive(f->left) || !positive(f->right))
      throw Error(ErrorCode::NonPositiveBandwidth, "fixed bandwidths must be positive");
  } else if (const auto* c = std::get_if<CommonBandwidth>(&spec.bandwidth)) {
    if (!positive(c->h))
      throw Error(ErrorCode::NonPositiveBandwidth, "bandwidth must be positive");
  }
  if (spec.pilot_bandwidth &&
      (!positive(spec.pilot_bandwidth->left) || !positive(spec.pilot_bandwidth->right)))
    throw Error(ErrorCode::NonPositiveBandwidth, "pilot bandwidths must be positive");
}

double quantile_sorted(const std::vector<double>& sorted, double prob) {
  if (sorted.empty())
    throw Error(ErrorCode::EmptySample, "quantile of empty data");
  const double pos = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

struct Levels {
  std::vector<std::string> labels;          // ordered
  std::vector<std::size_t> code;            // per row, index into labels
};

// Observed levels of a column. Numeric columns are ordered by value and use
// the text of the first occurrence as the label.
Levels observed_levels(const RawColumn& col) {
  Levels out;
  const std::size_t n = col.size();
  out.code.resize(n);
  if (col.is_numeric) {
    std::map<double, std::string> seen;
    for (std::size_t i = 0; i < n; ++i)
      seen.emplace(col.numeric[i], col.text.empty() ? std::string() : col.text[i]);
    std::map<double, std::size_t> index;
    for (auto& [v, label] : seen) {
      if (label.empty()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        label = buf;
      }
      index.emplace(v, out.labels.size());
      out.labels.push_back(label);
    }
    for (std::size_t i = 0; i < n; ++i)
      out.code[i] = index.at(col.numeric[i]);
  } else {
    std::vector<std::string> sorted(col.text.begin(), col.text.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    out.labels = sorted;
    for (std::size_t i = 0; i < n; ++i)
      out.code[i] = static_cast<std::size_t>(
          std::lower_bound(sorted.begin(), sorted.end(), col.text[i]) - sorted.begin());
  }
  return out;
}

void expand_categorical(const RawColumn& col, const CovariateSpec& spec,
                        std::vector<Eigen::VectorXd>& cols, ExpandedCovariates& out) {
  Levels obs = observed_levels(col);
  std::vector<std::string> order = obs.labels;
  if (spec.levels) {
    for (const auto& l : obs.labels)
      if (std::find(spec.levels->begin(), spec.levels->end(), l) == spec.levels->end())
        throw Error(ErrorCode::UnknownLevel,
                    "level '" + l + "' of '" + spec.name + "' is not among the declared levels");
    order = *spec.levels;
  }
  if (spec.kind == CovariateKind::binary && order.size() > 2)
    throw Error(ErrorCode::InvalidArgument,
                "binary covariate '" + spec.name + "' has " + std::to_string(order.size()) +
                    " levels");
  std::size_t base = 0;
  if (spec.baseline) {
    auto it = std::find(order.begin(), order.end(), *spec.baseline);
    if (it == order.end())
      throw Error(ErrorCode::UnknownLevel,
                  "baseline '" + *spec.baseline + "' is not a level of '" + spec.name + "'");
    base = static_cast<std::size_t>(it - order.begin());
  }

  // Map observed codes onto positions in `order`.
  std::vector<std::size_t> remap(obs.labels.size());
  for (std::size_t j = 0; j < obs.labels.size(); ++j)
    remap[j] = static_cast<std::size_t>(
        std::find(order.begin(), order.end(), obs.labels[j]) - order.begin());

  CovariateBlock block;
  block.source = spec.name;
  block.kind = spec.kind;
  block.first = static_cast<Eigen::Index>(cols.size());
  block.baseline_label = order[base];
  const auto n = static_cast<Eigen::Index>(col.size());
  for (std::size_t lvl = 0; lvl < order.size(); ++lvl) {
    if (lvl == base)
      continue;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
      if (remap[obs.code[static_cast<std::size_t>(i)]] == lvl)
        c[i] = 1.0;
    cols.push_back(std::move(c));
    out.labels.push_back(spec.name + "=" + order[lvl]);
    block.level_labels.push_back(order[lvl]);
  }
  block.count = static_cast<Eigen::Index>(cols.size()) - block.first;
  out.blocks.push_back(std::move(block));
}

void expand_quantiles(const RawColumn& col, const CovariateSpec& spec,
                      std::vector<Eigen::VectorXd>& cols, ExpandedCovariates& out) {
  if (!col.is_numeric)
    throw Error(ErrorCode::InvalidArgument, "quantile bins need a numeric column: " + spec.name);
  const int k = spec.bins;
  if (k < 2)
    throw Error(ErrorCode::InvalidArgument, "quantile bins need k >= 2");
  std::vector<double> sorted = col.numeric;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> uniq = sorted;
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (uniq.size() < static_cast<std::size_t>(k))
    throw Error(ErrorCode::DegenerateQuantiles,
                "'" + spec.name + "' has " + std::to_string(uniq.size()) +
                    " distinct values, fewer than " + std::to_string(k) + " bins");

  std::vector<double> cuts;
  for (int j = 1; j < k; ++j)
    cuts.push_back(quantile_sorted(sorted, static_cast<double>(j) / k));
  for (std::size_t j = 1; j < cuts.size(); ++j)
    if (!(cuts[j] > cuts[j - 1]))
      throw Error(ErrorCode::DegenerateQuantiles,
                  "quantile cut points of '" + spec.name + "' are not distinct");

  const auto n = static_cast<Eigen::Index>(col.numeric.size());
  std::vector<int> bin(static_cast<std::size_t>(n));
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = col.numeric[static_cast<std::size_t>(i)];
    const int b = static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
    bin[static_cast<std::size_t>(i)] = b;
    ++counts[static_cast<std::size_t>(b)];
  }
  for (int b = 0; b < k; ++b)
    if (counts[static_cast<std::size_t>(b)] == 0)
      throw Error(ErrorCode::DegenerateQuantiles,
                  "quantile bin " + std::to_string(b + 1) + " of '" + spec.name + "' is empty");

  CovariateBlock block;
  block.source = spec.name;
  block.kind = CovariateKind::quantile_bins;
  block.first = static_cast<Eigen::Index>(cols.size());
  block.baseline_label = "q1";
  for (int b = 1; b < k; ++b) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
      if (bin[static_cast<std::size_t>(i)] == b)
        c[i] = 1.0;
    cols.push_back(std::move(c));
    const std::string lvl = "q" + std::to_string(b + 1);
    out.labels.push_back(spec.name + "=" + lvl);
    block.level_labels.push_back(lvl);
  }
  block.count = k - 1;
  out.blocks.push_back(std::move(block));
}

void expand_continuous(const RawColumn& col, const CovariateSpec& spec,
                       std::vector<Eigen::VectorXd>& cols, ExpandedCovariates& out) {
  if (!col.is_numeric)
    throw Error(ErrorCode::InvalidArgument,
                "continuous covariate '" + spec.name + "' is not numeric");
  if (spec.power_max < 1)
    throw Error(ErrorCode::InvalidArgument, "power_max must be at least 1");
  CovariateBlock block;
  block.source = spec.name;
  block.kind = CovariateKind::continuous;
  block.first = static_cast<Eigen::Index>(cols.size());
  const Eigen::Map<const Eigen::VectorXd> v(col.numeric.data(),
                                            static_cast<Eigen::Index>(col.numeric.size()));
  for (int q = 1; q <= spec.power_max; ++q) {
    cols.emplace_back(v.array().pow(q).matrix());
    std::string label = q == 1 ? spec.name : spec.name + "^" + std::to_string(q);
    out.labels.push_back(label);
    block.level_labels.push_back(label);
  }
  block.count = spec.power_max;
  out.blocks.push_back(std::move(block));
}

} // namespace

ExpandedCovariates expand_covariates(const RawTable& raw,
                                     const std::vector<CovariateSpec>& specs) {
  ExpandedCovariates out;
  std::vector<Eigen::VectorXd> cols;
  const std::size_t n = raw.rows();
  for (const auto& spec : specs) {
    const RawColumn* col = raw.find(spec.name);
    if (!col)
      throw Error(ErrorCode::MissingColumn, "no column named '" + spec.name + "'");
    if (col->size() != n)
      throw Error(ErrorCode::LengthMismatch, "column '" + spec.name + "' has the wrong length");
    switch (spec.kind) {
    case CovariateKind::continuous:
      expand_continuous(*col, spec, cols, out);
      break;
    case CovariateKind::categorical:
    case CovariateKind::binary:
      expand_categorical(*col, spec, cols, out);
      break;
    case CovariateKind::quantile_bins:
      expand_quantiles(*col, spec, cols, out);
      break;
    }
  }
  out.w.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    out.w.col(static_cast<Eigen::Index>(j)) = cols[j];
  return out;
}

RdSample make_sample(Eigen::VectorXd y, Eigen::VectorXd x, double cutoff, Eigen::MatrixXd w,
                     std::optional<std::vector<std::int64_t>> cluster) {
  RdSample s;
  const Eigen::Index n = y.size();
  s.y = std::move(y);
  s.x = std::move(x);
  s.cutoff = cutoff;
  if (w.size() == 0)
    w.resize(n, 0);
  s.w = std::move(w);
  s.cluster = std::move(cluster);
  for (Eigen::Index j = 0; j < s.w.cols(); ++j) {
    std::string label = "w" + std::to_string(j + 1);
    s.w_labels.push_back(label);
    CovariateBlock b;
    b.source = label;
    b.kind = CovariateKind::continuous;
    b.first = j;
    b.count = 1;
    b.level_labels.push_back(label);
    s.blocks.push_back(std::move(b));
  }
  return s;
}

} // namespace rdhte
