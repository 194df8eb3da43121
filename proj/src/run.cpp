#include "rdhte/run.hpp"

#include "rdhte/csv.hpp"
#include "rdhte/report.hpp"

#include <algorithm>
#include <map>
#include <ostream>

namespace rdhte {

namespace {

std::string hint(ErrorCode code) {
  switch (code) {
  case ErrorCode::SingularGram:
    return "too few observations or collinear heterogeneity covariates within bandwidth; "
           "try a larger bandwidth or fewer covariates";
  case ErrorCode::TooFewObservations:
    return "not enough observations on one side of the cutoff";
  case ErrorCode::BiasDegenerate:
    return "the bias constant could not be estimated; pass a bandwidth with --bw";
  case ErrorCode::LeverageOne:
    return "an observation is fitted exactly; use --vce hc0 or hc1";
  case ErrorCode::TooFewClusters:
    return "fewer than two clusters inside the bandwidth";
  case ErrorCode::DegenerateQuantiles:
    return "too few distinct values for the requested quantile bins";
  default:
    return {};
  }
}

} // namespace

RdSample build_sample(const RunConfig& config) {
  std::vector<ColumnBinding> bindings = {{config.outcome, true}, {config.running, true}};
  for (const auto& h : config.hetero)
    bindings.push_back({h.name, h.kind == CovariateKind::continuous ||
                                    h.kind == CovariateKind::quantile_bins});
  if (config.cluster)
    bindings.push_back({*config.cluster, false});
  const RawTable raw = load_csv(config.data_path, bindings);

  const RawColumn* y = raw.find(config.outcome);
  const RawColumn* x = raw.find(config.running);
  const auto n = static_cast<Eigen::Index>(raw.rows());
  if (n == 0)
    throw Error(ErrorCode::EmptySample, "data file has no rows");

  ExpandedCovariates cov = expand_covariates(raw, config.hetero);

  std::optional<std::vector<std::int64_t>> cluster;
  if (config.cluster) {
    const RawColumn* c = raw.find(*config.cluster);
    std::vector<std::string> levels = c->text;
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    std::vector<std::int64_t> ids;
    ids.reserve(c->text.size());
    for (const auto& t : c->text)
      ids.push_back(std::lower_bound(levels.begin(), levels.end(), t) - levels.begin());
    cluster = std::move(ids);
  }

  RdSample s = make_sample(Eigen::Map<const Eigen::VectorXd>(y->numeric.data(), n),
                           Eigen::Map<const Eigen::VectorXd>(x->numeric.data(), n), config.cutoff,
                           cov.w, std::move(cluster));
  s.w_labels = cov.labels;
  s.blocks = cov.blocks;
  return validate_sample(s);
}

FitSpec build_spec(const RunConfig& config, const RdSample& sample) {
  FitSpec spec = config.fit;
  for (const auto& pt : config.at) {
    if (static_cast<Eigen::Index>(pt.size()) != sample.d())
      throw Error(ErrorCode::DimensionMismatch,
                  "--at point has " + std::to_string(pt.size()) +
                      " values but the heterogeneity design has " + std::to_string(sample.d()) +
                      " columns");
    spec.eval_points.push_back(
        Eigen::Map<const Eigen::VectorXd>(pt.data(), static_cast<Eigen::Index>(pt.size())));
  }
  return spec;
}

std::string render(const HteResult& result, OutputFormat format) {
  switch (format) {
  case OutputFormat::json:
    return render_json(result);
  case OutputFormat::csv:
    return render_csv(result);
  case OutputFormat::table:
    break;
  }
  return render_table(result);
}

int exit_code_for(ErrorCode code) {
  return code == ErrorCode::Usage || code == ErrorCode::MissingColumn ? 2 : 3;
}

RunOutput run(const RunConfig& config) {
  RunOutput out;
  try {
    const RdSample sample = build_sample(config);
    const FitSpec spec = build_spec(config, sample);
    const HteResult result = fit_hte(sample, spec);
    out.out = render(result, config.format);
    if (result.regularized && config.format != OutputFormat::table)
      out.err = "warning: bias estimate near zero; bandwidth denominator was regularized\n";
  } catch (const Error& e) {
    out.exit_code = exit_code_for(e.code());
    out.err = "error [" + std::string(to_string(e.code())) + "]: " + e.what() + "\n";
    if (const std::string h = hint(e.code()); !h.empty())
      out.err += "hint: " + h + "\n";
  }
  return out;
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::optional<RunConfig> cfg;
  try {
    std::string help;
    cfg = parse_config(argc, argv, &help);
    if (!cfg) {
      out << help;
      return 0;
    }
  } catch (const Error& e) {
    err << "usage error: " << e.what() << "\nrun with --help for the list of flags\n";
    return exit_code_for(e.code());
  }
  const RunOutput r = run(*cfg);
  out << r.out;
  err << r.err;
  return r.exit_code;
}

} // namespace rdhte
