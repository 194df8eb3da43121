#include "rdhte/config.hpp"

#include "rdhte/csv.hpp"

#include <CLI11.hpp>

#include <cmath>

namespace rdhte {

namespace {

[[noreturn]] void usage(const std::string& msg) { throw Error(ErrorCode::Usage, msg); }

int parse_positive_int(const std::string& text, const std::string& what) {
  double v = 0.0;
  if (!parse_double(text, v) || v != std::floor(v) || v < 1 || v > 1e6)
    usage("invalid " + what + " '" + text + "'");
  return static_cast<int>(v);
}

std::vector<double> parse_point(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = text.find(',', start);
    const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos
                                                                           : comma - start);
    double v = 0.0;
    if (!parse_double(item, v))
      usage("invalid --at value '" + text + "'");
    out.push_back(v);
    if (comma == std::string::npos)
      break;
    start = comma + 1;
  }
  return out;
}

} // namespace

CovariateSpec parse_hetero(const std::string& arg) {
  CovariateSpec spec;
  const std::size_t colon = arg.rfind(':');
  if (colon == std::string::npos) {
    spec.name = arg;
    spec.kind = CovariateKind::continuous;
  } else {
    spec.name = arg.substr(0, colon);
    std::string kind = arg.substr(colon + 1);
    std::optional<std::string> base;
    if (const std::size_t at = kind.find('@'); at != std::string::npos) {
      base = kind.substr(at + 1);
      kind = kind.substr(0, at);
      if (base->empty())
        usage("empty baseline in --hetero '" + arg + "'");
    }
    if (kind == "cat" || kind == "bin") {
      spec.kind = kind == "cat" ? CovariateKind::categorical : CovariateKind::binary;
      spec.baseline = base;
    } else if (base) {
      usage("a baseline only applies to :cat or :bin in --hetero '" + arg + "'");
    } else if (kind == "cont") {
      spec.kind = CovariateKind::continuous;
    } else if (kind.rfind("cont^", 0) == 0) {
      spec.kind = CovariateKind::continuous;
      spec.power_max = parse_positive_int(kind.substr(5), "power in --hetero '" + arg + "'");
    } else if (kind.size() > 1 && kind[0] == 'q') {
      spec.kind = CovariateKind::quantile_bins;
      spec.bins = parse_positive_int(kind.substr(1), "bin count in --hetero '" + arg + "'");
      if (spec.bins < 2)
        usage("quantile bins need k >= 2 in --hetero '" + arg + "'");
    } else {
      usage("unknown covariate kind '" + kind + "' in --hetero '" + arg + "'");
    }
  }
  if (spec.name.empty())
    usage("empty column name in --hetero '" + arg + "'");
  return spec;
}

std::optional<RunConfig> parse_config(int argc, const char* const* argv, std::string* help) {
  CLI::App app{"Heterogeneous treatment effects in sharp regression discontinuity designs",
               "rdhte"};
  RunConfig cfg;
  std::vector<std::string> hetero, at;
  std::string cluster, kernel = "tri", vce, format = "table", bw_select;
  double bw = 0.0;
  std::vector<double> bw_side;
  int p = 1, s = 1, deriv = 0;
  double level = 0.95;

  app.add_option("--data", cfg.data_path, "CSV file with a header row")->required();
  app.add_option("--outcome", cfg.outcome, "outcome column")->required();
  app.add_option("--running", cfg.running, "running variable column")->required();
  app.add_option("--cutoff", cfg.cutoff, "cutoff (default 0)");
  app.add_option("--hetero", hetero,
                 "heterogeneity covariate: col[:cat[@base]|:bin[@base]|:cont[^k]|:q<k>]")
      ->take_all();
  app.add_option("--cluster", cluster, "cluster label column");
  app.add_option("--kernel", kernel, "kernel: tri, uni, epa")
      ->check(CLI::IsMember({"tri", "uni", "epa", "triangular", "uniform", "epanechnikov"}));
  app.add_option("--p", p, "main polynomial order")->check(CLI::Range(0, 10));
  app.add_option("--s", s, "interaction polynomial order")->check(CLI::Range(0, 10));
  app.add_option("--deriv", deriv, "derivative order nu")->check(CLI::Range(0, 10));
  auto* o_bw = app.add_option("--bw", bw, "common bandwidth h");
  auto* o_side = app.add_option("--bw-side", bw_side, "bandwidths h- h+")->expected(2);
  auto* o_sel = app.add_option("--bw-select", bw_select, "MSE-optimal selection: one or two")
                    ->check(CLI::IsMember({"one", "two"}));
  o_bw->excludes(o_side)->excludes(o_sel);
  o_side->excludes(o_sel);
  app.add_option("--vce", vce, "variance: hc0, hc1, hc2, hc3, cluster")
      ->check(CLI::IsMember({"hc0", "hc1", "hc2", "hc3", "cluster"}));
  app.add_option("--level", level, "confidence level in (0, 1)");
  app.add_option("--at", at, "evaluation point w1,w2,... (repeatable)")->take_all();
  app.add_option("--format", format, "table, json or csv")
      ->check(CLI::IsMember({"table", "json", "csv"}));
  app.add_option("--seed", cfg.seed, "seed (reserved)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    if (help)
      *help = app.help();
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    usage(e.what());
  }

  for (const auto& h : hetero)
    cfg.hetero.push_back(parse_hetero(h));
  if (!cluster.empty())
    cfg.cluster = cluster;
  cfg.fit.kernel = *parse_kernel(kernel);
  cfg.fit.p = p;
  cfg.fit.s = s;
  cfg.fit.nu = deriv;
  if (deriv > std::min(p, s))
    usage("--deriv must not exceed min(--p, --s)");
  if (!(level > 0.0 && level < 1.0))
    usage("--level must lie in (0, 1)");
  cfg.fit.level = level;
  if (!std::isfinite(cfg.cutoff))
    usage("--cutoff must be finite");
  if (!vce.empty())
    cfg.fit.vce = *parse_vce(vce);
  if (vce == "cluster" && !cfg.cluster)
    usage("--vce cluster needs --cluster");

  if (*o_bw) {
    if (!(bw > 0.0) || !std::isfinite(bw))
      usage("--bw must be positive");
    cfg.fit.bandwidth = CommonBandwidth{bw};
  } else if (*o_side) {
    if (!(bw_side[0] > 0.0) || !(bw_side[1] > 0.0) || !std::isfinite(bw_side[0]) ||
        !std::isfinite(bw_side[1]))
      usage("--bw-side values must be positive");
    cfg.fit.bandwidth = FixedBandwidth{bw_side[0], bw_side[1]};
  } else {
    cfg.fit.bandwidth = SelectBandwidth{bw_select == "one" ? SelectMode::one_sided
                                                           : SelectMode::two_sided};
  }

  for (const auto& a : at)
    cfg.at.push_back(parse_point(a));
  cfg.format = format == "json" ? OutputFormat::json
               : format == "csv" ? OutputFormat::csv
                                 : OutputFormat::table;
  return cfg;
}

} // namespace rdhte
