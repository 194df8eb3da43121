#include "rdhte/report.hpp"

#include "rdhte/csv.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace rdhte {

using ojson = nlohmann::ordered_json;

namespace {

double clean_zero(double v) { return v == 0.0 ? 0.0 : v; }

std::string fixed3(double v) {
  // Avoid "-0.000" for tiny negatives.
  std::string s = fmt::format("{:.3f}", v);
  if (s == "-0.000")
    s = "0.000";
  return s;
}

std::string level_header(double level) {
  return fmt::format("RBC {:g}% CI", std::round(level * 1000.0) / 10.0);
}

ojson vec_json(const Eigen::VectorXd& v) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    a.push_back(v[i]);
  return a;
}

ojson spec_json(const FitSpec& spec, VceKind vce) {
  ojson j;
  j["p"] = spec.p;
  j["s"] = spec.s;
  j["deriv"] = spec.nu;
  j["kernel"] = std::string(to_string(spec.kernel));
  j["vce"] = std::string(to_string(vce));
  j["level"] = spec.level;
  return j;
}

ojson polynomial_json(const Polynomial& p) {
  ojson a = ojson::array();
  for (double c : p.coef)
    a.push_back(c);
  return a;
}

} // namespace

std::string group_thousands(long long v) {
  std::string digits = std::to_string(v < 0 ? -v : v);
  std::string out;
  const std::size_t n = digits.size();
  for (std::size_t i = 0; i < n; ++i) {
    out += digits[i];
    const std::size_t rest = n - 1 - i;
    if (rest > 0 && rest % 3 == 0)
      out += ',';
  }
  return v < 0 ? "-" + out : out;
}

std::string format_bandwidth(double h_left, double h_right) {
  if (h_left == h_right)
    return fixed3(h_left);
  return fixed3(h_left) + "/" + fixed3(h_right);
}

std::vector<TableRow> table_rows(const HteResult& result) {
  std::vector<TableRow> rows;
  for (const auto& e : result.estimates) {
    TableRow r;
    r.label = e.label;
    r.point = e.point;
    r.ci_lower = e.ci_lower;
    r.ci_upper = e.ci_upper;
    r.p_value = e.p_value;
    r.sample_size = static_cast<long long>(result.eff_n());
    r.h_left = result.h_left;
    r.h_right = result.h_right;
    r.extrapolation = e.extrapolation;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string render_rows(const std::vector<TableRow>& rows, double level) {
  const std::vector<std::string> header = {"Estimand",    "Point Estimate", level_header(level),
                                           "RBC p-value", "Sample Size",    "h"};
  std::vector<std::vector<std::string>> cells;
  bool any_extrapolation = false;
  for (const auto& r : rows) {
    any_extrapolation = any_extrapolation || r.extrapolation;
    cells.push_back({r.label + (r.extrapolation ? " *" : ""), fixed3(r.point),
                     "[" + fixed3(r.ci_lower) + " ; " + fixed3(r.ci_upper) + "]",
                     fixed3(r.p_value), group_thousands(r.sample_size),
                     format_bandwidth(r.h_left, r.h_right)});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : cells)
      width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& row) {
    std::string out = fmt::format("{:<{}}", row[0], width[0]);
    for (std::size_t c = 1; c < row.size(); ++c)
      out += fmt::format("  {:>{}}", row[c], width[c]);
    return out + "\n";
  };
  std::string out = line(header);
  std::size_t total = width[0];
  for (std::size_t c = 1; c < width.size(); ++c)
    total += 2 + width[c];
  out += std::string(total, '-') + "\n";
  for (const auto& row : cells)
    out += line(row);
  if (any_extrapolation)
    out += "* evaluation point outside the observed covariate range\n";
  return out;
}

std::string render_table(const HteResult& result) {
  std::string out = render_rows(table_rows(result), result.spec.level);
  if (result.regularized)
    out += "note: bias estimate near zero; bandwidth denominator was regularized\n";
  return out;
}

std::string render_json(const HteResult& result) {
  const RdSample& sample = *result.sample;
  ojson j;
  j["schema"] = kSchema;
  j["spec"] = spec_json(result.spec, result.vce);
  j["n"] = sample.n();
  j["cutoff"] = sample.cutoff;
  j["covariates"] = sample.w_labels;

  ojson bw;
  bw["left"] = result.h_left;
  bw["right"] = result.h_right;
  bw["pilot_left"] = result.b_left;
  bw["pilot_right"] = result.b_right;
  bw["selector"] = result.bandwidth_source;
  bw["regularized"] = result.regularized;
  j["bandwidth"] = bw;

  ojson ss;
  ss["left"] = result.left.eff_n;
  ss["right"] = result.right.eff_n;
  ss["total"] = result.eff_n();
  j["sample_size"] = ss;

  ojson coef;
  std::vector<std::string> names = {"theta"};
  for (const auto& l : sample.w_labels)
    names.push_back("xi(" + l + ")");
  coef["labels"] = names;
  coef["varsigma"] = vec_json(result.varsigma);
  j["coefficients"] = coef;

  ojson est = ojson::array();
  for (const auto& e : result.estimates) {
    ojson r;
    r["label"] = e.label;
    r["selector"] = vec_json(e.selector);
    r["point"] = clean_zero(e.point);
    r["se"] = e.se;
    r["variance"] = e.variance;
    r["bias"] = clean_zero(e.bias);
    r["rbc_point"] = clean_zero(e.rbc_point);
    r["rbc_se"] = e.rbc_se;
    r["rbc_variance"] = e.rbc_variance;
    r["ci"] = {clean_zero(e.ci_lower), clean_zero(e.ci_upper)};
    if (std::isfinite(e.z))
      r["z"] = clean_zero(e.z);
    else
      r["z"] = nullptr;
    r["p_value"] = e.p_value;
    r["zero_se"] = e.zero_se;
    r["extrapolation"] = e.extrapolation;
    est.push_back(r);
  }
  j["estimates"] = est;
  return j.dump(2) + "\n";
}

std::string render_csv(const HteResult& result) {
  std::string out = "estimand,point,rbc_ci_lower,rbc_ci_upper,rbc_p_value,sample_size,h_left,h_right\n";
  for (const auto& r : table_rows(result)) {
    out += csv_escape(r.label) + "," + format_double(clean_zero(r.point)) + "," +
           format_double(clean_zero(r.ci_lower)) + "," + format_double(clean_zero(r.ci_upper)) +
           "," + format_double(r.p_value) + "," + std::to_string(r.sample_size) + "," +
           format_double(r.h_left) + "," + format_double(r.h_right) + "\n";
  }
  return out;
}

std::string render_monte_carlo_json(const MonteCarloReport& report, const FitSpec& spec,
                                    const DgpConfig& config) {
  ojson j;
  j["schema"] = kSchema;
  VceKind vce = spec.vce.value_or(VceKind::hc3);
  j["spec"] = spec_json(spec, vce);
  j["n"] = report.n;
  j["cutoff"] = config.cutoff;

  ojson dgp;
  dgp["alpha_left"] = polynomial_json(config.alpha_left);
  dgp["alpha_right"] = polynomial_json(config.alpha_right);
  ojson ll = ojson::array(), lr = ojson::array();
  for (const auto& p : config.lambda_left)
    ll.push_back(polynomial_json(p));
  for (const auto& p : config.lambda_right)
    lr.push_back(polynomial_json(p));
  dgp["lambda_left"] = ll;
  dgp["lambda_right"] = lr;
  dgp["sigma0"] = config.sigma0;
  dgp["sigma1"] = config.sigma1;

  ojson mc;
  mc["reps"] = report.reps;
  mc["seed"] = report.seed;
  mc["level"] = report.level;
  mc["dgp"] = dgp;
  ojson targets = ojson::array();
  for (const auto& t : report.targets) {
    ojson r;
    r["label"] = t.label;
    r["selector"] = vec_json(t.selector);
    r["truth"] = t.truth;
    r["successes"] = t.successes;
    r["failures"] = t.failures;
    r["failure_rate"] = t.failure_rate;
    r["mean_point"] = t.mean_point;
    r["mean_bias"] = t.mean_bias;
    r["mean_rbc_bias"] = t.mean_rbc_bias;
    r["rmse"] = t.rmse;
    r["rbc_rmse"] = t.rbc_rmse;
    r["sd"] = t.sd;
    r["rbc_sd"] = t.rbc_sd;
    r["mean_se"] = t.mean_se;
    r["mean_rbc_se"] = t.mean_rbc_se;
    r["coverage"] = t.coverage;
    r["mean_h"] = t.mean_h;
    r["mean_h_left"] = t.mean_h_left;
    r["mean_h_right"] = t.mean_h_right;
    r["degenerate"] = t.degenerate;
    targets.push_back(r);
  }
  mc["targets"] = targets;
  j["monte_carlo"] = mc;
  return j.dump(2) + "\n";
}

} // namespace rdhte
