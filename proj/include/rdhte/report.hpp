#pragma once

#include "rdhte/estimands.hpp"
#include "rdhte/simulate.hpp"

#include <string>
#include <vector>

namespace rdhte {

inline constexpr const char* kSchema = "rdhte/1";

// One line of the human table.
struct TableRow {
  std::string label;
  double point = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double p_value = 1.0;
  long long sample_size = 0;
  double h_left = 0.0;
  double h_right = 0.0;
  bool extrapolation = false;
};

std::vector<TableRow> table_rows(const HteResult& result);

// 1234567 -> "1,234,567"
std::string group_thousands(long long v);

// "0.151" or "0.140/0.160" when the sides differ.
std::string format_bandwidth(double h_left, double h_right);

// Columns: Estimand | Point Estimate | RBC 95% CI | RBC p-value | Sample Size | h.
// Numbers are rounded to three decimals.
std::string render_rows(const std::vector<TableRow>& rows, double level = 0.95);

std::string render_table(const HteResult& result);
std::string render_json(const HteResult& result);
std::string render_csv(const HteResult& result);

std::string render_monte_carlo_json(const MonteCarloReport& report, const FitSpec& spec,
                                    const DgpConfig& config);

} // namespace rdhte
