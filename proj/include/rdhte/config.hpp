#pragma once

#include "rdhte/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rdhte {

enum class OutputFormat { table, json, csv };

struct RunConfig {
  std::string data_path;
  std::string outcome;
  std::string running;
  double cutoff = 0.0;
  std::vector<CovariateSpec> hetero;
  std::optional<std::string> cluster;
  FitSpec fit;
  std::vector<std::vector<double>> at;
  OutputFormat format = OutputFormat::table;
  std::uint64_t seed = 0; // reserved: estimation is deterministic
};

// Parses one --hetero argument: col, col:cat[@base], col:bin[@base],
// col:cont, col:cont^k, col:q<k>.
CovariateSpec parse_hetero(const std::string& arg);

// Throws Error(Usage) with the message to show on any usage problem.
// Returns nullopt when help was requested (help text is written to `help`).
std::optional<RunConfig> parse_config(int argc, const char* const* argv, std::string* help = nullptr);

} // namespace rdhte
