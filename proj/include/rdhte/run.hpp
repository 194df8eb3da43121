#pragma once

#include "rdhte/config.hpp"
#include "rdhte/estimands.hpp"

#include <iosfwd>
#include <string>

namespace rdhte {

// Reads the data file and assembles the sample described by a run config.
RdSample build_sample(const RunConfig& config);

FitSpec build_spec(const RunConfig& config, const RdSample& sample);

std::string render(const HteResult& result, OutputFormat format);

struct RunOutput {
  std::string out;
  std::string err;
  int exit_code = 0;
};

int exit_code_for(ErrorCode code);

RunOutput run(const RunConfig& config);

// Whole command line: parse, run, write. Returns the process exit code.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace rdhte
