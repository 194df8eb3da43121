#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rdhte {

enum class ErrorCode {
  NonFinite,
  LengthMismatch,
  EmptySample,
  UnknownLevel,
  DegenerateQuantiles,
  NonPositiveBandwidth,
  SingularGram,
  NuOutOfRange,
  DimensionMismatch,
  BandwidthUnresolved,
  TooFewObservations,
  BiasDegenerate,
  LeverageOne,
  TooFewClusters,
  RankDeficient,
  AllReplicationsFailed,
  ParseError,
  MissingColumn,
  Usage,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library carries one of the codes above so
// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace rdhte
