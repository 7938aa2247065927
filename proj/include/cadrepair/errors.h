#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cadrepair {

enum class Errc {
  MalformedRecord,
  ArityError,
  InfeasibleSolid,
  SamplingStall,
  DimensionMismatch,
  NonScalarOutput,
  SingleClassData,
  RankDeficient,
  EmptyDataset,
  BadRange,
  StepOutOfRange,
  RejectionStall,
  NoPairs,
  MissingModel,
  EmptyPopulation,
  BadSigma,
  TooFewPoints,
  EmptyScores,
  TooFewRows,
  Io,
  Config,
};

std::string_view errc_name(Errc code);

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitStall = 3;
inline constexpr int kExitMissing = 4;
inline constexpr int kExitEmpty = 5;

// Process exit status used by the command-line tool for each error code.
int exit_code_for(Errc code);


// Single exception type for the library; the code says which contract failed.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace cadrepair
