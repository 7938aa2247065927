#include "cadrepair/errors.h"
#include "cadrepair/rng.h"

namespace cadrepair {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::ArityError: return "ArityError";
    case Errc::InfeasibleSolid: return "InfeasibleSolid";
    case Errc::SamplingStall: return "SamplingStall";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NonScalarOutput: return "NonScalarOutput";
    case Errc::SingleClassData: return "SingleClassData";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::BadRange: return "BadRange";
    case Errc::StepOutOfRange: return "StepOutOfRange";
    case Errc::RejectionStall: return "RejectionStall";
    case Errc::NoPairs: return "NoPairs";
    case Errc::MissingModel: return "MissingModel";
    case Errc::EmptyPopulation: return "EmptyPopulation";
    case Errc::BadSigma: return "BadSigma";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::EmptyScores: return "EmptyScores";
    case Errc::TooFewRows: return "TooFewRows";
    case Errc::Io: return "Io";
    case Errc::Config: return "Config";
  }
  return "Unknown";
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index) {
  // FNV-1a over the label keeps streams for different purposes apart.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(master ^ h) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::Config:
    case Errc::BadRange:
    case Errc::MalformedRecord:
    case Errc::ArityError:
      return kExitConfig;
    case Errc::SamplingStall:
    case Errc::RejectionStall:
      return kExitStall;
    case Errc::Io:
    case Errc::MissingModel:
      return kExitMissing;
    case Errc::EmptyPopulation:
    case Errc::EmptyDataset:
    case Errc::NoPairs:
    case Errc::SingleClassData:
      return kExitEmpty;
    default:
      return kExitFailure;
  }
}

}  // namespace cadrepair
