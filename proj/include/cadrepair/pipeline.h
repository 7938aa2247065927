#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cadrepair/cad_kernel.h"
#include "cadrepair/diffusion.h"
#include "cadrepair/latent_codec.h"
#include "cadrepair/metrics.h"
#include "cadrepair/neural.h"

namespace cadrepair {

struct GroundTruth {
  ConditionVector condition;
  CommandSequence sequence;
  LatentVector latent;
};

struct GroundTruthStats {
  std::size_t draws = 0;
  std::size_t accepted = 0;
  double acceptance_rate() const { return draws ? static_cast<double>(accepted) / static_cast<double>(draws) : 0.0; }
};

// Rejection-samples kernel-valid random sequences: 3-5 edges, line with
// probability 0.7, targets and bulges uniform in [-0.8, 0.8], depth uniform
// in [0.1, 0.9].
std::vector<GroundTruth> gen_ground_truth(std::size_t n_conditions, std::uint64_t seed,
                                          GroundTruthStats* stats = nullptr);

struct Generation {
  std::uint64_t seed = 0;
  LatentVector latent;
  CommandSequence sequence;
  ValidityReport report;
};

struct DatasetRecord {
  std::size_t condition_id = 0;
  ConditionVector condition;
  CommandSequence ground_truth;
  LatentVector ground_truth_latent;
  std::vector<Generation> generations;
};

inline constexpr std::size_t kDefaultGenerations = 5;

// G guided/unguided samples per ground-truth condition. Sampled latents are
// rounded to float before decoding so labels agree with the stored matrix.
std::vector<DatasetRecord> gen_dataset(std::span<const GroundTruth> ground_truth, std::size_t generations,
                                       const Mlp& denoiser, const GuidanceConfig& guidance,
                                       const GuidanceModels& models, const DiffusionSchedule& sched,
                                       std::uint64_t seed, unsigned threads = 1);

struct DatasetSummary {
  std::size_t conditions = 0;
  std::size_t generated = 0;
  std::size_t valid = 0;
  std::size_t invalid = 0;
  double invalid_fraction() const { return generated ? static_cast<double>(invalid) / static_cast<double>(generated) : 0.0; }
};
DatasetSummary summarize(std::span<const DatasetRecord> dataset);

// Row index of generation g of condition c in the flattened generated-latent
// list (condition-major).
inline std::size_t generation_row(std::size_t condition, std::size_t g, std::size_t generations) {
  return condition * generations + g;
}

struct LatentPair {
  std::size_t input_row = 0;   // generated row
  std::size_t target_row = 0;  // generated row (SSL) or condition index (ground truth)
};

// Each invalid generation paired with the nearest valid generation of the
// same condition; conditions with no valid generation contribute nothing.
std::vector<LatentPair> build_ssl_pairs(std::span<const DatasetRecord> dataset);
// Every generation paired with its condition's ground-truth latent.
std::vector<LatentPair> build_gt_pairs(std::span<const DatasetRecord> dataset);

std::vector<LatentVector> generated_latents(std::span<const DatasetRecord> dataset);
std::vector<int> generated_labels(std::span<const DatasetRecord> dataset);

RegressionFit fit_ssl_regressor(std::span<const DatasetRecord> dataset, double ridge, double split, std::uint64_t seed);
RegressionFit fit_gt_regressor(std::span<const DatasetRecord> dataset, double ridge, double split, std::uint64_t seed);

enum class RepairStage { ValidDirect, RepairedValid, RepairedInvalid };
std::string_view repair_stage_name(RepairStage s);

struct RepairOutcome {
  RepairStage stage = RepairStage::ValidDirect;
  LatentVector pre_repair;
  std::optional<LatentVector> post_repair;
  CommandSequence final_sequence;
  ValidityReport final_report;

  const LatentVector& final_latent() const { return post_repair ? *post_repair : pre_repair; }
};

// Kernel-gated repair: valid latents pass untouched, invalid ones are mapped
// through the regressor (up to max_iters times) and re-checked.
RepairOutcome self_repair(const LatentVector& z, const LinearRegressor& regressor, int max_iters = 1);

enum class VariantId { Baseline, Var1, Var2, Var3, Var4, Var5, Full };
inline constexpr std::array<VariantId, 7> kAllVariants = {VariantId::Baseline, VariantId::Var1, VariantId::Var2,
                                                         VariantId::Var3,     VariantId::Var4, VariantId::Var5,
                                                         VariantId::Full};
std::string_view variant_name(VariantId v);
std::optional<VariantId> parse_variant(std::string_view name);

struct VariantSpec {
  GuidanceConfig guidance;
  enum class Repair { None, Ssl, GroundTruth } repair = Repair::None;
};
VariantSpec variant_spec(VariantId v, double s_clf, double s_reg, bool stop_gradient_y);

struct EvalModels {
  const Mlp* denoiser = nullptr;
  const Mlp* classifier = nullptr;
  const LinearRegressor* ssl_regressor = nullptr;
  const LinearRegressor* gt_regressor = nullptr;
};

struct EvalSettings {
  double s_clf = 10.0;
  double s_reg = 10.0;
  bool stop_gradient_y = false;
  int repair_iters = 1;
  MmdConfig mmd;
  unsigned threads = 1;
};

struct SampleOutcome {
  std::size_t condition_id = 0;
  std::uint64_t sample_seed = 0;
  std::uint64_t initial_hash = 0;  // hash of z_T, identical across variants
  LatentVector sampled;
  RepairStage stage = RepairStage::ValidDirect;
  bool repair_attempted = false;
  LatentVector final_latent;
  bool valid = false;
  std::optional<double> mmd;
};

struct EvalReport {
  VariantId variant = VariantId::Baseline;
  std::size_t n = 0;
  std::size_t n_valid = 0;
  std::size_t n_invalid = 0;
  double feasibility = 0.0;
  double mean_mmd = 0.0;
  double median_mmd = 0.0;
  std::size_t repaired_count = 0;
  std::size_t repair_failed_count = 0;
  std::optional<Histogram> mmd_hist;
  std::vector<SampleOutcome> samples;
};

// Seeds shared by every variant for evaluation condition i.
std::uint64_t eval_sample_seed(std::uint64_t seed, std::size_t condition);
std::uint64_t latent_hash(const LatentVector& z);

EvalReport run_variant(VariantId v, std::span<const GroundTruth> eval_conditions, const EvalModels& models,
                       const DiffusionSchedule& sched, const EvalSettings& settings, std::uint64_t seed);

// Runs several variants, sampling each distinct guidance configuration once.
std::vector<EvalReport> run_variants(std::span<const VariantId> variants, std::span<const GroundTruth> eval_conditions,
                                     const EvalModels& models, const DiffusionSchedule& sched,
                                     const EvalSettings& settings, std::uint64_t seed);

std::string report_csv(std::span<const EvalReport> reports);
std::string mmd_scores_csv(std::span<const EvalReport> reports);

}  // namespace cadrepair
