#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cadrepair/config.h"
#include "cadrepair/pipeline.h"

namespace cadrepair {

namespace fs = std::filesystem;

// File layout of one experiment run.
struct RunDir {
  fs::path root;

  fs::path config() const { return root / "config.json"; }
  fs::path conditions() const { return root / "conditions.jsonl"; }
  fs::path latents() const { return root / "latents.bin"; }
  fs::path labels() const { return root / "labels.csv"; }
  fs::path pairs_ssl() const { return root / "pairs_ssl.csv"; }
  fs::path pairs_gt() const { return root / "pairs_gt.csv"; }
  fs::path dataset_summary() const { return root / "dataset_summary.txt"; }
  fs::path model(std::string_view name) const { return root / "models" / (std::string(name) + ".json"); }
  fs::path train_metrics() const { return root / "train_metrics.csv"; }
  fs::path report() const { return root / "report.csv"; }
  fs::path mmd_scores() const { return root / "mmd_scores.csv"; }
  fs::path histogram(VariantId v) const { return root / ("hist_" + std::string(variant_name(v)) + ".csv"); }
  fs::path eval_outcomes() const { return root / "eval_outcomes.csv"; }
  fs::path eval_latents(std::string_view which) const {
    return root / ("eval_latents_" + std::string(which) + ".bin");
  }
  fs::path pca() const { return root / "pca.csv"; }
  fs::path pca_summary() const { return root / "pca_summary.txt"; }
};

// Missing files raise Errc::Io.
std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view text);

std::vector<GroundTruth> training_ground_truth(const RunConfig& cfg);
// Drawn from a seed label disjoint from the training set.
std::vector<GroundTruth> evaluation_ground_truth(const RunConfig& cfg);

std::uint64_t dataset_seed(const RunConfig& cfg);
std::uint64_t evaluation_seed(const RunConfig& cfg);

// latents.bin holds the generated rows (condition-major) followed by one
// ground-truth row per condition; pair files index into it.
void write_dataset(const RunDir& dir, std::span<const DatasetRecord> dataset);
// Rebuilds records from the files; labels are re-derived with the kernel
// and must match labels.csv.
std::vector<DatasetRecord> read_dataset(const RunDir& dir);

std::string dataset_summary_text(std::span<const DatasetRecord> dataset);

// Rows are (model, metric, value); rows for `model` are replaced, the rest kept.
std::string upsert_metrics_csv(const std::string& existing, const std::string& model,
                               const std::vector<std::pair<std::string, double>>& metrics);

std::vector<std::pair<std::string, double>> classifier_metric_rows(const ClassifierMetrics& m);
std::vector<std::pair<std::string, double>> regression_metric_rows(const RegressionMetrics& m);

std::string eval_outcomes_csv(std::span<const EvalReport> reports);

}  // namespace cadrepair
