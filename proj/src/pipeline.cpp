#include "cadrepair/pipeline.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "cadrepair/errors.h"
#include "cadrepair/parallel.h"
#include "cadrepair/rng.h"

namespace cadrepair {

namespace {

constexpr std::size_t kStallDraws = 1'000'000;
constexpr double kMinGroundTruthAcceptance = 1e-3;

CommandSequence random_sequence(Rng& rng) {
  std::uniform_int_distribution<int> count_dist(3, static_cast<int>(kMaxEdges));
  CommandSequence seq;
  const int n = count_dist(rng);
  for (int i = 0; i < n; ++i) {
    const bool arc = uniform(rng, 0.0, 1.0) >= 0.7;
    const double x = uniform(rng, -0.8, 0.8);
    const double y = uniform(rng, -0.8, 0.8);
    if (arc) {
      seq.edges.push_back(SketchEdge::arc(x, y, uniform(rng, -0.8, 0.8)));
    } else {
      seq.edges.push_back(SketchEdge::line(x, y));
    }
  }
  seq.depth = uniform(rng, 0.1, 0.9);
  return seq;
}

double squared_distance(const LatentVector& a, const LatentVector& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < kLatentDim; ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace

std::vector<GroundTruth> gen_ground_truth(std::size_t n_conditions, std::uint64_t seed, GroundTruthStats* stats) {
  if (n_conditions == 0) throw Error(Errc::BadRange, "need at least one condition");
  Rng rng(seed);
  std::vector<GroundTruth> out;
  out.reserve(n_conditions);
  GroundTruthStats local;
  while (out.size() < n_conditions) {
    CommandSequence seq = random_sequence(rng);
    ++local.draws;
    if (kernel_check(seq).valid) {
      ++local.accepted;
      GroundTruth gt;
      gt.condition = condition_descriptor(seq);
      gt.latent = encode(seq);
      gt.sequence = std::move(seq);
      out.push_back(std::move(gt));
    }
    if (local.draws >= kStallDraws &&
        static_cast<double>(local.accepted) < kMinGroundTruthAcceptance * static_cast<double>(local.draws)) {
      throw Error(Errc::RejectionStall, "ground-truth acceptance below 1e-3 after " + std::to_string(local.draws) +
                                            " draws");
    }
  }
  if (stats) *stats = local;
  return out;
}

std::vector<DatasetRecord> gen_dataset(std::span<const GroundTruth> ground_truth, std::size_t generations,
                                       const Mlp& denoiser, const GuidanceConfig& guidance,
                                       const GuidanceModels& models, const DiffusionSchedule& sched,
                                       std::uint64_t seed, unsigned threads) {
  if (generations == 0) throw Error(Errc::BadRange, "need at least one generation per condition");
  std::vector<DatasetRecord> out(ground_truth.size());
  parallel_for(ground_truth.size(), threads, [&](std::size_t c) {
    DatasetRecord& rec = out[c];
    rec.condition_id = c;
    rec.condition = ground_truth[c].condition;
    rec.ground_truth = ground_truth[c].sequence;
    rec.ground_truth_latent = ground_truth[c].latent;
    rec.generations.resize(generations);
    for (std::size_t g = 0; g < generations; ++g) {
      Generation& gen = rec.generations[g];
      gen.seed = derive_seed(seed, "dataset/generation", generation_row(c, g, generations));
      gen.latent = round_to_float(sample(rec.condition, denoiser, guidance, models, sched, gen.seed));
      gen.sequence = decode(gen.latent);
      gen.report = kernel_check(gen.sequence);
    }
  });
  return out;
}

DatasetSummary summarize(std::span<const DatasetRecord> dataset) {
  DatasetSummary s;
  s.conditions = dataset.size();
  for (const DatasetRecord& rec : dataset) {
    for (const Generation& g : rec.generations) {
      ++s.generated;
      (g.report.valid ? s.valid : s.invalid) += 1;
    }
  }
  return s;
}

std::vector<LatentPair> build_ssl_pairs(std::span<const DatasetRecord> dataset) {
  std::vector<LatentPair> pairs;
  std::size_t row_base = 0;
  for (const DatasetRecord& rec : dataset) {
    const auto& gens = rec.generations;
    for (std::size_t i = 0; i < gens.size(); ++i) {
      if (gens[i].report.valid) continue;
      std::optional<std::size_t> best;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < gens.size(); ++j) {
        if (!gens[j].report.valid) continue;
        const double d = squared_distance(gens[i].latent, gens[j].latent);
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      if (best) pairs.push_back({row_base + i, row_base + *best});
    }
    row_base += gens.size();
  }
  return pairs;
}

std::vector<LatentPair> build_gt_pairs(std::span<const DatasetRecord> dataset) {
  std::vector<LatentPair> pairs;
  std::size_t row = 0;
  for (std::size_t c = 0; c < dataset.size(); ++c) {
    for (std::size_t g = 0; g < dataset[c].generations.size(); ++g) pairs.push_back({row++, c});
  }
  return pairs;
}

std::vector<LatentVector> generated_latents(std::span<const DatasetRecord> dataset) {
  std::vector<LatentVector> out;
  for (const DatasetRecord& rec : dataset) {
    for (const Generation& g : rec.generations) out.push_back(g.latent);
  }
  return out;
}

std::vector<int> generated_labels(std::span<const DatasetRecord> dataset) {
  std::vector<int> out;
  for (const DatasetRecord& rec : dataset) {
    for (const Generation& g : rec.generations) out.push_back(g.report.valid ? 1 : 0);
  }
  return out;
}

RegressionFit fit_ssl_regressor(std::span<const DatasetRecord> dataset, double ridge, double split, std::uint64_t seed) {
  const std::vector<LatentPair> pairs = build_ssl_pairs(dataset);
  if (pairs.empty()) throw Error(Errc::NoPairs, "no condition has both valid and invalid generations");
  const std::vector<LatentVector> latents = generated_latents(dataset);
  Matrix x(pairs.size(), kLatentDim);
  Matrix y(pairs.size(), kLatentDim);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    for (std::size_t i = 0; i < kLatentDim; ++i) {
      x(k, i) = latents[pairs[k].input_row][i];
      y(k, i) = latents[pairs[k].target_row][i];
    }
  }
  return fit_and_score(x, y, ridge, split, seed);
}

RegressionFit fit_gt_regressor(std::span<const DatasetRecord> dataset, double ridge, double split, std::uint64_t seed) {
  const std::vector<LatentPair> pairs = build_gt_pairs(dataset);
  if (pairs.empty()) throw Error(Errc::NoPairs, "empty dataset");
  const std::vector<LatentVector> latents = generated_latents(dataset);
  Matrix x(pairs.size(), kLatentDim);
  Matrix y(pairs.size(), kLatentDim);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    for (std::size_t i = 0; i < kLatentDim; ++i) {
      x(k, i) = latents[pairs[k].input_row][i];
      y(k, i) = dataset[pairs[k].target_row].ground_truth_latent[i];
    }
  }
  return fit_and_score(x, y, ridge, split, seed);
}

std::string_view repair_stage_name(RepairStage s) {
  switch (s) {
    case RepairStage::ValidDirect: return "ValidDirect";
    case RepairStage::RepairedValid: return "RepairedValid";
    case RepairStage::RepairedInvalid: return "RepairedInvalid";
  }
  return "Unknown";
}

RepairOutcome self_repair(const LatentVector& z, const LinearRegressor& regressor, int max_iters) {
  if (max_iters < 1) throw Error(Errc::BadRange, "max_iters must be at least 1");
  RepairOutcome out;
  out.pre_repair = z;
  out.final_sequence = decode(z);
  out.final_report = kernel_check(out.final_sequence);
  if (out.final_report.valid) {
    out.stage = RepairStage::ValidDirect;
    return out;
  }
  LatentVector current = z;
  out.stage = RepairStage::RepairedInvalid;
  for (int iter = 0; iter < max_iters; ++iter) {
    current = regressor_predict(regressor, current);
    out.final_sequence = decode(current);
    out.final_report = kernel_check(out.final_sequence);
    if (out.final_report.valid) {
      out.stage = RepairStage::RepairedValid;
      break;
    }
  }
  out.post_repair = current;
  return out;
}

std::string_view variant_name(VariantId v) {
  switch (v) {
    case VariantId::Baseline: return "Baseline";
    case VariantId::Var1: return "Var1";
    case VariantId::Var2: return "Var2";
    case VariantId::Var3: return "Var3";
    case VariantId::Var4: return "Var4";
    case VariantId::Var5: return "Var5";
    case VariantId::Full: return "Full";
  }
  return "Unknown";
}

std::optional<VariantId> parse_variant(std::string_view name) {
  for (VariantId v : kAllVariants) {
    if (variant_name(v) == name) return v;
  }
  return std::nullopt;
}

VariantSpec variant_spec(VariantId v, double s_clf, double s_reg, bool stop_gradient_y) {
  VariantSpec spec;
  spec.guidance.s_clf = s_clf;
  spec.guidance.s_reg = s_reg;
  spec.guidance.stop_gradient_y = stop_gradient_y;
  switch (v) {
    case VariantId::Baseline: break;
    case VariantId::Var1: spec.repair = VariantSpec::Repair::Ssl; break;
    case VariantId::Var2: spec.repair = VariantSpec::Repair::GroundTruth; break;
    case VariantId::Var3: spec.guidance.use_classifier = true; break;
    case VariantId::Var4: spec.guidance.use_regressor = true; break;
    case VariantId::Var5:
      spec.guidance.use_classifier = true;
      spec.guidance.use_regressor = true;
      break;
    case VariantId::Full:
      spec.guidance.use_classifier = true;
      spec.guidance.use_regressor = true;
      spec.repair = VariantSpec::Repair::Ssl;
      break;
  }
  return spec;
}

std::uint64_t eval_sample_seed(std::uint64_t seed, std::size_t condition) {
  return derive_seed(seed, "eval/sample", condition);
}

std::uint64_t latent_hash(const LatentVector& z) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : z.values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

EvalReport run_variant(VariantId v, std::span<const GroundTruth> eval_conditions, const EvalModels& models,
                       const DiffusionSchedule& sched, const EvalSettings& settings, std::uint64_t seed) {
  const VariantId one[] = {v};
  return run_variants(one, eval_conditions, models, sched, settings, seed).front();
}

std::vector<EvalReport> run_variants(std::span<const VariantId> variants, std::span<const GroundTruth> eval_conditions,
                                     const EvalModels& models, const DiffusionSchedule& sched,
                                     const EvalSettings& settings, std::uint64_t seed) {
  if (eval_conditions.empty()) throw Error(Errc::EmptyPopulation, "no evaluation conditions");
  if (models.denoiser == nullptr) throw Error(Errc::MissingModel, "evaluation needs a denoiser");
  settings.mmd.validate();

  std::vector<VariantSpec> specs;
  for (VariantId v : variants) {
    VariantSpec spec = variant_spec(v, settings.s_clf, settings.s_reg, settings.stop_gradient_y);
    if (spec.guidance.use_classifier && !models.classifier) {
      throw Error(Errc::MissingModel, std::string(variant_name(v)) + " needs the classifier");
    }
    if ((spec.guidance.use_regressor || spec.repair == VariantSpec::Repair::Ssl) && !models.ssl_regressor) {
      throw Error(Errc::MissingModel, std::string(variant_name(v)) + " needs the SSL regressor");
    }
    if (spec.repair == VariantSpec::Repair::GroundTruth && !models.gt_regressor) {
      throw Error(Errc::MissingModel, std::string(variant_name(v)) + " needs the ground-truth regressor");
    }
    specs.push_back(spec);
  }
  const GuidanceModels guidance_models{models.classifier, models.ssl_regressor};

  // samples[c][k] is the outcome of variant k on condition c.
  std::vector<std::vector<SampleOutcome>> per_condition(eval_conditions.size());
  parallel_for(eval_conditions.size(), settings.threads, [&](std::size_t c) {
    const GroundTruth& gt = eval_conditions[c];
    const std::uint64_t sample_seed = eval_sample_seed(seed, c);
    const std::uint64_t initial_hash = latent_hash(initial_latent(sample_seed));

    std::vector<std::pair<std::pair<bool, bool>, LatentVector>> sampled_cache;
    std::vector<std::pair<CommandSequence, double>> mmd_cache;
    std::optional<PointCloud> gt_cloud;

    for (const VariantSpec& spec : specs) {
      const auto key = std::make_pair(spec.guidance.use_classifier, spec.guidance.use_regressor);
      auto it = std::find_if(sampled_cache.begin(), sampled_cache.end(), [&](const auto& e) { return e.first == key; });
      if (it == sampled_cache.end()) {
        sampled_cache.emplace_back(key, sample(gt.condition, *models.denoiser, spec.guidance, guidance_models, sched,
                                               sample_seed));
        it = std::prev(sampled_cache.end());
      }

      SampleOutcome s;
      s.condition_id = c;
      s.sample_seed = sample_seed;
      s.initial_hash = initial_hash;
      s.sampled = it->second;
      CommandSequence final_seq;
      if (spec.repair == VariantSpec::Repair::None) {
        final_seq = decode(s.sampled);
        s.valid = kernel_check(final_seq).valid;
        s.final_latent = s.sampled;
      } else {
        const LinearRegressor& reg =
            spec.repair == VariantSpec::Repair::Ssl ? *models.ssl_regressor : *models.gt_regressor;
        const RepairOutcome r = self_repair(s.sampled, reg, settings.repair_iters);
        s.stage = r.stage;
        s.repair_attempted = r.post_repair.has_value();
        s.valid = r.final_report.valid;
        s.final_latent = r.final_latent();
        final_seq = r.final_sequence;
      }

      if (s.valid) {
        auto m = std::find_if(mmd_cache.begin(), mmd_cache.end(), [&](const auto& e) { return e.first == final_seq; });
        if (m != mmd_cache.end()) {
          s.mmd = m->second;
        } else {
          if (!gt_cloud) gt_cloud = sample_point_cloud(gt.sequence, settings.mmd.cloud_size, derive_seed(seed, "eval/gt_cloud", c));
          const PointCloud gen_cloud =
              sample_point_cloud(final_seq, settings.mmd.cloud_size, derive_seed(seed, "eval/gen_cloud", c));
          s.mmd = mmd(gen_cloud, *gt_cloud, settings.mmd);
          mmd_cache.emplace_back(final_seq, *s.mmd);
        }
      }
      per_condition[c].push_back(std::move(s));
    }
  });

  std::vector<EvalReport> reports;
  for (std::size_t k = 0; k < variants.size(); ++k) {
    EvalReport rep;
    rep.variant = variants[k];
    std::vector<double> scores;
    for (std::size_t c = 0; c < eval_conditions.size(); ++c) {
      SampleOutcome& s = per_condition[c][k];
      ++rep.n;
      if (s.valid) {
        ++rep.n_valid;
        scores.push_back(*s.mmd);
      } else {
        ++rep.n_invalid;
      }
      if (s.stage == RepairStage::RepairedValid) ++rep.repaired_count;
      if (s.stage == RepairStage::RepairedInvalid) ++rep.repair_failed_count;
      rep.samples.push_back(std::move(s));
    }
    rep.feasibility = feasibility_rate(rep.n_valid, rep.n_invalid);
    if (!scores.empty()) {
      double sum = 0.0;
      for (double v : scores) sum += v;
      rep.mean_mmd = sum / static_cast<double>(scores.size());
      rep.median_mmd = median_of(scores);
      rep.mmd_hist = mmd_histogram(scores, 16);
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

std::string report_csv(std::span<const EvalReport> reports) {
  std::ostringstream os;
  os.precision(10);
  os << "variant,n,n_valid,feasibility,mean_mmd,median_mmd,repaired_count,repair_failed_count\n";
  for (const EvalReport& r : reports) {
    os << variant_name(r.variant) << ',' << r.n << ',' << r.n_valid << ',' << r.feasibility << ',' << r.mean_mmd << ','
       << r.median_mmd << ',' << r.repaired_count << ',' << r.repair_failed_count << '\n';
  }
  return os.str();
}

std::string mmd_scores_csv(std::span<const EvalReport> reports) {
  std::ostringstream os;
  os.precision(17);
  os << "condition_id,variant,mmd\n";
  for (const EvalReport& r : reports) {
    for (const SampleOutcome& s : r.samples) {
      if (s.mmd) os << s.condition_id << ',' << variant_name(r.variant) << ',' << *s.mmd << '\n';
    }
  }
  return os.str();
}

}  // namespace cadrepair
