#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cadrepair/config.h"
#include "cadrepair/errors.h"
#include "cadrepair/parallel.h"
#include "cadrepair/rng.h"
#include "cadrepair/run_dir.h"

using namespace cadrepair;

namespace {


struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = default_thread_count();
};

RunConfig resolve_config(const Options& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.output_dir = o.out;
  cfg.validate();
  return cfg;
}

void record_config(const RunDir& dir, const RunConfig& cfg) {
  const std::string text = config_to_json(cfg);
  if (fs::exists(dir.config())) {
    const std::string previous = read_file(dir.config());
    if (previous != text) std::cerr << "warning: config differs from the one recorded in " << dir.config() << '\n';
  }
  write_file(dir.config(), text);
}

Mlp load_mlp(const RunDir& dir, const char* name) {
  const fs::path p = dir.model(name);
  if (!fs::exists(p)) throw Error(Errc::MissingModel, std::string("missing model ") + p.string());
  return mlp_from_json(read_file(p));
}

LinearRegressor load_regressor(const RunDir& dir, const char* name) {
  const fs::path p = dir.model(name);
  if (!fs::exists(p)) throw Error(Errc::MissingModel, std::string("missing model ") + p.string());
  return regressor_from_json(read_file(p));
}

void store_metrics(const RunDir& dir, const std::string& model,
                   const std::vector<std::pair<std::string, double>>& rows) {
  const std::string existing = fs::exists(dir.train_metrics()) ? read_file(dir.train_metrics()) : std::string();
  write_file(dir.train_metrics(), upsert_metrics_csv(existing, model, rows));
  std::cout << "[" << model << "]\n";
  for (const auto& [k, v] : rows) std::cout << "  " << k << " = " << v << '\n';
}

Mlp train_denoiser_into(const RunDir& dir, const RunConfig& cfg) {
  const std::vector<GroundTruth> gt = training_ground_truth(cfg);
  std::vector<ConditionVector> conditions;
  std::vector<LatentVector> latents;
  for (const GroundTruth& g : gt) {
    conditions.push_back(g.condition);
    latents.push_back(g.latent);
  }
  DenoiserResult r = train_denoiser(conditions, latents, cfg.schedule(), cfg.denoiser_train_config());
  write_file(dir.model("denoiser"), mlp_to_json(r.model, "denoiser"));
  store_metrics(dir, "denoiser",
                {{"first_epoch_loss", r.epoch_losses.front()}, {"final_loss", r.final_loss},
                 {"epochs", static_cast<double>(r.epoch_losses.size())}});
  return std::move(r.model);
}

int cmd_gen_dataset(const Options& o) {
  const RunConfig cfg = resolve_config(o);
  const RunDir dir{cfg.output_dir};
  record_config(dir, cfg);

  Mlp denoiser;
  if (fs::exists(dir.model("denoiser"))) {
    denoiser = load_mlp(dir, "denoiser");
  } else {
    std::cout << "no denoiser in " << dir.root << ", training one first\n";
    denoiser = train_denoiser_into(dir, cfg);
  }
  const GuidanceConfig guidance = cfg.dataset_guidance();
  std::optional<Mlp> classifier;
  std::optional<LinearRegressor> regressor;
  if (guidance.use_classifier) classifier = load_mlp(dir, "classifier");
  if (guidance.use_regressor) regressor = load_regressor(dir, "ssl_regressor");
  const GuidanceModels models{classifier ? &*classifier : nullptr, regressor ? &*regressor : nullptr};

  const std::vector<GroundTruth> gt = training_ground_truth(cfg);
  const std::vector<DatasetRecord> dataset =
      gen_dataset(gt, cfg.generations, denoiser, guidance, models, cfg.schedule(), dataset_seed(cfg), o.threads);
  write_dataset(dir, dataset);
  const std::string summary = dataset_summary_text(dataset);
  write_file(dir.dataset_summary(), summary);
  std::cout << summary;
  const double f = summarize(dataset).invalid_fraction();
  if (f < 0.05 || f > 0.20) {
    std::cerr << "warning: invalid fraction " << f
              << " is outside [0.05, 0.20]; consider retuning training.denoiser.epochs\n";
  }
  return kExitOk;
}

int cmd_train(const Options& o, const std::string& which) {
  static const std::vector<std::string> known = {"denoiser", "classifier", "ssl_regressor", "gt_regressor", "all"};
  if (std::find(known.begin(), known.end(), which) == known.end()) {
    throw Error(Errc::Config, "unknown model '" + which + "'");
  }
  const RunConfig cfg = resolve_config(o);
  const RunDir dir{cfg.output_dir};
  record_config(dir, cfg);
  const bool all = which == "all";

  if (all || which == "denoiser") train_denoiser_into(dir, cfg);
  if (!all && which == "denoiser") return kExitOk;

  const std::vector<DatasetRecord> dataset = read_dataset(dir);
  if (all || which == "classifier") {
    const ClassifierResult r =
        train_classifier(generated_latents(dataset), generated_labels(dataset), cfg.classifier_train_config());
    write_file(dir.model("classifier"), mlp_to_json(r.model, "classifier"));
    store_metrics(dir, "classifier", classifier_metric_rows(r.metrics));
  }
  if (all || which == "ssl_regressor") {
    const RegressionFit r = fit_ssl_regressor(dataset, cfg.ridge, cfg.split, derive_seed(cfg.seed, "train/ssl_regressor"));
    write_file(dir.model("ssl_regressor"), regressor_to_json(r.model, "ssl_regressor"));
    store_metrics(dir, "ssl_regressor", regression_metric_rows(r.metrics));
  }
  if (all || which == "gt_regressor") {
    const RegressionFit r = fit_gt_regressor(dataset, cfg.ridge, cfg.split, derive_seed(cfg.seed, "train/gt_regressor"));
    write_file(dir.model("gt_regressor"), regressor_to_json(r.model, "gt_regressor"));
    store_metrics(dir, "gt_regressor", regression_metric_rows(r.metrics));
  }
  return kExitOk;
}

std::vector<VariantId> parse_variant_list(const std::string& text) {
  if (text == "all") return {kAllVariants.begin(), kAllVariants.end()};
  std::vector<VariantId> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    const auto v = parse_variant(item);
    if (!v) throw Error(Errc::Config, "unknown variant '" + item + "'");
    if (std::find(out.begin(), out.end(), *v) == out.end()) out.push_back(*v);
  }
  if (out.empty()) throw Error(Errc::Config, "empty variant list");
  return out;
}

int cmd_eval(const Options& o, const std::string& variant_text) {
  const RunConfig cfg = resolve_config(o);
  const std::vector<VariantId> variants = parse_variant_list(variant_text);
  const RunDir dir{cfg.output_dir};
  record_config(dir, cfg);

  bool need_clf = false, need_ssl = false, need_gt = false;
  for (VariantId v : variants) {
    const VariantSpec s = variant_spec(v, cfg.s_clf, cfg.s_reg, cfg.stop_gradient_y);
    need_clf = need_clf || s.guidance.use_classifier;
    need_ssl = need_ssl || s.guidance.use_regressor || s.repair == VariantSpec::Repair::Ssl;
    need_gt = need_gt || s.repair == VariantSpec::Repair::GroundTruth;
  }
  const Mlp denoiser = load_mlp(dir, "denoiser");
  std::optional<Mlp> classifier;
  std::optional<LinearRegressor> ssl, gt;
  if (need_clf) classifier = load_mlp(dir, "classifier");
  if (need_ssl) ssl = load_regressor(dir, "ssl_regressor");
  if (need_gt) gt = load_regressor(dir, "gt_regressor");

  const std::vector<GroundTruth> eval_set = evaluation_ground_truth(cfg);
  if (eval_set.empty()) throw Error(Errc::EmptyPopulation, "n_eval_conditions is 0");

  EvalSettings settings;
  settings.s_clf = cfg.s_clf;
  settings.s_reg = cfg.s_reg;
  settings.stop_gradient_y = cfg.stop_gradient_y;
  settings.repair_iters = cfg.repair_iters;
  settings.mmd = cfg.mmd_config();
  settings.threads = o.threads;
  const EvalModels models{&denoiser, classifier ? &*classifier : nullptr, ssl ? &*ssl : nullptr, gt ? &*gt : nullptr};
  const std::vector<EvalReport> reports =
      run_variants(variants, eval_set, models, cfg.schedule(), settings, evaluation_seed(cfg));

  write_file(dir.report(), report_csv(reports));
  write_file(dir.mmd_scores(), mmd_scores_csv(reports));
  write_file(dir.eval_outcomes(), eval_outcomes_csv(reports));
  for (const EvalReport& r : reports) {
    write_file(dir.histogram(r.variant), r.mmd_hist ? histogram_csv(*r.mmd_hist) : std::string("bin_lo,bin_hi,count\n"));
    std::vector<LatentVector> finals;
    for (const SampleOutcome& s : r.samples) finals.push_back(s.final_latent);
    if (r.variant == VariantId::Baseline) write_latent_matrix(dir.eval_latents("baseline"), finals);
    if (r.variant == VariantId::Full) write_latent_matrix(dir.eval_latents("full"), finals);
  }
  std::vector<LatentVector> gt_latents;
  for (const GroundTruth& g : eval_set) gt_latents.push_back(g.latent);
  write_latent_matrix(dir.eval_latents("gt"), gt_latents);

  std::cout << "MMD is averaged over feasible outputs only.\n" << report_csv(reports);
  return kExitOk;
}

int cmd_pca(const Options& o) {
  const RunConfig cfg = resolve_config(o);
  const RunDir dir{cfg.output_dir};
  std::vector<LatentVector> latents;
  std::vector<SourceTag> tags;
  const std::pair<const char*, SourceTag> sources[] = {
      {"baseline", SourceTag::Baseline}, {"full", SourceTag::SelfRepairing}, {"gt", SourceTag::GroundTruth}};
  for (const auto& [name, tag] : sources) {
    const fs::path p = dir.eval_latents(name);
    if (!fs::exists(p)) throw Error(Errc::Io, "missing " + p.string() + " (run eval with Baseline and Full first)");
    for (const LatentVector& z : read_latent_matrix(p)) {
      latents.push_back(z);
      tags.push_back(tag);
    }
  }
  const PcaProjection p = pca_2d(latents, tags);
  write_file(dir.pca(), pca_csv(p));

  std::array<std::array<double, 2>, 3> centroid{};
  std::array<std::size_t, 3> count{};
  for (std::size_t i = 0; i < p.coords.size(); ++i) {
    const auto k = static_cast<std::size_t>(p.tags[i]);
    centroid[k][0] += p.coords[i][0];
    centroid[k][1] += p.coords[i][1];
    ++count[k];
  }
  for (std::size_t k = 0; k < 3; ++k) {
    for (double& c : centroid[k]) c /= static_cast<double>(std::max<std::size_t>(1, count[k]));
  }
  const double dist = std::hypot(centroid[0][0] - centroid[1][0], centroid[0][1] - centroid[1][1]);
  std::ostringstream os;
  os.precision(10);
  os << "points " << p.coords.size() << '\n';
  os << "explained_pc1 " << p.explained[0] << '\n';
  os << "explained_pc2 " << p.explained[1] << '\n';
  for (std::size_t k = 0; k < 3; ++k) {
    os << "centroid_" << source_tag_name(static_cast<SourceTag>(k)) << ' ' << centroid[k][0] << ' ' << centroid[k][1]
       << '\n';
  }
  os << "centroid_distance_baseline_selfrepairing " << dist << '\n';
  write_file(dir.pca_summary(), os.str());
  std::cout << os.str();
  return kExitOk;
}

int cmd_repair(const std::string& latents_path, const std::string& regressor_path, const std::string& out,
               int iters) {
  if (iters < 1) throw Error(Errc::Config, "--iters must be >= 1");
  if (!fs::exists(latents_path)) throw Error(Errc::Io, "missing latents file " + latents_path);
  if (!fs::exists(regressor_path)) throw Error(Errc::Io, "missing regressor file " + regressor_path);
  const std::vector<LatentVector> rows = read_latent_matrix(latents_path);
  const LinearRegressor reg = regressor_from_json(read_file(regressor_path));

  std::vector<LatentVector> repaired;
  std::ostringstream csv;
  csv << "row,stage,valid,reasons\n";
  std::array<std::size_t, 3> tally{};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const RepairOutcome r = self_repair(rows[i], reg, iters);
    repaired.push_back(r.final_latent());
    ++tally[static_cast<std::size_t>(r.stage)];
    csv << i << ',' << repair_stage_name(r.stage) << ',' << (r.final_report.valid ? 1 : 0) << ','
        << r.final_report.reasons_string() << '\n';
  }
  const fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
  fs::create_directories(dir);
  write_latent_matrix(dir / "repaired.bin", repaired);
  write_file(dir / "repair_outcomes.csv", csv.str());
  for (std::size_t k = 0; k < 3; ++k) {
    std::cout << repair_stage_name(static_cast<RepairStage>(k)) << ' ' << tally[k] << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Guided latent diffusion with kernel-gated self-repair for a miniature CAD language"};
  app.require_subcommand(1);

  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "JSON run config (defaults used when omitted)");
    sub->add_option("--seed", opt.seed, "master seed, overrides the config");
    sub->add_option("--out", opt.out, "run directory, overrides output_dir");
    sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
  };

  CLI::App* gen = app.add_subcommand("gen-dataset", "sample the labelled latent dataset");
  add_common(gen);

  std::string which = "all";
  CLI::App* train = app.add_subcommand("train", "train denoiser, classifier and regressors");
  add_common(train);
  train->add_option("which", which, "denoiser | classifier | ssl_regressor | gt_regressor | all");

  std::string variants = "all";
  CLI::App* eval = app.add_subcommand("eval", "run the variant comparison on held-out conditions");
  add_common(eval);
  eval->add_option("--variants", variants, "comma list of Baseline,Var1..Var5,Full or 'all'");

  CLI::App* pca = app.add_subcommand("pca", "joint 2D PCA of baseline, repaired and ground-truth latents");
  add_common(pca);

  std::string latents_path, regressor_path;
  int iters = 1;
  CLI::App* repair = app.add_subcommand("repair", "apply self-repair to a latent matrix");
  repair->add_option("--latents", latents_path, "LAT1 latent matrix")->required();
  repair->add_option("--regressor", regressor_path, "regressor JSON")->required();
  repair->add_option("--out", opt.out, "output directory");
  repair->add_option("--iters", iters, "maximum repair iterations");
  repair->add_option("--threads", opt.threads, "accepted for symmetry; repair is sequential");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen_dataset(opt);
    if (train->parsed()) return cmd_train(opt, which);
    if (eval->parsed()) return cmd_eval(opt, variants);
    if (pca->parsed()) return cmd_pca(opt);
    if (repair->parsed()) return cmd_repair(latents_path, regressor_path, opt.out, iters);
  } catch (const Error& e) {
    std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
