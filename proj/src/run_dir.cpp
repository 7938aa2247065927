#include "cadrepair/run_dir.h"

#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "cadrepair/errors.h"
#include "cadrepair/rng.h"

namespace cadrepair {

namespace {

using ojson = nlohmann::ordered_json;

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::string pairs_csv(std::span<const LatentPair> pairs, std::size_t target_offset) {
  std::ostringstream os;
  os << "input_row,target_row\n";
  for (const LatentPair& p : pairs) os << p.input_row << ',' << p.target_row + target_offset << '\n';
  return os.str();
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "missing file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(Errc::Io, "short write to " + path.string());
}

std::vector<GroundTruth> training_ground_truth(const RunConfig& cfg) {
  return gen_ground_truth(cfg.n_conditions, derive_seed(cfg.seed, "train/ground_truth"));
}

std::vector<GroundTruth> evaluation_ground_truth(const RunConfig& cfg) {
  if (cfg.n_eval_conditions == 0) return {};
  return gen_ground_truth(cfg.n_eval_conditions, derive_seed(cfg.seed, "eval/ground_truth"));
}

std::uint64_t dataset_seed(const RunConfig& cfg) { return derive_seed(cfg.seed, "dataset"); }
std::uint64_t evaluation_seed(const RunConfig& cfg) { return derive_seed(cfg.seed, "eval"); }

void write_dataset(const RunDir& dir, std::span<const DatasetRecord> dataset) {
  std::ostringstream cond;
  std::ostringstream labels;
  labels << "condition_id,seed,valid,reasons\n";
  std::vector<LatentVector> rows;
  for (const DatasetRecord& rec : dataset) {
    ojson j;
    j["condition_id"] = rec.condition_id;
    j["condition"] = rec.condition.values;
    j["sequence"] = ojson::parse(serialize_sequence(rec.ground_truth));
    cond << j.dump() << '\n';
    for (const Generation& g : rec.generations) {
      labels << rec.condition_id << ',' << g.seed << ',' << (g.report.valid ? 1 : 0) << ','
             << g.report.reasons_string() << '\n';
      rows.push_back(g.latent);
    }
  }
  const std::size_t generated = rows.size();
  for (const DatasetRecord& rec : dataset) rows.push_back(rec.ground_truth_latent);

  write_file(dir.conditions(), cond.str());
  write_file(dir.labels(), labels.str());
  if (dir.latents().has_parent_path()) fs::create_directories(dir.latents().parent_path());
  write_latent_matrix(dir.latents(), rows);
  write_file(dir.pairs_ssl(), pairs_csv(build_ssl_pairs(dataset), 0));
  write_file(dir.pairs_gt(), pairs_csv(build_gt_pairs(dataset), generated));
}

std::vector<DatasetRecord> read_dataset(const RunDir& dir) {
  const std::vector<std::string> cond_lines = lines_of(read_file(dir.conditions()));
  const std::vector<std::string> label_lines = lines_of(read_file(dir.labels()));
  const std::vector<LatentVector> rows = read_latent_matrix(dir.latents());

  const std::size_t n = cond_lines.size();
  if (n == 0) throw Error(Errc::EmptyDataset, "conditions.jsonl is empty");
  if (rows.size() % n != 0 || rows.size() / n < 2) {
    throw Error(Errc::MalformedRecord, "latents.bin row count does not match conditions.jsonl");
  }
  const std::size_t generations = rows.size() / n - 1;
  if (label_lines.size() != n * generations + 1) {
    throw Error(Errc::MalformedRecord, "labels.csv row count does not match latents.bin");
  }

  std::vector<DatasetRecord> out(n);
  for (std::size_t c = 0; c < n; ++c) {
    DatasetRecord& rec = out[c];
    try {
      const ojson j = ojson::parse(cond_lines[c]);
      rec.condition_id = j.at("condition_id").get<std::size_t>();
      const auto values = j.at("condition").get<std::vector<double>>();
      if (values.size() != kConditionDim) throw Error(Errc::MalformedRecord, "condition width mismatch");
      std::copy(values.begin(), values.end(), rec.condition.values.begin());
      rec.ground_truth = parse_sequence(j.at("sequence").dump(), c + 1);
    } catch (const ojson::exception& e) {
      throw Error(Errc::MalformedRecord, "conditions.jsonl line " + std::to_string(c + 1) + ": " + e.what());
    }
    if (rec.condition_id != c) throw Error(Errc::MalformedRecord, "conditions.jsonl is not in condition order");
    rec.ground_truth_latent = rows[n * generations + c];
    if (rec.ground_truth_latent != round_to_float(encode(rec.ground_truth))) {
      throw Error(Errc::MalformedRecord, "ground-truth latent disagrees with its sequence for condition " +
                                             std::to_string(c));
    }
    rec.generations.resize(generations);
    for (std::size_t g = 0; g < generations; ++g) {
      const std::size_t row = generation_row(c, g, generations);
      const std::vector<std::string> f = split(label_lines[row + 1], ',');
      if (f.size() != 4 || std::stoull(f[0]) != c) {
        throw Error(Errc::MalformedRecord, "labels.csv line " + std::to_string(row + 2) + " is malformed");
      }
      Generation& gen = rec.generations[g];
      gen.seed = std::stoull(f[1]);
      gen.latent = rows[row];
      gen.sequence = decode(gen.latent);
      gen.report = kernel_check(gen.sequence);
      if ((gen.report.valid ? "1" : "0") != f[2] || gen.report.reasons_string() != f[3]) {
        throw Error(Errc::MalformedRecord, "labels.csv line " + std::to_string(row + 2) + " disagrees with the kernel");
      }
    }
  }
  return out;
}

std::string dataset_summary_text(std::span<const DatasetRecord> dataset) {
  const DatasetSummary s = summarize(dataset);
  std::map<std::string, std::size_t> reasons;
  std::size_t all_invalid_conditions = 0;
  for (const DatasetRecord& rec : dataset) {
    bool any_valid = false;
    for (const Generation& g : rec.generations) {
      any_valid = any_valid || g.report.valid;
      for (InvalidReason r : g.report.reasons) ++reasons[std::string(reason_name(r))];
    }
    if (!any_valid) ++all_invalid_conditions;
  }
  std::ostringstream os;
  os.precision(6);
  os << "ground_truth_latents " << s.conditions << '\n';
  os << "generated_latents " << s.generated << '\n';
  os << "valid " << s.valid << '\n';
  os << "invalid " << s.invalid << '\n';
  os << "invalid_fraction " << s.invalid_fraction() << '\n';
  os << "ssl_pairs " << build_ssl_pairs(dataset).size() << '\n';
  os << "gt_pairs " << build_gt_pairs(dataset).size() << '\n';
  os << "conditions_without_valid_generation " << all_invalid_conditions << '\n';
  for (const auto& [name, count] : reasons) os << "reason " << name << ' ' << count << '\n';
  return os.str();
}

std::string upsert_metrics_csv(const std::string& existing, const std::string& model,
                               const std::vector<std::pair<std::string, double>>& metrics) {
  static const std::vector<std::string> order = {"denoiser", "classifier", "ssl_regressor", "gt_regressor"};
  std::map<std::string, std::vector<std::string>> by_model;
  const std::vector<std::string> lines = lines_of(existing);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto comma = lines[i].find(',');
    if (comma == std::string::npos) continue;
    const std::string name = lines[i].substr(0, comma);
    if (name != model) by_model[name].push_back(lines[i]);
  }
  for (const auto& [metric, value] : metrics) by_model[model].push_back(model + "," + metric + "," + format_double(value));

  std::ostringstream os;
  os << "model,metric,value\n";
  for (const std::string& name : order) {
    for (const std::string& line : by_model[name]) os << line << '\n';
    by_model.erase(name);
  }
  for (const auto& [name, rows] : by_model) {
    for (const std::string& line : rows) os << line << '\n';
  }
  return os.str();
}

std::vector<std::pair<std::string, double>> classifier_metric_rows(const ClassifierMetrics& m) {
  auto d = [](std::size_t v) { return static_cast<double>(v); };
  return {{"accuracy", m.accuracy},
          {"balanced_accuracy", m.balanced_accuracy},
          {"valid_precision", m.valid.precision},
          {"valid_recall", m.valid.recall},
          {"valid_f1", m.valid.f1},
          {"valid_support", d(m.valid.support)},
          {"invalid_precision", m.invalid.precision},
          {"invalid_recall", m.invalid.recall},
          {"invalid_f1", m.invalid.f1},
          {"invalid_support", d(m.invalid.support)},
          {"confusion_invalid_as_invalid", d(m.confusion[0][0])},
          {"confusion_invalid_as_valid", d(m.confusion[0][1])},
          {"confusion_valid_as_invalid", d(m.confusion[1][0])},
          {"confusion_valid_as_valid", d(m.confusion[1][1])},
          {"n_train", d(m.n_train)},
          {"n_test", d(m.n_test)}};
}

std::vector<std::pair<std::string, double>> regression_metric_rows(const RegressionMetrics& m) {
  return {{"train_r2", m.train_r2},
          {"train_mse", m.train_mse},
          {"test_r2", m.test_r2},
          {"test_mse", m.test_mse},
          {"n_train", static_cast<double>(m.n_train)},
          {"n_test", static_cast<double>(m.n_test)}};
}

std::string eval_outcomes_csv(std::span<const EvalReport> reports) {
  std::ostringstream os;
  os << "condition_id,variant,sample_seed,initial_hash,stage,repair_attempted,valid\n";
  for (const EvalReport& r : reports) {
    for (const SampleOutcome& s : r.samples) {
      os << s.condition_id << ',' << variant_name(r.variant) << ',' << s.sample_seed << ',' << s.initial_hash << ','
         << repair_stage_name(s.stage) << ',' << (s.repair_attempted ? 1 : 0) << ',' << (s.valid ? 1 : 0) << '\n';
    }
  }
  return os.str();
}

}  // namespace cadrepair
