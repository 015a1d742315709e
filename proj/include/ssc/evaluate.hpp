#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ssc/classifier.hpp"
#include "ssc/config.hpp"
#include "ssc/core.hpp"
#include "ssc/dataset.hpp"
#include "ssc/hungarian.hpp"
#include "ssc/io.hpp"
#include "ssc/model.hpp"
#include "ssc/trainer.hpp"

namespace ssc {

/// Permutation-maximized clustering accuracy: the best mean agreement over
/// all relabelings of the predictions, found as an optimal assignment on the
/// k x k contingency matrix.
inline double clustering_accuracy(const std::vector<int>& pred, const std::vector<int>& truth,
                                  int k) {
  require(pred.size() == truth.size(), "clustering_accuracy: length mismatch");
  require(!pred.empty(), "clustering_accuracy: empty input");
  require(k >= 1, "clustering_accuracy: k must be >= 1");
  Eigen::MatrixXd contingency = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    require(pred[i] >= 0 && pred[i] < k, cat("clustering_accuracy: pred label ", pred[i],
                                             " outside [0,", k, ")"));
    require(truth[i] >= 0 && truth[i] < k, cat("clustering_accuracy: truth label ", truth[i],
                                               " outside [0,", k, ")"));
    contingency(pred[i], truth[i]) += 1.0;
  }
  const std::vector<int> match = solve_assignment_max(contingency);
  double agree = 0.0;
  for (int p = 0; p < k; ++p) agree += contingency(p, match[static_cast<std::size_t>(p)]);
  return agree / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------------------
// Ablation grid

struct AblationVariant {
  SxError error = SxError::kCim;
  SxReg reg = SxReg::kBd;
};

inline std::string variant_name(const AblationVariant& v) {
  return cat(sx_error_name(v.error), "-", sx_reg_name(v.reg));
}

/// The four error/regularizer combinations, in reporting order.
inline std::vector<AblationVariant> ablation_grid() {
  return {{SxError::kCim, SxReg::kBd},
          {SxError::kCim, SxReg::kL2},
          {SxError::kMse, SxReg::kBd},
          {SxError::kMse, SxReg::kL2}};
}

struct ResultRecord {
  std::string dataset;
  std::string variant;
  int fold = 0;
  std::string split;  // "seen" | "unseen"
  double accuracy = std::numeric_limits<double>::quiet_NaN();  // NaN marks a failed fold
  int epochs_run = 0;
  double wall_seconds = 0.0;

  bool failed() const { return !std::isfinite(accuracy); }
};

// ---------------------------------------------------------------------------
// Fold execution

/// Trains the configured variant on the fold's train split and scores both
/// views: seen accuracy from the final pseudo-labels against the train-split
/// truth, unseen accuracy from the classifier head on the held-out split.
/// Ground-truth labels enter only here, after training has returned.
inline std::pair<ResultRecord, ResultRecord> run_fold(const Dataset& ds, const Fold& fold,
                                                      int fold_id, const AblationVariant& v,
                                                      const ExperimentConfig& base,
                                                      bool quiet = true) {
  ExperimentConfig cfg = base;
  cfg.error = v.error;
  cfg.reg = v.reg;
  cfg.seed = Rng::derive(base.seed, 0xAB1A7E00ull + static_cast<std::uint64_t>(fold_id));

  ResultRecord seen{ds.name, variant_name(v), fold_id, "seen"};
  ResultRecord unseen{ds.name, variant_name(v), fold_id, "unseen"};

  const auto t0 = std::chrono::steady_clock::now();
  int epochs = 0;
  try {
    const TrainingView train = make_training_view(ds, fold.train);
    SscModel model = build_model(cfg, per_sample_shape(ds.samples));
    Trainer trainer(model, cfg);
    trainer.set_quiet(quiet);

    TrainResult ae = trainer.pretrain_autoencoder(train);
    epochs += ae.epochs_run;
    require(ae.ok(), "autoencoder pretraining diverged");
    TrainResult dsc = trainer.pretrain_dscnet(train);
    epochs += dsc.epochs_run;
    require(dsc.ok(), "self-expression pretraining diverged");
    TrainResult full = trainer.train_full(train);
    epochs += full.epochs_run;
    require(full.ok(), "full training diverged");

    seen.epochs_run = unseen.epochs_run = epochs;
    seen.accuracy = clustering_accuracy(trainer.pseudo().labels,
                                        select_labels(ds.labels, fold.train), ds.k);
    const auto t1 = std::chrono::steady_clock::now();
    seen.wall_seconds = cfg.fixed_timing ? 0.0 : std::chrono::duration<double>(t1 - t0).count();

    const Tensor test = select_samples(ds.samples, fold.test);
    const std::vector<int> pred = predict_unseen(test, model.encoder, model.classifier);
    unseen.accuracy = clustering_accuracy(pred, select_labels(ds.labels, fold.test), ds.k);
    const auto t2 = std::chrono::steady_clock::now();
    unseen.wall_seconds = cfg.fixed_timing ? 0.0 : std::chrono::duration<double>(t2 - t1).count();
  } catch (const std::exception& e) {
    seen.epochs_run = unseen.epochs_run = epochs;
    if (!quiet)
      std::cerr << "warning: fold " << fold_id << " variant " << variant_name(v)
                << " failed: " << e.what() << "\n";
  }
  return {seen, unseen};
}

/// Runs every variant over every fold of the plan and collects the records.
/// Fold failures are recorded, not fatal.
inline std::vector<ResultRecord> run_grid(const Dataset& ds, const ExperimentConfig& cfg,
                                          const std::vector<AblationVariant>& variants,
                                          bool quiet = true) {
  const FoldPlan plan = stratified_folds(ds.labels, ds.k, cfg.num_folds, cfg.fold_regime,
                                         cfg.train_fraction, Rng::derive(cfg.seed, 0xF01D5ull));
  std::vector<ResultRecord> records;
  for (const AblationVariant& v : variants) {
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
      if (!quiet)
        std::cerr << "running " << variant_name(v) << " fold " << f << "/" << plan.folds.size()
                  << "\n";
      auto [seen, unseen] = run_fold(ds, plan.folds[f], static_cast<int>(f), v, cfg, quiet);
      records.push_back(std::move(seen));
      records.push_back(std::move(unseen));
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// Artifacts

inline void write_results_csv(const std::string& path, const std::vector<ResultRecord>& records) {
  CsvWriter csv(path);
  csv.write_row({"dataset", "variant", "fold", "split", "accuracy", "epochs_run", "wall_seconds"});
  for (const ResultRecord& r : records)
    csv.write_row({r.dataset, r.variant, std::to_string(r.fold), r.split,
                   r.failed() ? "nan" : format_fixed(r.accuracy, 6),
                   std::to_string(r.epochs_run), format_fixed(r.wall_seconds, 3)});
}

inline std::vector<ResultRecord> read_results_csv(const std::string& path) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)),
          cat("results csv ", path, ": missing header"));
  require(line == "dataset,variant,fold,split,accuracy,epochs_run,wall_seconds",
          cat("results csv ", path, ": unexpected header '", line, "'"));
  std::vector<ResultRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    require(fields.size() == 7, cat("results csv ", path, ":", lineno, ": expected 7 fields"));
    ResultRecord r;
    r.dataset = fields[0];
    r.variant = fields[1];
    r.fold = std::stoi(fields[2]);
    r.split = fields[3];
    r.accuracy = (fields[4] == "nan") ? std::numeric_limits<double>::quiet_NaN()
                                      : std::stod(fields[4]);
    r.epochs_run = std::stoi(fields[5]);
    r.wall_seconds = std::stod(fields[6]);
    out.push_back(std::move(r));
  }
  return out;
}

/// Markdown report: one table per dataset, one row per (variant, split) group
/// with mean and sample standard deviation across folds. Rendering is a pure
/// function of the records, so regenerating from the same CSV is
/// byte-identical.
inline std::string render_report(const std::vector<ResultRecord>& records) {
  require(!records.empty(), "render_report: no records");

  std::vector<std::string> datasets;
  for (const ResultRecord& r : records)
    if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end())
      datasets.push_back(r.dataset);

  std::ostringstream md;
  md << "# Results\n\n";
  md << "Accuracy is permutation-maximized clustering accuracy. Mean and stddev are\n"
        "taken across folds; stddev uses the sample (N-1) denominator. Failed folds\n"
        "are excluded from both and counted in the failures column.\n";

  bool any_single = false;
  for (const std::string& ds : datasets) {
    md << "\n## " << ds << "\n\n";
    md << "| variant | split | folds | mean accuracy | stddev | failures |\n";
    md << "|---|---|---:|---:|---:|---:|\n";

    std::vector<std::pair<std::string, std::string>> groups;
    for (const ResultRecord& r : records) {
      if (r.dataset != ds) continue;
      const std::pair<std::string, std::string> g{r.variant, r.split};
      if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    }
    for (const auto& [variant, split] : groups) {
      std::vector<double> acc;
      int total = 0, failures = 0;
      for (const ResultRecord& r : records) {
        if (r.dataset != ds || r.variant != variant || r.split != split) continue;
        ++total;
        if (r.failed())
          ++failures;
        else
          acc.push_back(r.accuracy);
      }
      double mean = 0.0, sd = 0.0;
      if (!acc.empty()) {
        for (double a : acc) mean += a;
        mean /= static_cast<double>(acc.size());
        if (acc.size() >= 2) {
          for (double a : acc) sd += (a - mean) * (a - mean);
          sd = std::sqrt(sd / static_cast<double>(acc.size() - 1));
        } else {
          any_single = true;
        }
      }
      md << "| " << variant << " | " << split << " | " << total << " | "
         << (acc.empty() ? std::string("n/a") : format_fixed(mean, 5)) << " | "
         << (acc.empty() ? std::string("n/a") : format_fixed(sd, 5)) << " | " << failures
         << " |\n";
    }
  }
  if (any_single)
    md << "\nGroups with a single successful record report a standard deviation of 0.\n";
  return md.str();
}

}  // namespace ssc
