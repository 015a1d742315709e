// Command-line front end for the subspace clustering pipeline.
//
// Exit codes: 0 success, 1 user error (bad arguments, missing or invalid
// inputs), 2 internal failure. Every run that produces files also writes a
// manifest.json (config hash, seed, library versions) beside them. The
// SSC_OUT_DIR environment variable overrides the output directory from both
// the config and the --out flag.

#include <CLI11.hpp>
#include <json.hpp>
#include <png.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <ssc/ssc.hpp>

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_flag;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  auto* opt = cmd->add_option("-c,--config", args.config_path, "experiment config file");
  if (config_required) opt->required();
  cmd->add_option("-s,--set", args.overrides, "override a config key, key=value (repeatable)");
  cmd->add_option("-o,--out", args.out_flag, "output directory (default: config out_dir)");
  cmd->add_flag("-q,--quiet", args.quiet, "suppress progress output");
}

std::string resolve_out_dir(const CommonArgs& args, const std::string& cfg_out) {
  if (const char* env = std::getenv("SSC_OUT_DIR"); env != nullptr && env[0] != '\0')
    return env;
  if (!args.out_flag.empty()) return args.out_flag;
  return cfg_out;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json version_block() {
  return {{"pipeline", ssc::kVersion},
          {"eigen", ssc::cat(EIGEN_WORLD_VERSION, ".", EIGEN_MAJOR_VERSION, ".",
                             EIGEN_MINOR_VERSION)},
          {"libpng", PNG_LIBPNG_VER_STRING},
          {"nlohmann_json", ssc::cat(NLOHMANN_JSON_VERSION_MAJOR, ".", NLOHMANN_JSON_VERSION_MINOR,
                                     ".", NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", CLI11_VERSION}};
}

void write_manifest(const std::string& dir, const std::string& command,
                    const ssc::ExperimentConfig* cfg) {
  nlohmann::json m;
  m["command"] = command;
  m["config_hash"] = cfg ? hash_hex(cfg->config_hash) : "-";
  m["seed"] = cfg ? cfg->seed : 0;
  m["versions"] = version_block();
  ssc::write_text_file((fs::path(dir) / "manifest.json").string(), m.dump(2) + "\n");
}

struct LoadedRun {
  ssc::ExperimentConfig cfg;
  std::string out;
};

LoadedRun start_run(const CommonArgs& args, const std::string& command) {
  LoadedRun r;
  r.cfg = ssc::load_config(args.config_path, args.overrides);
  r.out = resolve_out_dir(args, r.cfg.out_dir);
  ssc::ensure_dir(r.out);
  write_manifest(r.out, command, &r.cfg);
  return r;
}

std::string model_path(const std::string& dir) { return (fs::path(dir) / "model.bin").string(); }
std::string c_path(const std::string& dir) { return (fs::path(dir) / "c.bin").string(); }

void write_labels_csv(const std::string& path, const std::vector<int>& labels) {
  ssc::CsvWriter csv(path);
  csv.write_row({"index", "label"});
  for (std::size_t i = 0; i < labels.size(); ++i)
    csv.write_row({std::to_string(i), std::to_string(labels[i])});
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_gen_synth(const CommonArgs& args) {
  LoadedRun run = start_run(args, "gen-synth");
  const ssc::Dataset ds = ssc::load_dataset(run.cfg);

  const std::string samples_path = (fs::path(run.out) / "samples.idx").string();
  const std::string labels_path = (fs::path(run.out) / "labels.idx").string();
  if (run.cfg.dataset == "synth-images") {
    ssc::Tensor bytes = ds.samples;
    for (std::size_t i = 0; i < bytes.numel(); ++i) bytes[i] = std::round(bytes[i] * 255.0);
    ssc::write_idx_u8(samples_path, bytes);
  } else {
    ssc::write_idx_f64(samples_path, ds.samples);
  }
  ssc::Tensor lab({ds.labels.size()}, 0.0);
  for (std::size_t i = 0; i < ds.labels.size(); ++i) lab[i] = ds.labels[i];
  ssc::write_idx_u8(labels_path, lab);

  std::cout << "wrote " << ds.size() << " samples (" << ds.k << " classes) to " << samples_path
            << " and " << labels_path << "\n";
  return 0;
}

int cmd_pretrain_ae(const CommonArgs& args) {
  LoadedRun run = start_run(args, "pretrain-ae");
  const ssc::Dataset ds = ssc::load_dataset(run.cfg);
  ssc::SscModel model = ssc::build_model(run.cfg, ssc::per_sample_shape(ds.samples));

  ssc::Trainer trainer(model, run.cfg);
  trainer.set_quiet(args.quiet);
  const ssc::TrainResult r = trainer.pretrain_autoencoder(ssc::make_training_view(ds));
  ssc::require(r.ok(), "autoencoder pretraining diverged; no checkpoint written");

  ssc::save_model(model_path(run.out), model);
  ssc::write_train_log((fs::path(run.out) / "train_log_ae.csv").string(), r.log);
  std::cout << "autoencoder: " << r.epochs_run << " epochs, loss " << r.initial_loss << " -> "
            << r.final_loss << " (" << r.stop_reason << "), checkpoint " << model_path(run.out)
            << "\n";
  return 0;
}

int cmd_pretrain_dsc(const CommonArgs& args, const std::string& checkpoint) {
  LoadedRun run = start_run(args, "pretrain-dsc");
  const ssc::Dataset ds = ssc::load_dataset(run.cfg);
  const std::string in_model = checkpoint.empty() ? model_path(run.out) : checkpoint;
  ssc::SscModel model = ssc::load_model(in_model);

  ssc::Trainer trainer(model, run.cfg);
  trainer.set_quiet(args.quiet);
  const ssc::TrainResult r = trainer.pretrain_dscnet(ssc::make_training_view(ds));
  ssc::require(r.ok(), "self-expression pretraining diverged; no checkpoint written");

  ssc::save_model(model_path(run.out), model);
  ssc::save_c_matrix(c_path(run.out), model.C);
  ssc::write_train_log((fs::path(run.out) / "train_log_dsc.csv").string(), r.log);
  std::cout << "self-expression pretrain: " << r.epochs_run << " epochs, loss " << r.initial_loss
            << " -> " << r.final_loss << " (" << r.stop_reason << "), checkpoints "
            << model_path(run.out) << ", " << c_path(run.out) << "\n";
  return 0;
}

int cmd_train(const CommonArgs& args, const std::string& checkpoint, const std::string& c_in) {
  LoadedRun run = start_run(args, "train");
  const ssc::Dataset ds = ssc::load_dataset(run.cfg);
  const std::string in_model = checkpoint.empty() ? model_path(run.out) : checkpoint;
  const std::string in_c = c_in.empty() ? c_path(run.out) : c_in;
  ssc::SscModel model = ssc::load_model(in_model);
  model.C = ssc::load_c_matrix(in_c);

  ssc::Trainer trainer(model, run.cfg);
  trainer.set_quiet(args.quiet);
  const ssc::TrainResult r = trainer.train_full(ssc::make_training_view(ds));
  ssc::require(r.ok(), "full training diverged; no checkpoint written");

  ssc::save_model(model_path(run.out), model);
  ssc::save_c_matrix(c_path(run.out), model.C);
  ssc::write_train_log((fs::path(run.out) / "train_log_full.csv").string(), r.log);
  write_labels_csv((fs::path(run.out) / "pseudo_labels.csv").string(),
                   trainer.pseudo().labels);

  std::cout << "full training: " << r.epochs_run << " epochs, loss " << r.initial_loss << " -> "
            << r.final_loss << " (" << r.stop_reason << "), " << r.refinement_epochs.size()
            << " pseudo-label refinements\n";
  return 0;
}

int cmd_cluster(const CommonArgs& args, const std::string& c_in) {
  LoadedRun run = start_run(args, "cluster");
  const std::string in_c = c_in.empty() ? c_path(run.out) : c_in;
  const Eigen::MatrixXd C = ssc::load_c_matrix(in_c);

  const ssc::PseudoLabelState st =
      ssc::make_pseudo_labels(C, run.cfg.k, run.cfg.pp, ssc::Rng::derive(run.cfg.seed, 0x50Cull),
                              run.cfg.eig_options());
  const std::string out_csv = (fs::path(run.out) / "cluster_labels.csv").string();
  write_labels_csv(out_csv, st.labels);

  std::vector<int> sizes(static_cast<std::size_t>(run.cfg.k), 0);
  for (int l : st.labels) ++sizes[static_cast<std::size_t>(l)];
  std::cout << "clustered " << st.labels.size() << " samples into sizes";
  for (int s : sizes) std::cout << " " << s;
  std::cout << ", labels in " << out_csv << "\n";
  return 0;
}

// Collects (display name, sample tensor) rows for prediction from an image
// directory, a single image, an IDX tensor, or a CSV matrix.
std::pair<std::vector<std::string>, ssc::Tensor> load_prediction_input(const std::string& input) {
  std::vector<std::string> names;
  if (fs::is_directory(input)) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(input)) {
      const std::string ext = e.path().extension().string();
      if (e.is_regular_file() && (ext == ".png" || ext == ".pgm"))
        files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    ssc::require(!files.empty(), ssc::cat("no .png or .pgm files in ", input));
    std::vector<ssc::Tensor> imgs;
    for (const std::string& f : files) {
      ssc::Tensor img = fs::path(f).extension() == ".pgm" ? ssc::read_pgm(f)
                                                          : ssc::read_png_gray(f);
      if (!imgs.empty())
        ssc::require(img.same_shape(imgs.front()),
                     ssc::cat(f, ": size ", img.shape_string(), " differs from first image"));
      imgs.push_back(std::move(img));
      names.push_back(fs::path(f).filename().string());
    }
    const std::size_t h = imgs.front().dim(0), w = imgs.front().dim(1);
    ssc::Tensor batch({imgs.size(), 1, h, w}, 0.0);
    for (std::size_t i = 0; i < imgs.size(); ++i)
      for (std::size_t p = 0; p < h * w; ++p) batch[i * h * w + p] = imgs[i][p] / 255.0;
    return {names, batch};
  }

  const std::string ext = fs::path(input).extension().string();
  if (ext == ".png" || ext == ".pgm") {
    ssc::Tensor img = (ext == ".pgm") ? ssc::read_pgm(input) : ssc::read_png_gray(input);
    ssc::Tensor batch({std::size_t{1}, std::size_t{1}, img.dim(0), img.dim(1)}, 0.0);
    for (std::size_t p = 0; p < img.numel(); ++p) batch[p] = img[p] / 255.0;
    return {{fs::path(input).filename().string()}, batch};
  }
  if (ext == ".csv") {
    const Eigen::MatrixXd m = ssc::load_csv_matrix(input);
    ssc::Tensor batch({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                      0.0);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        batch[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
    for (Eigen::Index i = 0; i < m.rows(); ++i) names.push_back(ssc::cat("row", i));
    return {names, batch};
  }
  ssc::Tensor t = ssc::load_idx(input);
  ssc::require(t.rank() >= 2, ssc::cat("idx ", input, ": need batched payload"));
  if (t.rank() == 3) t = t.reshaped({t.dim(0), std::size_t{1}, t.dim(1), t.dim(2)});
  for (std::size_t i = 0; i < t.dim(0); ++i) names.push_back(ssc::cat("row", i));
  return {names, t};
}

int cmd_predict(const std::string& checkpoint, const std::string& input,
                const std::string& output) {
  ssc::SscModel model = ssc::load_model(checkpoint);
  ssc::require(!model.classifier.empty(),
               ssc::cat("checkpoint ", checkpoint,
                        " has no classifier head; run the train stage first"));

  auto [names, batch] = load_prediction_input(input);
  ssc::require(ssc::per_sample_shape(batch) == model.input_shape,
               ssc::cat("input sample shape ", batch.shape_string(),
                        " does not match the model input"));
  const std::vector<int> pred = ssc::predict_unseen(batch, model.encoder, model.classifier);

  std::string csv = ssc::csv_line({"file", "class"});
  for (std::size_t i = 0; i < names.size(); ++i)
    csv += ssc::csv_line({names[i], std::to_string(pred[i])});
  if (output.empty()) {
    std::cout << csv;
  } else {
    ssc::write_text_file(output, csv);
    write_manifest(fs::path(output).parent_path().string().empty()
                       ? "."
                       : fs::path(output).parent_path().string(),
                   "predict", nullptr);
    std::cout << "wrote " << names.size() << " predictions to " << output << "\n";
  }
  return 0;
}

int run_grid_command(const CommonArgs& args, const std::string& command,
                     const std::vector<ssc::AblationVariant>& variants) {
  LoadedRun run = start_run(args, command);
  const ssc::Dataset ds = ssc::load_dataset(run.cfg);
  const std::vector<ssc::ResultRecord> records =
      ssc::run_grid(ds, run.cfg, variants, args.quiet);

  const std::string csv_path = (fs::path(run.out) / "results.csv").string();
  const std::string md_path = (fs::path(run.out) / "report.md").string();
  ssc::write_results_csv(csv_path, records);
  ssc::write_text_file(md_path, ssc::render_report(records));
  std::cout << "wrote " << records.size() << " records to " << csv_path << " and " << md_path
            << "\n";
  return 0;
}

int cmd_report(const std::string& input, std::string output) {
  const std::vector<ssc::ResultRecord> records = ssc::read_results_csv(input);
  ssc::require(!records.empty(), ssc::cat("results csv ", input, ": no records"));
  if (output.empty()) output = (fs::path(input).parent_path() / "report.md").string();
  ssc::write_text_file(output, ssc::render_report(records));
  std::cout << "wrote " << output << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subspace clustering with self-expressive representations"};
  app.require_subcommand(1);

  std::function<int()> action;

  CommonArgs gen_args;
  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic dataset as IDX files");
  add_common(gen, gen_args);
  gen->callback([&] { action = [&] { return cmd_gen_synth(gen_args); }; });

  CommonArgs ae_args;
  auto* ae = app.add_subcommand("pretrain-ae", "stage one: autoencoder pretraining");
  add_common(ae, ae_args);
  ae->callback([&] { action = [&] { return cmd_pretrain_ae(ae_args); }; });

  CommonArgs dsc_args;
  std::string dsc_checkpoint;
  auto* dsc = app.add_subcommand("pretrain-dsc",
                                 "stage two: self-expression pretraining from an AE checkpoint");
  add_common(dsc, dsc_args);
  dsc->add_option("--checkpoint", dsc_checkpoint, "input model (default: <out>/model.bin)");
  dsc->callback([&] { action = [&] { return cmd_pretrain_dsc(dsc_args, dsc_checkpoint); }; });

  CommonArgs train_args;
  std::string train_checkpoint, train_c;
  auto* train = app.add_subcommand("train", "stage three: full model with dual self-supervision");
  add_common(train, train_args);
  train->add_option("--checkpoint", train_checkpoint, "input model (default: <out>/model.bin)");
  train->add_option("--c-matrix", train_c, "input C matrix (default: <out>/c.bin)");
  train->callback(
      [&] { action = [&] { return cmd_train(train_args, train_checkpoint, train_c); }; });

  CommonArgs cluster_args;
  std::string cluster_c;
  auto* cluster = app.add_subcommand("cluster", "spectral clustering of a saved C matrix");
  add_common(cluster, cluster_args);
  cluster->add_option("--c-matrix", cluster_c, "input C matrix (default: <out>/c.bin)");
  cluster->callback([&] { action = [&] { return cmd_cluster(cluster_args, cluster_c); }; });

  std::string pred_checkpoint, pred_input, pred_output;
  auto* predict = app.add_subcommand("predict", "classify unseen samples with a trained head");
  predict->add_option("--checkpoint", pred_checkpoint, "trained model checkpoint")->required();
  predict->add_option("--input", pred_input, "image directory, image, .idx, or .csv")->required();
  predict->add_option("--output", pred_output, "output CSV (default: stdout)");
  predict->callback(
      [&] { action = [&] { return cmd_predict(pred_checkpoint, pred_input, pred_output); }; });

  CommonArgs eval_args;
  auto* evaluate = app.add_subcommand(
      "evaluate", "run the configured variant over all folds; write results and report");
  add_common(evaluate, eval_args);
  evaluate->callback([&] {
    action = [&] {
      ssc::ExperimentConfig probe = ssc::load_config(eval_args.config_path, eval_args.overrides);
      return run_grid_command(eval_args, "evaluate", {{probe.error, probe.reg}});
    };
  });

  CommonArgs ablate_args;
  auto* ablate = app.add_subcommand(
      "ablate", "run all four error/regularizer variants over all folds");
  add_common(ablate, ablate_args);
  ablate->callback(
      [&] { action = [&] { return run_grid_command(ablate_args, "ablate", ssc::ablation_grid()); }; });

  std::string report_input, report_output;
  auto* report = app.add_subcommand("report", "regenerate report.md from a results.csv");
  report->add_option("--input", report_input, "results.csv path")->required();
  report->add_option("--output", report_output, "report path (default: sibling report.md)");
  report->callback([&] { action = [&] { return cmd_report(report_input, report_output); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    return action();
  } catch (const ssc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
