#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "ssc/evaluate.hpp"
#include "ssc/model.hpp"
#include "ssc/trainer.hpp"

using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

// Shallow feature-vector pipeline: flatten encoder, identity decoder.
ssc::ExperimentConfig shallow_config() {
  ssc::ExperimentConfig cfg;
  cfg.seed = 2;
  cfg.k = 2;
  cfg.d = 2;
  cfg.error = ssc::SxError::kMse;
  cfg.reg = ssc::SxReg::kL2;
  cfg.weights.lambda1 = 0.0;  // depth-zero autoencoder reconstructs exactly
  cfg.weights.lambda2 = 1.0;
  cfg.weights.gamma = 0.02;
  cfg.optimizer = ssc::OptimizerKind::kAdam;
  cfg.lr_start = 1e-2;
  cfg.lr_min = 1e-6;
  cfg.early_stop_patience = 0;
  cfg.fixed_timing = true;
  return cfg;
}

ssc::Dataset shallow_data(std::uint64_t seed, double noise = 0.0) {
  return ssc::synth_subspaces(2, 2, 10, 12, noise, 0.0, 0.0, seed);
}

std::vector<double> copy_params(std::vector<ssc::ParamRef> refs) {
  std::vector<double> flat;
  for (const ssc::ParamRef& r : refs) flat.insert(flat.end(), r.value, r.value + r.count);
  return flat;
}

struct ScratchDir {
  fs::path path;
  explicit ScratchDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~ScratchDir() { fs::remove_all(path); }
  std::string file(const std::string& leaf) const { return (path / leaf).string(); }
};

}  // namespace

TEST_CASE("zero epoch budget leaves the model untouched", "[trainer]") {
  const ssc::Dataset ds = ssc::synth_images(2, 4, 8, 31);
  ssc::ExperimentConfig cfg = shallow_config();
  cfg.conv_channels = {3};
  cfg.conv_kernels = {3};
  cfg.conv_strides = {2};
  cfg.ae_epochs = 0;

  ssc::SscModel model = ssc::build_model(cfg, ssc::per_sample_shape(ds.samples));
  const std::vector<double> before = copy_params(model.autoencoder_params());

  ssc::Trainer trainer(model, cfg);
  trainer.set_quiet(true);
  const ssc::TrainResult r = trainer.pretrain_autoencoder(ssc::make_training_view(ds));
  REQUIRE(r.epochs_run == 0);
  REQUIRE(r.log.empty());
  REQUIRE(r.stop_reason == "epoch-budget");
  REQUIRE(std::isnan(r.final_loss));

  const std::vector<double> after = copy_params(model.autoencoder_params());
  REQUIRE(before.size() == after.size());
  REQUIRE(std::memcmp(before.data(), after.data(), before.size() * sizeof(double)) == 0);
}

TEST_CASE("autoencoder pretraining halves the reconstruction loss", "[trainer][slow]") {
  const ssc::Dataset ds = ssc::synth_images(2, 6, 8, 5);
  ssc::ExperimentConfig cfg = shallow_config();
  cfg.conv_channels = {4};
  cfg.conv_kernels = {3};
  cfg.conv_strides = {2};
  cfg.ae_epochs = 150;
  cfg.lr_start = 1e-2;

  ssc::SscModel model = ssc::build_model(cfg, ssc::per_sample_shape(ds.samples));
  ssc::Trainer trainer(model, cfg);
  trainer.set_quiet(true);
  const ssc::TrainResult r = trainer.pretrain_autoencoder(ssc::make_training_view(ds));

  REQUIRE(r.ok());
  REQUIRE(r.epochs_run == 150);
  REQUIRE(r.initial_loss > 0.0);
  REQUIRE(r.final_loss < 0.5 * r.initial_loss);
  REQUIRE(r.log.size() == 150);
  for (const ssc::TrainLogEntry& e : r.log) {
    REQUIRE(e.stage == "ae");
    REQUIRE(e.total == e.parts.rec);     // stage one is reconstruction only
    REQUIRE(e.wall_seconds == 0.0);      // fixed timing for reproducible logs
  }
  REQUIRE(r.log.back().total == r.final_loss);
}

TEST_CASE("training is seed-deterministic", "[trainer]") {
  const ssc::Dataset ds = ssc::synth_images(2, 4, 8, 7);
  ssc::ExperimentConfig cfg = shallow_config();
  cfg.conv_channels = {3};
  cfg.conv_kernels = {3};
  cfg.conv_strides = {2};
  cfg.ae_epochs = 10;

  auto run = [&] {
    ssc::SscModel model = ssc::build_model(cfg, ssc::per_sample_shape(ds.samples));
    ssc::Trainer trainer(model, cfg);
    trainer.set_quiet(true);
    const ssc::TrainResult r = trainer.pretrain_autoencoder(ssc::make_training_view(ds));
    return std::pair{r, copy_params(model.autoencoder_params())};
  };
  const auto [ra, pa] = run();
  const auto [rb, pb] = run();
  REQUIRE(ra.final_loss == rb.final_loss);  // bitwise, not approximate
  REQUIRE(pa.size() == pb.size());
  REQUIRE(std::memcmp(pa.data(), pb.data(), pa.size() * sizeof(double)) == 0);
  for (std::size_t i = 0; i < ra.log.size(); ++i) REQUIRE(ra.log[i].total == rb.log[i].total);
}

TEST_CASE("a zero self-expression weight silences C and the regularizer", "[trainer]") {
  // The reconstruction path runs through ZC by architecture, so the second
  // stage cannot literally equal stage one; what the degenerate weights do
  // guarantee is that the self-expression term and gamma have zero influence.
  const ssc::Dataset ds = shallow_data(41);
  ssc::ExperimentConfig cfg = shallow_config();
  cfg.weights.lambda1 = 1.0;
  cfg.weights.lambda2 = 0.0;
  cfg.dsc_epochs = 12;

  auto run = [&](double gamma) {
    ssc::ExperimentConfig c = cfg;
    c.weights.gamma = gamma;
    ssc::SscModel model = ssc::build_model(c, ssc::per_sample_shape(ds.samples));
    ssc::Trainer trainer(model, c);
    trainer.set_quiet(true);
    const ssc::TrainResult r = trainer.pretrain_dscnet(ssc::make_training_view(ds));
    return std::pair{r, model.C};
  };
  const auto [ra, ca] = run(0.0);
  const auto [rb, cb] = run(7.5);
  REQUIRE(ra.log.size() == rb.log.size());
  for (std::size_t i = 0; i < ra.log.size(); ++i) {
    REQUIRE(ra.log[i].total == rb.log[i].total);  // gamma is invisible at lambda2 = 0
    REQUIRE(ra.log[i].total == ra.log[i].parts.rec);  // pure reconstruction objective
  }
  REQUIRE(std::memcmp(ca.data(), cb.data(), std::size_t(ca.size()) * sizeof(double)) == 0);
}

TEST_CASE("dsc training curve is non-increasing under the plateau schedule", "[trainer]") {
  const ssc::Dataset ds = ssc::synth_subspaces(3, 2, 12, 8, 0.01, 0.0, 0.0, 13);
  ssc::ExperimentConfig cfg = shallow_config();
  cfg.k = 3;
  cfg.dsc_epochs = 60;
  // plain gradient descent on this quadratic objective descends every epoch
  cfg.optimizer = ssc::OptimizerKind::kSgd;
  cfg.lr_start = 0.3;
  cfg.plateau_patience = 5;
  cfg.plateau_factor = 0.5;

  ssc::SscModel model = ssc::build_model(cfg, ssc::per_sample_shape(ds.samples));
  ssc::Trainer trainer(model, cfg);
  trainer.set_quiet(true);
  const ssc::TrainResult r = trainer.pretrain_dscnet(ssc::make_training_view(ds));
  REQUIRE(r.ok());
  REQUIRE(r.log.size() >= 2);
  for (std::size_t i = 1; i < r.log.size(); ++i)
    REQUIRE(r.log[i].total <= r.log[i - 1].total + 1e-3);
  REQUIRE(r.final_loss < r.initial_loss);
}

TEST_CASE("full stage honors warm-up and the refinement cadence", "[trainer]") {
  const ssc::Dataset ds = shallow_data(17);
  ssc::ExperimentConfig cfg = shallow_config();
  cfg.weights = {1.0, 1.0, 0.1, 0.1, 0.01, 0.1, 0.02};
  cfg.dsc_epochs = 40;
  cfg.t_max = 12;
  cfg.warmup = 3;
  cfg.t0 = 3;

  ssc::SscModel model = ssc::build_model(cfg, ssc::per_sample_shape(ds.samples));
  ssc::Trainer trainer(model, cfg);
  trainer.set_quiet(true);
  const ssc::TrainingView view = ssc::make_training_view(ds);
  REQUIRE(trainer.pretrain_dscnet(view).ok());

  const ssc::TrainResult full = trainer.train_full(view);
  REQUIRE(full.ok());
  REQUIRE(full.epochs_run == 12);
  REQUIRE(full.refinement_epochs == std::vector<int>{6, 9, 12});
  for (const ssc::TrainLogEntry& e : full.log) {
    const bool expect = e.epoch > 3 && (e.epoch - 3) % 3 == 0;
    REQUIRE(e.refined == expect);
    REQUIRE(e.stage == "full");
  }
}

TEST_CASE("warm-up covering the whole budget disables refinement", "[trainer]") {
  const ssc::Dataset ds = shallow_data(19);
  ssc::ExperimentConfig cfg = shallow_config();
  cfg.weights = {1.0, 1.0, 0.1, 0.1, 0.01, 0.1, 0.02};
  cfg.dsc_epochs = 30;
  cfg.t_max = 8;
  cfg.warmup = 8;
  cfg.t0 = 1;

  ssc::SscModel model = ssc::build_model(cfg, ssc::per_sample_shape(ds.samples));
  ssc::Trainer trainer(model, cfg);
  trainer.set_quiet(true);
  const ssc::TrainingView view = ssc::make_training_view(ds);
  REQUIRE(trainer.pretrain_dscnet(view).ok());
  const ssc::TrainResult full = trainer.train_full(view);
  REQUIRE(full.refinement_epochs.empty());
  for (const ssc::TrainLogEntry& e : full.log) REQUIRE(!e.refined);
}

TEST_CASE("self-supervision does not degrade the pseudo-labels", "[trainer][slow]") {
  const ssc::Dataset ds = ssc::synth_subspaces(2, 2, 10, 12, 0.05, 0.0, 0.0, 23);
  ssc::ExperimentConfig cfg = shallow_config();
  cfg.weights = {0.0, 1.0, 0.1, 0.1, 0.01, 0.1, 0.02};
  cfg.dsc_epochs = 200;
  cfg.t_max = 30;
  cfg.warmup = 5;
  cfg.t0 = 5;
  cfg.pp.keep_ratio = 0.8;
  cfg.pp.svd_rank = 5;

  ssc::SscModel model = ssc::build_model(cfg, ssc::per_sample_shape(ds.samples));
  ssc::Trainer trainer(model, cfg);
  trainer.set_quiet(true);
  const ssc::TrainingView view = ssc::make_training_view(ds);
  REQUIRE(trainer.pretrain_dscnet(view).ok());

  // the full stage's own initial labels measure the pretrain-stage quality
  const ssc::PseudoLabelState at_dsc = ssc::make_pseudo_labels(
      model.C, ds.k, cfg.pp, ssc::Rng::derive(cfg.seed, 0x50Cull), cfg.eig_options());
  const double acc_dsc = ssc::clustering_accuracy(at_dsc.labels, ds.labels, ds.k);

  const ssc::TrainResult full = trainer.train_full(view);
  REQUIRE(full.ok());
  const double acc_full = ssc::clustering_accuracy(trainer.pseudo().labels, ds.labels, ds.k);
  INFO("dsc-stage accuracy " << acc_dsc << ", full-stage accuracy " << acc_full);
  REQUIRE(acc_full >= acc_dsc);
  REQUIRE(acc_dsc > 0.5);  // the comparison starts from a working baseline
}

TEST_CASE("the full stage requires a pretrained C", "[trainer]") {
  const ssc::Dataset ds = shallow_data(29);
  ssc::ExperimentConfig cfg = shallow_config();
  cfg.t_max = 4;
  ssc::SscModel model = ssc::build_model(cfg, ssc::per_sample_shape(ds.samples));
  ssc::Trainer trainer(model, cfg);
  trainer.set_quiet(true);
  REQUIRE_THROWS_WITH(trainer.train_full(ssc::make_training_view(ds)),
                      ContainsSubstring("run the self-expression pretrain first"));
}

TEST_CASE("divergence rolls back to the last finite parameters", "[trainer]") {
  const ssc::Dataset ds = shallow_data(37);
  ssc::ExperimentConfig cfg = shallow_config();
  cfg.weights.lambda1 = 1.0;
  cfg.optimizer = ssc::OptimizerKind::kSgd;
  cfg.lr_start = 1e12;  // guaranteed blow-up
  cfg.plateau_patience = 1000;
  cfg.dsc_epochs = 60;

  ssc::SscModel model = ssc::build_model(cfg, ssc::per_sample_shape(ds.samples));
  ssc::Trainer trainer(model, cfg);
  trainer.set_quiet(true);
  const ssc::TrainResult r = trainer.pretrain_dscnet(ssc::make_training_view(ds));
  REQUIRE(!r.ok());
  REQUIRE(r.stop_reason == "divergence");
  REQUIRE(r.epochs_run >= 1);
  REQUIRE(r.epochs_run < 60);
  REQUIRE(std::isfinite(r.final_loss));  // last loss before the blow-up
  REQUIRE(model.C.allFinite());          // rolled back, not left at inf
  REQUIRE(std::size_t(r.epochs_run) == r.log.size());
}

TEST_CASE("early stopping fires on stagnation and is recorded", "[trainer]") {
  const ssc::Dataset ds = shallow_data(43);
  ssc::ExperimentConfig cfg = shallow_config();
  cfg.weights.lambda1 = 1.0;
  cfg.dsc_epochs = 50;
  cfg.early_stop_patience = 2;
  cfg.early_stop_min_delta = 1e9;  // nothing can improve by this much

  ssc::SscModel model = ssc::build_model(cfg, ssc::per_sample_shape(ds.samples));
  ssc::Trainer trainer(model, cfg);
  trainer.set_quiet(true);
  const ssc::TrainResult r = trainer.pretrain_dscnet(ssc::make_training_view(ds));
  REQUIRE(r.ok());
  REQUIRE(r.stop_reason == "loss-plateau");
  REQUIRE(r.epochs_run == 3);  // best set at 1, stale at 2 and 3
}

TEST_CASE("model checkpoints round-trip the forward pass bit for bit", "[trainer][checkpoint]") {
  ScratchDir dir("ssc_unit_ckpt");
  const ssc::Dataset ds = ssc::synth_images(3, 3, 8, 47);

  ssc::SscModel model = ssc::build_model({1, 8, 8}, {3}, {3}, {2}, ssc::Padding::kSame, 99);
  ssc::Rng crng(11);
  model.classifier = ssc::Classifier(3, Eigen::Index(model.latent_dim), crng);

  const std::string path = dir.file("model.bin");
  ssc::save_model(path, model);
  ssc::SscModel loaded = ssc::load_model(path);

  REQUIRE(loaded.latent_dim == model.latent_dim);
  REQUIRE(loaded.encoder.describe() == model.encoder.describe());
  REQUIRE(loaded.decoder.describe() == model.decoder.describe());
  REQUIRE(!loaded.classifier.empty());
  REQUIRE((loaded.classifier.weight() - model.classifier.weight()).norm() == 0.0);

  const ssc::Tensor out_a = model.encoder.forward(ds.samples);
  const ssc::Tensor out_b = loaded.encoder.forward(ds.samples);
  REQUIRE(out_a.same_shape(out_b));
  REQUIRE(std::memcmp(out_a.data(), out_b.data(), out_a.numel() * sizeof(double)) == 0);

  const ssc::Tensor dec_a = model.decoder.forward(out_a);
  const ssc::Tensor dec_b = loaded.decoder.forward(out_b);
  REQUIRE(std::memcmp(dec_a.data(), dec_b.data(), dec_a.numel() * sizeof(double)) == 0);
}

TEST_CASE("checkpoint loaders reject foreign and truncated files", "[trainer][checkpoint]") {
  ScratchDir dir("ssc_unit_ckpt_err");

  const std::string garbage = dir.file("garbage.bin");
  ssc::write_text_file(garbage, "definitely not a checkpoint");
  REQUIRE_THROWS_WITH(ssc::load_model(garbage), ContainsSubstring("bad magic"));
  REQUIRE_THROWS_WITH(ssc::load_c_matrix(garbage), ContainsSubstring("bad magic"));

  ssc::SscModel model = ssc::build_model({4}, {}, {}, {}, ssc::Padding::kSame, 1);
  const std::string path = dir.file("model.bin");
  ssc::save_model(path, model);
  const std::vector<std::uint8_t> bytes = ssc::read_file_bytes(path);
  const std::string cut = dir.file("cut.bin");
  ssc::write_file_bytes(cut, std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 14));
  REQUIRE_THROWS_WITH(ssc::load_model(cut), ContainsSubstring("truncated"));

  REQUIRE_THROWS_AS(ssc::load_model(dir.file("missing.bin")), ssc::Error);
}

TEST_CASE("representation matrix persists exactly", "[trainer][checkpoint]") {
  ScratchDir dir("ssc_unit_cmat");
  ssc::Rng rng(53);
  Eigen::MatrixXd C(7, 7);
  for (Eigen::Index i = 0; i < C.size(); ++i) C.data()[i] = rng.normal();
  C.diagonal().setZero();

  const std::string bin = dir.file("c.bin");
  ssc::save_c_matrix(bin, C);
  const Eigen::MatrixXd back = ssc::load_c_matrix(bin);
  REQUIRE(back.rows() == 7);
  REQUIRE(std::memcmp(back.data(), C.data(), std::size_t(C.size()) * sizeof(double)) == 0);

  // CSV export uses 17 significant digits, enough to round-trip doubles
  const std::string csv = dir.file("c.csv");
  ssc::export_c_csv(csv, C);
  const Eigen::MatrixXd parsed = ssc::load_csv_matrix(csv);
  REQUIRE(parsed.rows() == 7);
  REQUIRE((parsed - C).norm() == 0.0);
}

TEST_CASE("train log serializes with the pinned header", "[trainer]") {
  ScratchDir dir("ssc_unit_log");
  std::vector<ssc::TrainLogEntry> log(2);
  log[0].stage = "dsc";
  log[0].epoch = 1;
  log[0].parts.rec = 0.25;
  log[0].total = 0.25;
  log[0].lr = 1e-3;
  log[1].stage = "full";
  log[1].epoch = 2;
  log[1].refined = true;

  const std::string path = dir.file("log.csv");
  ssc::write_train_log(path, log);
  const std::string text = ssc::read_text_file(path);
  REQUIRE(text.rfind("stage,epoch,rec,sx,cq,ce,cnt,sym,total,lr,sigma,refined,wall_seconds\n",
                     0) == 0);
  REQUIRE_THAT(text, ContainsSubstring("dsc,1,0.250000000"));
  REQUIRE_THAT(text, ContainsSubstring(",1,0.000"));  // refined flag plus zero wall clock
}
