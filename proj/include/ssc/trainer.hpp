#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "ssc/classifier.hpp"
#include "ssc/config.hpp"
#include "ssc/core.hpp"
#include "ssc/dataset.hpp"
#include "ssc/io.hpp"
#include "ssc/losses.hpp"
#include "ssc/model.hpp"
#include "ssc/optimizer.hpp"
#include "ssc/pseudo_labels.hpp"
#include "ssc/self_expression.hpp"

namespace ssc {

struct TrainLogEntry {
  std::string stage;  // "ae" | "dsc" | "full"
  int epoch = 0;      // 1-based within stage
  LossParts parts;
  double total = 0.0;
  double lr = 0.0;
  double sigma = 0.0;
  bool refined = false;  // pseudo-labels were recomputed at this epoch
  double wall_seconds = 0.0;
};

struct TrainResult {
  std::vector<TrainLogEntry> log;
  int epochs_run = 0;
  double initial_loss = 0.0;
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  std::string stop_reason;  // "epoch-budget" | "loss-plateau" | "divergence"
  std::vector<int> refinement_epochs;
  std::vector<std::string> warnings;

  bool ok() const { return stop_reason != "divergence"; }
};

inline void write_train_log(const std::string& path, const std::vector<TrainLogEntry>& log) {
  CsvWriter csv(path);
  csv.write_row({"stage", "epoch", "rec", "sx", "cq", "ce", "cnt", "sym", "total", "lr", "sigma",
                 "refined", "wall_seconds"});
  for (const TrainLogEntry& e : log)
    csv.write_row({e.stage, std::to_string(e.epoch), format_fixed(e.parts.rec, 9),
                   format_fixed(e.parts.sx, 9), format_fixed(e.parts.cq, 9),
                   format_fixed(e.parts.ce, 9), format_fixed(e.parts.cnt, 9),
                   format_fixed(e.parts.sym, 9), format_fixed(e.total, 9), format_fixed(e.lr, 9),
                   format_fixed(e.sigma, 9), e.refined ? "1" : "0",
                   format_fixed(e.wall_seconds, 3)});
}

namespace detail {

struct ParamSnapshot {
  std::vector<std::vector<double>> blocks;
};

inline ParamSnapshot snapshot_params(const std::vector<ParamRef>& refs) {
  ParamSnapshot s;
  s.blocks.reserve(refs.size());
  for (const ParamRef& r : refs) s.blocks.emplace_back(r.value, r.value + r.count);
  return s;
}

inline void restore_params(const std::vector<ParamRef>& refs, const ParamSnapshot& s) {
  require(refs.size() == s.blocks.size(), "restore_params: block count changed");
  for (std::size_t i = 0; i < refs.size(); ++i) {
    require(refs[i].count == s.blocks[i].size(), "restore_params: block size changed");
    std::copy(s.blocks[i].begin(), s.blocks[i].end(), refs[i].value);
  }
}

}  // namespace detail

/// Staged trainer. Owns no data; mutates the model it was given. All stages
/// are full-batch and see the training view only, which carries no labels.
class Trainer {
 public:
  Trainer(SscModel& model, const ExperimentConfig& cfg)
      : model_(model), cfg_(cfg), quiet_(false) {}

  void set_quiet(bool q) { quiet_ = q; }
  const PseudoLabelState& pseudo() const { return pseudo_; }

  /// Stage one: plain autoencoder on the reconstruction loss.
  TrainResult pretrain_autoencoder(const TrainingView& data) {
    const Tensor& X = data.samples;
    const Eigen::MatrixXd Xf = to_feature_matrix(X);

    std::vector<ParamRef> params = model_.autoencoder_params();
    auto step = [&](TrainLogEntry& e) {
      model_.encoder.zero_grad();
      model_.decoder.zero_grad();
      const Tensor z = model_.encoder.forward(X);
      const Tensor x_hat = model_.decoder.forward(z);
      LossGrad rec = reconstruction_loss_and_grad(Xf, to_feature_matrix(x_hat));
      const Tensor g_dec = model_.decoder.backward(from_feature_matrix(rec.grad, x_hat.shape()));
      model_.encoder.backward(g_dec);
      e.parts.rec = rec.loss;
      return rec.loss;
    };
    return run_stage("ae", cfg_.ae_epochs, params, step);
  }

  /// Stage two: reconstruction through the self-expression layer plus the
  /// configured self-expression error and regularizer. C starts at zero.
  TrainResult pretrain_dscnet(const TrainingView& data) {
    const Tensor& X = data.samples;
    const Eigen::Index n = static_cast<Eigen::Index>(X.dim(0));
    if (model_.C.rows() != n || model_.C.cols() != n) model_.C = Eigen::MatrixXd::Zero(n, n);
    grad_C_.setZero(n, n);

    std::vector<ParamRef> params = model_.autoencoder_params();
    params.push_back(c_param_ref());

    auto step = [&](TrainLogEntry& e) { return dsc_step(X, e); };
    return run_stage("dsc", cfg_.dsc_epochs, params, step);
  }

  /// Stage three: the full objective with dual self-supervision. Pseudo-labels
  /// are computed once up front, frozen through the warm-up epochs, then
  /// refined every t0 epochs with cluster ids aligned to the previous round.
  TrainResult train_full(const TrainingView& data) {
    const Tensor& X = data.samples;
    const Eigen::Index n = static_cast<Eigen::Index>(X.dim(0));
    require(model_.C.rows() == n && model_.C.cols() == n,
            "train_full: C missing; run the self-expression pretrain first");
    grad_C_.setZero(n, n);

    if (model_.classifier.empty()) {
      Rng rng(Rng::derive(cfg_.seed, 0xC1A55ull));
      model_.classifier =
          Classifier(data.k, static_cast<Eigen::Index>(model_.latent_dim), rng);
    }

    TrainResult r;
    pseudo_ = make_pseudo_labels(model_.C, data.k, cfg_.pp, Rng::derive(cfg_.seed, 0x50Cull),
                                 cfg_.eig_options());
    if (pseudo_.count_nonempty(data.k) < data.k) {
      r.warnings.push_back("initial pseudo-labels cover fewer than k clusters");
      if (!quiet_) std::cerr << "warning: " << r.warnings.back() << "\n";
    }

    std::vector<ParamRef> params = model_.autoencoder_params();
    for (const ParamRef& p : model_.classifier.params()) params.push_back(p);
    params.push_back(c_param_ref());

    auto step = [&](TrainLogEntry& e) { return full_step(X, data.k, r, e); };
    TrainResult stage = run_stage("full", cfg_.t_max, params, step);
    stage.refinement_epochs = std::move(r.refinement_epochs);
    for (std::string& w : r.warnings) stage.warnings.push_back(std::move(w));
    return stage;
  }

 private:
  ParamRef c_param_ref() {
    return {"c", model_.C.data(), grad_C_.data(), static_cast<std::size_t>(model_.C.size())};
  }

  double epoch_sigma(const Eigen::MatrixXd& E) const {
    if (cfg_.error != SxError::kCim) return 0.0;
    if (cfg_.sigma_mode == "fixed") return cfg_.sigma_value;
    return median_pairwise_sigma(E);
  }

  double dsc_step(const Tensor& X, TrainLogEntry& e) {
    model_.encoder.zero_grad();
    model_.decoder.zero_grad();

    const Tensor zt = model_.encoder.forward(X);
    const Eigen::MatrixXd Z = to_feature_matrix(zt);
    const Eigen::MatrixXd& C = model_.C;

    e.sigma = epoch_sigma(self_expression_residual(Z, C));
    const SxValueGrad sx = self_expression_objective(Z, C, cfg_.sx_config(e.sigma));

    const Eigen::MatrixXd ZC = Z * C;
    const Tensor x_hat = model_.decoder.forward(from_feature_matrix(ZC, zt.shape()));
    LossGrad rec = reconstruction_loss_and_grad(to_feature_matrix(X), to_feature_matrix(x_hat));

    rec.grad *= cfg_.weights.lambda1;
    const Tensor g_dec = model_.decoder.backward(from_feature_matrix(rec.grad, x_hat.shape()));
    const Eigen::MatrixXd g_zc = to_feature_matrix(g_dec);

    grad_C_.noalias() = Z.transpose() * g_zc;
    grad_C_ += cfg_.weights.lambda2 * sx.grad_C;
    zero_diagonal(grad_C_);

    Eigen::MatrixXd g_z = cfg_.weights.lambda2 * (sx.grad_E - sx.grad_E * C.transpose());
    g_z.noalias() += g_zc * C.transpose();
    model_.encoder.backward(from_feature_matrix(g_z, zt.shape()));

    e.parts.rec = rec.loss;
    e.parts.sx = sx.objective;
    return cfg_.weights.lambda1 * rec.loss + cfg_.weights.lambda2 * sx.objective;
  }

  double full_step(const Tensor& X, int k, TrainResult& aux, TrainLogEntry& e) {
    // Refinement schedule: epochs warmup + t0, warmup + 2*t0, ... A refresh
    // that collapses below k clusters is discarded.
    if (e.epoch > cfg_.warmup && (e.epoch - cfg_.warmup) % cfg_.t0 == 0) {
      PseudoLabelState fresh =
          make_pseudo_labels(model_.C, k, cfg_.pp,
                             Rng::derive(cfg_.seed, 0x50C0000ull + std::uint64_t(e.epoch)),
                             cfg_.eig_options());
      if (fresh.count_nonempty(k) < k) {
        aux.warnings.push_back(
            cat("refinement at epoch ", e.epoch, " produced fewer than k clusters; keeping previous labels"));
        if (!quiet_) std::cerr << "warning: " << aux.warnings.back() << "\n";
      } else {
        fresh.labels = align_labels(pseudo_.labels, fresh.labels, k);
        fresh.q_onehot = one_hot(fresh.labels, k);
        fresh.centroids = pseudo_.centroids;
        pseudo_ = std::move(fresh);
      }
      e.refined = true;
      aux.refinement_epochs.push_back(e.epoch);
    }

    model_.encoder.zero_grad();
    model_.decoder.zero_grad();
    model_.classifier.zero_grad();

    const Tensor zt = model_.encoder.forward(X);
    const Eigen::MatrixXd Z = to_feature_matrix(zt);
    const Eigen::MatrixXd& C = model_.C;
    const LossWeights& w = cfg_.weights;

    e.sigma = epoch_sigma(self_expression_residual(Z, C));
    const SxValueGrad sx = self_expression_objective(Z, C, cfg_.sx_config(e.sigma));

    const Eigen::MatrixXd ZC = Z * C;
    const Tensor x_hat = model_.decoder.forward(from_feature_matrix(ZC, zt.shape()));
    LossGrad rec = reconstruction_loss_and_grad(to_feature_matrix(X), to_feature_matrix(x_hat));

    rec.grad *= w.lambda1;
    const Tensor g_dec = model_.decoder.backward(from_feature_matrix(rec.grad, x_hat.shape()));
    const Eigen::MatrixXd g_zc = to_feature_matrix(g_dec);

    // Classifier losses; centroids follow the current logits (constants to
    // the gradient, like the pseudo-labels themselves).
    const Eigen::MatrixXd logits = model_.classifier.logits(Z);
    update_centroids(logits, pseudo_.labels, pseudo_.centroids);
    const LossGrad ce = cross_entropy_loss_and_grad(logits, pseudo_.q_onehot);
    const LossGrad cnt = center_loss_and_grad(logits, pseudo_.labels, pseudo_.centroids);
    const Eigen::MatrixXd g_logits = w.lambda4 * ce.grad + w.lambda5 * cnt.grad;
    const Eigen::MatrixXd g_z_head = model_.classifier.backward(Z, g_logits);

    const double cq = cq_loss(C, pseudo_.q_onehot);
    const LossGrad sym = symmetry_loss_and_grad(C);

    grad_C_.noalias() = Z.transpose() * g_zc;
    grad_C_ += w.lambda2 * sx.grad_C + w.lambda3 * cq_grad(C, pseudo_.q_onehot) +
               w.lambda6 * sym.grad;
    zero_diagonal(grad_C_);

    Eigen::MatrixXd g_z = w.lambda2 * (sx.grad_E - sx.grad_E * C.transpose());
    g_z.noalias() += g_zc * C.transpose();
    g_z += g_z_head;
    model_.encoder.backward(from_feature_matrix(g_z, zt.shape()));

    e.parts = {rec.loss, sx.objective, cq, ce.loss, cnt.loss, sym.loss};
    return total_loss(e.parts, w);
  }

  /// Shared epoch loop: optimizer step, plateau schedule, loss-only early
  /// stopping, and divergence rollback to the last finite-loss parameters.
  TrainResult run_stage(const std::string& stage, int epochs,
                        const std::vector<ParamRef>& params,
                        const std::function<double(TrainLogEntry&)>& step) {
    OptimizerConfig ocfg;
    ocfg.kind = cfg_.optimizer;
    ocfg.lr = cfg_.lr_start;
    Optimizer opt(ocfg);
    PlateauScheduler plateau{cfg_.plateau_factor, cfg_.plateau_patience, cfg_.plateau_min_delta,
                             cfg_.lr_min};
    EarlyStopper stopper{cfg_.early_stop_patience, cfg_.early_stop_min_delta};

    TrainResult r;
    r.stop_reason = "epoch-budget";
    detail::ParamSnapshot good = detail::snapshot_params(params);
    bool have_initial = false;

    for (int epoch = 1; epoch <= epochs; ++epoch) {
      const auto t0 = std::chrono::steady_clock::now();
      TrainLogEntry e;
      e.stage = stage;
      e.epoch = epoch;
      const double total = step(e);
      if (!have_initial) {
        r.initial_loss = total;
        have_initial = true;
      }
      if (!std::isfinite(total)) {
        detail::restore_params(params, good);
        r.stop_reason = "divergence";
        if (!quiet_)
          std::cerr << "warning: " << stage << " diverged at epoch " << epoch
                    << "; restored last good parameters\n";
        break;
      }
      opt.step(params);
      if (stage != "ae") zero_diagonal(model_.C);
      good = detail::snapshot_params(params);

      e.total = total;
      e.lr = opt.lr();
      const auto t1 = std::chrono::steady_clock::now();
      e.wall_seconds =
          cfg_.fixed_timing ? 0.0 : std::chrono::duration<double>(t1 - t0).count();
      r.log.push_back(e);
      r.epochs_run = epoch;
      r.final_loss = total;

      plateau.observe(total, opt);
      if (stopper.observe(total)) {
        r.stop_reason = "loss-plateau";
        break;
      }
    }
    return r;
  }

  SscModel& model_;
  ExperimentConfig cfg_;
  PseudoLabelState pseudo_;
  Eigen::MatrixXd grad_C_;
  bool quiet_ = false;
};

}  // namespace ssc
