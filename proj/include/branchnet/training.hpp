#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "branchnet/dataset.hpp"
#include "branchnet/loss.hpp"
#include "branchnet/network.hpp"
#include "branchnet/optimizer.hpp"
#include "branchnet/rng.hpp"

namespace branchnet {

struct TrainConfig {
  int max_epochs = 1500;
  int patience = 100;
  int batch_size_cap = 256;
  double lr = 0.01;
  double t0 = 180.0;
  double t_mult = 1.0;
  double eta_min = 0.0;
  double ce_weight = 0.6;
  double focal_weight = 0.4;
  double focal_alpha = 0.5;
  double focal_gamma = 2.5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
  bool bn_affine_trainable = true;
  bool restore_best = true;       // reload the best-validation snapshot at the end
  bool schedule_per_batch = false;  // advance the cosine schedule within epochs
  std::uint64_t seed = 0;
};

/// Throws DataError when a field is out of its legal range (loss weights
/// must sum to 1, momentum in (0,1], counts positive, t_mult >= 1).
void validate(const TrainConfig& cfg);

/// Config deserialization starts from the defaults; unknown keys are an
/// error so typos do not silently fall back.
TrainConfig train_config_from_json(const std::string& text);
std::string train_config_to_json(const TrainConfig& cfg);

struct TrainRecord {
  std::vector<double> train_loss;  // one entry per completed epoch
  std::vector<double> val_loss;
  std::vector<double> lr;
  int best_epoch = 0;
  int stopped_epoch = 0;
  double best_val_loss = 0.0;
  int batch_size = 0;
  bool diverged = false;
  std::string message;
  double wall_time_s = 0.0;
};

std::string train_record_to_json(const TrainRecord& rec);
/// epoch,train_loss,val_loss,lr rows.
void write_train_record_csv(const TrainRecord& rec, const std::string& path);

/// Consecutive chunks of `order`; a trailing chunk of size 1 is dropped
/// because train-mode normalization needs two samples.
std::vector<std::vector<int>> make_batches(const std::vector<int>& order, int batch_size);

namespace detail {

template <typename Scalar>
struct ModelSnapshot {
  Eigen::MatrixX<Scalar> w1;
  BatchNormState<Scalar> bn_in, bn_pre, bn_post;
};

template <typename Scalar>
ModelSnapshot<Scalar> snapshot(const BranchNetModel<Scalar>& m) {
  return {m.w1, m.bn_in, m.bn_pre, m.bn_post};
}

template <typename Scalar>
void restore(BranchNetModel<Scalar>& m, const ModelSnapshot<Scalar>& s) {
  m.w1 = s.w1;
  m.bn_in = s.bn_in;
  m.bn_pre = s.bn_pre;
  m.bn_post = s.bn_post;
}

}  // namespace detail

/// The full training protocol: shuffled minibatches of size
/// min(batch_size_cap, |train|), combined loss, masked Adam on W1 (and the
/// normalization affine parameters unless frozen), cosine-annealed warm
/// restarts, early stopping on validation loss with best-snapshot
/// restoration. The model is left in eval mode.
template <typename Scalar>
TrainRecord train(BranchNetModel<Scalar>& model, const Dataset& ds,
                  const SplitIndices& splits, const TrainConfig& cfg) {
  validate(cfg);
  const int n_train = static_cast<int>(splits.train.size());
  if (n_train < 2) throw DataError("train: need at least 2 training samples");
  if (splits.val.empty()) throw DataError("train: empty validation slice");

  // the normalization hyperparameters belong to the protocol, not the skeleton
  for (BatchNormState<Scalar>* bn : {&model.bn_in, &model.bn_pre, &model.bn_post}) {
    bn->eps = static_cast<Scalar>(cfg.bn_eps);
    bn->momentum = static_cast<Scalar>(cfg.bn_momentum);
  }

  const Eigen::MatrixX<Scalar> x_train = gather_rows<Scalar>(ds.features, splits.train);
  const Eigen::VectorXi y_train = gather_labels(ds.labels, splits.train);
  const Eigen::MatrixX<Scalar> x_val = gather_rows<Scalar>(ds.features, splits.val);
  const Eigen::VectorXi y_val = gather_labels(ds.labels, splits.val);

  const LossConfig loss_cfg{cfg.ce_weight, cfg.focal_weight, cfg.focal_alpha, cfg.focal_gamma};
  const AdamConfig adam_cfg{cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
  const CosineSchedule sched{cfg.lr, cfg.eta_min, cfg.t0, cfg.t_mult};

  using Mat = Eigen::MatrixX<Scalar>;
  using Vec = Eigen::VectorX<Scalar>;
  AdamState<Mat> st_w1;
  AdamState<Vec> st_gamma_in, st_beta_in, st_gamma_pre, st_beta_pre, st_gamma_post, st_beta_post;

  Rng shuffle_rng = make_rng(cfg.seed, Stream::shuffle);
  std::vector<int> order(static_cast<std::size_t>(n_train));
  for (int i = 0; i < n_train; ++i) order[static_cast<std::size_t>(i)] = i;

  TrainRecord rec;
  rec.batch_size = std::min(cfg.batch_size_cap, n_train);
  detail::ModelSnapshot<Scalar> best;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  const auto t_begin = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    model.mode = RunMode::train;
    const double lr_epoch = cosine_lr(static_cast<double>(epoch - 1), sched);
    shuffle_in_place(order, shuffle_rng);
    const auto batches = make_batches(order, rec.batch_size);

    double loss_sum = 0.0;
    long n_seen = 0;
    bool aborted = false;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const std::vector<int>& batch = batches[bi];
      const double lr_now =
          cfg.schedule_per_batch
              ? cosine_lr(epoch - 1 + static_cast<double>(bi) / static_cast<double>(batches.size()), sched)
              : lr_epoch;
      Eigen::MatrixX<Scalar> xb(static_cast<Eigen::Index>(batch.size()), x_train.cols());
      Eigen::VectorXi yb(static_cast<Eigen::Index>(batch.size()));
      for (std::size_t i = 0; i < batch.size(); ++i) {
        xb.row(static_cast<Eigen::Index>(i)) = x_train.row(batch[i]);
        yb(static_cast<Eigen::Index>(i)) = y_train(batch[i]);
      }
      const ForwardTrace<Scalar> trace = forward(model, xb);
      const LossValue<Scalar> loss = combined_loss(trace.probs, yb, loss_cfg);
      if (!std::isfinite(static_cast<double>(loss.value))) {
        rec.diverged = true;
        rec.message = "non-finite training loss at epoch " + std::to_string(epoch);
        aborted = true;
        break;
      }
      const Gradients<Scalar> grads = backward(model, trace, loss.dlogits);
      adam_step(model.w1, grads.w1, st_w1, adam_cfg, static_cast<Scalar>(lr_now), model.mask_m1);
      if (model.affine_trainable) {
        adam_update(model.bn_in.gamma, grads.bn_in.gamma, st_gamma_in, adam_cfg, static_cast<Scalar>(lr_now));
        adam_update(model.bn_in.beta, grads.bn_in.beta, st_beta_in, adam_cfg, static_cast<Scalar>(lr_now));
        adam_update(model.bn_pre.gamma, grads.bn_pre.gamma, st_gamma_pre, adam_cfg, static_cast<Scalar>(lr_now));
        adam_update(model.bn_pre.beta, grads.bn_pre.beta, st_beta_pre, adam_cfg, static_cast<Scalar>(lr_now));
        adam_update(model.bn_post.gamma, grads.bn_post.gamma, st_gamma_post, adam_cfg, static_cast<Scalar>(lr_now));
        adam_update(model.bn_post.beta, grads.bn_post.beta, st_beta_post, adam_cfg, static_cast<Scalar>(lr_now));
      }
      loss_sum += static_cast<double>(loss.value) * static_cast<double>(batch.size());
      n_seen += static_cast<long>(batch.size());
    }
    rec.stopped_epoch = epoch;
    if (aborted) break;
    rec.train_loss.push_back(loss_sum / static_cast<double>(n_seen));
    rec.lr.push_back(lr_epoch);

    model.mode = RunMode::eval;
    const ForwardTrace<Scalar> vtrace = forward(model, x_val);
    const LossValue<Scalar> vloss = combined_loss(vtrace.probs, y_val, loss_cfg);
    const double val = static_cast<double>(vloss.value);
    rec.val_loss.push_back(val);
    if (!std::isfinite(val)) {
      rec.diverged = true;
      rec.message = "non-finite validation loss at epoch " + std::to_string(epoch);
      break;
    }
    if (val < best_val) {
      best_val = val;
      best_epoch = epoch;
      best = detail::snapshot(model);
    } else if (epoch - best_epoch >= cfg.patience) {
      break;
    }
  }

  rec.best_epoch = best_epoch;
  rec.best_val_loss = best_val;
  if (cfg.restore_best && best_epoch > 0) detail::restore(model, best);
  model.mode = RunMode::eval;
  rec.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
  return rec;
}

}  // namespace branchnet
