#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "branchnet/branchmap.hpp"
#include "branchnet/errors.hpp"

namespace branchnet {

enum class RunMode { train, eval };

/// One normalization stage. Train-mode calls normalize with batch statistics
/// (biased variance) and fold the batch into the running estimates
/// (unbiased variance, running <- (1-momentum)*running + momentum*batch);
/// eval-mode calls use the running estimates only.
template <typename Scalar>
struct BatchNormState {
  Eigen::VectorX<Scalar> gamma;
  Eigen::VectorX<Scalar> beta;
  Eigen::VectorX<Scalar> running_mean;
  Eigen::VectorX<Scalar> running_var;
  Scalar eps = Scalar(1e-5);
  Scalar momentum = Scalar(0.1);

  Eigen::Index width() const { return gamma.size(); }

  static BatchNormState identity(Eigen::Index width, Scalar eps, Scalar momentum) {
    BatchNormState bn;
    bn.gamma = Eigen::VectorX<Scalar>::Ones(width);
    bn.beta = Eigen::VectorX<Scalar>::Zero(width);
    bn.running_mean = Eigen::VectorX<Scalar>::Zero(width);
    bn.running_var = Eigen::VectorX<Scalar>::Ones(width);
    bn.eps = eps;
    bn.momentum = momentum;
    return bn;
  }
};

template <typename Scalar>
struct BnCache {
  Eigen::MatrixX<Scalar> xhat;
  Eigen::RowVectorX<Scalar> inv_std;
};

template <typename Scalar>
struct BnGrads {
  Eigen::VectorX<Scalar> gamma;
  Eigen::VectorX<Scalar> beta;
};

/// Normalize a batch (rows = samples) with batch statistics, update the
/// running estimates, and cache what the exact backward pass needs.
template <typename Scalar>
Eigen::MatrixX<Scalar> batchnorm_train(BatchNormState<Scalar>& bn,
                                       const Eigen::MatrixX<Scalar>& x,
                                       BnCache<Scalar>& cache) {
  const Eigen::Index B = x.rows();
  const Eigen::RowVectorX<Scalar> mean = x.colwise().mean();
  const Eigen::MatrixX<Scalar> centered = x.rowwise() - mean;
  const Eigen::RowVectorX<Scalar> var = centered.cwiseAbs2().colwise().mean();
  cache.inv_std = (var.array() + bn.eps).sqrt().inverse();
  cache.xhat = centered.array().rowwise() * cache.inv_std.array();
  Eigen::MatrixX<Scalar> out =
      (cache.xhat.array().rowwise() * bn.gamma.transpose().array()).rowwise() +
      bn.beta.transpose().array();
  const Scalar m = bn.momentum;
  bn.running_mean = (Scalar(1) - m) * bn.running_mean + m * mean.transpose();
  const Eigen::VectorX<Scalar> unbiased =
      var.transpose() * (static_cast<Scalar>(B) / static_cast<Scalar>(B - 1));
  bn.running_var = (Scalar(1) - m) * bn.running_var + m * unbiased;
  return out;
}

/// Exact gradient through train-mode normalization (batch statistics are a
/// function of the batch, so every row contributes to every other row's
/// gradient). Returns dx and fills the affine-parameter gradients.
template <typename Scalar>
Eigen::MatrixX<Scalar> batchnorm_backward(const BatchNormState<Scalar>& bn,
                                          const BnCache<Scalar>& cache,
                                          const Eigen::MatrixX<Scalar>& dy,
                                          BnGrads<Scalar>& grads) {
  const Eigen::Index B = dy.rows();
  grads.gamma = dy.cwiseProduct(cache.xhat).colwise().sum().transpose();
  grads.beta = dy.colwise().sum().transpose();
  const Eigen::MatrixX<Scalar> dxhat = dy.array().rowwise() * bn.gamma.transpose().array();
  const Eigen::RowVectorX<Scalar> sum_dxhat = dxhat.colwise().sum();
  const Eigen::RowVectorX<Scalar> sum_dxhat_xhat =
      dxhat.cwiseProduct(cache.xhat).colwise().sum();
  Eigen::MatrixX<Scalar> dx = static_cast<Scalar>(B) * dxhat;
  dx.rowwise() -= sum_dxhat;
  dx.array() -= cache.xhat.array().rowwise() * sum_dxhat_xhat.array();
  dx.array().rowwise() *= cache.inv_std.array() / static_cast<Scalar>(B);
  return dx;
}

/// The compiled classifier: masked trainable input projection, frozen
/// symbolic output projection, three normalization stages, no biases.
template <typename Scalar>
struct BranchNetModel {
  Eigen::MatrixX<Scalar> w1;       // H x d, trainable, zero off-mask
  Eigen::MatrixX<Scalar> mask_m1;  // H x d, entries 0/1, fixed
  Eigen::MatrixX<Scalar> w2;       // C x H, frozen
  BatchNormState<Scalar> bn_in, bn_pre, bn_post;
  bool affine_trainable = true;
  RunMode mode = RunMode::train;

  Eigen::Index n_features() const { return w1.cols(); }
  Eigen::Index n_hidden() const { return w1.rows(); }
  Eigen::Index n_classes() const { return w2.rows(); }

  Eigen::MatrixX<Scalar> effective_w1() const { return w1.cwiseProduct(mask_m1); }
};

template <typename Scalar>
BranchNetModel<Scalar> make_model(const Architecture& arch, Scalar bn_eps = Scalar(1e-5),
                                  Scalar bn_momentum = Scalar(0.1),
                                  bool affine_trainable = true) {
  BranchNetModel<Scalar> m;
  m.w1 = arch.w1_init.cast<Scalar>();
  m.mask_m1 = arch.mask_m1.cast<Scalar>();
  m.w2 = arch.w2.cast<Scalar>();
  m.bn_in = BatchNormState<Scalar>::identity(arch.d, bn_eps, bn_momentum);
  m.bn_pre = BatchNormState<Scalar>::identity(arch.H, bn_eps, bn_momentum);
  m.bn_post = BatchNormState<Scalar>::identity(arch.H, bn_eps, bn_momentum);
  m.affine_trainable = affine_trainable;
  return m;
}

/// Per-stage intermediates of one forward pass; train-mode traces carry the
/// normalization caches the backward pass consumes.
template <typename Scalar>
struct ForwardTrace {
  RunMode mode = RunMode::train;
  Eigen::MatrixX<Scalar> input_norm;  // B x d, BN_in output
  BnCache<Scalar> in, pre, post;
  Eigen::MatrixX<Scalar> sigmoid;    // B x H
  Eigen::MatrixX<Scalar> post_norm;  // B x H
  Eigen::MatrixX<Scalar> logits;     // B x C
  Eigen::MatrixX<Scalar> probs;      // B x C
};

template <typename Scalar>
void softmax_row_in_place(Eigen::RowVectorX<Scalar>& row) {
  const Scalar m = row.maxCoeff();
  row = (row.array() - m).exp();
  row /= row.sum();
}

/// y = softmax(W2 . BNpost(sigmoid(BNpre(W1_eff . BNin(x))))), rows of x are
/// samples. Train mode consumes batch statistics and mutates the running
/// estimates; eval mode is computed row by row so results do not depend on
/// how a workload is chunked into batches.
template <typename Scalar>
ForwardTrace<Scalar> forward(BranchNetModel<Scalar>& model, const Eigen::MatrixX<Scalar>& x) {
  if (x.cols() != model.n_features()) throw std::logic_error("forward: feature width mismatch");
  if (!x.allFinite()) throw DataError("forward: non-finite input");
  ForwardTrace<Scalar> t;
  t.mode = model.mode;
  const Eigen::MatrixX<Scalar> w1_eff = model.effective_w1();

  if (model.mode == RunMode::train) {
    if (x.rows() < 2) throw DataError("forward: train-mode batch needs at least 2 rows");
    t.input_norm = batchnorm_train(model.bn_in, x, t.in);
    const Eigen::MatrixX<Scalar> z = t.input_norm * w1_eff.transpose();
    const Eigen::MatrixX<Scalar> a = batchnorm_train(model.bn_pre, z, t.pre);
    t.sigmoid = (Scalar(1) + (-a.array()).exp()).inverse();
    t.post_norm = batchnorm_train(model.bn_post, t.sigmoid, t.post);
    t.logits = t.post_norm * model.w2.transpose();
    t.probs.resize(t.logits.rows(), t.logits.cols());
    for (Eigen::Index r = 0; r < t.logits.rows(); ++r) {
      Eigen::RowVectorX<Scalar> row = t.logits.row(r);
      softmax_row_in_place(row);
      t.probs.row(r) = row;
    }
    return t;
  }

  // Eval: running statistics folded into one scale/shift pair per stage.
  const auto scale_shift = [](const BatchNormState<Scalar>& bn) {
    const Eigen::VectorX<Scalar> istd = (bn.running_var.array() + bn.eps).sqrt().inverse();
    const Eigen::VectorX<Scalar> scale = bn.gamma.cwiseProduct(istd);
    const Eigen::VectorX<Scalar> shift = bn.beta - scale.cwiseProduct(bn.running_mean);
    return std::make_pair(scale, shift);
  };
  const auto [in_scale, in_shift] = scale_shift(model.bn_in);
  const auto [pre_scale, pre_shift] = scale_shift(model.bn_pre);
  const auto [post_scale, post_shift] = scale_shift(model.bn_post);

  const Eigen::Index B = x.rows();
  t.input_norm.resize(B, model.n_features());
  t.sigmoid.resize(B, model.n_hidden());
  t.post_norm.resize(B, model.n_hidden());
  t.logits.resize(B, model.n_classes());
  t.probs.resize(B, model.n_classes());
  for (Eigen::Index r = 0; r < B; ++r) {
    const Eigen::VectorX<Scalar> xin =
        in_scale.cwiseProduct(x.row(r).transpose()) + in_shift;
    const Eigen::VectorX<Scalar> z = w1_eff * xin;
    const Eigen::VectorX<Scalar> a = pre_scale.cwiseProduct(z) + pre_shift;
    const Eigen::VectorX<Scalar> s = (Scalar(1) + (-a.array()).exp()).inverse();
    const Eigen::VectorX<Scalar> p = post_scale.cwiseProduct(s) + post_shift;
    const Eigen::VectorX<Scalar> logits = model.w2 * p;
    t.input_norm.row(r) = xin.transpose();
    t.sigmoid.row(r) = s.transpose();
    t.post_norm.row(r) = p.transpose();
    t.logits.row(r) = logits.transpose();
    Eigen::RowVectorX<Scalar> row = logits.transpose();
    softmax_row_in_place(row);
    t.probs.row(r) = row;
  }
  return t;
}

template <typename Scalar>
struct Gradients {
  Eigen::MatrixX<Scalar> w1;  // already masked
  BnGrads<Scalar> bn_in, bn_pre, bn_post;
  bool has_affine = false;
};

/// Backpropagate dLoss/dlogits through the frozen output layer, BN_post,
/// the sigmoid, BN_pre, the masked projection, and BN_in's affine map.
/// W2 is frozen, so no gradient is produced for it.
template <typename Scalar>
Gradients<Scalar> backward(const BranchNetModel<Scalar>& model, const ForwardTrace<Scalar>& t,
                           const Eigen::MatrixX<Scalar>& dlogits) {
  if (t.mode != RunMode::train) throw std::logic_error("backward: needs a train-mode trace");
  if (dlogits.rows() != t.probs.rows() || dlogits.cols() != t.probs.cols())
    throw std::logic_error("backward: dlogits shape mismatch");

  Gradients<Scalar> g;
  g.has_affine = model.affine_trainable;
  const Eigen::MatrixX<Scalar> dpost = dlogits * model.w2;
  const Eigen::MatrixX<Scalar> ds = batchnorm_backward(model.bn_post, t.post, dpost, g.bn_post);
  const Eigen::MatrixX<Scalar> da =
      (ds.array() * t.sigmoid.array() * (Scalar(1) - t.sigmoid.array())).matrix();
  const Eigen::MatrixX<Scalar> dz = batchnorm_backward(model.bn_pre, t.pre, da, g.bn_pre);
  g.w1 = (dz.transpose() * t.input_norm).cwiseProduct(model.mask_m1);
  const Eigen::MatrixX<Scalar> dxin = dz * model.effective_w1();
  g.bn_in.gamma = dxin.cwiseProduct(t.in.xhat).colwise().sum().transpose();
  g.bn_in.beta = dxin.colwise().sum().transpose();
  return g;
}

template <typename Scalar>
struct Predictions {
  Eigen::VectorXi labels;
  Eigen::MatrixX<Scalar> probs;
};

/// Argmax class per row, ties broken toward the lower class index.
template <typename Scalar>
Predictions<Scalar> predict(BranchNetModel<Scalar>& model, const Eigen::MatrixX<Scalar>& x) {
  if (model.mode != RunMode::eval) throw std::logic_error("predict: model must be in eval mode");
  ForwardTrace<Scalar> t = forward(model, x);
  Predictions<Scalar> p;
  p.probs = std::move(t.probs);
  p.labels.resize(p.probs.rows());
  for (Eigen::Index r = 0; r < p.probs.rows(); ++r) {
    int best = 0;
    for (Eigen::Index c = 1; c < p.probs.cols(); ++c)
      if (p.probs(r, c) > p.probs(r, best)) best = static_cast<int>(c);
    p.labels(r) = best;
  }
  return p;
}

}  // namespace branchnet
