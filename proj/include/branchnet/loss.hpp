#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace branchnet {

/// Weighted sum of cross-entropy and focal loss over a batch:
/// mean(ce_weight * (-log p_t) + focal_weight * (-alpha (1-p_t)^gamma log p_t)).
struct LossConfig {
  double ce_weight = 0.6;
  double focal_weight = 0.4;
  double focal_alpha = 0.5;
  double focal_gamma = 2.5;
};

template <typename Scalar>
struct LossValue {
  Scalar value = Scalar(0);
  Scalar ce = Scalar(0);     // mean cross-entropy, unweighted
  Scalar focal = Scalar(0);  // mean focal term, unweighted
  Eigen::MatrixX<Scalar> dlogits;
};

/// Loss of a probability batch (rows sum to 1) against integer targets,
/// plus the exact gradient with respect to the logits that produced the
/// probabilities. log arguments are clamped at 1e-12.
template <typename Scalar>
LossValue<Scalar> combined_loss(const Eigen::MatrixX<Scalar>& probs,
                                const Eigen::VectorXi& targets,
                                const LossConfig& cfg = {}) {
  const Eigen::Index B = probs.rows();
  if (targets.size() != B) throw std::logic_error("combined_loss: target count mismatch");
  const Scalar w_ce = static_cast<Scalar>(cfg.ce_weight);
  const Scalar w_fl = static_cast<Scalar>(cfg.focal_weight);
  const Scalar alpha = static_cast<Scalar>(cfg.focal_alpha);
  const Scalar gamma = static_cast<Scalar>(cfg.focal_gamma);
  const Scalar floor = Scalar(1e-12);

  LossValue<Scalar> out;
  out.dlogits.setZero(B, probs.cols());
  Scalar ce_sum = Scalar(0);
  Scalar fl_sum = Scalar(0);
  for (Eigen::Index r = 0; r < B; ++r) {
    const int t = targets(r);
    if (t < 0 || t >= probs.cols()) throw std::logic_error("combined_loss: target out of range");
    const Scalar pt = probs(r, t);
    // floor only genuinely small values; a NaN probability must stay NaN so
    // the caller can see the divergence
    const Scalar pc = pt < floor ? floor : pt;
    const Scalar log_pc = std::log(pc);
    const Scalar one_m = Scalar(1) - pc;
    const Scalar pow_g = std::pow(one_m, gamma);
    const Scalar pow_gm1 = std::pow(one_m, gamma - Scalar(1));
    ce_sum += -log_pc;
    fl_sum += -alpha * pow_g * log_pc;
    // d/dp of the weighted per-sample loss, then the softmax chain
    // dp_t/dlogit_j = p_t (delta_tj - p_j), averaged over the batch.
    const Scalar g = -w_ce / pc + w_fl * alpha * (gamma * pow_gm1 * log_pc - pow_g / pc);
    const Scalar factor = g * pt / static_cast<Scalar>(B);
    out.dlogits.row(r) = -factor * probs.row(r);
    out.dlogits(r, t) += factor;
  }
  out.ce = ce_sum / static_cast<Scalar>(B);
  out.focal = fl_sum / static_cast<Scalar>(B);
  out.value = w_ce * out.ce + w_fl * out.focal;
  return out;
}

}  // namespace branchnet
