#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "branchnet/errors.hpp"

namespace branchnet {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates for one tensor; lazily sized on first use.
template <typename Mat>
struct AdamState {
  Mat m;
  Mat v;
  long step = 0;
};

/// One bias-corrected Adam update in place.
template <typename Mat>
void adam_update(Mat& w, const Mat& grad, AdamState<Mat>& st, const AdamConfig& cfg,
                 typename Mat::Scalar lr) {
  using S = typename Mat::Scalar;
  if (!grad.allFinite()) throw NumericError("adam_update: non-finite gradient");
  if (st.step == 0) {
    st.m = Mat::Zero(w.rows(), w.cols());
    st.v = Mat::Zero(w.rows(), w.cols());
  }
  const S b1 = static_cast<S>(cfg.beta1);
  const S b2 = static_cast<S>(cfg.beta2);
  st.step += 1;
  st.m = b1 * st.m + (S(1) - b1) * grad;
  st.v = b2 * st.v + (S(1) - b2) * grad.cwiseAbs2();
  const S bc1 = S(1) - std::pow(b1, static_cast<S>(st.step));
  const S bc2 = S(1) - std::pow(b2, static_cast<S>(st.step));
  w.array() -= lr * (st.m.array() / bc1) /
               ((st.v.array() / bc2).sqrt() + static_cast<S>(cfg.eps));
}

/// Adam plus the connectivity contract: after the update every off-mask
/// entry is exactly zero again (select, not multiply, so the stored zeros
/// stay bit-exact).
template <typename Mat>
void adam_step(Mat& w1, const Mat& grad, AdamState<Mat>& st, const AdamConfig& cfg,
               typename Mat::Scalar lr, const Mat& mask) {
  using S = typename Mat::Scalar;
  adam_update(w1, grad, st, cfg, lr);
  w1 = (mask.array() == S(1)).select(w1, S(0));
}

/// Cosine-annealed learning rate with warm restarts. t counts restart-free
/// progress (epochs by default); each period i spans t0 * t_mult^i and the
/// rate falls from lr_max to eta_min along a half cosine, snapping back at
/// every period boundary.
struct CosineSchedule {
  double lr_max = 0.01;
  double eta_min = 0.0;
  double t0 = 180.0;
  double t_mult = 1.0;
};

inline double cosine_lr(double t, const CosineSchedule& s) {
  if (t < 0) t = 0;
  double period = s.t0;
  double tc = t;
  while (tc >= period) {
    tc -= period;
    period *= s.t_mult;
  }
  return s.eta_min +
         (s.lr_max - s.eta_min) * (1.0 + std::cos(std::numbers::pi * tc / period)) / 2.0;
}

}  // namespace branchnet
