#pragma once

#include <cstdint>
#include <vector>

#include "tomo/geometry.hpp"
#include "tomo/projector.hpp"

namespace tomo {

// Precomputed tables for the differentiable fan-beam FBP
// (rebin to parallel -> ramp filter -> backproject).
//
// The rebinning uses t = D sin(gamma), theta = beta + gamma as two chained 1D
// linear interpolations: first along the view axis (per detector row, with
// 2*pi wraparound) onto a theta grid covering [0, 2*pi), then along the
// detector axis onto the uniform t grid. Conjugate rays (t, theta) and
// (-t, theta + pi) are averaged to fold the result into theta in [0, pi).
struct RilPlan {
    FanGeometry fan;
    ParallelGeometry parallel;  // theta in [0, pi)
    int n_theta_full = 0;       // 2 * parallel.n_views, theta in [0, 2*pi)
    int fft_len = 0;            // next power of two >= 2 * n_detectors

    // View interpolation: for detector row i and full-theta index k,
    // beta = theta_k - gamma_i interpolates between fan views
    // view_base[i*n_theta_full + k] and (base+1) mod n_views.
    std::vector<std::int32_t> view_base;
    std::vector<double> view_frac;

    // Detector interpolation: uniform t index a interpolates between gamma
    // rows det_base[a] and det_base[a]+1 (clamped at the edges).
    std::vector<std::int32_t> det_base;
    std::vector<double> det_frac;

    // Residual FBP gain; the discrete filter and Delta-theta weights are
    // normalized so this stays 1.
    double gain = 1.0;
};

RilPlan make_ril_plan(const FanGeometry& fan);

template <typename T>
SinogramT<T> fan_to_parallel(const SinogramT<T>& y_fan, const RilPlan& plan);

// Transpose of fan_to_parallel as a linear map (used by ril_backward and
// exposed for the adjoint tests).
template <typename T>
SinogramT<T> fan_to_parallel_adjoint(const SinogramT<T>& grad_para, const RilPlan& plan);

// Per view: zero-pad the detector column to fft_len, DFT, multiply bin k by
// |f_k| / Delta-t with f_k the signed fractional DFT frequency (DC -> 0),
// inverse DFT, crop. Self-adjoint.
template <typename T>
SinogramT<T> ramlak_filter(const SinogramT<T>& y_para, const RilPlan& plan);

// X(u, v) = Delta-theta * sum_i lerp(Q(., theta_i), t_i) with
// t_i = u cos(theta_i) + v sin(theta_i); pixels outside the FOV circle are 0.
template <typename T>
ImageGridT<T> backproject(const SinogramT<T>& q, const RilPlan& plan, int side, double spacing);

template <typename T>
SinogramT<T> backproject_adjoint(const ImageGridT<T>& grad_x, const RilPlan& plan);

// The Radon inversion layer f_R: backproject(ramlak(fan_to_parallel(y))).
template <typename T>
ImageGridT<T> ril_forward(const SinogramT<T>& y_fan, const RilPlan& plan, int side,
                          double spacing);

// Exact transpose of ril_forward; maps an image-domain gradient to the fan
// sinogram domain.
template <typename T>
SinogramT<T> ril_backward(const ImageGridT<T>& grad_x, const RilPlan& plan);

template <typename T>
struct RcLossResult {
    double value = 0.0;
    SinogramT<T> grad;
};

// Mean absolute error between f_R(y_out) and x_gt over in-FOV pixels, with
// its gradient in the fan sinogram domain.
template <typename T>
RcLossResult<T> rc_loss(const SinogramT<T>& y_out, const ImageGridT<T>& x_gt,
                        const RilPlan& plan);

}  // namespace tomo
