#pragma once

#include <string>

#include "tomo/geometry.hpp"
#include "tomo/projector.hpp"
#include "tomo/ril.hpp"

namespace tomo {

// Dual-domain objective: sinogram L1 + Radon-consistency L1 + image L1.
struct LossBreakdown {
    double l_gs = 0.0;
    double l_rc = 0.0;
    double l_gi = 0.0;
    double total = 0.0;
};

struct SolverConfig {
    double step = 1.0;       // initial line-search trial step
    int max_iters = 200;
    double lambda = -1.0;    // < 0: auto-balance to 1e-3 * data / TV at init
    double tv_eps = 1e-6;
    double tol = 1e-6;       // relative objective decrease
    std::string log_path;    // per-iteration CSV when non-empty

    void validate() const;
};

SolverConfig parse_solver_json(const std::string& text);
SolverConfig load_solver_json(const std::string& path);

// Replaces each masked run along the detector axis by the straight line
// between its nearest unmasked neighbors; boundary runs copy the single
// available neighbor; fully masked columns copy the nearest column that
// still has valid data (after its own interpolation). Untraced entries are
// never modified.
template <typename T>
SinogramT<T> li_inpaint(const SinogramT<T>& y, const MetalTrace& m);

// Y_out = M_t . g_out + (1 - M_t) . y_li, elementwise.
template <typename T>
SinogramT<T> combine_sinogram(const SinogramT<T>& g_out, const SinogramT<T>& y_li,
                              const MetalTrace& m);

// X_out = x_li + residual, elementwise.
template <typename T>
ImageGridT<T> combine_image(const ImageGridT<T>& x_li, const ImageGridT<T>& residual);

template <typename T>
LossBreakdown dual_domain_loss(const SinogramT<T>& y_out, const SinogramT<T>& y_gt,
                               const ImageGridT<T>& x_out, const ImageGridT<T>& x_gt,
                               const RilPlan& plan);

// Gradient descent with backtracking line search on
// || (1 - M_t) . (P X - Y) ||^2 + lambda * TV_eps(X).
// Returns the iterate with the lowest objective.
template <typename T>
ImageGridT<T> iterative_mar(const SinogramT<T>& y, const MetalTrace& m, const SolverConfig& cfg,
                            const ImageGridT<T>& init);

// Treats the sinogram entries inside the trace as free variables and
// descends the smoothed L1 between f_R(Y) and x_ref; entries outside the
// trace are bit-identical to the input.
template <typename T>
SinogramT<T> trace_refine(const SinogramT<T>& y_li, const MetalTrace& m,
                          const ImageGridT<T>& x_ref, const SolverConfig& cfg,
                          const RilPlan& plan);

// The masked gradient used by trace_refine; exposed so tests can check that
// entries outside the trace report exactly zero.
template <typename T>
SinogramT<T> trace_refine_gradient(const SinogramT<T>& y, const MetalTrace& m,
                                   const ImageGridT<T>& x_ref, const RilPlan& plan,
                                   double smooth_eps);

// Smoothed total variation sum_p sqrt(du^2 + dv^2 + eps^2) with forward
// differences, plus its gradient (used by iterative_mar; exposed for tests).
template <typename T>
double tv_value(const ImageGridT<T>& x, double eps);
template <typename T>
ImageGridT<T> tv_gradient(const ImageGridT<T>& x, double eps);

}  // namespace tomo
