#include "tomo/ril.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "tomo/threading.hpp"

namespace tomo {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Iterative radix-2 complex FFT; lengths are powers of two by construction.
template <typename T>
void fft_pow2(std::vector<std::complex<T>>& a, bool inverse) {
    const int n = static_cast<int>(a.size());
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? kTwoPi : -kTwoPi) / len;
        const std::complex<T> wl(static_cast<T>(std::cos(ang)), static_cast<T>(std::sin(ang)));
        for (int i = 0; i < n; i += len) {
            std::complex<T> w(1, 0);
            for (int k = 0; k < len / 2; ++k) {
                const std::complex<T> u = a[i + k];
                const std::complex<T> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse) {
        const T inv_n = static_cast<T>(1.0 / n);
        for (auto& x : a) x *= inv_n;
    }
}

template <typename T>
void check_parallel_dims(const SinogramT<T>& y, const RilPlan& plan, const char* who) {
    if (y.kind != SinoKind::parallel)
        throw ValidationError(std::string(who) + ": sinogram kind mismatch");
    if (y.values.rows() != plan.parallel.n_detectors || y.values.cols() != plan.parallel.n_views)
        throw ValidationError(std::string(who) + ": sinogram/plan dimension mismatch");
}

}  // namespace

RilPlan make_ril_plan(const FanGeometry& fan) {
    fan.validate();
    RilPlan plan;
    plan.fan = fan;
    plan.parallel = derive_parallel(fan);
    plan.n_theta_full = 2 * plan.parallel.n_views;
    plan.fft_len = next_pow2(2 * fan.n_detectors);

    const int n_det = fan.n_detectors;
    const int n_views = fan.n_views;
    const double d_beta = kTwoPi / n_views;
    const double d_theta = plan.parallel.angle_spacing_rad;

    plan.view_base.resize(static_cast<std::size_t>(n_det) * plan.n_theta_full);
    plan.view_frac.resize(plan.view_base.size());
    for (int i = 0; i < n_det; ++i) {
        const double gamma = fan.gamma(i);
        for (int k = 0; k < plan.n_theta_full; ++k) {
            double beta = k * d_theta - gamma;
            beta -= kTwoPi * std::floor(beta / kTwoPi);  // wrap to [0, 2*pi)
            double pos = beta / d_beta;
            int base = static_cast<int>(std::floor(pos));
            double frac = pos - base;
            if (base >= n_views) {  // guard fp roundoff at the wrap seam
                base -= n_views;
            }
            plan.view_base[static_cast<std::size_t>(i) * plan.n_theta_full + k] = base;
            plan.view_frac[static_cast<std::size_t>(i) * plan.n_theta_full + k] = frac;
        }
    }

    // Non-uniform detector positions t_i = D sin(gamma_i), ascending, with the
    // same endpoints as the uniform grid.
    std::vector<double> t_rows(n_det);
    for (int i = 0; i < n_det; ++i)
        t_rows[i] = fan.source_distance_mm * std::sin(fan.gamma(i));
    plan.det_base.resize(n_det);
    plan.det_frac.resize(n_det);
    for (int a = 0; a < n_det; ++a) {
        const double t = plan.parallel.t(a);
        if (t <= t_rows.front()) {
            plan.det_base[a] = 0;
            plan.det_frac[a] = 0.0;
            continue;
        }
        if (t >= t_rows.back()) {
            plan.det_base[a] = n_det - 2;
            plan.det_frac[a] = 1.0;
            continue;
        }
        const auto it = std::upper_bound(t_rows.begin(), t_rows.end(), t);
        const int hi = static_cast<int>(it - t_rows.begin());
        const int lo = hi - 1;
        plan.det_base[a] = lo;
        plan.det_frac[a] = (t - t_rows[lo]) / (t_rows[hi] - t_rows[lo]);
    }
    return plan;
}

template <typename T>
SinogramT<T> fan_to_parallel(const SinogramT<T>& y_fan, const RilPlan& plan) {
    if (y_fan.kind != SinoKind::fan)
        throw ValidationError("fan_to_parallel: sinogram kind mismatch");
    if (y_fan.values.rows() != plan.fan.n_detectors || y_fan.values.cols() != plan.fan.n_views)
        throw ValidationError("fan_to_parallel: sinogram/plan dimension mismatch");

    const int n_det = plan.fan.n_detectors;
    const int n_views = plan.fan.n_views;
    const int n_full = plan.n_theta_full;
    const int n_half = plan.parallel.n_views;

    // view-axis interpolation: theta = beta + gamma per detector row
    Tensor2<T> y1(n_det, n_full);
    parallel_for(n_det, [&](std::int64_t i0, std::int64_t i1) {
        for (int i = static_cast<int>(i0); i < static_cast<int>(i1); ++i)
            for (int k = 0; k < n_full; ++k) {
                const std::size_t idx = static_cast<std::size_t>(i) * n_full + k;
                const int b = plan.view_base[idx];
                const int b2 = b + 1 == n_views ? 0 : b + 1;
                const double w = plan.view_frac[idx];
                y1(i, k) = static_cast<T>((1.0 - w) * y_fan.values(i, b) +
                                          w * y_fan.values(i, b2));
            }
    });

    // detector-axis interpolation: non-uniform D sin(gamma) -> uniform t
    Tensor2<T> y2(n_det, n_full);
    parallel_for(n_det, [&](std::int64_t a0, std::int64_t a1) {
        for (int a = static_cast<int>(a0); a < static_cast<int>(a1); ++a) {
            const int lo = plan.det_base[a];
            const double w = plan.det_frac[a];
            for (int k = 0; k < n_full; ++k)
                y2(a, k) = static_cast<T>((1.0 - w) * y1(lo, k) + w * y1(lo + 1, k));
        }
    });

    // fold theta in [0, 2*pi) onto [0, pi) by averaging conjugate rays
    SinogramT<T> out = make_parallel_sinogram<T>(plan.parallel);
    parallel_for(n_det, [&](std::int64_t a0, std::int64_t a1) {
        for (int a = static_cast<int>(a0); a < static_cast<int>(a1); ++a)
            for (int j = 0; j < n_half; ++j)
                out.values(a, j) = static_cast<T>(
                    0.5 * (static_cast<double>(y2(a, j)) +
                           static_cast<double>(y2(n_det - 1 - a, j + n_half))));
    });
    return out;
}

template <typename T>
SinogramT<T> fan_to_parallel_adjoint(const SinogramT<T>& grad_para, const RilPlan& plan) {
    check_parallel_dims(grad_para, plan, "fan_to_parallel_adjoint");
    const int n_det = plan.fan.n_detectors;
    const int n_views = plan.fan.n_views;
    const int n_full = plan.n_theta_full;
    const int n_half = plan.parallel.n_views;

    // transpose of the conjugate fold
    Tensor2<T> g2(n_det, n_full);
    parallel_for(n_det, [&](std::int64_t a0, std::int64_t a1) {
        for (int a = static_cast<int>(a0); a < static_cast<int>(a1); ++a)
            for (int k = 0; k < n_full; ++k)
                g2(a, k) = static_cast<T>(
                    0.5 * static_cast<double>(k < n_half
                                                  ? grad_para.values(a, k)
                                                  : grad_para.values(n_det - 1 - a, k - n_half)));
    });

    // transpose of the detector-axis interpolation (scatter within columns)
    Tensor2<T> g1(n_det, n_full, T{});
    parallel_for(n_full, [&](std::int64_t k0, std::int64_t k1) {
        for (int k = static_cast<int>(k0); k < static_cast<int>(k1); ++k)
            for (int a = 0; a < n_det; ++a) {
                const int lo = plan.det_base[a];
                const double w = plan.det_frac[a];
                g1(lo, k) += static_cast<T>((1.0 - w) * g2(a, k));
                g1(lo + 1, k) += static_cast<T>(w * g2(a, k));
            }
    });

    // transpose of the view-axis interpolation (scatter within rows)
    SinogramT<T> out = make_fan_sinogram<T>(plan.fan);
    parallel_for(n_det, [&](std::int64_t i0, std::int64_t i1) {
        for (int i = static_cast<int>(i0); i < static_cast<int>(i1); ++i)
            for (int k = 0; k < n_full; ++k) {
                const std::size_t idx = static_cast<std::size_t>(i) * n_full + k;
                const int b = plan.view_base[idx];
                const int b2 = b + 1 == n_views ? 0 : b + 1;
                const double w = plan.view_frac[idx];
                out.values(i, b) += static_cast<T>((1.0 - w) * g1(i, k));
                out.values(i, b2) += static_cast<T>(w * g1(i, k));
            }
    });
    return out;
}

template <typename T>
SinogramT<T> ramlak_filter(const SinogramT<T>& y_para, const RilPlan& plan) {
    check_parallel_dims(y_para, plan, "ramlak_filter");
    const int n_det = plan.parallel.n_detectors;
    const int n_views = plan.parallel.n_views;
    const int L = plan.fft_len;
    const double dt = plan.parallel.detector_spacing_mm;

    // |f_k| / dt with f_k the signed fractional DFT frequency; DC stays 0.
    std::vector<double> ramp(L);
    for (int k = 0; k < L; ++k) {
        const double f = k <= L / 2 ? static_cast<double>(k) / L
                                    : static_cast<double>(k - L) / L;
        ramp[k] = std::abs(f) / dt;
    }

    SinogramT<T> out = make_parallel_sinogram<T>(plan.parallel);
    parallel_for(n_views, [&](std::int64_t j0, std::int64_t j1) {
        std::vector<std::complex<T>> buf(L);
        for (int j = static_cast<int>(j0); j < static_cast<int>(j1); ++j) {
            for (int i = 0; i < n_det; ++i) buf[i] = std::complex<T>(y_para.values(i, j), 0);
            for (int i = n_det; i < L; ++i) buf[i] = std::complex<T>(0, 0);
            fft_pow2(buf, false);
            for (int k = 0; k < L; ++k) buf[k] *= static_cast<T>(ramp[k]);
            fft_pow2(buf, true);
            for (int i = 0; i < n_det; ++i) out.values(i, j) = buf[i].real();
        }
    });
    return out;
}

template <typename T>
ImageGridT<T> backproject(const SinogramT<T>& q, const RilPlan& plan, int side, double spacing) {
    check_parallel_dims(q, plan, "backproject");
    const int n_det = plan.parallel.n_detectors;
    const int n_views = plan.parallel.n_views;
    const double d_theta = plan.parallel.angle_spacing_rad;
    const double dt = plan.parallel.detector_spacing_mm;
    const double t0 = plan.parallel.t(0);

    std::vector<double> cos_t(n_views), sin_t(n_views);
    for (int j = 0; j < n_views; ++j) {
        cos_t[j] = std::cos(plan.parallel.theta(j));
        sin_t[j] = std::sin(plan.parallel.theta(j));
    }

    ImageGridT<T> x(side, spacing);
    const double fov2 = x.fov_radius() * x.fov_radius();
    parallel_for(side, [&](std::int64_t r0, std::int64_t r1) {
        for (int r = static_cast<int>(r0); r < static_cast<int>(r1); ++r) {
            const double v = x.v(r);
            for (int c = 0; c < side; ++c) {
                const double u = x.u(c);
                if (u * u + v * v > fov2) continue;
                double sum = 0.0;
                for (int j = 0; j < n_views; ++j) {
                    const double a = (u * cos_t[j] + v * sin_t[j] - t0) / dt;
                    const int a0 = static_cast<int>(std::floor(a));
                    const double w1 = a - a0;
                    if (a0 >= 0 && a0 < n_det) sum += (1.0 - w1) * q.values(a0, j);
                    if (a0 + 1 >= 0 && a0 + 1 < n_det) sum += w1 * q.values(a0 + 1, j);
                }
                x.values(r, c) = static_cast<T>(d_theta * sum);
            }
        }
    });
    return x;
}

template <typename T>
SinogramT<T> backproject_adjoint(const ImageGridT<T>& grad_x, const RilPlan& plan) {
    const int n_det = plan.parallel.n_detectors;
    const int n_views = plan.parallel.n_views;
    const double d_theta = plan.parallel.angle_spacing_rad;
    const double dt = plan.parallel.detector_spacing_mm;
    const double t0 = plan.parallel.t(0);
    const int side = grad_x.side;
    const double fov2 = grad_x.fov_radius() * grad_x.fov_radius();

    SinogramT<T> g = make_parallel_sinogram<T>(plan.parallel);
    parallel_for(n_views, [&](std::int64_t j0, std::int64_t j1) {
        for (int j = static_cast<int>(j0); j < static_cast<int>(j1); ++j) {
            const double ct = std::cos(plan.parallel.theta(j));
            const double st = std::sin(plan.parallel.theta(j));
            for (int r = 0; r < side; ++r) {
                const double v = grad_x.v(r);
                for (int c = 0; c < side; ++c) {
                    const double u = grad_x.u(c);
                    if (u * u + v * v > fov2) continue;
                    const double a = (u * ct + v * st - t0) / dt;
                    const int a0 = static_cast<int>(std::floor(a));
                    const double w1 = a - a0;
                    const double gv = d_theta * static_cast<double>(grad_x.values(r, c));
                    if (a0 >= 0 && a0 < n_det) g.values(a0, j) += static_cast<T>((1.0 - w1) * gv);
                    if (a0 + 1 >= 0 && a0 + 1 < n_det)
                        g.values(a0 + 1, j) += static_cast<T>(w1 * gv);
                }
            }
        }
    });
    return g;
}

template <typename T>
ImageGridT<T> ril_forward(const SinogramT<T>& y_fan, const RilPlan& plan, int side,
                          double spacing) {
    ImageGridT<T> x =
        backproject(ramlak_filter(fan_to_parallel(y_fan, plan), plan), plan, side, spacing);
    if (plan.gain != 1.0) {
        for (std::size_t p = 0; p < x.values.size(); ++p)
            x.values.data()[p] = static_cast<T>(x.values.data()[p] * plan.gain);
    }
    return x;
}

template <typename T>
SinogramT<T> ril_backward(const ImageGridT<T>& grad_x, const RilPlan& plan) {
    SinogramT<T> g =
        fan_to_parallel_adjoint(ramlak_filter(backproject_adjoint(grad_x, plan), plan), plan);
    if (plan.gain != 1.0) {
        for (std::size_t p = 0; p < g.values.size(); ++p)
            g.values.data()[p] = static_cast<T>(g.values.data()[p] * plan.gain);
    }
    return g;
}

template <typename T>
RcLossResult<T> rc_loss(const SinogramT<T>& y_out, const ImageGridT<T>& x_gt,
                        const RilPlan& plan) {
    const ImageGridT<T> xhat = ril_forward(y_out, plan, x_gt.side, x_gt.pixel_spacing_mm);
    const int side = x_gt.side;
    const double fov2 = x_gt.fov_radius() * x_gt.fov_radius();

    long n_fov = 0;
    for (int r = 0; r < side; ++r) {
        const double v = x_gt.v(r);
        for (int c = 0; c < side; ++c) {
            const double u = x_gt.u(c);
            if (u * u + v * v <= fov2) ++n_fov;
        }
    }
    if (n_fov == 0) throw ValidationError("rc_loss: empty FOV");

    ImageGridT<T> sign_grad(side, x_gt.pixel_spacing_mm);
    double abs_sum = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n_fov);
    for (int r = 0; r < side; ++r) {
        const double v = x_gt.v(r);
        for (int c = 0; c < side; ++c) {
            const double u = x_gt.u(c);
            if (u * u + v * v > fov2) continue;
            const double res =
                static_cast<double>(xhat.values(r, c)) - static_cast<double>(x_gt.values(r, c));
            abs_sum += std::abs(res);
            sign_grad.values(r, c) =
                static_cast<T>(res > 0.0 ? inv_n : (res < 0.0 ? -inv_n : 0.0));
        }
    }

    RcLossResult<T> out;
    out.value = abs_sum * inv_n;
    out.grad = ril_backward(sign_grad, plan);
    return out;
}

#define TOMO_INSTANTIATE_RIL(T)                                                                  \
    template SinogramT<T> fan_to_parallel<T>(const SinogramT<T>&, const RilPlan&);               \
    template SinogramT<T> fan_to_parallel_adjoint<T>(const SinogramT<T>&, const RilPlan&);       \
    template SinogramT<T> ramlak_filter<T>(const SinogramT<T>&, const RilPlan&);                 \
    template ImageGridT<T> backproject<T>(const SinogramT<T>&, const RilPlan&, int, double);     \
    template SinogramT<T> backproject_adjoint<T>(const ImageGridT<T>&, const RilPlan&);          \
    template ImageGridT<T> ril_forward<T>(const SinogramT<T>&, const RilPlan&, int, double);     \
    template SinogramT<T> ril_backward<T>(const ImageGridT<T>&, const RilPlan&);                 \
    template RcLossResult<T> rc_loss<T>(const SinogramT<T>&, const ImageGridT<T>&,               \
                                        const RilPlan&);

TOMO_INSTANTIATE_RIL(float)
TOMO_INSTANTIATE_RIL(double)

#undef TOMO_INSTANTIATE_RIL

}  // namespace tomo
