#include "tomo/projector.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "tomo/threading.hpp"

namespace tomo {

namespace {

// Both geometries reduce to integrating over a chord of the FOV circle:
// chord center, unit direction and half-length. Midpoint samples with a step
// no larger than the requested one, refined so an integer number of samples
// spans the chord exactly.
struct Chord {
    double cx, cy;  // chord center
    double dx, dy;  // unit direction
    double half;    // half-length; <= 0 means the ray misses the FOV
};

template <typename T>
double integrate_chord(const Tensor2<T>& img, int side, double inv_sp, const Chord& ch,
                       double step) {
    const int nsteps = std::max(1, static_cast<int>(std::ceil(2.0 * ch.half / step)));
    const double ds = 2.0 * ch.half / nsteps;
    const double half_idx = (side - 1) / 2.0;
    double sum = 0.0;
    for (int m = 0; m < nsteps; ++m) {
        const double tau = -ch.half + (m + 0.5) * ds;
        const double u = ch.cx + tau * ch.dx;
        const double v = ch.cy + tau * ch.dy;
        const double c = u * inv_sp + half_idx;
        const double r = half_idx - v * inv_sp;
        const int c0 = static_cast<int>(std::floor(c));
        const int r0 = static_cast<int>(std::floor(r));
        const double wc = c - c0;
        const double wr = r - r0;
        if (r0 >= 0 && r0 < side) {
            if (c0 >= 0 && c0 < side) sum += (1.0 - wr) * (1.0 - wc) * img(r0, c0);
            if (c0 + 1 >= 0 && c0 + 1 < side) sum += (1.0 - wr) * wc * img(r0, c0 + 1);
        }
        if (r0 + 1 >= 0 && r0 + 1 < side) {
            if (c0 >= 0 && c0 < side) sum += wr * (1.0 - wc) * img(r0 + 1, c0);
            if (c0 + 1 >= 0 && c0 + 1 < side) sum += wr * wc * img(r0 + 1, c0 + 1);
        }
    }
    return sum * ds;
}

// Transpose of integrate_chord: identical samples and weights, scattering
// value * ds into the image.
template <typename T>
void scatter_chord(Tensor2<T>& img, int side, double inv_sp, const Chord& ch, double step,
                   double value) {
    const int nsteps = std::max(1, static_cast<int>(std::ceil(2.0 * ch.half / step)));
    const double ds = 2.0 * ch.half / nsteps;
    const double half_idx = (side - 1) / 2.0;
    const double vds = value * ds;
    for (int m = 0; m < nsteps; ++m) {
        const double tau = -ch.half + (m + 0.5) * ds;
        const double u = ch.cx + tau * ch.dx;
        const double v = ch.cy + tau * ch.dy;
        const double c = u * inv_sp + half_idx;
        const double r = half_idx - v * inv_sp;
        const int c0 = static_cast<int>(std::floor(c));
        const int r0 = static_cast<int>(std::floor(r));
        const double wc = c - c0;
        const double wr = r - r0;
        if (r0 >= 0 && r0 < side) {
            if (c0 >= 0 && c0 < side) img(r0, c0) += static_cast<T>((1.0 - wr) * (1.0 - wc) * vds);
            if (c0 + 1 >= 0 && c0 + 1 < side)
                img(r0, c0 + 1) += static_cast<T>((1.0 - wr) * wc * vds);
        }
        if (r0 + 1 >= 0 && r0 + 1 < side) {
            if (c0 >= 0 && c0 < side) img(r0 + 1, c0) += static_cast<T>(wr * (1.0 - wc) * vds);
            if (c0 + 1 >= 0 && c0 + 1 < side)
                img(r0 + 1, c0 + 1) += static_cast<T>(wr * wc * vds);
        }
    }
}

Chord parallel_chord(const ParallelGeometry& g, int i, int j, double fov_radius) {
    const double theta = g.theta(j);
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    const double t = g.t(i);
    Chord ch{t * ct, t * st, -st, ct, 0.0};
    const double disc = fov_radius * fov_radius - t * t;
    ch.half = disc > 0.0 ? std::sqrt(disc) : 0.0;
    return ch;
}

Chord fan_chord(const FanGeometry& g, int i, int j, double fov_radius) {
    const double beta = g.beta(j);
    const double gamma = g.gamma(i);
    const double phi = beta + gamma;
    const double D = g.source_distance_mm;
    const double sx = -D * std::sin(beta);
    const double sy = D * std::cos(beta);
    const double dx = std::sin(phi);
    const double dy = -std::cos(phi);
    const double tau_mid = D * std::cos(gamma);
    Chord ch{sx + tau_mid * dx, sy + tau_mid * dy, dx, dy, 0.0};
    const double t = D * std::sin(gamma);
    const double disc = fov_radius * fov_radius - t * t;
    ch.half = disc > 0.0 ? std::sqrt(disc) : 0.0;
    return ch;
}

void check_fan_covers(const FanGeometry& g, double fov_radius) {
    g.validate();
    const double reach = g.source_distance_mm * std::sin(g.gamma_max());
    if (reach + 1e-9 < fov_radius)
        throw ValidationError("fan geometry does not cover the image FOV circle");
    if (!(g.source_distance_mm > fov_radius))
        throw ValidationError("X-ray source lies inside the image FOV circle");
}

template <typename T, typename ChordFn>
void adjoint_scatter(const Tensor2<T>& y, int n_det, int n_views, ImageGridT<T>& out,
                     double step, const ChordFn& chord_of) {
    const double inv_sp = 1.0 / out.pixel_spacing_mm;
    const int side = out.side;
    std::vector<Tensor2<T>> stripes(kScatterStripes, Tensor2<T>(side, side, T{}));
    parallel_for(kScatterStripes, [&](std::int64_t s0, std::int64_t s1) {
        for (int s = static_cast<int>(s0); s < static_cast<int>(s1); ++s) {
            const int jb = static_cast<int>(static_cast<std::int64_t>(n_views) * s /
                                            kScatterStripes);
            const int je = static_cast<int>(static_cast<std::int64_t>(n_views) * (s + 1) /
                                            kScatterStripes);
            for (int j = jb; j < je; ++j)
                for (int i = 0; i < n_det; ++i) {
                    const Chord ch = chord_of(i, j);
                    if (ch.half <= 0.0) continue;
                    scatter_chord(stripes[s], side, inv_sp, ch, step,
                                  static_cast<double>(y(i, j)));
                }
        }
    });
    for (int s = 0; s < kScatterStripes; ++s) {
        T* dst = out.values.data();
        const T* src = stripes[s].data();
        for (std::size_t p = 0; p < out.values.size(); ++p) dst[p] += src[p];
    }
}

}  // namespace

template <typename T>
SinogramT<T> make_fan_sinogram(const FanGeometry& g, T fill) {
    SinogramT<T> y;
    y.kind = SinoKind::fan;
    y.geometry = g;
    y.values = Tensor2<T>(g.n_detectors, g.n_views, fill);
    return y;
}

template <typename T>
SinogramT<T> make_parallel_sinogram(const ParallelGeometry& g, T fill) {
    SinogramT<T> y;
    y.kind = SinoKind::parallel;
    y.geometry = g;
    y.values = Tensor2<T>(g.n_detectors, g.n_views, fill);
    return y;
}

bool MetalTrace::empty() const {
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values.data()[i]) return false;
    return true;
}

bool MetalTrace::full() const {
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!values.data()[i]) return false;
    return true;
}

template <typename T>
SinogramT<T> forward_parallel(const ImageGridT<T>& x, const ParallelGeometry& g, double step_mm) {
    g.validate();
    if (x.side <= 0) throw ValidationError("forward_parallel: empty image");
    const double step = step_mm > 0.0 ? step_mm : x.pixel_spacing_mm / 2.0;
    const double R = x.fov_radius();
    const double inv_sp = 1.0 / x.pixel_spacing_mm;
    SinogramT<T> y = make_parallel_sinogram<T>(g);
    parallel_for(g.n_views, [&](std::int64_t j0, std::int64_t j1) {
        for (int j = static_cast<int>(j0); j < static_cast<int>(j1); ++j)
            for (int i = 0; i < g.n_detectors; ++i) {
                const Chord ch = parallel_chord(g, i, j, R);
                y.values(i, j) = ch.half > 0.0
                                     ? static_cast<T>(integrate_chord(x.values, x.side, inv_sp,
                                                                      ch, step))
                                     : T{};
            }
    });
    return y;
}

template <typename T>
SinogramT<T> forward_fan(const ImageGridT<T>& x, const FanGeometry& g, double step_mm) {
    if (x.side <= 0) throw ValidationError("forward_fan: empty image");
    const double R = x.fov_radius();
    check_fan_covers(g, R);
    const double step = step_mm > 0.0 ? step_mm : x.pixel_spacing_mm / 2.0;
    const double inv_sp = 1.0 / x.pixel_spacing_mm;
    SinogramT<T> y = make_fan_sinogram<T>(g);
    parallel_for(g.n_views, [&](std::int64_t j0, std::int64_t j1) {
        for (int j = static_cast<int>(j0); j < static_cast<int>(j1); ++j)
            for (int i = 0; i < g.n_detectors; ++i) {
                const Chord ch = fan_chord(g, i, j, R);
                y.values(i, j) = ch.half > 0.0
                                     ? static_cast<T>(integrate_chord(x.values, x.side, inv_sp,
                                                                      ch, step))
                                     : T{};
            }
    });
    return y;
}

template <typename T>
ImageGridT<T> adjoint_parallel(const SinogramT<T>& y, const ParallelGeometry& g, int side,
                               double spacing, double step_mm) {
    if (y.kind != SinoKind::parallel)
        throw ValidationError("adjoint_parallel: sinogram kind mismatch");
    g.validate();
    if (y.values.rows() != g.n_detectors || y.values.cols() != g.n_views)
        throw ValidationError("adjoint_parallel: sinogram/geometry dimension mismatch");
    ImageGridT<T> out(side, spacing);
    const double step = step_mm > 0.0 ? step_mm : spacing / 2.0;
    const double R = out.fov_radius();
    adjoint_scatter(y.values, g.n_detectors, g.n_views, out, step,
                    [&](int i, int j) { return parallel_chord(g, i, j, R); });
    return out;
}

template <typename T>
ImageGridT<T> adjoint_fan(const SinogramT<T>& y, const FanGeometry& g, int side, double spacing,
                          double step_mm) {
    if (y.kind != SinoKind::fan) throw ValidationError("adjoint_fan: sinogram kind mismatch");
    if (y.values.rows() != g.n_detectors || y.values.cols() != g.n_views)
        throw ValidationError("adjoint_fan: sinogram/geometry dimension mismatch");
    ImageGridT<T> out(side, spacing);
    check_fan_covers(g, out.fov_radius());
    const double step = step_mm > 0.0 ? step_mm : spacing / 2.0;
    const double R = out.fov_radius();
    adjoint_scatter(y.values, g.n_detectors, g.n_views, out, step,
                    [&](int i, int j) { return fan_chord(g, i, j, R); });
    return out;
}

MetalTrace metal_trace(const MetalMask& m, const FanGeometry& g, double spacing, double eps) {
    ImageGridT<float> indicator;
    indicator.side = m.side;
    indicator.pixel_spacing_mm = spacing;
    indicator.values = m.values.cast<float>();
    const SinogramT<float> proj = forward_fan(indicator, g);
    MetalTrace t(g.n_detectors, g.n_views);
    for (int i = 0; i < g.n_detectors; ++i)
        for (int j = 0; j < g.n_views; ++j)
            t.values(i, j) = proj.values(i, j) > eps ? 1 : 0;
    return t;
}

template SinogramT<float> make_fan_sinogram<float>(const FanGeometry&, float);
template SinogramT<double> make_fan_sinogram<double>(const FanGeometry&, double);
template SinogramT<float> make_parallel_sinogram<float>(const ParallelGeometry&, float);
template SinogramT<double> make_parallel_sinogram<double>(const ParallelGeometry&, double);
template SinogramT<float> forward_parallel<float>(const ImageGridT<float>&,
                                                  const ParallelGeometry&, double);
template SinogramT<double> forward_parallel<double>(const ImageGridT<double>&,
                                                    const ParallelGeometry&, double);
template SinogramT<float> forward_fan<float>(const ImageGridT<float>&, const FanGeometry&,
                                             double);
template SinogramT<double> forward_fan<double>(const ImageGridT<double>&, const FanGeometry&,
                                               double);
template ImageGridT<float> adjoint_parallel<float>(const SinogramT<float>&,
                                                   const ParallelGeometry&, int, double, double);
template ImageGridT<double> adjoint_parallel<double>(const SinogramT<double>&,
                                                     const ParallelGeometry&, int, double,
                                                     double);
template ImageGridT<float> adjoint_fan<float>(const SinogramT<float>&, const FanGeometry&, int,
                                              double, double);
template ImageGridT<double> adjoint_fan<double>(const SinogramT<double>&, const FanGeometry&,
                                                int, double, double);

}  // namespace tomo
