// Test-only reference implementations, kept independent of the library code
// paths they are used to check.
#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "tomo/geometry.hpp"
#include "tomo/projector.hpp"

namespace oracle {

using Vec = std::vector<double>;
using LinOp = std::function<Vec(const Vec&)>;

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec random_vec(std::size_t n, std::mt19937& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Vec v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

template <typename T>
Vec to_vec(const tomo::Tensor2<T>& t) {
    Vec v(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) v[i] = static_cast<double>(t.data()[i]);
    return v;
}

template <typename T>
tomo::Tensor2<T> to_tensor(const Vec& v, int rows, int cols) {
    std::vector<T> data(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) data[i] = static_cast<T>(v[i]);
    return tomo::Tensor2<T>::from_data(rows, cols, std::move(data));
}

// Explicit matrix of a linear operator, assembled column by column with basis
// vectors.
struct DenseMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;  // row-major

    Vec apply(const Vec& x) const {
        Vec y(rows, 0.0);
        for (int r = 0; r < rows; ++r) {
            double s = 0.0;
            for (int c = 0; c < cols; ++c) s += a[static_cast<std::size_t>(r) * cols + c] * x[c];
            y[r] = s;
        }
        return y;
    }
    Vec apply_transpose(const Vec& y) const {
        Vec x(cols, 0.0);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                x[c] += a[static_cast<std::size_t>(r) * cols + c] * y[r];
        return x;
    }
};

inline DenseMatrix assemble(const LinOp& op, int in_dim, int out_dim) {
    DenseMatrix m;
    m.rows = out_dim;
    m.cols = in_dim;
    m.a.assign(static_cast<std::size_t>(in_dim) * out_dim, 0.0);
    for (int c = 0; c < in_dim; ++c) {
        Vec e(in_dim, 0.0);
        e[c] = 1.0;
        const Vec col = op(e);
        for (int r = 0; r < out_dim; ++r) m.a[static_cast<std::size_t>(r) * in_dim + c] = col[r];
    }
    return m;
}

// Chord of a disc of radius r at signed distance d from its center.
inline double disc_chord(double mu, double r, double d) {
    const double h2 = r * r - d * d;
    return h2 > 0.0 ? 2.0 * mu * std::sqrt(h2) : 0.0;
}

// |f|/dt ramp applied through direct O(L^2) DFT sums.
inline std::vector<double> ramlak_reference(const std::vector<double>& col, int L, double dt) {
    const int n = static_cast<int>(col.size());
    std::vector<std::complex<double>> spec(L, 0.0);
    for (int k = 0; k < L; ++k) {
        std::complex<double> s = 0.0;
        for (int m = 0; m < n; ++m)
            s += col[m] * std::polar(1.0, -2.0 * std::numbers::pi * k * m / L);
        const double f = k <= L / 2 ? static_cast<double>(k) / L : static_cast<double>(k - L) / L;
        spec[k] = s * (std::abs(f) / dt);
    }
    std::vector<double> out(n, 0.0);
    for (int m = 0; m < n; ++m) {
        std::complex<double> s = 0.0;
        for (int k = 0; k < L; ++k)
            s += spec[k] * std::polar(1.0, 2.0 * std::numbers::pi * k * m / L);
        out[m] = s.real() / L;
    }
    return out;
}

// Gaussian blob with analytic line integrals: any line at distance d from the
// center integrates to amp * sigma * sqrt(2*pi) * exp(-d^2 / (2 sigma^2)).
struct GaussianBlob {
    double cu = 0.0;
    double cv = 0.0;
    double sigma = 1.0;
    double amp = 1.0;

    double value(double u, double v) const {
        const double du = u - cu, dv = v - cv;
        return amp * std::exp(-(du * du + dv * dv) / (2.0 * sigma * sigma));
    }
    double line_integral(double dist) const {
        return amp * sigma * std::sqrt(2.0 * std::numbers::pi) *
               std::exp(-dist * dist / (2.0 * sigma * sigma));
    }
};

template <typename T>
tomo::ImageGridT<T> render_blobs(int side, double spacing,
                                 const std::vector<GaussianBlob>& blobs) {
    tomo::ImageGridT<T> x(side, spacing);
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) {
            double s = 0.0;
            for (const auto& b : blobs) s += b.value(x.u(c), x.v(r));
            x.values(r, c) = static_cast<T>(s);
        }
    return x;
}

// Exact parallel sinogram of a blob sum; ray (t, theta) passes at distance
// |cu cos + cv sin - t| from each center.
template <typename T>
tomo::SinogramT<T> analytic_parallel_sinogram(const std::vector<GaussianBlob>& blobs,
                                              const tomo::ParallelGeometry& g) {
    auto y = tomo::make_parallel_sinogram<T>(g);
    for (int j = 0; j < g.n_views; ++j) {
        const double ct = std::cos(g.theta(j));
        const double st = std::sin(g.theta(j));
        for (int i = 0; i < g.n_detectors; ++i) {
            double s = 0.0;
            for (const auto& b : blobs)
                s += b.line_integral(b.cu * ct + b.cv * st - g.t(i));
            y.values(i, j) = static_cast<T>(s);
        }
    }
    return y;
}

// Independent filtered back-projection in f64: spatial-domain convolution
// with the bandlimited ramp impulse response, then linear-interpolation
// backprojection. No code shared with the library FBP.
template <typename T>
tomo::ImageGridT<double> reference_fbp(const tomo::SinogramT<T>& y,
                                       const tomo::ParallelGeometry& g, int side,
                                       double spacing) {
    const int n = g.n_detectors;
    const int views = g.n_views;
    const double dt = g.detector_spacing_mm;

    std::vector<double> kernel(2 * n - 1);
    for (int k = -(n - 1); k <= n - 1; ++k) {
        double h;
        if (k == 0)
            h = 1.0 / (4.0 * dt * dt);
        else if (k % 2 == 0)
            h = 0.0;
        else
            h = -1.0 / (std::numbers::pi * std::numbers::pi * k * k * dt * dt);
        kernel[k + n - 1] = h;
    }

    std::vector<double> q(static_cast<std::size_t>(n) * views, 0.0);
    for (int j = 0; j < views; ++j)
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int m = 0; m < n; ++m)
                s += static_cast<double>(y.values(m, j)) * kernel[i - m + n - 1];
            q[static_cast<std::size_t>(i) * views + j] = s * dt;
        }

    tomo::ImageGridT<double> x(side, spacing);
    const double t0 = g.t(0);
    const double fov2 = x.fov_radius() * x.fov_radius();
    const double d_theta = g.angle_spacing_rad;
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) {
            const double u = x.u(c), v = x.v(r);
            if (u * u + v * v > fov2) continue;
            double s = 0.0;
            for (int j = 0; j < views; ++j) {
                const double t = u * std::cos(g.theta(j)) + v * std::sin(g.theta(j));
                const double a = (t - t0) / dt;
                const int a0 = static_cast<int>(std::floor(a));
                const double w = a - a0;
                if (a0 >= 0 && a0 < n) s += (1.0 - w) * q[static_cast<std::size_t>(a0) * views + j];
                if (a0 + 1 >= 0 && a0 + 1 < n)
                    s += w * q[static_cast<std::size_t>(a0 + 1) * views + j];
            }
            x.values(r, c) = d_theta * s;
        }
    return x;
}

// Plain sliding-window SSIM with the standard constants.
template <typename T>
double ssim_reference(const tomo::ImageGridT<T>& x, const tomo::ImageGridT<T>& ref,
                      double peak) {
    const int side = x.side;
    const int win = 11, h = 5;
    const double sigma = 1.5;
    std::vector<double> kern(win * win);
    double ksum = 0.0;
    for (int r = -h; r <= h; ++r)
        for (int c = -h; c <= h; ++c) {
            const double g = std::exp(-(r * r + c * c) / (2.0 * sigma * sigma));
            kern[(r + h) * win + (c + h)] = g;
            ksum += g;
        }
    for (auto& k : kern) k /= ksum;

    const double c1 = 0.01 * peak * 0.01 * peak;
    const double c2 = 0.03 * peak * 0.03 * peak;
    double acc = 0.0;
    long count = 0;
    for (int r = h; r < side - h; ++r)
        for (int c = h; c < side - h; ++c) {
            double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
            for (int a = -h; a <= h; ++a)
                for (int b = -h; b <= h; ++b) {
                    const double w = kern[(a + h) * win + (b + h)];
                    const double pv = static_cast<double>(x.values(r + a, c + b));
                    const double qv = static_cast<double>(ref.values(r + a, c + b));
                    mx += w * pv;
                    my += w * qv;
                    xx += w * pv * pv;
                    yy += w * qv * qv;
                    xy += w * pv * qv;
                }
            acc += ((2 * mx * my + c1) * (2 * (xy - mx * my) + c2)) /
                   ((mx * mx + my * my + c1) * ((xx - mx * mx) + (yy - my * my) + c2));
            ++count;
        }
    return acc / count;
}

}  // namespace oracle
