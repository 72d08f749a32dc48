#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "tomo/projector.hpp"
#include "tomo/threading.hpp"

using namespace tomo;

namespace {

FanGeometry small_fan() { return make_fan_covering_fov(160.0, 90, 80, 32.0); }

ParallelGeometry small_parallel() {
    ParallelGeometry g;
    g.n_detectors = 90;
    g.detector_spacing_mm = 2.0 * 32.0 / 89.0;
    g.n_views = 80;
    g.angle_spacing_rad = std::numbers::pi / 80;
    return g;
}

template <typename T>
ImageGridT<T> random_image(int side, double spacing, std::mt19937& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    ImageGridT<T> x(side, spacing);
    for (std::size_t p = 0; p < x.values.size(); ++p)
        x.values.data()[p] = static_cast<T>(dist(rng));
    return x;
}

}  // namespace

TEST_CASE("zero image projects to a zero sinogram") {
    ImageGrid x(64, 1.0, 0.0f);
    const auto yp = forward_parallel(x, small_parallel());
    const auto yf = forward_fan(x, small_fan());
    for (std::size_t p = 0; p < yp.values.size(); ++p) CHECK(yp.values.data()[p] == 0.0f);
    for (std::size_t p = 0; p < yf.values.size(); ++p) CHECK(yf.values.data()[p] == 0.0f);
}

TEST_CASE("parallel projection of a centered disc matches the analytic chord") {
    const double r = 12.0, mu = 0.02;
    const auto x = ellipse_phantom<float>(64, 1.0, {{0.0, 0.0, r, r, 0.0, mu}});
    const ParallelGeometry g = small_parallel();
    const auto y = forward_parallel(x, g);
    for (int j = 0; j < g.n_views; j += 7)
        for (int i = 0; i < g.n_detectors; ++i) {
            const double t = g.t(i);
            const double expect = oracle::disc_chord(mu, r, t);
            if (std::abs(t) <= 0.9 * r)
                CHECK(y.values(i, j) == doctest::Approx(expect).epsilon(0.02));
            else if (std::abs(t) >= r + 1.0)
                CHECK(std::abs(y.values(i, j)) <= 1e-3 * 2.0 * mu * r);
        }
}

TEST_CASE("fan projection of a centered disc matches the analytic chord") {
    const double r = 12.0, mu = 0.02;
    const auto x = ellipse_phantom<float>(64, 1.0, {{0.0, 0.0, r, r, 0.0, mu}});
    const FanGeometry g = small_fan();
    const auto y = forward_fan(x, g);
    const double D = g.source_distance_mm;
    for (int j = 0; j < g.n_views; j += 11)
        for (int i = 0; i < g.n_detectors; ++i) {
            const double d = D * std::sin(g.gamma(i));  // ray distance from center
            const double expect = oracle::disc_chord(mu, r, d);
            if (std::abs(d) <= 0.9 * r)
                CHECK(y.values(i, j) == doctest::Approx(expect).epsilon(0.02));
            else if (std::abs(d) >= r + 1.0)
                CHECK(std::abs(y.values(i, j)) <= 1e-3 * 2.0 * mu * r);
        }
}

TEST_CASE("fan sinogram of a rotationally symmetric phantom is constant across views") {
    const auto x = oracle::render_blobs<float>(64, 1.0, {{0.0, 0.0, 8.0, 1.0}});
    const FanGeometry g = small_fan();
    const auto y = forward_fan(x, g);
    double vmax = 0.0;
    for (std::size_t p = 0; p < y.values.size(); ++p)
        vmax = std::max(vmax, std::abs(static_cast<double>(y.values.data()[p])));
    for (int i = 0; i < g.n_detectors; ++i)
        for (int j = 1; j < g.n_views; ++j)
            CHECK(std::abs(y.values(i, j) - y.values(i, 0)) <= 0.01 * vmax);
}

TEST_CASE("linearity to float rounding") {
    std::mt19937 rng(11);
    const auto x1 = random_image<float>(48, 1.0, rng);
    const auto x2 = random_image<float>(48, 1.0, rng);
    const float alpha = 2.5f;
    ImageGrid combo(48, 1.0);
    for (std::size_t p = 0; p < combo.values.size(); ++p)
        combo.values.data()[p] = alpha * x1.values.data()[p] + x2.values.data()[p];

    const FanGeometry g = make_fan_covering_fov(120.0, 40, 30, 24.0);
    const auto y1 = forward_fan(x1, g);
    const auto y2 = forward_fan(x2, g);
    const auto yc = forward_fan(combo, g);
    double vmax = 0.0;
    for (std::size_t p = 0; p < yc.values.size(); ++p)
        vmax = std::max(vmax, std::abs(static_cast<double>(yc.values.data()[p])));
    for (std::size_t p = 0; p < yc.values.size(); ++p) {
        const double expect = alpha * static_cast<double>(y1.values.data()[p]) +
                              static_cast<double>(y2.values.data()[p]);
        CHECK(std::abs(yc.values.data()[p] - expect) <= 1e-5 * std::max(vmax, 1.0));
    }
}

TEST_CASE("adjoint dot test") {
    std::mt19937 rng(23);
    const FanGeometry gf = small_fan();
    const ParallelGeometry gp = small_parallel();

    SUBCASE("float, both geometries, 1e-4") {
        for (int trial = 0; trial < 5; ++trial) {
            const auto x = random_image<float>(64, 1.0, rng);
            auto yf = make_fan_sinogram<float>(gf);
            auto yp = make_parallel_sinogram<float>(gp);
            for (std::size_t p = 0; p < yf.values.size(); ++p)
                yf.values.data()[p] = static_cast<float>(oracle::random_vec(1, rng)[0]);
            for (std::size_t p = 0; p < yp.values.size(); ++p)
                yp.values.data()[p] = static_cast<float>(oracle::random_vec(1, rng)[0]);

            const auto px_f = forward_fan(x, gf);
            const auto ptx_f = adjoint_fan(yf, gf, 64, 1.0);
            const double lhs_f = oracle::dot(oracle::to_vec(px_f.values), oracle::to_vec(yf.values));
            const double rhs_f = oracle::dot(oracle::to_vec(x.values), oracle::to_vec(ptx_f.values));
            CHECK(std::abs(lhs_f - rhs_f) <=
                  1e-4 * oracle::norm(oracle::to_vec(px_f.values)) *
                      oracle::norm(oracle::to_vec(yf.values)));

            const auto px_p = forward_parallel(x, gp);
            const auto ptx_p = adjoint_parallel(yp, gp, 64, 1.0);
            const double lhs_p = oracle::dot(oracle::to_vec(px_p.values), oracle::to_vec(yp.values));
            const double rhs_p = oracle::dot(oracle::to_vec(x.values), oracle::to_vec(ptx_p.values));
            CHECK(std::abs(lhs_p - rhs_p) <=
                  1e-4 * oracle::norm(oracle::to_vec(px_p.values)) *
                      oracle::norm(oracle::to_vec(yp.values)));
        }
    }
    SUBCASE("double, both geometries, 1e-10") {
        for (int trial = 0; trial < 5; ++trial) {
            const auto x = random_image<double>(64, 1.0, rng);
            auto yf = make_fan_sinogram<double>(gf);
            auto yp = make_parallel_sinogram<double>(gp);
            std::uniform_real_distribution<double> dist(-1.0, 1.0);
            for (std::size_t p = 0; p < yf.values.size(); ++p) yf.values.data()[p] = dist(rng);
            for (std::size_t p = 0; p < yp.values.size(); ++p) yp.values.data()[p] = dist(rng);

            const auto px_f = forward_fan(x, gf);
            const auto ptx_f = adjoint_fan(yf, gf, 64, 1.0);
            CHECK(std::abs(oracle::dot(oracle::to_vec(px_f.values), oracle::to_vec(yf.values)) -
                           oracle::dot(oracle::to_vec(x.values), oracle::to_vec(ptx_f.values))) <=
                  1e-10 * oracle::norm(oracle::to_vec(px_f.values)) *
                      oracle::norm(oracle::to_vec(yf.values)));

            const auto px_p = forward_parallel(x, gp);
            const auto ptx_p = adjoint_parallel(yp, gp, 64, 1.0);
            CHECK(std::abs(oracle::dot(oracle::to_vec(px_p.values), oracle::to_vec(yp.values)) -
                           oracle::dot(oracle::to_vec(x.values), oracle::to_vec(ptx_p.values))) <=
                  1e-10 * oracle::norm(oracle::to_vec(px_p.values)) *
                      oracle::norm(oracle::to_vec(yp.values)));
        }
    }
}

TEST_CASE("dense matrix oracle on a 16x16 grid") {
    const int side = 16;
    const FanGeometry g = make_fan_covering_fov(40.0, 24, 20, 8.0);
    const int in_dim = side * side;
    const int out_dim = g.n_detectors * g.n_views;

    auto forward_op = [&](const oracle::Vec& xin) {
        ImageGridT<double> x;
        x.side = side;
        x.pixel_spacing_mm = 1.0;
        x.values = oracle::to_tensor<double>(xin, side, side);
        return oracle::to_vec(forward_fan(x, g).values);
    };
    const oracle::DenseMatrix A = oracle::assemble(forward_op, in_dim, out_dim);

    std::mt19937 rng(31);
    const oracle::Vec xr = oracle::random_vec(in_dim, rng);
    const oracle::Vec yr = oracle::random_vec(out_dim, rng);

    // operator application matches the dense matrix
    const oracle::Vec via_matrix = A.apply(xr);
    const oracle::Vec via_op = forward_op(xr);
    for (int k = 0; k < out_dim; ++k)
        CHECK(std::abs(via_matrix[k] - via_op[k]) <=
              1e-12 * std::max(1.0, std::abs(via_matrix[k])));

    // hand-written adjoint matches the matrix transpose
    auto yg = make_fan_sinogram<double>(g);
    yg.values = oracle::to_tensor<double>(yr, g.n_detectors, g.n_views);
    const oracle::Vec adj = oracle::to_vec(adjoint_fan(yg, g, side, 1.0).values);
    const oracle::Vec adj_matrix = A.apply_transpose(yr);
    const double adj_norm = oracle::norm(adj_matrix);
    for (int k = 0; k < in_dim; ++k)
        CHECK(std::abs(adj[k] - adj_matrix[k]) <= 1e-10 * std::max(1.0, adj_norm));
}

TEST_CASE("adjoint of a one-hot sinogram is supported on that ray only") {
    const ParallelGeometry g = small_parallel();
    auto y = make_parallel_sinogram<float>(g);
    const int i0 = 30, j0 = 17;
    y.values(i0, j0) = 1.0f;
    const auto img = adjoint_parallel(y, g, 64, 1.0);

    const double theta = g.theta(j0);
    const double ct = std::cos(theta), st = std::sin(theta);
    const double t = g.t(i0);
    for (int r = 0; r < 64; ++r)
        for (int c = 0; c < 64; ++c) {
            if (img.values(r, c) == 0.0f) continue;
            const double dist = std::abs(img.u(c) * ct + img.v(r) * st - t);
            CHECK(dist <= 1.6);  // bilinear footprint of on-chord samples
        }
}

TEST_CASE("rotational equivariance at one view step") {
    ParallelGeometry g = small_parallel();
    const double dtheta = g.angle_spacing_rad;
    // smooth blobs so the rotated phantom renders without pixelization edges
    const std::vector<oracle::GaussianBlob> base = {{6.0, -3.0, 6.0, 1.0},
                                                    {-8.0, 5.0, 4.0, 0.7}};
    std::vector<oracle::GaussianBlob> rotated = base;
    for (auto& b : rotated) {
        const double cu = b.cu, cv = b.cv;
        b.cu = cu * std::cos(dtheta) - cv * std::sin(dtheta);
        b.cv = cu * std::sin(dtheta) + cv * std::cos(dtheta);
    }
    const auto y0 = forward_parallel(oracle::render_blobs<float>(64, 1.0, base), g);
    const auto y1 = forward_parallel(oracle::render_blobs<float>(64, 1.0, rotated), g);

    // R[x rotated by dtheta](t, theta) = R[x](t, theta - dtheta); at j = 0 the
    // wrap crosses pi, flipping t.
    double num = 0.0, den = 0.0;
    for (int i = 0; i < g.n_detectors; ++i) {
        for (int j = 1; j < g.n_views; ++j) {
            const double d = y1.values(i, j) - y0.values(i, j - 1);
            num += d * d;
            den += static_cast<double>(y0.values(i, j - 1)) * y0.values(i, j - 1);
        }
        const double d0 = y1.values(i, 0) - y0.values(g.n_detectors - 1 - i, g.n_views - 1);
        num += d0 * d0;
        den += static_cast<double>(y0.values(g.n_detectors - 1 - i, g.n_views - 1)) *
               y0.values(g.n_detectors - 1 - i, g.n_views - 1);
    }
    CHECK(std::sqrt(num / den) <= 0.02);
}

TEST_CASE("projection output is independent of the thread count") {
    std::mt19937 rng(5);
    const auto x = random_image<float>(64, 1.0, rng);
    const FanGeometry g = small_fan();
    auto y = make_fan_sinogram<float>(g);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (std::size_t p = 0; p < y.values.size(); ++p)
        y.values.data()[p] = static_cast<float>(dist(rng));

    set_max_threads(1);
    const auto f1 = forward_fan(x, g);
    const auto a1 = adjoint_fan(y, g, 64, 1.0);
    set_max_threads(4);
    const auto f4 = forward_fan(x, g);
    const auto a4 = adjoint_fan(y, g, 64, 1.0);
    set_max_threads(0);
    CHECK(f1.values == f4.values);
    CHECK(a1.values == a4.values);
}

TEST_CASE("metal trace") {
    const FanGeometry g = small_fan();
    const double D = g.source_distance_mm;

    SUBCASE("empty mask gives an empty trace") {
        const MetalTrace t = metal_trace(MetalMask(64), g);
        CHECK(t.empty());
    }
    SUBCASE("centered disc marks a horizontal band over all views") {
        const double r = 6.0;
        const MetalMask m = ellipse_mask(64, 1.0, {{0.0, 0.0, r, r, 0.0, 1.0}});
        const MetalTrace t = metal_trace(m, g);
        for (int i = 0; i < g.n_detectors; ++i) {
            const double d = std::abs(D * std::sin(g.gamma(i)));
            for (int j = 0; j < g.n_views; ++j) {
                if (d < r - 1.5) CHECK(t.values(i, j) == 1);
                if (d > r + 1.5) CHECK(t.values(i, j) == 0);
            }
        }
    }
    SUBCASE("off-center metal matches a brute-force ray membership oracle") {
        const double r = 2.5, cu = 10.0, cv = -6.0;
        const MetalMask m = ellipse_mask(64, 1.0, {{cu, cv, r, r, 0.0, 1.0}});
        const MetalTrace t = metal_trace(m, g);
        int checked = 0;
        for (int i = 0; i < g.n_detectors; ++i)
            for (int j = 0; j < g.n_views; ++j) {
                // distance from the metal center to the fan ray
                const double beta = g.beta(j);
                const double phi = beta + g.gamma(i);
                const double sx = -D * std::sin(beta), sy = D * std::cos(beta);
                const double dx = std::sin(phi), dy = -std::cos(phi);
                const double dist = std::abs((cu - sx) * dy - (cv - sy) * dx);
                if (dist < r - 1.5) {
                    CHECK(t.values(i, j) == 1);
                    ++checked;
                } else if (dist > r + 1.5) {
                    CHECK(t.values(i, j) == 0);
                }
            }
        CHECK(checked > 100);  // the sinusoid band is well populated
    }
}

TEST_CASE("fan geometry that misses the FOV is rejected") {
    FanGeometry g = make_fan_covering_fov(160.0, 90, 80, 16.0);  // covers only r=16
    ImageGrid x(64, 1.0, 1.0f);                                  // FOV radius 32
    CHECK_THROWS_AS(forward_fan(x, g), ValidationError);
}
