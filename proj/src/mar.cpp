#include "tomo/mar.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

namespace tomo {

using json = nlohmann::json;

void SolverConfig::validate() const {
    if (!(step > 0.0)) throw ValidationError("solver config: step must be > 0");
    if (max_iters < 1) throw ValidationError("solver config: max_iters must be >= 1");
    if (!(tv_eps > 0.0)) throw ValidationError("solver config: tv_eps must be > 0");
    if (tol < 0.0) throw ValidationError("solver config: tol must be >= 0");
}

SolverConfig parse_solver_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("solver config: invalid JSON: ") + e.what());
    }
    SolverConfig cfg;
    try {
        cfg.step = j.value("step", cfg.step);
        cfg.max_iters = j.value("max_iters", cfg.max_iters);
        if (j.contains("lambda")) {
            if (j.at("lambda").is_string() && j.at("lambda").get<std::string>() == "auto")
                cfg.lambda = -1.0;
            else
                cfg.lambda = j.at("lambda").get<double>();
        }
        cfg.tv_eps = j.value("tv_eps", cfg.tv_eps);
        cfg.tol = j.value("tol", cfg.tol);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("solver config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

SolverConfig load_solver_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("solver config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_solver_json(ss.str());
}

namespace {

template <typename T>
void check_trace_dims(const SinogramT<T>& y, const MetalTrace& m, const char* who) {
    if (y.values.rows() != m.values.rows() || y.values.cols() != m.values.cols())
        throw ValidationError(std::string(who) + ": sinogram/trace dimension mismatch");
}

}  // namespace

template <typename T>
SinogramT<T> li_inpaint(const SinogramT<T>& y, const MetalTrace& m) {
    check_trace_dims(y, m, "li_inpaint");
    const int n_det = y.values.rows();
    const int n_views = y.values.cols();

    SinogramT<T> out = y;
    std::vector<char> fully_masked(n_views, 0);
    int n_fully_masked = 0;

    for (int j = 0; j < n_views; ++j) {
        int r = 0;
        while (r < n_det) {
            if (!m.values(r, j)) {
                ++r;
                continue;
            }
            int e = r;
            while (e + 1 < n_det && m.values(e + 1, j)) ++e;
            const bool has_above = r > 0;
            const bool has_below = e + 1 < n_det;
            if (!has_above && !has_below) {
                fully_masked[j] = 1;
                ++n_fully_masked;
                break;
            }
            if (!has_above) {
                const T b = y.values(e + 1, j);
                for (int i = r; i <= e; ++i) out.values(i, j) = b;
            } else if (!has_below) {
                const T a = y.values(r - 1, j);
                for (int i = r; i <= e; ++i) out.values(i, j) = a;
            } else {
                const double a = static_cast<double>(y.values(r - 1, j));
                const double b = static_cast<double>(y.values(e + 1, j));
                const int len = e - r + 1;
                for (int i = 1; i <= len; ++i)
                    out.values(r + i - 1, j) =
                        static_cast<T>(a + (b - a) * i / static_cast<double>(len + 1));
            }
            r = e + 1;
        }
    }

    if (n_fully_masked == n_views)
        throw ValidationError("li_inpaint: trace covers the entire sinogram");
    if (n_fully_masked > 0) {
        warn("li_inpaint: " + std::to_string(n_fully_masked) +
             " fully masked views copied from nearest valid views");
        for (int j = 0; j < n_views; ++j) {
            if (!fully_masked[j]) continue;
            int src = -1;
            for (int d = 1; d < n_views; ++d) {
                if (j - d >= 0 && !fully_masked[j - d]) {
                    src = j - d;
                    break;
                }
                if (j + d < n_views && !fully_masked[j + d]) {
                    src = j + d;
                    break;
                }
            }
            for (int i = 0; i < n_det; ++i) out.values(i, j) = out.values(i, src);
        }
    }
    return out;
}

template <typename T>
SinogramT<T> combine_sinogram(const SinogramT<T>& g_out, const SinogramT<T>& y_li,
                              const MetalTrace& m) {
    if (!g_out.values.same_shape(y_li.values))
        throw ValidationError("combine_sinogram: sinogram dimension mismatch");
    check_trace_dims(y_li, m, "combine_sinogram");
    SinogramT<T> out = y_li;
    const int rows = out.values.rows(), cols = out.values.cols();
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            if (m.values(r, c)) out.values(r, c) = g_out.values(r, c);
    return out;
}

template <typename T>
ImageGridT<T> combine_image(const ImageGridT<T>& x_li, const ImageGridT<T>& residual) {
    if (x_li.side != residual.side)
        throw ValidationError("combine_image: image dimension mismatch");
    ImageGridT<T> out = x_li;
    for (std::size_t p = 0; p < out.values.size(); ++p)
        out.values.data()[p] += residual.values.data()[p];
    return out;
}

template <typename T>
LossBreakdown dual_domain_loss(const SinogramT<T>& y_out, const SinogramT<T>& y_gt,
                               const ImageGridT<T>& x_out, const ImageGridT<T>& x_gt,
                               const RilPlan& plan) {
    if (!y_out.values.same_shape(y_gt.values))
        throw ValidationError("dual_domain_loss: sinogram dimension mismatch");
    if (x_out.side != x_gt.side)
        throw ValidationError("dual_domain_loss: image dimension mismatch");
    LossBreakdown loss;
    double acc = 0.0;
    for (std::size_t p = 0; p < y_out.values.size(); ++p)
        acc += std::abs(static_cast<double>(y_out.values.data()[p]) -
                        static_cast<double>(y_gt.values.data()[p]));
    loss.l_gs = acc / static_cast<double>(y_out.values.size());
    loss.l_rc = rc_loss(y_out, x_gt, plan).value;
    acc = 0.0;
    for (std::size_t p = 0; p < x_out.values.size(); ++p)
        acc += std::abs(static_cast<double>(x_out.values.data()[p]) -
                        static_cast<double>(x_gt.values.data()[p]));
    loss.l_gi = acc / static_cast<double>(x_out.values.size());
    loss.total = loss.l_gs + loss.l_rc + loss.l_gi;
    return loss;
}

template <typename T>
double tv_value(const ImageGridT<T>& x, double eps) {
    const int side = x.side;
    double sum = 0.0;
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) {
            const double du =
                c + 1 < side ? static_cast<double>(x.values(r, c + 1)) - x.values(r, c) : 0.0;
            const double dv =
                r + 1 < side ? static_cast<double>(x.values(r + 1, c)) - x.values(r, c) : 0.0;
            sum += std::sqrt(du * du + dv * dv + eps * eps);
        }
    return sum;
}

template <typename T>
ImageGridT<T> tv_gradient(const ImageGridT<T>& x, double eps) {
    const int side = x.side;
    Tensor2d du(side, side), dv(side, side), denom(side, side);
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) {
            du(r, c) =
                c + 1 < side ? static_cast<double>(x.values(r, c + 1)) - x.values(r, c) : 0.0;
            dv(r, c) =
                r + 1 < side ? static_cast<double>(x.values(r + 1, c)) - x.values(r, c) : 0.0;
            denom(r, c) = std::sqrt(du(r, c) * du(r, c) + dv(r, c) * dv(r, c) + eps * eps);
        }
    ImageGridT<T> g(side, x.pixel_spacing_mm);
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) {
            double acc = (-du(r, c) - dv(r, c)) / denom(r, c);
            if (c > 0) acc += du(r, c - 1) / denom(r, c - 1);
            if (r > 0) acc += dv(r - 1, c) / denom(r - 1, c);
            g.values(r, c) = static_cast<T>(acc);
        }
    return g;
}

namespace {

struct IterationLog {
    std::ofstream out;

    explicit IterationLog(const std::string& path) {
        if (path.empty()) return;
        out.open(path, std::ios::trunc);
        if (!out) throw IoError("solver log: cannot open " + path);
        out << "iter,objective,step\n";
    }
    void row(int iter, double objective, double step) {
        if (!out.is_open()) return;
        out.precision(17);
        out << iter << "," << objective << "," << step << "\n";
    }
};

}  // namespace

template <typename T>
ImageGridT<T> iterative_mar(const SinogramT<T>& y, const MetalTrace& m, const SolverConfig& cfg,
                            const ImageGridT<T>& init) {
    cfg.validate();
    check_trace_dims(y, m, "iterative_mar");
    const FanGeometry& g = y.fan_geometry();
    const int side = init.side;
    const double spacing = init.pixel_spacing_mm;

    auto masked_residual = [&](const SinogramT<T>& proj) {
        SinogramT<T> r = proj;
        for (int i = 0; i < r.values.rows(); ++i)
            for (int j = 0; j < r.values.cols(); ++j)
                r.values(i, j) =
                    m.values(i, j) ? T{} : static_cast<T>(r.values(i, j) - y.values(i, j));
        return r;
    };
    auto data_term = [](const SinogramT<T>& r) {
        double acc = 0.0;
        for (std::size_t p = 0; p < r.values.size(); ++p) {
            const double v = static_cast<double>(r.values.data()[p]);
            acc += v * v;
        }
        return acc;
    };

    SinogramT<T> resid = masked_residual(forward_fan(init, g));
    const double data0 = data_term(resid);
    const double tv0 = tv_value(init, cfg.tv_eps);
    const double lambda =
        cfg.lambda >= 0.0 ? cfg.lambda : (tv0 > 0.0 ? 1e-3 * data0 / tv0 : 0.0);

    auto objective = [&](const ImageGridT<T>& x, SinogramT<T>* resid_out) {
        SinogramT<T> r = masked_residual(forward_fan(x, g));
        const double f = data_term(r) + lambda * tv_value(x, cfg.tv_eps);
        if (resid_out) *resid_out = std::move(r);
        return f;
    };

    double f_cur = data0 + lambda * tv0;
    if (!std::isfinite(f_cur))
        throw NumericalError("iterative_mar: non-finite objective at iteration 0");

    IterationLog log(cfg.log_path);
    log.row(0, f_cur, 0.0);

    ImageGridT<T> x = init;
    ImageGridT<T> best_x = init;
    double best_f = f_cur;
    double step = cfg.step;

    for (int it = 1; it <= cfg.max_iters; ++it) {
        ImageGridT<T> grad = adjoint_fan(resid, g, side, spacing);
        const ImageGridT<T> tv_g = tv_gradient(x, cfg.tv_eps);
        double gnorm2 = 0.0;
        for (std::size_t p = 0; p < grad.values.size(); ++p) {
            grad.values.data()[p] = static_cast<T>(2.0 * grad.values.data()[p] +
                                                   lambda * tv_g.values.data()[p]);
            const double gv = static_cast<double>(grad.values.data()[p]);
            gnorm2 += gv * gv;
        }
        if (gnorm2 == 0.0) break;

        bool accepted = false;
        double f_try = f_cur;
        ImageGridT<T> x_try;
        SinogramT<T> resid_try;
        while (step >= 1e-12) {
            x_try = x;
            for (std::size_t p = 0; p < x_try.values.size(); ++p)
                x_try.values.data()[p] -= static_cast<T>(step * grad.values.data()[p]);
            f_try = objective(x_try, &resid_try);
            if (std::isfinite(f_try) && f_try < f_cur) {
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if (!accepted) break;

        const double f_prev = f_cur;
        x = std::move(x_try);
        resid = std::move(resid_try);
        f_cur = f_try;
        if (!std::isfinite(f_cur))
            throw NumericalError("iterative_mar: non-finite objective at iteration " +
                                 std::to_string(it));
        if (f_cur < best_f) {
            best_f = f_cur;
            best_x = x;
        }
        log.row(it, f_cur, step);
        step *= 2.0;
        if ((f_prev - f_cur) / std::max(std::abs(f_prev), 1e-30) < cfg.tol) break;
    }
    return best_x;
}

template <typename T>
SinogramT<T> trace_refine_gradient(const SinogramT<T>& y, const MetalTrace& m,
                                   const ImageGridT<T>& x_ref, const RilPlan& plan,
                                   double smooth_eps) {
    const ImageGridT<T> xr = ril_forward(y, plan, x_ref.side, x_ref.pixel_spacing_mm);
    const int side = x_ref.side;
    const double fov2 = x_ref.fov_radius() * x_ref.fov_radius();
    long n_fov = 0;
    for (int r = 0; r < side; ++r) {
        const double v = x_ref.v(r);
        for (int c = 0; c < side; ++c) {
            const double u = x_ref.u(c);
            if (u * u + v * v <= fov2) ++n_fov;
        }
    }
    ImageGridT<T> g_img(side, x_ref.pixel_spacing_mm);
    const double inv_n = 1.0 / static_cast<double>(n_fov);
    for (int r = 0; r < side; ++r) {
        const double v = x_ref.v(r);
        for (int c = 0; c < side; ++c) {
            const double u = x_ref.u(c);
            if (u * u + v * v > fov2) continue;
            const double res =
                static_cast<double>(xr.values(r, c)) - static_cast<double>(x_ref.values(r, c));
            g_img.values(r, c) = static_cast<T>(
                inv_n * res / std::sqrt(res * res + smooth_eps * smooth_eps));
        }
    }
    SinogramT<T> g = ril_backward(g_img, plan);
    for (int i = 0; i < g.values.rows(); ++i)
        for (int j = 0; j < g.values.cols(); ++j)
            if (!m.values(i, j)) g.values(i, j) = T{};
    return g;
}

template <typename T>
SinogramT<T> trace_refine(const SinogramT<T>& y_li, const MetalTrace& m,
                          const ImageGridT<T>& x_ref, const SolverConfig& cfg,
                          const RilPlan& plan) {
    cfg.validate();
    check_trace_dims(y_li, m, "trace_refine");
    if (y_li.kind != SinoKind::fan)
        throw ValidationError("trace_refine: expected a fan sinogram");

    double scale = 0.0;
    for (std::size_t p = 0; p < x_ref.values.size(); ++p)
        scale = std::max(scale, std::abs(static_cast<double>(x_ref.values.data()[p])));
    const double eps = 1e-6 * (scale > 0.0 ? scale : 1.0);

    const int side = x_ref.side;
    const double fov2 = x_ref.fov_radius() * x_ref.fov_radius();
    long n_fov = 0;
    for (int r = 0; r < side; ++r) {
        const double v = x_ref.v(r);
        for (int c = 0; c < side; ++c) {
            const double u = x_ref.u(c);
            if (u * u + v * v <= fov2) ++n_fov;
        }
    }
    if (n_fov == 0) throw ValidationError("trace_refine: empty FOV");

    auto objective = [&](const SinogramT<T>& yc) {
        const ImageGridT<T> xr = ril_forward(yc, plan, side, x_ref.pixel_spacing_mm);
        double acc = 0.0;
        for (int r = 0; r < side; ++r) {
            const double v = x_ref.v(r);
            for (int c = 0; c < side; ++c) {
                const double u = x_ref.u(c);
                if (u * u + v * v > fov2) continue;
                const double res = static_cast<double>(xr.values(r, c)) -
                                   static_cast<double>(x_ref.values(r, c));
                acc += std::sqrt(res * res + eps * eps);
            }
        }
        return acc / static_cast<double>(n_fov);
    };

    SinogramT<T> y = y_li;
    double f_cur = objective(y);
    if (!std::isfinite(f_cur))
        throw NumericalError("trace_refine: non-finite objective at iteration 0");

    IterationLog log(cfg.log_path);
    log.row(0, f_cur, 0.0);

    SinogramT<T> best_y = y;
    double best_f = f_cur;
    double step = cfg.step;

    for (int it = 1; it <= cfg.max_iters; ++it) {
        const SinogramT<T> grad = trace_refine_gradient(y, m, x_ref, plan, eps);
        double gnorm2 = 0.0;
        for (std::size_t p = 0; p < grad.values.size(); ++p) {
            const double gv = static_cast<double>(grad.values.data()[p]);
            gnorm2 += gv * gv;
        }
        if (gnorm2 == 0.0) break;

        bool accepted = false;
        double f_try = f_cur;
        SinogramT<T> y_try;
        while (step >= 1e-12) {
            y_try = y;
            for (std::size_t p = 0; p < y_try.values.size(); ++p)
                y_try.values.data()[p] -= static_cast<T>(step * grad.values.data()[p]);
            f_try = objective(y_try);
            if (std::isfinite(f_try) && f_try < f_cur) {
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if (!accepted) break;

        const double f_prev = f_cur;
        y = std::move(y_try);
        f_cur = f_try;
        if (f_cur < best_f) {
            best_f = f_cur;
            best_y = y;
        }
        log.row(it, f_cur, step);
        step *= 2.0;
        if ((f_prev - f_cur) / std::max(std::abs(f_prev), 1e-30) < cfg.tol) break;
    }
    return best_y;
}

#define TOMO_INSTANTIATE_MAR(T)                                                                \
    template SinogramT<T> li_inpaint<T>(const SinogramT<T>&, const MetalTrace&);               \
    template SinogramT<T> combine_sinogram<T>(const SinogramT<T>&, const SinogramT<T>&,        \
                                              const MetalTrace&);                             \
    template ImageGridT<T> combine_image<T>(const ImageGridT<T>&, const ImageGridT<T>&);       \
    template LossBreakdown dual_domain_loss<T>(const SinogramT<T>&, const SinogramT<T>&,       \
                                               const ImageGridT<T>&, const ImageGridT<T>&,     \
                                               const RilPlan&);                                \
    template double tv_value<T>(const ImageGridT<T>&, double);                                 \
    template ImageGridT<T> tv_gradient<T>(const ImageGridT<T>&, double);                       \
    template ImageGridT<T> iterative_mar<T>(const SinogramT<T>&, const MetalTrace&,            \
                                            const SolverConfig&, const ImageGridT<T>&);        \
    template SinogramT<T> trace_refine_gradient<T>(const SinogramT<T>&, const MetalTrace&,     \
                                                   const ImageGridT<T>&, const RilPlan&,       \
                                                   double);                                    \
    template SinogramT<T> trace_refine<T>(const SinogramT<T>&, const MetalTrace&,              \
                                          const ImageGridT<T>&, const SolverConfig&,           \
                                          const RilPlan&);

TOMO_INSTANTIATE_MAR(float)
TOMO_INSTANTIATE_MAR(double)

#undef TOMO_INSTANTIATE_MAR

}  // namespace tomo
