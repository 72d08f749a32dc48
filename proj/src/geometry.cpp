#include "tomo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "tomo/threading.hpp"

#include <nlohmann/json.hpp>

namespace tomo {

using json = nlohmann::json;

double FanGeometry::beta(int j) const { return j * 2.0 * std::numbers::pi / n_views; }

void FanGeometry::validate() const {
    if (!(source_distance_mm > 0.0)) throw ValidationError("fan geometry: D must be > 0");
    if (n_detectors < 2) throw ValidationError("fan geometry: need at least 2 detectors");
    if (!(detector_spacing_rad > 0.0))
        throw ValidationError("fan geometry: detector spacing must be > 0");
    if (n_views < 1) throw ValidationError("fan geometry: need at least 1 view");
    if (gamma_max() >= std::numbers::pi / 2.0)
        throw ValidationError("fan geometry: fan opening exceeds a half turn");
}

void ParallelGeometry::validate() const {
    if (n_detectors < 2) throw ValidationError("parallel geometry: need at least 2 detectors");
    if (!(detector_spacing_mm > 0.0))
        throw ValidationError("parallel geometry: detector spacing must be > 0");
    if (n_views < 1) throw ValidationError("parallel geometry: need at least 1 view");
    if (!(angle_spacing_rad > 0.0))
        throw ValidationError("parallel geometry: angle spacing must be > 0");
}

bool EllipseSpec::contains(double u, double v) const {
    const double du = u - center_u_mm;
    const double dv = v - center_v_mm;
    const double cr = std::cos(rotation_rad);
    const double sr = std::sin(rotation_rad);
    const double x = du * cr + dv * sr;
    const double y = -du * sr + dv * cr;
    const double xa = x / semi_axis_a_mm;
    const double yb = y / semi_axis_b_mm;
    return xa * xa + yb * yb <= 1.0;
}

bool MetalMask::empty() const {
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values.data()[i]) return false;
    return true;
}

long MetalMask::pixel_count() const {
    long n = 0;
    for (std::size_t i = 0; i < values.size(); ++i) n += values.data()[i] ? 1 : 0;
    return n;
}

FanGeometry make_fan_covering_fov(double source_distance_mm, int n_detectors, int n_views,
                                  double fov_radius_mm) {
    if (!(fov_radius_mm > 0.0)) throw ValidationError("fan geometry: FOV radius must be > 0");
    if (!(source_distance_mm > fov_radius_mm))
        throw ValidationError("fan geometry: source must sit outside the FOV circle");
    FanGeometry g;
    g.source_distance_mm = source_distance_mm;
    g.n_detectors = n_detectors;
    g.n_views = n_views;
    const double gamma_max = std::asin(fov_radius_mm / source_distance_mm);
    g.detector_spacing_rad = 2.0 * gamma_max / (n_detectors - 1);
    g.validate();
    return g;
}

ParallelGeometry derive_parallel(const FanGeometry& fan) {
    fan.validate();
    ParallelGeometry p;
    p.n_detectors = fan.n_detectors;
    const double t_max = fan.source_distance_mm * std::sin(fan.gamma_max());
    p.detector_spacing_mm = 2.0 * t_max / (fan.n_detectors - 1);
    p.n_views = fan.n_views;
    p.angle_spacing_rad = std::numbers::pi / fan.n_views;
    p.validate();
    return p;
}

DefaultGeometry default_paper_geometry(double pixel_spacing_mm) {
    DefaultGeometry d;
    d.image_side = 416;
    d.pixel_spacing_mm = pixel_spacing_mm;
    const double fov_radius = d.image_side * pixel_spacing_mm / 2.0;
    d.fan = make_fan_covering_fov(397.0, 321, 320, fov_radius);
    d.parallel = derive_parallel(d.fan);
    return d;
}

template <typename T>
ImageGridT<T> ellipse_phantom(int side, double spacing, const std::vector<EllipseSpec>& specs) {
    if (side <= 0 || !(spacing > 0.0))
        throw ValidationError("ellipse_phantom: side and spacing must be > 0");
    ImageGridT<T> x(side, spacing);
    parallel_for(side, [&](std::int64_t r0, std::int64_t r1) {
        for (int r = static_cast<int>(r0); r < static_cast<int>(r1); ++r) {
            const double v = x.v(r);
            for (int c = 0; c < side; ++c) {
                const double u = x.u(c);
                double sum = 0.0;
                for (const auto& e : specs)
                    if (e.contains(u, v)) sum += e.mu_per_mm;
                x.values(r, c) = static_cast<T>(sum);
            }
        }
    });
    return x;
}

MetalMask ellipse_mask(int side, double spacing, const std::vector<EllipseSpec>& specs) {
    if (side <= 0 || !(spacing > 0.0))
        throw ValidationError("ellipse_mask: side and spacing must be > 0");
    MetalMask m(side);
    const double half = (side - 1) / 2.0;
    for (int r = 0; r < side; ++r) {
        const double v = (half - r) * spacing;
        for (int c = 0; c < side; ++c) {
            const double u = (c - half) * spacing;
            for (const auto& e : specs) {
                if (e.contains(u, v)) {
                    m.values(r, c) = 1;
                    break;
                }
            }
        }
    }
    return m;
}

template <typename T>
ImageGridT<T> insert_metal(const ImageGridT<T>& x, const MetalMask& m, double mu_metal_ref) {
    if (m.side != x.side) throw ValidationError("insert_metal: mask/grid dimension mismatch");
    ImageGridT<T> out = x;
    for (int r = 0; r < x.side; ++r)
        for (int c = 0; c < x.side; ++c)
            if (m.values(r, c)) out.values(r, c) = static_cast<T>(mu_metal_ref);
    return out;
}

double hu_to_mu(double hu, double mu_water) {
    if (!(mu_water > 0.0)) throw ValidationError("hu_to_mu: mu_water must be > 0");
    return mu_water * (1.0 + hu / 1000.0);
}

double mu_to_hu(double mu, double mu_water) {
    if (!(mu_water > 0.0)) throw ValidationError("mu_to_hu: mu_water must be > 0");
    return 1000.0 * (mu - mu_water) / mu_water;
}

template <typename T>
MetalMask segment_metal(const ImageGridT<T>& x_hu, double threshold_hu) {
    MetalMask m(x_hu.side);
    for (int r = 0; r < x_hu.side; ++r)
        for (int c = 0; c < x_hu.side; ++c)
            m.values(r, c) = static_cast<double>(x_hu.values(r, c)) >= threshold_hu ? 1 : 0;
    return m;
}

namespace {

EllipseSpec ellipse_from_json(const json& j) {
    EllipseSpec e;
    e.center_u_mm = j.value("center_u_mm", 0.0);
    e.center_v_mm = j.value("center_v_mm", 0.0);
    e.semi_axis_a_mm = j.at("semi_axis_a_mm").get<double>();
    e.semi_axis_b_mm = j.at("semi_axis_b_mm").get<double>();
    e.rotation_rad = j.value("rotation_rad", 0.0);
    e.mu_per_mm = j.value("mu_per_mm", 0.0);
    if (!(e.semi_axis_a_mm > 0.0) || !(e.semi_axis_b_mm > 0.0))
        throw ValidationError("ellipse: semi-axes must be > 0");
    return e;
}

json ellipse_to_json(const EllipseSpec& e) {
    return json{{"center_u_mm", e.center_u_mm},     {"center_v_mm", e.center_v_mm},
                {"semi_axis_a_mm", e.semi_axis_a_mm}, {"semi_axis_b_mm", e.semi_axis_b_mm},
                {"rotation_rad", e.rotation_rad},   {"mu_per_mm", e.mu_per_mm}};
}

}  // namespace

SceneConfig parse_scene_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("scene config: invalid JSON: ") + e.what());
    }
    try {
        SceneConfig cfg;
        cfg.side = j.value("side", 416);
        cfg.pixel_spacing_mm = j.value("pixel_spacing_mm", 1.0);
        if (cfg.side <= 0 || !(cfg.pixel_spacing_mm > 0.0))
            throw ValidationError("scene config: side and pixel_spacing_mm must be > 0");

        cfg.fan.source_distance_mm = j.value("source_distance_mm", 397.0);
        cfg.fan.n_detectors = j.value("n_detectors", 321);
        cfg.fan.n_views = j.value("n_views", 320);
        if (j.contains("detector_spacing_rad")) {
            cfg.fan.detector_spacing_rad = j.at("detector_spacing_rad").get<double>();
            cfg.fan.validate();
        } else {
            cfg.fan = make_fan_covering_fov(cfg.fan.source_distance_mm, cfg.fan.n_detectors,
                                            cfg.fan.n_views,
                                            cfg.side * cfg.pixel_spacing_mm / 2.0);
        }

        for (const auto& e : j.value("ellipses", json::array()))
            cfg.ellipses.push_back(ellipse_from_json(e));
        if (j.contains("metal")) {
            const auto& m = j.at("metal");
            for (const auto& e : m.value("ellipses", json::array()))
                cfg.metal_ellipses.push_back(ellipse_from_json(e));
            cfg.metal_mu_per_mm = m.value("mu_per_mm", 0.0);
        }
        return cfg;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("scene config: ") + e.what());
    }
}

SceneConfig load_scene_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("scene config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scene_json(ss.str());
}

std::string scene_to_json(const SceneConfig& cfg) {
    json j;
    j["source_distance_mm"] = cfg.fan.source_distance_mm;
    j["n_detectors"] = cfg.fan.n_detectors;
    j["detector_spacing_rad"] = cfg.fan.detector_spacing_rad;
    j["n_views"] = cfg.fan.n_views;
    j["source_convention"] = kSourceConvention;
    j["side"] = cfg.side;
    j["pixel_spacing_mm"] = cfg.pixel_spacing_mm;
    j["ellipses"] = json::array();
    for (const auto& e : cfg.ellipses) j["ellipses"].push_back(ellipse_to_json(e));
    if (!cfg.metal_ellipses.empty() || cfg.metal_mu_per_mm != 0.0) {
        json m;
        m["ellipses"] = json::array();
        for (const auto& e : cfg.metal_ellipses) m["ellipses"].push_back(ellipse_to_json(e));
        m["mu_per_mm"] = cfg.metal_mu_per_mm;
        j["metal"] = m;
    }
    return j.dump(2);
}

template ImageGridT<float> ellipse_phantom<float>(int, double, const std::vector<EllipseSpec>&);
template ImageGridT<double> ellipse_phantom<double>(int, double, const std::vector<EllipseSpec>&);
template ImageGridT<float> insert_metal<float>(const ImageGridT<float>&, const MetalMask&, double);
template ImageGridT<double> insert_metal<double>(const ImageGridT<double>&, const MetalMask&,
                                                 double);
template MetalMask segment_metal<float>(const ImageGridT<float>&, double);
template MetalMask segment_metal<double>(const ImageGridT<double>&, double);

}  // namespace tomo
