#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tomo/tensor.hpp"

namespace tomo {

// Water attenuation used by the HU conversions when nothing else is given.
inline constexpr double kMuWaterPerMm = 0.0192;

// Arc-detector fan beam. The source travels on a circle of radius
// source_distance_mm around the origin; detectors are uniformly spaced in
// angle gamma and centered on the central ray. View j looks from
// beta = j * 2*pi / n_views; the source sits at (-D sin(beta), D cos(beta)),
// i.e. on the circle, counter-clockwise from the top.
inline constexpr const char* kSourceConvention = "source_on_circle_ccw_from_top";

struct FanGeometry {
    double source_distance_mm = 0.0;
    int n_detectors = 0;
    double detector_spacing_rad = 0.0;
    int n_views = 0;

    double gamma(int i) const {
        return (i - (n_detectors - 1) / 2.0) * detector_spacing_rad;
    }
    double gamma_max() const { return (n_detectors - 1) / 2.0 * detector_spacing_rad; }
    double beta(int j) const;

    void validate() const;
};

// Parallel beam over theta in [0, pi); detector offsets t are uniform and
// centered.
struct ParallelGeometry {
    int n_detectors = 0;
    double detector_spacing_mm = 0.0;
    int n_views = 0;
    double angle_spacing_rad = 0.0;

    double t(int i) const { return (i - (n_detectors - 1) / 2.0) * detector_spacing_mm; }
    double t_max() const { return (n_detectors - 1) / 2.0 * detector_spacing_mm; }
    double theta(int j) const { return j * angle_spacing_rad; }

    void validate() const;
};

// Square attenuation map. Pixel (r, c) is centered at
// u = (c - (side-1)/2) * spacing, v = ((side-1)/2 - r) * spacing.
// The field of view is the inscribed circle.
template <typename T>
struct ImageGridT {
    int side = 0;
    double pixel_spacing_mm = 1.0;
    Tensor2<T> values;

    ImageGridT() = default;
    ImageGridT(int side_, double spacing, T fill = T{})
        : side(side_), pixel_spacing_mm(spacing), values(side_, side_, fill) {}

    double u(int c) const { return (c - (side - 1) / 2.0) * pixel_spacing_mm; }
    double v(int r) const { return ((side - 1) / 2.0 - r) * pixel_spacing_mm; }
    int col_at(double uu) const { return static_cast<int>(std::lround(uu / pixel_spacing_mm + (side - 1) / 2.0)); }
    int row_at(double vv) const { return static_cast<int>(std::lround((side - 1) / 2.0 - vv / pixel_spacing_mm)); }
    double fov_radius() const { return side * pixel_spacing_mm / 2.0; }

    template <typename U>
    ImageGridT<U> cast() const {
        ImageGridT<U> out;
        out.side = side;
        out.pixel_spacing_mm = pixel_spacing_mm;
        out.values = values.template cast<U>();
        return out;
    }
};

using ImageGrid = ImageGridT<float>;
using ImageGrid64 = ImageGridT<double>;

struct EllipseSpec {
    double center_u_mm = 0.0;
    double center_v_mm = 0.0;
    double semi_axis_a_mm = 1.0;
    double semi_axis_b_mm = 1.0;
    double rotation_rad = 0.0;
    double mu_per_mm = 0.0;

    bool contains(double u, double v) const;
};

// Binary mask aligned to an ImageGrid.
struct MetalMask {
    int side = 0;
    Tensor2<std::uint8_t> values;

    MetalMask() = default;
    MetalMask(int side_, std::uint8_t fill = 0) : side(side_), values(side_, side_, fill) {}

    bool empty() const;
    long pixel_count() const;
};

struct DefaultGeometry {
    FanGeometry fan;
    ParallelGeometry parallel;
    int image_side = 0;
    double pixel_spacing_mm = 1.0;
};

// Detector spacing chosen so the fan exactly covers the image FOV circle:
// gamma_max = asin(fov_radius / D), spacing = 2*gamma_max / (n_detectors - 1).
FanGeometry make_fan_covering_fov(double source_distance_mm, int n_detectors, int n_views,
                                  double fov_radius_mm);

// The rebinned counterpart of a fan geometry: same detector count, t spans
// [-D sin(gamma_max), +D sin(gamma_max)], n_views over [0, pi).
ParallelGeometry derive_parallel(const FanGeometry& fan);

// D = 397 mm, 321 detectors, 320 views over [0, 2*pi), 416^2 image grid.
DefaultGeometry default_paper_geometry(double pixel_spacing_mm = 1.0);

template <typename T>
ImageGridT<T> ellipse_phantom(int side, double spacing, const std::vector<EllipseSpec>& specs);

MetalMask ellipse_mask(int side, double spacing, const std::vector<EllipseSpec>& specs);

// Replaces (not adds) the masked pixels with the given attenuation.
template <typename T>
ImageGridT<T> insert_metal(const ImageGridT<T>& x, const MetalMask& m, double mu_metal_ref);

double hu_to_mu(double hu, double mu_water = kMuWaterPerMm);
double mu_to_hu(double mu, double mu_water = kMuWaterPerMm);

template <typename T>
MetalMask segment_metal(const ImageGridT<T>& x_hu, double threshold_hu = 2000.0);

// JSON scene description consumed by the CLI: acquisition geometry plus
// phantom and metal shapes.
struct SceneConfig {
    FanGeometry fan;
    int side = 0;
    double pixel_spacing_mm = 1.0;
    std::vector<EllipseSpec> ellipses;
    std::vector<EllipseSpec> metal_ellipses;
    double metal_mu_per_mm = 0.0;
};

SceneConfig parse_scene_json(const std::string& text);
SceneConfig load_scene_json(const std::string& path);
std::string scene_to_json(const SceneConfig& cfg);

}  // namespace tomo
