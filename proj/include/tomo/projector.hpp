#pragma once

#include <cstdint>
#include <variant>

#include "tomo/geometry.hpp"
#include "tomo/tensor.hpp"

namespace tomo {

enum class SinoKind { fan, parallel };

// Projection data in line-integral units; rows = detectors, cols = views.
template <typename T>
struct SinogramT {
    SinoKind kind = SinoKind::fan;
    std::variant<FanGeometry, ParallelGeometry> geometry;
    Tensor2<T> values;

    const FanGeometry& fan_geometry() const {
        if (kind != SinoKind::fan || !std::holds_alternative<FanGeometry>(geometry))
            throw ValidationError("sinogram: expected fan kind");
        return std::get<FanGeometry>(geometry);
    }
    const ParallelGeometry& parallel_geometry() const {
        if (kind != SinoKind::parallel || !std::holds_alternative<ParallelGeometry>(geometry))
            throw ValidationError("sinogram: expected parallel kind");
        return std::get<ParallelGeometry>(geometry);
    }

    template <typename U>
    SinogramT<U> cast() const {
        SinogramT<U> out;
        out.kind = kind;
        out.geometry = geometry;
        out.values = values.template cast<U>();
        return out;
    }
};

using Sinogram = SinogramT<float>;
using Sinogram64 = SinogramT<double>;

template <typename T>
SinogramT<T> make_fan_sinogram(const FanGeometry& g, T fill = T{});
template <typename T>
SinogramT<T> make_parallel_sinogram(const ParallelGeometry& g, T fill = T{});

// Sinogram support of rays intersecting metal.
struct MetalTrace {
    Tensor2<std::uint8_t> values;

    MetalTrace() = default;
    MetalTrace(int detectors, int views, std::uint8_t fill = 0)
        : values(detectors, views, fill) {}

    bool empty() const;
    bool full() const;
};

// Ray-marching Radon transform: each ray is sampled at a fixed step
// (pixel_spacing/2 unless overridden) over its chord through the FOV circle
// with bilinear interpolation; sample sums are scaled by the step. The
// adjoints scatter the identical weights, so the pairs are exact transposes
// of one another.
template <typename T>
SinogramT<T> forward_parallel(const ImageGridT<T>& x, const ParallelGeometry& g,
                              double step_mm = 0.0);
template <typename T>
SinogramT<T> forward_fan(const ImageGridT<T>& x, const FanGeometry& g, double step_mm = 0.0);

template <typename T>
ImageGridT<T> adjoint_parallel(const SinogramT<T>& y, const ParallelGeometry& g, int side,
                               double spacing, double step_mm = 0.0);
template <typename T>
ImageGridT<T> adjoint_fan(const SinogramT<T>& y, const FanGeometry& g, int side, double spacing,
                          double step_mm = 0.0);

// Any ray whose line integral through the binary mask exceeds eps is marked.
MetalTrace metal_trace(const MetalMask& m, const FanGeometry& g, double spacing = 1.0,
                       double eps = 1e-6);

}  // namespace tomo
