#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "tomo/tensor.hpp"

namespace tomo {

enum class Dtype : std::uint32_t { f32 = 1, f64 = 2 };

// TOMO container: "TOMO" magic, little-endian u32 version=1, u32 dtype code
// (1=f32, 2=f64), u32 rows, u32 cols, then the raw row-major payload.
inline constexpr std::uint32_t kTomoVersion = 1;

void save_tensor(const Tensor2f& t, const std::string& path);
void save_tensor(const Tensor2d& t, const std::string& path);

// Exact inverse of save_tensor; the payload type follows the header.
std::variant<Tensor2f, Tensor2d> load_tensor(const std::string& path);

// Loads either dtype and casts to T.
template <typename T>
Tensor2<T> load_tensor_as(const std::string& path);

// CT display window. Values map linearly from
// [center - width/2, center + width/2] onto [0, 255].
struct WindowSpec {
    double center = 0.0;
    double width = 1.0;

    WindowSpec() = default;
    WindowSpec(double c, double w) : center(c), width(w) {
        if (!(w > 0.0)) throw ValidationError("WindowSpec: width must be > 0");
    }
};

// 8-bit grayscale PNG; pixel = round-half-up of
// clamp((v - (center - width/2)) / width, 0, 1) * 255.
void export_png(const Tensor2f& t, const WindowSpec& w, const std::string& path);
void export_png(const Tensor2d& t, const WindowSpec& w, const std::string& path);

// Window mapping exposed for tests.
std::uint8_t window_to_u8(double value, const WindowSpec& w);

}  // namespace tomo
