#pragma once

#include <string>
#include <vector>

#include "tomo/geometry.hpp"
#include "tomo/simulate.hpp"

namespace tomo {

struct MetricReport {
    double psnr_db = 0.0;   // capped at 200 when the images are identical
    bool identical = false;
    double ssim = 0.0;
    long pixels_evaluated = 0;
    double peak = 0.0;
    std::string mask_note;
};

inline constexpr double kPsnrIdenticalDb = 200.0;

// max - min of the reference; the stand-in for a provided dynamic range.
template <typename T>
double default_peak(const ImageGridT<T>& ref);

// 10*log10(peak^2 / MSE) over pixels not excluded by the mask.
template <typename T>
MetricReport psnr_report(const ImageGridT<T>& x, const ImageGridT<T>& ref, double peak = 0.0,
                         const MetalMask* exclude = nullptr);
template <typename T>
double psnr(const ImageGridT<T>& x, const ImageGridT<T>& ref, double peak = 0.0,
            const MetalMask* exclude = nullptr);

// Mean local SSIM, 11x11 Gaussian window sigma = 1.5,
// C1 = (0.01*peak)^2, C2 = (0.03*peak)^2. Windows centered on excluded
// pixels are skipped.
template <typename T>
double ssim(const ImageGridT<T>& x, const ImageGridT<T>& ref, double peak = 0.0,
            const MetalMask* exclude = nullptr);

struct GroupBucket {
    long metal_px_min = 0;
    long metal_px_max = 0;
    int n = 0;
    double psnr_mean = 0.0;
    double ssim_mean = 0.0;
};

struct GroupedReport {
    std::vector<GroupBucket> buckets;  // ordered large -> small metal
    double psnr_overall = 0.0;
    double ssim_overall = 0.0;

    // "bucket,metal_px_min,metal_px_max,n,psnr_mean,ssim_mean"
    std::string to_csv() const;
};

// Buckets instances by metal pixel count (equal counts share a bucket),
// ordered large to small; metal pixels are excluded from the metrics and the
// peak defaults to each instance's ground-truth dynamic range.
template <typename T>
GroupedReport grouped_report(
    const std::vector<std::pair<const MarInstanceT<T>*, const ImageGridT<T>*>>& results,
    bool group_by_metal_size = true);

}  // namespace tomo
