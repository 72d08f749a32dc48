#include "tomo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace tomo {

template <typename T>
double default_peak(const ImageGridT<T>& ref) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < ref.values.size(); ++p) {
        const double v = static_cast<double>(ref.values.data()[p]);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return hi - lo;
}

namespace {

template <typename T>
void check_metric_inputs(const ImageGridT<T>& x, const ImageGridT<T>& ref,
                         const MetalMask* exclude) {
    if (x.side != ref.side) throw ValidationError("metrics: image dimension mismatch");
    if (exclude && exclude->side != ref.side)
        throw ValidationError("metrics: mask dimension mismatch");
}

}  // namespace

template <typename T>
MetricReport psnr_report(const ImageGridT<T>& x, const ImageGridT<T>& ref, double peak,
                         const MetalMask* exclude) {
    check_metric_inputs(x, ref, exclude);
    MetricReport rep;
    rep.peak = peak > 0.0 ? peak : default_peak(ref);
    rep.mask_note = exclude ? "metal pixels excluded" : "";

    double sq = 0.0;
    long n = 0;
    for (int r = 0; r < ref.side; ++r)
        for (int c = 0; c < ref.side; ++c) {
            if (exclude && exclude->values(r, c)) continue;
            const double d =
                static_cast<double>(x.values(r, c)) - static_cast<double>(ref.values(r, c));
            sq += d * d;
            ++n;
        }
    if (n == 0) throw ValidationError("psnr: empty evaluation region");
    rep.pixels_evaluated = n;
    const double mse = sq / static_cast<double>(n);
    if (mse == 0.0) {
        rep.identical = true;
        rep.psnr_db = kPsnrIdenticalDb;
        return rep;
    }
    if (!(rep.peak > 0.0)) throw ValidationError("psnr: peak must be > 0");
    rep.psnr_db = std::min(10.0 * std::log10(rep.peak * rep.peak / mse), kPsnrIdenticalDb);
    return rep;
}

template <typename T>
double psnr(const ImageGridT<T>& x, const ImageGridT<T>& ref, double peak,
            const MetalMask* exclude) {
    return psnr_report(x, ref, peak, exclude).psnr_db;
}

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

const std::vector<double>& ssim_kernel() {
    static const std::vector<double> k = [] {
        std::vector<double> w(kSsimWindow * kSsimWindow);
        const int h = kSsimWindow / 2;
        double sum = 0.0;
        for (int r = -h; r <= h; ++r)
            for (int c = -h; c <= h; ++c) {
                const double g = std::exp(-(r * r + c * c) / (2.0 * kSsimSigma * kSsimSigma));
                w[(r + h) * kSsimWindow + (c + h)] = g;
                sum += g;
            }
        for (double& v : w) v /= sum;
        return w;
    }();
    return k;
}

}  // namespace

template <typename T>
double ssim(const ImageGridT<T>& x, const ImageGridT<T>& ref, double peak,
            const MetalMask* exclude) {
    check_metric_inputs(x, ref, exclude);
    const int side = ref.side;
    if (side < kSsimWindow) throw ValidationError("ssim: image smaller than the 11x11 window");
    const double pk = peak > 0.0 ? peak : default_peak(ref);
    const double c1 = (0.01 * pk) * (0.01 * pk);
    const double c2 = (0.03 * pk) * (0.03 * pk);
    const auto& kern = ssim_kernel();
    const int h = kSsimWindow / 2;

    double acc = 0.0;
    long n = 0;
    for (int r = h; r < side - h; ++r)
        for (int c = h; c < side - h; ++c) {
            if (exclude && exclude->values(r, c)) continue;
            double mx = 0.0, my = 0.0, mxx = 0.0, myy = 0.0, mxy = 0.0;
            for (int dr = -h; dr <= h; ++dr)
                for (int dc = -h; dc <= h; ++dc) {
                    const double w = kern[(dr + h) * kSsimWindow + (dc + h)];
                    const double a = static_cast<double>(x.values(r + dr, c + dc));
                    const double b = static_cast<double>(ref.values(r + dr, c + dc));
                    mx += w * a;
                    my += w * b;
                    mxx += w * a * a;
                    myy += w * b * b;
                    mxy += w * a * b;
                }
            const double vx = mxx - mx * mx;
            const double vy = myy - my * my;
            const double cov = mxy - mx * my;
            acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
                   ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++n;
        }
    if (n == 0) throw ValidationError("ssim: empty evaluation region");
    return acc / static_cast<double>(n);
}

std::string GroupedReport::to_csv() const {
    std::ostringstream out;
    out.precision(10);
    out << "bucket,metal_px_min,metal_px_max,n,psnr_mean,ssim_mean\n";
    for (std::size_t b = 0; b < buckets.size(); ++b)
        out << b + 1 << "," << buckets[b].metal_px_min << "," << buckets[b].metal_px_max << ","
            << buckets[b].n << "," << buckets[b].psnr_mean << "," << buckets[b].ssim_mean
            << "\n";
    out << "overall,,," << buckets.size() << "," << psnr_overall << "," << ssim_overall << "\n";
    return out.str();
}

template <typename T>
GroupedReport grouped_report(
    const std::vector<std::pair<const MarInstanceT<T>*, const ImageGridT<T>*>>& results,
    bool group_by_metal_size) {
    if (results.empty()) throw ValidationError("grouped_report: no instances");

    struct Entry {
        long metal_px;
        double psnr_db;
        double ssim_v;
    };
    std::vector<Entry> entries;
    entries.reserve(results.size());
    for (const auto& [inst, img] : results) {
        Entry e;
        e.metal_px = inst->mask.pixel_count();
        e.psnr_db = psnr(*img, inst->x_gt, 0.0, &inst->mask);
        e.ssim_v = ssim(*img, inst->x_gt, 0.0, &inst->mask);
        entries.push_back(e);
    }
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.metal_px > b.metal_px; });

    GroupedReport rep;
    std::size_t i = 0;
    while (i < entries.size()) {
        std::size_t jj = i + 1;
        if (group_by_metal_size)
            while (jj < entries.size() && entries[jj].metal_px == entries[i].metal_px) ++jj;
        else
            jj = entries.size();
        GroupBucket b;
        b.metal_px_min = entries[jj - 1].metal_px;
        b.metal_px_max = entries[i].metal_px;
        b.n = static_cast<int>(jj - i);
        for (std::size_t k = i; k < jj; ++k) {
            b.psnr_mean += entries[k].psnr_db;
            b.ssim_mean += entries[k].ssim_v;
        }
        b.psnr_mean /= b.n;
        b.ssim_mean /= b.n;
        rep.buckets.push_back(b);
        i = jj;
    }
    for (const auto& e : entries) {
        rep.psnr_overall += e.psnr_db;
        rep.ssim_overall += e.ssim_v;
    }
    rep.psnr_overall /= static_cast<double>(entries.size());
    rep.ssim_overall /= static_cast<double>(entries.size());
    return rep;
}

#define TOMO_INSTANTIATE_METRICS(T)                                                            \
    template double default_peak<T>(const ImageGridT<T>&);                                     \
    template MetricReport psnr_report<T>(const ImageGridT<T>&, const ImageGridT<T>&, double,   \
                                         const MetalMask*);                                    \
    template double psnr<T>(const ImageGridT<T>&, const ImageGridT<T>&, double,                \
                            const MetalMask*);                                                 \
    template double ssim<T>(const ImageGridT<T>&, const ImageGridT<T>&, double,                \
                            const MetalMask*);                                                 \
    template GroupedReport grouped_report<T>(                                                  \
        const std::vector<std::pair<const MarInstanceT<T>*, const ImageGridT<T>*>>&, bool);

TOMO_INSTANTIATE_METRICS(float)
TOMO_INSTANTIATE_METRICS(double)

#undef TOMO_INSTANTIATE_METRICS

}  // namespace tomo
