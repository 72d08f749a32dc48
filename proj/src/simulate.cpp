#include "tomo/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "tomo/mar.hpp"
#include "tomo/threading.hpp"

namespace tomo {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Counter-based key: every (seed, row, col) owns an independent stream.
std::uint64_t entry_key(std::uint64_t seed, int r, int c) {
    return splitmix64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(r)) ^
                      static_cast<std::uint64_t>(c));
}

}  // namespace

void Spectrum::validate() const {
    if (bins.empty()) throw ValidationError("spectrum: no bins");
    if (reference_bin < 0 || reference_bin >= static_cast<int>(bins.size()))
        throw ValidationError("spectrum: reference bin out of range");
    double sum = 0.0;
    for (const auto& b : bins) {
        if (b.eta < 0.0) throw ValidationError("spectrum: negative weight");
        if (!(b.mu_metal_per_mm > 0.0))
            throw ValidationError("spectrum: metal attenuation must be > 0");
        sum += b.eta;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ValidationError("spectrum: weights must sum to 1");
    for (std::size_t k = 1; k < bins.size(); ++k) {
        if (bins[k].energy_kev > bins[k - 1].energy_kev &&
            bins[k].mu_metal_per_mm > bins[k - 1].mu_metal_per_mm) {
            warn("spectrum: metal attenuation increases with energy between bins " +
                 std::to_string(k - 1) + " and " + std::to_string(k));
            break;
        }
    }
}

Spectrum default_spectrum() {
    Spectrum s;
    // 10-bin sketch of a filtered 120 kVp tube with a titanium-like implant
    // curve; illustrative values, not a measured spectrum.
    const double e[] = {30, 40, 50, 60, 70, 80, 90, 100, 110, 120};
    const double eta[] = {0.03, 0.08, 0.13, 0.16, 0.17, 0.15, 0.12, 0.08, 0.05, 0.03};
    const double mu[] = {1.50, 1.10, 0.85, 0.68, 0.56, 0.48, 0.42, 0.37, 0.33, 0.30};
    for (int k = 0; k < 10; ++k) s.bins.push_back({e[k], eta[k], mu[k]});
    s.reference_bin = 3;  // 60 keV; above the spectrum-weighted mean attenuation
    s.validate();
    return s;
}

Spectrum parse_spectrum_csv(const std::string& text, int reference_bin) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("spectrum csv: empty file");
    auto strip = [](std::string s) {
        s.erase(std::remove_if(s.begin(), s.end(),
                               [](unsigned char ch) { return std::isspace(ch); }),
                s.end());
        return s;
    };
    if (strip(line) != "energy_keV,eta,mu_metal_per_mm")
        throw ValidationError("spectrum csv: expected header energy_keV,eta,mu_metal_per_mm");

    Spectrum s;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (strip(line).empty()) continue;
        std::istringstream row(line);
        SpectrumBin b;
        char c1 = 0, c2 = 0;
        if (!(row >> b.energy_kev >> c1 >> b.eta >> c2 >> b.mu_metal_per_mm) || c1 != ',' ||
            c2 != ',')
            throw ValidationError("spectrum csv: malformed row at line " +
                                  std::to_string(lineno));
        s.bins.push_back(b);
    }
    if (s.bins.empty()) throw ValidationError("spectrum csv: no bins");

    double sum = 0.0;
    for (const auto& b : s.bins) sum += b.eta;
    if (!(sum > 0.0)) throw ValidationError("spectrum csv: weights sum to zero");
    if (std::abs(sum - 1.0) > 1e-6)
        warn("spectrum csv: weights sum to " + std::to_string(sum) + ", renormalizing");
    for (auto& b : s.bins) b.eta /= sum;

    s.reference_bin = reference_bin >= 0 ? reference_bin : 0;
    s.validate();
    return s;
}

Spectrum load_spectrum_csv(const std::string& path, int reference_bin) {
    std::ifstream in(path);
    if (!in) throw IoError("spectrum csv: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_spectrum_csv(ss.str(), reference_bin);
}

std::string spectrum_to_csv(const Spectrum& s) {
    std::ostringstream out;
    out.precision(17);
    out << "energy_keV,eta,mu_metal_per_mm\n";
    for (const auto& b : s.bins)
        out << b.energy_kev << "," << b.eta << "," << b.mu_metal_per_mm << "\n";
    return out.str();
}

template <typename T>
SinogramT<T> polychromatic_project(const ImageGridT<T>& x_tissue, const MetalMask& m,
                                   const Spectrum& s, const FanGeometry& g, int supersample) {
    s.validate();
    if (supersample < 1) throw ValidationError("polychromatic_project: supersample must be >= 1");
    if (m.side != x_tissue.side)
        throw ValidationError("polychromatic_project: mask/grid dimension mismatch");

    SinogramT<T> y = forward_fan(x_tissue, g);
    if (m.empty()) return y;  // reduces exactly to the monochromatic projection

    // Metal path lengths from a replicated k-times finer indicator so rays see
    // fractional metal thickness at mask edges.
    ImageGridT<T> indicator;
    indicator.side = m.side * supersample;
    indicator.pixel_spacing_mm = x_tissue.pixel_spacing_mm / supersample;
    indicator.values = Tensor2<T>(indicator.side, indicator.side);
    for (int r = 0; r < indicator.side; ++r)
        for (int c = 0; c < indicator.side; ++c)
            indicator.values(r, c) = static_cast<T>(m.values(r / supersample, c / supersample));
    const SinogramT<T> pm = forward_fan(indicator, g);

    const int n_bins = static_cast<int>(s.bins.size());
    parallel_for(g.n_views, [&](std::int64_t j0, std::int64_t j1) {
        for (int j = static_cast<int>(j0); j < static_cast<int>(j1); ++j)
            for (int i = 0; i < g.n_detectors; ++i) {
                const double p = static_cast<double>(pm.values(i, j));
                if (p <= 0.0) continue;
                // -log sum_k eta_k exp(-mu_k p), shifted for stability
                double x_min = std::numeric_limits<double>::infinity();
                for (int k = 0; k < n_bins; ++k)
                    if (s.bins[k].eta > 0.0)
                        x_min = std::min(x_min, s.bins[k].mu_metal_per_mm * p);
                double acc = 0.0;
                for (int k = 0; k < n_bins; ++k) {
                    if (s.bins[k].eta <= 0.0) continue;
                    acc += s.bins[k].eta * std::exp(-(s.bins[k].mu_metal_per_mm * p - x_min));
                }
                y.values(i, j) += static_cast<T>(x_min - std::log(acc));
            }
    });
    return y;
}

template <typename T>
SinogramT<T> add_poisson(const SinogramT<T>& y, const NoiseSpec& n) {
    if (!(n.photon_count > 0.0)) throw ValidationError("add_poisson: photon count must be > 0");
    SinogramT<T> out = y;
    const int rows = y.values.rows();
    const int cols = y.values.cols();
    const double log_n0 = std::log(n.photon_count);
    std::atomic<long> clamped{0};
    parallel_for(rows, [&](std::int64_t r0, std::int64_t r1) {
        long local_clamped = 0;
        for (int r = static_cast<int>(r0); r < static_cast<int>(r1); ++r)
            for (int c = 0; c < cols; ++c) {
                double v = static_cast<double>(y.values(r, c));
                if (v < 0.0) {
                    v = 0.0;
                    ++local_clamped;
                }
                const double lambda = n.photon_count * std::exp(-v);
                std::mt19937_64 eng(entry_key(n.seed, r, c));
                std::poisson_distribution<long long> dist(lambda);
                const long long count = std::max<long long>(dist(eng), 1);
                out.values(r, c) =
                    static_cast<T>(log_n0 - std::log(static_cast<double>(count)));
            }
        clamped += local_clamped;
    });
    if (clamped.load() > 0)
        warn("add_poisson: clamped " + std::to_string(clamped.load()) +
             " negative line integrals to 0");
    return out;
}

template <typename T>
MarInstanceT<T> make_instance(const ImageGridT<T>& x_gt, const MetalMask& mask,
                              const Spectrum& s, const FanGeometry& g,
                              const std::optional<NoiseSpec>& noise, const RilPlan& plan,
                              int supersample) {
    if (mask.side != x_gt.side)
        throw ValidationError("make_instance: mask/grid dimension mismatch");
    MarInstanceT<T> inst;
    inst.x_gt = x_gt;
    inst.mask = mask;
    inst.y_gt = forward_fan(x_gt, g);
    SinogramT<T> y = polychromatic_project(x_gt, mask, s, g, supersample);
    inst.y = noise ? add_poisson(y, *noise) : std::move(y);
    inst.trace = metal_trace(mask, g, x_gt.pixel_spacing_mm);
    inst.y_li = li_inpaint(inst.y, inst.trace);
    inst.x_li = ril_forward(inst.y_li, plan, x_gt.side, x_gt.pixel_spacing_mm);
    inst.x_corrupt = ril_forward(inst.y, plan, x_gt.side, x_gt.pixel_spacing_mm);
    return inst;
}

#define TOMO_INSTANTIATE_SIM(T)                                                                 \
    template SinogramT<T> polychromatic_project<T>(const ImageGridT<T>&, const MetalMask&,      \
                                                   const Spectrum&, const FanGeometry&, int);   \
    template SinogramT<T> add_poisson<T>(const SinogramT<T>&, const NoiseSpec&);                \
    template MarInstanceT<T> make_instance<T>(const ImageGridT<T>&, const MetalMask&,           \
                                              const Spectrum&, const FanGeometry&,             \
                                              const std::optional<NoiseSpec>&, const RilPlan&, \
                                              int);

TOMO_INSTANTIATE_SIM(float)
TOMO_INSTANTIATE_SIM(double)

#undef TOMO_INSTANTIATE_SIM

}  // namespace tomo
