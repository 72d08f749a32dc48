#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tomo/geometry.hpp"
#include "tomo/projector.hpp"
#include "tomo/ril.hpp"

namespace tomo {

struct SpectrumBin {
    double energy_kev = 0.0;
    double eta = 0.0;             // normalized weight
    double mu_metal_per_mm = 0.0;  // metal attenuation at this energy
};

// Discrete X-ray spectrum with the metal attenuation curve. Tissue
// attenuation is treated as energy-independent; the reference bin names the
// energy at which image-domain values are specified.
struct Spectrum {
    std::vector<SpectrumBin> bins;
    int reference_bin = 0;

    void validate() const;  // throws ValidationError on hard violations
    double reference_mu_metal() const { return bins.at(reference_bin).mu_metal_per_mm; }
};

// Illustrative 10-bin 120 kVp-like spectrum with a titanium-like metal curve.
Spectrum default_spectrum();

// CSV with header "energy_keV,eta,mu_metal_per_mm"; weights renormalized on
// load (warning when off by more than 1e-6).
Spectrum parse_spectrum_csv(const std::string& text, int reference_bin = -1);
Spectrum load_spectrum_csv(const std::string& path, int reference_bin = -1);
std::string spectrum_to_csv(const Spectrum& s);

struct NoiseSpec {
    double photon_count = 2e7;  // incident photons per ray
    std::uint64_t seed = 0;
};

// Polychromatic Beer-Lambert projection: tissue line integrals plus
// -log sum_k eta_k exp(-mu_M(E_k) * p_m), where p_m is the metal path length
// from a supersample-times refined mask (partial volume at implant edges).
// An empty mask reduces exactly to forward_fan(x_tissue).
template <typename T>
SinogramT<T> polychromatic_project(const ImageGridT<T>& x_tissue, const MetalMask& m,
                                   const Spectrum& s, const FanGeometry& g, int supersample = 4);

// Count-domain Poisson noise: N ~ Poisson(N0 * exp(-y)) with a counter-based
// generator keyed by (seed, row, col); output = -log(max(N, 1) / N0).
// Order- and thread-independent.
template <typename T>
SinogramT<T> add_poisson(const SinogramT<T>& y, const NoiseSpec& n);

// A complete simulated MAR problem.
template <typename T>
struct MarInstanceT {
    SinogramT<T> y;          // corrupted fan sinogram
    SinogramT<T> y_gt;       // clean = P x_gt
    SinogramT<T> y_li;       // LI-inpainted
    MetalTrace trace;        // M_t
    ImageGridT<T> x_gt;
    ImageGridT<T> x_li;      // f_R(y_li)
    ImageGridT<T> x_corrupt; // f_R(y)
    MetalMask mask;
};

using MarInstance = MarInstanceT<float>;

template <typename T>
MarInstanceT<T> make_instance(const ImageGridT<T>& x_gt, const MetalMask& mask,
                              const Spectrum& s, const FanGeometry& g,
                              const std::optional<NoiseSpec>& noise, const RilPlan& plan,
                              int supersample = 4);

}  // namespace tomo
