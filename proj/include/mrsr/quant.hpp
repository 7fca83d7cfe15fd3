#pragma once

#include <cstdint>
#include <vector>

#include "mrsr/volume.hpp"

namespace mrsr {

/// Voxelwise T2 relaxation times in milliseconds with a validity mask.
/// Invalid voxels (non-decaying signal, background, out-of-range fits)
/// hold no meaningful value and are masked, never silently zeroed.
struct T2Map {
    Dims dims;
    Spacing spacing;
    std::vector<double> t2_ms;
    std::vector<std::uint8_t> valid;

    std::size_t voxels() const { return dims.voxels(); }
};

struct T2Options {
    double t2_min_ms = 0.0;
    double t2_max_ms = 100.0;
    double signal_floor = 1e-6;  // masks background air in normalized units
    // Slot for a flip-angle/T1 correction factor; 1 leaves the pure
    // echo-ratio model T2 = 2 (TR - TE1) / ln(S1/S2).
    double correction = 1.0;

    void validate() const;
};

/// Analytic dual-echo estimate from S2/S1 = exp(-2 (TR - TE1) / T2).
/// Voxels with S2 >= S1, S1 at or below the signal floor, or a fit
/// outside [t2_min, t2_max] are masked invalid.
T2Map estimate_t2(const MultiEchoVolume& dual, const ScanParams& params,
                  const T2Options& opts = {});

struct RoiMask {
    Dims dims;
    std::vector<std::uint8_t> include;

    void validate() const;
};

/// Arithmetic mean over voxels that are both in the ROI and valid;
/// masked voxels are excluded from numerator and denominator.
double roi_mean_t2(const T2Map& map, const RoiMask& mask);

// T2 maps and ROI masks travel as single-echo MRSV volumes; the map's
// companion mask file holds 0/1 values.
void save_t2_map(const T2Map& map, const std::filesystem::path& path);
T2Map load_t2_map(const std::filesystem::path& path);
std::filesystem::path t2_mask_path(const std::filesystem::path& map_path);
void save_roi_mask(const RoiMask& mask, Spacing spacing,
                   const std::filesystem::path& path);
RoiMask load_roi_mask(const std::filesystem::path& path);

}  // namespace mrsr
