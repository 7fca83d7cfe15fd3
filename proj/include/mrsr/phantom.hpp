#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "mrsr/quant.hpp"
#include "mrsr/volume.hpp"

namespace mrsr {

/// One synthetic structure. Geometry is given in normalized volume
/// coordinates [0, 1] per axis so a spec scales with dims. Overlaps
/// resolve last-writer-wins in list order.
struct PhantomStructure {
    enum class Shape { ellipsoid, slab, layered_shell };
    Shape shape = Shape::slab;
    double rho = 1.0;    // proton density in (0, 1]
    double t2_ms = 40.0; // ellipsoid/slab

    // slab: axis-aligned box
    std::array<double, 3> box_lo{0.0, 0.0, 0.0};
    std::array<double, 3> box_hi{1.0, 1.0, 1.0};

    // ellipsoid / layered_shell: center and outer radii
    std::array<double, 3> center{0.5, 0.5, 0.5};
    std::array<double, 3> radii{0.3, 0.3, 0.3};

    // layered_shell: annulus between (1 - thickness) and 1 of the
    // normalized radius; inner half is the deep layer, outer half the
    // superficial layer.
    double thickness = 0.3;
    double t2_deep_ms = 25.0;
    double t2_superficial_ms = 45.0;
};

struct PhantomSpec {
    Dims dims{64, 64, 64};
    Spacing spacing{0.4f, 0.4f, 0.7f};
    std::vector<PhantomStructure> structures;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// The stock desk-scale phantom: a background slab at T2 30 ms plus a
/// layered shell (deep 25 ms under superficial 45 ms).
PhantomSpec default_phantom_spec();

PhantomSpec load_phantom_spec(const std::filesystem::path& json_path);
PhantomSpec parse_phantom_spec(const std::string& json_text);
void save_phantom_spec(const PhantomSpec& spec, const std::filesystem::path& json_path);
std::string phantom_spec_to_json(const PhantomSpec& spec);

/// Rasterize the spec into a dual-echo volume, S1 = rho and
/// S2 = rho * exp(-2 (TR - TE1) / T2), plus the ground-truth T2 map with
/// background masked invalid. Gaussian noise (if any) is seeded and
/// added per echo.
std::pair<MultiEchoVolume, T2Map> generate_phantom(const PhantomSpec& spec,
                                                   const ScanParams& params);

}  // namespace mrsr
