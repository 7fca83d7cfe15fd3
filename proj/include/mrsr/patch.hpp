#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mrsr/tensor.hpp"
#include "mrsr/volume.hpp"

namespace mrsr {

/// Deterministic patch corner grid. Per axis the origins are
/// {0, S, 2S, ...} while origin + P <= dim, plus one clamped origin at
/// dim - P when (dim - P) is not a multiple of S. Origins are sorted
/// lexicographically by (x, y, z).
struct PatchGrid {
    std::vector<std::array<std::uint32_t, 3>> origins;
    std::uint32_t patch = 32;
    std::uint32_t stride = 16;
    Dims dims;  // volume the grid was laid out for

    bool operator==(const PatchGrid&) const = default;
};

PatchGrid make_patch_grid(Dims dims, std::uint32_t patch = 32,
                          std::uint32_t stride = 16);

/// Extracted P x P x P x E blocks, one per grid origin, plus the source
/// geometry needed to reassemble.
struct PatchSet {
    PatchGrid grid;
    std::uint32_t echoes = 0;
    Spacing spacing;
    std::vector<Tensor> blocks;
};

PatchSet extract_patches(const MultiEchoVolume& vol, const PatchGrid& grid);

/// Overlap-averaged reconstruction: each voxel is the arithmetic mean of
/// every block covering it. Inverse of extract_patches within 1e-6.
MultiEchoVolume assemble_patches(const PatchSet& patches, Dims dims);

}  // namespace mrsr
