#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "mrsr/errors.hpp"

namespace mrsr {

struct Dims {
    std::uint32_t nx = 0, ny = 0, nz = 0;

    bool operator==(const Dims&) const = default;
    std::size_t voxels() const {
        return std::size_t(nx) * ny * nz;
    }
};

// Voxel spacing in millimeters. Stored as float32 so values round-trip
// the container format bit-exactly.
struct Spacing {
    float sx = 1.0f, sy = 1.0f, sz = 1.0f;

    bool operator==(const Spacing&) const = default;
};

/// A stack of E co-registered 3D scalar grids (one per echo) sharing dims
/// and spacing. Data is echo-major, then z, then y, then x fastest --
/// identical to the MRSV payload order. Samples are held in double
/// precision in memory; the container stores float32.
class MultiEchoVolume {
public:
    MultiEchoVolume() = default;
    MultiEchoVolume(Dims dims, Spacing spacing, std::uint32_t echoes);
    MultiEchoVolume(Dims dims, Spacing spacing, std::uint32_t echoes,
                    std::vector<double> data);

    const Dims& dims() const { return dims_; }
    const Spacing& spacing() const { return spacing_; }
    std::uint32_t echoes() const { return echoes_; }
    std::size_t voxels_per_echo() const { return dims_.voxels(); }
    std::size_t size() const { return data_.size(); }

    double& at(std::uint32_t e, std::uint32_t z, std::uint32_t y, std::uint32_t x) {
        return data_[index(e, z, y, x)];
    }
    double at(std::uint32_t e, std::uint32_t z, std::uint32_t y, std::uint32_t x) const {
        return data_[index(e, z, y, x)];
    }
    std::size_t index(std::uint32_t e, std::uint32_t z, std::uint32_t y,
                      std::uint32_t x) const {
        return ((std::size_t(e) * dims_.nz + z) * dims_.ny + y) * dims_.nx + x;
    }

    std::span<double> echo(std::uint32_t e);
    std::span<const double> echo(std::uint32_t e) const;
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    void set_spacing(Spacing s);

    // Throws ValidationError on non-finite samples or degenerate dims/spacing.
    void validate() const;

    bool operator==(const MultiEchoVolume&) const = default;

private:
    Dims dims_{};
    Spacing spacing_{};
    std::uint32_t echoes_ = 0;
    std::vector<double> data_;
};

/// DESS acquisition timing. te2 must satisfy the sequence identity
/// te2 = 2*tr - te1 within 0.5 ms.
struct ScanParams {
    double te1_ms = 7.0;
    double te2_ms = 39.0;
    double tr_ms = 23.0;
    double flip_deg = 20.0;

    void validate() const;
    static ScanParams load(const std::filesystem::path& json_path);
    void save(const std::filesystem::path& json_path) const;
};

enum class NormScope { per_volume, per_echo };

/// Inverse data for normalize(). One (vmin, vmax) pair per scope group:
/// a single pair for per-volume scope, one per echo otherwise.
struct NormalizationRecord {
    NormScope scope = NormScope::per_echo;
    std::vector<std::pair<double, double>> ranges;  // (vmin, vmax)
};

// MRSV container I/O. save_volume writes to a temporary file and renames,
// so a failed save never leaves a partial output.
MultiEchoVolume load_volume(const std::filesystem::path& path);
void save_volume(const MultiEchoVolume& vol, const std::filesystem::path& path);

// Affine map of each scope group onto [0, 1]. Constant groups are an error.
std::pair<MultiEchoVolume, NormalizationRecord>
normalize(const MultiEchoVolume& vol, NormScope scope = NormScope::per_echo);

MultiEchoVolume denormalize(const MultiEchoVolume& vol01,
                            const NormalizationRecord& rec);

// Forward map of an existing record onto another volume (no clamping).
// Used to put training targets on the same scale as the network input.
MultiEchoVolume apply_normalization(const MultiEchoVolume& vol,
                                    const NormalizationRecord& rec);

}  // namespace mrsr
