#pragma once

#include <cstdint>
#include <vector>

#include "mrsr/volume.hpp"

namespace mrsr {

/// Channel-major 3D block: data laid out [c][z][y][x], x fastest. Shares
/// the MultiEchoVolume memory order so volumes convert without reshuffles.
struct Tensor {
    std::uint32_t channels = 0;
    std::uint32_t nz = 0, ny = 0, nx = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::uint32_t c, std::uint32_t z, std::uint32_t y, std::uint32_t x)
        : channels(c), nz(z), ny(y), nx(x),
          data(std::size_t(c) * z * y * x, 0.0) {}

    std::size_t voxels() const { return std::size_t(nz) * ny * nx; }
    std::size_t size() const { return data.size(); }
    std::size_t index(std::uint32_t c, std::uint32_t z, std::uint32_t y,
                      std::uint32_t x) const {
        return ((std::size_t(c) * nz + z) * ny + y) * nx + x;
    }
    double& at(std::uint32_t c, std::uint32_t z, std::uint32_t y, std::uint32_t x) {
        return data[index(c, z, y, x)];
    }
    double at(std::uint32_t c, std::uint32_t z, std::uint32_t y,
              std::uint32_t x) const {
        return data[index(c, z, y, x)];
    }
    bool same_shape(const Tensor& o) const {
        return channels == o.channels && nz == o.nz && ny == o.ny && nx == o.nx;
    }
};

inline Tensor to_tensor(const MultiEchoVolume& vol) {
    Tensor t(vol.echoes(), vol.dims().nz, vol.dims().ny, vol.dims().nx);
    t.data = vol.data();
    return t;
}

inline MultiEchoVolume to_volume(const Tensor& t, Spacing spacing) {
    return MultiEchoVolume({t.nx, t.ny, t.nz}, spacing, t.channels, t.data);
}

}  // namespace mrsr
