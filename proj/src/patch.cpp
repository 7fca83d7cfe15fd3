#include "mrsr/patch.hpp"

#include <string>

namespace mrsr {

namespace {

std::vector<std::uint32_t> axis_origins(std::uint32_t dim, std::uint32_t patch,
                                        std::uint32_t stride) {
    std::vector<std::uint32_t> origins;
    for (std::uint32_t o = 0; o + patch <= dim; o += stride)
        origins.push_back(o);
    if ((dim - patch) % stride != 0)
        origins.push_back(dim - patch);
    return origins;
}

}  // namespace

PatchGrid make_patch_grid(Dims dims, std::uint32_t patch, std::uint32_t stride) {
    if (patch == 0 || stride == 0)
        throw ValidationError("patch size and stride must be positive");
    for (std::uint32_t d : {dims.nx, dims.ny, dims.nz})
        if (d < patch)
            throw ValidationError("volume dim " + std::to_string(d) +
                                  " smaller than patch size " + std::to_string(patch));

    const auto xs = axis_origins(dims.nx, patch, stride);
    const auto ys = axis_origins(dims.ny, patch, stride);
    const auto zs = axis_origins(dims.nz, patch, stride);

    PatchGrid grid;
    grid.patch = patch;
    grid.stride = stride;
    grid.dims = dims;
    grid.origins.reserve(xs.size() * ys.size() * zs.size());
    for (std::uint32_t x : xs)
        for (std::uint32_t y : ys)
            for (std::uint32_t z : zs)
                grid.origins.push_back({x, y, z});
    return grid;
}

PatchSet extract_patches(const MultiEchoVolume& vol, const PatchGrid& grid) {
    if (!(grid.dims == vol.dims()))
        throw ValidationError("patch grid was laid out for different volume dims");
    const std::uint32_t p = grid.patch;

    PatchSet set;
    set.grid = grid;
    set.echoes = vol.echoes();
    set.spacing = vol.spacing();
    set.blocks.reserve(grid.origins.size());

    for (const auto& [ox, oy, oz] : grid.origins) {
        Tensor block(vol.echoes(), p, p, p);
        for (std::uint32_t e = 0; e < vol.echoes(); ++e)
            for (std::uint32_t z = 0; z < p; ++z)
                for (std::uint32_t y = 0; y < p; ++y) {
                    const double* src = &vol.data()[vol.index(e, oz + z, oy + y, ox)];
                    double* dst = &block.data[block.index(e, z, y, 0)];
                    std::copy(src, src + p, dst);
                }
        set.blocks.push_back(std::move(block));
    }
    return set;
}

MultiEchoVolume assemble_patches(const PatchSet& patches, Dims dims) {
    const PatchGrid& grid = patches.grid;
    if (!(grid.dims == dims))
        throw ValidationError("patch grid does not match requested output dims");
    if (patches.blocks.size() != grid.origins.size())
        throw ValidationError("patch set block count does not match its grid");
    const std::uint32_t p = grid.patch;

    MultiEchoVolume out(dims, patches.spacing, patches.echoes);
    std::vector<std::uint32_t> cover(dims.voxels(), 0);

    for (std::size_t b = 0; b < patches.blocks.size(); ++b) {
        const auto& [ox, oy, oz] = grid.origins[b];
        const Tensor& block = patches.blocks[b];
        if (block.channels != patches.echoes || block.nz != p || block.ny != p ||
            block.nx != p)
            throw ValidationError("patch block shape does not match the grid");
        for (std::uint32_t e = 0; e < patches.echoes; ++e)
            for (std::uint32_t z = 0; z < p; ++z)
                for (std::uint32_t y = 0; y < p; ++y) {
                    const double* src = &block.data[block.index(e, z, y, 0)];
                    double* dst = &out.data()[out.index(e, oz + z, oy + y, ox)];
                    for (std::uint32_t x = 0; x < p; ++x)
                        dst[x] += src[x];
                }
        for (std::uint32_t z = 0; z < p; ++z)
            for (std::uint32_t y = 0; y < p; ++y) {
                std::uint32_t* cv =
                    &cover[(std::size_t(oz + z) * dims.ny + (oy + y)) * dims.nx + ox];
                for (std::uint32_t x = 0; x < p; ++x)
                    cv[x] += 1;
            }
    }

    for (std::size_t i = 0; i < cover.size(); ++i)
        if (cover[i] == 0)
            throw ValidationError("patch grid leaves voxels uncovered");

    const std::size_t per_echo = dims.voxels();
    for (std::uint32_t e = 0; e < patches.echoes; ++e) {
        double* d = out.echo(e).data();
        for (std::size_t i = 0; i < per_echo; ++i)
            d[i] /= cover[i];
    }
    return out;
}

}  // namespace mrsr
