#include "mrsr/quant.hpp"

#include <cmath>

namespace mrsr {

void T2Options::validate() const {
    if (!(t2_max_ms > t2_min_ms) || !(t2_min_ms >= 0))
        throw ValidationError("T2 range requires 0 <= t2_min < t2_max");
    if (!(signal_floor >= 0))
        throw ValidationError("signal floor must be >= 0");
    if (!(correction > 0) || !std::isfinite(correction))
        throw ValidationError("correction factor must be finite and > 0");
}

T2Map estimate_t2(const MultiEchoVolume& dual, const ScanParams& params,
                  const T2Options& opts) {
    dual.validate();
    params.validate();
    opts.validate();
    if (dual.echoes() != 2)
        throw ValidationError("T2 estimation requires exactly 2 echoes");
    const double tau = params.tr_ms - params.te1_ms;
    if (!(tau > 0))
        throw ValidationError("T2 estimation requires TR > TE1");

    T2Map map;
    map.dims = dual.dims();
    map.spacing = dual.spacing();
    map.t2_ms.assign(map.voxels(), 0.0);
    map.valid.assign(map.voxels(), 0);

    const auto s1 = dual.echo(0);
    const auto s2 = dual.echo(1);
    for (std::size_t i = 0; i < map.voxels(); ++i) {
        if (!(s1[i] > opts.signal_floor)) continue;  // background / air
        if (!(s2[i] > 0.0) || s2[i] >= s1[i]) continue;  // non-decaying signal
        const double t2 = opts.correction * 2.0 * tau / std::log(s1[i] / s2[i]);
        if (!std::isfinite(t2) || t2 < opts.t2_min_ms || t2 > opts.t2_max_ms)
            continue;
        map.t2_ms[i] = t2;
        map.valid[i] = 1;
    }
    return map;
}

void RoiMask::validate() const {
    if (include.size() != dims.voxels())
        throw ValidationError("ROI mask size does not match its dims");
    for (std::uint8_t f : include)
        if (f) return;
    throw ValidationError("ROI mask selects no voxels");
}

double roi_mean_t2(const T2Map& map, const RoiMask& mask) {
    mask.validate();
    if (!(mask.dims == map.dims))
        throw ValidationError("ROI mask dims do not match the T2 map");

    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < map.voxels(); ++i)
        if (mask.include[i] && map.valid[i]) {
            sum += map.t2_ms[i];
            count += 1;
        }
    if (count == 0)
        throw ValidationError("ROI overlaps no valid T2 voxels");
    return sum / double(count);
}

std::filesystem::path t2_mask_path(const std::filesystem::path& map_path) {
    std::filesystem::path p = map_path;
    if (p.extension() == ".mrsv") p.replace_extension();
    return std::filesystem::path(p.string() + ".mask.mrsv");
}

void save_t2_map(const T2Map& map, const std::filesystem::path& path) {
    MultiEchoVolume values(map.dims, map.spacing, 1);
    MultiEchoVolume flags(map.dims, map.spacing, 1);
    for (std::size_t i = 0; i < map.voxels(); ++i) {
        values.data()[i] = map.valid[i] ? map.t2_ms[i] : 0.0;
        flags.data()[i] = map.valid[i] ? 1.0 : 0.0;
    }
    save_volume(values, path);
    save_volume(flags, t2_mask_path(path));
}

T2Map load_t2_map(const std::filesystem::path& path) {
    const MultiEchoVolume values = load_volume(path);
    const MultiEchoVolume flags = load_volume(t2_mask_path(path));
    if (values.echoes() != 1 || flags.echoes() != 1)
        throw ValidationError("T2 map files must hold single-echo volumes");
    if (!(values.dims() == flags.dims()))
        throw ValidationError("T2 map and companion mask dims disagree");

    T2Map map;
    map.dims = values.dims();
    map.spacing = values.spacing();
    map.t2_ms.assign(values.data().begin(), values.data().end());
    map.valid.resize(map.voxels());
    for (std::size_t i = 0; i < map.voxels(); ++i)
        map.valid[i] = flags.data()[i] != 0.0 ? 1 : 0;
    return map;
}

void save_roi_mask(const RoiMask& mask, Spacing spacing,
                   const std::filesystem::path& path) {
    mask.validate();
    MultiEchoVolume flags(mask.dims, spacing, 1);
    for (std::size_t i = 0; i < mask.include.size(); ++i)
        flags.data()[i] = mask.include[i] ? 1.0 : 0.0;
    save_volume(flags, path);
}

RoiMask load_roi_mask(const std::filesystem::path& path) {
    const MultiEchoVolume flags = load_volume(path);
    if (flags.echoes() != 1)
        throw ValidationError("ROI mask file must hold a single-echo volume");
    RoiMask mask;
    mask.dims = flags.dims();
    mask.include.resize(mask.dims.voxels());
    for (std::size_t i = 0; i < mask.include.size(); ++i)
        mask.include[i] = flags.data()[i] != 0.0 ? 1 : 0;
    mask.validate();
    return mask;
}

}  // namespace mrsr
