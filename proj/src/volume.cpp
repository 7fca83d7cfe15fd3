#include "mrsr/volume.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "MRSV I/O assumes a little-endian host");

namespace mrsr {

namespace {

constexpr char kMagic[4] = {'M', 'R', 'S', 'V'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kDtypeFloat32 = 0;
constexpr std::size_t kHeaderBytes = 32;

}  // namespace

MultiEchoVolume::MultiEchoVolume(Dims dims, Spacing spacing, std::uint32_t echoes)
    : dims_(dims), spacing_(spacing), echoes_(echoes),
      data_(std::size_t(echoes) * dims.voxels(), 0.0) {}

MultiEchoVolume::MultiEchoVolume(Dims dims, Spacing spacing, std::uint32_t echoes,
                                 std::vector<double> data)
    : dims_(dims), spacing_(spacing), echoes_(echoes), data_(std::move(data)) {
    if (data_.size() != std::size_t(echoes_) * dims_.voxels())
        throw ValidationError("volume data size does not match dims * echoes");
}

std::span<double> MultiEchoVolume::echo(std::uint32_t e) {
    return {data_.data() + std::size_t(e) * voxels_per_echo(), voxels_per_echo()};
}

std::span<const double> MultiEchoVolume::echo(std::uint32_t e) const {
    return {data_.data() + std::size_t(e) * voxels_per_echo(), voxels_per_echo()};
}

void MultiEchoVolume::set_spacing(Spacing s) {
    spacing_ = s;
}

void MultiEchoVolume::validate() const {
    if (dims_.nx == 0 || dims_.ny == 0 || dims_.nz == 0)
        throw ValidationError("volume dims must be strictly positive");
    if (!(spacing_.sx > 0 && spacing_.sy > 0 && spacing_.sz > 0))
        throw ValidationError("voxel spacing must be strictly positive");
    if (echoes_ < 1)
        throw ValidationError("volume must contain at least one echo");
    if (data_.size() != std::size_t(echoes_) * dims_.voxels())
        throw ValidationError("volume data size does not match dims * echoes");
    for (double v : data_)
        if (!std::isfinite(v))
            throw ValidationError("volume contains non-finite samples");
}

void ScanParams::validate() const {
    if (!(te1_ms > 0) || !(te2_ms > 0) || !(tr_ms > 0))
        throw ValidationError("scan times must be strictly positive");
    if (!(te1_ms < tr_ms))
        throw ValidationError("scan params require te1 < tr");
    if (std::abs(te2_ms - (2.0 * tr_ms - te1_ms)) > 0.5)
        throw ValidationError("scan params violate te2 = 2*tr - te1 (within 0.5 ms)");
    if (!(flip_deg > 0 && flip_deg <= 90))
        throw ValidationError("flip angle must lie in (0, 90] degrees");
}

ScanParams ScanParams::load(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in)
        throw ValidationError("cannot open scan parameter file: " + json_path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed scan parameter JSON: " + std::string(e.what()));
    }
    ScanParams p;
    try {
        p.te1_ms = j.at("te1_ms").get<double>();
        p.te2_ms = j.at("te2_ms").get<double>();
        p.tr_ms = j.at("tr_ms").get<double>();
        p.flip_deg = j.at("flip_deg").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("scan parameter JSON missing key: " + std::string(e.what()));
    }
    p.validate();
    return p;
}

void ScanParams::save(const std::filesystem::path& json_path) const {
    validate();
    nlohmann::json j{{"te1_ms", te1_ms},
                     {"te2_ms", te2_ms},
                     {"tr_ms", tr_ms},
                     {"flip_deg", flip_deg}};
    std::ofstream out(json_path);
    if (!out)
        throw ValidationError("cannot write scan parameter file: " + json_path.string());
    out << j.dump(2) << "\n";
}

MultiEchoVolume load_volume(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot open volume file: " + path.string());

    char header[kHeaderBytes];
    in.read(header, kHeaderBytes);
    if (in.gcount() != std::streamsize(kHeaderBytes))
        throw ValidationError("truncated MRSV header in " + path.string());

    if (std::memcmp(header, kMagic, 4) != 0)
        throw ValidationError("bad magic: not an MRSV file: " + path.string());
    const auto version = std::uint8_t(header[4]);
    if (version != kVersion)
        throw ValidationError("unsupported MRSV version " + std::to_string(version) +
                              " in " + path.string());
    const auto dtype = std::uint8_t(header[5]);
    if (dtype != kDtypeFloat32)
        throw ValidationError("unsupported MRSV dtype code " + std::to_string(dtype) +
                              " in " + path.string());
    const auto echoes = std::uint8_t(header[6]);
    if (echoes < 1)
        throw ValidationError("MRSV file declares zero echoes: " + path.string());

    Dims dims;
    std::memcpy(&dims.nx, header + 8, 4);
    std::memcpy(&dims.ny, header + 12, 4);
    std::memcpy(&dims.nz, header + 16, 4);
    Spacing spacing;
    std::memcpy(&spacing.sx, header + 20, 4);
    std::memcpy(&spacing.sy, header + 24, 4);
    std::memcpy(&spacing.sz, header + 28, 4);

    if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0)
        throw ValidationError("MRSV file declares zero-sized dims: " + path.string());

    const std::size_t n = std::size_t(echoes) * dims.voxels();
    const std::uintmax_t expected = kHeaderBytes + n * 4;
    std::error_code ec;
    const std::uintmax_t actual = std::filesystem::file_size(path, ec);
    if (!ec && actual != expected)
        throw ValidationError("truncated MRSV payload in " + path.string() + ": expected " +
                              std::to_string(expected) + " bytes, found " +
                              std::to_string(actual));

    std::vector<float> raw(n);
    in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(n * 4));
    if (std::size_t(in.gcount()) != n * 4)
        throw ValidationError("truncated MRSV payload in " + path.string());

    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(raw[i]))
            throw ValidationError("MRSV payload contains non-finite samples: " +
                                  path.string());
        data[i] = raw[i];
    }

    return MultiEchoVolume(dims, spacing, echoes, std::move(data));
}

void save_volume(const MultiEchoVolume& vol, const std::filesystem::path& path) {
    vol.validate();
    if (vol.echoes() > 255)
        throw ValidationError("MRSV supports at most 255 echoes");

    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw ValidationError("cannot write volume file: " + path.string());

        char header[kHeaderBytes] = {};
        std::memcpy(header, kMagic, 4);
        header[4] = char(kVersion);
        header[5] = char(kDtypeFloat32);
        header[6] = char(std::uint8_t(vol.echoes()));
        header[7] = 0;
        const Dims& d = vol.dims();
        std::memcpy(header + 8, &d.nx, 4);
        std::memcpy(header + 12, &d.ny, 4);
        std::memcpy(header + 16, &d.nz, 4);
        const Spacing& s = vol.spacing();
        std::memcpy(header + 20, &s.sx, 4);
        std::memcpy(header + 24, &s.sy, 4);
        std::memcpy(header + 28, &s.sz, 4);
        out.write(header, kHeaderBytes);

        std::vector<float> raw(vol.size());
        for (std::size_t i = 0; i < raw.size(); ++i)
            raw[i] = float(vol.data()[i]);
        out.write(reinterpret_cast<const char*>(raw.data()),
                  std::streamsize(raw.size() * 4));
        if (!out)
            throw ValidationError("write failure on volume file: " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

std::pair<MultiEchoVolume, NormalizationRecord>
normalize(const MultiEchoVolume& vol, NormScope scope) {
    vol.validate();
    NormalizationRecord rec;
    rec.scope = scope;
    MultiEchoVolume out = vol;

    auto map_group = [&](std::span<const double> src, std::span<double> dst) {
        double vmin = std::numeric_limits<double>::infinity();
        double vmax = -std::numeric_limits<double>::infinity();
        for (double v : src) {
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
        if (!(vmax > vmin))
            throw ValidationError(
                "normalization undefined on constant data (vmax == vmin)");
        const double scale = 1.0 / (vmax - vmin);
        for (std::size_t i = 0; i < src.size(); ++i)
            dst[i] = (src[i] - vmin) * scale;
        rec.ranges.emplace_back(vmin, vmax);
    };

    if (scope == NormScope::per_volume) {
        map_group(std::span<const double>(vol.data()), std::span<double>(out.data()));
    } else {
        for (std::uint32_t e = 0; e < vol.echoes(); ++e)
            map_group(vol.echo(e), out.echo(e));
    }
    return {std::move(out), std::move(rec)};
}

MultiEchoVolume apply_normalization(const MultiEchoVolume& vol,
                                    const NormalizationRecord& rec) {
    const std::size_t expected_groups =
        rec.scope == NormScope::per_volume ? 1 : vol.echoes();
    if (rec.ranges.size() != expected_groups)
        throw ValidationError("normalization record does not match volume echo count");
    for (const auto& [vmin, vmax] : rec.ranges)
        if (!(vmax > vmin))
            throw ValidationError("normalization record requires vmax > vmin");

    MultiEchoVolume out = vol;
    if (rec.scope == NormScope::per_volume) {
        const auto [vmin, vmax] = rec.ranges[0];
        const double scale = 1.0 / (vmax - vmin);
        for (double& v : out.data())
            v = (v - vmin) * scale;
    } else {
        for (std::uint32_t e = 0; e < out.echoes(); ++e) {
            const auto [vmin, vmax] = rec.ranges[e];
            const double scale = 1.0 / (vmax - vmin);
            for (double& v : out.echo(e))
                v = (v - vmin) * scale;
        }
    }
    return out;
}

MultiEchoVolume denormalize(const MultiEchoVolume& vol01,
                            const NormalizationRecord& rec) {
    const std::size_t expected_groups =
        rec.scope == NormScope::per_volume ? 1 : vol01.echoes();
    if (rec.ranges.size() != expected_groups)
        throw ValidationError("normalization record does not match volume echo count");
    for (const auto& [vmin, vmax] : rec.ranges)
        if (!(vmax > vmin))
            throw ValidationError("normalization record requires vmax > vmin");

    MultiEchoVolume out = vol01;
    if (rec.scope == NormScope::per_volume) {
        const auto [vmin, vmax] = rec.ranges[0];
        for (double& v : out.data())
            v = v * (vmax - vmin) + vmin;
    } else {
        for (std::uint32_t e = 0; e < out.echoes(); ++e) {
            const auto [vmin, vmax] = rec.ranges[e];
            for (double& v : out.echo(e))
                v = v * (vmax - vmin) + vmin;
        }
    }
    return out;
}

}  // namespace mrsr
