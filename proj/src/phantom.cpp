#include "mrsr/phantom.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

namespace mrsr {

namespace {

constexpr double kT2RangeMax = 100.0;  // matches the default quant range

double shell_radius(const PhantomStructure& s, double fx, double fy, double fz) {
    const double dx = (fx - s.center[0]) / s.radii[0];
    const double dy = (fy - s.center[1]) / s.radii[1];
    const double dz = (fz - s.center[2]) / s.radii[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace

void PhantomSpec::validate() const {
    if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0)
        throw ValidationError("phantom dims must be strictly positive");
    if (!(spacing.sx > 0 && spacing.sy > 0 && spacing.sz > 0))
        throw ValidationError("phantom spacing must be strictly positive");
    if (structures.empty())
        throw ValidationError("phantom spec requires at least one structure");
    if (!(noise_sigma >= 0))
        throw ValidationError("phantom noise sigma must be >= 0");
    for (const auto& s : structures) {
        if (!(s.rho > 0 && s.rho <= 1))
            throw ValidationError("structure proton density must lie in (0, 1]");
        const bool layered = s.shape == PhantomStructure::Shape::layered_shell;
        const double t2_lo = layered ? std::min(s.t2_deep_ms, s.t2_superficial_ms)
                                     : s.t2_ms;
        const double t2_hi = layered ? std::max(s.t2_deep_ms, s.t2_superficial_ms)
                                     : s.t2_ms;
        if (!(t2_lo > 0) || !(t2_hi <= kT2RangeMax))
            throw ValidationError("structure T2 values must lie in (0, 100] ms");
        if (layered && !(s.thickness > 0 && s.thickness <= 1))
            throw ValidationError("layered shell thickness must lie in (0, 1]");
        if (s.shape != PhantomStructure::Shape::slab)
            for (double r : s.radii)
                if (!(r > 0))
                    throw ValidationError("structure radii must be strictly positive");
    }
}

PhantomSpec default_phantom_spec() {
    PhantomSpec spec;
    PhantomStructure bg;
    bg.shape = PhantomStructure::Shape::slab;
    bg.rho = 0.3;
    bg.t2_ms = 30.0;
    bg.box_lo = {0.08, 0.08, 0.08};
    bg.box_hi = {0.92, 0.92, 0.92};
    spec.structures.push_back(bg);

    PhantomStructure shell;
    shell.shape = PhantomStructure::Shape::layered_shell;
    shell.rho = 0.8;
    shell.center = {0.5, 0.5, 0.5};
    shell.radii = {0.34, 0.34, 0.34};
    shell.thickness = 0.4;
    shell.t2_deep_ms = 25.0;
    shell.t2_superficial_ms = 45.0;
    spec.structures.push_back(shell);
    return spec;
}

std::pair<MultiEchoVolume, T2Map> generate_phantom(const PhantomSpec& spec,
                                                   const ScanParams& params) {
    spec.validate();
    params.validate();
    const double tau = params.tr_ms - params.te1_ms;

    MultiEchoVolume vol(spec.dims, spec.spacing, 2);
    T2Map truth;
    truth.dims = spec.dims;
    truth.spacing = spec.spacing;
    truth.t2_ms.assign(spec.dims.voxels(), 0.0);
    truth.valid.assign(spec.dims.voxels(), 0);

    const Dims d = spec.dims;
    for (std::uint32_t z = 0; z < d.nz; ++z) {
        const double fz = (z + 0.5) / d.nz;
        for (std::uint32_t y = 0; y < d.ny; ++y) {
            const double fy = (y + 0.5) / d.ny;
            for (std::uint32_t x = 0; x < d.nx; ++x) {
                const double fx = (x + 0.5) / d.nx;
                double rho = 0.0, t2 = 0.0;
                bool covered = false;
                for (const auto& s : spec.structures) {
                    switch (s.shape) {
                        case PhantomStructure::Shape::slab: {
                            if (fx >= s.box_lo[0] && fx < s.box_hi[0] &&
                                fy >= s.box_lo[1] && fy < s.box_hi[1] &&
                                fz >= s.box_lo[2] && fz < s.box_hi[2]) {
                                rho = s.rho;
                                t2 = s.t2_ms;
                                covered = true;
                            }
                            break;
                        }
                        case PhantomStructure::Shape::ellipsoid: {
                            if (shell_radius(s, fx, fy, fz) <= 1.0) {
                                rho = s.rho;
                                t2 = s.t2_ms;
                                covered = true;
                            }
                            break;
                        }
                        case PhantomStructure::Shape::layered_shell: {
                            const double r = shell_radius(s, fx, fy, fz);
                            if (r >= 1.0 - s.thickness && r <= 1.0) {
                                rho = s.rho;
                                t2 = (r < 1.0 - s.thickness / 2.0)
                                         ? s.t2_deep_ms
                                         : s.t2_superficial_ms;
                                covered = true;
                            }
                            break;
                        }
                    }
                }
                const std::size_t i =
                    (std::size_t(z) * d.ny + y) * d.nx + x;
                if (covered) {
                    vol.echo(0)[i] = rho;
                    vol.echo(1)[i] = rho * std::exp(-2.0 * tau / t2);
                    truth.t2_ms[i] = t2;
                    truth.valid[i] = 1;
                }
            }
        }
    }

    if (spec.noise_sigma > 0.0) {
        std::mt19937_64 rng(spec.seed);
        std::normal_distribution<double> noise(0.0, spec.noise_sigma);
        for (std::uint32_t e = 0; e < 2; ++e)
            for (double& v : vol.echo(e)) v += noise(rng);
    }
    return {std::move(vol), std::move(truth)};
}

namespace {

PhantomStructure structure_from_json(const nlohmann::json& j) {
    PhantomStructure s;
    const auto shape = j.at("shape").get<std::string>();
    if (shape == "slab")
        s.shape = PhantomStructure::Shape::slab;
    else if (shape == "ellipsoid")
        s.shape = PhantomStructure::Shape::ellipsoid;
    else if (shape == "layered-shell")
        s.shape = PhantomStructure::Shape::layered_shell;
    else
        throw ValidationError("unknown phantom structure shape: " + shape);

    s.rho = j.at("rho").get<double>();
    if (s.shape == PhantomStructure::Shape::layered_shell) {
        s.t2_deep_ms = j.at("t2_deep_ms").get<double>();
        s.t2_superficial_ms = j.at("t2_superficial_ms").get<double>();
        s.thickness = j.value("thickness", 0.3);
    } else {
        s.t2_ms = j.at("t2_ms").get<double>();
    }
    auto read3 = [&](const char* key, std::array<double, 3>& out) {
        if (!j.contains(key)) return;
        const auto v = j.at(key).get<std::vector<double>>();
        if (v.size() != 3)
            throw ValidationError(std::string("phantom key '") + key +
                                  "' must hold 3 values");
        std::copy(v.begin(), v.end(), out.begin());
    };
    read3("box_lo", s.box_lo);
    read3("box_hi", s.box_hi);
    read3("center", s.center);
    read3("radii", s.radii);
    return s;
}

nlohmann::json structure_to_json(const PhantomStructure& s) {
    nlohmann::json j;
    j["rho"] = s.rho;
    switch (s.shape) {
        case PhantomStructure::Shape::slab:
            j["shape"] = "slab";
            j["t2_ms"] = s.t2_ms;
            j["box_lo"] = s.box_lo;
            j["box_hi"] = s.box_hi;
            break;
        case PhantomStructure::Shape::ellipsoid:
            j["shape"] = "ellipsoid";
            j["t2_ms"] = s.t2_ms;
            j["center"] = s.center;
            j["radii"] = s.radii;
            break;
        case PhantomStructure::Shape::layered_shell:
            j["shape"] = "layered-shell";
            j["t2_deep_ms"] = s.t2_deep_ms;
            j["t2_superficial_ms"] = s.t2_superficial_ms;
            j["thickness"] = s.thickness;
            j["center"] = s.center;
            j["radii"] = s.radii;
            break;
    }
    return j;
}

}  // namespace

namespace {

PhantomSpec spec_from_json(const nlohmann::json& j);

}  // namespace

PhantomSpec load_phantom_spec(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in)
        throw ValidationError("cannot open phantom spec: " + json_path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed phantom spec JSON: " + std::string(e.what()));
    }
    return spec_from_json(j);
}

PhantomSpec parse_phantom_spec(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed phantom spec JSON: " + std::string(e.what()));
    }
    return spec_from_json(j);
}

namespace {

PhantomSpec spec_from_json(const nlohmann::json& j) {
    PhantomSpec spec;
    try {
        if (j.contains("dims")) {
            const auto d = j.at("dims").get<std::vector<std::uint32_t>>();
            if (d.size() != 3)
                throw ValidationError("phantom dims must hold 3 values");
            spec.dims = {d[0], d[1], d[2]};
        }
        if (j.contains("spacing_mm")) {
            const auto sp = j.at("spacing_mm").get<std::vector<float>>();
            if (sp.size() != 3)
                throw ValidationError("phantom spacing_mm must hold 3 values");
            spec.spacing = {sp[0], sp[1], sp[2]};
        }
        spec.noise_sigma = j.value("noise_sigma", 0.0);
        spec.seed = j.value("seed", std::uint64_t(0));
        for (const auto& sj : j.at("structures"))
            spec.structures.push_back(structure_from_json(sj));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("phantom spec missing key: " + std::string(e.what()));
    }
    spec.validate();
    return spec;
}

}  // namespace

std::string phantom_spec_to_json(const PhantomSpec& spec) {
    spec.validate();
    nlohmann::json j;
    j["dims"] = {spec.dims.nx, spec.dims.ny, spec.dims.nz};
    j["spacing_mm"] = {spec.spacing.sx, spec.spacing.sy, spec.spacing.sz};
    j["noise_sigma"] = spec.noise_sigma;
    j["seed"] = spec.seed;
    j["structures"] = nlohmann::json::array();
    for (const auto& s : spec.structures)
        j["structures"].push_back(structure_to_json(s));
    return j.dump(2);
}

void save_phantom_spec(const PhantomSpec& spec,
                       const std::filesystem::path& json_path) {
    std::ofstream out(json_path);
    if (!out)
        throw ValidationError("cannot write phantom spec: " + json_path.string());
    out << phantom_spec_to_json(spec) << "\n";
}

}  // namespace mrsr
