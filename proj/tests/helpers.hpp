#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "mrsr/volume.hpp"

namespace mrsr::testing {

inline MultiEchoVolume make_volume(Dims dims, std::uint32_t echoes,
                                   Spacing spacing = {1.0f, 1.0f, 1.0f}) {
    return MultiEchoVolume(dims, spacing, echoes);
}

// Pseudo-random volume with float32-representable samples, so container
// round trips stay bit-exact.
inline MultiEchoVolume random_volume(Dims dims, std::uint32_t echoes,
                                     std::uint64_t seed,
                                     Spacing spacing = {1.0f, 1.0f, 1.0f}) {
    MultiEchoVolume vol(dims, spacing, echoes);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    for (double& v : vol.data()) v = double(dist(rng));
    return vol;
}

// Unique scratch directory per test binary run.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("mrsr_test_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const {
        return path_ / name;
    }

private:
    std::filesystem::path path_;
};

}  // namespace mrsr::testing
