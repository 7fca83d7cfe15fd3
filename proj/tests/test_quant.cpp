#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mrsr/quant.hpp"

using namespace mrsr;
using mrsr::testing::TempDir;

namespace {

MultiEchoVolume dual_volume(Dims dims, double s1, double s2) {
    MultiEchoVolume vol(dims, {1.0f, 1.0f, 1.0f}, 2);
    for (double& v : vol.echo(0)) v = s1;
    for (double& v : vol.echo(1)) v = s2;
    return vol;
}

}  // namespace

TEST_CASE("closed-form inversion: S1=1, S2=1/e at 7/39/23 ms gives 32 ms") {
    const MultiEchoVolume vol = dual_volume({4, 4, 4}, 1.0, std::exp(-1.0));
    const T2Map map = estimate_t2(vol, ScanParams{});
    for (std::size_t i = 0; i < map.voxels(); ++i) {
        REQUIRE(map.valid[i] == 1);
        CHECK(map.t2_ms[i] == doctest::Approx(32.0).epsilon(1e-12));
    }
}

TEST_CASE("equal echoes are masked invalid (infinite T2)") {
    const MultiEchoVolume vol = dual_volume({3, 3, 3}, 0.5, 0.5);
    const T2Map map = estimate_t2(vol, ScanParams{});
    for (std::size_t i = 0; i < map.voxels(); ++i) CHECK(map.valid[i] == 0);
}

TEST_CASE("synthesized decay at 35.2 ms round-trips within 1e-9 relative") {
    const ScanParams scan;
    const double tau = scan.tr_ms - scan.te1_ms;  // 16 ms
    const double t2 = 35.2;
    const MultiEchoVolume vol =
        dual_volume({5, 5, 5}, 0.8, 0.8 * std::exp(-2.0 * tau / t2));
    const T2Map map = estimate_t2(vol, scan);
    for (std::size_t i = 0; i < map.voxels(); ++i) {
        REQUIRE(map.valid[i] == 1);
        CHECK(std::abs(map.t2_ms[i] - t2) / t2 < 1e-9);
    }
}

TEST_CASE("estimation is exactly invariant under power-of-two echo rescaling") {
    const ScanParams scan;
    MultiEchoVolume vol = dual_volume({4, 4, 4}, 0.0, 0.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> dist(0.2, 1.0);
    for (std::size_t i = 0; i < vol.voxels_per_echo(); ++i) {
        const double s1 = dist(rng);
        vol.echo(0)[i] = s1;
        vol.echo(1)[i] = s1 * std::exp(-32.0 / (20.0 + 40.0 * dist(rng)));
    }
    const T2Map base = estimate_t2(vol, scan);

    MultiEchoVolume scaled = vol;
    for (double& v : scaled.data()) v *= 4.0;  // exact in binary floating point
    const T2Map same = estimate_t2(scaled, scan);
    CHECK(same.t2_ms == base.t2_ms);
    CHECK(same.valid == base.valid);

    // general positive scales hold to rounding
    MultiEchoVolume scaled2 = vol;
    for (double& v : scaled2.data()) v *= 3.7;
    const T2Map close = estimate_t2(scaled2, scan);
    for (std::size_t i = 0; i < base.voxels(); ++i)
        if (base.valid[i])
            CHECK(close.t2_ms[i] == doctest::Approx(base.t2_ms[i]).epsilon(1e-12));
}

TEST_CASE("T2 increases strictly with S2 at fixed S1") {
    const ScanParams scan;
    double prev = 0.0;
    for (double s2 : {0.2, 0.3, 0.4, 0.5, 0.6}) {
        const MultiEchoVolume vol = dual_volume({1, 1, 1}, 1.0, s2);
        const T2Map map = estimate_t2(vol, scan);
        REQUIRE(map.valid[0] == 1);
        CHECK(map.t2_ms[0] > prev);
        prev = map.t2_ms[0];
    }
}

TEST_CASE("masking: signal floor, range limits, and echo count") {
    const ScanParams scan;
    T2Options opts;

    // below the signal floor
    const T2Map air = estimate_t2(dual_volume({2, 2, 2}, 1e-9, 1e-10), scan, opts);
    for (std::size_t i = 0; i < air.voxels(); ++i) CHECK(air.valid[i] == 0);

    // T2 above the configured maximum: ratio close to 1 gives ~319 ms
    const T2Map hot =
        estimate_t2(dual_volume({2, 2, 2}, 1.0, std::exp(-0.1)), scan, opts);
    for (std::size_t i = 0; i < hot.voxels(); ++i) CHECK(hot.valid[i] == 0);

    MultiEchoVolume single({2, 2, 2}, {1.0f, 1.0f, 1.0f}, 1);
    CHECK_THROWS_AS(estimate_t2(single, scan), ValidationError);
}

TEST_CASE("no valid voxel ever holds a non-finite value") {
    const ScanParams scan;
    MultiEchoVolume vol = dual_volume({6, 6, 6}, 0.0, 0.0);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (double& v : vol.data()) v = dist(rng);
    const T2Map map = estimate_t2(vol, scan);
    for (std::size_t i = 0; i < map.voxels(); ++i)
        if (map.valid[i]) CHECK(std::isfinite(map.t2_ms[i]));
}

TEST_CASE("roi mean: uniform region") {
    const ScanParams scan;
    const double tau = scan.tr_ms - scan.te1_ms;
    const MultiEchoVolume vol =
        dual_volume({4, 4, 4}, 1.0, std::exp(-2.0 * tau / 40.0));
    const T2Map map = estimate_t2(vol, scan);
    RoiMask mask{map.dims, std::vector<std::uint8_t>(map.voxels(), 1)};
    CHECK(roi_mean_t2(map, mask) == doctest::Approx(40.0).epsilon(1e-9));
}

TEST_CASE("roi mean averages disjoint regions and skips masked voxels") {
    T2Map map;
    map.dims = {4, 1, 1};
    map.spacing = {1.0f, 1.0f, 1.0f};
    map.t2_ms = {30.0, 50.0, 35.0, 999.0};
    map.valid = {1, 1, 1, 0};

    RoiMask half{{4, 1, 1}, {1, 1, 0, 0}};
    CHECK(roi_mean_t2(map, half) == doctest::Approx(40.0));

    // masked voxel excluded from numerator and denominator
    RoiMask with_invalid{{4, 1, 1}, {0, 0, 1, 1}};
    CHECK(roi_mean_t2(map, with_invalid) == doctest::Approx(35.0));

    RoiMask only_invalid{{4, 1, 1}, {0, 0, 0, 1}};
    CHECK_THROWS_AS(roi_mean_t2(map, only_invalid), ValidationError);

    CHECK_THROWS_AS((RoiMask{{4, 1, 1}, {0, 0, 0, 0}}.validate()), ValidationError);
}

TEST_CASE("T2 maps round trip through MRSV plus companion mask") {
    TempDir dir("t2map_io");
    T2Map map;
    map.dims = {3, 2, 2};
    map.spacing = {0.4f, 0.4f, 0.7f};
    map.t2_ms.assign(map.voxels(), 0.0);
    map.valid.assign(map.voxels(), 0);
    for (std::size_t i = 0; i < map.voxels(); i += 2) {
        map.t2_ms[i] = 30.0 + double(i);
        map.valid[i] = 1;
    }
    save_t2_map(map, dir / "t2.mrsv");
    CHECK(std::filesystem::exists(dir / "t2.mask.mrsv"));
    const T2Map back = load_t2_map(dir / "t2.mrsv");
    CHECK(back.valid == map.valid);
    for (std::size_t i = 0; i < map.voxels(); ++i)
        if (map.valid[i])
            CHECK(back.t2_ms[i] == doctest::Approx(map.t2_ms[i]));
}
