#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "helpers.hpp"
#include "mrsr/resample.hpp"

using namespace mrsr;
using mrsr::testing::random_volume;

namespace {

// Oracle: direct DTFT of the taps, center-aligned. For a symmetric
// filter this is the real per-frequency gain of the zero-phase pass.
double dtft_gain(const FilterTaps& f, double freq) {
    const int mid = int(f.taps.size()) / 2;
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t k = 0; k < f.taps.size(); ++k)
        acc += f.taps[k] *
               std::exp(std::complex<double>(
                   0.0, -2.0 * std::numbers::pi * freq * (double(k) - mid)));
    return acc.real();
}

MultiEchoVolume cosine_volume(std::uint32_t nz, double freq, std::uint32_t nx = 3,
                              std::uint32_t ny = 2) {
    MultiEchoVolume vol({nx, ny, nz}, {1.0f, 1.0f, 1.0f}, 1);
    for (std::uint32_t z = 0; z < nz; ++z) {
        const double v = std::cos(2.0 * std::numbers::pi * freq * z);
        for (std::uint32_t y = 0; y < ny; ++y)
            for (std::uint32_t x = 0; x < nx; ++x) vol.at(0, z, y, x) = v;
    }
    return vol;
}

MultiEchoVolume take_echo(const MultiEchoVolume& vol, std::uint32_t e) {
    MultiEchoVolume out(vol.dims(), vol.spacing(), 1);
    const auto src = vol.echo(e);
    std::copy(src.begin(), src.end(), out.echo(0).begin());
    return out;
}

}  // namespace

TEST_CASE("windowed-sinc design: 49 symmetric taps with unit DC gain") {
    const FilterTaps f = design_lowpass(48, 0.25);
    REQUIRE(f.taps.size() == 49);
    for (std::size_t i = 0; i < 24; ++i)
        CHECK(f.taps[i] == f.taps[48 - i]);  // bitwise
    double sum = 0.0;
    for (double t : f.taps) sum += t;
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    CHECK(std::abs(dtft_gain(f, 0.0) - 1.0) <= 1e-9);
}

TEST_CASE("stop-band attenuation at 0.45 cycles/sample matches the DTFT oracle") {
    const FilterTaps f = design_lowpass(48, 0.25);
    const double gain = dtft_gain(f, 0.45);
    // reference attenuation of the shipped design, frozen from the oracle
    CHECK(std::abs(gain) == doctest::Approx(3.1356359299005061e-04).epsilon(1e-9));
    CHECK(std::abs(gain) < 1e-3);
}

TEST_CASE("design rejects odd orders and out-of-range cutoffs") {
    CHECK_THROWS_AS(design_lowpass(47, 0.25), ValidationError);
    CHECK_THROWS_AS(design_lowpass(48, 0.0), ValidationError);
    CHECK_THROWS_AS(design_lowpass(48, 0.5), ValidationError);
}

TEST_CASE("degrade preserves constants (unit DC gain)") {
    MultiEchoVolume vol({4, 4, 32}, {1.0f, 1.0f, 1.0f}, 1,
                        std::vector<double>(4 * 4 * 32, 0.7));
    const MultiEchoVolume out = degrade_slices(vol, 2);
    for (double v : out.data()) CHECK(v == doctest::Approx(0.7).epsilon(1e-9));
}

TEST_CASE("degrade halves nz and doubles slice spacing") {
    const MultiEchoVolume vol = random_volume({4, 4, 160}, 2, 5, {0.4f, 0.4f, 0.7f});
    const MultiEchoVolume out = degrade_slices(vol, 2);
    CHECK(out.dims().nz == 80);
    CHECK(out.dims().nx == 4);
    CHECK(out.spacing().sz == doctest::Approx(1.4f));
    CHECK(out.echoes() == 2);
}

TEST_CASE("degrade of a single tone matches the filter's DTFT response") {
    const double freq = 0.4;
    const MultiEchoVolume vol = cosine_volume(160, freq);
    const FilterTaps f = design_lowpass(48, 0.25);
    const double gain = dtft_gain(f, freq);
    const MultiEchoVolume out = degrade_slices(vol, 2);
    // interior samples: the 49-tap window never touches the padding
    for (std::uint32_t m = 13; m <= 67; ++m) {
        const double expected =
            gain * std::cos(2.0 * std::numbers::pi * freq * (2.0 * m));
        CHECK(out.at(0, m, 0, 0) == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("degrade commutes with echo selection") {
    const MultiEchoVolume vol = random_volume({5, 4, 48}, 2, 17);
    const MultiEchoVolume both = degrade_slices(vol, 2);
    for (std::uint32_t e = 0; e < 2; ++e) {
        const MultiEchoVolume single = degrade_slices(take_echo(vol, e), 2);
        const auto got = both.echo(e);
        const auto want = single.echo(0);
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);
    }
}

TEST_CASE("degrade never amplifies beyond the filter's L1 norm") {
    const FilterTaps f = design_lowpass(48, 0.25);
    double l1 = 0.0;
    for (double t : f.taps) l1 += std::abs(t);
    for (std::uint64_t seed : {1, 2, 3}) {
        const MultiEchoVolume vol = random_volume({3, 3, 40}, 1, seed);
        double in_max = 0.0;
        for (double v : vol.data()) in_max = std::max(in_max, std::abs(v));
        const MultiEchoVolume out = degrade_slices(vol, 2);
        for (double v : out.data()) CHECK(std::abs(v) <= l1 * in_max + 1e-12);
    }
}

TEST_CASE("tricubic factor 1 is the identity") {
    const MultiEchoVolume vol = random_volume({4, 4, 8}, 2, 9);
    CHECK(tricubic_upsample(vol, 1) == vol);
}

TEST_CASE("tricubic reproduces a linear ramp exactly away from boundaries") {
    const std::uint32_t nz = 16;
    MultiEchoVolume vol({2, 2, nz}, {1.0f, 1.0f, 1.0f}, 1);
    for (std::uint32_t z = 0; z < nz; ++z)
        for (std::uint32_t y = 0; y < 2; ++y)
            for (std::uint32_t x = 0; x < 2; ++x)
                vol.at(0, z, y, x) = 0.25 + 0.5 * z;
    const MultiEchoVolume out = tricubic_upsample(vol, 2);
    REQUIRE(out.dims().nz == 2 * nz);
    for (std::uint32_t j = 2; j <= 2 * (nz - 2); ++j) {
        const double expected = 0.25 + 0.5 * (j / 2.0);
        CHECK(out.at(0, j, 0, 0) == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("tricubic passes through original samples bitwise") {
    const MultiEchoVolume vol = random_volume({3, 3, 10}, 2, 33);
    const MultiEchoVolume out = tricubic_upsample(vol, 3);
    for (std::uint32_t e = 0; e < 2; ++e)
        for (std::uint32_t z = 0; z < 10; ++z)
            for (std::uint32_t y = 0; y < 3; ++y)
                for (std::uint32_t x = 0; x < 3; ++x)
                    CHECK(out.at(e, 3 * z, y, x) == vol.at(e, z, y, x));
}

TEST_CASE("tricubic reproduces constants everywhere") {
    MultiEchoVolume vol({2, 2, 8}, {1.0f, 1.0f, 1.0f}, 1,
                        std::vector<double>(2 * 2 * 8, 0.42));
    const MultiEchoVolume out = tricubic_upsample(vol, 2);
    for (double v : out.data()) CHECK(v == doctest::Approx(0.42).epsilon(1e-9));
}

TEST_CASE("tricubic requires nz >= 4") {
    const MultiEchoVolume vol = random_volume({4, 4, 3}, 1, 1);
    CHECK_THROWS_AS(tricubic_upsample(vol, 2), ValidationError);
}

TEST_CASE("fourier factor 1 is the identity") {
    const MultiEchoVolume vol = random_volume({3, 3, 12}, 1, 2);
    const MultiEchoVolume out = fourier_upsample(vol, 1);
    for (std::size_t i = 0; i < vol.size(); ++i)
        CHECK(out.data()[i] == doctest::Approx(vol.data()[i]).epsilon(1e-9));
}

TEST_CASE("fourier recovers a band-limited cosine exactly") {
    const std::uint32_t nz = 16;
    const MultiEchoVolume vol = cosine_volume(nz, 2.0 / nz);
    const MultiEchoVolume out = fourier_upsample(vol, 2);
    REQUIRE(out.dims().nz == 32);
    for (std::uint32_t j = 0; j < 32; ++j) {
        const double expected = std::cos(2.0 * std::numbers::pi * 2.0 * j / 32.0);
        CHECK(out.at(0, j, 0, 0) == doctest::Approx(expected).epsilon(1e-6));
        CHECK(std::abs(out.at(0, j, 0, 0) - expected) < 1e-6);
    }
}

TEST_CASE("fourier maps constants to constants") {
    MultiEchoVolume vol({2, 2, 10}, {1.0f, 1.0f, 1.0f}, 1,
                        std::vector<double>(2 * 2 * 10, 0.3));
    const MultiEchoVolume out = fourier_upsample(vol, 2);
    for (double v : out.data()) CHECK(v == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("fourier passes through original samples for arbitrary inputs") {
    for (std::uint32_t nz : {15u, 16u, 80u}) {  // odd, even, mixed-radix
        const MultiEchoVolume vol = random_volume({3, 2, nz}, 2, nz);
        const MultiEchoVolume out = fourier_upsample(vol, 2);
        for (std::uint32_t e = 0; e < 2; ++e)
            for (std::uint32_t z = 0; z < nz; ++z)
                CHECK(out.at(e, 2 * z, 1, 1) ==
                      doctest::Approx(vol.at(e, z, 1, 1)).epsilon(1e-6));
    }
}

TEST_CASE("fourier halves voxel spacing along z") {
    const MultiEchoVolume vol = random_volume({2, 2, 8}, 1, 4, {0.4f, 0.4f, 1.4f});
    const MultiEchoVolume out = fourier_upsample(vol, 2);
    CHECK(out.spacing().sz == doctest::Approx(0.7f));
    CHECK(out.dims().nz == 16);
}
