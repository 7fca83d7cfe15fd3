#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mrsr/phantom.hpp"
#include "mrsr/resample.hpp"

using namespace mrsr;
using mrsr::testing::TempDir;

TEST_CASE("noiseless slab at 35.2 ms recovers exactly through estimate_t2") {
    PhantomSpec spec;
    spec.dims = {24, 24, 24};
    PhantomStructure slab;
    slab.shape = PhantomStructure::Shape::slab;
    slab.rho = 0.7;
    slab.t2_ms = 35.2;
    slab.box_lo = {0.1, 0.1, 0.1};
    slab.box_hi = {0.9, 0.9, 0.9};
    spec.structures = {slab};

    const ScanParams scan;
    auto [vol, truth] = generate_phantom(spec, scan);
    const T2Map est = estimate_t2(vol, scan);
    std::size_t checked = 0;
    for (std::size_t i = 0; i < truth.voxels(); ++i) {
        if (!truth.valid[i]) {
            CHECK(est.valid[i] == 0);  // background stays invalid
            continue;
        }
        REQUIRE(est.valid[i] == 1);
        CHECK(std::abs(est.t2_ms[i] - 35.2) / 35.2 < 1e-9);
        ++checked;
    }
    CHECK(checked > 1000);
}

TEST_CASE("noiseless phantoms satisfy S2 <= S1 everywhere") {
    const ScanParams scan;
    auto [vol, truth] = generate_phantom(default_phantom_spec(), scan);
    const auto s1 = vol.echo(0);
    const auto s2 = vol.echo(1);
    for (std::size_t i = 0; i < s1.size(); ++i) CHECK(s2[i] <= s1[i]);
}

TEST_CASE("generation is deterministic for a fixed seed, including noise") {
    PhantomSpec spec = default_phantom_spec();
    spec.noise_sigma = 0.01;
    spec.seed = 123;
    const ScanParams scan;
    auto [v1, t1] = generate_phantom(spec, scan);
    auto [v2, t2] = generate_phantom(spec, scan);
    CHECK(v1 == v2);
    CHECK(t1.t2_ms == t2.t2_ms);

    spec.seed = 124;
    auto [v3, t3] = generate_phantom(spec, scan);
    CHECK(v1.data() != v3.data());
}

TEST_CASE("layered shell assigns deep and superficial T2 values") {
    const ScanParams scan;
    auto [vol, truth] = generate_phantom(default_phantom_spec(), scan);
    std::size_t deep = 0, superficial = 0;
    for (std::size_t i = 0; i < truth.voxels(); ++i) {
        if (!truth.valid[i]) continue;
        if (truth.t2_ms[i] == 25.0) ++deep;
        if (truth.t2_ms[i] == 45.0) ++superficial;
    }
    CHECK(deep > 200);
    CHECK(superficial > 200);
}

TEST_CASE("degrade + tricubic inflates the deep-layer T2 (blur mechanism)") {
    const ScanParams scan;
    auto [vol, truth] = generate_phantom(default_phantom_spec(), scan);

    const MultiEchoVolume blurred =
        tricubic_upsample(degrade_slices(vol, 2), 2);
    const T2Map est = estimate_t2(blurred, scan);

    RoiMask deep;
    deep.dims = truth.dims;
    deep.include.assign(truth.voxels(), 0);
    for (std::size_t i = 0; i < truth.voxels(); ++i)
        if (truth.valid[i] && truth.t2_ms[i] == 25.0) deep.include[i] = 1;

    const double biased = roi_mean_t2(est, deep);
    CHECK(biased > 25.0);
}

TEST_CASE("overlapping structures resolve last-writer-wins") {
    PhantomSpec spec;
    spec.dims = {16, 16, 16};
    PhantomStructure a;
    a.shape = PhantomStructure::Shape::slab;
    a.rho = 0.5;
    a.t2_ms = 30.0;
    a.box_lo = {0.0, 0.0, 0.0};
    a.box_hi = {1.0, 1.0, 1.0};
    PhantomStructure b = a;
    b.rho = 0.9;
    b.t2_ms = 50.0;
    b.box_lo = {0.5, 0.0, 0.0};
    spec.structures = {a, b};

    const ScanParams scan;
    auto [vol, truth] = generate_phantom(spec, scan);
    CHECK(truth.t2_ms[vol.index(0, 8, 8, 2) ] == 30.0);
    CHECK(truth.t2_ms[vol.index(0, 8, 8, 12)] == 50.0);
    CHECK(vol.at(0, 8, 8, 12) == 0.9);
}

TEST_CASE("phantom spec JSON round trips") {
    TempDir dir("phantom_spec");
    PhantomSpec spec = default_phantom_spec();
    spec.noise_sigma = 0.005;
    spec.seed = 42;
    save_phantom_spec(spec, dir / "spec.json");
    const PhantomSpec back = load_phantom_spec(dir / "spec.json");
    CHECK(back.dims == spec.dims);
    CHECK(back.noise_sigma == spec.noise_sigma);
    CHECK(back.seed == spec.seed);
    REQUIRE(back.structures.size() == spec.structures.size());
    CHECK(back.structures[1].t2_deep_ms == spec.structures[1].t2_deep_ms);

    const ScanParams scan;
    auto [v1, t1] = generate_phantom(spec, scan);
    auto [v2, t2] = generate_phantom(back, scan);
    CHECK(v1 == v2);
}

TEST_CASE("phantom spec validation") {
    PhantomSpec empty;
    empty.structures.clear();
    CHECK_THROWS_AS(empty.validate(), ValidationError);

    PhantomSpec bad = default_phantom_spec();
    bad.structures[0].t2_ms = 150.0;  // outside (0, 100]
    CHECK_THROWS_AS(bad.validate(), ValidationError);

    PhantomSpec rho = default_phantom_spec();
    rho.structures[0].rho = 1.5;
    CHECK_THROWS_AS(rho.validate(), ValidationError);
}
