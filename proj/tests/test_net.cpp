#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "mrsr/net.hpp"

using namespace mrsr;
using mrsr::testing::TempDir;

namespace {

Tensor random_tensor(std::uint32_t c, std::uint32_t n, std::uint64_t seed,
                     double lo = 0.0, double hi = 1.0) {
    Tensor t(c, n, n, n);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.data) v = dist(rng);
    return t;
}

// Gives every layer (including the final one) non-trivial weights so
// gradients flow; init_network's zero final layer would silence them.
void randomize_all(Network& net, std::uint64_t seed, double w_sigma = 0.3,
                   double b_sigma = 0.1) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> wd(0.0, w_sigma), bd(0.0, b_sigma);
    for (auto& l : net.layers) {
        for (float& w : l.weights) w = float(wd(rng));
        for (float& b : l.bias) b = float(bd(rng));
    }
}

}  // namespace

TEST_CASE("init is deterministic for a fixed seed") {
    const Network a = init_network(2, 2, 5, 8, 42);
    const Network b = init_network(2, 2, 5, 8, 42);
    REQUIRE(a.layers.size() == b.layers.size());
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        CHECK(a.layers[i].weights == b.layers[i].weights);
        CHECK(a.layers[i].bias == b.layers[i].bias);
    }
    const Network c = init_network(2, 2, 5, 8, 43);
    CHECK(a.layers[0].weights != c.layers[0].weights);
}

TEST_CASE("reference architecture has 1,998,786 parameters") {
    const Network net = init_network(2, 2, 20, 64, 0);
    // 2*64*27 + 18*(64*64*27) + 64*2*27 + biases 19*64 + 2
    CHECK(net.parameter_count() == 1998786);
}

TEST_CASE("zero final layer makes the network the identity") {
    const Network net = init_network(2, 2, 4, 6, 7);
    const Tensor x = random_tensor(2, 6, 11);
    const Tensor y = forward(net, x);
    CHECK(y.data == x.data);  // bitwise
}

TEST_CASE("zero input with zero biases stays zero") {
    const Network net = init_network(2, 2, 4, 6, 7);
    Tensor x(2, 5, 5, 5);
    const Tensor y = forward(net, x);
    for (double v : y.data) CHECK(v == 0.0);
}

TEST_CASE("forward preserves spatial dims") {
    const Network net = init_network(1, 1, 3, 4, 1);
    Tensor x(1, 3, 7, 5);
    const Tensor y = forward(net, x);
    CHECK(y.nz == 3);
    CHECK(y.ny == 7);
    CHECK(y.nx == 5);
    CHECK(y.channels == 1);
}

TEST_CASE("forward rejects channel mismatches") {
    const Network net = init_network(2, 2, 3, 4, 1);
    Tensor x(1, 4, 4, 4);
    CHECK_THROWS_AS(forward(net, x), ValidationError);
}

TEST_CASE("1x1x1 input matches the hand-computed reflected convolution") {
    // with a single voxel every reflected neighbor is that voxel, so a
    // 3x3x3 conv reduces to bias + value * sum(taps)
    Network net = init_network(1, 1, 2, 3, 5);
    randomize_all(net, 99);
    Tensor x(1, 1, 1, 1);
    x.data[0] = 0.37;

    double acts[3];
    for (std::uint32_t f = 0; f < 3; ++f) {
        double wsum = 0.0;
        for (int t = 0; t < 27; ++t) wsum += net.layers[0].weights[f * 27 + t];
        acts[f] = std::max(0.0, net.layers[0].bias[f] + 0.37 * wsum);
    }
    double out = net.layers[1].bias[0];
    for (std::uint32_t f = 0; f < 3; ++f) {
        double wsum = 0.0;
        for (int t = 0; t < 27; ++t) wsum += net.layers[1].weights[f * 27 + t];
        out += acts[f] * wsum;
    }
    const double expected = 0.37 + out;  // residual sum

    const Tensor y = forward(net, x);
    CHECK(y.data[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("loss is zero with zero gradients at the exact target") {
    Network net = init_network(2, 2, 3, 4, 3);
    randomize_all(net, 17);
    const Tensor x = random_tensor(2, 4, 4);
    const Tensor y = forward(net, x);
    auto [loss, grads] = loss_and_gradients(net, x, y);
    CHECK(loss == doctest::Approx(0.0).epsilon(1e-12));
    for (const auto& l : grads.layers) {
        for (double g : l.weights) CHECK(std::abs(g) < 1e-12);
        for (double g : l.bias) CHECK(std::abs(g) < 1e-12);
    }
}

TEST_CASE("doubling the output error quadruples the loss") {
    Network net = init_network(1, 1, 2, 3, 9);
    randomize_all(net, 21);
    const Tensor x = random_tensor(1, 5, 31);
    const Tensor t = random_tensor(1, 5, 32);
    const Tensor y = forward(net, x);
    Tensor t2 = t;  // t2 = 2t - y doubles (y - t) everywhere
    for (std::size_t i = 0; i < t2.data.size(); ++i)
        t2.data[i] = 2.0 * t.data[i] - y.data[i];
    const double l1 = loss_and_gradients(net, x, t).first;
    const double l2 = loss_and_gradients(net, x, t2).first;
    CHECK(l2 == doctest::Approx(4.0 * l1).epsilon(1e-9));
}

TEST_CASE("analytic gradients match central finite differences") {
    // 2-layer, 3-feature, 8^3 toy instance, every parameter; eps = 1e-3.
    // Holding the ReLU pattern fixed the loss is exactly quadratic in any
    // single parameter, so the central difference is exact up to rounding
    // as long as no pre-activation sits within the probe's reach of zero.
    // Features 0 and 2 stay active (positive weights, positive bias) and
    // feature 1 stays inactive, both with margin far above the 1e-3 probe.
    Network net = init_network(2, 2, 2, 3, 0);
    {
        std::mt19937_64 rng(1234);
        std::uniform_real_distribution<double> wpos(0.02, 0.06);
        std::normal_distribution<double> wfree(0.0, 0.3);
        auto& l0 = net.layers[0];
        for (std::uint32_t f = 0; f < 3; ++f) {
            const double sign = (f == 1) ? -1.0 : 1.0;
            for (int t = 0; t < 54; ++t)
                l0.weights[f * 54 + t] = float(sign * wpos(rng));
            l0.bias[f] = float(sign * 0.2);
        }
        auto& l1 = net.layers[1];
        for (float& w : l1.weights) w = float(wfree(rng));
        for (float& b : l1.bias) b = float(wfree(rng) * 0.1);
    }
    const Tensor x = random_tensor(2, 8, 55, 0.1, 0.9);
    const Tensor t = random_tensor(2, 8, 56, 0.1, 0.9);

    auto [loss0, grads] = loss_and_gradients(net, x, t);
    REQUIRE(std::isfinite(loss0));

    const double eps = 1e-3;
    double max_rel = 0.0;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        auto check_param = [&](float& slot, double analytic) {
            const float orig = slot;
            slot = float(double(orig) + eps);
            const double lp = loss_and_gradients(net, x, t).first;
            const double theta_p = double(slot);
            slot = float(double(orig) - eps);
            const double lm = loss_and_gradients(net, x, t).first;
            const double theta_m = double(slot);
            slot = orig;
            const double fd = (lp - lm) / (theta_p - theta_m);
            const double rel =
                std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-8});
            max_rel = std::max(max_rel, rel);
        };
        for (std::size_t wi = 0; wi < net.layers[li].weights.size(); ++wi)
            check_param(net.layers[li].weights[wi], grads.layers[li].weights[wi]);
        for (std::size_t bi = 0; bi < net.layers[li].bias.size(); ++bi)
            check_param(net.layers[li].bias[bi], grads.layers[li].bias[bi]);
    }
    CHECK(max_rel < 1e-4);
}

TEST_CASE("relu zeroes gradients of inactive units") {
    // single voxel, one feature forced negative: its incoming weights get
    // no gradient
    Network net = init_network(1, 1, 2, 1, 0);
    for (float& w : net.layers[0].weights) w = 0.1f;
    net.layers[0].bias[0] = -100.0f;  // relu clamps to zero everywhere
    for (float& w : net.layers[1].weights) w = 0.2f;

    Tensor x(1, 1, 1, 1);
    x.data[0] = 0.5;
    Tensor t(1, 1, 1, 1);
    t.data[0] = 0.9;
    auto [loss, grads] = loss_and_gradients(net, x, t);
    CHECK(loss > 0.0);
    for (double g : grads.layers[0].weights) CHECK(g == 0.0);
    CHECK(grads.layers[0].bias[0] == 0.0);
    // the final layer still sees gradient through its bias
    CHECK(grads.layers[1].bias[0] != 0.0);
}

TEST_CASE("surgery: both output channels reproduce the single-channel net") {
    for (std::uint64_t seed : {1, 2, 3}) {
        Network net1 = init_network(1, 1, 4, 6, seed);
        randomize_all(net1, seed + 100, 0.2, 0.05);
        const Network net2 = surgery_expand(net1);
        CHECK(net2.in_channels() == 2);
        CHECK(net2.out_channels() == 2);
        CHECK(net2.surgery_scale == 0.5);

        const Tensor x = random_tensor(1, 6, seed + 7);
        const Tensor y1 = forward(net1, x);

        Tensor x2(2, x.nz, x.ny, x.nx);
        std::copy(x.data.begin(), x.data.end(), x2.data.begin());
        std::copy(x.data.begin(), x.data.end(), x2.data.begin() + x.data.size());
        const Tensor y2 = forward(net2, x2);

        for (std::size_t i = 0; i < y1.data.size(); ++i) {
            CHECK(std::abs(y2.data[i] - y1.data[i]) < 1e-6);
            CHECK(std::abs(y2.data[i + y1.data.size()] - y1.data[i]) < 1e-6);
        }
    }
}

TEST_CASE("surgery grows the parameter count by 64*27 + 64*27 + 1") {
    const Network net1 = init_network(1, 1, 20, 64, 8);
    const Network net2 = surgery_expand(net1);
    CHECK(net2.parameter_count() == net1.parameter_count() + 64 * 27 + 64 * 27 + 1);
}

TEST_CASE("surgery of a zero network stays zero") {
    Network net1 = init_network(1, 1, 3, 4, 0);
    for (auto& l : net1.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0f);
        std::fill(l.bias.begin(), l.bias.end(), 0.0f);
    }
    const Network net2 = surgery_expand(net1);
    for (const auto& l : net2.layers) {
        for (float w : l.weights) CHECK(w == 0.0f);
        for (float b : l.bias) CHECK(b == 0.0f);
    }
}

TEST_CASE("surgery rejects multi-channel networks") {
    const Network net = init_network(2, 2, 3, 4, 0);
    CHECK_THROWS_AS(surgery_expand(net), ValidationError);
}

TEST_CASE("weights round trip bit-exactly") {
    TempDir dir("weights_rt");
    Network net = init_network(2, 2, 5, 8, 42);
    randomize_all(net, 42);
    save_weights(net, dir / "w.mrw");
    const Network back = load_weights(dir / "w.mrw");
    REQUIRE(back.layers.size() == net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        CHECK(back.layers[i].weights == net.layers[i].weights);
        CHECK(back.layers[i].bias == net.layers[i].bias);
        CHECK(back.layers[i].activation == net.layers[i].activation);
    }
}

TEST_CASE("payload shorter than the manifest declares is an error") {
    TempDir dir("weights_trunc");
    const Network net = init_network(1, 1, 4, 4, 3);
    save_weights(net, dir / "w.mrw");
    // drop the final layer's parameter bytes
    const auto full = std::filesystem::file_size(dir / "w.mrw");
    const std::size_t last_bytes =
        (net.layers.back().weights.size() + net.layers.back().bias.size()) * 4;
    std::filesystem::resize_file(dir / "w.mrw", full - last_bytes);
    CHECK_THROWS_AS(load_weights(dir / "w.mrw"), ValidationError);
}

TEST_CASE("transfer workflow: load single-channel checkpoint, expand, run") {
    TempDir dir("weights_transfer");
    Network net1 = init_network(1, 1, 4, 6, 11);
    randomize_all(net1, 77, 0.1, 0.02);
    save_weights(net1, dir / "single.mrw");

    const Network loaded = load_weights(dir / "single.mrw");
    const Network net2 = surgery_expand(loaded);
    save_weights(net2, dir / "dual.mrw");
    const Network dual = load_weights(dir / "dual.mrw");
    CHECK(dual.in_channels() == 2);
    CHECK(dual.out_channels() == 2);
    CHECK(dual.surgery_scale == 0.5);

    const Tensor x = random_tensor(2, 5, 13);
    CHECK_NOTHROW(forward(dual, x));
}
