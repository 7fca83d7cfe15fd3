#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "mrsr/tensor.hpp"

namespace mrsr {

enum class Activation { relu, none };

/// One 3x3x3 convolution with per-output-feature bias. Weights are laid
/// out [out][in][dz][dy][dx] and held in float32, the training and
/// container precision; all arithmetic runs in double.
struct ConvLayer3D {
    std::uint32_t in_features = 0;
    std::uint32_t out_features = 0;
    std::vector<float> weights;  // out * in * 27
    std::vector<float> bias;     // out
    Activation activation = Activation::relu;

    std::size_t weight_count() const {
        return std::size_t(in_features) * out_features * 27;
    }
};

/// Residual super-resolution stack: L unit-stride, same-padded 3x3x3
/// convolutions, ReLU between, linear final layer. The forward pass adds
/// the input back, so a zero final layer is the identity map.
struct Network {
    std::vector<ConvLayer3D> layers;
    // Set when the net was widened from a single-channel checkpoint;
    // recorded in the weight manifest.
    std::optional<double> surgery_scale;

    std::uint32_t in_channels() const { return layers.front().in_features; }
    std::uint32_t out_channels() const { return layers.back().out_features; }
    std::size_t parameter_count() const;
    void validate() const;
};

/// Per-parameter partials, congruent with the owning network.
struct Gradients {
    struct Layer {
        std::vector<double> weights;
        std::vector<double> bias;
    };
    std::vector<Layer> layers;

    static Gradients zeros_like(const Network& net);
    void accumulate(const Gradients& other);
    void scale(double s);
};

/// Deterministic He-style initialization: variance 2/fan_in normals for
/// every layer but the last, zero final layer and zero biases, so the
/// fresh network computes the identity.
Network init_network(std::uint32_t in_ch, std::uint32_t out_ch,
                     std::uint32_t layers = 20, std::uint32_t features = 64,
                     std::uint64_t seed = 0);

/// Residual forward pass: input + conv stack, reflect-padded so spatial
/// dims are preserved. Requires matching channel counts.
Tensor forward(const Network& net, const Tensor& input);

/// Mean squared error over voxels and channels, with exact reverse-mode
/// gradients for every weight and bias.
std::pair<double, Gradients> loss_and_gradients(const Network& net,
                                                const Tensor& input,
                                                const Tensor& target);

/// Widen a single-channel network to dual-channel: first-layer kernels
/// duplicated across the new input channel at half weight, final-layer
/// kernels and bias duplicated across the new output channel, interior
/// layers copied verbatim. On duplicated input both output channels
/// reproduce the original network's output.
Network surgery_expand(const Network& single);

void save_weights(const Network& net, const std::filesystem::path& path);
Network load_weights(const std::filesystem::path& path);

}  // namespace mrsr
