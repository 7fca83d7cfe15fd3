#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mrsr/net.hpp"
#include "mrsr/patch.hpp"

namespace mrsr {

struct TrainConfig {
    double lr = 1e-4;
    int batch = 50;
    int epochs = 10;
    std::uint64_t seed = 0;
    bool shuffle = true;
    int threads = 1;

    void validate() const;
};

struct TrainHistory {
    std::vector<double> step_loss;   // pre-update loss of each mini-batch
    std::vector<int> step_epoch;     // owning epoch of each step, 0-based
    std::vector<double> epoch_loss;  // mean of step losses per epoch
};

/// Bias-corrected adaptive-moment update. Moments live in double; the
/// parameters themselves stay in float32 like the weight container.
struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

void adam_step(std::span<float> params, std::span<const double> grads,
               std::span<double> m, std::span<double> v, double lr,
               long t, const AdamConfig& cfg = {});

/// Per-network optimizer state, congruent with the network parameters.
struct AdamState {
    struct Layer {
        std::vector<double> m_w, v_w, m_b, v_b;
    };
    std::vector<Layer> layers;
    long t = 0;

    static AdamState zeros_like(const Network& net);
};

void adam_update(Network& net, const Gradients& grads, AdamState& state,
                 double lr, const AdamConfig& cfg = {});

/// Mini-batch training against the mean-squared-error objective. The
/// patch sets must share one grid: lr blocks are the network inputs, hr
/// blocks the targets. Deterministic for a fixed seed in sequential mode.
std::pair<Network, TrainHistory> train(Network net, const PatchSet& lr_patches,
                                       const PatchSet& hr_patches,
                                       const TrainConfig& cfg);

void save_history_csv(const TrainHistory& history,
                      const std::filesystem::path& path);

}  // namespace mrsr
