#include "mrsr/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <thread>

namespace mrsr {

void TrainConfig::validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr))
        throw ValidationError("learning rate must be finite and >= 0");
    if (batch < 1) throw ValidationError("batch size must be >= 1");
    if (epochs < 1) throw ValidationError("epoch count must be >= 1");
    if (threads < 1) throw ValidationError("thread count must be >= 1");
}

void adam_step(std::span<float> params, std::span<const double> grads,
               std::span<double> m, std::span<double> v, double lr,
               long t, const AdamConfig& cfg) {
    if (params.size() != grads.size() || params.size() != m.size() ||
        params.size() != v.size())
        throw ValidationError("adam_step requires congruent parameter spans");
    if (t < 1) throw ValidationError("adam_step timestep must be >= 1");

    const double bc1 = 1.0 - std::pow(cfg.beta1, double(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        params[i] = float(double(params[i]) - lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
}

AdamState AdamState::zeros_like(const Network& net) {
    AdamState s;
    s.layers.resize(net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        s.layers[i].m_w.assign(net.layers[i].weights.size(), 0.0);
        s.layers[i].v_w.assign(net.layers[i].weights.size(), 0.0);
        s.layers[i].m_b.assign(net.layers[i].bias.size(), 0.0);
        s.layers[i].v_b.assign(net.layers[i].bias.size(), 0.0);
    }
    return s;
}

void adam_update(Network& net, const Gradients& grads, AdamState& state,
                 double lr, const AdamConfig& cfg) {
    if (grads.layers.size() != net.layers.size() ||
        state.layers.size() != net.layers.size())
        throw ValidationError("adam_update requires congruent shapes");
    state.t += 1;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto& l = net.layers[i];
        auto& s = state.layers[i];
        adam_step(l.weights, grads.layers[i].weights, s.m_w, s.v_w, lr, state.t, cfg);
        adam_step(l.bias, grads.layers[i].bias, s.m_b, s.v_b, lr, state.t, cfg);
    }
}

namespace {

// Mean loss and mean gradients over one mini-batch. Worker threads own
// contiguous index ranges and private accumulators; the final reduction
// runs in fixed thread order, so a given thread count always reproduces.
std::pair<double, Gradients> batch_loss_and_gradients(
    const Network& net, const PatchSet& lr_patches, const PatchSet& hr_patches,
    std::span<const std::size_t> batch, int threads) {
    const int nthreads = std::max(1, std::min<int>(threads, int(batch.size())));

    const auto parts = std::size_t(nthreads);
    std::vector<Gradients> grad_parts(parts);
    std::vector<double> loss_parts(parts, 0.0);
    std::vector<std::string> errors(parts);

    auto work = [&](int tid) {
        try {
            Gradients acc = Gradients::zeros_like(net);
            double loss = 0.0;
            const std::size_t lo = batch.size() * std::size_t(tid) / std::size_t(nthreads);
            const std::size_t hi =
                batch.size() * std::size_t(tid + 1) / std::size_t(nthreads);
            for (std::size_t i = lo; i < hi; ++i) {
                auto [l, g] = loss_and_gradients(net, lr_patches.blocks[batch[i]],
                                                 hr_patches.blocks[batch[i]]);
                loss += l;
                acc.accumulate(g);
            }
            loss_parts[std::size_t(tid)] = loss;
            grad_parts[std::size_t(tid)] = std::move(acc);
        } catch (const std::exception& e) {
            errors[std::size_t(tid)] = e.what();
        }
    };

    if (nthreads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(std::size_t(nthreads));
        for (int tid = 0; tid < nthreads; ++tid) pool.emplace_back(work, tid);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (!e.empty()) throw ComputeError(e);

    Gradients total = std::move(grad_parts[0]);
    double loss = loss_parts[0];
    for (int tid = 1; tid < nthreads; ++tid) {
        total.accumulate(grad_parts[std::size_t(tid)]);
        loss += loss_parts[std::size_t(tid)];
    }
    const double inv = 1.0 / double(batch.size());
    total.scale(inv);
    return {loss * inv, std::move(total)};
}

}  // namespace

std::pair<Network, TrainHistory> train(Network net, const PatchSet& lr_patches,
                                       const PatchSet& hr_patches,
                                       const TrainConfig& cfg) {
    cfg.validate();
    net.validate();
    if (!(lr_patches.grid == hr_patches.grid))
        throw ValidationError("training patch sets must share one grid");
    if (lr_patches.echoes != hr_patches.echoes)
        throw ValidationError("training patch sets must share the echo count");
    if (lr_patches.echoes != net.in_channels())
        throw ValidationError("network channels do not match patch echo count");
    if (lr_patches.blocks.empty())
        throw ValidationError("training requires at least one patch");

    const std::size_t n = lr_patches.blocks.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed);

    AdamState state = AdamState::zeros_like(net);
    TrainHistory history;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
        double epoch_sum = 0.0;
        int epoch_steps = 0;
        for (std::size_t start = 0; start < n; start += std::size_t(cfg.batch)) {
            const std::size_t stop = std::min(n, start + std::size_t(cfg.batch));
            std::span<const std::size_t> batch(order.data() + start, stop - start);
            auto [loss, grads] =
                batch_loss_and_gradients(net, lr_patches, hr_patches, batch, cfg.threads);
            if (!std::isfinite(loss))
                throw ComputeError("non-finite training loss at step " +
                                   std::to_string(history.step_loss.size()) +
                                   " (epoch " + std::to_string(epoch) + ")");
            adam_update(net, grads, state, cfg.lr);
            history.step_loss.push_back(loss);
            history.step_epoch.push_back(epoch);
            epoch_sum += loss;
            epoch_steps += 1;
        }
        history.epoch_loss.push_back(epoch_sum / epoch_steps);
    }
    return {std::move(net), std::move(history)};
}

void save_history_csv(const TrainHistory& history,
                      const std::filesystem::path& path) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out)
            throw ValidationError("cannot write history file: " + path.string());
        out << "step,epoch,loss\n";
        out.precision(17);
        for (std::size_t i = 0; i < history.step_loss.size(); ++i)
            out << i << "," << history.step_epoch[i] << "," << history.step_loss[i]
                << "\n";
        if (!out)
            throw ValidationError("write failure on history file: " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace mrsr
