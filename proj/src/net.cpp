#include "mrsr/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <json.hpp>

#include "reflect.hpp"

namespace mrsr {

namespace {

using detail::reflect_index;

// Scratch for one channel, reflect-padded by 1 on each spatial side.
struct PaddedChannel {
    std::uint32_t nz = 0, ny = 0, nx = 0;  // unpadded extents
    std::vector<double> data;              // (nz+2)*(ny+2)*(nx+2)

    void resize(std::uint32_t z, std::uint32_t y, std::uint32_t x) {
        nz = z;
        ny = y;
        nx = x;
        data.assign(std::size_t(z + 2) * (y + 2) * (x + 2), 0.0);
    }
    std::size_t row(std::uint32_t zp, std::uint32_t yp) const {
        return (std::size_t(zp) * (ny + 2) + yp) * (nx + 2);
    }
};

void reflect_pad(const Tensor& t, std::uint32_t c, PaddedChannel& pad) {
    pad.resize(t.nz, t.ny, t.nx);
    const std::ptrdiff_t nz = t.nz, ny = t.ny, nx = t.nx;
    for (std::ptrdiff_t zp = 0; zp < nz + 2; ++zp) {
        const auto zs = std::uint32_t(reflect_index(zp - 1, nz));
        for (std::ptrdiff_t yp = 0; yp < ny + 2; ++yp) {
            const auto ys = std::uint32_t(reflect_index(yp - 1, ny));
            double* dst = pad.data.data() + pad.row(std::uint32_t(zp), std::uint32_t(yp));
            const double* src = &t.data[t.index(c, zs, ys, 0)];
            dst[0] = src[reflect_index(-1, nx)];
            std::memcpy(dst + 1, src, std::size_t(nx) * sizeof(double));
            dst[nx + 1] = src[reflect_index(nx, nx)];
        }
    }
}

// out[oc] += w * shifted(pad), accumulated tap by tap; the x loop is
// contiguous on both sides.
void conv_accumulate(const PaddedChannel& pad, const float* w27, double* out) {
    const std::uint32_t nz = pad.nz, ny = pad.ny, nx = pad.nx;
    for (int dz = 0; dz < 3; ++dz)
        for (int dy = 0; dy < 3; ++dy)
            for (int dx = 0; dx < 3; ++dx) {
                const double w = w27[(dz * 3 + dy) * 3 + dx];
                if (w == 0.0) continue;
                for (std::uint32_t z = 0; z < nz; ++z)
                    for (std::uint32_t y = 0; y < ny; ++y) {
                        const double* src =
                            pad.data.data() + pad.row(z + dz, y + dy) + dx;
                        double* dst = out + (std::size_t(z) * ny + y) * nx;
                        for (std::uint32_t x = 0; x < nx; ++x)
                            dst[x] += w * src[x];
                    }
            }
}

// dW[tap] += <dOut, shifted(pad)> for all 27 taps of one (oc, ic) pair.
void conv_weight_grad(const PaddedChannel& pad, const double* dout, double* dw27) {
    const std::uint32_t nz = pad.nz, ny = pad.ny, nx = pad.nx;
    for (int dz = 0; dz < 3; ++dz)
        for (int dy = 0; dy < 3; ++dy)
            for (int dx = 0; dx < 3; ++dx) {
                double acc = 0.0;
                for (std::uint32_t z = 0; z < nz; ++z)
                    for (std::uint32_t y = 0; y < ny; ++y) {
                        const double* src =
                            pad.data.data() + pad.row(z + dz, y + dy) + dx;
                        const double* g = dout + (std::size_t(z) * ny + y) * nx;
                        for (std::uint32_t x = 0; x < nx; ++x)
                            acc += g[x] * src[x];
                    }
                dw27[(dz * 3 + dy) * 3 + dx] += acc;
            }
}

// Scatter dOut through the kernel into a padded gradient buffer
// (transpose of conv_accumulate).
void conv_input_grad(const float* w27, const double* dout, PaddedChannel& dpad) {
    const std::uint32_t nz = dpad.nz, ny = dpad.ny, nx = dpad.nx;
    for (int dz = 0; dz < 3; ++dz)
        for (int dy = 0; dy < 3; ++dy)
            for (int dx = 0; dx < 3; ++dx) {
                const double w = w27[(dz * 3 + dy) * 3 + dx];
                if (w == 0.0) continue;
                for (std::uint32_t z = 0; z < nz; ++z)
                    for (std::uint32_t y = 0; y < ny; ++y) {
                        double* dst = dpad.data.data() + dpad.row(z + dz, y + dy) + dx;
                        const double* g = dout + (std::size_t(z) * ny + y) * nx;
                        for (std::uint32_t x = 0; x < nx; ++x)
                            dst[x] += w * g[x];
                    }
            }
}

// Fold padded-buffer gradients back onto the source voxels through the
// same reflect map the forward padding used.
void unpad_accumulate(const PaddedChannel& dpad, Tensor& dx, std::uint32_t c) {
    const std::ptrdiff_t nz = dpad.nz, ny = dpad.ny, nx = dpad.nx;
    for (std::ptrdiff_t zp = 0; zp < nz + 2; ++zp) {
        const auto zs = std::uint32_t(reflect_index(zp - 1, nz));
        for (std::ptrdiff_t yp = 0; yp < ny + 2; ++yp) {
            const auto ys = std::uint32_t(reflect_index(yp - 1, ny));
            const double* src =
                dpad.data.data() + dpad.row(std::uint32_t(zp), std::uint32_t(yp));
            double* dst = &dx.data[dx.index(c, zs, ys, 0)];
            dst[reflect_index(-1, nx)] += src[0];
            for (std::ptrdiff_t x = 0; x < nx; ++x)
                dst[x] += src[x + 1];
            dst[reflect_index(nx, nx)] += src[nx + 1];
        }
    }
}

Tensor conv_layer_forward(const ConvLayer3D& layer, const Tensor& in,
                          std::vector<PaddedChannel>& pads) {
    Tensor out(layer.out_features, in.nz, in.ny, in.nx);
    pads.resize(layer.in_features);
    for (std::uint32_t ic = 0; ic < layer.in_features; ++ic)
        reflect_pad(in, ic, pads[ic]);
    const std::size_t voxels = in.voxels();
    for (std::uint32_t oc = 0; oc < layer.out_features; ++oc) {
        double* dst = out.data.data() + std::size_t(oc) * voxels;
        const double b = layer.bias[oc];
        for (std::size_t i = 0; i < voxels; ++i) dst[i] = b;
        for (std::uint32_t ic = 0; ic < layer.in_features; ++ic)
            conv_accumulate(pads[ic],
                            layer.weights.data() + (std::size_t(oc) * layer.in_features + ic) * 27,
                            dst);
    }
    if (layer.activation == Activation::relu)
        for (double& v : out.data)
            if (v < 0.0) v = 0.0;
    return out;
}

// Runs the conv stack, optionally recording every layer input for the
// backward pass. Returns input + residual.
Tensor forward_impl(const Network& net, const Tensor& input,
                    std::vector<Tensor>* saved_inputs) {
    std::vector<PaddedChannel> pads;
    Tensor act = input;
    for (const ConvLayer3D& layer : net.layers) {
        if (saved_inputs) saved_inputs->push_back(act);
        act = conv_layer_forward(layer, act, pads);
    }
    // residual sum
    for (std::size_t i = 0; i < act.data.size(); ++i)
        act.data[i] += input.data[i];
    return act;
}

void check_forward_shapes(const Network& net, const Tensor& input) {
    net.validate();
    if (input.channels != net.in_channels())
        throw ValidationError("input channel count does not match network");
    if (net.in_channels() != net.out_channels())
        throw ValidationError("residual network requires in_channels == out_channels");
    if (input.nz == 0 || input.ny == 0 || input.nx == 0)
        throw ValidationError("network input must have positive spatial dims");
}

}  // namespace

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers)
        n += l.weight_count() + l.bias.size();
    return n;
}

void Network::validate() const {
    if (layers.size() < 2)
        throw ValidationError("network needs at least 2 layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.in_features == 0 || l.out_features == 0)
            throw ValidationError("layer feature counts must be positive");
        if (l.weights.size() != l.weight_count())
            throw ValidationError("layer weight count does not match its shape");
        if (l.bias.size() != l.out_features)
            throw ValidationError("layer bias count does not match out_features");
        if (i > 0 && l.in_features != layers[i - 1].out_features)
            throw ValidationError("layer input width does not match previous output");
        const bool last = (i + 1 == layers.size());
        if (last && l.activation != Activation::none)
            throw ValidationError("final layer must be linear");
        if (!last && l.activation != Activation::relu)
            throw ValidationError("interior layers must use relu");
        for (float w : l.weights)
            if (!std::isfinite(w))
                throw ValidationError("network weights must be finite");
        for (float b : l.bias)
            if (!std::isfinite(b))
                throw ValidationError("network biases must be finite");
    }
}

Gradients Gradients::zeros_like(const Network& net) {
    Gradients g;
    g.layers.resize(net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        g.layers[i].weights.assign(net.layers[i].weights.size(), 0.0);
        g.layers[i].bias.assign(net.layers[i].bias.size(), 0.0);
    }
    return g;
}

void Gradients::accumulate(const Gradients& other) {
    if (layers.size() != other.layers.size())
        throw ValidationError("gradient shapes differ");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& a = layers[i];
        const auto& b = other.layers[i];
        if (a.weights.size() != b.weights.size() || a.bias.size() != b.bias.size())
            throw ValidationError("gradient shapes differ");
        for (std::size_t j = 0; j < a.weights.size(); ++j) a.weights[j] += b.weights[j];
        for (std::size_t j = 0; j < a.bias.size(); ++j) a.bias[j] += b.bias[j];
    }
}

void Gradients::scale(double s) {
    for (auto& l : layers) {
        for (double& w : l.weights) w *= s;
        for (double& b : l.bias) b *= s;
    }
}

Network init_network(std::uint32_t in_ch, std::uint32_t out_ch,
                     std::uint32_t layers, std::uint32_t features,
                     std::uint64_t seed) {
    if (layers < 2)
        throw ValidationError("network needs at least 2 layers");
    if (features < 1 || in_ch < 1 || out_ch < 1)
        throw ValidationError("channel and feature counts must be positive");

    std::mt19937_64 rng(seed);
    Network net;
    net.layers.resize(layers);
    for (std::uint32_t i = 0; i < layers; ++i) {
        ConvLayer3D& l = net.layers[i];
        l.in_features = (i == 0) ? in_ch : features;
        l.out_features = (i + 1 == layers) ? out_ch : features;
        l.activation = (i + 1 == layers) ? Activation::none : Activation::relu;
        l.weights.assign(l.weight_count(), 0.0f);
        l.bias.assign(l.out_features, 0.0f);
        if (i + 1 < layers) {
            const double stddev = std::sqrt(2.0 / (27.0 * l.in_features));
            std::normal_distribution<double> dist(0.0, stddev);
            for (float& w : l.weights) w = float(dist(rng));
        }
        // final layer stays zero: the untrained network is the identity
    }
    net.validate();
    return net;
}

Tensor forward(const Network& net, const Tensor& input) {
    check_forward_shapes(net, input);
    return forward_impl(net, input, nullptr);
}

std::pair<double, Gradients> loss_and_gradients(const Network& net,
                                                const Tensor& input,
                                                const Tensor& target) {
    check_forward_shapes(net, input);
    if (target.channels != net.out_channels() || !target.same_shape(input))
        throw ValidationError("target shape does not match network output");

    std::vector<Tensor> inputs;  // per-layer inputs a_0 .. a_{L-1}
    inputs.reserve(net.layers.size());
    Tensor output = forward_impl(net, input, &inputs);

    const double n = double(output.data.size());
    double loss = 0.0;
    Tensor delta(output.channels, output.nz, output.ny, output.nx);
    for (std::size_t i = 0; i < output.data.size(); ++i) {
        const double d = output.data[i] - target.data[i];
        loss += d * d;
        delta.data[i] = 2.0 * d / n;
    }
    loss /= n;

    Gradients grads = Gradients::zeros_like(net);
    std::vector<PaddedChannel> pads;
    PaddedChannel dpad;

    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const ConvLayer3D& layer = net.layers[li];
        const Tensor& a_in = inputs[li];
        Gradients::Layer& g = grads.layers[li];

        // delta currently holds d(loss)/d(layer post-activation)
        if (layer.activation == Activation::relu) {
            // post-activation of this layer is the next layer's saved input
            const Tensor& a_out = inputs[li + 1];
            for (std::size_t i = 0; i < delta.data.size(); ++i)
                if (a_out.data[i] <= 0.0) delta.data[i] = 0.0;
        }

        const std::size_t voxels = a_in.voxels();
        pads.resize(layer.in_features);
        for (std::uint32_t ic = 0; ic < layer.in_features; ++ic)
            reflect_pad(a_in, ic, pads[ic]);

        for (std::uint32_t oc = 0; oc < layer.out_features; ++oc) {
            const double* dout = delta.data.data() + std::size_t(oc) * voxels;
            double bacc = 0.0;
            for (std::size_t i = 0; i < voxels; ++i) bacc += dout[i];
            g.bias[oc] += bacc;
            for (std::uint32_t ic = 0; ic < layer.in_features; ++ic)
                conv_weight_grad(pads[ic], dout,
                                 g.weights.data() +
                                     (std::size_t(oc) * layer.in_features + ic) * 27);
        }

        if (li == 0) break;  // no parameters upstream of the first layer

        Tensor next_delta(layer.in_features, a_in.nz, a_in.ny, a_in.nx);
        for (std::uint32_t ic = 0; ic < layer.in_features; ++ic) {
            dpad.resize(a_in.nz, a_in.ny, a_in.nx);
            for (std::uint32_t oc = 0; oc < layer.out_features; ++oc)
                conv_input_grad(layer.weights.data() +
                                    (std::size_t(oc) * layer.in_features + ic) * 27,
                                delta.data.data() + std::size_t(oc) * voxels, dpad);
            unpad_accumulate(dpad, next_delta, ic);
        }
        delta = std::move(next_delta);
    }

    return {loss, std::move(grads)};
}

Network surgery_expand(const Network& single) {
    single.validate();
    if (single.in_channels() != 1 || single.out_channels() != 1)
        throw ValidationError("surgery_expand requires a single-channel network");

    Network net = single;
    net.surgery_scale = 0.5;

    ConvLayer3D& first = net.layers.front();
    const std::uint32_t oc_count = first.out_features;
    std::vector<float> w(std::size_t(oc_count) * 2 * 27);
    for (std::uint32_t oc = 0; oc < oc_count; ++oc)
        for (int t = 0; t < 27; ++t) {
            const float half = 0.5f * single.layers.front().weights[oc * 27 + t];
            w[(std::size_t(oc) * 2 + 0) * 27 + t] = half;
            w[(std::size_t(oc) * 2 + 1) * 27 + t] = half;
        }
    first.in_features = 2;
    first.weights = std::move(w);

    ConvLayer3D& last = net.layers.back();
    const std::uint32_t ic_count = last.in_features;
    std::vector<float> lw(2 * std::size_t(ic_count) * 27);
    const auto& old = single.layers.back().weights;
    std::copy(old.begin(), old.end(), lw.begin());
    std::copy(old.begin(), old.end(), lw.begin() + old.size());
    last.out_features = 2;
    last.weights = std::move(lw);
    last.bias = {single.layers.back().bias[0], single.layers.back().bias[0]};

    net.validate();
    return net;
}

namespace {

nlohmann::json manifest_json(const Network& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : net.layers)
        layers.push_back({{"in_features", l.in_features},
                          {"out_features", l.out_features},
                          {"kernel", {3, 3, 3}},
                          {"activation", l.activation == Activation::relu ? "relu" : "none"}});
    nlohmann::json j{{"format", "mrsr-weights"},
                     {"format_version", 1},
                     {"in_channels", net.in_channels()},
                     {"out_channels", net.out_channels()},
                     {"layers", layers}};
    if (net.surgery_scale)
        j["surgery"] = {{"first_layer_scale", *net.surgery_scale}};
    return j;
}

}  // namespace

void save_weights(const Network& net, const std::filesystem::path& path) {
    net.validate();
    const std::string manifest = manifest_json(net).dump();

    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw ValidationError("cannot write weights file: " + path.string());
        const std::uint64_t len = manifest.size();
        out.write(reinterpret_cast<const char*>(&len), 8);
        out.write(manifest.data(), std::streamsize(manifest.size()));
        for (const auto& l : net.layers) {
            out.write(reinterpret_cast<const char*>(l.weights.data()),
                      std::streamsize(l.weights.size() * 4));
            out.write(reinterpret_cast<const char*>(l.bias.data()),
                      std::streamsize(l.bias.size() * 4));
        }
        if (!out)
            throw ValidationError("write failure on weights file: " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

Network load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot open weights file: " + path.string());

    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 8);
    if (in.gcount() != 8)
        throw ValidationError("truncated weights manifest prefix: " + path.string());
    std::error_code ec;
    const std::uintmax_t fsize = std::filesystem::file_size(path, ec);
    if (!ec && 8 + len > fsize)
        throw ValidationError("truncated weights manifest: " + path.string());

    std::string manifest(len, '\0');
    in.read(manifest.data(), std::streamsize(len));
    if (std::size_t(in.gcount()) != len)
        throw ValidationError("truncated weights manifest: " + path.string());

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(manifest);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed weights manifest: " + std::string(e.what()));
    }
    if (j.value("format", "") != "mrsr-weights")
        throw ValidationError("not an mrsr weights file: " + path.string());
    if (j.value("format_version", 0) != 1)
        throw ValidationError("unsupported weights format version in " + path.string());

    Network net;
    std::size_t payload = 0;
    try {
        for (const auto& lj : j.at("layers")) {
            ConvLayer3D l;
            l.in_features = lj.at("in_features").get<std::uint32_t>();
            l.out_features = lj.at("out_features").get<std::uint32_t>();
            const auto kernel = lj.at("kernel").get<std::vector<int>>();
            if (kernel != std::vector<int>{3, 3, 3})
                throw ValidationError("weights manifest declares non-3x3x3 kernel");
            const auto act = lj.at("activation").get<std::string>();
            if (act == "relu")
                l.activation = Activation::relu;
            else if (act == "none")
                l.activation = Activation::none;
            else
                throw ValidationError("unknown activation tag in weights manifest: " + act);
            l.weights.resize(l.weight_count());
            l.bias.resize(l.out_features);
            payload += (l.weights.size() + l.bias.size()) * 4;
            net.layers.push_back(std::move(l));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("weights manifest missing key: " + std::string(e.what()));
    }
    if (j.contains("surgery"))
        net.surgery_scale = j["surgery"].value("first_layer_scale", 0.5);

    if (!ec && 8 + len + payload != fsize)
        throw ValidationError("weights payload size mismatch in " + path.string() +
                              ": manifest expects " + std::to_string(payload) +
                              " bytes");

    for (auto& l : net.layers) {
        in.read(reinterpret_cast<char*>(l.weights.data()),
                std::streamsize(l.weights.size() * 4));
        if (std::size_t(in.gcount()) != l.weights.size() * 4)
            throw ValidationError("truncated weights payload in " + path.string());
        in.read(reinterpret_cast<char*>(l.bias.data()),
                std::streamsize(l.bias.size() * 4));
        if (std::size_t(in.gcount()) != l.bias.size() * 4)
            throw ValidationError("truncated weights payload in " + path.string());
    }

    net.validate();
    const auto in_ch = j.at("in_channels").get<std::uint32_t>();
    const auto out_ch = j.at("out_channels").get<std::uint32_t>();
    if (in_ch != net.in_channels() || out_ch != net.out_channels())
        throw ValidationError("weights manifest channel counts disagree with layers");
    return net;
}

}  // namespace mrsr
