// Python bindings for the mrsr core. Volumes cross the boundary as
// float64 numpy arrays shaped (echoes, nz, ny, nx), matching the C++
// memory order, plus a spacing tuple in millimeters.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mrsr/errors.hpp"
#include "mrsr/eval.hpp"
#include "mrsr/net.hpp"
#include "mrsr/patch.hpp"
#include "mrsr/phantom.hpp"
#include "mrsr/pipeline.hpp"
#include "mrsr/quant.hpp"
#include "mrsr/resample.hpp"
#include "mrsr/train.hpp"
#include "mrsr/volume.hpp"

namespace py = pybind11;
using namespace mrsr;

namespace {

using Array4 = py::array_t<double, py::array::c_style | py::array::forcecast>;

MultiEchoVolume volume_from_array(const Array4& arr,
                                  std::tuple<float, float, float> spacing) {
    if (arr.ndim() != 4)
        throw ValidationError("volume array must have shape (echoes, nz, ny, nx)");
    const auto e = std::uint32_t(arr.shape(0));
    const auto nz = std::uint32_t(arr.shape(1));
    const auto ny = std::uint32_t(arr.shape(2));
    const auto nx = std::uint32_t(arr.shape(3));
    std::vector<double> data(arr.data(), arr.data() + arr.size());
    return MultiEchoVolume({nx, ny, nz},
                           {std::get<0>(spacing), std::get<1>(spacing),
                            std::get<2>(spacing)},
                           e, std::move(data));
}

py::array volume_to_array(const MultiEchoVolume& vol) {
    const auto& d = vol.dims();
    py::array_t<double> arr({std::size_t(vol.echoes()), std::size_t(d.nz),
                             std::size_t(d.ny), std::size_t(d.nx)});
    std::copy(vol.data().begin(), vol.data().end(), arr.mutable_data());
    return arr;
}

Tensor tensor_from_array(const Array4& arr) {
    if (arr.ndim() != 4)
        throw ValidationError("tensor array must have shape (channels, nz, ny, nx)");
    Tensor t(std::uint32_t(arr.shape(0)), std::uint32_t(arr.shape(1)),
             std::uint32_t(arr.shape(2)), std::uint32_t(arr.shape(3)));
    std::copy(arr.data(), arr.data() + arr.size(), t.data.begin());
    return t;
}

py::array tensor_to_array(const Tensor& t) {
    py::array_t<double> arr({std::size_t(t.channels), std::size_t(t.nz),
                             std::size_t(t.ny), std::size_t(t.nx)});
    std::copy(t.data.begin(), t.data.end(), arr.mutable_data());
    return arr;
}

std::vector<PairSample> pairs_from_list(
    const std::vector<std::pair<double, double>>& pairs) {
    return pairs;
}

py::dict history_dict(const TrainHistory& h) {
    py::dict d;
    d["step_loss"] = h.step_loss;
    d["step_epoch"] = h.step_epoch;
    d["epoch_loss"] = h.epoch_loss;
    return d;
}

py::dict agreement_dict(const AgreementReport& rep) {
    py::dict d;
    py::list pairs;
    for (const auto& [g, m] : rep.pairs) pairs.append(py::make_tuple(g, m));
    d["pairs"] = pairs;
    d["method_mean"] = rep.method.mean;
    d["method_sd"] = rep.method.sd;
    d["cv_mean"] = rep.cv.mean;
    d["cv_sd"] = rep.cv.sd;
    d["difference_mean"] = rep.difference.mean;
    d["difference_sd"] = rep.difference.sd;
    d["ccc"] = rep.ccc;
    d["u_statistic"] = rep.utest.u;
    d["p_value"] = rep.utest.p;
    return d;
}

NormScope scope_from_string(const std::string& scope) {
    if (scope == "per-echo") return NormScope::per_echo;
    if (scope == "per-volume") return NormScope::per_volume;
    throw ValidationError("normalization scope must be 'per-echo' or 'per-volume'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Through-plane super-resolution MRI toolkit (C++ core)";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<ComputeError>(m, "ComputeError", PyExc_ArithmeticError);

    py::class_<MultiEchoVolume>(m, "MultiEchoVolume")
        .def(py::init(&volume_from_array), py::arg("data"),
             py::arg("spacing_mm") = std::tuple<float, float, float>{1.f, 1.f, 1.f},
             "Build from a float array shaped (echoes, nz, ny, nx)")
        .def_property_readonly("data", &volume_to_array)
        .def_property_readonly("echoes", &MultiEchoVolume::echoes)
        .def_property_readonly(
            "dims",
            [](const MultiEchoVolume& v) {
                return py::make_tuple(v.dims().nx, v.dims().ny, v.dims().nz);
            },
            "(nx, ny, nz)")
        .def_property_readonly("spacing_mm", [](const MultiEchoVolume& v) {
            return py::make_tuple(v.spacing().sx, v.spacing().sy, v.spacing().sz);
        });

    py::class_<ScanParams>(m, "ScanParams")
        .def(py::init([](double te1, double te2, double tr, double flip) {
                 ScanParams p{te1, te2, tr, flip};
                 p.validate();
                 return p;
             }),
             py::arg("te1_ms") = 7.0, py::arg("te2_ms") = 39.0,
             py::arg("tr_ms") = 23.0, py::arg("flip_deg") = 20.0)
        .def_readonly("te1_ms", &ScanParams::te1_ms)
        .def_readonly("te2_ms", &ScanParams::te2_ms)
        .def_readonly("tr_ms", &ScanParams::tr_ms)
        .def_readonly("flip_deg", &ScanParams::flip_deg);

    py::class_<NormalizationRecord>(m, "NormalizationRecord")
        .def_property_readonly("scope",
                               [](const NormalizationRecord& r) {
                                   return r.scope == NormScope::per_echo
                                              ? "per-echo"
                                              : "per-volume";
                               })
        .def_readonly("ranges", &NormalizationRecord::ranges);

    py::class_<Network>(m, "Network")
        .def_property_readonly("in_channels", &Network::in_channels)
        .def_property_readonly("out_channels", &Network::out_channels)
        .def_property_readonly("parameter_count", &Network::parameter_count)
        .def_property_readonly("layer_count",
                               [](const Network& n) { return n.layers.size(); })
        .def_property_readonly("surgery_scale", [](const Network& n) {
            return n.surgery_scale ? py::cast(*n.surgery_scale) : py::none();
        });

    py::class_<T2Map>(m, "T2Map")
        .def_property_readonly("values",
                               [](const T2Map& t) {
                                   py::array_t<double> arr({std::size_t(t.dims.nz),
                                                            std::size_t(t.dims.ny),
                                                            std::size_t(t.dims.nx)});
                                   std::copy(t.t2_ms.begin(), t.t2_ms.end(),
                                             arr.mutable_data());
                                   return arr;
                               })
        .def_property_readonly("valid", [](const T2Map& t) {
            py::array_t<bool> arr({std::size_t(t.dims.nz), std::size_t(t.dims.ny),
                                   std::size_t(t.dims.nx)});
            for (std::size_t i = 0; i < t.valid.size(); ++i)
                arr.mutable_data()[i] = t.valid[i] != 0;
            return arr;
        });

    // ---- container I/O and normalization ---------------------------------
    m.def("load_volume", &load_volume, py::arg("path"));
    m.def("save_volume", &save_volume, py::arg("volume"), py::arg("path"));
    m.def(
        "normalize",
        [](const MultiEchoVolume& v, const std::string& scope) {
            return normalize(v, scope_from_string(scope));
        },
        py::arg("volume"), py::arg("scope") = "per-echo");
    m.def("denormalize", &denormalize, py::arg("volume"), py::arg("record"));

    // ---- resampling -------------------------------------------------------
    m.def(
        "design_lowpass",
        [](int order, double cutoff) {
            const FilterTaps taps = design_lowpass(order, cutoff);
            return py::array_t<double>(py::ssize_t(taps.taps.size()),
                                       taps.taps.data());
        },
        py::arg("order") = 48, py::arg("cutoff") = 0.25);
    m.def(
        "degrade_slices",
        [](const MultiEchoVolume& v, int factor) { return degrade_slices(v, factor); },
        py::arg("volume"), py::arg("factor") = 2);
    m.def("tricubic_upsample", &tricubic_upsample, py::arg("volume"),
          py::arg("factor"));
    m.def("fourier_upsample", &fourier_upsample, py::arg("volume"),
          py::arg("factor"));

    // ---- patches ----------------------------------------------------------
    m.def(
        "patch_grid_origins",
        [](std::tuple<std::uint32_t, std::uint32_t, std::uint32_t> dims,
           std::uint32_t patch, std::uint32_t stride) {
            const PatchGrid grid = make_patch_grid(
                {std::get<0>(dims), std::get<1>(dims), std::get<2>(dims)}, patch,
                stride);
            py::array_t<std::uint32_t> arr(
                {grid.origins.size(), std::size_t(3)});
            auto* p = arr.mutable_data();
            for (const auto& o : grid.origins) {
                *p++ = o[0];
                *p++ = o[1];
                *p++ = o[2];
            }
            return arr;
        },
        py::arg("dims"), py::arg("patch") = 32, py::arg("stride") = 16,
        "Patch corner grid as an (N, 3) array of (x, y, z) origins");

    // ---- network ----------------------------------------------------------
    m.def("init_network", &init_network, py::arg("in_channels"),
          py::arg("out_channels"), py::arg("layers") = 20, py::arg("features") = 64,
          py::arg("seed") = 0);
    m.def(
        "forward",
        [](const Network& net, const Array4& x) {
            return tensor_to_array(forward(net, tensor_from_array(x)));
        },
        py::arg("network"), py::arg("input"),
        "Residual forward pass on a (channels, nz, ny, nx) array");
    m.def(
        "loss_and_gradients",
        [](const Network& net, const Array4& x, const Array4& t) {
            auto [loss, grads] =
                loss_and_gradients(net, tensor_from_array(x), tensor_from_array(t));
            py::list layer_grads;
            for (const auto& l : grads.layers) {
                py::array_t<double> w(py::ssize_t(l.weights.size()),
                                      l.weights.data());
                py::array_t<double> b(py::ssize_t(l.bias.size()), l.bias.data());
                layer_grads.append(py::make_tuple(w, b));
            }
            return py::make_tuple(loss, layer_grads);
        },
        py::arg("network"), py::arg("input"), py::arg("target"));
    m.def("surgery_expand", &surgery_expand, py::arg("network"),
          "Widen a single-channel network to dual-echo");
    m.def("save_weights", &save_weights, py::arg("network"), py::arg("path"));
    m.def("load_weights", &load_weights, py::arg("path"));

    // ---- training and inference -------------------------------------------
    m.def(
        "train",
        [](Network net, const std::vector<MultiEchoVolume>& inputs,
           const std::vector<MultiEchoVolume>& targets, double lr, int batch,
           int epochs, std::uint64_t seed, bool shuffle, int threads,
           std::uint32_t patch, std::uint32_t stride) {
            TrainConfig cfg;
            cfg.lr = lr;
            cfg.batch = batch;
            cfg.epochs = epochs;
            cfg.seed = seed;
            cfg.shuffle = shuffle;
            cfg.threads = threads;
            auto [trained, history] = train_on_volumes(
                std::move(net), inputs, targets, cfg, patch, stride);
            return py::make_tuple(trained, history_dict(history));
        },
        py::arg("network"), py::arg("inputs"), py::arg("targets"),
        py::arg("lr") = 1e-4, py::arg("batch") = 50, py::arg("epochs") = 10,
        py::arg("seed") = 0, py::arg("shuffle") = true, py::arg("threads") = 1,
        py::arg("patch") = 32, py::arg("stride") = 16,
        "Mini-batch training; inputs must already sit on the target grid");
    m.def(
        "infer_volume",
        [](const Network& net, const MultiEchoVolume& vol, std::uint32_t patch,
           std::uint32_t stride, int threads) {
            InferOptions opts;
            opts.patch = patch;
            opts.stride = stride;
            opts.threads = threads;
            return infer_volume(net, vol, opts);
        },
        py::arg("network"), py::arg("volume"), py::arg("patch") = 32,
        py::arg("stride") = 16, py::arg("threads") = 1);

    // ---- quantitative mapping ----------------------------------------------
    m.def(
        "estimate_t2",
        [](const MultiEchoVolume& v, const ScanParams& scan, double t2_min,
           double t2_max, double signal_floor, double correction) {
            T2Options opts;
            opts.t2_min_ms = t2_min;
            opts.t2_max_ms = t2_max;
            opts.signal_floor = signal_floor;
            opts.correction = correction;
            return estimate_t2(v, scan, opts);
        },
        py::arg("volume"), py::arg("scan"), py::arg("t2_min_ms") = 0.0,
        py::arg("t2_max_ms") = 100.0, py::arg("signal_floor") = 1e-6,
        py::arg("correction") = 1.0);
    m.def(
        "roi_mean_t2",
        [](const T2Map& map, const py::array_t<bool, py::array::c_style |
                                                          py::array::forcecast>& mask) {
            if (mask.ndim() != 3)
                throw ValidationError("ROI mask must have shape (nz, ny, nx)");
            RoiMask roi;
            roi.dims = {std::uint32_t(mask.shape(2)), std::uint32_t(mask.shape(1)),
                        std::uint32_t(mask.shape(0))};
            roi.include.resize(std::size_t(mask.size()));
            for (std::size_t i = 0; i < roi.include.size(); ++i)
                roi.include[i] = mask.data()[i] ? 1 : 0;
            return roi_mean_t2(map, roi);
        },
        py::arg("t2_map"), py::arg("mask"));

    // ---- metrics and statistics --------------------------------------------
    m.def("rmse", &rmse, py::arg("a"), py::arg("b"), py::arg("echo") = 0);
    m.def("psnr", &psnr, py::arg("a"), py::arg("reference"), py::arg("echo") = 0,
          py::arg("peak") = 1.0);
    m.def(
        "ssim",
        [](const MultiEchoVolume& a, const MultiEchoVolume& b, std::uint32_t echo,
           int window, double sigma, bool per_slice) {
            SsimOptions opts;
            opts.window = window;
            opts.sigma = sigma;
            opts.per_slice = per_slice;
            return ssim(a, b, echo, opts);
        },
        py::arg("a"), py::arg("b"), py::arg("echo") = 0, py::arg("window") = 11,
        py::arg("sigma") = 1.5, py::arg("per_slice") = false);
    m.def(
        "cv_percent",
        [](const std::vector<std::pair<double, double>>& pairs) {
            const SummaryStat s = cv_percent(pairs_from_list(pairs));
            return py::make_tuple(s.mean, s.sd);
        },
        py::arg("pairs"));
    m.def(
        "mean_difference",
        [](const std::vector<std::pair<double, double>>& pairs) {
            const SummaryStat s = mean_difference(pairs_from_list(pairs));
            return py::make_tuple(s.mean, s.sd);
        },
        py::arg("pairs"));
    m.def(
        "ccc",
        [](const std::vector<std::pair<double, double>>& pairs) {
            return ccc(pairs_from_list(pairs));
        },
        py::arg("pairs"));
    m.def(
        "mann_whitney_u",
        [](const std::vector<double>& x, const std::vector<double>& y,
           const std::string& mode) {
            UMode m_ = UMode::exact;
            if (mode == "exact")
                m_ = UMode::exact;
            else if (mode == "normal-approx")
                m_ = UMode::normal_approx;
            else
                throw ValidationError("mode must be 'exact' or 'normal-approx'");
            const UTestResult r = mann_whitney_u(x, y, m_);
            return py::make_tuple(r.u, r.p);
        },
        py::arg("x"), py::arg("y"), py::arg("mode") = "exact");
    m.def(
        "agreement_report",
        [](const std::vector<std::pair<double, double>>& pairs) {
            return agreement_dict(agreement_report(pairs_from_list(pairs)));
        },
        py::arg("pairs"));

    // ---- phantom ------------------------------------------------------------
    m.def("default_phantom_spec_json",
          [] { return phantom_spec_to_json(default_phantom_spec()); });
    m.def(
        "generate_phantom",
        [](const py::object& spec_json, const ScanParams& scan) {
            const PhantomSpec spec =
                spec_json.is_none()
                    ? default_phantom_spec()
                    : parse_phantom_spec(py::cast<std::string>(spec_json));
            return generate_phantom(spec, scan);
        },
        py::arg("spec_json") = py::none(), py::arg("scan") = ScanParams{},
        "Rasterize a phantom spec (JSON text; omit for the default phantom)");
}
