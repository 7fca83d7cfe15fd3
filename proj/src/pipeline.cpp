#include "mrsr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mrsr/resample.hpp"

namespace mrsr {

namespace {

nlohmann::json json_number(double v) {
    // JSON has no infinity literal; the report uses a string sentinel.
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

void write_json_atomic(const nlohmann::json& j, const std::filesystem::path& path) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out)
            throw ValidationError("cannot write report file: " + path.string());
        out << j.dump(2) << "\n";
        if (!out)
            throw ValidationError("write failure on report file: " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

MultiEchoVolume clamp01(MultiEchoVolume vol) {
    for (double& v : vol.data()) v = std::clamp(v, 0.0, 1.0);
    return vol;
}

nlohmann::json quality_json(const QualityReport& report) {
    nlohmann::json ssim_j, psnr_j, rmse_j, rmse_e3_j;
    for (const auto& e : report.per_echo) {
        ssim_j[e.echo_label] = e.ssim;
        psnr_j[e.echo_label] = json_number(e.psnr_db);
        rmse_j[e.echo_label] = e.rmse;
        rmse_e3_j[e.echo_label] = e.rmse * 1e3;
    }
    return {{"ssim", ssim_j},
            {"psnr_db", psnr_j},
            {"rmse", rmse_j},
            {"rmse_e3", rmse_e3_j}};
}

nlohmann::json agreement_json(const AgreementReport& rep) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& [g, m] : rep.pairs) pairs.push_back({g, m});
    return {{"n", rep.pairs.size()},
            {"pairs", pairs},
            {"method_mean", rep.method.mean},
            {"method_sd", rep.method.sd},
            {"cv_mean", rep.cv.mean},
            {"cv_sd", rep.cv.sd},
            {"difference_mean", rep.difference.mean},
            {"difference_sd", rep.difference.sd},
            {"ccc", rep.ccc},
            {"u_statistic", rep.utest.u},
            {"p_value", rep.utest.p}};
}

}  // namespace

MultiEchoVolume infer_volume(const Network& net, const MultiEchoVolume& input,
                             const InferOptions& opts) {
    net.validate();
    input.validate();
    if (net.in_channels() != input.echoes())
        throw ValidationError("network channels do not match input echo count");
    if (opts.threads < 1)
        throw ValidationError("thread count must be >= 1");

    auto [vol01, rec] = normalize(input, NormScope::per_echo);

    const Dims d = input.dims();
    const bool whole =
        d.nx < opts.patch || d.ny < opts.patch || d.nz < opts.patch;
    MultiEchoVolume out01(d, input.spacing(), input.echoes());

    if (whole) {
        const Tensor result = forward(net, to_tensor(vol01));
        out01 = to_volume(result, input.spacing());
    } else {
        const PatchGrid grid = make_patch_grid(d, opts.patch, opts.stride);
        PatchSet patches = extract_patches(vol01, grid);

        const int nthreads =
            std::max(1, std::min<int>(opts.threads, int(patches.blocks.size())));
        std::vector<std::string> errors(static_cast<std::size_t>(nthreads));
        auto work = [&](int tid) {
            try {
                const std::size_t count = patches.blocks.size();
                const std::size_t lo = count * std::size_t(tid) / std::size_t(nthreads);
                const std::size_t hi =
                    count * std::size_t(tid + 1) / std::size_t(nthreads);
                for (std::size_t i = lo; i < hi; ++i)
                    patches.blocks[i] = forward(net, patches.blocks[i]);
            } catch (const std::exception& e) {
                errors[std::size_t(tid)] = e.what();
            }
        };
        if (nthreads == 1) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            for (int tid = 0; tid < nthreads; ++tid) pool.emplace_back(work, tid);
            for (auto& th : pool) th.join();
        }
        for (const auto& e : errors)
            if (!e.empty()) throw ComputeError(e);

        out01 = assemble_patches(patches, d);
    }
    return denormalize(out01, rec);
}

std::pair<Network, TrainHistory> train_on_volumes(
    Network net, const std::vector<MultiEchoVolume>& inputs,
    const std::vector<MultiEchoVolume>& targets, const TrainConfig& cfg,
    std::uint32_t patch, std::uint32_t stride) {
    if (inputs.empty() || inputs.size() != targets.size())
        throw ValidationError("training requires matching input/target volume lists");

    PatchSet lr_all, hr_all;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto& in = inputs[i];
        const auto& tgt = targets[i];
        if (!(in.dims() == tgt.dims()) || in.echoes() != tgt.echoes())
            throw ValidationError(
                "input and target volumes must share dims and echo count "
                "(upsample the input to the target grid first)");
        if (!(in.dims() == inputs[0].dims()))
            throw ValidationError("all training volumes must share one dims");

        auto [in01, rec] = normalize(in, NormScope::per_echo);
        const MultiEchoVolume tgt01 = apply_normalization(tgt, rec);

        const PatchGrid grid = make_patch_grid(in.dims(), patch, stride);
        PatchSet lr = extract_patches(in01, grid);
        PatchSet hr = extract_patches(tgt01, grid);
        if (i == 0) {
            lr_all = std::move(lr);
            hr_all = std::move(hr);
        } else {
            for (auto& b : lr.blocks) lr_all.blocks.push_back(std::move(b));
            for (auto& b : hr.blocks) hr_all.blocks.push_back(std::move(b));
        }
    }
    return train(std::move(net), lr_all, hr_all, cfg);
}

Cohort1Result run_cohort1(const std::filesystem::path& gt_path,
                          const std::filesystem::path& weights_path,
                          const std::filesystem::path& out_dir,
                          const Cohort1Options& opts) {
    // validate every input before any computation or output
    const MultiEchoVolume gt = load_volume(gt_path);
    const Network net = load_weights(weights_path);
    if (net.in_channels() != gt.echoes())
        throw ValidationError("network channels do not match ground-truth echoes");
    if (opts.factor < 2)
        throw ValidationError("cohort1 degradation factor must be >= 2");
    if (gt.dims().nz % std::uint32_t(opts.factor) != 0)
        throw ValidationError("cohort1 requires nz divisible by the factor");

    auto [gt01, rec] = normalize(gt, NormScope::per_echo);

    const MultiEchoVolume degraded = degrade_slices(gt01, opts.factor);
    const MultiEchoVolume tci =
        clamp01(tricubic_upsample(degraded, opts.factor));
    const MultiEchoVolume fi = clamp01(fourier_upsample(degraded, opts.factor));
    InferOptions infer_opts;
    infer_opts.threads = opts.threads;
    const MultiEchoVolume sr = clamp01(infer_volume(net, tci, infer_opts));

    Cohort1Result result;
    result.methods["tci"] = quality_report(gt01, tci, opts.ssim);
    result.methods["fi"] = quality_report(gt01, fi, opts.ssim);
    result.methods["mrsr"] = quality_report(gt01, sr, opts.ssim);

    std::filesystem::create_directories(out_dir);
    save_volume(degraded, out_dir / "degraded.mrsv");
    save_volume(tci, out_dir / "tci.mrsv");
    save_volume(fi, out_dir / "fi.mrsv");
    save_volume(sr, out_dir / "mrsr.mrsv");
    write_cohort1_report_json(result, out_dir / "report.json");
    return result;
}

Cohort2Result run_cohort2(
    const std::vector<std::filesystem::path>& gt_paths,
    const std::vector<std::pair<std::string, std::vector<std::filesystem::path>>>&
        method_paths,
    const ScanParams& params, const RoiMask& roi, const T2Options& t2_opts) {
    if (gt_paths.empty())
        throw ValidationError("cohort2 requires at least one subject");
    for (const auto& [name, paths] : method_paths)
        if (paths.size() != gt_paths.size())
            throw ValidationError("method '" + name +
                                  "' volume count does not match subject count");

    std::vector<double> gt_roi;
    for (const auto& p : gt_paths) {
        const T2Map map = estimate_t2(load_volume(p), params, t2_opts);
        gt_roi.push_back(roi_mean_t2(map, roi));
    }

    Cohort2Result result;
    result.subjects = gt_paths.size();
    for (const auto& [name, paths] : method_paths) {
        std::vector<PairSample> pairs;
        for (std::size_t i = 0; i < paths.size(); ++i) {
            const T2Map map = estimate_t2(load_volume(paths[i]), params, t2_opts);
            pairs.emplace_back(gt_roi[i], roi_mean_t2(map, roi));
        }
        result.methods[name] = agreement_report(pairs);
    }
    return result;
}

void write_quality_report_json(const QualityReport& report,
                               const std::filesystem::path& path) {
    write_json_atomic(quality_json(report), path);
}

void write_cohort1_report_json(const Cohort1Result& result,
                               const std::filesystem::path& path) {
    nlohmann::json methods;
    for (const auto& [name, rep] : result.methods) methods[name] = quality_json(rep);
    write_json_atomic({{"methods", methods}}, path);
}

void write_agreement_report_json(const AgreementReport& report,
                                 const std::filesystem::path& path) {
    write_json_atomic(agreement_json(report), path);
}

void write_cohort2_report_json(const Cohort2Result& result,
                               const std::filesystem::path& path) {
    nlohmann::json methods;
    for (const auto& [name, rep] : result.methods) methods[name] = agreement_json(rep);
    write_json_atomic({{"subjects", result.subjects}, {"methods", methods}}, path);
}

std::vector<PairSample> load_pairs_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open pairs file: " + path.string());

    std::string line;
    if (!std::getline(in, line))
        throw ValidationError("empty pairs file: " + path.string());
    // tolerate CR and surrounding whitespace in the header
    std::erase_if(line, [](char c) { return c == '\r' || c == ' '; });
    if (line != "subject,ground_truth_ms,method_ms")
        throw ValidationError(
            "pairs file must start with header subject,ground_truth_ms,method_ms");

    std::vector<PairSample> pairs;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        std::erase_if(line, [](char c) { return c == '\r'; });
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string subject, g_str, m_str;
        if (!std::getline(ss, subject, ',') || !std::getline(ss, g_str, ',') ||
            !std::getline(ss, m_str))
            throw ValidationError("malformed pairs row at line " +
                                  std::to_string(lineno));
        try {
            pairs.emplace_back(std::stod(g_str), std::stod(m_str));
        } catch (const std::exception&) {
            throw ValidationError("non-numeric pair values at line " +
                                  std::to_string(lineno));
        }
    }
    if (pairs.empty())
        throw ValidationError("pairs file holds no data rows: " + path.string());
    return pairs;
}

}  // namespace mrsr
