// mrsr: desk-scale through-plane super-resolution MRI toolkit.
//
// Subcommands cover the full workflow: synthesize dual-echo phantoms,
// simulate thick-slice acquisition, restore resolution with the residual
// network or the interpolation baselines, map T2, and score results.

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "mrsr/errors.hpp"
#include "mrsr/eval.hpp"
#include "mrsr/net.hpp"
#include "mrsr/phantom.hpp"
#include "mrsr/pipeline.hpp"
#include "mrsr/quant.hpp"
#include "mrsr/resample.hpp"
#include "mrsr/train.hpp"
#include "mrsr/volume.hpp"

#include <json.hpp>
#include <fstream>

namespace {

using namespace mrsr;

struct GlobalOpts {
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 1;
    bool verbose = false;
};

void log(const GlobalOpts& g, const std::string& msg) {
    if (g.verbose) std::cerr << "[mrsr] " << msg << "\n";
}

void check_distinct_paths(const std::vector<std::filesystem::path>& inputs,
                          const std::vector<std::filesystem::path>& outputs) {
    std::set<std::string> outs;
    for (const auto& o : outputs) {
        if (!outs.insert(o.string()).second)
            throw ValidationError("output path repeated: " + o.string());
        for (const auto& i : inputs)
            if (o == i)
                throw ValidationError("output path collides with input: " +
                                      o.string());
    }
}

T2Options parse_range(const std::string& range) {
    T2Options opts;
    const auto colon = range.find(':');
    if (colon == std::string::npos)
        throw ValidationError("T2 range must look like lo:hi (ms)");
    try {
        opts.t2_min_ms = std::stod(range.substr(0, colon));
        opts.t2_max_ms = std::stod(range.substr(colon + 1));
    } catch (const std::exception&) {
        throw ValidationError("non-numeric T2 range: " + range);
    }
    opts.validate();
    return opts;
}

int run(int argc, char** argv) {
    CLI::App app{"mrsr: through-plane super-resolution and T2 mapping toolkit"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "Seed for stochastic steps")
        ->each([&](const std::string&) { g.seed_given = true; });
    app.add_option("--threads", g.threads, "Worker thread cap (1 = bitwise deterministic)")
        ->check(CLI::PositiveNumber);
    app.add_flag("--verbose", g.verbose, "Log pipeline stages to stderr");

    // ---- phantom ----------------------------------------------------------
    auto* cmd_phantom = app.add_subcommand("phantom", "Generate a synthetic dual-echo volume");
    std::string ph_spec, ph_scan, ph_out, ph_truth;
    cmd_phantom->add_option("--spec", ph_spec, "Phantom spec JSON (omit for the default phantom)");
    cmd_phantom->add_option("--scan", ph_scan, "Scan parameter JSON");
    cmd_phantom->add_option("--out", ph_out, "Output MRSV path")->required();
    cmd_phantom->add_option("--truth", ph_truth, "Ground-truth T2 map MRSV path");
    cmd_phantom->callback([&] {
        PhantomSpec spec = ph_spec.empty() ? default_phantom_spec()
                                           : load_phantom_spec(ph_spec);
        if (g.seed_given) spec.seed = g.seed;
        const ScanParams scan = ph_scan.empty() ? ScanParams{} : ScanParams::load(ph_scan);
        std::vector<std::filesystem::path> outs = {ph_out};
        if (!ph_truth.empty()) outs.push_back(ph_truth);
        check_distinct_paths({ph_spec, ph_scan}, outs);
        log(g, "rasterizing phantom");
        auto [vol, truth] = generate_phantom(spec, scan);
        save_volume(vol, ph_out);
        scan.save(std::filesystem::path(ph_out).replace_extension(".scan.json"));
        if (!ph_truth.empty()) save_t2_map(truth, ph_truth);
    });

    // ---- degrade ----------------------------------------------------------
    auto* cmd_degrade = app.add_subcommand("degrade", "Simulate thick-slice acquisition along z");
    std::string dg_in, dg_out;
    int dg_factor = 2;
    cmd_degrade->add_option("--in", dg_in, "Input MRSV")->required();
    cmd_degrade->add_option("--out", dg_out, "Output MRSV")->required();
    cmd_degrade->add_option("--factor", dg_factor, "Slice thickening factor")
        ->check(CLI::Range(2, 16));
    cmd_degrade->callback([&] {
        check_distinct_paths({dg_in}, {dg_out});
        log(g, "anti-alias filter + decimate");
        save_volume(degrade_slices(load_volume(dg_in), dg_factor), dg_out);
    });

    // ---- upsample ---------------------------------------------------------
    auto* cmd_upsample = app.add_subcommand("upsample", "Interpolate along z (baselines)");
    std::string up_in, up_out, up_method = "tci";
    int up_factor = 2;
    cmd_upsample->add_option("--method", up_method, "tci | fourier")
        ->check(CLI::IsMember({"tci", "fourier"}));
    cmd_upsample->add_option("--factor", up_factor, "Upsampling factor")
        ->check(CLI::Range(1, 16));
    cmd_upsample->add_option("--in", up_in, "Input MRSV")->required();
    cmd_upsample->add_option("--out", up_out, "Output MRSV")->required();
    cmd_upsample->callback([&] {
        check_distinct_paths({up_in}, {up_out});
        const MultiEchoVolume vol = load_volume(up_in);
        log(g, "upsampling with " + up_method);
        save_volume(up_method == "tci" ? tricubic_upsample(vol, up_factor)
                                       : fourier_upsample(vol, up_factor),
                    up_out);
    });

    // ---- train ------------------------------------------------------------
    auto* cmd_train = app.add_subcommand("train", "Train the residual network");
    std::vector<std::string> tr_lr, tr_hr;
    std::string tr_out, tr_history, tr_init;
    TrainConfig tr_cfg;
    std::uint32_t tr_layers = 20, tr_features = 64, tr_patch = 32, tr_stride = 16;
    cmd_train->add_option("--lr-vol", tr_lr, "Network input volume(s), on the target grid")
        ->required();
    cmd_train->add_option("--hr-vol", tr_hr, "Target volume(s)")->required();
    cmd_train->add_option("--epochs", tr_cfg.epochs)->check(CLI::PositiveNumber);
    cmd_train->add_option("--batch", tr_cfg.batch)->check(CLI::PositiveNumber);
    cmd_train->add_option("--lr", tr_cfg.lr, "Learning rate");
    cmd_train->add_option("--layers", tr_layers)->check(CLI::Range(2u, 64u));
    cmd_train->add_option("--features", tr_features)->check(CLI::PositiveNumber);
    cmd_train->add_option("--patch", tr_patch)->check(CLI::PositiveNumber);
    cmd_train->add_option("--stride", tr_stride)->check(CLI::PositiveNumber);
    cmd_train->add_option("--init", tr_init, "Start from existing weights instead of a fresh net");
    cmd_train->add_option("--out", tr_out, "Trained weights path")->required();
    cmd_train->add_option("--history", tr_history, "Per-step loss CSV");
    cmd_train->callback([&] {
        if (tr_lr.size() != tr_hr.size())
            throw ValidationError("--lr-vol and --hr-vol counts must match");
        std::vector<std::filesystem::path> ins(tr_lr.begin(), tr_lr.end());
        ins.insert(ins.end(), tr_hr.begin(), tr_hr.end());
        std::vector<std::filesystem::path> outs = {tr_out};
        if (!tr_history.empty()) outs.push_back(tr_history);
        check_distinct_paths(ins, outs);

        std::vector<MultiEchoVolume> lr_vols, hr_vols;
        for (const auto& p : tr_lr) lr_vols.push_back(load_volume(p));
        for (const auto& p : tr_hr) hr_vols.push_back(load_volume(p));

        tr_cfg.seed = g.seed;
        tr_cfg.threads = g.threads;
        Network net = tr_init.empty()
                          ? init_network(lr_vols[0].echoes(), lr_vols[0].echoes(),
                                         tr_layers, tr_features, g.seed)
                          : load_weights(tr_init);
        log(g, "training on " + std::to_string(lr_vols.size()) + " volume pair(s)");
        auto [trained, history] =
            train_on_volumes(std::move(net), lr_vols, hr_vols, tr_cfg, tr_patch, tr_stride);
        save_weights(trained, tr_out);
        if (!tr_history.empty()) save_history_csv(history, tr_history);
        log(g, "final epoch loss " + std::to_string(history.epoch_loss.back()));
    });

    // ---- transfer-init ----------------------------------------------------
    auto* cmd_transfer = app.add_subcommand(
        "transfer-init", "Widen a single-channel checkpoint to dual-echo");
    std::string tf_in, tf_out;
    cmd_transfer->add_option("--in", tf_in, "Single-channel weights")->required();
    cmd_transfer->add_option("--out", tf_out, "Dual-channel weights")->required();
    cmd_transfer->callback([&] {
        check_distinct_paths({tf_in}, {tf_out});
        save_weights(surgery_expand(load_weights(tf_in)), tf_out);
    });

    // ---- infer ------------------------------------------------------------
    auto* cmd_infer = app.add_subcommand("infer", "Apply the network to a volume");
    std::string in_in, in_weights, in_out;
    InferOptions in_opts;
    cmd_infer->add_option("--in", in_in, "Input MRSV, already on the target grid")->required();
    cmd_infer->add_option("--weights", in_weights, "Weights file")->required();
    cmd_infer->add_option("--out", in_out, "Output MRSV")->required();
    cmd_infer->add_option("--patch", in_opts.patch)->check(CLI::PositiveNumber);
    cmd_infer->add_option("--stride", in_opts.stride)->check(CLI::PositiveNumber);
    cmd_infer->callback([&] {
        check_distinct_paths({in_in, in_weights}, {in_out});
        in_opts.threads = g.threads;
        log(g, "patch-based inference");
        save_volume(infer_volume(load_weights(in_weights), load_volume(in_in), in_opts),
                    in_out);
    });

    // ---- t2map ------------------------------------------------------------
    auto* cmd_t2 = app.add_subcommand("t2map", "Analytic T2 map from a dual-echo volume");
    std::string t2_in, t2_scan, t2_out, t2_range = "0:100";
    cmd_t2->add_option("--in", t2_in, "Dual-echo MRSV")->required();
    cmd_t2->add_option("--scan", t2_scan, "Scan parameter JSON")->required();
    cmd_t2->add_option("--out", t2_out, "T2 map MRSV (mask goes to <out>.mask.mrsv)")
        ->required();
    cmd_t2->add_option("--range", t2_range, "Valid range lo:hi in ms");
    cmd_t2->callback([&] {
        check_distinct_paths({t2_in, t2_scan}, {t2_out});
        const T2Options opts = parse_range(t2_range);
        save_t2_map(estimate_t2(load_volume(t2_in), ScanParams::load(t2_scan), opts),
                    t2_out);
    });

    // ---- evaluate ---------------------------------------------------------
    auto* cmd_eval = app.add_subcommand("evaluate", "Image-quality metrics per echo");
    std::string ev_truth, ev_test, ev_report, ev_metrics = "ssim,psnr,rmse";
    bool ev_per_slice = false, ev_clamp = false;
    cmd_eval->add_option("--truth", ev_truth, "Reference MRSV")->required();
    cmd_eval->add_option("--test", ev_test, "Volume under test")->required();
    cmd_eval->add_option("--metrics", ev_metrics, "Comma list of ssim,psnr,rmse");
    cmd_eval->add_flag("--per-slice", ev_per_slice, "SSIM windows restricted to each z slice");
    cmd_eval->add_flag("--clamp", ev_clamp,
                       "Clamp both volumes into [0,1] before scoring (SSIM domain)");
    cmd_eval->add_option("--report", ev_report, "Report JSON path")->required();
    cmd_eval->callback([&] {
        check_distinct_paths({ev_truth, ev_test}, {ev_report});
        std::set<std::string> wanted;
        std::stringstream ss(ev_metrics);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item != "ssim" && item != "psnr" && item != "rmse")
                throw ValidationError("unknown metric: " + item);
            wanted.insert(item);
        }
        if (wanted.empty()) throw ValidationError("no metrics selected");

        MultiEchoVolume truth = load_volume(ev_truth);
        MultiEchoVolume test = load_volume(ev_test);
        if (!(truth.dims() == test.dims()) || truth.echoes() != test.echoes())
            throw ValidationError("truth and test volumes must be congruent");
        if (ev_clamp) {
            for (double& v : truth.data()) v = std::clamp(v, 0.0, 1.0);
            for (double& v : test.data()) v = std::clamp(v, 0.0, 1.0);
        }

        nlohmann::json report;
        for (std::uint32_t e = 0; e < truth.echoes(); ++e) {
            const std::string label = "S" + std::to_string(e + 1);
            if (wanted.count("ssim")) {
                SsimOptions opts;
                opts.per_slice = ev_per_slice;
                report["ssim"][label] = ssim(truth, test, e, opts);
            }
            if (wanted.count("psnr")) {
                const double p = psnr(test, truth, e);
                if (std::isinf(p))
                    report["psnr_db"][label] = "inf";
                else
                    report["psnr_db"][label] = p;
            }
            if (wanted.count("rmse")) {
                const double r = rmse(truth, test, e);
                report["rmse"][label] = r;
                report["rmse_e3"][label] = r * 1e3;
            }
        }
        const auto tmp = std::filesystem::path(ev_report + ".tmp");
        {
            std::ofstream out(tmp, std::ios::trunc);
            if (!out) throw ValidationError("cannot write report: " + ev_report);
            out << report.dump(2) << "\n";
        }
        std::filesystem::rename(tmp, ev_report);
    });

    // ---- agree ------------------------------------------------------------
    auto* cmd_agree = app.add_subcommand("agree", "Agreement statistics from a pairs CSV");
    std::string ag_pairs, ag_report;
    cmd_agree->add_option("--pairs", ag_pairs, "CSV: subject,ground_truth_ms,method_ms")
        ->required();
    cmd_agree->add_option("--report", ag_report, "Report JSON path")->required();
    cmd_agree->callback([&] {
        check_distinct_paths({ag_pairs}, {ag_report});
        write_agreement_report_json(agreement_report(load_pairs_csv(ag_pairs)),
                                    ag_report);
    });

    // ---- cohort1 ----------------------------------------------------------
    auto* cmd_c1 = app.add_subcommand(
        "cohort1", "Image-quality experiment: degrade, restore, score");
    std::string c1_gt, c1_weights, c1_out;
    Cohort1Options c1_opts;
    cmd_c1->add_option("--gt", c1_gt, "Ground-truth dual-echo MRSV")->required();
    cmd_c1->add_option("--weights", c1_weights, "Trained weights")->required();
    cmd_c1->add_option("--out-dir", c1_out, "Output directory")->required();
    cmd_c1->add_option("--factor", c1_opts.factor)->check(CLI::Range(2, 16));
    cmd_c1->callback([&] {
        c1_opts.threads = g.threads;
        log(g, "cohort1: degrade + tci/fi/network + metrics");
        run_cohort1(c1_gt, c1_weights, c1_out, c1_opts);
    });

    // ---- cohort2 ----------------------------------------------------------
    auto* cmd_c2 = app.add_subcommand(
        "cohort2", "T2 agreement experiment across subjects and methods");
    std::vector<std::string> c2_gt, c2_methods;
    std::string c2_scan, c2_roi, c2_out, c2_range = "0:100";
    cmd_c2->add_option("--gt-thick", c2_gt, "Ground-truth volume per subject")->required();
    cmd_c2->add_option("--method", c2_methods,
                       "name:vol1,vol2,... aligned with the subject list (repeatable)")
        ->required();
    cmd_c2->add_option("--scan", c2_scan, "Scan parameter JSON")->required();
    cmd_c2->add_option("--roi", c2_roi, "ROI mask MRSV")->required();
    cmd_c2->add_option("--range", c2_range, "Valid T2 range lo:hi in ms");
    cmd_c2->add_option("--out", c2_out, "Report JSON path")->required();
    cmd_c2->callback([&] {
        const T2Options t2_opts = parse_range(c2_range);
        std::vector<std::filesystem::path> gt_paths(c2_gt.begin(), c2_gt.end());
        std::vector<std::pair<std::string, std::vector<std::filesystem::path>>> methods;
        for (const std::string& m : c2_methods) {
            const auto colon = m.find(':');
            if (colon == std::string::npos || colon == 0)
                throw ValidationError("--method must look like name:vol1,vol2,...");
            std::vector<std::filesystem::path> paths;
            std::stringstream ss(m.substr(colon + 1));
            std::string p;
            while (std::getline(ss, p, ',')) paths.emplace_back(p);
            methods.emplace_back(m.substr(0, colon), std::move(paths));
        }
        std::vector<std::filesystem::path> ins = gt_paths;
        ins.emplace_back(c2_scan);
        ins.emplace_back(c2_roi);
        check_distinct_paths(ins, {c2_out});

        const ScanParams scan = ScanParams::load(c2_scan);
        const RoiMask roi = load_roi_mask(c2_roi);
        log(g, "cohort2: " + std::to_string(gt_paths.size()) + " subject(s)");
        write_cohort2_report_json(
            run_cohort2(gt_paths, methods, scan, roi, t2_opts), c2_out);
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const mrsr::ComputeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const mrsr::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
