#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mrsr/eval.hpp"
#include "mrsr/net.hpp"
#include "mrsr/patch.hpp"
#include "mrsr/quant.hpp"
#include "mrsr/train.hpp"
#include "mrsr/volume.hpp"

namespace mrsr {

struct InferOptions {
    std::uint32_t patch = 32;
    std::uint32_t stride = 16;
    int threads = 1;
};

/// Patch-based network application to a whole volume: normalize per echo
/// on the input's own range, run every grid patch through the network,
/// overlap-average, then undo the normalization. Volumes smaller than
/// one patch run through the network whole.
MultiEchoVolume infer_volume(const Network& net, const MultiEchoVolume& input,
                             const InferOptions& opts = {});

/// Build aligned input/target patch sets from volume pairs and train.
/// Inputs are normalized per echo on their own range; targets share the
/// matching input's record so the residual is pure detail.
std::pair<Network, TrainHistory> train_on_volumes(
    Network net, const std::vector<MultiEchoVolume>& inputs,
    const std::vector<MultiEchoVolume>& targets, const TrainConfig& cfg,
    std::uint32_t patch = 32, std::uint32_t stride = 16);

struct Cohort1Options {
    int factor = 2;
    int threads = 1;
    SsimOptions ssim;
};

struct Cohort1Result {
    // method name -> per-echo quality metrics, computed against the
    // normalized ground truth with outputs clamped to [0, 1]
    std::map<std::string, QualityReport> methods;
};

/// Image-quality experiment: degrade the ground truth along z, restore
/// with tricubic, Fourier, and the network, score each against the
/// original. Writes degraded.mrsv, tci.mrsv, fi.mrsv, mrsr.mrsv and
/// report.json into out_dir.
Cohort1Result run_cohort1(const std::filesystem::path& gt_path,
                          const std::filesystem::path& weights_path,
                          const std::filesystem::path& out_dir,
                          const Cohort1Options& opts = {});

struct Cohort2Result {
    std::size_t subjects = 0;
    std::map<std::string, AgreementReport> methods;
};

/// T2 agreement experiment: per subject, compare ROI mean T2 of each
/// method volume against the ground-truth volume, then aggregate CV%,
/// difference, CCC and the U test per method.
Cohort2Result run_cohort2(
    const std::vector<std::filesystem::path>& gt_paths,
    const std::vector<std::pair<std::string, std::vector<std::filesystem::path>>>&
        method_paths,
    const ScanParams& params, const RoiMask& roi, const T2Options& t2_opts = {});

// Report serialization (JSON written via tmp + rename, never partial).
void write_quality_report_json(const QualityReport& report,
                               const std::filesystem::path& path);
void write_cohort1_report_json(const Cohort1Result& result,
                               const std::filesystem::path& path);
void write_agreement_report_json(const AgreementReport& report,
                                 const std::filesystem::path& path);
void write_cohort2_report_json(const Cohort2Result& result,
                               const std::filesystem::path& path);

/// pairs.csv rows: subject,ground_truth_ms,method_ms (header required).
std::vector<PairSample> load_pairs_csv(const std::filesystem::path& path);

}  // namespace mrsr
