#pragma once

#include <span>
#include <utility>
#include <vector>

#include "mrsr/volume.hpp"

namespace mrsr {

/// Root mean square error over one echo of two congruent volumes.
double rmse(const MultiEchoVolume& a, const MultiEchoVolume& b, std::uint32_t echo);

/// Peak SNR in dB against a fixed peak intensity; +infinity when the
/// volumes agree exactly.
double psnr(const MultiEchoVolume& a, const MultiEchoVolume& reference,
            std::uint32_t echo, double peak = 1.0);

struct SsimOptions {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
    // true restricts the window to each z slice (11x11x1) instead of the
    // full 3D 11x11x11 neighborhood.
    bool per_slice = false;
};

/// Mean local structural similarity with a Gaussian window, inputs
/// required in [0, 1].
double ssim(const MultiEchoVolume& a, const MultiEchoVolume& b, std::uint32_t echo,
            const SsimOptions& opts = {});

struct QualityEntry {
    std::string echo_label;  // "S1", "S2", ...
    double ssim = 0.0;
    double psnr_db = 0.0;
    double rmse = 0.0;
};

struct QualityReport {
    std::vector<QualityEntry> per_echo;
};

QualityReport quality_report(const MultiEchoVolume& truth,
                             const MultiEchoVolume& test,
                             const SsimOptions& opts = {});

struct SummaryStat {
    double mean = 0.0;
    double sd = 0.0;  // sample (n-1); 0 by convention for a single value
};

using PairSample = std::pair<double, double>;  // (ground truth, method)

/// Duplicate-measurement coefficient of variation per pair,
/// 100 * (|m - g| / sqrt(2)) / ((m + g) / 2), summarized as mean +/- sd.
SummaryStat cv_percent(std::span<const PairSample> pairs);

/// Mean and sd of the absolute differences |m - g|.
SummaryStat mean_difference(std::span<const PairSample> pairs);

/// Lin's concordance correlation with population (1/n) moments.
double ccc(std::span<const PairSample> pairs);

enum class UMode { exact, normal_approx };

struct UTestResult {
    double u = 0.0;  // U statistic of the first sample, midrank ties
    double p = 1.0;  // two-sided
};

/// Rank-sum U test. Exact mode enumerates every group assignment
/// (allowed for n+m <= 16); the approximation is tie-corrected normal
/// with continuity correction.
UTestResult mann_whitney_u(std::span<const double> x, std::span<const double> y,
                           UMode mode);

struct AgreementReport {
    std::vector<PairSample> pairs;
    SummaryStat method;  // mean +/- sd of the method values
    SummaryStat cv;
    SummaryStat difference;
    double ccc = 0.0;
    UTestResult utest;
};

/// Full per-method agreement summary; picks exact U when n+m <= 16.
AgreementReport agreement_report(std::span<const PairSample> pairs);

}  // namespace mrsr
