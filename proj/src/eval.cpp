#include "mrsr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "reflect.hpp"

namespace mrsr {

namespace {

using detail::reflect_index;

void check_congruent(const MultiEchoVolume& a, const MultiEchoVolume& b,
                     std::uint32_t echo) {
    if (!(a.dims() == b.dims()) || a.echoes() != b.echoes())
        throw ValidationError("metric inputs must have congruent shapes");
    if (echo >= a.echoes())
        throw ValidationError("echo index out of range");
}

double mse(const MultiEchoVolume& a, const MultiEchoVolume& b, std::uint32_t echo) {
    const auto sa = a.echo(echo);
    const auto sb = b.echo(echo);
    double acc = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i) {
        const double d = sa[i] - sb[i];
        acc += d * d;
    }
    return acc / double(sa.size());
}

std::vector<double> gaussian_taps(int window, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(window), 0.0);
    const double c = (window - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < window; ++i) {
        w[std::size_t(i)] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
        sum += w[std::size_t(i)];
    }
    for (double& v : w) v /= sum;
    return w;
}

// Separable weighted local mean with reflect boundaries. axis: 0=x 1=y 2=z.
void filter_axis(std::vector<double>& f, Dims d, std::span<const double> taps,
                 int axis) {
    const int half = int(taps.size()) / 2;
    const std::ptrdiff_t n[3] = {std::ptrdiff_t(d.nx), std::ptrdiff_t(d.ny),
                                 std::ptrdiff_t(d.nz)};
    const std::ptrdiff_t stride[3] = {1, std::ptrdiff_t(d.nx),
                                      std::ptrdiff_t(d.nx) * d.ny};
    const std::ptrdiff_t len = n[axis];
    const std::ptrdiff_t s = stride[axis];
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;

    std::vector<double> line(static_cast<std::size_t>(len), 0.0);
    for (std::ptrdiff_t j = 0; j < n[a1]; ++j)
        for (std::ptrdiff_t k = 0; k < n[a2]; ++k) {
            double* base = f.data() + j * stride[a1] + k * stride[a2];
            for (std::ptrdiff_t i = 0; i < len; ++i)
                line[std::size_t(i)] = base[i * s];
            for (std::ptrdiff_t i = 0; i < len; ++i) {
                double acc = 0.0;
                for (int t = -half; t <= half; ++t)
                    acc += taps[std::size_t(t + half)] *
                           line[std::size_t(reflect_index(i + t, len))];
                base[i * s] = acc;
            }
        }
}

std::vector<double> local_mean(std::span<const double> field, Dims d,
                               std::span<const double> taps, bool per_slice) {
    std::vector<double> out(field.begin(), field.end());
    filter_axis(out, d, taps, 0);
    filter_axis(out, d, taps, 1);
    if (!per_slice) filter_axis(out, d, taps, 2);
    return out;
}

}  // namespace

double rmse(const MultiEchoVolume& a, const MultiEchoVolume& b, std::uint32_t echo) {
    check_congruent(a, b, echo);
    return std::sqrt(mse(a, b, echo));
}

double psnr(const MultiEchoVolume& a, const MultiEchoVolume& reference,
            std::uint32_t echo, double peak) {
    check_congruent(a, reference, echo);
    if (!(peak > 0))
        throw ValidationError("psnr peak must be > 0");
    const double m = mse(a, reference, echo);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / m);
}

double ssim(const MultiEchoVolume& a, const MultiEchoVolume& b, std::uint32_t echo,
            const SsimOptions& opts) {
    check_congruent(a, b, echo);
    if (opts.window < 1 || opts.window % 2 == 0)
        throw ValidationError("ssim window must be odd and >= 1");
    if (!(opts.sigma > 0) || !(opts.dynamic_range > 0))
        throw ValidationError("ssim sigma and dynamic range must be > 0");

    const auto sa = a.echo(echo);
    const auto sb = b.echo(echo);
    for (std::size_t i = 0; i < sa.size(); ++i)
        if (sa[i] < 0.0 || sa[i] > 1.0 || sb[i] < 0.0 || sb[i] > 1.0)
            throw ValidationError("ssim inputs must lie in [0, 1]");

    const Dims d = a.dims();
    const auto taps = gaussian_taps(opts.window, opts.sigma);

    std::vector<double> aa(sa.size()), bb(sa.size()), ab(sa.size());
    for (std::size_t i = 0; i < sa.size(); ++i) {
        aa[i] = sa[i] * sa[i];
        bb[i] = sb[i] * sb[i];
        ab[i] = sa[i] * sb[i];
    }
    const auto mu_a = local_mean(sa, d, taps, opts.per_slice);
    const auto mu_b = local_mean(sb, d, taps, opts.per_slice);
    const auto m_aa = local_mean(aa, d, taps, opts.per_slice);
    const auto m_bb = local_mean(bb, d, taps, opts.per_slice);
    const auto m_ab = local_mean(ab, d, taps, opts.per_slice);

    const double c1 = opts.k1 * opts.dynamic_range * opts.k1 * opts.dynamic_range;
    const double c2 = opts.k2 * opts.dynamic_range * opts.k2 * opts.dynamic_range;

    double acc = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i) {
        const double va = m_aa[i] - mu_a[i] * mu_a[i];
        const double vb = m_bb[i] - mu_b[i] * mu_b[i];
        const double cov = m_ab[i] - mu_a[i] * mu_b[i];
        const double num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
        const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2);
        acc += num / den;
    }
    return acc / double(sa.size());
}

QualityReport quality_report(const MultiEchoVolume& truth,
                             const MultiEchoVolume& test,
                             const SsimOptions& opts) {
    if (!(truth.dims() == test.dims()) || truth.echoes() != test.echoes())
        throw ValidationError("quality report inputs must have congruent shapes");
    QualityReport report;
    for (std::uint32_t e = 0; e < truth.echoes(); ++e) {
        QualityEntry entry;
        entry.echo_label = "S" + std::to_string(e + 1);
        entry.ssim = ssim(truth, test, e, opts);
        entry.psnr_db = psnr(test, truth, e);
        entry.rmse = rmse(truth, test, e);
        report.per_echo.push_back(std::move(entry));
    }
    return report;
}

namespace {

SummaryStat summarize(std::span<const double> values) {
    SummaryStat s;
    const std::size_t n = values.size();
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / double(n);
    if (n > 1) {
        double acc = 0.0;
        for (double v : values) acc += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(acc / double(n - 1));
    }
    return s;
}

}  // namespace

SummaryStat cv_percent(std::span<const PairSample> pairs) {
    if (pairs.empty())
        throw ValidationError("cv_percent requires at least one pair");
    std::vector<double> cvs;
    cvs.reserve(pairs.size());
    for (const auto& [g, m] : pairs) {
        if (!(g > 0) || !(m > 0))
            throw ValidationError("cv_percent requires strictly positive values");
        cvs.push_back(100.0 * (std::abs(m - g) / std::sqrt(2.0)) / ((m + g) / 2.0));
    }
    return summarize(cvs);
}

SummaryStat mean_difference(std::span<const PairSample> pairs) {
    if (pairs.empty())
        throw ValidationError("mean_difference requires at least one pair");
    std::vector<double> diffs;
    diffs.reserve(pairs.size());
    for (const auto& [g, m] : pairs) diffs.push_back(std::abs(m - g));
    return summarize(diffs);
}

double ccc(std::span<const PairSample> pairs) {
    if (pairs.size() < 2)
        throw ValidationError("ccc requires at least two pairs");
    const double n = double(pairs.size());
    double mg = 0.0, mm = 0.0;
    for (const auto& [g, m] : pairs) {
        mg += g;
        mm += m;
    }
    mg /= n;
    mm /= n;
    double vg = 0.0, vm = 0.0, cov = 0.0;
    for (const auto& [g, m] : pairs) {
        vg += (g - mg) * (g - mg);
        vm += (m - mm) * (m - mm);
        cov += (g - mg) * (m - mm);
    }
    vg /= n;
    vm /= n;
    cov /= n;
    const double den = vg + vm + (mg - mm) * (mg - mm);
    if (den == 0.0)
        throw ValidationError("ccc undefined: both lists constant with equal means");
    return 2.0 * cov / den;
}

namespace {

// Midranks (1-based, ties averaged) of the pooled sample.
std::vector<double> midranks(std::vector<double> pooled) {
    const std::size_t n = pooled.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && pooled[idx[j + 1]] == pooled[idx[i]]) ++j;
        const double r = (double(i) + double(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double rank_sum_u(std::span<const double> ranks_x, std::size_t n) {
    double rx = 0.0;
    for (double r : ranks_x) rx += r;
    return rx - double(n) * double(n + 1) / 2.0;
}

double erfc_p(double z) {
    return std::erfc(z / std::sqrt(2.0));
}

// Distribution of U over every group assignment, by depth-first choice
// of which pooled ranks belong to the first sample.
void enumerate_u(std::span<const double> sorted_ranks, std::size_t pick_from,
                 std::size_t remaining, double rank_acc, std::vector<double>& us) {
    if (remaining == 0) {
        us.push_back(rank_acc);
        return;
    }
    for (std::size_t i = pick_from; i + remaining <= sorted_ranks.size(); ++i)
        enumerate_u(sorted_ranks, i + 1, remaining - 1, rank_acc + sorted_ranks[i], us);
}

}  // namespace

UTestResult mann_whitney_u(std::span<const double> x, std::span<const double> y,
                           UMode mode) {
    if (x.empty() || y.empty())
        throw ValidationError("mann_whitney_u requires non-empty samples");
    const std::size_t n = x.size(), m = y.size(), total = n + m;

    std::vector<double> pooled(x.begin(), x.end());
    pooled.insert(pooled.end(), y.begin(), y.end());
    const auto ranks = midranks(pooled);
    const double u_obs =
        rank_sum_u(std::span<const double>(ranks.data(), n), n);
    const double nm = double(n) * double(m);

    UTestResult result;
    result.u = u_obs;

    if (mode == UMode::exact) {
        if (total > 16)
            throw ValidationError("exact mann_whitney_u limited to n + m <= 16");
        std::vector<double> sorted_ranks = ranks;
        std::sort(sorted_ranks.begin(), sorted_ranks.end());
        std::vector<double> rank_sums;
        enumerate_u(sorted_ranks, 0, n, 0.0, rank_sums);

        const double offset = double(n) * double(n + 1) / 2.0;
        const double lo = std::min(u_obs, nm - u_obs);
        const double hi = std::max(u_obs, nm - u_obs);
        std::size_t count = 0;
        for (double rs : rank_sums) {
            const double u = rs - offset;
            if (u <= lo + 1e-9 || u >= hi - 1e-9) ++count;
        }
        result.p = std::min(1.0, double(count) / double(rank_sums.size()));
    } else {
        // tie-corrected variance
        std::vector<double> sorted = pooled;
        std::sort(sorted.begin(), sorted.end());
        double tie_term = 0.0;
        std::size_t i = 0;
        while (i < total) {
            std::size_t j = i;
            while (j + 1 < total && sorted[j + 1] == sorted[i]) ++j;
            const double t = double(j - i + 1);
            tie_term += t * t * t - t;
            i = j + 1;
        }
        const double var =
            nm / 12.0 *
            (double(total + 1) - tie_term / (double(total) * double(total - 1)));
        if (var <= 0.0) {
            result.p = 1.0;
            return result;
        }
        const double z = std::max(0.0, std::abs(u_obs - nm / 2.0) - 0.5) / std::sqrt(var);
        result.p = std::min(1.0, erfc_p(z));
    }
    return result;
}

AgreementReport agreement_report(std::span<const PairSample> pairs) {
    if (pairs.size() < 2)
        throw ValidationError("agreement report requires at least two pairs");
    AgreementReport rep;
    rep.pairs.assign(pairs.begin(), pairs.end());

    std::vector<double> g, m;
    for (const auto& [gv, mv] : pairs) {
        g.push_back(gv);
        m.push_back(mv);
    }
    rep.method = [&] {
        SummaryStat s;
        double acc = 0.0;
        for (double v : m) acc += v;
        s.mean = acc / double(m.size());
        double var = 0.0;
        for (double v : m) var += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(var / double(m.size() - 1));
        return s;
    }();
    rep.cv = cv_percent(pairs);
    rep.difference = mean_difference(pairs);
    rep.ccc = ccc(pairs);
    rep.utest = mann_whitney_u(g, m,
                               g.size() + m.size() <= 16 ? UMode::exact
                                                         : UMode::normal_approx);
    return rep;
}

}  // namespace mrsr
