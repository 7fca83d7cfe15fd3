#include "mrsr/resample.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include <fftw3.h>

#include "reflect.hpp"

namespace mrsr {

namespace {

using detail::reflect_index;

double sinc(double x) {
    if (x == 0.0) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

void check_factor(int factor, int min_factor) {
    if (factor < min_factor)
        throw ValidationError("resampling factor must be >= " +
                              std::to_string(min_factor));
}

// Gathers one z-line into a contiguous scratch buffer. x is the fastest
// axis in memory so z-lines are strided; the per-line copy keeps the
// filter and FFT kernels simple.
struct ZLines {
    explicit ZLines(const MultiEchoVolume& v) : vol(v) {
        nz = v.dims().nz;
        plane = std::size_t(v.dims().ny) * v.dims().nx;
    }
    void gather(std::uint32_t e, std::size_t xy, std::vector<double>& line) const {
        const double* base = vol.echo(e).data() + xy;
        line.resize(nz);
        for (std::size_t z = 0; z < nz; ++z)
            line[z] = base[z * plane];
    }
    const MultiEchoVolume& vol;
    std::size_t nz = 0;
    std::size_t plane = 0;
};

}  // namespace

void FilterTaps::validate() const {
    if (taps.empty() || taps.size() % 2 == 0)
        throw ValidationError("filter taps must have odd length (even order)");
    if (!(cutoff > 0.0 && cutoff < 0.5))
        throw ValidationError("filter cutoff must lie in (0, 0.5) cycles/sample");
    const std::size_t n = taps.size();
    for (std::size_t i = 0; i < n / 2; ++i)
        if (taps[i] != taps[n - 1 - i])
            throw ValidationError("filter taps must be exactly symmetric");
    double sum = 0.0;
    for (double t : taps) sum += t;
    if (std::abs(sum - 1.0) > 1e-9)
        throw ValidationError("filter taps must have unit DC gain");
}

FilterTaps design_lowpass(int order, double cutoff) {
    if (order < 2 || order % 2 != 0)
        throw ValidationError("filter order must be even and >= 2");
    if (!(cutoff > 0.0 && cutoff < 0.5))
        throw ValidationError("filter cutoff must lie in (0, 0.5) cycles/sample");

    const int n = order + 1;
    const int mid = order / 2;
    std::vector<double> taps(n);
    // Fill the lower half and mirror so symmetry is bitwise exact.
    for (int k = 0; k <= mid; ++k) {
        const double window =
            0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * k / order);
        const double ideal = 2.0 * cutoff * sinc(2.0 * cutoff * (k - mid));
        taps[k] = window * ideal;
        taps[order - k] = taps[k];
    }
    double sum = 0.0;
    for (int k = 0; k < mid; ++k) sum += 2.0 * taps[k];
    sum += taps[mid];
    for (double& t : taps) t /= sum;

    FilterTaps out{std::move(taps), cutoff};
    out.validate();
    return out;
}

MultiEchoVolume degrade_slices(const MultiEchoVolume& vol, int factor) {
    return degrade_slices(vol, factor, design_lowpass(48, 0.5 / factor));
}

MultiEchoVolume degrade_slices(const MultiEchoVolume& vol, int factor,
                               const FilterTaps& filter) {
    vol.validate();
    filter.validate();
    check_factor(factor, 2);
    const std::ptrdiff_t nz = vol.dims().nz;
    if (nz < 2)
        throw ValidationError("volume too small along z to filter (nz < 2)");

    const std::ptrdiff_t half = std::ptrdiff_t(filter.taps.size()) / 2;
    const std::uint32_t nz_out = (vol.dims().nz + factor - 1) / factor;
    Dims out_dims{vol.dims().nx, vol.dims().ny, nz_out};
    Spacing out_spacing = vol.spacing();
    out_spacing.sz = vol.spacing().sz * float(factor);
    MultiEchoVolume out(out_dims, out_spacing, vol.echoes());

    ZLines lines(vol);
    std::vector<double> line;
    const std::size_t plane = lines.plane;
    const std::size_t out_plane = plane;

    for (std::uint32_t e = 0; e < vol.echoes(); ++e) {
        double* out_base = out.echo(e).data();
        for (std::size_t xy = 0; xy < plane; ++xy) {
            lines.gather(e, xy, line);
            for (std::uint32_t zo = 0; zo < nz_out; ++zo) {
                const std::ptrdiff_t center = std::ptrdiff_t(zo) * factor;
                double acc = 0.0;
                for (std::ptrdiff_t k = -half; k <= half; ++k)
                    acc += filter.taps[std::size_t(k + half)] *
                           line[std::size_t(reflect_index(center + k, nz))];
                out_base[std::size_t(zo) * out_plane + xy] = acc;
            }
        }
    }
    return out;
}

namespace {

// Keys cubic convolution kernel, a = -0.5.
double cubic_kernel(double s) {
    constexpr double a = -0.5;
    s = std::abs(s);
    if (s < 1.0) return ((a + 2.0) * s - (a + 3.0)) * s * s + 1.0;
    if (s < 2.0) return (((s - 5.0) * s + 8.0) * s - 4.0) * a;
    return 0.0;
}

}  // namespace

MultiEchoVolume tricubic_upsample(const MultiEchoVolume& vol, int factor) {
    vol.validate();
    check_factor(factor, 1);
    const std::ptrdiff_t nz = vol.dims().nz;
    if (nz < 4)
        throw ValidationError("cubic interpolation along z requires nz >= 4");
    if (factor == 1) return vol;

    const std::uint32_t nz_out = vol.dims().nz * std::uint32_t(factor);
    Dims out_dims{vol.dims().nx, vol.dims().ny, nz_out};
    Spacing out_spacing = vol.spacing();
    out_spacing.sz = vol.spacing().sz / float(factor);
    MultiEchoVolume out(out_dims, out_spacing, vol.echoes());

    // Per output slice the four source taps and weights are shared by
    // every (x, y), so precompute them once.
    struct SliceTaps {
        std::size_t src[4];
        double w[4];
        bool exact;  // lands on an input sample
        std::size_t exact_src;
    };
    std::vector<SliceTaps> taps(nz_out);
    for (std::uint32_t zo = 0; zo < nz_out; ++zo) {
        const std::ptrdiff_t base = zo / factor;
        const int phase = int(zo % std::uint32_t(factor));
        SliceTaps st{};
        st.exact = (phase == 0);
        st.exact_src = std::size_t(base);
        const double frac = double(phase) / factor;
        for (int k = -1; k <= 2; ++k) {
            st.src[k + 1] = std::size_t(reflect_index(base + k, nz));
            st.w[k + 1] = cubic_kernel(frac - k);
        }
        taps[zo] = st;
    }

    const std::size_t plane = std::size_t(vol.dims().ny) * vol.dims().nx;
    for (std::uint32_t e = 0; e < vol.echoes(); ++e) {
        const double* in_base = vol.echo(e).data();
        double* out_base = out.echo(e).data();
        for (std::uint32_t zo = 0; zo < nz_out; ++zo) {
            const SliceTaps& st = taps[zo];
            double* dst = out_base + std::size_t(zo) * plane;
            if (st.exact) {
                const double* src = in_base + st.exact_src * plane;
                std::copy(src, src + plane, dst);
                continue;
            }
            const double* s0 = in_base + st.src[0] * plane;
            const double* s1 = in_base + st.src[1] * plane;
            const double* s2 = in_base + st.src[2] * plane;
            const double* s3 = in_base + st.src[3] * plane;
            for (std::size_t i = 0; i < plane; ++i)
                dst[i] = st.w[0] * s0[i] + st.w[1] * s1[i] + st.w[2] * s2[i] +
                         st.w[3] * s3[i];
        }
    }
    return out;
}

namespace {

// RAII holders for the FFTW plans used by fourier_upsample. Plans are
// bound to their buffers, so one pair per line length is reused across
// all (echo, x, y) lines.
struct FftwLine {
    FftwLine(int n, int sign)
        : n(n),
          in(fftw_alloc_complex(std::size_t(n))),
          out(fftw_alloc_complex(std::size_t(n))),
          plan(fftw_plan_dft_1d(n, in, out, sign, FFTW_ESTIMATE)) {}
    ~FftwLine() {
        fftw_destroy_plan(plan);
        fftw_free(in);
        fftw_free(out);
    }
    FftwLine(const FftwLine&) = delete;
    FftwLine& operator=(const FftwLine&) = delete;

    int n;
    fftw_complex* in;
    fftw_complex* out;
    fftw_plan plan;
};

}  // namespace

MultiEchoVolume fourier_upsample(const MultiEchoVolume& vol, int factor) {
    vol.validate();
    check_factor(factor, 1);
    if (factor == 1) return vol;

    const int n = int(vol.dims().nz);
    const int m = n * factor;
    const std::uint32_t nz_out = std::uint32_t(m);
    Dims out_dims{vol.dims().nx, vol.dims().ny, nz_out};
    Spacing out_spacing = vol.spacing();
    out_spacing.sz = vol.spacing().sz / float(factor);
    MultiEchoVolume out(out_dims, out_spacing, vol.echoes());

    FftwLine fwd(n, FFTW_FORWARD);
    FftwLine bwd(m, FFTW_BACKWARD);

    ZLines lines(vol);
    std::vector<double> line;
    const std::size_t plane = lines.plane;
    const double scale = 1.0 / n;  // unnormalized FFT pair, zero-pad gain folded in

    for (std::uint32_t e = 0; e < vol.echoes(); ++e) {
        double* out_base = out.echo(e).data();
        for (std::size_t xy = 0; xy < plane; ++xy) {
            lines.gather(e, xy, line);
            for (int z = 0; z < n; ++z) {
                fwd.in[z][0] = line[std::size_t(z)];
                fwd.in[z][1] = 0.0;
            }
            fftw_execute(fwd.plan);

            for (int k = 0; k < m; ++k)
                bwd.in[k][0] = bwd.in[k][1] = 0.0;
            const int half = n / 2;
            if (n % 2 == 0) {
                for (int k = 0; k < half; ++k) {
                    bwd.in[k][0] = fwd.out[k][0];
                    bwd.in[k][1] = fwd.out[k][1];
                }
                for (int k = 1; k < half; ++k) {
                    bwd.in[m - k][0] = fwd.out[n - k][0];
                    bwd.in[m - k][1] = fwd.out[n - k][1];
                }
                // Even length: split the Nyquist bin across +/- frequencies.
                bwd.in[half][0] = 0.5 * fwd.out[half][0];
                bwd.in[half][1] = 0.5 * fwd.out[half][1];
                bwd.in[m - half][0] = 0.5 * fwd.out[half][0];
                bwd.in[m - half][1] = 0.5 * fwd.out[half][1];
            } else {
                for (int k = 0; k <= half; ++k) {
                    bwd.in[k][0] = fwd.out[k][0];
                    bwd.in[k][1] = fwd.out[k][1];
                }
                for (int k = 1; k <= half; ++k) {
                    bwd.in[m - k][0] = fwd.out[n - k][0];
                    bwd.in[m - k][1] = fwd.out[n - k][1];
                }
            }
            fftw_execute(bwd.plan);

            for (int z = 0; z < m; ++z)
                out_base[std::size_t(z) * plane + xy] = bwd.out[z][0] * scale;
        }
    }
    return out;
}

}  // namespace mrsr
