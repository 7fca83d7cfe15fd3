#pragma once

#include <vector>

#include "mrsr/volume.hpp"

namespace mrsr {

/// Linear-phase FIR low-pass taps, order+1 coefficients normalized to unit
/// DC gain. taps[i] == taps[order-i] exactly.
struct FilterTaps {
    std::vector<double> taps;
    double cutoff = 0.25;  // cycles/sample, in (0, 0.5)

    void validate() const;
};

/// Hamming-windowed sinc design. Defaults match the slice-degradation
/// filter: order 48, cutoff 0.25 cycles/sample.
FilterTaps design_lowpass(int order = 48, double cutoff = 0.25);

/// Simulate a thicker-slice acquisition: zero-phase low-pass along z
/// (reflect-padded), then keep indices {0, factor, 2*factor, ...}.
/// Output nz' = ceil(nz / factor), spacing sz' = sz * factor.
/// The default filter is design_lowpass(48, 0.5 / factor).
MultiEchoVolume degrade_slices(const MultiEchoVolume& vol, int factor = 2);
MultiEchoVolume degrade_slices(const MultiEchoVolume& vol, int factor,
                               const FilterTaps& filter);

/// Keys cubic-convolution interpolation (a = -0.5) along z only.
/// Output nz' = nz * factor, spacing sz' = sz / factor; original samples
/// pass through exactly at fine index i * factor.
MultiEchoVolume tricubic_upsample(const MultiEchoVolume& vol, int factor);

/// Spectral zero-padding along z per (echo, x, y) line, with the Nyquist
/// bin split in half for even input lengths. Original samples pass
/// through within 1e-6 relative.
MultiEchoVolume fourier_upsample(const MultiEchoVolume& vol, int factor);

}  // namespace mrsr
