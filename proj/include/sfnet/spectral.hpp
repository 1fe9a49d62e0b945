#pragma once

#include <limits>
#include <utility>

#include "sfnet/tensor.hpp"

namespace sfnet {

enum class SpectrumAxes { Spatial, Channel };

// Planar complex spectrum produced by the FFT ops. `centered` tracks whether
// fftshift has been applied; ops that care about frequency layout check it.
struct ComplexSpectrum {
    Tensor real, imag;
    bool centered = false;
    SpectrumAxes axes = SpectrumAxes::Spatial;
    int orig_channels = 0;  // Channel spectra: channel count before padding
};

// High-pass mask geometry. `phi` is the zeroed-coefficient fraction and is
// exactly 4/scale^2 by construction; the realized fraction on a concrete
// grid uses half-width floor(extent/scale) per axis and stays within
// 2*(H+W)/(H*W) of phi.
struct HighPassSpec {
    int height = 0;
    int width = 0;
    double scale = 0.0;
    double phi = 0.0;

    // 2-D spatial mask over an (height x width) centered spectrum.
    static HighPassSpec make(int height, int width, double scale);
    // 1-D channel-axis mask over a padded channel length.
    static HighPassSpec for_length(int len, double scale);

    bool is_1d() const { return height == 1; }
};

// 2-D FFT over the trailing spatial axes of a rank-2 (H,W) or rank-4
// (N,C,H,W) real tensor. Unnormalized forward; extents must be powers of
// two (callers crop/resize upstream). Differentiable.
ComplexSpectrum fft2(const Tensor& x);

// Normalized inverse returning the real part. The largest |imaginary|
// residue is recorded (see last_ifft_residue) and values above residue_tol
// throw. Conjugate-symmetric spectra land well below 1e-5; the exact-phi
// half-open mask breaks conjugate symmetry, so the internal hfri/fcl
// pipelines pass an infinite tolerance and keep the real projection.
Tensor ifft2(const ComplexSpectrum& s,
             float residue_tol = 1e-3f);

float last_ifft_residue();

// Move DC to the center / back. The centered flag must flip (shifting an
// already-centered spectrum throws). Power-of-two extents make the two index
// permutations identical, but the flag keeps usage honest.
ComplexSpectrum fftshift(const ComplexSpectrum& s);
ComplexSpectrum ifftshift(const ComplexSpectrum& s);

// Zeroes the centered low-frequency block [c-b, c+b) per axis,
// b = floor(extent/scale). Requires a centered spectrum whose extents match
// the spec. Idempotent bit-for-bit. Differentiable (mask backward = mask).
ComplexSpectrum high_pass(const ComplexSpectrum& s, const HighPassSpec& spec);

// High-frequency residual image: ifft2(ifftshift(high_pass(fftshift(fft2(x))))).
// x is a rank-4 batch whose spatial extents match the spec. The composed map
// is linear and symmetric, so its JVP and VJP coincide with the map itself.
Tensor hfri(const Tensor& x, const HighPassSpec& spec);

// Amplitude/phase decomposition with guarded gradients: coefficients with
// amplitude < 1e-8 contribute zero gradient (atan2 is singular there).
std::pair<Tensor, Tensor> amp_phase(const ComplexSpectrum& s);
ComplexSpectrum recombine(const Tensor& amp, const Tensor& phase,
                          bool centered, SpectrumAxes axes,
                          int orig_channels = 0);

// 1-D FFT along the channel axis of a rank-4 tensor, zero-padded to the next
// power of two. The inverse truncates back to out_channels and keeps the
// real part. Differentiable.
ComplexSpectrum fft_channel(const Tensor& x);
Tensor ifft_channel(const ComplexSpectrum& s, int out_channels,
                    float residue_tol =
                        std::numeric_limits<float>::infinity());

// Orthonormal type-II 2-D DCT of a rank-2 plane or rank-4 batch. Computed in
// double via the basis-matrix product. Not differentiable (analysis only).
Tensor dct2(const Tensor& x);

int next_pow2(int n);

}  // namespace sfnet
