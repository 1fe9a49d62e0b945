#pragma once

#include <cstdint>
#include <vector>

// Serial reference implementations: straightforward nested loops with no
// parallelism and double-precision accumulation. They exist as independent
// oracles for the test suite and as the baseline side of the kernel
// benchmark. Do not use them in the hot path.
namespace sfnet::ref {

using i64 = std::int64_t;

// C(m x n) = A(m x k) * B(k x n), classic triple loop.
void matmul(int m, int k, int n, const float* A, const float* B, float* C);

// Direct convolution, NCHW, floor output arithmetic.
void conv2d(const float* x, const float* w, const float* bias, float* y,
            int N, int C, int H, int W, int K, int kh, int kw, int stride,
            int pad);

void maxpool(const float* x, float* y, int N, int C, int H, int W, int win,
             int stride);

void global_avg_spatial(const float* x, float* y, int N, int C, int H, int W);
void global_max_spatial(const float* x, float* y, int N, int C, int H, int W);
void global_avg_channel(const float* x, float* y, int N, int C, int H, int W);
void global_max_channel(const float* x, float* y, int N, int C, int H, int W);

// Per-channel mean over (N, H, W) by direct summation.
void channel_mean(const float* x, float* mean, int N, int C, int H, int W);

// Unnormalized 2-D DFT by the O(N^4) double sum; works for any extent.
// x is a real (H x W) plane; out_re/out_im are (H x W).
void dft2(const float* x, double* out_re, double* out_im, int H, int W);

// Normalized inverse 2-D DFT of a complex (H x W) spectrum.
void idft2(const double* in_re, const double* in_im, double* out_re,
           double* out_im, int H, int W);

// Orthonormal type-II 2-D DCT by the direct double sum.
void dct2(const float* x, double* out, int H, int W);

// Elementwise oracles (plain scalar loops).
void add(const float* a, const float* b, float* y, i64 n);
void mul(const float* a, const float* b, float* y, i64 n);

// Expands a broadcastable operand to the full shape by explicit replication.
// shape/bshape are same-rank dims; bshape axes are either equal or 1.
std::vector<float> broadcast_expand(const float* b,
                                    const std::vector<int>& bshape,
                                    const std::vector<int>& shape);

}  // namespace sfnet::ref
