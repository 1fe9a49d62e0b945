#pragma once

#include <cstdint>

// Parallel compute kernels. All loops parallelize over independent output
// elements with a fixed serial accumulation order per element, so results
// are bit-identical regardless of thread count.
//
// Convolution and pooling use floor output arithmetic:
//   OH = (H + 2*pad - kh) / stride + 1   (integer division)
namespace sfnet::kernels {

using i64 = std::int64_t;

// ---- GEMM ----------------------------------------------------------------
// C(m x n) = A(m x k) * B(k x n); when acc is false C is overwritten.
void gemm_nn(int m, int k, int n, const float* A, const float* B, float* C,
             bool acc = false);
// C(m x n) = A(m x k) * B(n x k)^T
void gemm_nt(int m, int k, int n, const float* A, const float* B, float* C,
             bool acc = false);
// C(m x n) = A(k x m)^T * B(k x n)
void gemm_tn(int m, int k, int n, const float* A, const float* B, float* C,
             bool acc = false);

// ---- Convolution (NCHW) ----------------------------------------------------
// x: (N,C,H,W), w: (K,C,kh,kw), bias: (K) or null, y: (N,K,OH,OW).
void conv2d_forward(const float* x, const float* w, const float* bias,
                    float* y, int N, int C, int H, int W, int K, int kh,
                    int kw, int stride, int pad);
void conv2d_backward_input(const float* gy, const float* w, float* gx, int N,
                           int C, int H, int W, int K, int kh, int kw,
                           int stride, int pad);
void conv2d_backward_weight(const float* x, const float* gy, float* gw, int N,
                            int C, int H, int W, int K, int kh, int kw,
                            int stride, int pad);
void conv2d_backward_bias(const float* gy, float* gb, int N, int K, int OH,
                          int OW);

// Unrolls one image (C,H,W) into (C*kh*kw, OH*OW) columns.
void im2col(const float* x, float* col, int C, int H, int W, int kh, int kw,
            int stride, int padh, int padw);

// ---- Max pooling -----------------------------------------------------------
// Ties resolve to the first window element in row-major order.
void maxpool_forward(const float* x, float* y, std::int32_t* argmax, int N,
                     int C, int H, int W, int win, int stride);
void maxpool_backward(const float* gy, const std::int32_t* argmax, float* gx,
                      int N, int C, int H, int W, int win, int stride);

// ---- Batch normalization ----------------------------------------------------
// Per-channel biased mean/variance accumulated in double.
void bn_stats(const float* x, int N, int C, int H, int W, float* mean,
              float* var);
void bn_forward(const float* x, const float* mean, const float* invstd,
                const float* gamma, const float* beta, float* y, int N, int C,
                int H, int W);
void bn_backward(const float* x, const float* gy, const float* mean,
                 const float* invstd, const float* gamma, float* gx,
                 float* ggamma, float* gbeta, int N, int C, int H, int W,
                 bool train_stats);

// ---- Global pooling ----------------------------------------------------------
// Spatial: (N,C,H,W) -> (N,C,1,1). Channel: (N,C,H,W) -> (N,1,H,W).
void global_avg_spatial(const float* x, float* y, int N, int C, int H, int W);
void global_max_spatial(const float* x, float* y, std::int32_t* argmax, int N,
                        int C, int H, int W);
void global_avg_channel(const float* x, float* y, int N, int C, int H, int W);
void global_max_channel(const float* x, float* y, std::int32_t* argmax, int N,
                        int C, int H, int W);

// ---- FFT ---------------------------------------------------------------------
// Radix-2 iterative FFT over one line of a planar complex array; len must be
// a power of two. Butterflies run in double internally. inverse applies the
// 1/len normalization.
void fft_line(float* re, float* im, int len, i64 stride, bool inverse);
bool is_pow2(int n);

// ---- Misc ---------------------------------------------------------------------
bool all_finite(const float* x, i64 n);
void fill(float* x, i64 n, float v);

}  // namespace sfnet::kernels
