#include "sfnet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <vector>

namespace sfnet::kernels {

namespace {
constexpr i64 kParallelThreshold = 1 << 12;
}

// ---- GEMM ----------------------------------------------------------------

void gemm_nn(int m, int k, int n, const float* A, const float* B, float* C,
             bool acc) {
#pragma omp parallel for schedule(static) if (static_cast<i64>(m) * k * n > kParallelThreshold)
    for (int i = 0; i < m; ++i) {
        float* ci = C + static_cast<i64>(i) * n;
        if (!acc) std::memset(ci, 0, sizeof(float) * n);
        const float* ai = A + static_cast<i64>(i) * k;
        for (int p = 0; p < k; ++p) {
            const float a = ai[p];
            const float* bp = B + static_cast<i64>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += a * bp[j];
        }
    }
}

void gemm_nt(int m, int k, int n, const float* A, const float* B, float* C,
             bool acc) {
#pragma omp parallel for schedule(static) if (static_cast<i64>(m) * k * n > kParallelThreshold)
    for (int i = 0; i < m; ++i) {
        const float* ai = A + static_cast<i64>(i) * k;
        float* ci = C + static_cast<i64>(i) * n;
        for (int j = 0; j < n; ++j) {
            const float* bj = B + static_cast<i64>(j) * k;
            float s = acc ? ci[j] : 0.0f;
            for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
            ci[j] = s;
        }
    }
}

void gemm_tn(int m, int k, int n, const float* A, const float* B, float* C,
             bool acc) {
#pragma omp parallel for schedule(static) if (static_cast<i64>(m) * k * n > kParallelThreshold)
    for (int i = 0; i < m; ++i) {
        float* ci = C + static_cast<i64>(i) * n;
        if (!acc) std::memset(ci, 0, sizeof(float) * n);
        for (int p = 0; p < k; ++p) {
            const float a = A[static_cast<i64>(p) * m + i];
            const float* bp = B + static_cast<i64>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += a * bp[j];
        }
    }
}

// ---- Convolution -----------------------------------------------------------

void im2col(const float* x, float* col, int C, int H, int W, int kh, int kw,
            int stride, int padh, int padw) {
    const int OH = (H + 2 * padh - kh) / stride + 1;
    const int OW = (W + 2 * padw - kw) / stride + 1;
    const i64 ospatial = static_cast<i64>(OH) * OW;
#pragma omp parallel for schedule(static) if (static_cast<i64>(C) * kh * kw * ospatial > kParallelThreshold)
    for (int c = 0; c < C; ++c) {
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
                float* dst =
                    col + ((static_cast<i64>(c) * kh + i) * kw + j) * ospatial;
                const float* src = x + static_cast<i64>(c) * H * W;
                for (int oh = 0; oh < OH; ++oh) {
                    const int ih = oh * stride - padh + i;
                    if (ih < 0 || ih >= H) {
                        std::memset(dst + static_cast<i64>(oh) * OW, 0,
                                    sizeof(float) * OW);
                        continue;
                    }
                    for (int ow = 0; ow < OW; ++ow) {
                        const int iw = ow * stride - padw + j;
                        dst[static_cast<i64>(oh) * OW + ow] =
                            (iw < 0 || iw >= W)
                                ? 0.0f
                                : src[static_cast<i64>(ih) * W + iw];
                    }
                }
            }
        }
    }
}

void conv2d_forward(const float* x, const float* w, const float* bias,
                    float* y, int N, int C, int H, int W, int K, int kh,
                    int kw, int stride, int pad) {
    const int OH = (H + 2 * pad - kh) / stride + 1;
    const int OW = (W + 2 * pad - kw) / stride + 1;
    const i64 ospatial = static_cast<i64>(OH) * OW;
    const int ck = C * kh * kw;
    std::vector<float> col(static_cast<i64>(ck) * ospatial);
    for (int n = 0; n < N; ++n) {
        im2col(x + static_cast<i64>(n) * C * H * W, col.data(), C, H, W, kh,
               kw, stride, pad, pad);
        float* yn = y + static_cast<i64>(n) * K * ospatial;
        gemm_nn(K, ck, static_cast<int>(ospatial), w, col.data(), yn);
        if (bias) {
#pragma omp parallel for schedule(static) if (K * ospatial > kParallelThreshold)
            for (int kk = 0; kk < K; ++kk) {
                float* yk = yn + static_cast<i64>(kk) * ospatial;
                const float b = bias[kk];
                for (i64 s = 0; s < ospatial; ++s) yk[s] += b;
            }
        }
    }
}

namespace {

// Fallback for exotic padding: each input element gathers the output
// gradients of every window that covered it.
void conv2d_backward_input_gather(const float* gy, const float* w, float* gx,
                                  int N, int C, int H, int W, int K, int kh,
                                  int kw, int stride, int pad) {
    const int OH = (H + 2 * pad - kh) / stride + 1;
    const int OW = (W + 2 * pad - kw) / stride + 1;
#pragma omp parallel for collapse(2) schedule(static) if (static_cast<i64>(N) * C * H * W > kParallelThreshold)
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const float* gn = gy + static_cast<i64>(n) * K * OH * OW;
            float* gxc = gx + (static_cast<i64>(n) * C + c) * H * W;
            for (int ih = 0; ih < H; ++ih) {
                for (int iw = 0; iw < W; ++iw) {
                    float s = 0.0f;
                    for (int i = 0; i < kh; ++i) {
                        const int t = ih + pad - i;
                        if (t < 0 || t % stride != 0) continue;
                        const int oh = t / stride;
                        if (oh >= OH) continue;
                        for (int j = 0; j < kw; ++j) {
                            const int u = iw + pad - j;
                            if (u < 0 || u % stride != 0) continue;
                            const int ow = u / stride;
                            if (ow >= OW) continue;
                            for (int kk = 0; kk < K; ++kk) {
                                s += w[((static_cast<i64>(kk) * C + c) * kh +
                                        i) * kw + j] *
                                     gn[(static_cast<i64>(kk) * OH + oh) * OW +
                                        ow];
                            }
                        }
                    }
                    gxc[static_cast<i64>(ih) * W + iw] = s;
                }
            }
        }
    }
}

}  // namespace

void conv2d_backward_input(const float* gy, const float* w, float* gx, int N,
                           int C, int H, int W, int K, int kh, int kw,
                           int stride, int pad) {
    const int OH = (H + 2 * pad - kh) / stride + 1;
    const int OW = (W + 2 * pad - kw) / stride + 1;
    const int fpadh = kh - 1 - pad;
    const int fpadw = kw - 1 - pad;
    if (fpadh < 0 || fpadw < 0) {
        conv2d_backward_input_gather(gy, w, gx, N, C, H, W, K, kh, kw, stride,
                                     pad);
        return;
    }
    // Transposed-convolution formulation: dilate gy by the stride and
    // correlate with the spatially flipped, channel-transposed weights via
    // im2col + GEMM. Covers the top-left (BH x BW) block of each plane;
    // floor-arithmetic leftovers at the bottom/right get zero gradient.
    const int DH = (OH - 1) * stride + 1;
    const int DW = (OW - 1) * stride + 1;
    const int BH = DH + 2 * fpadh - kh + 1;  // == H - (H + 2*pad - kh) % stride
    const int BW = DW + 2 * fpadw - kw + 1;
    const int kk = K * kh * kw;
    std::vector<float> wt(static_cast<i64>(C) * kk);
    for (int k = 0; k < K; ++k)
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < kh; ++i)
                for (int j = 0; j < kw; ++j)
                    wt[((static_cast<i64>(c) * K + k) * kh + (kh - 1 - i)) *
                           kw + (kw - 1 - j)] =
                        w[((static_cast<i64>(k) * C + c) * kh + i) * kw + j];
    std::vector<float> dil(static_cast<i64>(K) * DH * DW);
    std::vector<float> col(static_cast<i64>(kk) * BH * BW);
    std::vector<float> block(static_cast<i64>(C) * BH * BW);
    const bool exact = (BH == H && BW == W);
    for (int n = 0; n < N; ++n) {
        std::memset(dil.data(), 0, sizeof(float) * dil.size());
#pragma omp parallel for schedule(static) if (static_cast<i64>(K) * OH * OW > kParallelThreshold)
        for (int k = 0; k < K; ++k) {
            const float* g = gy + (static_cast<i64>(n) * K + k) * OH * OW;
            float* d = dil.data() + static_cast<i64>(k) * DH * DW;
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow)
                    d[(static_cast<i64>(oh) * stride) * DW + ow * stride] =
                        g[static_cast<i64>(oh) * OW + ow];
        }
        im2col(dil.data(), col.data(), K, DH, DW, kh, kw, 1, fpadh, fpadw);
        float* gxn = gx + static_cast<i64>(n) * C * H * W;
        if (exact) {
            gemm_nn(C, kk, BH * BW, wt.data(), col.data(), gxn);
        } else {
            gemm_nn(C, kk, BH * BW, wt.data(), col.data(), block.data());
            std::memset(gxn, 0, sizeof(float) * static_cast<i64>(C) * H * W);
            for (int c = 0; c < C; ++c)
                for (int ih = 0; ih < BH; ++ih)
                    std::memcpy(gxn + (static_cast<i64>(c) * H + ih) * W,
                                block.data() +
                                    (static_cast<i64>(c) * BH + ih) * BW,
                                sizeof(float) * BW);
            // With pad > 0 the last windows reach past the (BH x BW) block,
            // so the floor-arithmetic fringe still receives gradient. It is
            // at most `pad` rows/columns: gather it directly.
            const float* gn = gy + static_cast<i64>(n) * K * OH * OW;
            for (int c = 0; c < C; ++c) {
                float* gxc = gxn + static_cast<i64>(c) * H * W;
                for (int ih = 0; ih < H; ++ih) {
                    const int iw0 = ih < BH ? BW : 0;
                    for (int iw = iw0; iw < W; ++iw) {
                        float s = 0.0f;
                        for (int i = 0; i < kh; ++i) {
                            const int t = ih + pad - i;
                            if (t < 0 || t % stride != 0) continue;
                            const int oh = t / stride;
                            if (oh >= OH) continue;
                            for (int j = 0; j < kw; ++j) {
                                const int u = iw + pad - j;
                                if (u < 0 || u % stride != 0) continue;
                                const int ow = u / stride;
                                if (ow >= OW) continue;
                                for (int k = 0; k < K; ++k)
                                    s += w[((static_cast<i64>(k) * C + c) *
                                                kh + i) * kw + j] *
                                         gn[(static_cast<i64>(k) * OH + oh) *
                                                OW + ow];
                            }
                        }
                        gxc[static_cast<i64>(ih) * W + iw] = s;
                    }
                }
            }
        }
    }
}

void conv2d_backward_weight(const float* x, const float* gy, float* gw, int N,
                            int C, int H, int W, int K, int kh, int kw,
                            int stride, int pad) {
    const int OH = (H + 2 * pad - kh) / stride + 1;
    const int OW = (W + 2 * pad - kw) / stride + 1;
    const i64 ospatial = static_cast<i64>(OH) * OW;
    const int ck = C * kh * kw;
    std::vector<float> col(static_cast<i64>(ck) * ospatial);
    std::memset(gw, 0, sizeof(float) * static_cast<i64>(K) * ck);
    for (int n = 0; n < N; ++n) {
        im2col(x + static_cast<i64>(n) * C * H * W, col.data(), C, H, W, kh,
               kw, stride, pad, pad);
        // gw(K x ck) += gy_n(K x ospatial) * col^T
        gemm_nt(K, static_cast<int>(ospatial), ck,
                gy + static_cast<i64>(n) * K * ospatial, col.data(), gw,
                /*acc=*/true);
    }
}

void conv2d_backward_bias(const float* gy, float* gb, int N, int K, int OH,
                          int OW) {
    const i64 ospatial = static_cast<i64>(OH) * OW;
#pragma omp parallel for schedule(static) if (static_cast<i64>(N) * K * ospatial > kParallelThreshold)
    for (int k = 0; k < K; ++k) {
        double s = 0.0;
        for (int n = 0; n < N; ++n) {
            const float* g = gy + (static_cast<i64>(n) * K + k) * ospatial;
            for (i64 i = 0; i < ospatial; ++i) s += g[i];
        }
        gb[k] = static_cast<float>(s);
    }
}

// ---- Max pooling ------------------------------------------------------------

void maxpool_forward(const float* x, float* y, std::int32_t* argmax, int N,
                     int C, int H, int W, int win, int stride) {
    const int OH = (H - win) / stride + 1;
    const int OW = (W - win) / stride + 1;
#pragma omp parallel for collapse(2) schedule(static) if (static_cast<i64>(N) * C * OH * OW > kParallelThreshold)
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const float* xp = x + (static_cast<i64>(n) * C + c) * H * W;
            float* yp = y + (static_cast<i64>(n) * C + c) * OH * OW;
            std::int32_t* ap =
                argmax + (static_cast<i64>(n) * C + c) * OH * OW;
            for (int oh = 0; oh < OH; ++oh) {
                for (int ow = 0; ow < OW; ++ow) {
                    int best = oh * stride * W + ow * stride;
                    float bv = xp[best];
                    for (int i = 0; i < win; ++i) {
                        for (int j = 0; j < win; ++j) {
                            const int idx =
                                (oh * stride + i) * W + (ow * stride + j);
                            if (xp[idx] > bv) {  // ties keep the first element
                                bv = xp[idx];
                                best = idx;
                            }
                        }
                    }
                    yp[static_cast<i64>(oh) * OW + ow] = bv;
                    ap[static_cast<i64>(oh) * OW + ow] = best;
                }
            }
        }
    }
}

void maxpool_backward(const float* gy, const std::int32_t* argmax, float* gx,
                      int N, int C, int H, int W, int win, int stride) {
    const int OH = (H - win) / stride + 1;
    const int OW = (W - win) / stride + 1;
    std::memset(gx, 0, sizeof(float) * static_cast<i64>(N) * C * H * W);
    // Scatter is parallel over (n, c) planes; windows inside one plane are
    // handled serially so overlapping windows never race.
#pragma omp parallel for collapse(2) schedule(static) if (static_cast<i64>(N) * C * OH * OW > kParallelThreshold)
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const float* gp = gy + (static_cast<i64>(n) * C + c) * OH * OW;
            const std::int32_t* ap =
                argmax + (static_cast<i64>(n) * C + c) * OH * OW;
            float* gxp = gx + (static_cast<i64>(n) * C + c) * H * W;
            for (i64 s = 0; s < static_cast<i64>(OH) * OW; ++s)
                gxp[ap[s]] += gp[s];
        }
    }
}

// ---- Batch normalization -----------------------------------------------------

void bn_stats(const float* x, int N, int C, int H, int W, float* mean,
              float* var) {
    const i64 plane = static_cast<i64>(H) * W;
    const i64 m = static_cast<i64>(N) * plane;
#pragma omp parallel for schedule(static) if (static_cast<i64>(C) * m > kParallelThreshold)
    for (int c = 0; c < C; ++c) {
        double s = 0.0, s2 = 0.0;
        for (int n = 0; n < N; ++n) {
            const float* p = x + (static_cast<i64>(n) * C + c) * plane;
            for (i64 i = 0; i < plane; ++i) {
                const double v = p[i];
                s += v;
                s2 += v * v;
            }
        }
        const double mu = s / static_cast<double>(m);
        mean[c] = static_cast<float>(mu);
        var[c] = static_cast<float>(s2 / static_cast<double>(m) - mu * mu);
        if (var[c] < 0.0f) var[c] = 0.0f;  // guard tiny negative round-off
    }
}

void bn_forward(const float* x, const float* mean, const float* invstd,
                const float* gamma, const float* beta, float* y, int N, int C,
                int H, int W) {
    const i64 plane = static_cast<i64>(H) * W;
#pragma omp parallel for collapse(2) schedule(static) if (static_cast<i64>(N) * C * plane > kParallelThreshold)
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const float* p = x + (static_cast<i64>(n) * C + c) * plane;
            float* q = y + (static_cast<i64>(n) * C + c) * plane;
            const float mu = mean[c], is = invstd[c], g = gamma[c],
                        b = beta[c];
            for (i64 i = 0; i < plane; ++i) q[i] = g * (p[i] - mu) * is + b;
        }
    }
}

void bn_backward(const float* x, const float* gy, const float* mean,
                 const float* invstd, const float* gamma, float* gx,
                 float* ggamma, float* gbeta, int N, int C, int H, int W,
                 bool train_stats) {
    const i64 plane = static_cast<i64>(H) * W;
    const i64 m = static_cast<i64>(N) * plane;
#pragma omp parallel for schedule(static) if (static_cast<i64>(C) * m > kParallelThreshold)
    for (int c = 0; c < C; ++c) {
        const float mu = mean[c], is = invstd[c];
        double sg = 0.0, sgx = 0.0;
        for (int n = 0; n < N; ++n) {
            const float* xp = x + (static_cast<i64>(n) * C + c) * plane;
            const float* gp = gy + (static_cast<i64>(n) * C + c) * plane;
            for (i64 i = 0; i < plane; ++i) {
                sg += gp[i];
                sgx += static_cast<double>(gp[i]) * (xp[i] - mu) * is;
            }
        }
        ggamma[c] = static_cast<float>(sgx);
        gbeta[c] = static_cast<float>(sg);
        const float g = gamma[c];
        if (train_stats) {
            const float mg = static_cast<float>(sg / static_cast<double>(m));
            const float mgx = static_cast<float>(sgx / static_cast<double>(m));
            for (int n = 0; n < N; ++n) {
                const float* xp = x + (static_cast<i64>(n) * C + c) * plane;
                const float* gp = gy + (static_cast<i64>(n) * C + c) * plane;
                float* op = gx + (static_cast<i64>(n) * C + c) * plane;
                for (i64 i = 0; i < plane; ++i) {
                    const float xh = (xp[i] - mu) * is;
                    op[i] = g * is * (gp[i] - mg - xh * mgx);
                }
            }
        } else {
            // Running statistics are constants: a per-channel affine map.
            for (int n = 0; n < N; ++n) {
                const float* gp = gy + (static_cast<i64>(n) * C + c) * plane;
                float* op = gx + (static_cast<i64>(n) * C + c) * plane;
                for (i64 i = 0; i < plane; ++i) op[i] = g * is * gp[i];
            }
        }
    }
}

// ---- Global pooling ------------------------------------------------------------

void global_avg_spatial(const float* x, float* y, int N, int C, int H, int W) {
    const i64 plane = static_cast<i64>(H) * W;
#pragma omp parallel for collapse(2) schedule(static) if (static_cast<i64>(N) * C * plane > kParallelThreshold)
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const float* p = x + (static_cast<i64>(n) * C + c) * plane;
            double s = 0.0;
            for (i64 i = 0; i < plane; ++i) s += p[i];
            y[static_cast<i64>(n) * C + c] =
                static_cast<float>(s / static_cast<double>(plane));
        }
    }
}

void global_max_spatial(const float* x, float* y, std::int32_t* argmax, int N,
                        int C, int H, int W) {
    const i64 plane = static_cast<i64>(H) * W;
#pragma omp parallel for collapse(2) schedule(static) if (static_cast<i64>(N) * C * plane > kParallelThreshold)
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const float* p = x + (static_cast<i64>(n) * C + c) * plane;
            int best = 0;
            float bv = p[0];
            for (i64 i = 1; i < plane; ++i)
                if (p[i] > bv) { bv = p[i]; best = static_cast<int>(i); }
            y[static_cast<i64>(n) * C + c] = bv;
            argmax[static_cast<i64>(n) * C + c] = best;
        }
    }
}

void global_avg_channel(const float* x, float* y, int N, int C, int H, int W) {
    const i64 plane = static_cast<i64>(H) * W;
#pragma omp parallel for schedule(static) if (static_cast<i64>(N) * plane > kParallelThreshold)
    for (int n = 0; n < N; ++n) {
        const float* xn = x + static_cast<i64>(n) * C * plane;
        float* yn = y + static_cast<i64>(n) * plane;
        for (i64 s = 0; s < plane; ++s) {
            double acc = 0.0;
            for (int c = 0; c < C; ++c)
                acc += xn[static_cast<i64>(c) * plane + s];
            yn[s] = static_cast<float>(acc / C);
        }
    }
}

void global_max_channel(const float* x, float* y, std::int32_t* argmax, int N,
                        int C, int H, int W) {
    const i64 plane = static_cast<i64>(H) * W;
#pragma omp parallel for schedule(static) if (static_cast<i64>(N) * plane > kParallelThreshold)
    for (int n = 0; n < N; ++n) {
        const float* xn = x + static_cast<i64>(n) * C * plane;
        float* yn = y + static_cast<i64>(n) * plane;
        std::int32_t* an = argmax + static_cast<i64>(n) * plane;
        for (i64 s = 0; s < plane; ++s) {
            int best = 0;
            float bv = xn[s];
            for (int c = 1; c < C; ++c) {
                const float v = xn[static_cast<i64>(c) * plane + s];
                if (v > bv) { bv = v; best = c; }
            }
            yn[s] = bv;
            an[s] = best;
        }
    }
}

// ---- FFT -----------------------------------------------------------------------

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

namespace {

struct TwiddleTable {
    // re/im[s][j] = exp(-i * pi * j / 2^s) for butterfly stage s.
    std::vector<std::vector<double>> re, im;
    std::vector<int> bitrev;
};

const TwiddleTable& twiddles_for(int len) {
    static std::map<int, TwiddleTable> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(len);
    if (it != cache.end()) return it->second;
    TwiddleTable t;
    int stages = 0;
    while ((1 << stages) < len) ++stages;
    t.re.resize(stages);
    t.im.resize(stages);
    for (int s = 0; s < stages; ++s) {
        const int half = 1 << s;
        t.re[s].resize(half);
        t.im[s].resize(half);
        for (int j = 0; j < half; ++j) {
            const double ang = -M_PI * j / half;
            t.re[s][j] = std::cos(ang);
            t.im[s][j] = std::sin(ang);
        }
    }
    t.bitrev.resize(len);
    for (int i = 0; i < len; ++i) {
        int r = 0;
        for (int b = 0; b < stages; ++b)
            if (i & (1 << b)) r |= 1 << (stages - 1 - b);
        t.bitrev[i] = r;
    }
    return cache.emplace(len, std::move(t)).first->second;
}

}  // namespace

void fft_line(float* re, float* im, int len, i64 stride, bool inverse) {
    if (len == 1) return;
    const TwiddleTable& t = twiddles_for(len);
    std::vector<double> wr(len), wi(len);
    for (int i = 0; i < len; ++i) {
        const int r = t.bitrev[i];
        wr[i] = re[static_cast<i64>(r) * stride];
        wi[i] = im[static_cast<i64>(r) * stride];
    }
    const double sign = inverse ? -1.0 : 1.0;
    int stage = 0;
    for (int half = 1; half < len; half <<= 1, ++stage) {
        const int step = half << 1;
        for (int base = 0; base < len; base += step) {
            for (int j = 0; j < half; ++j) {
                const double tr = t.re[stage][j];
                const double ti = sign * t.im[stage][j];
                const int a = base + j, b = base + j + half;
                const double xr = wr[b] * tr - wi[b] * ti;
                const double xi = wr[b] * ti + wi[b] * tr;
                wr[b] = wr[a] - xr;
                wi[b] = wi[a] - xi;
                wr[a] += xr;
                wi[a] += xi;
            }
        }
    }
    const double norm = inverse ? 1.0 / len : 1.0;
    for (int i = 0; i < len; ++i) {
        re[static_cast<i64>(i) * stride] = static_cast<float>(wr[i] * norm);
        im[static_cast<i64>(i) * stride] = static_cast<float>(wi[i] * norm);
    }
}

// ---- Misc -----------------------------------------------------------------------

bool all_finite(const float* x, i64 n) {
    for (i64 i = 0; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

void fill(float* x, i64 n, float v) {
    for (i64 i = 0; i < n; ++i) x[i] = v;
}

}  // namespace sfnet::kernels
