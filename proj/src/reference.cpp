#include "sfnet/reference.hpp"

#include <cmath>

namespace sfnet::ref {

void matmul(int m, int k, int n, const float* A, const float* B, float* C) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int p = 0; p < k; ++p)
                s += static_cast<double>(A[static_cast<i64>(i) * k + p]) *
                     B[static_cast<i64>(p) * n + j];
            C[static_cast<i64>(i) * n + j] = static_cast<float>(s);
        }
    }
}

void conv2d(const float* x, const float* w, const float* bias, float* y,
            int N, int C, int H, int W, int K, int kh, int kw, int stride,
            int pad) {
    const int OH = (H + 2 * pad - kh) / stride + 1;
    const int OW = (W + 2 * pad - kw) / stride + 1;
    for (int n = 0; n < N; ++n) {
        for (int k = 0; k < K; ++k) {
            for (int oh = 0; oh < OH; ++oh) {
                for (int ow = 0; ow < OW; ++ow) {
                    double s = bias ? bias[k] : 0.0;
                    for (int c = 0; c < C; ++c) {
                        for (int i = 0; i < kh; ++i) {
                            const int ih = oh * stride - pad + i;
                            if (ih < 0 || ih >= H) continue;
                            for (int j = 0; j < kw; ++j) {
                                const int iw = ow * stride - pad + j;
                                if (iw < 0 || iw >= W) continue;
                                s += static_cast<double>(
                                         x[((static_cast<i64>(n) * C + c) * H +
                                            ih) * W + iw]) *
                                     w[((static_cast<i64>(k) * C + c) * kh +
                                        i) * kw + j];
                            }
                        }
                    }
                    y[((static_cast<i64>(n) * K + k) * OH + oh) * OW + ow] =
                        static_cast<float>(s);
                }
            }
        }
    }
}

void maxpool(const float* x, float* y, int N, int C, int H, int W, int win,
             int stride) {
    const int OH = (H - win) / stride + 1;
    const int OW = (W - win) / stride + 1;
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const float* xp = x + (static_cast<i64>(n) * C + c) * H * W;
            float* yp = y + (static_cast<i64>(n) * C + c) * OH * OW;
            for (int oh = 0; oh < OH; ++oh) {
                for (int ow = 0; ow < OW; ++ow) {
                    float bv = xp[(oh * stride) * W + ow * stride];
                    for (int i = 0; i < win; ++i)
                        for (int j = 0; j < win; ++j) {
                            const float v =
                                xp[(oh * stride + i) * W + (ow * stride + j)];
                            if (v > bv) bv = v;
                        }
                    yp[static_cast<i64>(oh) * OW + ow] = bv;
                }
            }
        }
    }
}

void global_avg_spatial(const float* x, float* y, int N, int C, int H,
                        int W) {
    const i64 plane = static_cast<i64>(H) * W;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            double s = 0.0;
            const float* p = x + (static_cast<i64>(n) * C + c) * plane;
            for (i64 i = 0; i < plane; ++i) s += p[i];
            y[static_cast<i64>(n) * C + c] = static_cast<float>(s / plane);
        }
}

void global_max_spatial(const float* x, float* y, int N, int C, int H,
                        int W) {
    const i64 plane = static_cast<i64>(H) * W;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const float* p = x + (static_cast<i64>(n) * C + c) * plane;
            float bv = p[0];
            for (i64 i = 1; i < plane; ++i)
                if (p[i] > bv) bv = p[i];
            y[static_cast<i64>(n) * C + c] = bv;
        }
}

void global_avg_channel(const float* x, float* y, int N, int C, int H,
                        int W) {
    const i64 plane = static_cast<i64>(H) * W;
    for (int n = 0; n < N; ++n)
        for (i64 s = 0; s < plane; ++s) {
            double acc = 0.0;
            for (int c = 0; c < C; ++c)
                acc += x[(static_cast<i64>(n) * C + c) * plane + s];
            y[static_cast<i64>(n) * plane + s] =
                static_cast<float>(acc / C);
        }
}

void global_max_channel(const float* x, float* y, int N, int C, int H,
                        int W) {
    const i64 plane = static_cast<i64>(H) * W;
    for (int n = 0; n < N; ++n)
        for (i64 s = 0; s < plane; ++s) {
            float bv = x[static_cast<i64>(n) * C * plane + s];
            for (int c = 1; c < C; ++c) {
                const float v = x[(static_cast<i64>(n) * C + c) * plane + s];
                if (v > bv) bv = v;
            }
            y[static_cast<i64>(n) * plane + s] = bv;
        }
}

void channel_mean(const float* x, float* mean, int N, int C, int H, int W) {
    const i64 plane = static_cast<i64>(H) * W;
    for (int c = 0; c < C; ++c) {
        double s = 0.0;
        for (int n = 0; n < N; ++n) {
            const float* p = x + (static_cast<i64>(n) * C + c) * plane;
            for (i64 i = 0; i < plane; ++i) s += p[i];
        }
        mean[c] = static_cast<float>(s / (static_cast<double>(N) * plane));
    }
}

void dft2(const float* x, double* out_re, double* out_im, int H, int W) {
    for (int u = 0; u < H; ++u) {
        for (int v = 0; v < W; ++v) {
            double re = 0.0, im = 0.0;
            for (int i = 0; i < H; ++i) {
                for (int j = 0; j < W; ++j) {
                    const double ang =
                        -2.0 * M_PI *
                        (static_cast<double>(u) * i / H +
                         static_cast<double>(v) * j / W);
                    const double val = x[static_cast<i64>(i) * W + j];
                    re += val * std::cos(ang);
                    im += val * std::sin(ang);
                }
            }
            out_re[static_cast<i64>(u) * W + v] = re;
            out_im[static_cast<i64>(u) * W + v] = im;
        }
    }
}

void idft2(const double* in_re, const double* in_im, double* out_re,
           double* out_im, int H, int W) {
    const double norm = 1.0 / (static_cast<double>(H) * W);
    for (int i = 0; i < H; ++i) {
        for (int j = 0; j < W; ++j) {
            double re = 0.0, im = 0.0;
            for (int u = 0; u < H; ++u) {
                for (int v = 0; v < W; ++v) {
                    const double ang =
                        2.0 * M_PI *
                        (static_cast<double>(u) * i / H +
                         static_cast<double>(v) * j / W);
                    const double c = std::cos(ang), s = std::sin(ang);
                    const double r = in_re[static_cast<i64>(u) * W + v];
                    const double m = in_im[static_cast<i64>(u) * W + v];
                    re += r * c - m * s;
                    im += r * s + m * c;
                }
            }
            out_re[static_cast<i64>(i) * W + j] = re * norm;
            out_im[static_cast<i64>(i) * W + j] = im * norm;
        }
    }
}

void dct2(const float* x, double* out, int H, int W) {
    for (int u = 0; u < H; ++u) {
        for (int v = 0; v < W; ++v) {
            double s = 0.0;
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j)
                    s += static_cast<double>(x[static_cast<i64>(i) * W + j]) *
                         std::cos(M_PI * (2 * i + 1) * u / (2.0 * H)) *
                         std::cos(M_PI * (2 * j + 1) * v / (2.0 * W));
            const double au = u == 0 ? std::sqrt(1.0 / H) : std::sqrt(2.0 / H);
            const double av = v == 0 ? std::sqrt(1.0 / W) : std::sqrt(2.0 / W);
            out[static_cast<i64>(u) * W + v] = au * av * s;
        }
    }
}

void add(const float* a, const float* b, float* y, i64 n) {
    for (i64 i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void mul(const float* a, const float* b, float* y, i64 n) {
    for (i64 i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

std::vector<float> broadcast_expand(const float* b,
                                    const std::vector<int>& bshape,
                                    const std::vector<int>& shape) {
    const int rank = static_cast<int>(shape.size());
    i64 total = 1;
    for (int d : shape) total *= d;
    std::vector<float> out(total);
    std::vector<int> idx(rank, 0);
    for (i64 lin = 0; lin < total; ++lin) {
        i64 boff = 0;
        for (int a = 0; a < rank; ++a) {
            const int bi = bshape[a] == 1 ? 0 : idx[a];
            boff = boff * bshape[a] + bi;
        }
        out[lin] = b[boff];
        for (int a = rank - 1; a >= 0; --a) {
            if (++idx[a] < shape[a]) break;
            idx[a] = 0;
        }
    }
    return out;
}

}  // namespace sfnet::ref
