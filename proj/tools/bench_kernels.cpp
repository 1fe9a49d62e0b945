// Side-by-side timing of the OpenMP kernels against the naive reference
// implementations, with max-abs-difference checks so speed never silently
// buys wrong answers.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#include "sfnet/kernels.hpp"
#include "sfnet/reference.hpp"
#include "sfnet/rng.hpp"
#include "sfnet/spectral.hpp"
#include "sfnet/tensor.hpp"

using sfnet::Rng;

namespace {

double time_best_of(const std::function<void()>& fn, int reps) {
    double best = 1e30;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        best = std::min(best, dt);
    }
    return best;
}

std::vector<float> random_vec(std::size_t n, Rng& rng) {
    std::vector<float> v(n);
    for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    return v;
}

float max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
    float m = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

void report(const char* name, double ref_s, double par_s, double gflop,
            float diff) {
    std::printf("%-22s ref %8.3f ms  parallel %8.3f ms  speedup %5.2fx", name,
                ref_s * 1e3, par_s * 1e3, ref_s / par_s);
    if (gflop > 0) std::printf("  %6.2f GFLOP/s", gflop / par_s * 1e-9);
    std::printf("  max|diff| %.3g\n", diff);
}

void bench_gemm(Rng& rng) {
    const int m = 256, k = 256, n = 256;
    const auto A = random_vec(static_cast<std::size_t>(m) * k, rng);
    const auto B = random_vec(static_cast<std::size_t>(k) * n, rng);
    std::vector<float> Cr(static_cast<std::size_t>(m) * n);
    std::vector<float> Cp(Cr.size());
    const double t_ref =
        time_best_of([&] { sfnet::ref::matmul(m, k, n, A.data(), B.data(), Cr.data()); }, 3);
    const double t_par = time_best_of(
        [&] { sfnet::kernels::gemm_nn(m, k, n, A.data(), B.data(), Cp.data()); }, 5);
    report("gemm 256^3", t_ref, t_par, 2.0 * m * k * n, max_abs_diff(Cr, Cp));
}

void bench_conv(Rng& rng) {
    const int N = 4, C = 32, H = 32, W = 32, K = 64, kh = 3, kw = 3;
    const int OH = H, OW = W;  // stride 1, pad 1
    const auto x = random_vec(static_cast<std::size_t>(N) * C * H * W, rng);
    const auto w = random_vec(static_cast<std::size_t>(K) * C * kh * kw, rng);
    const auto b = random_vec(K, rng);
    std::vector<float> yr(static_cast<std::size_t>(N) * K * OH * OW);
    std::vector<float> yp(yr.size());
    const double t_ref = time_best_of(
        [&] {
            sfnet::ref::conv2d(x.data(), w.data(), b.data(), yr.data(), N, C, H,
                               W, K, kh, kw, 1, 1);
        },
        3);
    const double t_par = time_best_of(
        [&] {
            sfnet::kernels::conv2d_forward(x.data(), w.data(), b.data(),
                                           yp.data(), N, C, H, W, K, kh, kw, 1,
                                           1);
        },
        5);
    report("conv 4x32x32x32->64", t_ref, t_par,
           2.0 * N * K * OH * OW * C * kh * kw, max_abs_diff(yr, yp));
}

void bench_maxpool(Rng& rng) {
    const int N = 16, C = 64, H = 64, W = 64;
    const auto x = random_vec(static_cast<std::size_t>(N) * C * H * W, rng);
    std::vector<float> yr(static_cast<std::size_t>(N) * C * (H / 2) * (W / 2));
    std::vector<float> yp(yr.size());
    std::vector<std::int32_t> argmax(yr.size());
    const double t_ref = time_best_of(
        [&] { sfnet::ref::maxpool(x.data(), yr.data(), N, C, H, W, 2, 2); }, 3);
    const double t_par = time_best_of(
        [&] {
            sfnet::kernels::maxpool_forward(x.data(), yp.data(), argmax.data(),
                                            N, C, H, W, 2, 2);
        },
        5);
    report("maxpool 16x64x64x64", t_ref, t_par, 0, max_abs_diff(yr, yp));
}

void bench_fft(Rng& rng) {
    const int H = 64, W = 64;
    const auto x = random_vec(static_cast<std::size_t>(H) * W, rng);
    std::vector<double> re_ref(x.size()), im_ref(x.size());
    const double t_ref = time_best_of(
        [&] { sfnet::ref::dft2(x.data(), re_ref.data(), im_ref.data(), H, W); },
        2);

    sfnet::Tensor xt = sfnet::Tensor::from_vector({H, W}, x);
    sfnet::ComplexSpectrum spec;
    const double t_par =
        time_best_of([&] { spec = sfnet::fft2(xt); }, 5);
    float diff = 0.0f;
    for (std::size_t i = 0; i < x.size(); ++i) {
        diff = std::max(diff, std::abs(spec.real.data()[i] -
                                       static_cast<float>(re_ref[i])));
        diff = std::max(diff, std::abs(spec.imag.data()[i] -
                                       static_cast<float>(im_ref[i])));
    }
    report("fft2 64x64 vs dft2", t_ref, t_par, 0, diff);
}

}  // namespace

int main() {
    Rng rng(0x9e3779b97f4a7c15ULL);
    std::printf("kernel benchmark: naive reference vs OpenMP implementations\n");
    bench_gemm(rng);
    bench_conv(rng);
    bench_maxpool(rng);
    bench_fft(rng);
    return 0;
}
