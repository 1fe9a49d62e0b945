#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "sfnet/data.hpp"
#include "sfnet/image_io.hpp"
#include "sfnet/spectral.hpp"
#include "sfnet/tensor.hpp"

using namespace sfnet;
namespace fs = std::filesystem;

namespace {

// Scratch directory that cleans up after itself.
struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("sfnet_data_test_" + tag + "_" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

void write_solid_png(const fs::path& p, int w, int h, unsigned char r,
                     unsigned char g, unsigned char b) {
    std::vector<unsigned char> px(static_cast<std::size_t>(w) * h * 3);
    for (int i = 0; i < w * h; ++i) {
        px[3 * static_cast<std::size_t>(i) + 0] = r;
        px[3 * static_cast<std::size_t>(i) + 1] = g;
        px[3 * static_cast<std::size_t>(i) + 2] = b;
    }
    write_png_rgb(p.string(), w, h, px.data());
}

// Mean per-pixel energy of the luma plane outside the centered half-extent
// frequency block (the band a factor-2 resample suppresses).
double high_band_energy(const std::vector<float>& img, int E) {
    std::vector<float> luma(static_cast<std::size_t>(E) * E);
    for (int i = 0; i < E * E; ++i)
        luma[static_cast<std::size_t>(i)] =
            0.299f * img[static_cast<std::size_t>(i)] +
            0.587f * img[static_cast<std::size_t>(E) * E + i] +
            0.114f * img[2 * static_cast<std::size_t>(E) * E + i];
    ComplexSpectrum s = fftshift(fft2(Tensor::from_vector({E, E}, luma)));
    const int b = E / 4;
    const int c = E / 2;
    double e = 0.0;
    for (int i = 0; i < E; ++i)
        for (int j = 0; j < E; ++j) {
            if (i >= c - b && i < c + b && j >= c - b && j < c + b) continue;
            const float re = s.real.at({i, j});
            const float im = s.imag.at({i, j});
            e += static_cast<double>(re) * re + static_cast<double>(im) * im;
        }
    return e / (static_cast<double>(E) * E * E * E);
}

}  // namespace

TEST_CASE("synthetic: counts, label blocks, ids") {
    Dataset ds = Dataset::synthetic(16, 64, 42);
    REQUIRE(ds.size() == 32);
    CHECK(ds.extent() == 64);
    CHECK(ds.manifest().source == "synthetic");
    CHECK(ds.manifest().seed == 42);
    for (std::size_t i = 0; i < 16; ++i) CHECK(ds.label(i) == 0);
    for (std::size_t i = 16; i < 32; ++i) CHECK(ds.label(i) == 1);
    CHECK(ds.manifest().ids[0] == "synthetic/real/0000");
    CHECK(ds.manifest().ids[16] == "synthetic/fake/0016");
}

TEST_CASE("synthetic: images are 3xExE floats in [0,1]") {
    const int E = 32;
    Dataset ds = Dataset::synthetic(4, E, 7);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const std::vector<float>& img = ds.image(i);
        REQUIRE(img.size() == static_cast<std::size_t>(3) * E * E);
        float lo = 1e9f, hi = -1e9f;
        for (float v : img) {
            REQUIRE(std::isfinite(v));
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(lo >= 0.0f);
        CHECK(hi <= 1.0f);
    }
}

TEST_CASE("synthetic: argument validation") {
    CHECK_THROWS_AS(Dataset::synthetic(4, 48, 1), std::invalid_argument);
    CHECK_THROWS_WITH_AS(Dataset::synthetic(4, 0, 1),
                         doctest::Contains("power of two"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(Dataset::synthetic(0, 16, 1),
                         doctest::Contains("n_per_class"),
                         std::invalid_argument);
}

TEST_CASE("synthetic: regeneration with the same seed is bit-identical") {
    Dataset a = Dataset::synthetic(8, 32, 99);
    Dataset b = Dataset::synthetic(8, 32, 99);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& x = a.image(i);
        const auto& y = b.image(i);
        REQUIRE(x.size() == y.size());
        CHECK(std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) == 0);
    }
    // A different seed must actually change the data.
    Dataset c = Dataset::synthetic(8, 32, 100);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size() && !any_diff; ++i)
        any_diff = std::memcmp(a.image(i).data(), c.image(i).data(),
                               a.image(i).size() * sizeof(float)) != 0;
    CHECK(any_diff);
}

TEST_CASE("synthetic: per-sample generator is index-addressable") {
    Dataset ds = Dataset::synthetic(4, 16, 5);
    // Sample i of the real block reproduces synth_image(label 0, index i).
    std::vector<float> direct = synth_image(16, 0, 5, 2);
    const std::vector<float>& via = ds.image(2);
    REQUIRE(direct.size() == via.size());
    CHECK(std::memcmp(direct.data(), via.data(),
                      direct.size() * sizeof(float)) == 0);
}

TEST_CASE("split: stratified counts, disjoint union") {
    Dataset ds = Dataset::synthetic(10, 16, 3);
    split_manifest(ds.manifest(), 0.5, 5);
    const DatasetManifest& m = ds.manifest();
    REQUIRE(m.train_idx.size() == 10);
    REQUIRE(m.val_idx.size() == 10);
    int train_fake = 0;
    for (std::size_t i : m.train_idx) train_fake += m.labels[i];
    CHECK(train_fake == 5);  // 5 real + 5 fake in train

    std::set<std::size_t> all(m.train_idx.begin(), m.train_idx.end());
    for (std::size_t i : m.val_idx) {
        CHECK(all.count(i) == 0);  // disjoint
        all.insert(i);
    }
    REQUIRE(all.size() == 20);  // exhaustive
    CHECK(*all.begin() == 0);
    CHECK(*all.rbegin() == 19);
}

TEST_CASE("split: ratio 0.9 gives 9/1 per class") {
    Dataset ds = Dataset::synthetic(10, 16, 3);
    split_manifest(ds.manifest(), 0.9, 11);
    const DatasetManifest& m = ds.manifest();
    REQUIRE(m.train_idx.size() == 18);
    REQUIRE(m.val_idx.size() == 2);
    int train_fake = 0, val_fake = 0;
    for (std::size_t i : m.train_idx) train_fake += m.labels[i];
    for (std::size_t i : m.val_idx) val_fake += m.labels[i];
    CHECK(train_fake == 9);
    CHECK(val_fake == 1);
}

TEST_CASE("split: deterministic in the seed") {
    Dataset a = Dataset::synthetic(16, 16, 8);
    Dataset b = Dataset::synthetic(16, 16, 8);
    split_manifest(a.manifest(), 0.5, 21);
    split_manifest(b.manifest(), 0.5, 21);
    CHECK(a.manifest().train_idx == b.manifest().train_idx);
    CHECK(a.manifest().val_idx == b.manifest().val_idx);

    split_manifest(b.manifest(), 0.5, 22);
    CHECK(a.manifest().train_idx != b.manifest().train_idx);
}

TEST_CASE("split: argument and class-size validation") {
    Dataset ds = Dataset::synthetic(4, 16, 1);
    CHECK_THROWS_WITH_AS(split_manifest(ds.manifest(), 0.0, 1),
                         doctest::Contains("ratio"), std::invalid_argument);
    CHECK_THROWS_AS(split_manifest(ds.manifest(), 1.0, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(split_manifest(ds.manifest(), -0.3, 1),
                    std::invalid_argument);
    Dataset tiny = Dataset::synthetic(1, 16, 1);
    CHECK_THROWS_WITH_AS(split_manifest(tiny.manifest(), 0.5, 1),
                         doctest::Contains("at least 2"),
                         std::invalid_argument);
}

TEST_CASE("split: extreme ratio still leaves both sides nonempty") {
    Dataset ds = Dataset::synthetic(10, 16, 3);
    split_manifest(ds.manifest(), 0.99, 4);
    CHECK(ds.manifest().val_idx.size() == 2);  // one per class
    split_manifest(ds.manifest(), 0.01, 4);
    CHECK(ds.manifest().train_idx.size() == 2);
}

TEST_CASE("DatasetView: whole and split views map through") {
    Dataset ds = Dataset::synthetic(4, 16, 2);
    split_manifest(ds.manifest(), 0.5, 9);
    DatasetView whole = DatasetView::whole(ds);
    DatasetView train = DatasetView::train_split(ds);
    DatasetView val = DatasetView::val_split(ds);
    REQUIRE(whole.size() == 8);
    REQUIRE(train.size() == 4);
    REQUIRE(val.size() == 4);
    CHECK(whole.extent() == 16);
    for (std::size_t i = 0; i < train.size(); ++i) {
        const std::size_t src = ds.manifest().train_idx[i];
        CHECK(train.label(i) == ds.label(src));
        CHECK(&train.image(i) == &ds.image(src));  // same cached buffer
    }
}

TEST_CASE("manifest: JSON records the split") {
    Dataset ds = Dataset::synthetic(4, 16, 2);
    split_manifest(ds.manifest(), 0.5, 9);
    const std::string j = ds.manifest().to_json_string();
    CHECK(j.find("\"train_idx\"") != std::string::npos);
    CHECK(j.find("\"val_idx\"") != std::string::npos);
    CHECK(j.find("\"split_seed\": 9") != std::string::npos);
    CHECK(j.find("\"source\": \"synthetic\"") != std::string::npos);
}

TEST_CASE("spectral: fake class has lower high-band energy (100 samples)") {
    const int E = 64;
    Dataset ds = Dataset::synthetic(50, E, 42);
    double real_mean = 0.0, fake_mean = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double e = high_band_energy(ds.image(i), E);
        (ds.label(i) == 0 ? real_mean : fake_mean) += e;
    }
    real_mean /= 50.0;
    fake_mean /= 50.0;
    INFO("real mean " << real_mean << " fake mean " << fake_mean);
    CHECK(fake_mean < real_mean);
    // The artifact removes a sizable share of the band, not a rounding error.
    CHECK(fake_mean < 0.8 * real_mean);
}

TEST_CASE("spectral: logistic probe on band energy >= 90% on 200 samples") {
    const int E = 64;
    Dataset ds = Dataset::synthetic(100, E, 17);
    const std::size_t n = ds.size();
    std::vector<double> x(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = high_band_energy(ds.image(i), E);
        y[i] = ds.label(i);
    }
    // Standardize the single feature, then fit w,b by plain gradient descent.
    double mu = 0.0, sd = 0.0;
    for (double v : x) mu += v;
    mu /= static_cast<double>(n);
    for (double v : x) sd += (v - mu) * (v - mu);
    sd = std::sqrt(sd / static_cast<double>(n));
    REQUIRE(sd > 0.0);
    for (double& v : x) v = (v - mu) / sd;

    double w = 0.0, b = 0.0;
    for (int it = 0; it < 500; ++it) {
        double gw = 0.0, gb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = 1.0 / (1.0 + std::exp(-(w * x[i] + b)));
            const double d = p - static_cast<double>(y[i]);
            gw += d * x[i];
            gb += d;
        }
        w -= 0.5 * gw / static_cast<double>(n);
        b -= 0.5 * gb / static_cast<double>(n);
    }
    int correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const int pred = (w * x[i] + b) > 0.0 ? 1 : 0;
        correct += pred == y[i];
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(n);
    INFO("probe accuracy " << acc);
    CHECK(acc >= 0.90);
}

TEST_CASE("from_directory: labels follow the subdirectory convention") {
    TempDir td("labels");
    fs::create_directories(td.path / "real");
    fs::create_directories(td.path / "fake");
    write_solid_png(td.path / "real" / "a.png", 4, 4, 10, 20, 30);
    write_solid_png(td.path / "real" / "b.png", 4, 4, 40, 50, 60);
    write_solid_png(td.path / "real" / "c.png", 4, 4, 70, 80, 90);
    write_solid_png(td.path / "fake" / "x.png", 4, 4, 100, 110, 120);
    write_solid_png(td.path / "fake" / "y.png", 4, 4, 130, 140, 150);

    Dataset ds = Dataset::from_directory(td.path.string(), 4);
    REQUIRE(ds.size() == 5);
    const std::vector<int> want = {0, 0, 0, 1, 1};
    for (std::size_t i = 0; i < 5; ++i) CHECK(ds.label(i) == want[i]);
    CHECK(ds.manifest().skipped == 0);
    // Files are taken in sorted order within each class.
    CHECK(ds.manifest().ids[0].find("a.png") != std::string::npos);
    CHECK(ds.manifest().ids[2].find("c.png") != std::string::npos);
    CHECK(ds.manifest().ids[3].find("x.png") != std::string::npos);
}

TEST_CASE("from_directory: decoded values are v/255 in [0,1]") {
    TempDir td("range");
    fs::create_directories(td.path / "real");
    fs::create_directories(td.path / "fake");
    write_solid_png(td.path / "real" / "r.png", 4, 4, 0, 128, 255);
    write_solid_png(td.path / "fake" / "f.png", 4, 4, 51, 102, 204);
    Dataset ds = Dataset::from_directory(td.path.string(), 4);
    const std::vector<float>& img = ds.image(0);
    REQUIRE(img.size() == 3u * 4 * 4);
    CHECK(img[0] == doctest::Approx(0.0f));
    CHECK(img[16] == doctest::Approx(128.0f / 255.0f));
    CHECK(img[32] == doctest::Approx(1.0f));
    const std::vector<float>& img2 = ds.image(1);
    CHECK(img2[0] == doctest::Approx(51.0f / 255.0f));
}

TEST_CASE("from_directory: nearest-neighbor resize replicates blocks") {
    TempDir td("resize");
    fs::create_directories(td.path / "real");
    fs::create_directories(td.path / "fake");
    // 2x2 image with four distinct gray levels in the red channel.
    const unsigned char px[2 * 2 * 3] = {10, 0, 0, 20, 0, 0,
                                         30, 0, 0, 40, 0, 0};
    write_png_rgb((td.path / "real" / "q.png").string(), 2, 2, px);
    write_solid_png(td.path / "fake" / "f.png", 2, 2, 1, 1, 1);
    Dataset ds = Dataset::from_directory(td.path.string(), 4);
    const std::vector<float>& img = ds.image(0);
    auto red = [&](int r, int c) { return img[static_cast<std::size_t>(r) * 4 + c] * 255.0f; };
    // Source pixel (r/2, c/2) fills each 2x2 output block.
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            const float want = static_cast<float>(10 + (r / 2) * 20 + (c / 2) * 10);
            CHECK(red(r, c) == doctest::Approx(want).epsilon(1e-4));
        }
}

TEST_CASE("from_directory: PPM files decode through the same path") {
    TempDir td("ppm");
    fs::create_directories(td.path / "real");
    fs::create_directories(td.path / "fake");
    const unsigned char rgb[3] = {90, 180, 240};
    write_ppm((td.path / "real" / "p.ppm").string(), 1, 1, rgb);
    write_solid_png(td.path / "fake" / "f.png", 1, 1, 5, 5, 5);
    Dataset ds = Dataset::from_directory(td.path.string(), 2);
    REQUIRE(ds.size() == 2);
    const std::vector<float>& img = ds.image(0);
    CHECK(img[0] == doctest::Approx(90.0f / 255.0f));
    CHECK(img[4] == doctest::Approx(180.0f / 255.0f));
    CHECK(img[8] == doctest::Approx(240.0f / 255.0f));
}

TEST_CASE("from_directory: grayscale PNG replicates to three channels") {
    TempDir td("gray");
    fs::create_directories(td.path / "real");
    fs::create_directories(td.path / "fake");
    const unsigned char g[1] = {77};
    write_png_gray((td.path / "real" / "g.png").string(), 1, 1, g);
    write_solid_png(td.path / "fake" / "f.png", 1, 1, 5, 5, 5);
    Dataset ds = Dataset::from_directory(td.path.string(), 2);
    const std::vector<float>& img = ds.image(0);
    for (int ch = 0; ch < 3; ++ch)
        CHECK(img[static_cast<std::size_t>(ch) * 4] ==
              doctest::Approx(77.0f / 255.0f));
}

TEST_CASE("from_directory: missing subdirectory is an error") {
    TempDir td("missing");
    fs::create_directories(td.path / "real");
    write_solid_png(td.path / "real" / "a.png", 2, 2, 1, 2, 3);
    CHECK_THROWS_WITH_AS(Dataset::from_directory(td.path.string(), 2),
                         doctest::Contains("missing subdirectory"),
                         std::runtime_error);
}

TEST_CASE("from_directory: empty class directory is an error") {
    TempDir td("empty");
    fs::create_directories(td.path / "real");
    fs::create_directories(td.path / "fake");
    write_solid_png(td.path / "real" / "a.png", 2, 2, 1, 2, 3);
    CHECK_THROWS_WITH_AS(Dataset::from_directory(td.path.string(), 2),
                         doctest::Contains("no usable images"),
                         std::runtime_error);
}

TEST_CASE("from_directory: undecodable files are skipped and counted") {
    TempDir td("bad");
    fs::create_directories(td.path / "real");
    fs::create_directories(td.path / "fake");
    write_solid_png(td.path / "real" / "a.png", 2, 2, 1, 2, 3);
    {
        std::ofstream bad(td.path / "real" / "broken.png",
                          std::ios::binary);
        bad << "not a png at all";
    }
    write_solid_png(td.path / "fake" / "f.png", 2, 2, 9, 9, 9);
    Dataset ds = Dataset::from_directory(td.path.string(), 2);
    REQUIRE(ds.size() == 2);
    CHECK(ds.manifest().skipped == 1);
    CHECK(ds.label(0) == 0);
    CHECK(ds.label(1) == 1);
}

TEST_CASE("from_directory: split assignment replays for the same seed") {
    TempDir td("split");
    fs::create_directories(td.path / "real");
    fs::create_directories(td.path / "fake");
    for (int i = 0; i < 4; ++i) {
        write_solid_png(td.path / "real" / ("r" + std::to_string(i) + ".png"),
                        2, 2, static_cast<unsigned char>(i), 0, 0);
        write_solid_png(td.path / "fake" / ("f" + std::to_string(i) + ".png"),
                        2, 2, 0, static_cast<unsigned char>(i), 0);
    }
    Dataset a = Dataset::from_directory(td.path.string(), 2);
    Dataset b = Dataset::from_directory(td.path.string(), 2);
    split_manifest(a.manifest(), 0.5, 33);
    split_manifest(b.manifest(), 0.5, 33);
    CHECK(a.manifest().train_idx == b.manifest().train_idx);
    CHECK(a.manifest().val_idx == b.manifest().val_idx);
}
