#include "sfnet/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace sfnet {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool read_png(const std::string& path, ImageU8& out, std::string* err) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) {
        if (err) *err = "cannot open " + path;
        return false;
    }
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8)) {
        if (err) *err = "not a PNG file: " + path;
        return false;
    }
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) {
        if (err) *err = "png_create_read_struct failed";
        return false;
    }
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        if (err) *err = "png_create_info_struct failed";
        return false;
    }
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        if (err) *err = "corrupt PNG: " + path;
        return false;
    }
    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);

    // Normalize everything to 8-bit RGB or gray.
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        if (err) *err = "unsupported channel count in " + path;
        return false;
    }
    out.width = static_cast<int>(w);
    out.height = static_cast<int>(h);
    out.channels = channels;
    out.pixels.assign(static_cast<std::size_t>(w) * h * channels, 0);
    rows.resize(h);
    for (png_uint_32 r = 0; r < h; ++r)
        rows[r] = out.pixels.data() + static_cast<std::size_t>(r) * w * channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

bool read_ppm(const std::string& path, ImageU8& out, std::string* err) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        if (err) *err = "cannot open " + path;
        return false;
    }
    auto next_token = [&f]() {
        std::string tok;
        int ch;
        while ((ch = f.get()) != EOF) {
            if (ch == '#') {  // comment to end of line
                while ((ch = f.get()) != EOF && ch != '\n') {}
                continue;
            }
            if (!std::isspace(ch)) {
                tok.push_back(static_cast<char>(ch));
                while ((ch = f.peek()) != EOF && !std::isspace(ch))
                    tok.push_back(static_cast<char>(f.get()));
                break;
            }
        }
        return tok;
    };
    if (next_token() != "P6") {
        if (err) *err = "not a binary PPM (P6): " + path;
        return false;
    }
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(next_token());
        h = std::stoi(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::exception&) {
        if (err) *err = "malformed PPM header: " + path;
        return false;
    }
    if (w <= 0 || h <= 0 || maxval != 255) {
        if (err) *err = "unsupported PPM geometry in " + path;
        return false;
    }
    f.get();  // single whitespace after maxval
    out.width = w;
    out.height = h;
    out.channels = 3;
    out.pixels.resize(static_cast<std::size_t>(w) * h * 3);
    f.read(reinterpret_cast<char*>(out.pixels.data()),
           static_cast<std::streamsize>(out.pixels.size()));
    if (f.gcount() != static_cast<std::streamsize>(out.pixels.size())) {
        if (err) *err = "truncated PPM payload: " + path;
        return false;
    }
    return true;
}

void write_png(const std::string& path, int width, int height, int channels,
               const unsigned char* data) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw std::runtime_error("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                              nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("PNG encode failed for " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width),
                 static_cast<png_uint_32>(height), 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int r = 0; r < height; ++r)
        rows[static_cast<std::size_t>(r)] = const_cast<png_bytep>(
            data + static_cast<std::size_t>(r) * width * channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

bool has_suffix(const std::string& s, const char* suf) {
    const std::size_t n = std::strlen(suf);
    if (s.size() < n) return false;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::tolower(static_cast<unsigned char>(s[s.size() - n + i])) !=
            suf[i])
            return false;
    }
    return true;
}

}  // namespace

bool read_image(const std::string& path, ImageU8& out, std::string* err) {
    if (has_suffix(path, ".png")) return read_png(path, out, err);
    if (has_suffix(path, ".ppm")) return read_ppm(path, out, err);
    if (err) *err = "unsupported image format: " + path;
    return false;
}

void write_png_gray(const std::string& path, int width, int height,
                    const unsigned char* data) {
    write_png(path, width, height, 1, data);
}

void write_png_rgb(const std::string& path, int width, int height,
                   const unsigned char* data) {
    write_png(path, width, height, 3, data);
}

void write_ppm(const std::string& path, int width, int height,
               const unsigned char* rgb) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "P6\n" << width << " " << height << "\n255\n";
    f.write(reinterpret_cast<const char*>(rgb),
            static_cast<std::streamsize>(3) * width * height);
    if (!f) throw std::runtime_error("short write to " + path);
}

ImageU8 resize_nearest(const ImageU8& in, int width, int height) {
    if (in.width <= 0 || in.height <= 0)
        throw std::invalid_argument("resize: empty source image");
    ImageU8 out;
    out.width = width;
    out.height = height;
    out.channels = in.channels;
    out.pixels.resize(static_cast<std::size_t>(width) * height * in.channels);
    for (int r = 0; r < height; ++r) {
        const int sr = static_cast<int>(
            (static_cast<std::int64_t>(r) * in.height) / height);
        for (int c = 0; c < width; ++c) {
            const int sc = static_cast<int>(
                (static_cast<std::int64_t>(c) * in.width) / width);
            const unsigned char* s =
                in.pixels.data() +
                (static_cast<std::size_t>(sr) * in.width + sc) * in.channels;
            unsigned char* d =
                out.pixels.data() +
                (static_cast<std::size_t>(r) * width + c) * in.channels;
            for (int ch = 0; ch < in.channels; ++ch) d[ch] = s[ch];
        }
    }
    return out;
}

std::vector<float> to_float_chw(const ImageU8& img) {
    const std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
    std::vector<float> out(3 * plane);
    for (std::size_t i = 0; i < plane; ++i) {
        for (int ch = 0; ch < 3; ++ch) {
            const int src = img.channels == 1 ? 0 : ch;
            out[static_cast<std::size_t>(ch) * plane + i] =
                static_cast<float>(
                    img.pixels[i * static_cast<std::size_t>(img.channels) +
                               static_cast<std::size_t>(src)]) /
                255.0f;
        }
    }
    return out;
}

}  // namespace sfnet
