#pragma once

#include <string>
#include <vector>

namespace sfnet {

// Interleaved 8-bit image (channels = 1 or 3).
struct ImageU8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<unsigned char> pixels;  // row-major, interleaved
};

// Decodes a PNG or binary PPM (P6) file. Returns false with *err set on any
// decode problem instead of throwing (directory scans skip bad files).
bool read_image(const std::string& path, ImageU8& out, std::string* err);

// 8-bit grayscale / RGB PNG writers; throw std::runtime_error on I/O failure.
void write_png_gray(const std::string& path, int width, int height,
                    const unsigned char* data);
void write_png_rgb(const std::string& path, int width, int height,
                   const unsigned char* data);

// Binary PPM (P6) writer, used by tests to exercise the PPM decode path.
void write_ppm(const std::string& path, int width, int height,
               const unsigned char* rgb);

// Nearest-neighbor resample (any channel count).
ImageU8 resize_nearest(const ImageU8& in, int width, int height);

// Planar float CHW in [0,1]; grayscale inputs are replicated to 3 channels.
std::vector<float> to_float_chw(const ImageU8& img);

}  // namespace sfnet
