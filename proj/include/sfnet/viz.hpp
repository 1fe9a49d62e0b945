#pragma once

#include <string>
#include <vector>

#include "sfnet/data.hpp"
#include "sfnet/model.hpp"

namespace sfnet {

// Per-class mean log-magnitude DCT maps plus their signed difference.
// Maps are raw (pre-quantization) so callers can test band statistics.
struct DctVizResult {
    int extent = 0;
    std::vector<float> real_map;  // extent*extent, log1p(mean |DCT|)
    std::vector<float> fake_map;
    std::vector<float> diff_map;  // real_map - fake_map
};

// Luma conversion -> orthonormal DCT-II per image -> per-class mean of
// absolute coefficients -> log1p. Throws if either class is empty.
DctVizResult dct_viz(const DatasetView& data);

// Writes real.png / fake.png (min-max scaled to [0,255]) and diff.png
// (symmetric scaling, 128 = zero) into out_dir.
void write_dct_viz(const DctVizResult& viz, const std::string& out_dir);

struct GradCamResult {
    int extent = 0;                         // input extent
    std::vector<float> heatmap;             // extent*extent in [0,1]
    std::vector<unsigned char> overlay_rgb; // interleaved, extent x extent
};

// Gradient of the target-class logit w.r.t. the tapped refine-group output
// ("refine.<g>"); channel weights are spatially averaged gradients; the
// weighted channel sum is ReLU'd, bilinearly upsampled to the input extent,
// and min-max normalized (all-zero maps stay zero).
GradCamResult gradcam(SFNet& model, const Tensor& image, int target_class,
                      const std::string& layer_tag);

void write_gradcam_png(const GradCamResult& cam, const std::string& path);

}  // namespace sfnet
