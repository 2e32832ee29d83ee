#pragma once

#include <string>

#include "xraynet/model.hpp"

namespace xraynet {

enum class HeatMapMethod { GradCam, Occlusion };

struct HeatMap {
    Tensor values;  // [S,S] in [0,1]; max is 1 unless the raw map is all zero
    int classIndex = 0;
    HeatMapMethod method = HeatMapMethod::GradCam;
};

// Gradient-weighted class activation map over the final full-resolution
// feature block: per-channel weights are the spatial means of the class-logit
// gradient; map = ReLU(sum_k w_k A_k) rescaled to [0,1].
HeatMap gradcam(const ModelGraph& model, const Tensor& image, int classIndex);

// Independent attribution oracle: each patch is replaced by the image mean
// and the resulting drop in the class probability is spread over the pixels
// the patch covers, then rescaled to [0,1].
HeatMap occlusionMap(const ModelGraph& model, const Tensor& image, int classIndex,
                     int patchSize, int stride);

// Grayscale base with a warm overlay whose alpha tracks the heat value.
// Deterministic bytes for identical inputs.
void renderHeatmap(const HeatMap& map, const Tensor& baseImage, const std::string& path);

// Raw S x S float dump, one CSV row per image row.
void dumpHeatmapCsv(const HeatMap& map, const std::string& path);

}  // namespace xraynet
