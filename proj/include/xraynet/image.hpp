#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xraynet/tensor.hpp"

namespace xraynet {

// 8-bit raster image, interleaved channels (1 = gray, 3 = RGB).
struct RasterImage {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> pixels;
};

// Reads PNM rasters: P2/P5 (grayscale) and P3/P6 (RGB), 8-bit maxval.
RasterImage readPnm(const std::string& path);

void writePgm(const RasterImage& image, const std::string& path);
void writePpm(const RasterImage& image, const std::string& path);

// Decodes an image file, converts RGB to luma (0.299/0.587/0.114), resizes
// bilinearly to targetSize x targetSize and scales intensities to [0,1].
// Returns a [1,S,S] tensor.
Tensor decodeAndResize(const std::string& path, int targetSize);

// Half-pixel-center bilinear resampling of a single-channel float image.
TensorT<float> bilinearResize(const TensorT<float>& gray, int outH, int outW);

}  // namespace xraynet
