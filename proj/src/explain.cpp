#include "xraynet/explain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "xraynet/errors.hpp"
#include "xraynet/image.hpp"

namespace xraynet {

namespace {

void normalizeToUnit(Tensor& map) {
    float maxVal = 0.0f;
    for (std::size_t i = 0; i < map.size(); ++i) {
        maxVal = std::max(maxVal, map[i]);
    }
    if (maxVal > 0.0f) {
        for (std::size_t i = 0; i < map.size(); ++i) {
            map[i] /= maxVal;
        }
    }
}

void checkClassIndex(const ModelGraph& model, int classIndex) {
    if (classIndex < 0 || classIndex >= model.config.numClasses) {
        throw UsageError("class index " + std::to_string(classIndex) +
                         " out of range for " + std::to_string(model.config.numClasses) +
                         " classes");
    }
}

}  // namespace

HeatMap gradcam(const ModelGraph& model, const Tensor& image, int classIndex) {
    checkClassIndex(model, classIndex);
    const std::size_t s = static_cast<std::size_t>(model.config.inputSize);
    if (image.rank() != 3 || image.dim(1) != s || image.dim(2) != s) {
        throw ShapeError("image shape " + image.shapeString() + " does not match model input");
    }

    Tape<float> tape;
    std::vector<int> ids;
    ids.reserve(model.parameters.size());
    for (const auto& [name, tensor] : model.parameters) {
        ids.push_back(tape.leaf(tensor));
    }
    const int input = tape.leaf(image);
    const auto nodes = buildForward(tape, model.config, ids, input);
    const int classLogit = tape.pick(nodes.logits, static_cast<std::size_t>(classIndex));
    tape.backward(classLogit);

    const Tensor& activations = tape.value(nodes.finalFeatures);
    const Tensor& gradients = tape.grad(nodes.finalFeatures);
    const std::size_t channels = activations.dim(0);
    const std::size_t area = activations.dim(1) * activations.dim(2);

    HeatMap map;
    map.classIndex = classIndex;
    map.method = HeatMapMethod::GradCam;
    map.values = Tensor({activations.dim(1), activations.dim(2)});
    for (std::size_t c = 0; c < channels; ++c) {
        const float* gradPlane = gradients.data() + c * area;
        float weight = 0.0f;
        for (std::size_t i = 0; i < area; ++i) {
            weight += gradPlane[i];
        }
        weight /= static_cast<float>(area);
        const float* actPlane = activations.data() + c * area;
        for (std::size_t i = 0; i < area; ++i) {
            map.values[i] += weight * actPlane[i];
        }
    }
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        map.values[i] = std::max(map.values[i], 0.0f);
    }
    normalizeToUnit(map.values);
    return map;
}

HeatMap occlusionMap(const ModelGraph& model, const Tensor& image, int classIndex,
                     int patchSize, int stride) {
    checkClassIndex(model, classIndex);
    const int s = model.config.inputSize;
    if (patchSize < 1 || patchSize > s) {
        throw UsageError("patch size must lie in [1, inputSize]");
    }
    if (stride < 1) {
        throw UsageError("stride must be >= 1");
    }

    const Tensor baseline = forwardClassify(model, image);
    const float p0 = baseline[static_cast<std::size_t>(classIndex)];

    float mean = 0.0f;
    for (std::size_t i = 0; i < image.size(); ++i) {
        mean += image[i];
    }
    mean /= static_cast<float>(image.size());

    const std::size_t side = static_cast<std::size_t>(s);
    Tensor drops({side, side});
    Tensor coverage({side, side});
    for (int y0 = 0; y0 < s; y0 += stride) {
        for (int x0 = 0; x0 < s; x0 += stride) {
            const int y1 = std::min(s, y0 + patchSize);
            const int x1 = std::min(s, x0 + patchSize);
            Tensor occluded = image;
            for (std::size_t c = 0; c < image.dim(0); ++c) {
                for (int y = y0; y < y1; ++y) {
                    for (int x = x0; x < x1; ++x) {
                        occluded[(c * side + static_cast<std::size_t>(y)) * side +
                                 static_cast<std::size_t>(x)] = mean;
                    }
                }
            }
            const Tensor probs = forwardClassify(model, occluded);
            const float drop =
                std::max(0.0f, p0 - probs[static_cast<std::size_t>(classIndex)]);
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) {
                    const std::size_t idx =
                        static_cast<std::size_t>(y) * side + static_cast<std::size_t>(x);
                    drops[idx] += drop;
                    coverage[idx] += 1.0f;
                }
            }
        }
    }

    HeatMap map;
    map.classIndex = classIndex;
    map.method = HeatMapMethod::Occlusion;
    map.values = Tensor({side, side});
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        map.values[i] = coverage[i] > 0.0f ? drops[i] / coverage[i] : 0.0f;
    }
    normalizeToUnit(map.values);
    return map;
}

void renderHeatmap(const HeatMap& map, const Tensor& baseImage, const std::string& path) {
    const std::size_t h = map.values.dim(0), w = map.values.dim(1);
    const Tensor* base = &baseImage;
    Tensor squeezed;
    if (baseImage.rank() == 3 && baseImage.dim(0) == 1) {
        squeezed = baseImage.reshape({baseImage.dim(1), baseImage.dim(2)});
        base = &squeezed;
    }
    if (base->rank() != 2 || base->dim(0) != h || base->dim(1) != w) {
        throw ShapeError("base image shape does not match the heat map");
    }

    RasterImage img;
    img.width = static_cast<int>(w);
    img.height = static_cast<int>(h);
    img.channels = 3;
    img.pixels.resize(3 * h * w);
    for (std::size_t i = 0; i < h * w; ++i) {
        const float gray = std::clamp((*base)[i], 0.0f, 1.0f);
        const float heat = std::clamp(map.values[i], 0.0f, 1.0f);
        // Warm overlay: red saturates first, green follows, no blue.
        const float r = (1.0f - heat) * gray + heat * 1.0f;
        const float g = (1.0f - heat) * gray + heat * 0.6f * heat;
        const float b = (1.0f - heat) * gray;
        img.pixels[3 * i] = static_cast<std::uint8_t>(std::lround(r * 255.0f));
        img.pixels[3 * i + 1] = static_cast<std::uint8_t>(std::lround(g * 255.0f));
        img.pixels[3 * i + 2] = static_cast<std::uint8_t>(std::lround(b * 255.0f));
    }
    writePpm(img, path);
}

void dumpHeatmapCsv(const HeatMap& map, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        throw IoError("cannot open heat map CSV for writing: " + path);
    }
    os.precision(9);
    const std::size_t h = map.values.dim(0), w = map.values.dim(1);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            os << (x ? "," : "") << map.values[y * w + x];
        }
        os << "\n";
    }
}

}  // namespace xraynet
