#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "xraynet/errors.hpp"
#include "xraynet/rng.hpp"
#include "xraynet/tape.hpp"
#include "xraynet/tensor.hpp"

namespace xraynet {

enum class Arch { UNet, WNet };

std::string archName(Arch arch);
Arch archFromName(const std::string& name);

struct ModelConfig {
    Arch arch = Arch::WNet;
    int inputSize = 400;
    int inputChannels = 1;
    int baseChannels = 32;
    int depth = 4;
    int numClasses = 2;
    int uPasses = 2;  // 1 for U-Net, 2 for W-Net
    std::uint64_t seed = 0;

    void validate() const;
};

// Default uPasses for an architecture name.
ModelConfig makeConfig(Arch arch);

struct StageShape {
    int channels;
    int height;
    int width;

    bool operator==(const StageShape&) const = default;
};

// Encoder stage shapes (pre-pool) for levels 0..depth-1 followed by the
// bottleneck shape. depth 0 degenerates to the single top stage.
std::vector<StageShape> stageShapes(const ModelConfig& config);

struct ParamSpec {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t fanIn;
};

// Stable, ordered parameter inventory; build order equals consumption order
// in buildForward below.
std::vector<ParamSpec> parameterSpecs(const ModelConfig& config);

struct ModelGraph {
    ModelConfig config;
    std::vector<std::pair<std::string, Tensor>> parameters;

    std::size_t totalParameterCount() const;
};

// Fresh model: conv/dense weights ~ N(0, 2/fanIn), biases zero, drawn from
// rng in parameter order.
ModelGraph buildModel(const ModelConfig& config, Rng& rng);

template <typename T>
struct ForwardNodes {
    int logits = -1;
    int finalFeatures = -1;  // last full-resolution feature block (baseChannels)
    // Encoder stage outputs (pre-pool) of the first U plus its bottleneck,
    // for shape verification.
    std::vector<int> firstUStages;
};

// Records the full network onto `tape`. `paramIds` must follow the
// parameterSpecs order; `inputId` holds a [inputChannels,S,S] leaf.
template <typename T>
ForwardNodes<T> buildForward(Tape<T>& tape, const ModelConfig& config,
                             const std::vector<int>& paramIds, int inputId) {
    config.validate();
    const auto specs = parameterSpecs(config);
    if (paramIds.size() != specs.size()) {
        throw UsageError("buildForward: parameter id count does not match config inventory");
    }
    std::size_t next = 0;
    auto takePair = [&]() {
        const int w = paramIds[next];
        const int b = paramIds[next + 1];
        next += 2;
        return std::pair<int, int>{w, b};
    };
    auto convBlock = [&](int x) {
        auto [w, b] = takePair();
        return tape.relu(tape.conv2dSame(x, w, b));
    };

    ForwardNodes<T> out;
    int x = inputId;
    for (int u = 0; u < config.uPasses; ++u) {
        std::vector<int> skips;
        for (int s = 0; s < config.depth; ++s) {
            x = convBlock(convBlock(x));
            skips.push_back(x);
            if (u == 0) {
                out.firstUStages.push_back(x);
            }
            x = tape.maxPool2x2(x);
        }
        x = convBlock(convBlock(x));
        if (u == 0) {
            out.firstUStages.push_back(x);
        }
        for (int s = config.depth - 1; s >= 0; --s) {
            x = tape.concatChannels(tape.upsample2x(x), skips[static_cast<std::size_t>(s)]);
            x = convBlock(convBlock(x));
        }
    }
    out.finalFeatures = x;
    auto [hw, hb] = takePair();
    out.logits = tape.dense(tape.globalAvgPool(x), hw, hb);
    return out;
}

// Forward pass through a frozen model; returns softmax probabilities [K].
Tensor forwardClassify(const ModelGraph& model, const Tensor& image);

}  // namespace xraynet
