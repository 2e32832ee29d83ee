#include "xraynet/model.hpp"

#include <cmath>
#include <sstream>

namespace xraynet {

std::string archName(Arch arch) { return arch == Arch::UNet ? "unet" : "wnet"; }

Arch archFromName(const std::string& name) {
    if (name == "unet") {
        return Arch::UNet;
    }
    if (name == "wnet") {
        return Arch::WNet;
    }
    throw ConfigError("unknown architecture '" + name + "' (expected unet or wnet)");
}

ModelConfig makeConfig(Arch arch) {
    ModelConfig cfg;
    cfg.arch = arch;
    cfg.uPasses = arch == Arch::WNet ? 2 : 1;
    return cfg;
}

void ModelConfig::validate() const {
    if (inputSize < 1 || inputChannels < 1 || baseChannels < 1 || depth < 0) {
        throw ConfigError("model dimensions must be positive");
    }
    if (uPasses < 1) {
        throw ConfigError("uPasses must be >= 1");
    }
    if (numClasses < 2) {
        throw ConfigError("numClasses must be >= 2");
    }
    if (inputSize % (1 << depth) != 0) {
        std::ostringstream msg;
        msg << "inputSize " << inputSize << " is not divisible by 2^depth = " << (1 << depth);
        throw ConfigError(msg.str());
    }
}

namespace {

int stageChannels(const ModelConfig& cfg, int level) { return cfg.baseChannels << level; }

int bottleneckChannels(const ModelConfig& cfg) {
    return cfg.depth > 0 ? stageChannels(cfg, cfg.depth - 1) : cfg.baseChannels;
}

}  // namespace

std::vector<StageShape> stageShapes(const ModelConfig& config) {
    config.validate();
    std::vector<StageShape> shapes;
    int size = config.inputSize;
    for (int s = 0; s < config.depth; ++s) {
        shapes.push_back({stageChannels(config, s), size, size});
        size /= 2;
    }
    shapes.push_back({bottleneckChannels(config), size, size});
    return shapes;
}

std::vector<ParamSpec> parameterSpecs(const ModelConfig& config) {
    config.validate();
    std::vector<ParamSpec> specs;
    auto conv = [&](const std::string& name, int outC, int inC) {
        specs.push_back({name + ".weight",
                         {static_cast<std::size_t>(outC), static_cast<std::size_t>(inC), 3, 3},
                         static_cast<std::size_t>(inC) * 9});
        specs.push_back({name + ".bias", {static_cast<std::size_t>(outC)},
                         static_cast<std::size_t>(inC) * 9});
    };
    for (int u = 0; u < config.uPasses; ++u) {
        const std::string prefix = "u" + std::to_string(u) + ".";
        int prev = u == 0 ? config.inputChannels : config.baseChannels;
        for (int s = 0; s < config.depth; ++s) {
            const std::string stage = prefix + "enc" + std::to_string(s) + ".";
            const int ch = stageChannels(config, s);
            conv(stage + "conv0", ch, prev);
            conv(stage + "conv1", ch, ch);
            prev = ch;
        }
        const int bott = bottleneckChannels(config);
        conv(prefix + "bottleneck.conv0", bott, prev);
        conv(prefix + "bottleneck.conv1", bott, bott);
        prev = bott;
        for (int s = config.depth - 1; s >= 0; --s) {
            const std::string stage = prefix + "dec" + std::to_string(s) + ".";
            const int ch = stageChannels(config, s);
            conv(stage + "conv0", ch, prev + ch);
            conv(stage + "conv1", ch, ch);
            prev = ch;
        }
    }
    const std::size_t inUnits = static_cast<std::size_t>(config.baseChannels);
    specs.push_back({"head.dense.weight",
                     {static_cast<std::size_t>(config.numClasses), inUnits}, inUnits});
    specs.push_back(
        {"head.dense.bias", {static_cast<std::size_t>(config.numClasses)}, inUnits});
    return specs;
}

std::size_t ModelGraph::totalParameterCount() const {
    std::size_t n = 0;
    for (const auto& [name, tensor] : parameters) {
        n += tensor.size();
    }
    return n;
}

ModelGraph buildModel(const ModelConfig& config, Rng& rng) {
    config.validate();
    ModelGraph model;
    model.config = config;
    for (const ParamSpec& spec : parameterSpecs(config)) {
        const bool isBias = spec.name.ends_with(".bias");
        if (isBias) {
            model.parameters.emplace_back(spec.name, Tensor(spec.shape, 0.0f));
        } else {
            const double std = std::sqrt(2.0 / static_cast<double>(spec.fanIn));
            model.parameters.emplace_back(spec.name,
                                          rng.fillNormal<float>(spec.shape, 0.0, std));
        }
    }
    return model;
}

Tensor forwardClassify(const ModelGraph& model, const Tensor& image) {
    const ModelConfig& cfg = model.config;
    const std::size_t s = static_cast<std::size_t>(cfg.inputSize);
    if (image.rank() != 3 || image.dim(0) != static_cast<std::size_t>(cfg.inputChannels) ||
        image.dim(1) != s || image.dim(2) != s) {
        throw ShapeError("input image shape " + image.shapeString() +
                         " does not match model input");
    }
    Tape<float> tape;
    std::vector<int> ids;
    ids.reserve(model.parameters.size());
    for (const auto& [name, tensor] : model.parameters) {
        ids.push_back(tape.leaf(tensor));
    }
    const int input = tape.leaf(image);
    const auto nodes = buildForward(tape, cfg, ids, input);
    return Tape<float>::softmax(tape.value(nodes.logits));
}

}  // namespace xraynet
