#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "xraynet/data.hpp"
#include "xraynet/model.hpp"

namespace xraynet {

struct TrainConfig {
    int epochs = 1;
    int batchSize = 4;
    double learningRate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    long step = 0;

    // Zero moments shaped like the parameter list.
    static AdamState forModel(const ModelGraph& model);
};

struct TrainLogRecord {
    int epoch = 0;
    int batch = 0;
    double loss = 0.0;
    double runningAccuracy = 0.0;
    long wallMillis = 0;
};

// One Adam update over aligned parameter/gradient lists:
//   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
//   theta <- theta - lr * mhat / (sqrt(vhat) + eps)
void adamStep(std::vector<std::pair<std::string, Tensor>>& params,
              const std::vector<Tensor>& grads, AdamState& state, const TrainConfig& cfg);

// Mini-batch loop: seeded shuffle per epoch, mean batch loss backpropagated,
// one Adam step per batch (final short batch included). Writes one JSON line
// per batch to `logStream` when given.
std::vector<TrainLogRecord> train(ModelGraph& model, const std::vector<Sample>& trainSet,
                                  const TrainConfig& cfg, std::ostream* logStream = nullptr);

}  // namespace xraynet
