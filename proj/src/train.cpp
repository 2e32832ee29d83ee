#include "xraynet/train.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "xraynet/errors.hpp"
#include "xraynet/rng.hpp"

namespace xraynet {

void TrainConfig::validate() const {
    if (epochs < 1) {
        throw UsageError("epochs must be >= 1");
    }
    if (batchSize < 1) {
        throw UsageError("batchSize must be >= 1");
    }
    if (learningRate <= 0.0) {
        throw UsageError("learningRate must be > 0");
    }
    if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0) {
        throw UsageError("beta1 and beta2 must lie strictly between 0 and 1");
    }
}

AdamState AdamState::forModel(const ModelGraph& model) {
    AdamState state;
    for (const auto& [name, tensor] : model.parameters) {
        state.m.push_back(Tensor::zerosLike(tensor));
        state.v.push_back(Tensor::zerosLike(tensor));
    }
    return state;
}

void adamStep(std::vector<std::pair<std::string, Tensor>>& params,
              const std::vector<Tensor>& grads, AdamState& state, const TrainConfig& cfg) {
    cfg.validate();
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw ShapeError("adamStep: parameter, gradient and state counts differ");
    }
    state.step += 1;
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    const double mCorr = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double vCorr = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& theta = params[p].second;
        const Tensor& g = grads[p];
        if (!theta.sameShape(g)) {
            throw ShapeError("adamStep: gradient shape " + g.shapeString() +
                             " does not match parameter '" + params[p].first + "' " +
                             theta.shapeString());
        }
        Tensor& m = state.m[p];
        Tensor& v = state.v[p];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double gi = static_cast<double>(g[i]);
            const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
            const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            const double mHat = mi / mCorr;
            const double vHat = vi / vCorr;
            theta[i] = static_cast<float>(static_cast<double>(theta[i]) -
                                          cfg.learningRate * mHat /
                                              (std::sqrt(vHat) + cfg.epsilon));
        }
    }
}

std::vector<TrainLogRecord> train(ModelGraph& model, const std::vector<Sample>& trainSet,
                                  const TrainConfig& cfg, std::ostream* logStream) {
    cfg.validate();
    if (trainSet.empty()) {
        throw UsageError("train set is empty");
    }
    const std::size_t inputSize = static_cast<std::size_t>(model.config.inputSize);
    for (const Sample& s : trainSet) {
        if (s.image.rank() != 3 ||
            s.image.dim(0) != static_cast<std::size_t>(model.config.inputChannels) ||
            s.image.dim(1) != inputSize || s.image.dim(2) != inputSize) {
            throw DataError("sample '" + s.sourcePath + "' shape " + s.image.shapeString() +
                            " does not match the model input");
        }
        if (s.labelIndex < 0 || s.labelIndex >= model.config.numClasses) {
            throw DataError("sample '" + s.sourcePath + "' has label index outside the class vocabulary");
        }
    }

    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(cfg.seed);
    AdamState state = AdamState::forModel(model);
    std::vector<TrainLogRecord> records;
    std::vector<std::size_t> order(trainSet.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.nextBelow(i));
            std::swap(order[i - 1], order[j]);
        }
        long seen = 0;
        long correct = 0;
        int batchIndex = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batchSize)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batchSize));
            Tape<float> tape;
            std::vector<int> paramIds;
            paramIds.reserve(model.parameters.size());
            for (const auto& [name, tensor] : model.parameters) {
                paramIds.push_back(tape.leaf(tensor));
            }
            int lossSum = -1;
            for (std::size_t k = start; k < end; ++k) {
                const Sample& s = trainSet[order[k]];
                const int input = tape.leaf(s.image);
                const auto nodes = buildForward(tape, model.config, paramIds, input);
                const int loss = tape.softmaxCrossEntropy(
                    nodes.logits, static_cast<std::size_t>(s.labelIndex));
                const Tensor& probs = tape.probs(loss);
                std::size_t argmax = 0;
                for (std::size_t c = 1; c < probs.size(); ++c) {
                    if (probs[c] > probs[argmax]) {
                        argmax = c;
                    }
                }
                if (argmax == static_cast<std::size_t>(s.labelIndex)) {
                    ++correct;
                }
                ++seen;
                lossSum = lossSum < 0 ? loss : tape.add(lossSum, loss);
            }
            const int meanLoss =
                tape.scale(lossSum, 1.0f / static_cast<float>(end - start));
            const double lossValue = static_cast<double>(tape.value(meanLoss)[0]);
            if (!std::isfinite(lossValue)) {
                std::ostringstream msg;
                msg << "non-finite loss " << lossValue << " at epoch " << epoch << " batch "
                    << batchIndex << "; aborting training";
                throw NumericError(msg.str());
            }
            tape.backward(meanLoss);
            std::vector<Tensor> grads;
            grads.reserve(paramIds.size());
            for (int id : paramIds) {
                grads.push_back(tape.grad(id));
            }
            adamStep(model.parameters, grads, state, cfg);

            TrainLogRecord rec;
            rec.epoch = epoch;
            rec.batch = batchIndex;
            rec.loss = lossValue;
            rec.runningAccuracy = static_cast<double>(correct) / static_cast<double>(seen);
            rec.wallMillis = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count();
            if (logStream) {
                (*logStream) << "{\"epoch\":" << rec.epoch << ",\"batch\":" << rec.batch
                             << ",\"loss\":" << rec.loss << ",\"acc\":" << rec.runningAccuracy
                             << ",\"ms\":" << rec.wallMillis << "}\n";
            }
            records.push_back(rec);
            ++batchIndex;
        }
    }
    return records;
}

}  // namespace xraynet
