#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xraynet/checkpoint.hpp"
#include "xraynet/data.hpp"
#include "xraynet/errors.hpp"
#include "xraynet/explain.hpp"
#include "xraynet/image.hpp"
#include "xraynet/metrics.hpp"
#include "xraynet/model.hpp"
#include "xraynet/rng.hpp"
#include "xraynet/train.hpp"

namespace {

using namespace xraynet;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

void echo(const std::string& key, const std::string& value) {
    std::cout << "config " << key << "=" << value << "\n";
}

void echo(const std::string& key, double value) {
    std::cout << "config " << key << "=" << value << "\n";
}

void echo(const std::string& key, long long value) {
    std::cout << "config " << key << "=" << value << "\n";
}

std::vector<std::string> vocabularyForClasses(int numClasses) {
    if (numClasses == 2) {
        return {"covid", "normal"};
    }
    if (numClasses == 3) {
        return {"covid", "normal", "pneumonia"};
    }
    throw UsageError("supported class counts are 2 and 3");
}

void echoModelConfig(const ModelConfig& cfg) {
    echo("arch", archName(cfg.arch));
    echo("input-size", static_cast<long long>(cfg.inputSize));
    echo("input-channels", static_cast<long long>(cfg.inputChannels));
    echo("base-channels", static_cast<long long>(cfg.baseChannels));
    echo("depth", static_cast<long long>(cfg.depth));
    echo("classes", static_cast<long long>(cfg.numClasses));
    echo("u-passes", static_cast<long long>(cfg.uPasses));
    echo("seed", static_cast<long long>(cfg.seed));
}

void printConfusion(const ConfusionMatrix& cm) {
    std::cout << "confusion matrix (rows = actual, columns = predicted)\n";
    std::cout << std::setw(12) << "" ;
    for (const auto& name : cm.classNames) {
        std::cout << std::setw(12) << ("pred:" + name);
    }
    std::cout << "\n";
    for (std::size_t r = 0; r < cm.counts.size(); ++r) {
        std::cout << std::setw(12) << ("actual:" + cm.classNames[r]);
        for (long v : cm.counts[r]) {
            std::cout << std::setw(12) << v;
        }
        std::cout << "\n";
    }
}

int runSplit(const std::string& manifestPath, double trainFraction, std::uint64_t seed,
             const std::string& outPath) {
    echo("manifest", manifestPath);
    echo("train-fraction", trainFraction);
    echo("seed", static_cast<long long>(seed));
    echo("out", outPath);
    DatasetManifest manifest = loadManifest(manifestPath);
    SplitSpec spec;
    spec.trainFraction = trainFraction;
    spec.seed = seed;
    spec.overwrite = true;
    stratifiedSplit(manifest, spec);
    saveManifest(manifest, outPath);
    std::map<std::string, int> trainHist, testHist;
    for (const ManifestEntry& e : manifest.entries) {
        (*e.split == Split::Train ? trainHist : testHist)[e.label] += 1;
    }
    for (const std::string& cls : manifest.classVocabulary) {
        std::cout << "split " << cls << " train=" << trainHist[cls]
                  << " test=" << testHist[cls] << "\n";
    }
    return kExitOk;
}

int runTrain(const std::string& manifestPath, const ModelConfig& modelCfg,
             const TrainConfig& trainCfg, const std::string& outPath,
             const std::string& logPath) {
    echo("manifest", manifestPath);
    echoModelConfig(modelCfg);
    echo("epochs", static_cast<long long>(trainCfg.epochs));
    echo("batch-size", static_cast<long long>(trainCfg.batchSize));
    echo("lr", trainCfg.learningRate);
    echo("out", outPath);
    if (!logPath.empty()) {
        echo("log", logPath);
    }
    modelCfg.validate();
    trainCfg.validate();

    DatasetManifest manifest = loadManifest(manifestPath);
    if (static_cast<int>(manifest.classVocabulary.size()) != modelCfg.numClasses) {
        throw DataError("manifest has " + std::to_string(manifest.classVocabulary.size()) +
                        " classes but the model is configured for " +
                        std::to_string(modelCfg.numClasses));
    }
    const std::vector<Sample> trainSet =
        loadSamples(manifest, Split::Train, modelCfg.inputSize);
    if (trainSet.empty()) {
        throw UsageError("manifest has no split=train rows; run the split subcommand first");
    }

    Rng rng(modelCfg.seed);
    ModelGraph model = buildModel(modelCfg, rng);
    std::ofstream logStream;
    if (!logPath.empty()) {
        logStream.open(logPath, std::ios::trunc);
        if (!logStream) {
            throw IoError("cannot open training log for writing: " + logPath);
        }
    }
    const auto records =
        train(model, trainSet, trainCfg, logPath.empty() ? nullptr : &logStream);
    saveCheckpoint(model, outPath);
    const TrainLogRecord& last = records.back();
    std::cout << "trained " << records.size() << " batches; final loss " << last.loss
              << " accuracy " << last.runningAccuracy << "\n";
    std::cout << "checkpoint written to " << outPath << "\n";
    return kExitOk;
}

int runEval(const std::string& modelPath, const std::string& manifestPath,
            const std::string& reportPath, const std::string& rocPath) {
    echo("model", modelPath);
    echo("manifest", manifestPath);
    echo("report", reportPath);
    echo("roc", rocPath);
    const ModelGraph model = loadCheckpoint(modelPath);
    const DatasetManifest manifest = loadManifest(manifestPath);
    if (static_cast<int>(manifest.classVocabulary.size()) != model.config.numClasses) {
        throw DataError("class-count mismatch: model expects " +
                        std::to_string(model.config.numClasses) + " classes, manifest has " +
                        std::to_string(manifest.classVocabulary.size()));
    }
    const std::vector<Sample> testSet =
        loadSamples(manifest, Split::Test, model.config.inputSize);
    if (testSet.empty()) {
        throw DataError("manifest has no split=test rows");
    }

    std::vector<int> actual, predicted;
    std::vector<std::vector<double>> classScores(
        static_cast<std::size_t>(model.config.numClasses));
    for (const Sample& s : testSet) {
        const Tensor probs = forwardClassify(model, s.image);
        int argmax = 0;
        for (int c = 1; c < model.config.numClasses; ++c) {
            if (probs[static_cast<std::size_t>(c)] > probs[static_cast<std::size_t>(argmax)]) {
                argmax = c;
            }
        }
        actual.push_back(s.labelIndex);
        predicted.push_back(argmax);
        for (int c = 0; c < model.config.numClasses; ++c) {
            classScores[static_cast<std::size_t>(c)].push_back(
                static_cast<double>(probs[static_cast<std::size_t>(c)]));
        }
    }

    const ConfusionMatrix cm =
        confusionFromPredictions(actual, predicted, manifest.classVocabulary);
    std::vector<RocCurve> curves;
    for (int c = 0; c < model.config.numClasses; ++c) {
        std::vector<int> binary;
        binary.reserve(actual.size());
        for (int a : actual) {
            binary.push_back(a == c ? 1 : 0);
        }
        try {
            curves.push_back(rocCurve(classScores[static_cast<std::size_t>(c)], binary,
                                      manifest.classVocabulary[static_cast<std::size_t>(c)]));
        } catch (const UsageError&) {
            std::cout << "note: skipping ROC for class "
                      << manifest.classVocabulary[static_cast<std::size_t>(c)]
                      << " (single-class labels)\n";
        }
    }
    const MetricsReport report = buildReport(cm, std::move(curves), modelPath);
    writeReport(report, reportPath, rocPath);

    printConfusion(cm);
    std::cout << std::fixed << std::setprecision(4);
    std::cout << "accuracy " << report.accuracy << "\n";
    for (const ClassMetrics& m : report.classes) {
        std::cout << m.className << " precision=" << m.precision << " recall=" << m.recall
                  << " specificity=" << m.specificity << " f1=" << m.f1 << "\n";
    }
    return kExitOk;
}

int runPredict(const std::string& modelPath, const std::string& imagePath,
               const std::string& heatmapPath) {
    echo("model", modelPath);
    echo("image", imagePath);
    if (!heatmapPath.empty()) {
        echo("heatmap", heatmapPath);
    }
    const ModelGraph model = loadCheckpoint(modelPath);
    const Tensor image = decodeAndResize(imagePath, model.config.inputSize);
    const Tensor probs = forwardClassify(model, image);
    const auto vocab = vocabularyForClasses(model.config.numClasses);
    int argmax = 0;
    std::cout << std::fixed << std::setprecision(4);
    for (int c = 0; c < model.config.numClasses; ++c) {
        std::cout << vocab[static_cast<std::size_t>(c)] << " "
                  << probs[static_cast<std::size_t>(c)] << "\n";
        if (probs[static_cast<std::size_t>(c)] > probs[static_cast<std::size_t>(argmax)]) {
            argmax = c;
        }
    }
    std::cout << "predicted " << vocab[static_cast<std::size_t>(argmax)] << "\n";
    if (!heatmapPath.empty()) {
        const HeatMap map = gradcam(model, image, argmax);
        renderHeatmap(map, image, heatmapPath);
        std::cout << "heat map written to " << heatmapPath << "\n";
    }
    return kExitOk;
}

int runSynth(const std::string& outDir, int numClasses, int perClass, int size,
             std::uint64_t seed) {
    echo("out", outDir);
    echo("classes", static_cast<long long>(numClasses));
    echo("per-class", static_cast<long long>(perClass));
    echo("size", static_cast<long long>(size));
    echo("seed", static_cast<long long>(seed));
    const SyntheticDataset ds = generateSynthetic(perClass, size, numClasses, seed, outDir);
    std::cout << "wrote " << ds.manifest.entries.size() << " images\n";
    std::cout << "manifest " << ds.manifestPath << "\n";
    std::cout << "sidecar " << ds.sidecarPath << "\n";
    return kExitOk;
}

int runInspect(const std::string& modelPath, const ModelConfig& flagsCfg, bool haveFlags) {
    ModelConfig cfg = flagsCfg;
    if (!modelPath.empty()) {
        echo("model", modelPath);
        cfg = loadCheckpoint(modelPath).config;
    } else if (!haveFlags) {
        throw UsageError("inspect needs either --model or architecture flags");
    }
    echoModelConfig(cfg);
    const auto shapes = stageShapes(cfg);
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        const char* kind = i + 1 == shapes.size() ? "bottleneck" : "stage";
        std::cout << kind << " " << i << " (" << shapes[i].channels << ", "
                  << shapes[i].height << ", " << shapes[i].width << ")\n";
    }
    std::size_t total = 0;
    for (const ParamSpec& spec : parameterSpecs(cfg)) {
        std::size_t n = 1;
        for (std::size_t d : spec.shape) {
            n *= d;
        }
        total += n;
    }
    std::cout << "total parameters " << total << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"U-Net / W-Net chest X-ray classifier"};
    app.require_subcommand(1);

    // split
    auto* split = app.add_subcommand("split", "Assign stratified train/test splits");
    std::string splitManifest, splitOut;
    double trainFraction = 0.8;
    std::uint64_t splitSeed = 0;
    split->add_option("--manifest", splitManifest, "Input manifest CSV")->required();
    split->add_option("--train-fraction", trainFraction, "Train fraction in (0,1)")
        ->capture_default_str();
    split->add_option("--seed", splitSeed, "Shuffle seed")->capture_default_str();
    split->add_option("--out", splitOut, "Output manifest CSV")->required();

    // shared model flags
    auto addModelFlags = [](CLI::App* cmd, std::string& arch, ModelConfig& cfg) {
        cmd->add_option("--arch", arch, "Architecture: unet or wnet")->capture_default_str();
        cmd->add_option("--classes", cfg.numClasses, "Number of classes (2 or 3)")
            ->capture_default_str();
        cmd->add_option("--input-size", cfg.inputSize, "Square input size")
            ->capture_default_str();
        cmd->add_option("--base-channels", cfg.baseChannels, "Channels at the top stage")
            ->capture_default_str();
        cmd->add_option("--depth", cfg.depth, "Number of pooling stages")
            ->capture_default_str();
    };

    // train
    auto* trainCmd = app.add_subcommand("train", "Train a model on split=train rows");
    std::string trainManifest, trainArch = "wnet", trainOut, trainLog;
    ModelConfig trainModelCfg;
    TrainConfig trainCfg;
    trainCmd->add_option("--manifest", trainManifest, "Manifest CSV with split column")
        ->required();
    addModelFlags(trainCmd, trainArch, trainModelCfg);
    trainCmd->add_option("--epochs", trainCfg.epochs, "Training epochs")->required();
    trainCmd->add_option("--batch-size", trainCfg.batchSize, "Mini-batch size")
        ->capture_default_str();
    trainCmd->add_option("--lr", trainCfg.learningRate, "Adam learning rate")
        ->capture_default_str();
    std::uint64_t trainSeed = 0;
    trainCmd->add_option("--seed", trainSeed, "Init + shuffle seed")->capture_default_str();
    trainCmd->add_option("--out", trainOut, "Checkpoint output path")->required();
    trainCmd->add_option("--log", trainLog, "JSONL training log path");

    // eval
    auto* evalCmd = app.add_subcommand("eval", "Evaluate a checkpoint on split=test rows");
    std::string evalModel, evalManifest, evalReport = "report.json", evalRoc = "roc.csv";
    evalCmd->add_option("--model", evalModel, "Checkpoint path")->required();
    evalCmd->add_option("--manifest", evalManifest, "Manifest CSV with split column")
        ->required();
    evalCmd->add_option("--report", evalReport, "Metrics report JSON path")
        ->capture_default_str();
    evalCmd->add_option("--roc", evalRoc, "ROC CSV path")->capture_default_str();

    // predict
    auto* predictCmd = app.add_subcommand("predict", "Classify a single image");
    std::string predictModel, predictImage, predictHeatmap;
    predictCmd->add_option("--model", predictModel, "Checkpoint path")->required();
    predictCmd->add_option("--image", predictImage, "Image path (PGM/PPM)")->required();
    predictCmd->add_option("--heatmap", predictHeatmap, "Optional heat map output (PPM)");

    // synth
    auto* synthCmd = app.add_subcommand("synth", "Generate a synthetic labeled dataset");
    std::string synthOut;
    int synthClasses = 3, synthPerClass = 8, synthSize = 64;
    std::uint64_t synthSeed = 0;
    synthCmd->add_option("--out", synthOut, "Output directory")->required();
    synthCmd->add_option("--classes", synthClasses, "Number of classes (2 or 3)")
        ->capture_default_str();
    synthCmd->add_option("--per-class", synthPerClass, "Images per class")
        ->capture_default_str();
    synthCmd->add_option("--size", synthSize, "Square image size")->capture_default_str();
    synthCmd->add_option("--seed", synthSeed, "Generator seed")->capture_default_str();

    // inspect
    auto* inspectCmd = app.add_subcommand("inspect", "Print stage shapes and parameter count");
    std::string inspectModel, inspectArch = "wnet";
    ModelConfig inspectCfg;
    inspectCmd->add_option("--model", inspectModel, "Checkpoint path");
    addModelFlags(inspectCmd, inspectArch, inspectCfg);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*split) {
            return runSplit(splitManifest, trainFraction, splitSeed, splitOut);
        }
        if (*trainCmd) {
            trainModelCfg.arch = archFromName(trainArch);
            trainModelCfg.uPasses = trainModelCfg.arch == Arch::WNet ? 2 : 1;
            trainModelCfg.seed = trainSeed;
            trainCfg.seed = trainSeed;
            return runTrain(trainManifest, trainModelCfg, trainCfg, trainOut, trainLog);
        }
        if (*evalCmd) {
            return runEval(evalModel, evalManifest, evalReport, evalRoc);
        }
        if (*predictCmd) {
            return runPredict(predictModel, predictImage, predictHeatmap);
        }
        if (*synthCmd) {
            return runSynth(synthOut, synthClasses, synthPerClass, synthSize, synthSeed);
        }
        if (*inspectCmd) {
            const bool haveFlags = inspectCmd->count("--arch") || inspectCmd->count("--classes") ||
                                   inspectCmd->count("--input-size") ||
                                   inspectCmd->count("--base-channels") ||
                                   inspectCmd->count("--depth");
            inspectCfg.arch = archFromName(inspectArch);
            inspectCfg.uPasses = inspectCfg.arch == Arch::WNet ? 2 : 1;
            return runInspect(inspectModel, inspectCfg, haveFlags);
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitUsage;
}
