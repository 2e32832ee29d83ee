#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xraynet/tensor.hpp"

namespace xraynet {

enum class Split { Train, Test };

struct ManifestEntry {
    std::string path;
    std::string label;
    std::optional<Split> split;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    // Canonical order [covid, normal, pneumonia] filtered to present labels;
    // this fixes the one-hot index order and the confusion-matrix axes.
    std::vector<std::string> classVocabulary;

    int labelIndex(const std::string& label) const;
    std::map<std::string, int> classHistogram() const;
};

// CSV with required header `path,label[,split]`.
DatasetManifest loadManifest(const std::string& path);
void saveManifest(const DatasetManifest& manifest, const std::string& path);

struct SplitSpec {
    double trainFraction = 0.8;
    // Explicit {train, test} counts per class; overrides the floor rule.
    std::optional<std::map<std::string, std::pair<int, int>>> perClassOverride;
    std::uint64_t seed = 0;
    bool overwrite = false;
};

// Per class with n images: train = floor(trainFraction * n), test = rest,
// membership by seeded shuffle. Train/test are disjoint and exhaustive.
void stratifiedSplit(DatasetManifest& manifest, const SplitSpec& spec);

struct Sample {
    Tensor image;  // [1,S,S] in [0,1]
    int labelIndex = 0;
    std::string sourcePath;
};

// Decoded samples for the rows carrying the requested split (or all rows when
// split is nullopt).
std::vector<Sample> loadSamples(const DatasetManifest& manifest, std::optional<Split> split,
                                int targetSize);

struct FeatureBox {
    std::string path;
    int classIndex = 0;
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open pixel bounds
};

struct SyntheticDataset {
    DatasetManifest manifest;
    std::vector<FeatureBox> boxes;
    std::string manifestPath;
    std::string sidecarPath;
};

// Writes numPerClass PGM images per class into outDir, each carrying a bright
// blob whose position identifies the class, plus a manifest CSV and a JSON
// sidecar recording every feature box.
SyntheticDataset generateSynthetic(int numPerClass, int size, int numClasses,
                                   std::uint64_t seed, const std::string& outDir);

}  // namespace xraynet
