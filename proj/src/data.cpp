#include "xraynet/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "xraynet/errors.hpp"
#include "xraynet/image.hpp"
#include "xraynet/rng.hpp"

namespace xraynet {

namespace {

const std::vector<std::string> kCanonicalClasses = {"covid", "normal", "pneumonia"};

std::vector<std::string> splitCsvLine(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    fields.push_back(field);
    return fields;
}

}  // namespace

int DatasetManifest::labelIndex(const std::string& label) const {
    for (std::size_t i = 0; i < classVocabulary.size(); ++i) {
        if (classVocabulary[i] == label) {
            return static_cast<int>(i);
        }
    }
    throw DataError("label '" + label + "' is not in the class vocabulary");
}

std::map<std::string, int> DatasetManifest::classHistogram() const {
    std::map<std::string, int> hist;
    for (const std::string& cls : classVocabulary) {
        hist[cls] = 0;
    }
    for (const ManifestEntry& e : entries) {
        ++hist[e.label];
    }
    return hist;
}

DatasetManifest loadManifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open manifest: " + path);
    }
    std::string line;
    if (!std::getline(is, line)) {
        throw DataError("manifest " + path + " is empty (header required)");
    }
    const auto header = splitCsvLine(line);
    const bool hasSplit = header.size() == 3 && header[2] == "split";
    if (!(header.size() == 2 || hasSplit) || header[0] != "path" || header[1] != "label") {
        throw DataError("manifest " + path + " must start with header path,label[,split]");
    }
    DatasetManifest manifest;
    std::set<std::string> seenPaths;
    std::set<std::string> seenLabels;
    int row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto fields = splitCsvLine(line);
        if (fields.size() != header.size()) {
            std::ostringstream msg;
            msg << "manifest " << path << " row " << row << ": expected " << header.size()
                << " fields, got " << fields.size();
            throw DataError(msg.str());
        }
        ManifestEntry entry;
        entry.path = fields[0];
        entry.label = fields[1];
        if (std::find(kCanonicalClasses.begin(), kCanonicalClasses.end(), entry.label) ==
            kCanonicalClasses.end()) {
            std::ostringstream msg;
            msg << "manifest " << path << " row " << row << ": unknown label '" << entry.label
                << "'";
            throw DataError(msg.str());
        }
        if (!seenPaths.insert(entry.path).second) {
            std::ostringstream msg;
            msg << "manifest " << path << " row " << row << ": duplicate path '" << entry.path
                << "'";
            throw DataError(msg.str());
        }
        if (hasSplit && !fields[2].empty()) {
            if (fields[2] == "train") {
                entry.split = Split::Train;
            } else if (fields[2] == "test") {
                entry.split = Split::Test;
            } else {
                std::ostringstream msg;
                msg << "manifest " << path << " row " << row << ": bad split value '"
                    << fields[2] << "'";
                throw DataError(msg.str());
            }
        }
        seenLabels.insert(entry.label);
        manifest.entries.push_back(std::move(entry));
    }
    for (const std::string& cls : kCanonicalClasses) {
        if (seenLabels.count(cls)) {
            manifest.classVocabulary.push_back(cls);
        }
    }
    return manifest;
}

void saveManifest(const DatasetManifest& manifest, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        throw IoError("cannot open manifest for writing: " + path);
    }
    os << "path,label,split\n";
    for (const ManifestEntry& e : manifest.entries) {
        os << e.path << "," << e.label << ",";
        if (e.split) {
            os << (*e.split == Split::Train ? "train" : "test");
        }
        os << "\n";
    }
    if (!os) {
        throw IoError("write failed for manifest: " + path);
    }
}

void stratifiedSplit(DatasetManifest& manifest, const SplitSpec& spec) {
    if (spec.trainFraction <= 0.0 || spec.trainFraction >= 1.0) {
        throw UsageError("train fraction must lie strictly between 0 and 1");
    }
    if (!spec.overwrite) {
        for (const ManifestEntry& e : manifest.entries) {
            if (e.split) {
                throw UsageError("manifest already carries split assignments");
            }
        }
    }
    Rng rng(spec.seed);
    for (const std::string& cls : manifest.classVocabulary) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
            if (manifest.entries[i].label == cls) {
                idx.push_back(i);
            }
        }
        // Fisher-Yates with the project Rng keeps the shuffle bit-stable
        // across platforms.
        for (std::size_t i = idx.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.nextBelow(i));
            std::swap(idx[i - 1], idx[j]);
        }
        std::size_t trainCount;
        if (spec.perClassOverride) {
            const auto it = spec.perClassOverride->find(cls);
            if (it == spec.perClassOverride->end()) {
                throw ConfigError("per-class override misses class '" + cls + "'");
            }
            const auto [trainN, testN] = it->second;
            if (trainN < 0 || testN < 0 ||
                static_cast<std::size_t>(trainN + testN) != idx.size()) {
                std::ostringstream msg;
                msg << "override for class '" << cls << "' (" << trainN << "+" << testN
                    << ") does not sum to its " << idx.size() << " images";
                throw ConfigError(msg.str());
            }
            trainCount = static_cast<std::size_t>(trainN);
        } else {
            trainCount = static_cast<std::size_t>(
                std::floor(spec.trainFraction * static_cast<double>(idx.size())));
        }
        for (std::size_t i = 0; i < idx.size(); ++i) {
            manifest.entries[idx[i]].split = i < trainCount ? Split::Train : Split::Test;
        }
    }
}

std::vector<Sample> loadSamples(const DatasetManifest& manifest, std::optional<Split> split,
                                int targetSize) {
    std::vector<Sample> samples;
    for (const ManifestEntry& e : manifest.entries) {
        if (split && e.split != *split) {
            continue;
        }
        Sample s;
        s.image = decodeAndResize(e.path, targetSize);
        s.labelIndex = manifest.labelIndex(e.label);
        s.sourcePath = e.path;
        samples.push_back(std::move(s));
    }
    return samples;
}

SyntheticDataset generateSynthetic(int numPerClass, int size, int numClasses,
                                   std::uint64_t seed, const std::string& outDir) {
    if (size < 16) {
        throw UsageError("synthetic image size must be >= 16");
    }
    if (numPerClass < 1 || numClasses < 2 ||
        numClasses > static_cast<int>(kCanonicalClasses.size())) {
        throw UsageError("synthetic generator needs numPerClass >= 1 and 2 or 3 classes");
    }
    std::error_code ec;
    std::filesystem::create_directories(outDir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + outDir + ": " + ec.message());
    }

    SyntheticDataset out;
    Rng rng(seed);
    nlohmann::json sidecar = nlohmann::json::array();
    const int boxSize = size / 2;
    for (int cls = 0; cls < numClasses; ++cls) {
        for (int i = 0; i < numPerClass; ++i) {
            RasterImage img;
            img.width = size;
            img.height = size;
            img.channels = 1;
            img.pixels.resize(static_cast<std::size_t>(size) * size);
            for (auto& px : img.pixels) {
                px = static_cast<std::uint8_t>(rng.nextUniform() * 32.0);
            }
            // The blob sits at a random position; its internal texture
            // identifies the class (solid / stripes / sparse dots), so the
            // discriminative feature is local to the blob and the mean
            // intensity inside the feature box separates the classes.
            const int originX =
                static_cast<int>(rng.nextBelow(static_cast<std::uint64_t>(size - boxSize + 1)));
            const int originY =
                static_cast<int>(rng.nextBelow(static_cast<std::uint64_t>(size - boxSize + 1)));
            for (int y = originY; y < originY + boxSize; ++y) {
                for (int x = originX; x < originX + boxSize; ++x) {
                    bool bright = true;
                    if (cls == 1) {
                        bright = ((x - originX) / 2) % 2 == 0;  // vertical stripes
                    } else if (cls == 2) {
                        bright = (x - originX) % 2 == 0 && (y - originY) % 2 == 0;  // dots
                    }
                    img.pixels[static_cast<std::size_t>(y) * size + x] =
                        bright ? static_cast<std::uint8_t>(208.0 + rng.nextUniform() * 47.0)
                               : std::uint8_t{0};
                }
            }
            std::ostringstream name;
            name << kCanonicalClasses[static_cast<std::size_t>(cls)] << "_" << i << ".pgm";
            const std::string filePath =
                (std::filesystem::path(outDir) / name.str()).string();
            writePgm(img, filePath);

            ManifestEntry entry;
            entry.path = filePath;
            entry.label = kCanonicalClasses[static_cast<std::size_t>(cls)];
            out.manifest.entries.push_back(entry);
            FeatureBox box{filePath, cls,          originX,
                           originY,  originX + boxSize, originY + boxSize};
            out.boxes.push_back(box);
            sidecar.push_back({{"path", box.path},
                               {"classIndex", box.classIndex},
                               {"featureBox", {box.x0, box.y0, box.x1, box.y1}}});
        }
        out.manifest.classVocabulary.push_back(kCanonicalClasses[static_cast<std::size_t>(cls)]);
    }
    out.manifestPath = (std::filesystem::path(outDir) / "manifest.csv").string();
    out.sidecarPath = (std::filesystem::path(outDir) / "sidecar.json").string();
    saveManifest(out.manifest, out.manifestPath);
    std::ofstream sc(out.sidecarPath, std::ios::trunc);
    if (!sc) {
        throw IoError("cannot open sidecar for writing: " + out.sidecarPath);
    }
    sc << sidecar.dump(2) << "\n";
    return out;
}

}  // namespace xraynet
