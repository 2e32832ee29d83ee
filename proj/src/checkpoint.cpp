#include "xraynet/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "xraynet/errors.hpp"

namespace xraynet {

namespace {

constexpr char kMagic[4] = {'X', 'R', 'N', '1'};
constexpr std::uint32_t kVersion = 1;

// This project only targets little-endian hosts; the writers below emit the
// in-memory byte order directly.
template <typename T>
void writeScalar(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
  public:
    explicit Reader(std::istream& is) : is_(is) {}

    template <typename T>
    T scalar(const char* what) {
        T v{};
        read(reinterpret_cast<char*>(&v), sizeof(T), what);
        return v;
    }

    std::string bytes(std::size_t n, const char* what) {
        std::string s(n, '\0');
        read(s.data(), n, what);
        return s;
    }

    void read(char* dst, std::size_t n, const char* what) {
        is_.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(is_.gcount()) != n) {
            std::ostringstream msg;
            msg << "checkpoint truncated while reading " << what << " at byte offset "
                << offset_;
            throw FormatError(msg.str());
        }
        offset_ += n;
    }

    std::size_t offset() const { return offset_; }

  private:
    std::istream& is_;
    std::size_t offset_ = 0;
};

}  // namespace

std::string configToJson(const ModelConfig& config) {
    nlohmann::json j;
    j["arch"] = archName(config.arch);
    j["inputSize"] = config.inputSize;
    j["inputChannels"] = config.inputChannels;
    j["baseChannels"] = config.baseChannels;
    j["depth"] = config.depth;
    j["numClasses"] = config.numClasses;
    j["uPasses"] = config.uPasses;
    j["seed"] = config.seed;
    return j.dump();
}

ModelConfig configFromJson(const std::string& json) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint config JSON is invalid: ") + e.what());
    }
    ModelConfig cfg;
    try {
        cfg.arch = archFromName(j.at("arch").get<std::string>());
        cfg.inputSize = j.at("inputSize").get<int>();
        cfg.inputChannels = j.at("inputChannels").get<int>();
        cfg.baseChannels = j.at("baseChannels").get<int>();
        cfg.depth = j.at("depth").get<int>();
        cfg.numClasses = j.at("numClasses").get<int>();
        cfg.uPasses = j.at("uPasses").get<int>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint config JSON misses a field: ") + e.what());
    }
    return cfg;
}

void saveCheckpoint(const ModelGraph& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw IoError("cannot open checkpoint for writing: " + path);
    }
    os.write(kMagic, 4);
    writeScalar<std::uint32_t>(os, kVersion);
    const std::string json = configToJson(model.config);
    writeScalar<std::uint32_t>(os, static_cast<std::uint32_t>(json.size()));
    os.write(json.data(), static_cast<std::streamsize>(json.size()));
    writeScalar<std::uint32_t>(os, static_cast<std::uint32_t>(model.parameters.size()));
    for (const auto& [name, tensor] : model.parameters) {
        writeScalar<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        writeScalar<std::uint8_t>(os, 0);  // dtype tag: f32
        writeScalar<std::uint8_t>(os, static_cast<std::uint8_t>(tensor.rank()));
        for (std::size_t d : tensor.shape()) {
            writeScalar<std::uint64_t>(os, static_cast<std::uint64_t>(d));
        }
        os.write(reinterpret_cast<const char*>(tensor.data()),
                 static_cast<std::streamsize>(tensor.size() * sizeof(float)));
    }
    if (!os) {
        throw IoError("write failed for checkpoint: " + path);
    }
}

ModelGraph loadCheckpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open checkpoint for reading: " + path);
    }
    Reader r(is);
    const std::string magic = r.bytes(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0) {
        throw FormatError("bad checkpoint magic at byte offset 0 (expected XRN1)");
    }
    const auto version = r.scalar<std::uint32_t>("version");
    if (version != kVersion) {
        std::ostringstream msg;
        msg << "unsupported checkpoint version " << version << " at byte offset 4";
        throw FormatError(msg.str());
    }
    const auto jsonLen = r.scalar<std::uint32_t>("config length");
    ModelGraph model;
    model.config = configFromJson(r.bytes(jsonLen, "config JSON"));
    const auto tensorCount = r.scalar<std::uint32_t>("tensor count");
    for (std::uint32_t t = 0; t < tensorCount; ++t) {
        const auto nameLen = r.scalar<std::uint16_t>("tensor name length");
        std::string name = r.bytes(nameLen, "tensor name");
        const auto dtype = r.scalar<std::uint8_t>("dtype tag");
        if (dtype != 0) {
            std::ostringstream msg;
            msg << "unsupported dtype tag " << static_cast<int>(dtype) << " for tensor '"
                << name << "' at byte offset " << (r.offset() - 1);
            throw FormatError(msg.str());
        }
        const auto ndim = r.scalar<std::uint8_t>("ndim");
        std::vector<std::size_t> shape;
        std::size_t count = 1;
        for (std::uint8_t d = 0; d < ndim; ++d) {
            const auto dim = r.scalar<std::uint64_t>("dim");
            if (dim < 1 || dim > (1ULL << 32) || count > (1ULL << 32)) {
                std::ostringstream msg;
                msg << "implausible dimension " << dim << " for tensor '" << name
                    << "' at byte offset " << (r.offset() - 8);
                throw FormatError(msg.str());
            }
            shape.push_back(static_cast<std::size_t>(dim));
            count *= static_cast<std::size_t>(dim);
        }
        if (shape.empty()) {
            std::ostringstream msg;
            msg << "tensor '" << name << "' has zero dimensions at byte offset " << r.offset();
            throw FormatError(msg.str());
        }
        Tensor tensor(shape);
        r.read(reinterpret_cast<char*>(tensor.data()), count * sizeof(float), "tensor data");
        model.parameters.emplace_back(std::move(name), std::move(tensor));
    }
    return model;
}

}  // namespace xraynet
