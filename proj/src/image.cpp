#include "xraynet/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "xraynet/errors.hpp"

namespace xraynet {

namespace {

// Reads the next whitespace/comment-delimited PNM header token.
std::string nextToken(std::istream& is) {
    std::string tok;
    int c;
    while ((c = is.get()) != EOF) {
        if (c == '#') {
            while ((c = is.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) {
                return tok;
            }
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

int parseHeaderInt(std::istream& is, const std::string& path, const char* what) {
    const std::string tok = nextToken(is);
    try {
        return std::stoi(tok);
    } catch (...) {
        throw DataError("cannot decode " + path + ": bad PNM " + std::string(what));
    }
}

}  // namespace

RasterImage readPnm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw DataError("cannot decode " + path + ": file not readable");
    }
    const std::string magic = nextToken(is);
    int channels;
    bool ascii;
    if (magic == "P2") {
        channels = 1;
        ascii = true;
    } else if (magic == "P3") {
        channels = 3;
        ascii = true;
    } else if (magic == "P5") {
        channels = 1;
        ascii = false;
    } else if (magic == "P6") {
        channels = 3;
        ascii = false;
    } else {
        throw DataError("cannot decode " + path + ": unsupported format '" + magic + "'");
    }
    RasterImage img;
    img.channels = channels;
    img.width = parseHeaderInt(is, path, "width");
    img.height = parseHeaderInt(is, path, "height");
    const int maxval = parseHeaderInt(is, path, "maxval");
    if (img.width < 1 || img.height < 1 || maxval < 1 || maxval > 255) {
        throw DataError("cannot decode " + path + ": unsupported PNM geometry or depth");
    }
    const std::size_t count = static_cast<std::size_t>(img.width) *
                              static_cast<std::size_t>(img.height) *
                              static_cast<std::size_t>(channels);
    img.pixels.resize(count);
    if (ascii) {
        for (std::size_t i = 0; i < count; ++i) {
            const int v = parseHeaderInt(is, path, "pixel");
            if (v < 0 || v > maxval) {
                throw DataError("cannot decode " + path + ": pixel value out of range");
            }
            img.pixels[i] = static_cast<std::uint8_t>(v);
        }
    } else {
        // Binary data starts after exactly one whitespace byte, which
        // parseHeaderInt's trailing separator already consumed.
        is.read(reinterpret_cast<char*>(img.pixels.data()),
                static_cast<std::streamsize>(count));
        if (static_cast<std::size_t>(is.gcount()) != count) {
            throw DataError("cannot decode " + path + ": truncated pixel data");
        }
    }
    return img;
}

namespace {

void writePnmImpl(const RasterImage& image, const std::string& path, int channels,
                  const char* magic) {
    if (image.channels != channels) {
        throw UsageError("image channel count does not match requested PNM format");
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw IoError("cannot open image for writing: " + path);
    }
    os << magic << "\n" << image.width << " " << image.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(image.pixels.data()),
             static_cast<std::streamsize>(image.pixels.size()));
    if (!os) {
        throw IoError("write failed for image: " + path);
    }
}

}  // namespace

void writePgm(const RasterImage& image, const std::string& path) {
    writePnmImpl(image, path, 1, "P5");
}

void writePpm(const RasterImage& image, const std::string& path) {
    writePnmImpl(image, path, 3, "P6");
}

TensorT<float> bilinearResize(const TensorT<float>& gray, int outH, int outW) {
    const std::size_t inH = gray.dim(0), inW = gray.dim(1);
    TensorT<float> out({static_cast<std::size_t>(outH), static_cast<std::size_t>(outW)});
    const double scaleY = static_cast<double>(inH) / outH;
    const double scaleX = static_cast<double>(inW) / outW;
    for (int y = 0; y < outH; ++y) {
        const double sy = (y + 0.5) * scaleY - 0.5;
        const double yClamped = std::clamp(sy, 0.0, static_cast<double>(inH - 1));
        const std::size_t y0 = static_cast<std::size_t>(yClamped);
        const std::size_t y1 = std::min(y0 + 1, inH - 1);
        const double fy = yClamped - static_cast<double>(y0);
        for (int x = 0; x < outW; ++x) {
            const double sx = (x + 0.5) * scaleX - 0.5;
            const double xClamped = std::clamp(sx, 0.0, static_cast<double>(inW - 1));
            const std::size_t x0 = static_cast<std::size_t>(xClamped);
            const std::size_t x1 = std::min(x0 + 1, inW - 1);
            const double fx = xClamped - static_cast<double>(x0);
            const double top = gray[y0 * inW + x0] * (1.0 - fx) + gray[y0 * inW + x1] * fx;
            const double bottom = gray[y1 * inW + x0] * (1.0 - fx) + gray[y1 * inW + x1] * fx;
            out[static_cast<std::size_t>(y) * static_cast<std::size_t>(outW) +
                static_cast<std::size_t>(x)] =
                static_cast<float>(top * (1.0 - fy) + bottom * fy);
        }
    }
    return out;
}

Tensor decodeAndResize(const std::string& path, int targetSize) {
    if (targetSize < 1) {
        throw UsageError("target size must be positive");
    }
    const RasterImage img = readPnm(path);
    TensorT<float> gray(
        {static_cast<std::size_t>(img.height), static_cast<std::size_t>(img.width)});
    const std::size_t count = gray.size();
    if (img.channels == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            gray[i] = static_cast<float>(img.pixels[i]) / 255.0f;
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            const double r = img.pixels[3 * i];
            const double g = img.pixels[3 * i + 1];
            const double b = img.pixels[3 * i + 2];
            gray[i] = static_cast<float>((0.299 * r + 0.587 * g + 0.114 * b) / 255.0);
        }
    }
    TensorT<float> resized = bilinearResize(gray, targetSize, targetSize);
    for (std::size_t i = 0; i < resized.size(); ++i) {
        resized[i] = std::clamp(resized[i], 0.0f, 1.0f);
    }
    return resized.reshape({1, static_cast<std::size_t>(targetSize),
                            static_cast<std::size_t>(targetSize)});
}

}  // namespace xraynet
