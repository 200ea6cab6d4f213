#pragma once

#include <filesystem>
#include <vector>

namespace dgs {

/// Row-major H×W×C image of doubles.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c = 3, double fill = 0.0)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

    std::size_t size() const { return data.size(); }
    double &at(int x, int y, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    bool same_shape(const Image &o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

enum class PpmDepth { Bits8, Bits16 };

// Binary P6 (3 channels) or P5 (1 channel). Values are clamped to [0,1] and
// rounded to the nearest code.
void write_ppm(const std::filesystem::path &path, const Image &image, PpmDepth depth = PpmDepth::Bits8);
Image read_ppm(const std::filesystem::path &path);

} // namespace dgs
