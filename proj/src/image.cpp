#include "dgs/image.hpp"

#include "dgs/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

namespace dgs {

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream &in) {
    std::string token;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!token.empty()) {
                return token;
            }
            continue;
        }
        token.push_back(static_cast<char>(ch));
    }
    return token;
}

} // namespace

void write_ppm(const std::filesystem::path &path, const Image &image, PpmDepth depth) {
    if (image.channels != 3 && image.channels != 1) {
        fail(ErrorCode::InvalidArgument, "PPM output needs 1 or 3 channels");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    }
    const int maxval = depth == PpmDepth::Bits8 ? 255 : 65535;
    out << (image.channels == 3 ? "P6" : "P5") << "\n"
        << image.width << " " << image.height << "\n"
        << maxval << "\n";
    std::vector<unsigned char> bytes;
    bytes.reserve(image.size() * (depth == PpmDepth::Bits8 ? 1 : 2));
    for (double v : image.data) {
        const double c = std::clamp(v, 0.0, 1.0);
        const auto code = static_cast<unsigned>(std::lround(c * maxval));
        if (depth == PpmDepth::Bits16) {
            bytes.push_back(static_cast<unsigned char>(code >> 8));
        }
        bytes.push_back(static_cast<unsigned char>(code & 0xff));
    }
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        fail(ErrorCode::Io, "write failed for " + path.string());
    }
}

Image read_ppm(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::Io, "cannot open " + path.string());
    }
    const std::string magic = next_token(in);
    if (magic != "P6" && magic != "P5") {
        fail(ErrorCode::Parse, path.string() + ": not a binary PPM/PGM");
    }
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(next_token(in));
        h = std::stoi(next_token(in));
        maxval = std::stoi(next_token(in));
    } catch (const std::exception &) {
        fail(ErrorCode::Parse, path.string() + ": malformed header");
    }
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
        fail(ErrorCode::Parse, path.string() + ": invalid header values");
    }
    const int channels = magic == "P6" ? 3 : 1;
    Image image(w, h, channels);
    const bool wide = maxval > 255;
    std::vector<unsigned char> bytes(image.size() * (wide ? 2 : 1));
    in.read(reinterpret_cast<char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
        fail(ErrorCode::Parse, path.string() + ": truncated pixel data");
    }
    for (std::size_t i = 0; i < image.size(); ++i) {
        const unsigned code = wide ? (unsigned(bytes[2 * i]) << 8) | bytes[2 * i + 1] : bytes[i];
        image.data[i] = static_cast<double>(code) / maxval;
    }
    return image;
}

} // namespace dgs
