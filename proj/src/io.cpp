#include "dgs/io.hpp"

#include "dgs/error.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace dgs {

namespace {

static_assert(std::endian::native == std::endian::little, "PLY I/O assumes a little-endian host");

constexpr std::array<const char *, 14> kPlyFields = {
    "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity",
    "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"};

struct PlyProperty {
    std::string name;
    std::size_t size = 0;
    bool is_double = false;
    bool is_float = false;
};

std::size_t type_size(const std::string &type) {
    if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
    if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
    if (type == "int" || type == "uint" || type == "float" || type == "int32" || type == "uint32" ||
        type == "float32")
        return 4;
    if (type == "double" || type == "float64") return 8;
    return 0;
}

void pack(const GaussianPrimitive &p, std::array<double, 14> &v) {
    v = {p.mean.x(), p.mean.y(), p.mean.z(), p.color.x(), p.color.y(), p.color.z(), p.raw_opacity,
         p.log_scale.x(), p.log_scale.y(), p.log_scale.z(),
         p.rotation[0], p.rotation[1], p.rotation[2], p.rotation[3]};
}

GaussianPrimitive unpack(const std::array<double, 14> &v) {
    GaussianPrimitive p;
    p.mean = Vec3(v[0], v[1], v[2]);
    p.color = Vec3(v[3], v[4], v[5]);
    p.raw_opacity = v[6];
    p.log_scale = Vec3(v[7], v[8], v[9]);
    p.rotation = Vec4(v[10], v[11], v[12], v[13]);
    return p;
}

} // namespace

void write_ply(const std::filesystem::path &path, const Scene &scene, PlyPrecision precision) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    }
    const bool f64 = precision == PlyPrecision::Float64;
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << scene.size() << "\n";
    for (const char *name : kPlyFields) {
        out << "property " << (f64 ? "double " : "float ") << name << "\n";
    }
    out << "end_header\n";
    std::array<double, 14> v{};
    for (const auto &p : scene.primitives) {
        pack(p, v);
        for (double d : v) {
            if (f64) {
                out.write(reinterpret_cast<const char *>(&d), sizeof d);
            } else {
                const float f = static_cast<float>(d);
                out.write(reinterpret_cast<const char *>(&f), sizeof f);
            }
        }
    }
    if (!out) {
        fail(ErrorCode::Io, "write failed for " + path.string());
    }
}

Scene read_ply(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::Io, "cannot open " + path.string());
    }
    std::string line;
    std::getline(in, line);
    if (line != "ply") {
        fail(ErrorCode::Parse, path.string() + ": missing ply magic");
    }
    std::size_t count = 0;
    bool in_vertex = false;
    bool binary_le = false;
    std::vector<PlyProperty> props;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "end_header") break;
        if (kw == "format") {
            std::string fmt;
            ls >> fmt;
            binary_le = fmt == "binary_little_endian";
        } else if (kw == "element") {
            std::string name;
            ls >> name;
            in_vertex = name == "vertex";
            if (in_vertex) ls >> count;
        } else if (kw == "property" && in_vertex) {
            std::string type, name;
            ls >> type;
            if (type == "list") {
                fail(ErrorCode::Parse, path.string() + ": list properties unsupported on vertex");
            }
            ls >> name;
            const std::size_t size = type_size(type);
            if (size == 0) {
                fail(ErrorCode::Parse, path.string() + ": unknown property type " + type);
            }
            props.push_back({name, size, type == "double" || type == "float64",
                             type == "float" || type == "float32"});
        }
    }
    if (!binary_le) {
        fail(ErrorCode::Parse, path.string() + ": only binary_little_endian PLY is supported");
    }
    std::array<int, 14> slot{};
    slot.fill(-1);
    std::size_t stride = 0;
    std::vector<std::size_t> offsets;
    for (std::size_t i = 0; i < props.size(); ++i) {
        offsets.push_back(stride);
        stride += props[i].size;
        for (std::size_t f = 0; f < kPlyFields.size(); ++f) {
            if (props[i].name == kPlyFields[f]) {
                if (!props[i].is_double && !props[i].is_float) {
                    fail(ErrorCode::Parse, path.string() + ": property " + props[i].name +
                                               " must be float or double");
                }
                slot[f] = static_cast<int>(i);
            }
        }
    }
    for (std::size_t f = 0; f < kPlyFields.size(); ++f) {
        if (slot[f] < 0) {
            fail(ErrorCode::Parse, path.string() + ": missing property " + kPlyFields[f]);
        }
    }
    Scene scene;
    std::vector<char> row(stride);
    std::array<double, 14> v{};
    for (std::size_t n = 0; n < count; ++n) {
        in.read(row.data(), static_cast<std::streamsize>(stride));
        if (in.gcount() != static_cast<std::streamsize>(stride)) {
            fail(ErrorCode::Parse, path.string() + ": truncated vertex data");
        }
        for (std::size_t f = 0; f < kPlyFields.size(); ++f) {
            const auto &prop = props[slot[f]];
            const char *src = row.data() + offsets[slot[f]];
            if (prop.is_double) {
                std::memcpy(&v[f], src, 8);
            } else {
                float x;
                std::memcpy(&x, src, 4);
                v[f] = x;
            }
        }
        scene.primitives.push_back(unpack(v));
    }
    scene.reset_stream_ids();
    return scene;
}

void write_cameras(const std::filesystem::path &path, const std::vector<Camera> &cameras) {
    std::ofstream out(path);
    if (!out) {
        fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    }
    out << "# fx fy cx cy width height r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz\n";
    out << std::setprecision(17);
    for (const auto &c : cameras) {
        out << c.focal.x() << ' ' << c.focal.y() << ' ' << c.principal_point.x() << ' '
            << c.principal_point.y() << ' ' << c.width << ' ' << c.height;
        for (int r = 0; r < 3; ++r)
            for (int k = 0; k < 3; ++k) out << ' ' << c.rotation(r, k);
        for (int k = 0; k < 3; ++k) out << ' ' << c.translation[k];
        out << '\n';
    }
}

std::vector<Camera> read_cameras(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorCode::Io, "cannot open " + path.string());
    }
    std::vector<Camera> cameras;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        Camera c;
        ls >> c.focal.x() >> c.focal.y() >> c.principal_point.x() >> c.principal_point.y() >>
            c.width >> c.height;
        for (int r = 0; r < 3; ++r)
            for (int k = 0; k < 3; ++k) ls >> c.rotation(r, k);
        for (int k = 0; k < 3; ++k) ls >> c.translation[k];
        if (!ls) {
            fail(ErrorCode::Parse, path.string() + ":" + std::to_string(lineno) + ": malformed camera line");
        }
        c.validate();
        cameras.push_back(c);
    }
    return cameras;
}

} // namespace dgs
