#pragma once

#include "dgs/gaussian.hpp"

#include <filesystem>
#include <vector>

namespace dgs {

enum class PlyPrecision { Float64, Float32 };

// Splat PLY, binary little-endian, one vertex per primitive with properties
// x y z f_dc_0..2 opacity scale_0..2 rot_0..3. opacity is the logit, scale_*
// the log standard deviation, rot_* the raw (w,x,y,z) quaternion. f_dc_*
// carries the degree-0 RGB color as-is. Float64 output round-trips bit-exactly.
void write_ply(const std::filesystem::path &path, const Scene &scene,
               PlyPrecision precision = PlyPrecision::Float64);
// Accepts float or double properties and ignores unknown ones (normals,
// f_rest_*). Stream ids are reset to 0..n-1.
Scene read_ply(const std::filesystem::path &path);

// One camera per line: fx fy cx cy width height r00 r01 r02 r10 r11 r12 r20
// r21 r22 tx ty tz, written with round-trip precision.
void write_cameras(const std::filesystem::path &path, const std::vector<Camera> &cameras);
std::vector<Camera> read_cameras(const std::filesystem::path &path);

} // namespace dgs
