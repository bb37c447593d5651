#pragma once

#include <filesystem>
#include <string>

#include "hunter/geometry.hpp"

namespace hunter {

// Packed little-endian float32 quadruples (x, y, z, extra); the extra
// channel carries the source tag (0 scene, 1 synthetic) when the cloud has
// one and zero otherwise.
void write_point_cloud_bin(const PointCloud& cloud, const std::filesystem::path& path);

// Reads a packed cloud; with extra_is_source the fourth channel populates
// the per-point source tags. Throws std::runtime_error on malformed files.
PointCloud read_point_cloud_bin(const std::filesystem::path& path,
                                bool extra_is_source = false);

// ASCII "x y z" lines (comments starting with '#' allowed).
PointCloud read_xyz_ascii(const std::filesystem::path& path);

// FNV-1a 64-bit, used for content addressing and stable id hashing.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64(const std::string& text);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);

}  // namespace hunter
