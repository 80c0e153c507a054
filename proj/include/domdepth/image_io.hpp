#pragma once

#include <cstdint>
#include <string>

#include "domdepth/image.hpp"

namespace domdepth {

/// Binary PPM (P6, maxval 255); intensities round to the nearest byte.
void write_ppm(const std::string& path, const ImageBuffer& image);
ImageBuffer read_ppm(const std::string& path);

/// Binary PGM (P5, maxval 255); masks map to 0/255.
void write_pgm(const std::string& path, const Mask& mask);
Mask read_pgm(const std::string& path);

/// Grayscale PFM, scale -1.0 (little-endian), rows bottom-to-top per the
/// format convention. Invalid pixels are stored as 0 and read back invalid.
void write_pfm(const std::string& path, const DepthMap& depth);
DepthMap read_pfm(const std::string& path);

/// FNV-1a over a byte string; used for config hashes in run manifests.
std::uint64_t fnv1a_hash(const std::string& bytes);

}  // namespace domdepth
