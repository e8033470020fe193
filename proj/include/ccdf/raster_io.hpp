#pragma once

// Raster, reference-map and change-map codecs.
//
// Supported containers, selected by content when reading and by file
// extension when writing:
//   * TIFF (multi-band GeoTIFF-compatible): one directory with C samples per
//     pixel, or C single-sample directories (one band per page).
//   * PNG, 8-bit grey or RGB(A); used for binary and tri-state maps.
//   * Raw tensor: 16-byte header of little-endian u32 {magic, W, H, C}
//     followed by W*H*C little-endian float32 values, band-sequential.

#include <cstdint>
#include <filesystem>

#include "ccdf/image.hpp"

namespace ccdf {

inline constexpr std::uint32_t kRawMagic = 0x46444343u;  // "CCDF" on disk
inline constexpr std::size_t kRawHeaderBytes = 16;
// Step between representable probabilities in an 8-bit map.
inline constexpr double kByteQuantum = 1.0 / 255.0;

ImageTensor load_raster(const std::filesystem::path& path);
// .tif/.tiff -> float32 TIFF, .png -> 8-bit (values must be in [0,255]),
// anything else -> raw float32 tensor.
void save_raster(const ImageTensor& image, const std::filesystem::path& path);

enum class ReferenceEncoding {
  Auto,     // RGB(A) rasters decode as Color, single-band as Integer
  Color,    // red -> changed, green -> unchanged, anything else -> undefined
  Integer,  // 1 -> changed, 0 -> unchanged, anything else (255 by convention) -> undefined
};

ReferenceMap load_reference_map(const std::filesystem::path& path,
                                ReferenceEncoding encoding = ReferenceEncoding::Auto);
void save_reference_map(const ReferenceMap& ref, const std::filesystem::path& path,
                        ReferenceEncoding encoding = ReferenceEncoding::Color);

// .png -> 8-bit grey (probabilities quantized to kByteQuantum, binary as 0/255),
// .tif/.tiff -> float32 (probability) or uint8 0/255 (binary), else raw float32.
void save_change_map(const ChangeMask& mask, const std::filesystem::path& path);
void save_change_map(const BinaryMap& map, const std::filesystem::path& path);

// Single-band map normalized to [0,1]; 8-bit sources are divided by 255.
ChangeMask load_change_map(const std::filesystem::path& path);
// Pixels >= 0.5 after normalization are changed.
BinaryMap load_binary_map(const std::filesystem::path& path);

}  // namespace ccdf
