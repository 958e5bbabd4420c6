#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "moft/tensor.hpp"

namespace moft {

inline constexpr char kTensorMagic[4] = {'M', 'F', 'T', '1'};
inline constexpr std::uint32_t kTensorVersion = 1;

// MFT1 layout: "MFT1", u32 version, u32 F, H, W, D, then F*H*W*D f32 values,
// all little-endian.
Tensor4 load_tensor(const std::filesystem::path& path);
void save_tensor(const Tensor4& t, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_tensor(const Tensor4& t);
Tensor4 decode_tensor(const std::vector<std::uint8_t>& bytes);

// Binary PGM (P5, maxval 255). Pixels > 127 are inside the region.
RegionMask load_mask_pgm(const std::filesystem::path& path, std::size_t frames);
void save_mask_pgm(const RegionMask& mask, const std::filesystem::path& path);

// Map values in [0,1] linearly onto 0..255.
void save_map_pgm(const std::vector<double>& values, std::size_t height, std::size_t width,
                  const std::filesystem::path& path);
void save_map_csv(const std::vector<double>& values, std::size_t height, std::size_t width,
                  const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace moft
