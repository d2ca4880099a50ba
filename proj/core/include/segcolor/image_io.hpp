#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "segcolor/image.hpp"

namespace segcolor {

/// Reads an 8-bit RGB PNG (other formats supported by the codec also work).
/// Throws std::runtime_error on missing or unreadable files.
ImageU8 read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const ImageU8& image);

/// 16-bit single-channel label images (0 = line pixel, 1..M = segment id).
std::vector<std::uint16_t> read_label_png(const std::filesystem::path& path, int& height, int& width);
void write_label_png(const std::filesystem::path& path, const std::vector<std::uint16_t>& labels,
                     int height, int width);

/// Raw float32 array files, row-major [H, W, C]. Dims are not stored in the
/// file; callers pass them (cache manifests record them).
FeatureMap read_semfeat(const std::filesystem::path& path, int height, int width, int channels);
void write_semfeat(const std::filesystem::path& path, const FeatureMap& map);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string to_hex(std::uint64_t value);

}  // namespace segcolor
