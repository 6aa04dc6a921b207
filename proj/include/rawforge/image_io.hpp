#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rawforge/imagecore.hpp"

namespace rawforge {

namespace fs = std::filesystem;

/// How to interpret a loaded file. Auto: 1 channel -> RAW (sidecar required),
/// 3-channel PNG -> sRGB, 3-channel float container -> linear.
enum class Domain { Auto, Srgb, Linear, Raw };

using AnyImage = std::variant<SrgbImage, LinearImage, RawImage>;

/// Planar float container ("RFIM"): little-endian header
/// {magic "RFIM", u32 version=1, u32 channels, u32 width, u32 height}
/// followed by channel-planar f32 samples.
struct FloatContainer {
  std::uint32_t channels = 0;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<float> samples;
};

FloatContainer read_float_container(const fs::path& path);
void write_float_container(const FloatContainer& c, const fs::path& path);

/// `<dir>/<stem>.meta.json` for `<dir>/<stem>.<ext>`.
fs::path sidecar_path(const fs::path& image_path);

nlohmann::json metadata_to_json(const CaptureMetadata& m);
CaptureMetadata metadata_from_json(const nlohmann::json& j);
nlohmann::json read_json_file(const fs::path& path);
/// Pretty-printed, newline-terminated, written atomically.
void write_json_file(const nlohmann::json& j, const fs::path& path);

std::string pattern_name(BayerPattern p);
BayerPattern parse_pattern(const std::string& name);

AnyImage load_image(const fs::path& path, Domain hint = Domain::Auto);
SrgbImage load_srgb(const fs::path& path);
LinearImage load_linear(const fs::path& path);
RawImage load_raw(const fs::path& path);

/// PNG (8 or 16 bit, round-half-up) or float container, by extension.
/// Samples must already lie in [0,1]. RAW images also write their sidecar;
/// pre-clip RAW can only go to the float container.
void save_image(const SrgbImage& img, const fs::path& path, int bitdepth = 8);
void save_image(const LinearImage& img, const fs::path& path, int bitdepth = 16);
void save_image(const RawImage& img, const fs::path& path, int bitdepth = 16);
void save_image(const AnyImage& img, const fs::path& path, int bitdepth);

/// Writes to `<path>.tmp` then renames over `path`.
void write_file_atomic(const fs::path& path, const std::string& bytes);
std::string read_file_bytes(const fs::path& path);

}  // namespace rawforge
