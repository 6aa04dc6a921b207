#include "rawforge/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace rawforge {

namespace {

constexpr char kMagic[4] = {'R', 'F', 'I', 'M'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "float container IO assumes a little-endian host");

struct PngData {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bitdepth = 0;
  std::vector<std::uint8_t> bytes;
  std::vector<png_bytep> rows;
  char error[256] = {};
};

void png_error_handler(png_structp png, png_const_charp msg) {
  auto* data = static_cast<PngData*>(png_get_error_ptr(png));
  std::snprintf(data->error, sizeof(data->error), "%s", msg);
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

// No locals with destructors here: libpng reports errors by longjmp.
bool decode_png(std::FILE* fp, PngData& out) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &out, png_error_handler,
                                           png_warning_handler);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bitdepth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  out.bytes.resize(rowbytes * static_cast<std::size_t>(out.height));
  out.rows.resize(static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) out.rows[y] = out.bytes.data() + rowbytes * y;
  png_read_image(png, out.rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

struct PngEncode {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bitdepth = 0;
  std::vector<std::uint8_t> bytes;
  std::vector<png_bytep> rows;
  std::string* sink = nullptr;
  char error[256] = {};
};

void png_write_sink(png_structp png, png_bytep data, png_size_t length) {
  auto* enc = static_cast<PngEncode*>(png_get_io_ptr(png));
  enc->sink->append(reinterpret_cast<const char*>(data), length);
}

void png_flush_noop(png_structp) {}

void png_encode_error(png_structp png, png_const_charp msg) {
  auto* enc = static_cast<PngEncode*>(png_get_error_ptr(png));
  std::snprintf(enc->error, sizeof(enc->error), "%s", msg);
  png_longjmp(png, 1);
}

bool encode_png(PngEncode& enc) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &enc, png_encode_error,
                                            png_warning_handler);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, &enc, png_write_sink, png_flush_noop);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, enc.width, enc.height, enc.bitdepth,
               enc.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, enc.rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

std::vector<ImagePlane> read_png_planes(const fs::path& path, int& bitdepth) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(std::fopen(path.c_str(), "rb"), std::fclose);
  if (!fp) throw IoError("cannot open " + path.string());
  PngData data;
  if (!decode_png(fp.get(), data)) {
    throw IoError("cannot decode PNG " + path.string() + ": " + data.error);
  }
  bitdepth = data.bitdepth;
  const double scale = 1.0 / ((1 << data.bitdepth) - 1);
  const int bytes_per = data.bitdepth == 16 ? 2 : 1;
  std::vector<ImagePlane> planes;
  for (int c = 0; c < data.channels; ++c) planes.emplace_back(data.width, data.height);
  for (int y = 0; y < data.height; ++y) {
    const std::uint8_t* row = data.rows[y];
    for (int x = 0; x < data.width; ++x) {
      for (int c = 0; c < data.channels; ++c) {
        const std::uint8_t* p = row + (static_cast<std::size_t>(x) * data.channels + c) * bytes_per;
        const unsigned code = bytes_per == 2 ? (unsigned(p[0]) << 8) | p[1] : p[0];
        planes[c].at(x, y) = static_cast<float>(code * scale);
      }
    }
  }
  return planes;
}

unsigned quantize(float v, unsigned maxcode) {
  // round half up
  return static_cast<unsigned>(std::floor(static_cast<double>(v) * maxcode + 0.5));
}

void check_unit(const ImagePlane& p) {
  if (!in_unit_range(p)) throw ValidationError("samples outside [0,1]; clamp before saving");
}

std::string encode_png_planes(const std::vector<const ImagePlane*>& planes, int bitdepth) {
  if (bitdepth != 8 && bitdepth != 16) throw ValidationError("PNG bit depth must be 8 or 16");
  for (const auto* p : planes) check_unit(*p);
  PngEncode enc;
  enc.width = planes[0]->width();
  enc.height = planes[0]->height();
  enc.channels = static_cast<int>(planes.size());
  enc.bitdepth = bitdepth;
  const int bytes_per = bitdepth == 16 ? 2 : 1;
  const std::size_t rowbytes = static_cast<std::size_t>(enc.width) * enc.channels * bytes_per;
  enc.bytes.resize(rowbytes * enc.height);
  enc.rows.resize(enc.height);
  const unsigned maxcode = (1u << bitdepth) - 1;
  for (int y = 0; y < enc.height; ++y) {
    std::uint8_t* row = enc.bytes.data() + rowbytes * y;
    enc.rows[y] = row;
    for (int x = 0; x < enc.width; ++x) {
      for (int c = 0; c < enc.channels; ++c) {
        const unsigned code = quantize(planes[c]->at(x, y), maxcode);
        std::uint8_t* p = row + (static_cast<std::size_t>(x) * enc.channels + c) * bytes_per;
        if (bytes_per == 2) {
          p[0] = static_cast<std::uint8_t>(code >> 8);
          p[1] = static_cast<std::uint8_t>(code & 0xff);
        } else {
          p[0] = static_cast<std::uint8_t>(code);
        }
      }
    }
  }
  std::string out;
  enc.sink = &out;
  if (!encode_png(enc)) throw IoError(std::string("PNG encode failed: ") + enc.error);
  return out;
}

bool is_png(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png";
}

std::vector<ImagePlane> read_planes(const fs::path& path, bool& from_png) {
  from_png = is_png(path);
  if (from_png) {
    int depth = 0;
    return read_png_planes(path, depth);
  }
  const FloatContainer c = read_float_container(path);
  std::vector<ImagePlane> planes;
  const std::size_t n = static_cast<std::size_t>(c.width) * c.height;
  for (std::uint32_t ch = 0; ch < c.channels; ++ch) {
    std::vector<float> data(c.samples.begin() + ch * n, c.samples.begin() + (ch + 1) * n);
    planes.emplace_back(static_cast<int>(c.width), static_cast<int>(c.height), std::move(data));
  }
  return planes;
}

template <class Tag>
ColorImage<Tag> color_from_planes(std::vector<ImagePlane>& planes, const fs::path& path) {
  if (planes.size() != 3) {
    throw ValidationError(path.string() + ": expected 3 channels, found " +
                          std::to_string(planes.size()));
  }
  return ColorImage<Tag>(std::move(planes[0]), std::move(planes[1]), std::move(planes[2]));
}

RawImage raw_from_planes(std::vector<ImagePlane>& planes, const fs::path& path) {
  if (planes.size() != 1) {
    throw ValidationError(path.string() + ": RAW must have 1 channel, found " +
                          std::to_string(planes.size()));
  }
  const fs::path side = sidecar_path(path);
  if (!fs::exists(side)) throw IoError("missing metadata sidecar " + side.string());
  const CaptureMetadata meta = metadata_from_json(read_json_file(side));
  const bool pre_clip = !in_unit_range(planes[0]);
  return RawImage(std::move(planes[0]), meta, pre_clip);
}

FloatContainer container_from(const std::vector<const ImagePlane*>& planes) {
  FloatContainer c;
  c.channels = static_cast<std::uint32_t>(planes.size());
  c.width = static_cast<std::uint32_t>(planes[0]->width());
  c.height = static_cast<std::uint32_t>(planes[0]->height());
  for (const auto* p : planes) {
    const auto s = p->samples();
    c.samples.insert(c.samples.end(), s.begin(), s.end());
  }
  return c;
}

template <class Tag>
void save_color(const ColorImage<Tag>& img, const fs::path& path, int bitdepth) {
  std::vector<const ImagePlane*> planes = {&img.r, &img.g, &img.b};
  if (is_png(path)) {
    write_file_atomic(path, encode_png_planes(planes, bitdepth));
  } else {
    for (const auto* p : planes) check_unit(*p);
    write_float_container(container_from(planes), path);
  }
}

}  // namespace

FloatContainer read_float_container(const fs::path& path) {
  const std::string bytes = read_file_bytes(path);
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw IoError(path.string() + ": not an RFIM float container");
  }
  FloatContainer c;
  std::uint32_t version = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&c.channels, bytes.data() + 8, 4);
  std::memcpy(&c.width, bytes.data() + 12, 4);
  std::memcpy(&c.height, bytes.data() + 16, 4);
  if (version != kVersion) throw IoError(path.string() + ": unsupported RFIM version");
  if (c.channels == 0 || c.width == 0 || c.height == 0) {
    throw IoError(path.string() + ": empty RFIM dimensions");
  }
  const std::size_t n = std::size_t{c.channels} * c.width * c.height;
  if (bytes.size() != 20 + n * sizeof(float)) {
    throw IoError(path.string() + ": RFIM payload size mismatch");
  }
  c.samples.resize(n);
  std::memcpy(c.samples.data(), bytes.data() + 20, n * sizeof(float));
  return c;
}

void write_float_container(const FloatContainer& c, const fs::path& path) {
  if (c.samples.size() != std::size_t{c.channels} * c.width * c.height) {
    throw ValidationError("float container sample count mismatch");
  }
  std::string bytes(20 + c.samples.size() * sizeof(float), '\0');
  std::memcpy(bytes.data(), kMagic, 4);
  std::memcpy(bytes.data() + 4, &kVersion, 4);
  std::memcpy(bytes.data() + 8, &c.channels, 4);
  std::memcpy(bytes.data() + 12, &c.width, 4);
  std::memcpy(bytes.data() + 16, &c.height, 4);
  std::memcpy(bytes.data() + 20, c.samples.data(), c.samples.size() * sizeof(float));
  write_file_atomic(path, bytes);
}

fs::path sidecar_path(const fs::path& image_path) {
  return image_path.parent_path() / (image_path.stem().string() + ".meta.json");
}

std::string pattern_name(BayerPattern p) {
  switch (p) {
    case BayerPattern::RGGB: return "rggb";
    case BayerPattern::BGGR: return "bggr";
    case BayerPattern::GRBG: return "grbg";
    case BayerPattern::GBRG: return "gbrg";
  }
  return "rggb";
}

BayerPattern parse_pattern(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "rggb") return BayerPattern::RGGB;
  if (s == "bggr") return BayerPattern::BGGR;
  if (s == "grbg") return BayerPattern::GRBG;
  if (s == "gbrg") return BayerPattern::GBRG;
  throw ValidationError("unknown Bayer pattern '" + name + "'");
}

nlohmann::json metadata_to_json(const CaptureMetadata& m) {
  nlohmann::json j;
  j["pattern"] = pattern_name(m.pattern);
  j["wb_gains"] = m.wb_gains;
  j["ccm"] = m.ccm;
  j["shot"] = m.noise.shot;
  j["read"] = m.noise.read;
  j["seed"] = m.seed;
  return j;
}

CaptureMetadata metadata_from_json(const nlohmann::json& j) {
  CaptureMetadata m;
  try {
    m.pattern = parse_pattern(j.at("pattern").get<std::string>());
    m.wb_gains = j.at("wb_gains").get<Vec3>();
    m.ccm = j.at("ccm").get<Mat3>();
    m.noise.shot = j.at("shot").get<double>();
    m.noise.read = j.at("read").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid metadata sidecar: ") + e.what());
  }
  m.validate();
  return m;
}

nlohmann::json read_json_file(const fs::path& path) {
  const std::string text = read_file_bytes(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_json_file(const nlohmann::json& j, const fs::path& path) {
  write_file_atomic(path, j.dump(2) + "\n");
}

AnyImage load_image(const fs::path& path, Domain hint) {
  if (!fs::exists(path)) throw IoError("no such file: " + path.string());
  bool from_png = false;
  std::vector<ImagePlane> planes = read_planes(path, from_png);
  Domain domain = hint;
  if (domain == Domain::Auto) {
    if (planes.size() == 1) {
      domain = Domain::Raw;
    } else {
      domain = from_png ? Domain::Srgb : Domain::Linear;
    }
  }
  switch (domain) {
    case Domain::Raw: return raw_from_planes(planes, path);
    case Domain::Srgb: {
      auto img = color_from_planes<SrgbTag>(planes, path);
      if (!in_unit_range(img.r) || !in_unit_range(img.g) || !in_unit_range(img.b)) {
        throw ValidationError(path.string() + ": sRGB samples outside [0,1]");
      }
      return img;
    }
    default: return color_from_planes<LinearTag>(planes, path);
  }
}

SrgbImage load_srgb(const fs::path& path) {
  return std::get<SrgbImage>(load_image(path, Domain::Srgb));
}

LinearImage load_linear(const fs::path& path) {
  return std::get<LinearImage>(load_image(path, Domain::Linear));
}

RawImage load_raw(const fs::path& path) {
  return std::get<RawImage>(load_image(path, Domain::Raw));
}

void save_image(const SrgbImage& img, const fs::path& path, int bitdepth) {
  save_color(img, path, bitdepth);
}

void save_image(const LinearImage& img, const fs::path& path, int bitdepth) {
  save_color(img, path, bitdepth);
}

void save_image(const RawImage& img, const fs::path& path, int bitdepth) {
  if (is_png(path)) {
    if (img.pre_clip) throw ValidationError("pre-clip RAW can only be stored as a float container");
    write_file_atomic(path, encode_png_planes({&img.plane}, bitdepth));
  } else {
    write_float_container(container_from({&img.plane}), path);
  }
  write_json_file(metadata_to_json(img.meta), sidecar_path(path));
}

void save_image(const AnyImage& img, const fs::path& path, int bitdepth) {
  std::visit([&](const auto& v) { save_image(v, path, bitdepth); }, img);
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed for " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

std::string read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace rawforge
