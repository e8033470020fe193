#include "ccdf/raster_io.hpp"

#include <png.h>
#include <tiffio.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <memory>
#include <string>

#include "ccdf/errors.hpp"

namespace ccdf {

namespace fs = std::filesystem;

namespace {

enum class Container { Tiff, Png, Raw };

struct DecodedRaster {
  ImageTensor image;
  bool byte_samples = false;  // unsigned 8-bit source samples
};

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return ext;
}

Container container_for_writing(const fs::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".tif" || ext == ".tiff") return Container::Tiff;
  if (ext == ".png") return Container::Png;
  return Container::Raw;
}

Container sniff(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<unsigned char, 8> head{};
  in.read(reinterpret_cast<char*>(head.data()), head.size());
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got >= 4 && ((head[0] == 'I' && head[1] == 'I' && head[2] == 42 && head[3] == 0) ||
                   (head[0] == 'M' && head[1] == 'M' && head[2] == 0 && head[3] == 42))) {
    return Container::Tiff;
  }
  if (got >= 8 && png_sig_cmp(head.data(), 0, 8) == 0) return Container::Png;
  if (got >= 4 && head[0] == 'C' && head[1] == 'C' && head[2] == 'D' && head[3] == 'F') {
    return Container::Raw;
  }
  throw IoError("unrecognized raster container: " + path.string());
}

void require_exists(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw IoError("no such file: " + path.string());
}

// ---------------------------------------------------------------------------
// Raw float32 tensor

std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_u32le(unsigned char* p, std::uint32_t v) {
  p[0] = static_cast<unsigned char>(v & 0xff);
  p[1] = static_cast<unsigned char>((v >> 8) & 0xff);
  p[2] = static_cast<unsigned char>((v >> 16) & 0xff);
  p[3] = static_cast<unsigned char>((v >> 24) & 0xff);
}

DecodedRaster read_raw(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<unsigned char, kRawHeaderBytes> header{};
  in.read(reinterpret_cast<char*>(header.data()), header.size());
  if (static_cast<std::size_t>(in.gcount()) != header.size()) {
    throw IoError("truncated raw header: " + path.string());
  }
  if (read_u32le(header.data()) != kRawMagic) throw IoError("bad raw magic: " + path.string());
  const std::uint32_t w = read_u32le(header.data() + 4);
  const std::uint32_t h = read_u32le(header.data() + 8);
  const std::uint32_t c = read_u32le(header.data() + 12);
  if (w == 0 || h == 0 || c == 0 || w > (1u << 20) || h > (1u << 20) || c > 4096) {
    throw IoError("invalid raw dimensions in " + path.string());
  }
  const std::size_t count = static_cast<std::size_t>(w) * h * c;
  std::vector<unsigned char> payload(count * 4);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
    throw IoError("truncated raw payload: " + path.string());
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw IoError("trailing bytes after raw payload: " + path.string());
  }
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    const float f = std::bit_cast<float>(read_u32le(payload.data() + 4 * i));
    if (!std::isfinite(f)) throw IoError("non-numeric value in " + path.string());
    values[i] = f;
  }
  return {ImageTensor(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c),
                      std::move(values)),
          false};
}

void write_raw(std::span<const double> values, int w, int h, int c, const fs::path& path) {
  std::vector<unsigned char> bytes(kRawHeaderBytes + values.size() * 4);
  write_u32le(bytes.data(), kRawMagic);
  write_u32le(bytes.data() + 4, static_cast<std::uint32_t>(w));
  write_u32le(bytes.data() + 8, static_cast<std::uint32_t>(h));
  write_u32le(bytes.data() + 12, static_cast<std::uint32_t>(c));
  for (std::size_t i = 0; i < values.size(); ++i) {
    write_u32le(bytes.data() + kRawHeaderBytes + 4 * i,
                std::bit_cast<std::uint32_t>(static_cast<float>(values[i])));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// TIFF

thread_local std::string g_tiff_error;

void tiff_error_handler(const char* module, const char* fmt, va_list args) {
  char buf[512];
  std::vsnprintf(buf, sizeof buf, fmt, args);
  g_tiff_error = std::string(module ? module : "libtiff") + ": " + buf;
}

void tiff_warning_handler(const char*, const char*, va_list) {}

struct TiffCloser {
  void operator()(TIFF* t) const {
    if (t) TIFFClose(t);
  }
};
using TiffHandle = std::unique_ptr<TIFF, TiffCloser>;

TiffHandle open_tiff(const fs::path& path, const char* mode) {
  TIFFSetErrorHandler(tiff_error_handler);
  TIFFSetWarningHandler(tiff_warning_handler);
  g_tiff_error.clear();
  TiffHandle tif(TIFFOpen(path.string().c_str(), mode));
  if (!tif) throw IoError("cannot open TIFF " + path.string() + ": " + g_tiff_error);
  return tif;
}

struct SampleLayout {
  std::uint16_t bits = 8;
  std::uint16_t format = SAMPLEFORMAT_UINT;
};

double decode_sample(const unsigned char* p, SampleLayout s) {
  switch (s.format) {
    case SAMPLEFORMAT_IEEEFP:
      if (s.bits == 32) {
        float f;
        std::memcpy(&f, p, 4);
        return f;
      }
      if (s.bits == 64) {
        double d;
        std::memcpy(&d, p, 8);
        return d;
      }
      break;
    case SAMPLEFORMAT_INT:
      if (s.bits == 8) return static_cast<std::int8_t>(*p);
      if (s.bits == 16) {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        return v;
      }
      if (s.bits == 32) {
        std::int32_t v;
        std::memcpy(&v, p, 4);
        return v;
      }
      break;
    default:
      if (s.bits == 8) return *p;
      if (s.bits == 16) {
        std::uint16_t v;
        std::memcpy(&v, p, 2);
        return v;
      }
      if (s.bits == 32) {
        std::uint32_t v;
        std::memcpy(&v, p, 4);
        return v;
      }
      break;
  }
  throw IoError("unsupported TIFF sample layout: " + std::to_string(s.bits) + " bits, format " +
                std::to_string(s.format));
}

struct DirectoryInfo {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint16_t samples = 1;
  std::uint16_t planar = PLANARCONFIG_CONTIG;
  SampleLayout layout;
};

DirectoryInfo directory_info(TIFF* tif) {
  DirectoryInfo info;
  TIFFGetField(tif, TIFFTAG_IMAGEWIDTH, &info.width);
  TIFFGetField(tif, TIFFTAG_IMAGELENGTH, &info.height);
  TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLESPERPIXEL, &info.samples);
  TIFFGetFieldDefaulted(tif, TIFFTAG_PLANARCONFIG, &info.planar);
  TIFFGetFieldDefaulted(tif, TIFFTAG_BITSPERSAMPLE, &info.layout.bits);
  TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLEFORMAT, &info.layout.format);
  if (info.width == 0 || info.height == 0 || info.samples == 0) {
    throw IoError("TIFF directory has empty extent");
  }
  return info;
}

// Decodes every sample of the current directory into bands [band0, band0+samples).
void read_directory(TIFF* tif, const DirectoryInfo& info, ImageTensor& image, int band0) {
  const std::size_t bytes = info.layout.bits / 8;
  if (bytes == 0 || info.layout.bits % 8 != 0) throw IoError("sub-byte TIFF samples unsupported");
  const int spp = info.samples;
  const bool contig = info.planar == PLANARCONFIG_CONTIG;

  auto store = [&](const unsigned char* src, std::uint32_t x, std::uint32_t y, int sample) {
    image.at(static_cast<int>(x), static_cast<int>(y), band0 + sample) =
        decode_sample(src, info.layout);
  };

  if (TIFFIsTiled(tif)) {
    std::uint32_t tw = 0;
    std::uint32_t th = 0;
    TIFFGetField(tif, TIFFTAG_TILEWIDTH, &tw);
    TIFFGetField(tif, TIFFTAG_TILELENGTH, &th);
    std::vector<unsigned char> buf(static_cast<std::size_t>(TIFFTileSize(tif)));
    const int passes = contig ? 1 : spp;
    for (int pass = 0; pass < passes; ++pass) {
      for (std::uint32_t ty = 0; ty < info.height; ty += th) {
        for (std::uint32_t tx = 0; tx < info.width; tx += tw) {
          if (TIFFReadTile(tif, buf.data(), tx, ty, 0, static_cast<std::uint16_t>(pass)) < 0) {
            throw IoError("TIFF tile read failed: " + g_tiff_error);
          }
          for (std::uint32_t y = ty; y < std::min(ty + th, info.height); ++y) {
            for (std::uint32_t x = tx; x < std::min(tx + tw, info.width); ++x) {
              const std::size_t px = static_cast<std::size_t>(y - ty) * tw + (x - tx);
              if (contig) {
                for (int s = 0; s < spp; ++s) store(buf.data() + (px * spp + s) * bytes, x, y, s);
              } else {
                store(buf.data() + px * bytes, x, y, pass);
              }
            }
          }
        }
      }
    }
    return;
  }

  std::vector<unsigned char> line(static_cast<std::size_t>(TIFFScanlineSize(tif)));
  const int passes = contig ? 1 : spp;
  for (int pass = 0; pass < passes; ++pass) {
    for (std::uint32_t y = 0; y < info.height; ++y) {
      if (TIFFReadScanline(tif, line.data(), y, static_cast<std::uint16_t>(pass)) < 0) {
        throw IoError("TIFF scanline read failed: " + g_tiff_error);
      }
      for (std::uint32_t x = 0; x < info.width; ++x) {
        if (contig) {
          for (int s = 0; s < spp; ++s) {
            store(line.data() + (static_cast<std::size_t>(x) * spp + s) * bytes, x, y, s);
          }
        } else {
          store(line.data() + static_cast<std::size_t>(x) * bytes, x, y, pass);
        }
      }
    }
  }
}

DecodedRaster read_tiff(const fs::path& path) {
  TiffHandle tif = open_tiff(path, "r");
  std::vector<DirectoryInfo> dirs;
  do {
    dirs.push_back(directory_info(tif.get()));
  } while (TIFFReadDirectory(tif.get()));

  // One multi-sample directory, or one band per page.
  std::vector<DirectoryInfo> bands_from;
  if (dirs.front().samples > 1 || dirs.size() == 1) {
    bands_from.push_back(dirs.front());
  } else {
    bands_from = dirs;
  }
  int channels = 0;
  for (const auto& d : bands_from) {
    if (d.width != bands_from.front().width || d.height != bands_from.front().height) {
      throw ShapeError("TIFF bands differ in dimensions: " + std::to_string(d.width) + "x" +
                       std::to_string(d.height) + " vs " +
                       std::to_string(bands_from.front().width) + "x" +
                       std::to_string(bands_from.front().height));
    }
    channels += d.samples;
  }
  ImageTensor image(static_cast<int>(bands_from.front().width),
                    static_cast<int>(bands_from.front().height), channels);
  int band = 0;
  bool byte_samples = true;
  for (std::size_t i = 0; i < bands_from.size(); ++i) {
    if (!TIFFSetDirectory(tif.get(), static_cast<tdir_t>(i))) {
      throw IoError("cannot seek TIFF directory: " + g_tiff_error);
    }
    read_directory(tif.get(), bands_from[i], image, band);
    band += bands_from[i].samples;
    byte_samples = byte_samples && bands_from[i].layout.bits == 8 &&
                   bands_from[i].layout.format == SAMPLEFORMAT_UINT;
  }
  if (!image.all_finite()) throw IoError("non-numeric value in " + path.string());
  return {std::move(image), byte_samples};
}

void write_tiff(const fs::path& path, int w, int h, int c, bool as_bytes,
                const std::function<double(int, int, int)>& sample) {
  TiffHandle tif = open_tiff(path, "w");
  TIFF* t = tif.get();
  TIFFSetField(t, TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(w));
  TIFFSetField(t, TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(h));
  TIFFSetField(t, TIFFTAG_SAMPLESPERPIXEL, static_cast<std::uint16_t>(c));
  TIFFSetField(t, TIFFTAG_BITSPERSAMPLE, static_cast<std::uint16_t>(as_bytes ? 8 : 32));
  TIFFSetField(t, TIFFTAG_SAMPLEFORMAT,
               static_cast<std::uint16_t>(as_bytes ? SAMPLEFORMAT_UINT : SAMPLEFORMAT_IEEEFP));
  TIFFSetField(t, TIFFTAG_PLANARCONFIG, static_cast<std::uint16_t>(PLANARCONFIG_CONTIG));
  TIFFSetField(t, TIFFTAG_PHOTOMETRIC, static_cast<std::uint16_t>(PHOTOMETRIC_MINISBLACK));
  TIFFSetField(t, TIFFTAG_COMPRESSION, static_cast<std::uint16_t>(COMPRESSION_NONE));
  TIFFSetField(t, TIFFTAG_ROWSPERSTRIP, TIFFDefaultStripSize(t, 0));
  if (c > 1) {
    std::vector<std::uint16_t> extra(static_cast<std::size_t>(c - 1), EXTRASAMPLE_UNSPECIFIED);
    TIFFSetField(t, TIFFTAG_EXTRASAMPLES, static_cast<std::uint16_t>(extra.size()), extra.data());
  }
  const std::size_t bytes = as_bytes ? 1 : 4;
  std::vector<unsigned char> line(static_cast<std::size_t>(w) * c * bytes);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int s = 0; s < c; ++s) {
        unsigned char* dst = line.data() + (static_cast<std::size_t>(x) * c + s) * bytes;
        const double v = sample(x, y, s);
        if (as_bytes) {
          *dst = static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L));
        } else {
          const float f = static_cast<float>(v);
          std::memcpy(dst, &f, 4);
        }
      }
    }
    if (TIFFWriteScanline(t, line.data(), static_cast<std::uint32_t>(y), 0) < 0) {
      throw IoError("TIFF write failed for " + path.string() + ": " + g_tiff_error);
    }
  }
}

// ---------------------------------------------------------------------------
// PNG (libpng simplified API)

DecodedRaster read_png(const fs::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw IoError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw IoError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  const int w = static_cast<int>(img.width);
  const int h = static_cast<int>(img.height);
  ImageTensor image(w, h, channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        image.at(x, y, c) = buf[(static_cast<std::size_t>(y) * w + x) * channels + c];
      }
    }
  }
  return {std::move(image), true};
}

void write_png(const fs::path& path, int w, int h, int channels,
               const std::function<unsigned char(int, int, int)>& sample) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        buf[(static_cast<std::size_t>(y) * w + x) * channels + c] = sample(x, y, c);
      }
    }
  }
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, buf.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

DecodedRaster decode(const fs::path& path) {
  require_exists(path);
  switch (sniff(path)) {
    case Container::Tiff:
      return read_tiff(path);
    case Container::Png:
      return read_png(path);
    case Container::Raw:
      return read_raw(path);
  }
  throw IoError("unreachable");
}

void check_writable_parent(const fs::path& path) {
  const fs::path parent = path.parent_path();
  std::error_code ec;
  if (!parent.empty() && !fs::is_directory(parent, ec)) {
    throw IoError("output directory does not exist: " + parent.string());
  }
}

unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

ImageTensor load_raster(const fs::path& path) { return decode(path).image; }

void save_raster(const ImageTensor& image, const fs::path& path) {
  if (image.empty()) throw ShapeError("save_raster: empty image");
  check_writable_parent(path);
  switch (container_for_writing(path)) {
    case Container::Tiff:
      write_tiff(path, image.width(), image.height(), image.channels(), false,
                 [&](int x, int y, int c) { return image.at(x, y, c); });
      return;
    case Container::Png:
      if (image.channels() != 1 && image.channels() != 3) {
        throw ShapeError("PNG output requires 1 or 3 bands");
      }
      write_png(path, image.width(), image.height(), image.channels(),
                [&](int x, int y, int c) { return to_byte(image.at(x, y, c)); });
      return;
    case Container::Raw:
      write_raw(image.data(), image.width(), image.height(), image.channels(), path);
      return;
  }
}

ReferenceMap load_reference_map(const fs::path& path, ReferenceEncoding encoding) {
  const ImageTensor raster = decode(path).image;
  if (encoding == ReferenceEncoding::Auto) {
    encoding = raster.channels() >= 3 ? ReferenceEncoding::Color : ReferenceEncoding::Integer;
  }
  ReferenceMap ref(raster.width(), raster.height(), Label::Undefined);
  for (int y = 0; y < raster.height(); ++y) {
    for (int x = 0; x < raster.width(); ++x) {
      Label label = Label::Undefined;
      if (encoding == ReferenceEncoding::Color) {
        if (raster.channels() < 3) throw IoError("color reference needs 3 bands: " + path.string());
        const double r = raster.at(x, y, 0);
        const double g = raster.at(x, y, 1);
        const double b = raster.at(x, y, 2);
        if (r == 255.0 && g == 0.0 && b == 0.0) label = Label::Changed;
        if (r == 0.0 && g == 255.0 && b == 0.0) label = Label::Unchanged;
      } else {
        const double v = raster.at(x, y, 0);
        if (v == 1.0) label = Label::Changed;
        if (v == 0.0) label = Label::Unchanged;
      }
      ref.at(x, y) = label;
    }
  }
  return ref;
}

void save_reference_map(const ReferenceMap& ref, const fs::path& path,
                        ReferenceEncoding encoding) {
  if (ref.size() == 0) throw ShapeError("save_reference_map: empty map");
  check_writable_parent(path);
  const bool color = encoding != ReferenceEncoding::Integer;
  auto sample = [&](int x, int y, int c) -> unsigned char {
    const Label l = ref.at(x, y);
    if (!color) return static_cast<unsigned char>(l);
    if (l == Label::Changed) return c == 0 ? 255 : 0;
    if (l == Label::Unchanged) return c == 1 ? 255 : 0;
    return 0;
  };
  const int channels = color ? 3 : 1;
  if (container_for_writing(path) == Container::Tiff) {
    write_tiff(path, ref.width(), ref.height(), channels, true,
               [&](int x, int y, int c) { return static_cast<double>(sample(x, y, c)); });
  } else {
    write_png(path, ref.width(), ref.height(), channels, sample);
  }
}

void save_change_map(const ChangeMask& mask, const fs::path& path) {
  if (mask.empty()) throw ShapeError("save_change_map: empty mask");
  if (!mask.in_unit_range()) throw ShapeError("save_change_map: values outside [0,1]");
  check_writable_parent(path);
  switch (container_for_writing(path)) {
    case Container::Png:
      write_png(path, mask.width(), mask.height(), 1,
                [&](int x, int y, int) { return to_byte(mask.at(x, y) * 255.0); });
      return;
    case Container::Tiff:
      write_tiff(path, mask.width(), mask.height(), 1, false,
                 [&](int x, int y, int) { return mask.at(x, y); });
      return;
    case Container::Raw:
      write_raw(mask.values(), mask.width(), mask.height(), 1, path);
      return;
  }
}

void save_change_map(const BinaryMap& map, const fs::path& path) {
  if (map.empty()) throw ShapeError("save_change_map: empty map");
  check_writable_parent(path);
  switch (container_for_writing(path)) {
    case Container::Png:
      write_png(path, map.width(), map.height(), 1,
                [&](int x, int y, int) -> unsigned char { return map.at(x, y) ? 255 : 0; });
      return;
    case Container::Tiff:
      write_tiff(path, map.width(), map.height(), 1, true,
                 [&](int x, int y, int) { return map.at(x, y) ? 255.0 : 0.0; });
      return;
    case Container::Raw: {
      std::vector<double> values(map.values().begin(), map.values().end());
      write_raw(values, map.width(), map.height(), 1, path);
      return;
    }
  }
}

ChangeMask load_change_map(const fs::path& path) {
  DecodedRaster raster = decode(path);
  if (raster.image.channels() != 1) {
    throw ShapeError("change map must be single-band: " + path.string());
  }
  const double scale = raster.byte_samples ? kByteQuantum : 1.0;
  std::vector<double> values(raster.image.data().begin(), raster.image.data().end());
  for (double& v : values) v *= scale;
  ChangeMask mask(raster.image.width(), raster.image.height(), std::move(values));
  if (!mask.in_unit_range()) throw IoError("change map values outside [0,1]: " + path.string());
  return mask;
}

BinaryMap load_binary_map(const fs::path& path) {
  const ChangeMask mask = load_change_map(path);
  BinaryMap out(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.size(); ++i) out.values()[i] = mask.values()[i] >= 0.5 ? 1 : 0;
  return out;
}

}  // namespace ccdf
