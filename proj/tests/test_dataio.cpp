#include <gtest/gtest.h>
#include <tiffio.h>

#include <cstring>
#include <fstream>

#include "ccdf/errors.hpp"
#include "ccdf/raster_io.hpp"
#include "ccdf/synthetic.hpp"
#include "support.hpp"

using namespace ccdf;
namespace fs = std::filesystem;

namespace {

// Two single-band float pages with independent sizes.
void write_two_page_tiff(const fs::path& path, int w0, int h0, int w1, int h1) {
  TIFF* tif = TIFFOpen(path.c_str(), "w");
  ASSERT_NE(tif, nullptr);
  const int sizes[2][2] = {{w0, h0}, {w1, h1}};
  for (const auto& s : sizes) {
    TIFFSetField(tif, TIFFTAG_IMAGEWIDTH, s[0]);
    TIFFSetField(tif, TIFFTAG_IMAGELENGTH, s[1]);
    TIFFSetField(tif, TIFFTAG_SAMPLESPERPIXEL, 1);
    TIFFSetField(tif, TIFFTAG_BITSPERSAMPLE, 32);
    TIFFSetField(tif, TIFFTAG_SAMPLEFORMAT, SAMPLEFORMAT_IEEEFP);
    TIFFSetField(tif, TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
    TIFFSetField(tif, TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
    TIFFSetField(tif, TIFFTAG_ROWSPERSTRIP, s[1]);
    std::vector<float> row(s[0], 1.5f);
    for (int y = 0; y < s[1]; ++y) TIFFWriteScanline(tif, row.data(), y, 0);
    TIFFWriteDirectory(tif);
  }
  TIFFClose(tif);
}

void write_raw_bytes(const fs::path& path, std::uint32_t w, std::uint32_t h, std::uint32_t c,
                     const std::vector<float>& payload) {
  std::ofstream out(path, std::ios::binary);
  const std::uint32_t header[4] = {kRawMagic, w, h, c};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
}

}  // namespace

TEST(LoadRaster, LargeFourBandTiff) {
  const auto dir = test::scratch_dir("large_tiff");
  std::mt19937_64 rng(1);
  const ImageTensor img = test::random_image(1000, 1000, 4, rng);
  save_raster(img, dir / "scene.tif");
  const ImageTensor back = load_raster(dir / "scene.tif");
  EXPECT_EQ(back.width(), 1000);
  EXPECT_EQ(back.height(), 1000);
  EXPECT_EQ(back.channels(), 4);
  for (std::size_t i = 0; i < img.size(); i += 997) {
    EXPECT_EQ(back.data()[i], static_cast<double>(static_cast<float>(img.data()[i])));
  }
}

TEST(LoadRaster, SinglePixelRaw) {
  const auto dir = test::scratch_dir("single_raw");
  write_raw_bytes(dir / "px.raw", 1, 1, 1, {7.0f});
  const ImageTensor img = load_raster(dir / "px.raw");
  ASSERT_EQ(img.size(), 1u);
  EXPECT_EQ(img.at(0, 0, 0), 7.0);
}

TEST(LoadRaster, RawHeaderLayout) {
  const auto dir = test::scratch_dir("raw_layout");
  ImageTensor img(3, 2, 2);
  for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = static_cast<double>(i);
  save_raster(img, dir / "t.raw");
  std::ifstream in(dir / "t.raw", std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
  ASSERT_EQ(bytes.size(), kRawHeaderBytes + img.size() * 4);
  EXPECT_EQ(std::string(bytes.data(), 4), "CCDF");
  std::uint32_t dims[3];
  std::memcpy(dims, bytes.data() + 4, 12);
  EXPECT_EQ(dims[0], 3u);
  EXPECT_EQ(dims[1], 2u);
  EXPECT_EQ(dims[2], 2u);
  float v;
  std::memcpy(&v, bytes.data() + kRawHeaderBytes + 4 * 7, 4);
  EXPECT_EQ(v, 7.0f);
  EXPECT_EQ(load_raster(dir / "t.raw"), img);
}

TEST(LoadRaster, MismatchedBandSizes) {
  const auto dir = test::scratch_dir("mismatch");
  write_two_page_tiff(dir / "bad.tif", 100, 100, 99, 100);
  EXPECT_THROW(load_raster(dir / "bad.tif"), ShapeError);
}

TEST(LoadRaster, MultiPageBandsStack) {
  const auto dir = test::scratch_dir("pages");
  write_two_page_tiff(dir / "ok.tif", 5, 4, 5, 4);
  const ImageTensor img = load_raster(dir / "ok.tif");
  EXPECT_EQ(img.channels(), 2);
  EXPECT_EQ(img.at(4, 3, 1), 1.5);
}

TEST(LoadRaster, Errors) {
  const auto dir = test::scratch_dir("errors");
  EXPECT_THROW(load_raster(dir / "missing.tif"), IoError);
  write_raw_bytes(dir / "nan.raw", 2, 1, 1, {1.0f, std::numeric_limits<float>::quiet_NaN()});
  EXPECT_THROW(load_raster(dir / "nan.raw"), IoError);
  write_raw_bytes(dir / "short.raw", 2, 2, 1, {1.0f});
  EXPECT_THROW(load_raster(dir / "short.raw"), IoError);
  std::ofstream(dir / "text.txt") << "not a raster";
  EXPECT_THROW(load_raster(dir / "text.txt"), IoError);
}

TEST(ReferenceMap, ColorCoding) {
  const auto dir = test::scratch_dir("ref_color");
  ImageTensor rgb(3, 1, 3, 0.0);
  rgb.at(0, 0, 0) = 255;  // red
  rgb.at(1, 0, 1) = 255;  // green
  rgb.at(2, 0, 2) = 255;  // blue
  save_raster(rgb, dir / "ref.png");
  const ReferenceMap ref = load_reference_map(dir / "ref.png", ReferenceEncoding::Color);
  EXPECT_EQ(ref.at(0, 0), Label::Changed);
  EXPECT_EQ(ref.at(1, 0), Label::Unchanged);
  EXPECT_EQ(ref.at(2, 0), Label::Undefined);
}

TEST(ReferenceMap, AllGreenIsUnchanged) {
  const auto dir = test::scratch_dir("ref_green");
  ImageTensor rgb(8, 6, 3, 0.0);
  for (auto& v : rgb.band(1)) v = 255;
  save_raster(rgb, dir / "green.png");
  const ReferenceMap ref = load_reference_map(dir / "green.png");
  EXPECT_EQ(ref.count(Label::Unchanged), 48u);
}

TEST(ReferenceMap, IntegerCodingAndRoundTrip) {
  const auto dir = test::scratch_dir("ref_int");
  ReferenceMap ref(4, 2, Label::Unchanged);
  ref.at(1, 0) = Label::Changed;
  ref.at(3, 1) = Label::Undefined;
  save_reference_map(ref, dir / "ref_int.png", ReferenceEncoding::Integer);
  EXPECT_EQ(load_reference_map(dir / "ref_int.png", ReferenceEncoding::Integer), ref);
  save_reference_map(ref, dir / "ref_rgb.png", ReferenceEncoding::Color);
  EXPECT_EQ(load_reference_map(dir / "ref_rgb.png"), ref);
}

TEST(ReferenceMap, Undecodable) {
  const auto dir = test::scratch_dir("ref_bad");
  std::ofstream(dir / "bad.png") << "\x89PNG garbage";
  EXPECT_THROW(load_reference_map(dir / "bad.png"), IoError);
}

TEST(SaveChangeMap, BinaryRoundTripExact) {
  const auto dir = test::scratch_dir("binary_maps");
  BinaryMap ones(9, 7, 1);
  for (const char* name : {"ones.png", "ones.tif", "ones.raw"}) {
    save_change_map(ones, dir / name);
    EXPECT_EQ(load_binary_map(dir / name), ones) << name;
  }
  std::mt19937_64 rng(3);
  BinaryMap mixed(31, 17);
  for (auto& v : mixed.values()) v = static_cast<std::uint8_t>(rng() & 1u);
  save_change_map(mixed, dir / "mixed.png");
  EXPECT_EQ(load_binary_map(dir / "mixed.png"), mixed);
}

TEST(SaveChangeMap, ProbabilityWithinQuantum) {
  const auto dir = test::scratch_dir("prob_maps");
  std::mt19937_64 rng(4);
  const ChangeMask mask = test::random_mask(40, 30, rng);
  save_change_map(mask, dir / "p.png");
  const ChangeMask png = load_change_map(dir / "p.png");
  EXPECT_LE(test::max_abs_diff(mask.values(), png.values()), kByteQuantum);
  save_change_map(mask, dir / "p.tif");
  const ChangeMask tif = load_change_map(dir / "p.tif");
  EXPECT_LE(test::max_abs_diff(mask.values(), tif.values()), 1e-7);
}

TEST(SaveChangeMap, Rejections) {
  const auto dir = test::scratch_dir("reject_maps");
  EXPECT_THROW(save_change_map(ChangeMask{}, dir / "empty.png"), ShapeError);
  EXPECT_THROW(save_change_map(BinaryMap(2, 2, 1), dir / "no_such_dir" / "m.png"), IoError);
  ChangeMask bad(2, 2, 0.5);
  bad.at(1, 1) = 1.5;
  EXPECT_THROW(save_change_map(bad, dir / "bad.png"), ShapeError);
}

TEST(Synthetic, IdentityStyleNoChange) {
  SyntheticSpec spec;
  spec.width = 32;
  spec.height = 24;
  spec.channels = 3;
  const SyntheticPair pair = make_synthetic_pair(spec);
  EXPECT_EQ(pair.t1, pair.t2);
  EXPECT_EQ(pair.reference.count(Label::Unchanged), 32u * 24u);
}

TEST(Synthetic, ChangedAreaAndStyleOutside) {
  SyntheticSpec spec;
  spec.gain = {1.5, 0.5, 2.0, 1.0};
  spec.bias = {0.1, -0.2, 0.0, 0.3};
  spec.change_regions = {{100, 60, 48, 48}};
  spec.rng_seed = 11;
  const SyntheticPair pair = make_synthetic_pair(spec);
  EXPECT_EQ(pair.reference.count(Label::Changed), 2304u);
  for (int c = 0; c < 4; ++c) {
    for (int y = 0; y < spec.height; y += 7) {
      for (int x = 0; x < spec.width; x += 5) {
        if (spec.change_regions[0].contains(x, y)) continue;
        EXPECT_EQ(pair.t2.at(x, y, c), spec.gain[c] * pair.t1.at(x, y, c) + spec.bias[c]);
      }
    }
  }
}

TEST(Synthetic, SeedDeterminism) {
  SyntheticSpec spec;
  spec.noise_sigma = 0.05;
  spec.change_regions = {{10, 10, 20, 20}, {60, 60, 8, 8}};
  spec.rng_seed = 99;
  const SyntheticPair a = make_synthetic_pair(spec);
  const SyntheticPair b = make_synthetic_pair(spec);
  EXPECT_EQ(a.t1, b.t1);
  EXPECT_EQ(a.t2, b.t2);
  EXPECT_EQ(a.reference, b.reference);
  spec.rng_seed = 100;
  EXPECT_NE(make_synthetic_pair(spec).t1, a.t1);
}

TEST(Synthetic, InvalidRegions) {
  SyntheticSpec spec;
  spec.width = 64;
  spec.height = 64;
  spec.change_regions = {{40, 40, 30, 10}};
  EXPECT_THROW(make_synthetic_pair(spec), ShapeError);
  spec.change_regions = {{0, 0, 10, 10}, {5, 5, 10, 10}};
  EXPECT_THROW(make_synthetic_pair(spec), ShapeError);
  spec.change_regions = {};
  spec.noise_sigma = -1.0;
  EXPECT_THROW(make_synthetic_pair(spec), ConfigError);
}
