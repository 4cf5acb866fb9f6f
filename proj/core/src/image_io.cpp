#include "drape/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace drape {

namespace {

std::string lower_ext(const std::string& path) {
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return {};
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext;
}

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

Image load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  DRAPE_REQUIRE(fp, "cannot open image file: ", path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  DRAPE_REQUIRE(png, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw ValidationError("libpng info init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError("failed to decode PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  int color_type = png_get_color_type(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (bit_depth == 16) png_set_swap(png);  // little-endian rows below
  png_read_update_info(png, info);

  bit_depth = png_get_bit_depth(png, info);
  const int ch = png_get_channels(png, info);
  DRAPE_REQUIRE(ch == 1 || ch == 3, "unsupported PNG channel count ", ch, " in ", path);

  const size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> raw(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = raw.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(static_cast<int>(w), static_cast<int>(h), ch);
  const size_t n = img.data.size();
  if (bit_depth == 16) {
    const uint16_t* p = reinterpret_cast<const uint16_t*>(raw.data());
    for (size_t i = 0; i < n; ++i) img.data[i] = p[i] / 65535.0;
  } else {
    for (size_t i = 0; i < n; ++i) img.data[i] = raw[i] / 255.0;
  }
  return img;
}

void save_png(const Image& image, const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  DRAPE_REQUIRE(fp, "cannot open file for writing: ", path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  DRAPE_REQUIRE(png, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw ValidationError("libpng info init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ValidationError("failed to encode PNG: " + path);
  }
  png_init_io(png, fp.get());

  const int color = image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, image.width, image.height, 8, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<unsigned char> row(static_cast<size_t>(image.width) * image.channels);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < image.channels; ++c) {
        double v = image.at(x, y, c);
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        row[static_cast<size_t>(x) * image.channels + c] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// 16-bit binary PPM (P6) / PGM (P5), big-endian sample order per the netpbm spec.
void save_pnm(const Image& image, const std::string& path, bool color) {
  std::ofstream os(path, std::ios::binary);
  DRAPE_REQUIRE(os, "cannot open file for writing: ", path);
  os << (color ? "P6" : "P5") << "\n" << image.width << " " << image.height << "\n65535\n";
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < (color ? 3 : 1); ++c) {
        double v = image.at(x, y, color ? c : 0);
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        const auto s = static_cast<uint16_t>(std::lround(v * 65535.0));
        os.put(static_cast<char>(s >> 8));
        os.put(static_cast<char>(s & 0xff));
      }
  DRAPE_REQUIRE(os.good(), "short write: ", path);
}

int pnm_token(std::istream& is) {
  // skips whitespace and '#' comments
  while (true) {
    int c = is.peek();
    if (c == '#') {
      std::string line;
      std::getline(is, line);
    } else if (std::isspace(c)) {
      is.get();
    } else {
      break;
    }
  }
  int v;
  is >> v;
  return v;
}

Image load_pnm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  DRAPE_REQUIRE(is, "cannot open image file: ", path);
  char p, kind;
  is.get(p);
  is.get(kind);
  DRAPE_REQUIRE(p == 'P' && (kind == '5' || kind == '6'), "unsupported PNM kind in ", path);
  const int ch = kind == '6' ? 3 : 1;
  const int w = pnm_token(is);
  const int h = pnm_token(is);
  const int maxval = pnm_token(is);
  is.get();  // single whitespace after header
  DRAPE_REQUIRE(w > 0 && h > 0 && (maxval == 255 || maxval == 65535),
                "unsupported PNM header in ", path);
  Image img(w, h, ch);
  const size_t n = img.data.size();
  if (maxval == 255) {
    std::vector<unsigned char> raw(n);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
    for (size_t i = 0; i < n; ++i) img.data[i] = raw[i] / 255.0;
  } else {
    std::vector<unsigned char> raw(n * 2);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * 2));
    for (size_t i = 0; i < n; ++i)
      img.data[i] = ((raw[2 * i] << 8) | raw[2 * i + 1]) / 65535.0;
  }
  DRAPE_REQUIRE(is.good() || is.eof(), "truncated PNM file: ", path);
  return img;
}

}  // namespace

Image load_image(const std::string& path) {
  const std::string ext = lower_ext(path);
  if (ext == "png") return load_png(path);
  if (ext == "ppm" || ext == "pgm") return load_pnm(path);
  throw ValidationError("unsupported image extension: " + path);
}

void save_image(const Image& image, const std::string& path) {
  DRAPE_REQUIRE(image.channels == 1 || image.channels == 3,
                "images must have 1 or 3 channels, got ", image.channels);
  const std::string ext = lower_ext(path);
  if (ext == "png") {
    save_png(image, path);
  } else if (ext == "ppm") {
    DRAPE_REQUIRE(image.channels == 3, "PPM requires 3 channels");
    save_pnm(image, path, true);
  } else if (ext == "pgm") {
    DRAPE_REQUIRE(image.channels == 1, "PGM requires 1 channel");
    save_pnm(image, path, false);
  } else {
    throw ValidationError("unsupported image extension: " + path);
  }
}

Image load_mask(const std::string& path, int* non_binary_pixels) {
  Image img = load_image(path);
  DRAPE_REQUIRE(img.channels == 1, "mask must be single-channel: ", path);
  int bad = 0;
  for (double& v : img.data) {
    if (v != 0.0 && v != 1.0) ++bad;
    v = v >= 0.5 ? 1.0 : 0.0;
  }
  if (non_binary_pixels) *non_binary_pixels = bad;
  return img;
}

}  // namespace drape
