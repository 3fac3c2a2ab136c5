#include "spectrapad/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "spectrapad/error.hpp"

namespace spectrapad {

namespace {

std::uint16_t to_u16(double v) { return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0)); }

void skip_ws_and_comments(std::istream& in) {
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in.get();
    } else {
      return;
    }
  }
}

BandImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open " + path.string());
  std::string magic;
  in >> magic;
  require(magic == "P5", ErrorKind::kData, path.string() + ": only binary PGM (P5) is supported");
  int w = 0, h = 0, maxval = 0;
  skip_ws_and_comments(in);
  in >> w;
  skip_ws_and_comments(in);
  in >> h;
  skip_ws_and_comments(in);
  in >> maxval;
  in.get();
  require(in && w > 0 && h > 0 && maxval > 0 && maxval <= 65535, ErrorKind::kData,
          path.string() + ": malformed PGM header");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<double> px(n);
  if (maxval < 256) {
    std::vector<unsigned char> raw(n);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
    require(static_cast<bool>(in), ErrorKind::kData, path.string() + ": truncated PGM");
    for (std::size_t i = 0; i < n; ++i) px[i] = raw[i] / static_cast<double>(maxval);
  } else {
    std::vector<unsigned char> raw(2 * n);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(2 * n));
    require(static_cast<bool>(in), ErrorKind::kData, path.string() + ": truncated PGM");
    for (std::size_t i = 0; i < n; ++i)
      px[i] = static_cast<double>((raw[2 * i] << 8) | raw[2 * i + 1]) / static_cast<double>(maxval);
  }
  return BandImage(h, w, std::move(px));
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

BandImage read_png(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  require(fp != nullptr, ErrorKind::kIo, "cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  require(png && info, ErrorKind::kIo, "libpng initialisation failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::kData, path.string() + ": corrupt PNG");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // little-endian uint16 rows
  png_read_update_info(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> buf(rowbytes * static_cast<std::size_t>(h));
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int r = 0; r < h; ++r) rows[static_cast<std::size_t>(r)] = buf.data() + rowbytes * static_cast<std::size_t>(r);
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  std::vector<double> px(static_cast<std::size_t>(w) * h);
  for (int r = 0; r < h; ++r) {
    const unsigned char* row = rows[static_cast<std::size_t>(r)];
    for (int c = 0; c < w; ++c) {
      double v = 0.0;
      if (out_depth == 16) {
        std::uint16_t s = 0;
        std::memcpy(&s, row + 2 * c, 2);
        v = s / 65535.0;
      } else {
        v = row[c] / 255.0;
      }
      px[static_cast<std::size_t>(r) * w + c] = v;
    }
  }
  return BandImage(h, w, std::move(px));
}

}  // namespace

BandImage read_image(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm") return read_pgm(path);
  fail(ErrorKind::kData, path.string() + ": unsupported image extension");
}

void write_pgm16(const std::filesystem::path& path, const BandImage& image) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + path.string());
  out << "P5\n" << image.width() << ' ' << image.height() << "\n65535\n";
  std::vector<unsigned char> raw;
  raw.reserve(image.pixels().size() * 2);
  for (double v : image.pixels()) {
    const std::uint16_t s = to_u16(v);
    raw.push_back(static_cast<unsigned char>(s >> 8));
    raw.push_back(static_cast<unsigned char>(s & 0xff));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  require(static_cast<bool>(out), ErrorKind::kIo, "write failed for " + path.string());
}

void write_png16(const std::filesystem::path& path, const BandImage& image) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
  require(fp != nullptr, ErrorKind::kIo, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  require(png && info, ErrorKind::kIo, "libpng initialisation failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::kIo, "PNG write failed for " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()), static_cast<png_uint_32>(image.height()), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<unsigned char> row(static_cast<std::size_t>(image.width()) * 2);
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < image.width(); ++c) {
      const std::uint16_t s = to_u16(image.at(r, c));
      row[2 * static_cast<std::size_t>(c)] = static_cast<unsigned char>(s >> 8);
      row[2 * static_cast<std::size_t>(c) + 1] = static_cast<unsigned char>(s & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace spectrapad
