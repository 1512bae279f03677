#include "nucgrade/png_io.hpp"

#include "nucgrade/errors.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

namespace nucgrade {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

void open_reader(PngReader& r, std::FILE* f, const std::string& path) {
  png_byte header[8];
  if (std::fread(header, 1, 8, f) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw DataError(path + ": not a PNG file");
  }
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  r.info = r.png ? png_create_info_struct(r.png) : nullptr;
  if (!r.png || !r.info) throw DataError(path + ": libpng allocation failed");
  png_init_io(r.png, f);
  png_set_sig_bytes(r.png, 8);
}

void open_writer(PngWriter& w, std::FILE* f, const std::string& path) {
  w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  w.info = w.png ? png_create_info_struct(w.png) : nullptr;
  if (!w.png || !w.info) throw DataError(path + ": libpng allocation failed");
  png_init_io(w.png, f);
}

bool host_is_little_endian() {
  const std::uint16_t probe = 1;
  return *reinterpret_cast<const std::uint8_t*>(&probe) == 1;
}

}  // namespace

ImagePatch read_rgb_png(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw DataError(path + ": cannot open");
  PngReader r;
  open_reader(r, f.get(), path);
  if (setjmp(png_jmpbuf(r.png))) throw DataError(path + ": PNG decode error");

  png_read_info(r.png, r.info);
  png_set_expand(r.png);
  png_set_strip_16(r.png);
  png_set_strip_alpha(r.png);
  png_set_gray_to_rgb(r.png);
  png_read_update_info(r.png, r.info);

  const int h = int(png_get_image_height(r.png, r.info));
  const int w = int(png_get_image_width(r.png, r.info));
  if (png_get_channels(r.png, r.info) != 3 || png_get_bit_depth(r.png, r.info) != 8) {
    throw DataError(path + ": cannot normalize to 8-bit RGB");
  }
  ImagePatch out(h, w);
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) rows[std::size_t(y)] = out.pixels.data() + std::size_t(y) * w * 3;
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return out;
}

void write_rgb_png(const std::string& path, const ImagePatch& image) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw DataError(path + ": cannot open for writing");
  PngWriter w;
  open_writer(w, f.get(), path);
  if (setjmp(png_jmpbuf(w.png))) throw DataError(path + ": PNG encode error");

  png_set_IHDR(w.png, w.info, png_uint_32(image.width), png_uint_32(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  for (int y = 0; y < image.height; ++y) {
    rows[std::size_t(y)] =
        const_cast<png_bytep>(image.pixels.data() + std::size_t(y) * image.width * 3);
  }
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
}

Plane<std::uint16_t> read_gray16_png(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw DataError(path + ": cannot open");
  PngReader r;
  open_reader(r, f.get(), path);
  if (setjmp(png_jmpbuf(r.png))) throw DataError(path + ": PNG decode error");

  png_read_info(r.png, r.info);
  if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_GRAY) {
    throw DataError(path + ": expected single-channel grayscale");
  }
  if (png_get_bit_depth(r.png, r.info) < 16) png_set_expand_16(r.png);
  if (host_is_little_endian()) png_set_swap(r.png);
  png_read_update_info(r.png, r.info);

  const int h = int(png_get_image_height(r.png, r.info));
  const int w = int(png_get_image_width(r.png, r.info));
  Plane<std::uint16_t> out(h, w, 0);
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) {
    rows[std::size_t(y)] = reinterpret_cast<png_bytep>(out.v.data() + std::size_t(y) * w);
  }
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return out;
}

void write_gray16_png(const std::string& path, const Plane<std::uint16_t>& plane) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw DataError(path + ": cannot open for writing");
  PngWriter w;
  open_writer(w, f.get(), path);
  if (setjmp(png_jmpbuf(w.png))) throw DataError(path + ": PNG encode error");

  png_set_IHDR(w.png, w.info, png_uint_32(plane.cols), png_uint_32(plane.rows), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  if (host_is_little_endian()) png_set_swap(w.png);
  std::vector<png_bytep> rows(static_cast<std::size_t>(plane.rows));
  for (int y = 0; y < plane.rows; ++y) {
    rows[std::size_t(y)] = reinterpret_cast<png_bytep>(
        const_cast<std::uint16_t*>(plane.v.data() + std::size_t(y) * plane.cols));
  }
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
}

Plane<std::uint8_t> read_gray8_png(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw DataError(path + ": cannot open");
  PngReader r;
  open_reader(r, f.get(), path);
  if (setjmp(png_jmpbuf(r.png))) throw DataError(path + ": PNG decode error");

  png_read_info(r.png, r.info);
  if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_GRAY ||
      png_get_bit_depth(r.png, r.info) > 8) {
    throw DataError(path + ": expected 8-bit single-channel grayscale");
  }
  png_set_expand(r.png);
  png_set_packing(r.png);
  png_read_update_info(r.png, r.info);

  const int h = int(png_get_image_height(r.png, r.info));
  const int w = int(png_get_image_width(r.png, r.info));
  Plane<std::uint8_t> out(h, w, 0);
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) rows[std::size_t(y)] = out.v.data() + std::size_t(y) * w;
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return out;
}

void write_gray8_png(const std::string& path, const Plane<std::uint8_t>& plane) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw DataError(path + ": cannot open for writing");
  PngWriter w;
  open_writer(w, f.get(), path);
  if (setjmp(png_jmpbuf(w.png))) throw DataError(path + ": PNG encode error");

  png_set_IHDR(w.png, w.info, png_uint_32(plane.cols), png_uint_32(plane.rows), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  std::vector<png_bytep> rows(static_cast<std::size_t>(plane.rows));
  for (int y = 0; y < plane.rows; ++y) {
    rows[std::size_t(y)] =
        const_cast<png_bytep>(plane.v.data() + std::size_t(y) * plane.cols);
  }
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
}

}  // namespace nucgrade
