// Copyright 2026 The Porekit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "porekit/image_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <png.h>

namespace porekit {

namespace {

// Skips whitespace and '#' comment lines between PGM header tokens.
void skip_pgm_separators(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      in.get();
    } else {
      return;
    }
  }
}

int read_pgm_int(std::istream& in, const std::string& path) {
  skip_pgm_separators(in);
  int v = -1;
  in >> v;
  PK_CHECK(in.good() && v >= 0, ErrorKind::kFormat,
           "corrupt PGM header in " + path);
  return v;
}

GrayImage load_pgm(std::ifstream& in, const std::string& path) {
  char magic[2] = {0, 0};
  in.read(magic, 2);
  PK_CHECK(magic[0] == 'P' && magic[1] == '5', ErrorKind::kFormat,
           "not a binary PGM: " + path);
  const int width = read_pgm_int(in, path);
  const int height = read_pgm_int(in, path);
  const int maxval = read_pgm_int(in, path);
  PK_CHECK(width > 0 && height > 0, ErrorKind::kFormat,
           "bad PGM dimensions in " + path);
  PK_CHECK(maxval > 0 && maxval <= 255, ErrorKind::kFormat,
           "only 8-bit PGM supported: " + path);
  in.get();  // single separator byte before the raster

  std::vector<std::uint8_t> raw(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  PK_CHECK(in.gcount() == static_cast<std::streamsize>(raw.size()),
           ErrorKind::kFormat, "truncated PGM raster in " + path);

  GrayImage img(height, width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      img(r, c) = raw[static_cast<std::size_t>(r) * width + c] / 255.0f;
    }
  }
  return img;
}

struct PngReadCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  ~PngReadCloser() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

GrayImage load_png(const std::string& path) {
  PngReadCloser ctx;
  ctx.fp = std::fopen(path.c_str(), "rb");
  PK_CHECK(ctx.fp != nullptr, ErrorKind::kInvalidData, "cannot open " + path);
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                   nullptr);
  PK_CHECK(ctx.png != nullptr, ErrorKind::kFormat, "png reader init failed");
  ctx.info = png_create_info_struct(ctx.png);
  PK_CHECK(ctx.info != nullptr, ErrorKind::kFormat, "png info init failed");
  if (setjmp(png_jmpbuf(ctx.png))) {
    fail(ErrorKind::kFormat, "corrupt PNG: " + path);
  }
  png_init_io(ctx.png, ctx.fp);
  png_read_info(ctx.png, ctx.info);

  const png_uint_32 width = png_get_image_width(ctx.png, ctx.info);
  const png_uint_32 height = png_get_image_height(ctx.png, ctx.info);
  const int color = png_get_color_type(ctx.png, ctx.info);
  const int depth = png_get_bit_depth(ctx.png, ctx.info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
    png_set_expand_gray_1_2_4_to_8(ctx.png);
  if (depth == 16) png_set_strip_16(ctx.png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(ctx.png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(ctx.png, 1, -1, -1);
  }
  png_read_update_info(ctx.png, ctx.info);

  GrayImage img(static_cast<int>(height), static_cast<int>(width));
  std::vector<std::uint8_t> row(width);
  for (png_uint_32 r = 0; r < height; ++r) {
    png_read_row(ctx.png, row.data(), nullptr);
    for (png_uint_32 c = 0; c < width; ++c) {
      img(static_cast<int>(r), static_cast<int>(c)) = row[c] / 255.0f;
    }
  }
  png_read_end(ctx.png, nullptr);
  return img;
}

struct PngWriteCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  ~PngWriteCloser() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

inline std::uint8_t quantize(float v) {
  const long q = std::lround(static_cast<double>(v) * 255.0);
  return static_cast<std::uint8_t>(std::min(255l, std::max(0l, q)));
}

void save_png(const GrayImage& img, const std::string& path) {
  PngWriteCloser ctx;
  ctx.fp = std::fopen(path.c_str(), "wb");
  PK_CHECK(ctx.fp != nullptr, ErrorKind::kInvalidData, "cannot write " + path);
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                    nullptr);
  PK_CHECK(ctx.png != nullptr, ErrorKind::kFormat, "png writer init failed");
  ctx.info = png_create_info_struct(ctx.png);
  PK_CHECK(ctx.info != nullptr, ErrorKind::kFormat, "png info init failed");
  if (setjmp(png_jmpbuf(ctx.png))) {
    fail(ErrorKind::kFormat, "png write failed: " + path);
  }
  png_init_io(ctx.png, ctx.fp);
  png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(img.cols()),
               static_cast<png_uint_32>(img.rows()), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(img.cols()));
  for (int r = 0; r < img.rows(); ++r) {
    for (int c = 0; c < img.cols(); ++c) row[static_cast<std::size_t>(c)] = quantize(img(r, c));
    png_write_row(ctx.png, row.data());
  }
  png_write_end(ctx.png, nullptr);
}

void save_pgm(const GrayImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  PK_CHECK(out.good(), ErrorKind::kInvalidData, "cannot write " + path);
  out << "P5\n" << img.cols() << " " << img.rows() << "\n255\n";
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(img.rows()) *
                                img.cols());
  for (int r = 0; r < img.rows(); ++r) {
    for (int c = 0; c < img.cols(); ++c) {
      raw[static_cast<std::size_t>(r) * img.cols() + c] = quantize(img(r, c));
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  PK_CHECK(out.good(), ErrorKind::kInvalidData, "write failed: " + path);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

GrayImage load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  PK_CHECK(in.good(), ErrorKind::kInvalidData, "cannot open " + path);
  const int b0 = in.peek();
  if (b0 == 'P') return load_pgm(in, path);
  if (b0 == 0x89) {
    in.close();
    return load_png(path);
  }
  fail(ErrorKind::kFormat, "unsupported image format: " + path);
}

void save_image(const GrayImage& img, const std::string& path) {
  PK_CHECK(!img.empty(), ErrorKind::kInvalidArgument, "saving empty image");
  if (ends_with(path, ".png")) {
    save_png(img, path);
  } else if (ends_with(path, ".pgm")) {
    save_pgm(img, path);
  } else {
    fail(ErrorKind::kInvalidArgument,
         "unsupported image extension (use .pgm or .png): " + path);
  }
}

std::vector<Point> load_ground_truth(const std::string& path) {
  std::ifstream in(path);
  PK_CHECK(in.good(), ErrorKind::kInvalidData, "cannot open " + path);
  std::vector<Point> pores;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    double row, col;
    if (!(ss >> row)) continue;  // blank line
    PK_CHECK(static_cast<bool>(ss >> col), ErrorKind::kFormat,
             "bad ground-truth line " + std::to_string(lineno) + " in " + path);
    // Files are 1-indexed.
    pores.push_back({row - 1.0, col - 1.0});
  }
  return pores;
}

void save_ground_truth(const std::vector<Point>& pores,
                       const std::string& path) {
  std::ofstream out(path);
  PK_CHECK(out.good(), ErrorKind::kInvalidData, "cannot write " + path);
  for (const Point& p : pores) {
    out << std::lround(p.row) + 1 << " " << std::lround(p.col) + 1 << "\n";
  }
  PK_CHECK(out.good(), ErrorKind::kInvalidData, "write failed: " + path);
}

}  // namespace porekit
