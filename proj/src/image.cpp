#include "octnet/image.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

#include <jpeglib.h>
#include <png.h>

namespace octnet {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open '" + path + "'");
  return f;
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  longjmp(err->jump, 1);
}

ImageU8 decode_jpeg(FILE* f, const std::string& path) {
  jpeg_decompress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw DecodeError("cannot decode JPEG '" + path + "': " + jerr.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f);
  jpeg_read_header(&cinfo, TRUE);
  jpeg_start_decompress(&cinfo);

  ImageU8 img;
  img.width = static_cast<int>(cinfo.output_width);
  img.height = static_cast<int>(cinfo.output_height);
  img.channels = cinfo.output_components;
  if (img.width < 1 || img.height < 1) {
    jpeg_destroy_decompress(&cinfo);
    throw DecodeError("JPEG '" + path + "' has zero-sized dimensions");
  }
  img.data.resize(static_cast<size_t>(img.width) * img.height * img.channels);
  const size_t stride = static_cast<size_t>(img.width) * img.channels;
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.data.data() + cinfo.output_scanline * stride;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

ImageU8 decode_png(FILE* f, const std::string& path) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DecodeError("cannot allocate PNG reader for '" + path + "'");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DecodeError("cannot allocate PNG info for '" + path + "'");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError("cannot decode PNG '" + path + "'");
  }
  png_init_io(png, f);
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  int color_type = png_get_color_type(png, info);

  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);

  ImageU8 img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.channels = static_cast<int>(png_get_channels(png, info));
  if (img.width < 1 || img.height < 1) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError("PNG '" + path + "' has zero-sized dimensions");
  }
  const size_t stride = png_get_rowbytes(png, info);
  img.data.resize(stride * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = img.data.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace

ImageU8 decode_image_file(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  unsigned char magic[8] = {0};
  size_t got = std::fread(magic, 1, sizeof(magic), f.get());
  std::rewind(f.get());
  if (got >= 2 && magic[0] == 0xFF && magic[1] == 0xD8) return decode_jpeg(f.get(), path);
  if (got >= 8 && png_sig_cmp(magic, 0, 8) == 0) return decode_png(f.get(), path);
  throw DecodeError("'" + path + "' is neither JPEG nor PNG");
}

void write_png_gray(const std::string& path, int width, int height, const std::vector<uint8_t>& pixels) {
  if (width < 1 || height < 1) throw ParamError("png dimensions must be positive");
  if (pixels.size() != static_cast<size_t>(width) * height) {
    throw ParamError("png pixel buffer size mismatch");
  }
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("cannot allocate PNG writer");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("cannot allocate PNG info");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("cannot write PNG '" + path + "'");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<size_t>(y) * width));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_jpeg_gray(const std::string& path, int width, int height, const std::vector<uint8_t>& pixels,
                     int quality) {
  if (width < 1 || height < 1) throw ParamError("jpeg dimensions must be positive");
  if (pixels.size() != static_cast<size_t>(width) * height) {
    throw ParamError("jpeg pixel buffer size mismatch");
  }
  FilePtr f = open_file(path, "wb");
  jpeg_compress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_compress(&cinfo);
    throw IoError("cannot write JPEG '" + path + "': " + jerr.message);
  }
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, f.get());
  cinfo.image_width = static_cast<JDIMENSION>(width);
  cinfo.image_height = static_cast<JDIMENSION>(height);
  cinfo.input_components = 1;
  cinfo.in_color_space = JCS_GRAYSCALE;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(pixels.data() + cinfo.next_scanline * static_cast<size_t>(width));
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
}

Tensor<float> to_float_tensor(const ImageU8& img) {
  if (img.width < 1 || img.height < 1 || img.data.empty()) {
    throw DecodeError("empty image buffer");
  }
  Tensor<float> out(Shape{img.height, img.width, 3});
  const float inv = 1.0f / 255.0f;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const uint8_t* px = img.data.data() + (static_cast<size_t>(y) * img.width + x) * img.channels;
      float r, g, b;
      if (img.channels == 1) {
        r = g = b = px[0] * inv;
      } else {
        r = px[0] * inv;
        g = px[1] * inv;
        b = px[2] * inv;  // channel 4, if present, is alpha: dropped
      }
      float* dst = &out.at(y, x, 0);
      dst[0] = r;
      dst[1] = g;
      dst[2] = b;
    }
  }
  return out;
}

Tensor<float> resize_bilinear(const Tensor<float>& img, int out_h, int out_w) {
  if (img.rank() != 3) throw ShapeError("resize_bilinear expects HxWxC, got " + shape_str(img.shape()));
  if (out_h < 1 || out_w < 1) throw ParamError("resize target must be positive");
  const int h = img.dim(0), w = img.dim(1), c = img.dim(2);
  if (h == out_h && w == out_w) return img;

  Tensor<float> out(Shape{out_h, out_w, c});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const float wy = static_cast<float>(fy - y0);
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const float wx = static_cast<float>(fx - x0);
      for (int ch = 0; ch < c; ++ch) {
        float top = img.at(y0, x0, ch) * (1.0f - wx) + img.at(y0, x1, ch) * wx;
        float bot = img.at(y1, x0, ch) * (1.0f - wx) + img.at(y1, x1, ch) * wx;
        out.at(y, x, ch) = top * (1.0f - wy) + bot * wy;
      }
    }
  }
  return out;
}

Tensor<float> load_image(const std::string& path, int target_h, int target_w) {
  return resize_bilinear(to_float_tensor(decode_image_file(path)), target_h, target_w);
}

AugmentParams sample_augment(const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  AugmentParams p;
  if (!cfg.enabled) return p;
  p.theta_deg = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg);
  p.dx = rng.uniform(-cfg.shift_frac, cfg.shift_frac);
  p.dy = rng.uniform(-cfg.shift_frac, cfg.shift_frac);
  p.shear_deg = rng.uniform(-cfg.shear_deg, cfg.shear_deg);
  p.flip = rng.bernoulli(cfg.flip_prob);
  return p;
}

Tensor<float> apply_augment(const Tensor<float>& img, const AugmentParams& p) {
  if (img.rank() != 3) throw ShapeError("apply_augment expects HxWxC, got " + shape_str(img.shape()));
  const int h = img.dim(0), w = img.dim(1), c = img.dim(2);

  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  const double rad = p.theta_deg * M_PI / 180.0;
  const double cosr = std::cos(rad), sinr = std::sin(rad);
  const double sh = std::tan(p.shear_deg * M_PI / 180.0);
  const double fx = p.flip ? -1.0 : 1.0;

  // Linear part of T(c+shift) . R . Shear . Flip . T(-c), acting on (x,y).
  // Shear.Flip = [[fx, sh],[0, 1]]; R.(Shear.Flip) composes to:
  double a00 = cosr * fx;
  double a01 = cosr * sh - sinr;
  double a10 = sinr * fx;
  double a11 = sinr * sh + cosr;
  double tx = cx + p.dx * w - (a00 * cx + a01 * cy);
  double ty = cy + p.dy * h - (a10 * cx + a11 * cy);

  // Invert: src = L^-1 (dst - t).
  const double det = a00 * a11 - a01 * a10;
  if (std::abs(det) < 1e-12) throw NumericError("degenerate augmentation transform");
  const double i00 = a11 / det, i01 = -a01 / det;
  const double i10 = -a10 / det, i11 = a00 / det;

  Tensor<float> out(Shape{h, w, c}, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double rx = x - tx, ry = y - ty;
      const double sxf = i00 * rx + i01 * ry;
      const double syf = i10 * rx + i11 * ry;
      const int x0 = static_cast<int>(std::floor(sxf));
      const int y0 = static_cast<int>(std::floor(syf));
      const double ax = sxf - x0, ay = syf - y0;
      float* dst = &out.at(y, x, 0);
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int dyy = 0; dyy <= 1; ++dyy) {
          const int yy = y0 + dyy;
          if (yy < 0 || yy >= h) continue;
          const double wy = dyy ? ay : 1.0 - ay;
          for (int dxx = 0; dxx <= 1; ++dxx) {
            const int xx = x0 + dxx;
            if (xx < 0 || xx >= w) continue;
            const double wx = dxx ? ax : 1.0 - ax;
            acc += wy * wx * img.at(yy, xx, ch);
          }
        }
        dst[ch] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Tensor<float> augment(const Tensor<float>& img, const AugmentConfig& cfg, uint64_t seed) {
  cfg.validate();
  if (!cfg.enabled) return img;
  Rng rng(seed);
  return apply_augment(img, sample_augment(cfg, rng));
}

}  // namespace octnet
