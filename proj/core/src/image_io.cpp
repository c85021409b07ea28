#include "sqseg/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <vector>

#include "sqseg/tensor_io.hpp"

namespace sqseg {

namespace {

// libpng reports errors through longjmp. Every function that calls setjmp
// below touches only trivially destructible locals after the jump point.

struct ErrorSlot {
  char message[256] = "";
};

void on_error(png_structp png, png_const_charp msg) {
  auto* slot = static_cast<ErrorSlot*>(png_get_error_ptr(png));
  std::snprintf(slot->message, sizeof slot->message, "%s", msg);
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

struct Reader {
  const unsigned char* data;
  std::size_t size;
  std::size_t pos;
};

void read_bytes(png_structp png, png_bytep out, png_size_t n) {
  auto* r = static_cast<Reader*>(png_get_io_ptr(png));
  if (n > r->size - r->pos) png_error(png, "unexpected end of data");
  std::memcpy(out, r->data + r->pos, n);
  r->pos += n;
}

struct Info {
  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0, channels = 0;
  std::size_t rowbytes = 0;
};

enum class Mode { Rgb, Raw };

class PngReader {
 public:
  explicit PngReader(const std::string& bytes)
      : reader_{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), 0} {
    if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0)
      throw ImageError("not a PNG image");
    png_ = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err_, on_error, on_warning);
    if (!png_) throw ImageError("png: out of memory");
    info_ = png_create_info_struct(png_);
    if (!info_) {
      png_destroy_read_struct(&png_, nullptr, nullptr);
      throw ImageError("png: out of memory");
    }
    png_set_read_fn(png_, &reader_, read_bytes);
  }
  ~PngReader() { png_destroy_read_struct(&png_, &info_, nullptr); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;

  Info header(Mode mode) {
    Info out;
    if (!read_header(mode, out)) throw ImageError(std::string("png: ") + err_.message);
    return out;
  }

  void rows(std::vector<unsigned char>& buffer, const Info& info) {
    std::vector<png_bytep> ptrs(info.height);
    for (png_uint_32 y = 0; y < info.height; ++y) ptrs[y] = buffer.data() + y * info.rowbytes;
    if (!read_rows(ptrs.data())) throw ImageError(std::string("png: ") + err_.message);
  }

 private:
  bool read_header(Mode mode, Info& out) {
    if (setjmp(png_jmpbuf(png_))) return false;
    png_read_info(png_, info_);
    out.color_type = png_get_color_type(png_, info_);
    out.bit_depth = png_get_bit_depth(png_, info_);
    if (png_get_interlace_type(png_, info_) != PNG_INTERLACE_NONE) png_set_interlace_handling(png_);
    if (mode == Mode::Rgb) {
      if (out.color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png_);
      if (out.color_type == PNG_COLOR_TYPE_GRAY && out.bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png_);
      if (out.color_type == PNG_COLOR_TYPE_GRAY || out.color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png_);
      if (png_get_valid(png_, info_, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png_);
      png_set_strip_16(png_);
      png_set_strip_alpha(png_);
    } else if (out.color_type == PNG_COLOR_TYPE_GRAY && out.bit_depth < 8) {
      png_set_expand_gray_1_2_4_to_8(png_);
    } else if (out.color_type == PNG_COLOR_TYPE_PALETTE && out.bit_depth < 8) {
      png_set_packing(png_);
    }
    png_read_update_info(png_, info_);
    out.width = png_get_image_width(png_, info_);
    out.height = png_get_image_height(png_, info_);
    out.channels = png_get_channels(png_, info_);
    out.rowbytes = png_get_rowbytes(png_, info_);
    out.bit_depth = png_get_bit_depth(png_, info_);
    return true;
  }

  bool read_rows(png_bytepp rows) {
    if (setjmp(png_jmpbuf(png_))) return false;
    png_read_image(png_, rows);
    png_read_end(png_, nullptr);
    return true;
  }

  ErrorSlot err_;
  Reader reader_;
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

void append_bytes(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), n);
}

void flush_noop(png_structp) {}

struct WriteJob {
  png_uint_32 width, height;
  int color_type;
  const png_color* palette;
  int palette_size;
  png_bytepp rows;
};

bool write_png(png_structp png, png_infop info, const WriteJob& job) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_IHDR(png, info, job.width, job.height, 8, job.color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (job.palette) png_set_PLTE(png, info, job.palette, job.palette_size);
  png_write_info(png, info);
  png_write_image(png, job.rows);
  png_write_end(png, nullptr);
  return true;
}

std::string encode(std::vector<unsigned char>& pixels, int width, int height, int channels, int color_type,
                   const std::vector<png_color>& palette = {}) {
  std::string out;
  ErrorSlot err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, on_error, on_warning);
  if (!png) throw ImageError("png: out of memory");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw ImageError("png: out of memory");
  }
  png_set_write_fn(png, &out, append_bytes, flush_noop);
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * width * channels;
  const WriteJob job{static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), color_type,
                     palette.empty() ? nullptr : palette.data(), static_cast<int>(palette.size()), rows.data()};
  const bool ok = write_png(png, info, job);
  png_destroy_write_struct(&png, &info);
  if (!ok) throw ImageError(std::string("png: ") + err.message);
  return out;
}

std::string read_or_throw(const std::filesystem::path& path) {
  try {
    return read_file_bytes(path);
  } catch (const std::runtime_error& e) {
    throw ImageError(e.what());
  }
}

}  // namespace

Tensor decode_rgb_png(const std::string& bytes) {
  PngReader reader(bytes);
  const Info info = reader.header(Mode::Rgb);
  if (info.channels != 3 || info.bit_depth != 8) throw ImageError("png: unsupported colour layout");
  std::vector<unsigned char> buf(info.rowbytes * info.height);
  reader.rows(buf, info);
  Tensor t({3, info.height, info.width});
  const std::size_t plane = static_cast<std::size_t>(info.width) * info.height;
  for (std::size_t i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c) t[c * plane + i] = static_cast<float>(buf[3 * i + c]) / 255.0f;
  return t;
}

Tensor read_rgb_png(const std::filesystem::path& path) { return decode_rgb_png(read_or_throw(path)); }

std::string encode_rgb_png(const Tensor& rgb) {
  require_feature_map(rgb, "encode_rgb_png");
  if (rgb.channels() != 3) throw ImageError("encode_rgb_png: expected 3 channels");
  const std::size_t plane = rgb.plane();
  std::vector<unsigned char> px(3 * plane);
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < 3; ++c)
      px[3 * i + c] = static_cast<unsigned char>(std::lround(std::clamp(rgb[c * plane + i], 0.0f, 1.0f) * 255.0f));
  return encode(px, static_cast<int>(rgb.width()), static_cast<int>(rgb.height()), 3, PNG_COLOR_TYPE_RGB);
}

LabelMask decode_label_png(const std::string& bytes, int num_classes) {
  PngReader reader(bytes);
  const Info info = reader.header(Mode::Raw);
  if ((info.color_type != PNG_COLOR_TYPE_GRAY && info.color_type != PNG_COLOR_TYPE_PALETTE) ||
      info.bit_depth != 8 || info.channels != 1)
    throw ImageError("label PNG must be 8-bit grayscale or palette-indexed");
  std::vector<unsigned char> buf(info.rowbytes * info.height);
  reader.rows(buf, info);
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(info.width) * info.height);
  for (png_uint_32 y = 0; y < info.height; ++y)
    std::memcpy(labels.data() + static_cast<std::size_t>(y) * info.width, buf.data() + y * info.rowbytes,
                info.width);
  for (auto v : labels)
    if (v > num_classes)
      throw ImageError("label PNG holds class id " + std::to_string(v) + " above " + std::to_string(num_classes));
  return LabelMask(static_cast<int>(info.width), static_cast<int>(info.height), std::move(labels), num_classes);
}

LabelMask read_label_png(const std::filesystem::path& path, int num_classes) {
  return decode_label_png(read_or_throw(path), num_classes);
}

std::string encode_label_png(const LabelMask& labels, const Palette& palette) {
  std::vector<png_color> pal(static_cast<std::size_t>(std::max(labels.num_classes(), palette.num_classes())) + 1);
  for (std::size_t i = 0; i < pal.size(); ++i) {
    const Rgb8 c = palette.color(static_cast<int>(i));
    pal[i] = {c[0], c[1], c[2]};
  }
  std::vector<unsigned char> px(labels.labels().begin(), labels.labels().end());
  return encode(px, labels.width(), labels.height(), 1, PNG_COLOR_TYPE_PALETTE, pal);
}

std::string encode_mask_png(const BinaryMask& mask) {
  std::vector<unsigned char> px(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) px[i] = mask[i] ? 255 : 0;
  return encode(px, mask.width(), mask.height(), 1, PNG_COLOR_TYPE_GRAY);
}

BinaryMask decode_mask_png(const std::string& bytes) {
  PngReader reader(bytes);
  const Info info = reader.header(Mode::Raw);
  if (info.color_type != PNG_COLOR_TYPE_GRAY || info.bit_depth != 8)
    throw ImageError("mask PNG must be 8-bit grayscale");
  std::vector<unsigned char> buf(info.rowbytes * info.height);
  reader.rows(buf, info);
  BinaryMask m(static_cast<int>(info.width), static_cast<int>(info.height));
  for (png_uint_32 y = 0; y < info.height; ++y)
    for (png_uint_32 x = 0; x < info.width; ++x) m.set(static_cast<int>(x), static_cast<int>(y), buf[y * info.rowbytes + x] != 0);
  return m;
}

}  // namespace sqseg
