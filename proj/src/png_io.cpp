#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

#include "thermadapt/image.hpp"

namespace thermadapt {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw Error(ErrorCode::Io, "cannot open " + path.string());
  }
  return f;
}

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text != nullptr) *text = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

// Owns the libpng read structs. Errors inside libpng longjmp back into the
// function that armed setjmp; no C++ objects with destructors may live
// between that setjmp and the failing libpng call.
class PngReader {
 public:
  explicit PngReader(const std::filesystem::path& path)
      : path_(path), file_(open_file(path, "rb")) {
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file_.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
      throw Error(ErrorCode::UnsupportedImage, path.string() + " is not a PNG");
    }
    png_ = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error_text_,
                                  png_error_fn, png_warning_fn);
    info_ = png_ != nullptr ? png_create_info_struct(png_) : nullptr;
    if (info_ == nullptr) {
      png_destroy_read_struct(&png_, nullptr, nullptr);
      throw Error(ErrorCode::Io, "libpng allocation failed");
    }
  }

  ~PngReader() { png_destroy_read_struct(&png_, &info_, nullptr); }

  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;

  PngInfo read_header() {
    if (setjmp(png_jmpbuf(png_)) != 0) fail();
    png_init_io(png_, file_.get());
    png_set_sig_bytes(png_, 8);
    png_read_info(png_, info_);
    PngInfo out;
    out.width = static_cast<int>(png_get_image_width(png_, info_));
    out.height = static_cast<int>(png_get_image_height(png_, info_));
    out.bit_depth = png_get_bit_depth(png_, info_);
    switch (png_get_color_type(png_, info_)) {
      case PNG_COLOR_TYPE_GRAY:
        out.channels = 1;
        break;
      case PNG_COLOR_TYPE_RGB:
        out.channels = 3;
        break;
      default:
        out.channels = 0;
    }
    return out;
  }

  void read_rows(std::uint8_t* dst, std::size_t row_bytes, int height) {
    if (setjmp(png_jmpbuf(png_)) != 0) fail();
    if (png_get_rowbytes(png_, info_) != row_bytes) {
      png_error(png_, "unexpected row size");
    }
    for (int y = 0; y < height; ++y) {
      png_read_row(png_, dst + static_cast<std::size_t>(y) * row_bytes, nullptr);
    }
    png_read_end(png_, nullptr);
  }

 private:
  [[noreturn]] void fail() {
    throw Error(ErrorCode::UnsupportedImage,
                path_.string() + ": " + (error_text_.empty() ? "decode error" : error_text_));
  }

  std::filesystem::path path_;
  FilePtr file_;
  std::string error_text_;
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

void check_supported(const PngInfo& info, const std::filesystem::path& path) {
  if (info.bit_depth != 8 || info.channels == 0) {
    throw Error(ErrorCode::UnsupportedImage,
                path.string() + ": only 8-bit gray or 8-bit RGB PNG is supported");
  }
}

void write_raw(const std::filesystem::path& path, int width, int height, int color_type,
               std::span<const std::uint8_t> data, std::size_t row_bytes) {
  FilePtr file = open_file(path, "wb");
  std::string error_text;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error_text,
                                            png_error_fn, png_warning_fn);
  png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorCode::Io, "libpng allocation failed");
  }
  if (setjmp(png_jmpbuf(png)) != 0) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Io, path.string() + ": " + error_text);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, data.data() + static_cast<std::size_t>(y) * row_bytes);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

int image_width(const AnyImage& img) {
  return std::visit([](const auto& i) { return i.width(); }, img);
}

int image_height(const AnyImage& img) {
  return std::visit([](const auto& i) { return i.height(); }, img);
}

PngInfo read_png_info(const std::filesystem::path& path) {
  PngReader reader(path);
  return reader.read_header();
}

AnyImage read_png(const std::filesystem::path& path) {
  PngReader reader(path);
  const PngInfo info = reader.read_header();
  check_supported(info, path);
  if (info.channels == 1) {
    GrayImage img(info.width, info.height);
    reader.read_rows(img.bytes().data(), static_cast<std::size_t>(info.width), info.height);
    return img;
  }
  RgbImage img(info.width, info.height);
  reader.read_rows(img.bytes().data(), static_cast<std::size_t>(info.width) * 3, info.height);
  return img;
}

GrayImage read_png_gray(const std::filesystem::path& path) {
  AnyImage img = read_png(path);
  if (auto* gray = std::get_if<GrayImage>(&img)) return std::move(*gray);
  throw Error(ErrorCode::UnsupportedImage,
              path.string() + ": expected a single-channel image");
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
  if (img.width() == 0 || img.height() == 0) {
    throw Error(ErrorCode::UnsupportedImage, "cannot encode an empty image");
  }
  write_raw(path, img.width(), img.height(), PNG_COLOR_TYPE_GRAY, img.bytes(),
            static_cast<std::size_t>(img.width()));
}

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  if (img.width() == 0 || img.height() == 0) {
    throw Error(ErrorCode::UnsupportedImage, "cannot encode an empty image");
  }
  write_raw(path, img.width(), img.height(), PNG_COLOR_TYPE_RGB, img.bytes(),
            static_cast<std::size_t>(img.width()) * 3);
}

void write_png(const std::filesystem::path& path, const AnyImage& img) {
  std::visit([&](const auto& i) { write_png(path, i); }, img);
}

}  // namespace thermadapt
