#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ssc/core.hpp"
#include "ssc/tensor.hpp"

namespace ssc {

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, cat("cannot create directory ", dir.string(), ": ", ec.message()));
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), cat("cannot open ", path));
  in.seekg(0, std::ios::end);
  const auto size = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  in.read(reinterpret_cast<char*>(bytes.data()), size);
  require(in.good(), cat("short read on ", path));
  return bytes;
}

inline void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), cat("cannot open ", path, " for writing"));
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  require(out.good(), cat("short write on ", path));
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), cat("cannot open ", path));
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), cat("cannot open ", path, " for writing"));
  out << text;
  require(out.good(), cat("short write on ", path));
}

// ---------------------------------------------------------------------------
// IDX (big-endian dims, row-major payload; the de-facto handwritten-digit
// container layout)

namespace detail {
inline std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
         std::uint32_t(p[3]);
}
inline void push_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(std::uint8_t(v >> 24));
  out.push_back(std::uint8_t(v >> 16));
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v));
}
}  // namespace detail

/// Reads an IDX file into a double tensor. Supported element types: 0x08
/// unsigned byte, 0x0C int32, 0x0D float32, 0x0E float64. The element type
/// code is reported through type_out when given.
inline Tensor read_idx(const std::string& path, int* type_out = nullptr) {
  const std::vector<std::uint8_t> b = read_file_bytes(path);
  require(b.size() >= 4, cat("idx ", path, ": truncated magic"));
  require(b[0] == 0 && b[1] == 0, cat("idx ", path, ": bad magic prefix"));
  const int type = b[2];
  const int ndim = b[3];
  require(ndim >= 1 && ndim <= 4, cat("idx ", path, ": unsupported rank ", ndim));
  const std::size_t header = 4 + 4 * static_cast<std::size_t>(ndim);
  require(b.size() >= header, cat("idx ", path, ": truncated dims"));

  std::vector<std::size_t> shape(static_cast<std::size_t>(ndim));
  std::size_t numel = 1;
  for (int i = 0; i < ndim; ++i) {
    shape[static_cast<std::size_t>(i)] = detail::read_be32(&b[4 + 4 * static_cast<std::size_t>(i)]);
    numel *= shape[static_cast<std::size_t>(i)];
  }

  std::size_t elem_size = 0;
  switch (type) {
    case 0x08: elem_size = 1; break;
    case 0x0C: elem_size = 4; break;
    case 0x0D: elem_size = 4; break;
    case 0x0E: elem_size = 8; break;
    default: fail("idx ", path, ": unsupported element type 0x", type);
  }
  require(b.size() == header + numel * elem_size,
          cat("idx ", path, ": payload size mismatch: expected ", numel * elem_size,
              " bytes for ", numel, " elements, got ", b.size() - header));
  if (type_out != nullptr) *type_out = type;

  Tensor t(shape, 0.0);
  const std::uint8_t* p = b.data() + header;
  for (std::size_t i = 0; i < numel; ++i) {
    switch (type) {
      case 0x08: t[i] = double(p[i]); break;
      case 0x0C: t[i] = double(static_cast<std::int32_t>(detail::read_be32(p + 4 * i))); break;
      case 0x0D: {
        const std::uint32_t raw = detail::read_be32(p + 4 * i);
        float f;
        std::memcpy(&f, &raw, sizeof f);
        t[i] = double(f);
        break;
      }
      case 0x0E: {
        std::uint64_t raw = 0;
        for (int k = 0; k < 8; ++k) raw = (raw << 8) | p[8 * i + static_cast<std::size_t>(k)];
        double d;
        std::memcpy(&d, &raw, sizeof d);
        t[i] = d;
        break;
      }
    }
  }
  return t;
}

/// Writes a tensor as a float64 IDX file (big-endian, type 0x0E).
inline void write_idx_f64(const std::string& path, const Tensor& t) {
  require(t.rank() >= 1 && t.rank() <= 4, "write_idx_f64: rank must be 1..4");
  std::vector<std::uint8_t> out;
  out.reserve(4 + 4 * t.rank() + 8 * t.numel());
  out.push_back(0);
  out.push_back(0);
  out.push_back(0x0E);
  out.push_back(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t i = 0; i < t.rank(); ++i)
    detail::push_be32(out, static_cast<std::uint32_t>(t.dim(i)));
  for (std::size_t i = 0; i < t.numel(); ++i) {
    std::uint64_t raw;
    const double v = t[i];
    std::memcpy(&raw, &v, sizeof raw);
    for (int k = 7; k >= 0; --k) out.push_back(std::uint8_t(raw >> (8 * k)));
  }
  write_file_bytes(path, out);
}

/// Writes a tensor of integer values in [0, 255] as an unsigned-byte IDX file.
inline void write_idx_u8(const std::string& path, const Tensor& t) {
  require(t.rank() >= 1 && t.rank() <= 4, "write_idx_u8: rank must be 1..4");
  std::vector<std::uint8_t> out;
  out.reserve(4 + 4 * t.rank() + t.numel());
  out.push_back(0);
  out.push_back(0);
  out.push_back(0x08);
  out.push_back(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t i = 0; i < t.rank(); ++i)
    detail::push_be32(out, static_cast<std::uint32_t>(t.dim(i)));
  for (std::size_t i = 0; i < t.numel(); ++i) {
    const double v = t[i];
    require(v >= 0.0 && v <= 255.0 && v == std::floor(v),
            cat("write_idx_u8: value ", v, " not an integer in [0,255]"));
    out.push_back(static_cast<std::uint8_t>(v));
  }
  write_file_bytes(path, out);
}

inline std::vector<int> read_idx_labels(const std::string& path) {
  const Tensor t = read_idx(path);
  require(t.rank() == 1, cat("idx ", path, ": labels must be rank 1"));
  std::vector<int> labels(t.numel());
  for (std::size_t i = 0; i < t.numel(); ++i) labels[i] = static_cast<int>(t[i]);
  return labels;
}

// ---------------------------------------------------------------------------
// PGM (binary P5, maxval 255)

inline Tensor read_pgm(const std::string& path) {
  const std::vector<std::uint8_t> b = read_file_bytes(path);
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < b.size()) {
      if (std::isspace(b[pos])) {
        ++pos;
      } else if (b[pos] == '#') {
        while (pos < b.size() && b[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> std::size_t {
    skip_space();
    require(pos < b.size() && std::isdigit(b[pos]), cat("pgm ", path, ": expected integer"));
    std::size_t v = 0;
    while (pos < b.size() && std::isdigit(b[pos])) v = v * 10 + (b[pos++] - '0');
    return v;
  };
  require(b.size() >= 2 && b[0] == 'P' && b[1] == '5', cat("pgm ", path, ": not binary P5"));
  pos = 2;
  const std::size_t w = read_int();
  const std::size_t h = read_int();
  const std::size_t maxval = read_int();
  require(maxval == 255, cat("pgm ", path, ": only maxval 255 supported"));
  require(pos < b.size() && std::isspace(b[pos]), cat("pgm ", path, ": missing header separator"));
  ++pos;
  require(b.size() - pos == w * h, cat("pgm ", path, ": payload size mismatch"));
  Tensor t({h, w}, 0.0);
  for (std::size_t i = 0; i < w * h; ++i) t[i] = double(b[pos + i]);
  return t;
}

inline void write_pgm(const std::string& path, const Tensor& img) {
  require(img.rank() == 2, "write_pgm: image must be rank 2");
  std::string header = cat("P5\n", img.dim(1), " ", img.dim(0), "\n255\n");
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (std::size_t i = 0; i < img.numel(); ++i) {
    const double v = std::round(img[i]);
    require(v >= 0.0 && v <= 255.0, cat("write_pgm: value ", img[i], " out of [0,255]"));
    out.push_back(static_cast<std::uint8_t>(v));
  }
  write_file_bytes(path, out);
}

// ---------------------------------------------------------------------------
// PNG (8-bit grayscale via the libpng simplified API; color inputs are
// converted to luminance on read)

inline Tensor read_png_gray(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    fail("png ", path, ": ", image.message);
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    fail("png ", path, ": ", msg);
  }
  Tensor t({image.height, image.width}, 0.0);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = double(buf[i]);
  return t;
}

inline void write_png_gray(const std::string& path, const Tensor& img) {
  require(img.rank() == 2, "write_png_gray: image must be rank 2");
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.dim(1));
  image.height = static_cast<png_uint_32>(img.dim(0));
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(img.numel());
  for (std::size_t i = 0; i < img.numel(); ++i) {
    const double v = std::round(img[i]);
    require(v >= 0.0 && v <= 255.0, cat("write_png_gray: value ", img[i], " out of [0,255]"));
    buf[i] = static_cast<std::uint8_t>(v);
  }
  if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr))
    fail("png ", path, ": write failed: ", image.message);
}

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// Fixed-point decimal text, the stable formatting used in result tables.
inline std::string format_fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  // normalize negative zero so equal values print identically
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-') s.erase(0, 1);
  return s;
}

inline std::string csv_line(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += csv_escape(cells[i]);
  }
  line += '\n';
  return line;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary | std::ios::trunc) {
    require(out_.good(), cat("cannot open ", path, " for writing"));
  }

  void write_row(const std::vector<std::string>& cells) {
    out_ << csv_line(cells);
    require(out_.good(), "csv write failed");
  }

 private:
  std::ofstream out_;
};

}  // namespace ssc
