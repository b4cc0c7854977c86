#include "enhance/pipeline/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "enhance/core/error.hpp"

namespace enhance::pipeline {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::DecodeError, "cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot open " + path + " for writing");
  out.write(data.data(), std::streamsize(data.size()));
  if (!out) raise(ErrorCode::IoError, "short write to " + path);
}

bool has_suffix(const std::string& s, const char* suffix) {
  const std::size_t n = std::strlen(suffix);
  return s.size() >= n && s.compare(s.size() - n, n, suffix) == 0;
}

// ---------------------------------------------------------------- PGM/PPM

struct PnmHeader {
  int type = 0;  // 2,3,5,6
  std::uint32_t width = 0, height = 0;
  std::uint32_t maxval = 0;
  std::size_t data_offset = 0;
};

PnmHeader parse_pnm_header(const std::string& buf, const std::string& path) {
  if (buf.size() < 2 || buf[0] != 'P') raise(ErrorCode::DecodeError, "not a PNM file: " + path);
  PnmHeader h;
  h.type = buf[1] - '0';
  if (h.type != 2 && h.type != 3 && h.type != 5 && h.type != 6) {
    raise(ErrorCode::DecodeError, "unsupported PNM type in " + path);
  }
  std::size_t pos = 2;
  std::uint32_t fields[3];
  for (int f = 0; f < 3; ++f) {
    // skip whitespace and comments
    while (pos < buf.size()) {
      if (std::isspace((unsigned char)buf[pos])) {
        ++pos;
      } else if (buf[pos] == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    std::uint64_t v = 0;
    bool any = false;
    while (pos < buf.size() && std::isdigit((unsigned char)buf[pos])) {
      v = v * 10 + std::uint64_t(buf[pos] - '0');
      if (v > 0xffffffffull) raise(ErrorCode::DecodeError, "header overflow in " + path);
      ++pos;
      any = true;
    }
    if (!any) raise(ErrorCode::DecodeError, "truncated PNM header in " + path);
    fields[f] = std::uint32_t(v);
  }
  h.width = fields[0];
  h.height = fields[1];
  h.maxval = fields[2];
  if (h.width < 1 || h.height < 1 || h.maxval < 1 || h.maxval > 65535) {
    raise(ErrorCode::DecodeError, "bad PNM dimensions in " + path);
  }
  if (h.type == 5 || h.type == 6) {
    if (pos >= buf.size() || !std::isspace((unsigned char)buf[pos])) {
      raise(ErrorCode::DecodeError, "bad PNM header in " + path);
    }
    ++pos;  // exactly one whitespace byte before binary data
  }
  h.data_offset = pos;
  return h;
}

DecodedImage decode_pnm(const std::string& buf, const std::string& path) {
  const PnmHeader h = parse_pnm_header(buf, path);
  const int nch = (h.type == 3 || h.type == 6) ? 3 : 1;
  const std::size_t samples = std::size_t(h.width) * h.height * nch;

  DecodedImage img;
  img.bit_depth = h.maxval > 255 ? 16 : 8;
  for (int c = 0; c < nch; ++c) img.channels.emplace_back(h.width, h.height);

  if (h.type == 2 || h.type == 3) {
    std::size_t pos = h.data_offset;
    for (std::size_t s = 0; s < samples; ++s) {
      while (pos < buf.size() && std::isspace((unsigned char)buf[pos])) ++pos;
      std::uint64_t v = 0;
      bool any = false;
      while (pos < buf.size() && std::isdigit((unsigned char)buf[pos])) {
        v = v * 10 + std::uint64_t(buf[pos] - '0');
        ++pos;
        any = true;
      }
      if (!any || v > h.maxval) raise(ErrorCode::DecodeError, "bad ASCII sample in " + path);
      img.channels[s % nch].values[s / nch] = double(v);
    }
  } else {
    const int bytes = h.maxval > 255 ? 2 : 1;
    if (buf.size() - h.data_offset < samples * bytes) {
      raise(ErrorCode::DecodeError, "truncated PNM data in " + path);
    }
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + h.data_offset);
    for (std::size_t s = 0; s < samples; ++s) {
      std::uint32_t v;
      if (bytes == 2) {
        v = std::uint32_t(p[2 * s]) << 8 | p[2 * s + 1];  // big-endian per spec
      } else {
        v = p[s];
      }
      img.channels[s % nch].values[s / nch] = double(v);
    }
  }
  return img;
}

std::string encode_pnm(const DecodedImage& img, bool color) {
  const std::uint32_t maxval = img.bit_depth > 8 ? 65535 : 255;
  const int nch = color ? 3 : 1;
  std::string out;
  out += color ? "P6\n" : "P5\n";
  out += std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n";
  out += std::to_string(maxval) + "\n";
  const std::size_t pixels = std::size_t(img.width()) * img.height();
  for (std::size_t p = 0; p < pixels; ++p) {
    for (int c = 0; c < nch; ++c) {
      const double raw = img.channels[std::size_t(c) % img.channels.size()].values[p];
      const double clamped = std::min(std::max(raw, 0.0), double(maxval));
      const std::uint32_t v = std::uint32_t(std::lround(clamped));
      if (maxval > 255) {
        out.push_back(char((v >> 8) & 0xff));
        out.push_back(char(v & 0xff));
      } else {
        out.push_back(char(v & 0xff));
      }
    }
  }
  return out;
}

// --------------------------------------------------------------------- PFM
// Grayscale float32 maps ("Pf"), rows stored bottom-to-top per the format.

DecodedImage decode_pfm(const std::string& buf, const std::string& path) {
  std::istringstream hdr(buf.substr(0, 128));
  std::string magic;
  std::uint32_t width = 0, height = 0;
  double scale = 0.0;
  hdr >> magic >> width >> height >> scale;
  if (magic != "Pf" || width < 1 || height < 1 || scale == 0.0 || !hdr) {
    raise(ErrorCode::DecodeError, "bad PFM header in " + path);
  }
  if (scale > 0.0) raise(ErrorCode::DecodeError, "big-endian PFM unsupported: " + path);
  std::size_t pos = std::size_t(hdr.tellg());
  ++pos;  // single whitespace after the scale
  const std::size_t need = std::size_t(width) * height * 4;
  if (buf.size() < pos + need) raise(ErrorCode::DecodeError, "truncated PFM data in " + path);

  DecodedImage img;
  img.bit_depth = 16;
  img.channels.emplace_back(width, height);
  const char* p = buf.data() + pos;
  for (std::uint32_t row = 0; row < height; ++row) {
    const std::uint32_t y = height - 1 - row;
    for (std::uint32_t x = 0; x < width; ++x, p += 4) {
      float f;
      std::memcpy(&f, p, 4);
      if (!std::isfinite(f)) raise(ErrorCode::DecodeError, "non-finite PFM sample in " + path);
      img.channels[0].at(x, y) = double(f);
    }
  }
  return img;
}

std::string encode_pfm(const Grid& grid) {
  std::string out = "Pf\n" + std::to_string(grid.width) + " " + std::to_string(grid.height) +
                    "\n-1.0\n";
  out.reserve(out.size() + grid.values.size() * 4);
  for (std::uint32_t row = 0; row < grid.height; ++row) {
    const std::uint32_t y = grid.height - 1 - row;
    for (std::uint32_t x = 0; x < grid.width; ++x) {
      const float f = float(grid.at(x, y));
      char b[4];
      std::memcpy(b, &f, 4);
      out.append(b, 4);
    }
  }
  return out;
}

// --------------------------------------------------------------------- PNG

constexpr unsigned char kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

std::uint32_t be32(const unsigned char* p) {
  return std::uint32_t(p[0]) << 24 | std::uint32_t(p[1]) << 16 | std::uint32_t(p[2]) << 8 | p[3];
}

void push_be32(std::string& s, std::uint32_t v) {
  s.push_back(char((v >> 24) & 0xff));
  s.push_back(char((v >> 16) & 0xff));
  s.push_back(char((v >> 8) & 0xff));
  s.push_back(char(v & 0xff));
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

DecodedImage decode_png(const std::string& buf, const std::string& path) {
  if (buf.size() < 8 || std::memcmp(buf.data(), kPngSignature, 8) != 0) {
    raise(ErrorCode::DecodeError, "bad PNG signature in " + path);
  }
  const auto* data = reinterpret_cast<const unsigned char*>(buf.data());
  std::size_t pos = 8;

  std::uint32_t width = 0, height = 0;
  int bit_depth = 0, color_type = -1;
  std::string idat;
  bool saw_ihdr = false, saw_iend = false;

  while (pos + 12 <= buf.size() && !saw_iend) {
    const std::uint32_t len = be32(data + pos);
    if (pos + 12 + std::size_t(len) > buf.size()) {
      raise(ErrorCode::DecodeError, "truncated PNG chunk in " + path);
    }
    const char* type = buf.data() + pos + 4;
    const unsigned char* payload = data + pos + 8;
    const std::uint32_t expect_crc = be32(data + pos + 8 + len);
    const auto actual_crc = std::uint32_t(
        crc32(crc32(0L, Z_NULL, 0), data + pos + 4, uInt(len + 4)));
    if (expect_crc != actual_crc) raise(ErrorCode::DecodeError, "PNG CRC mismatch in " + path);

    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) raise(ErrorCode::DecodeError, "bad IHDR in " + path);
      width = be32(payload);
      height = be32(payload + 4);
      bit_depth = payload[8];
      color_type = payload[9];
      if (payload[10] != 0 || payload[11] != 0) {
        raise(ErrorCode::DecodeError, "unsupported PNG compression/filter in " + path);
      }
      if (payload[12] != 0) raise(ErrorCode::DecodeError, "interlaced PNG unsupported: " + path);
      if (width < 1 || height < 1) raise(ErrorCode::DecodeError, "bad PNG dimensions in " + path);
      if ((bit_depth != 8 && bit_depth != 16) || (color_type != 0 && color_type != 2)) {
        raise(ErrorCode::DecodeError,
              "only 8/16-bit grayscale or RGB PNG supported: " + path);
      }
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.append(reinterpret_cast<const char*>(payload), len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_iend = true;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || !saw_iend || idat.empty()) {
    raise(ErrorCode::DecodeError, "incomplete PNG structure in " + path);
  }

  const int nch = color_type == 2 ? 3 : 1;
  const std::size_t bytes_per_sample = bit_depth / 8;
  const std::size_t row_bytes = std::size_t(width) * nch * bytes_per_sample;
  const std::size_t raw_size = (row_bytes + 1) * height;

  std::vector<unsigned char> raw(raw_size);
  {
    uLongf dest_len = raw_size;
    const int rc = uncompress(raw.data(), &dest_len,
                              reinterpret_cast<const Bytef*>(idat.data()), uLong(idat.size()));
    if (rc != Z_OK || dest_len != raw_size) {
      raise(ErrorCode::DecodeError, "PNG inflate failed in " + path);
    }
  }

  // undo per-row filters in place
  const std::size_t bpp = nch * bytes_per_sample;
  std::vector<unsigned char> prev(row_bytes, 0);
  for (std::uint32_t y = 0; y < height; ++y) {
    unsigned char* row = raw.data() + std::size_t(y) * (row_bytes + 1);
    const int filter = row[0];
    unsigned char* cur = row + 1;
    switch (filter) {
      case 0:
        break;
      case 1:
        for (std::size_t i = bpp; i < row_bytes; ++i) cur[i] = (unsigned char)(cur[i] + cur[i - bpp]);
        break;
      case 2:
        for (std::size_t i = 0; i < row_bytes; ++i) cur[i] = (unsigned char)(cur[i] + prev[i]);
        break;
      case 3:
        for (std::size_t i = 0; i < row_bytes; ++i) {
          const int left = i >= bpp ? cur[i - bpp] : 0;
          cur[i] = (unsigned char)(cur[i] + (left + prev[i]) / 2);
        }
        break;
      case 4:
        for (std::size_t i = 0; i < row_bytes; ++i) {
          const int left = i >= bpp ? cur[i - bpp] : 0;
          const int upleft = i >= bpp ? prev[i - bpp] : 0;
          cur[i] = (unsigned char)(cur[i] + paeth(left, prev[i], upleft));
        }
        break;
      default:
        raise(ErrorCode::DecodeError, "bad PNG row filter in " + path);
    }
    std::memcpy(prev.data(), cur, row_bytes);
  }

  DecodedImage img;
  img.bit_depth = bit_depth;
  for (int c = 0; c < nch; ++c) img.channels.emplace_back(width, height);
  for (std::uint32_t y = 0; y < height; ++y) {
    const unsigned char* cur = raw.data() + std::size_t(y) * (row_bytes + 1) + 1;
    for (std::uint32_t x = 0; x < width; ++x) {
      for (int c = 0; c < nch; ++c) {
        const std::size_t s = (std::size_t(x) * nch + c) * bytes_per_sample;
        const std::uint32_t v = bytes_per_sample == 2
                                    ? (std::uint32_t(cur[s]) << 8 | cur[s + 1])
                                    : cur[s];
        img.channels[c].at(x, y) = double(v);
      }
    }
  }
  return img;
}

void append_chunk(std::string& out, const char type[4], const std::string& payload) {
  push_be32(out, std::uint32_t(payload.size()));
  const std::size_t start = out.size();
  out.append(type, 4);
  out += payload;
  const auto crc = std::uint32_t(crc32(
      crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(out.data() + start),
      uInt(out.size() - start)));
  push_be32(out, crc);
}

std::string encode_png(const DecodedImage& img) {
  const bool color = img.is_color();
  const int nch = color ? 3 : 1;
  const std::uint32_t maxval = img.bit_depth > 8 ? 65535 : 255;
  const std::size_t bytes_per_sample = img.bit_depth > 8 ? 2 : 1;
  const std::size_t row_bytes = std::size_t(img.width()) * nch * bytes_per_sample;

  std::string raw;
  raw.reserve((row_bytes + 1) * img.height());
  for (std::uint32_t y = 0; y < img.height(); ++y) {
    raw.push_back('\0');  // filter type 0
    for (std::uint32_t x = 0; x < img.width(); ++x) {
      for (int c = 0; c < nch; ++c) {
        const double v0 = img.channels[std::size_t(c) % img.channels.size()].at(x, y);
        const double clamped = std::min(std::max(v0, 0.0), double(maxval));
        const std::uint32_t v = std::uint32_t(std::lround(clamped));
        if (bytes_per_sample == 2) raw.push_back(char((v >> 8) & 0xff));
        raw.push_back(char(v & 0xff));
      }
    }
  }

  uLongf bound = compressBound(uLong(raw.size()));
  std::string compressed(bound, '\0');
  if (compress2(reinterpret_cast<Bytef*>(compressed.data()), &bound,
                reinterpret_cast<const Bytef*>(raw.data()), uLong(raw.size()),
                Z_BEST_SPEED) != Z_OK) {
    raise(ErrorCode::IoError, "PNG deflate failed");
  }
  compressed.resize(bound);

  std::string ihdr;
  push_be32(ihdr, img.width());
  push_be32(ihdr, img.height());
  ihdr.push_back(char(img.bit_depth));
  ihdr.push_back(color ? 2 : 0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);

  std::string out(reinterpret_cast<const char*>(kPngSignature), 8);
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", compressed);
  append_chunk(out, "IEND", "");
  return out;
}

}  // namespace

DecodedImage decode_image(const std::string& path) {
  const std::string buf = read_file(path);
  if (buf.size() >= 8 && std::memcmp(buf.data(), kPngSignature, 8) == 0) {
    return decode_png(buf, path);
  }
  if (buf.size() >= 2 && buf[0] == 'P' && buf[1] == 'f') {
    return decode_pfm(buf, path);
  }
  if (buf.size() >= 2 && buf[0] == 'P' && buf[1] >= '2' && buf[1] <= '6' && buf[1] != '4') {
    return decode_pnm(buf, path);
  }
  raise(ErrorCode::DecodeError, "unrecognized image format: " + path);
}

void encode_image(const DecodedImage& image, const std::string& path) {
  if (image.channels.empty() || image.width() == 0) {
    raise(ErrorCode::InvalidValue, "cannot encode an empty image");
  }
  for (const Grid& g : image.channels) {
    if (g.width != image.width() || g.height != image.height()) {
      raise(ErrorCode::ShapeMismatch, "channel dimensions differ");
    }
  }
  if (has_suffix(path, ".png")) {
    write_file(path, encode_png(image));
  } else if (has_suffix(path, ".pgm")) {
    if (image.is_color()) raise(ErrorCode::InvalidValue, "PGM cannot hold color images");
    write_file(path, encode_pnm(image, false));
  } else if (has_suffix(path, ".ppm")) {
    write_file(path, encode_pnm(image, true));
  } else if (has_suffix(path, ".pfm")) {
    if (image.is_color()) raise(ErrorCode::InvalidValue, "PFM writer is grayscale only");
    write_file(path, encode_pfm(image.channels[0]));
  } else {
    raise(ErrorCode::InvalidValue, "unsupported output extension for " + path);
  }
}

void write_gray(const Grid& grid, int bit_depth, const std::string& path) {
  DecodedImage img;
  img.bit_depth = bit_depth;
  img.channels.push_back(grid);
  encode_image(img, path);
}

Grid to_luminance(const DecodedImage& image) {
  if (image.channels.empty()) raise(ErrorCode::InvalidValue, "empty image");
  if (!image.is_color()) return image.channels[0];
  Grid out(image.width(), image.height());
  const std::size_t n = out.values.size();
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] =
        (image.channels[0].values[i] + image.channels[1].values[i] + image.channels[2].values[i]) /
        3.0;
  }
  return out;
}

}  // namespace enhance::pipeline
