#include "histotile/image_io.hpp"

#include <png.h>

#include <array>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "histotile/error.hpp"

namespace histotile {
namespace {

namespace fs = std::filesystem;

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool has_png_signature(std::span<const std::uint8_t> head) {
  static constexpr std::array<std::uint8_t, 8> sig = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  return head.size() >= sig.size() && std::equal(sig.begin(), sig.end(), head.begin());
}

bool has_tiff_signature(std::span<const std::uint8_t> head) {
  return head.size() >= 4 && ((head[0] == 'I' && head[1] == 'I' && head[2] == 42 && head[3] == 0) ||
                              (head[0] == 'M' && head[1] == 'M' && head[2] == 0 && head[3] == 42));
}

// ---- PNG ---------------------------------------------------------------

std::optional<ImageInfo> probe_png(const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) return std::nullopt;
  ImageInfo info{ImageCodec::png, static_cast<int>(image.width), static_cast<int>(image.height),
                 (image.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1};
  png_image_free(&image);
  return info;
}

Raster read_png(const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error("cannot decode PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, data.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error("cannot decode PNG " + path.string() + ": " + image.message);
  }
  return Raster(static_cast<int>(image.width), static_cast<int>(image.height), 3, std::move(data));
}

// ---- TIFF (baseline, uncompressed, 8-bit chunky) -------------------------

class TiffReader {
 public:
  explicit TiffReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {
    if (!has_tiff_signature(bytes_)) fail("not a TIFF file");
    little_ = bytes_[0] == 'I';
    parse_ifd(u32(4));
  }

  ImageInfo info() const {
    return {ImageCodec::tiff, width_, height_, photometric_ == 2 ? 3 : 1};
  }

  Raster decode() const {
    const std::size_t row_bytes = static_cast<std::size_t>(width_) * samples_;
    std::vector<std::uint8_t> raw;
    raw.reserve(row_bytes * static_cast<std::size_t>(height_));
    for (std::size_t s = 0; s < strip_offsets_.size(); ++s) {
      const std::size_t off = strip_offsets_[s];
      const std::size_t len = strip_counts_[s];
      if (off + len > bytes_.size()) fail("strip outside the file");
      raw.insert(raw.end(), bytes_.begin() + static_cast<std::ptrdiff_t>(off),
                 bytes_.begin() + static_cast<std::ptrdiff_t>(off + len));
    }
    if (raw.size() < row_bytes * static_cast<std::size_t>(height_)) fail("truncated pixel data");

    Raster out(width_, height_, 3);
    auto dst = out.data();
    for (std::size_t i = 0; i < out.pixel_count(); ++i) {
      const std::uint8_t* px = &raw[i * samples_];
      for (int c = 0; c < 3; ++c) {
        std::uint8_t v = photometric_ == 2 ? px[c] : px[0];
        if (photometric_ == 0) v = static_cast<std::uint8_t>(255 - v);
        dst[i * 3 + static_cast<std::size_t>(c)] = v;
      }
    }
    return out;
  }

 private:
  [[noreturn]] static void fail(const std::string& what) { throw Error("TIFF: " + what); }

  std::uint32_t u16(std::size_t off) const {
    if (off + 2 > bytes_.size()) fail("unexpected end of file");
    return little_ ? bytes_[off] | (bytes_[off + 1] << 8) : (bytes_[off] << 8) | bytes_[off + 1];
  }
  std::uint32_t u32(std::size_t off) const {
    if (off + 4 > bytes_.size()) fail("unexpected end of file");
    return little_ ? u16(off) | (u16(off + 2) << 16) : (u16(off) << 16) | u16(off + 2);
  }

  std::vector<std::uint32_t> values(std::size_t entry) const {
    const std::uint32_t type = u16(entry + 2);
    const std::uint32_t count = u32(entry + 4);
    const std::size_t size = type == 3 ? 2 : type == 4 ? 4 : type == 1 ? 1 : 0;
    if (size == 0) fail("unsupported tag type " + std::to_string(type));
    std::size_t off = entry + 8;
    if (size * count > 4) off = u32(entry + 8);
    std::vector<std::uint32_t> out(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::size_t p = off + i * size;
      out[i] = size == 2 ? u16(p) : size == 4 ? u32(p) : bytes_.at(p);
    }
    return out;
  }

  void parse_ifd(std::size_t ifd) {
    const std::uint32_t n = u16(ifd);
    std::uint32_t compression = 1;
    std::uint32_t planar = 1;
    std::vector<std::uint32_t> bits = {8};
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::size_t entry = ifd + 2 + 12 * i;
      const std::uint32_t tag = u16(entry);
      switch (tag) {
        case 256: width_ = static_cast<int>(values(entry).at(0)); break;
        case 257: height_ = static_cast<int>(values(entry).at(0)); break;
        case 258: bits = values(entry); break;
        case 259: compression = values(entry).at(0); break;
        case 262: photometric_ = values(entry).at(0); break;
        case 273: strip_offsets_ = values(entry); break;
        case 277: samples_ = values(entry).at(0); break;
        case 279: strip_counts_ = values(entry); break;
        case 284: planar = values(entry).at(0); break;
        default: break;
      }
    }
    if (compression != 1) fail("only uncompressed images are supported");
    if (planar != 1) fail("only chunky (interleaved) samples are supported");
    for (std::uint32_t b : bits) {
      if (b != 8) fail("only 8-bit samples are supported");
    }
    if (photometric_ > 2) fail("unsupported photometric interpretation");
    if (photometric_ == 2 && samples_ < 3) fail("RGB image with fewer than 3 samples");
    if (width_ <= 0 || height_ <= 0 || samples_ == 0) fail("missing dimensions");
    if (strip_offsets_.empty() || strip_offsets_.size() != strip_counts_.size()) {
      fail("missing strip layout");
    }
  }

  std::vector<std::uint8_t> bytes_;
  bool little_ = true;
  int width_ = 0;
  int height_ = 0;
  std::uint32_t samples_ = 1;
  std::uint32_t photometric_ = 1;
  std::vector<std::uint32_t> strip_offsets_;
  std::vector<std::uint32_t> strip_counts_;
};

void put16(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}
void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  put16(out, v & 0xffff);
  put16(out, v >> 16);
}

}  // namespace

std::optional<ImageInfo> probe_image(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::array<std::uint8_t, 8> head{};
  in.read(reinterpret_cast<char*>(head.data()), head.size());
  if (has_png_signature(head)) return probe_png(path);
  if (has_tiff_signature(head)) {
    try {
      return TiffReader(read_bytes(path)).info();
    } catch (const Error&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

Raster read_image(const fs::path& path) {
  std::vector<std::uint8_t> bytes = read_bytes(path);
  if (has_png_signature(bytes)) return read_png(path);
  if (has_tiff_signature(bytes)) return TiffReader(std::move(bytes)).decode();
  throw Error("unsupported image format: " + path.string());
}

void write_png(const fs::path& path, const Raster& image) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width());
  png.height = static_cast<png_uint_32>(image.height());
  png.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.c_str(), 0, image.data().data(), 0, nullptr)) {
    throw Error("cannot write PNG " + path.string() + ": " + png.message);
  }
}

void write_tiff(const fs::path& path, const Raster& image) {
  const std::uint32_t spp = static_cast<std::uint32_t>(image.channels());
  const std::uint32_t data_len = static_cast<std::uint32_t>(image.data().size());
  const std::uint32_t bits_off = 8 + data_len;  // 3 x SHORT BitsPerSample for RGB
  const std::uint32_t ifd_off = bits_off + 6 + ((bits_off + 6) & 1);

  std::vector<std::uint8_t> out;
  out.reserve(ifd_off + 2 + 10 * 12 + 4);
  out.insert(out.end(), {'I', 'I', 42, 0});
  put32(out, ifd_off);
  out.insert(out.end(), image.data().begin(), image.data().end());
  for (int i = 0; i < 3; ++i) put16(out, 8);
  while (out.size() < ifd_off) out.push_back(0);

  auto entry = [&](std::uint32_t tag, std::uint32_t type, std::uint32_t count, std::uint32_t value) {
    put16(out, tag);
    put16(out, type);
    put32(out, count);
    if (type == 3 && count == 1) {
      put16(out, value);
      put16(out, 0);
    } else {
      put32(out, value);
    }
  };
  put16(out, 10);
  entry(256, 4, 1, static_cast<std::uint32_t>(image.width()));
  entry(257, 4, 1, static_cast<std::uint32_t>(image.height()));
  if (spp == 3) {
    entry(258, 3, 3, bits_off);
  } else {
    entry(258, 3, 1, 8);
  }
  entry(259, 3, 1, 1);
  entry(262, 3, 1, spp == 3 ? 2 : 1);
  entry(273, 4, 1, 8);
  entry(277, 3, 1, spp);
  entry(278, 4, 1, static_cast<std::uint32_t>(image.height()));
  entry(279, 4, 1, data_len);
  entry(284, 3, 1, 1);
  put32(out, 0);

  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error("cannot write TIFF " + path.string());
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

}  // namespace histotile
