#include "colorcnn/img/png_codec.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include "colorcnn/core/check.hpp"

namespace colorcnn::img {

namespace {

const uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v >> 24));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v));
}

uint32_t get_u32(const uint8_t* p) {
  return uint32_t(p[0]) << 24 | uint32_t(p[1]) << 16 | uint32_t(p[2]) << 8 |
         uint32_t(p[3]);
}

void append_chunk(std::vector<uint8_t>& out, const char type[4],
                  const std::vector<uint8_t>& data) {
  put_u32(out, uint32_t(data.size()));
  size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  uint32_t crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, out.data() + start, uInt(out.size() - start));
  put_u32(out, crc);
}

std::vector<uint8_t> deflate_fixed(const std::vector<uint8_t>& raw) {
  uLongf bound = compressBound(uLong(raw.size()));
  std::vector<uint8_t> out(bound);
  // level 9, default strategy: fixed settings keep rates comparable
  int rc = compress2(out.data(), &bound, raw.data(), uLong(raw.size()), 9);
  COLORCNN_CHECK(rc == Z_OK, "deflate failed rc=" << rc);
  out.resize(bound);
  return out;
}

std::vector<uint8_t> inflate_all(const uint8_t* data, size_t size,
                                 size_t expected) {
  std::vector<uint8_t> out(expected);
  z_stream zs{};
  COLORCNN_CHECK(inflateInit(&zs) == Z_OK, "inflateInit failed");
  zs.next_in = const_cast<uint8_t*>(data);
  zs.avail_in = uInt(size);
  zs.next_out = out.data();
  zs.avail_out = uInt(out.size());
  int rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  COLORCNN_CHECK(rc == Z_STREAM_END && zs.avail_out == 0,
                 "corrupt or truncated zlib stream in PNG (rc=" << rc << ")");
  return out;
}

int paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

struct ChunkView {
  char type[5];
  const uint8_t* data;
  uint32_t len;
};

}  // namespace

std::vector<uint8_t> encode_indexed_png(const IndexMap& index_map,
                                        const Palette& palette) {
  COLORCNN_CHECK(palette.size() >= 1, "palette must be non-empty");
  if (palette.size() > 256)
    throw std::runtime_error("unsupported palette: more than 256 entries");
  validate(index_map, palette.size());
  COLORCNN_CHECK(index_map.h >= 1 && index_map.w >= 1, "empty index map");

  int depth = 8;
  if (palette.size() <= 2) depth = 1;
  else if (palette.size() <= 4) depth = 2;
  else if (palette.size() <= 16) depth = 4;

  size_t row_bytes = (size_t(index_map.w) * depth + 7) / 8;
  std::vector<uint8_t> raw;
  raw.reserve((row_bytes + 1) * index_map.h);
  for (int y = 0; y < index_map.h; ++y) {
    raw.push_back(0);  // filter: None
    uint8_t cur = 0;
    int bits = 0;
    for (int x = 0; x < index_map.w; ++x) {
      cur = uint8_t(cur << depth | uint32_t(index_map.at(y, x)));
      bits += depth;
      if (bits == 8) {
        raw.push_back(cur);
        cur = 0;
        bits = 0;
      }
    }
    if (bits > 0) raw.push_back(uint8_t(cur << (8 - bits)));
  }

  std::vector<uint8_t> out(kPngSig, kPngSig + 8);
  std::vector<uint8_t> ihdr;
  put_u32(ihdr, uint32_t(index_map.w));
  put_u32(ihdr, uint32_t(index_map.h));
  ihdr.push_back(uint8_t(depth));
  ihdr.push_back(3);  // palette color type
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  append_chunk(out, "IHDR", ihdr);

  std::vector<uint8_t> plte;
  for (const auto& c : palette.colors) {
    plte.push_back(to_u8(c[0]));
    plte.push_back(to_u8(c[1]));
    plte.push_back(to_u8(c[2]));
  }
  append_chunk(out, "PLTE", plte);
  append_chunk(out, "IDAT", deflate_fixed(raw));
  append_chunk(out, "IEND", {});
  return out;
}

std::vector<uint8_t> encode_rgb_png(const RgbImage& image) {
  COLORCNN_CHECK(image.h >= 1 && image.w >= 1, "empty image");
  size_t row_bytes = size_t(image.w) * 3;
  std::vector<uint8_t> raw;
  raw.reserve((row_bytes + 1) * image.h);
  for (int y = 0; y < image.h; ++y) {
    raw.push_back(0);
    for (int x = 0; x < image.w; ++x) {
      const float* p = image.at(y, x);
      raw.push_back(to_u8(p[0]));
      raw.push_back(to_u8(p[1]));
      raw.push_back(to_u8(p[2]));
    }
  }
  std::vector<uint8_t> out(kPngSig, kPngSig + 8);
  std::vector<uint8_t> ihdr;
  put_u32(ihdr, uint32_t(image.w));
  put_u32(ihdr, uint32_t(image.h));
  ihdr.push_back(8);
  ihdr.push_back(2);  // truecolor
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", deflate_fixed(raw));
  append_chunk(out, "IEND", {});
  return out;
}

bool looks_like_png(const std::vector<uint8_t>& bytes) {
  return bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0;
}

DecodedPng decode_png(const std::vector<uint8_t>& bytes) {
  COLORCNN_CHECK(looks_like_png(bytes), "not a PNG stream");
  size_t pos = 8;
  std::vector<ChunkView> chunks;
  while (pos + 12 <= bytes.size()) {
    uint32_t len = get_u32(bytes.data() + pos);
    COLORCNN_CHECK(pos + 12 + len <= bytes.size(), "truncated PNG chunk");
    ChunkView cv{};
    std::memcpy(cv.type, bytes.data() + pos + 4, 4);
    cv.type[4] = 0;
    cv.data = bytes.data() + pos + 8;
    cv.len = len;
    chunks.push_back(cv);
    pos += 12 + len;
    if (std::strcmp(cv.type, "IEND") == 0) break;
  }
  COLORCNN_CHECK(!chunks.empty() && std::strcmp(chunks[0].type, "IHDR") == 0 &&
                     chunks[0].len == 13,
                 "missing IHDR");
  const uint8_t* ih = chunks[0].data;
  int w = int(get_u32(ih));
  int h = int(get_u32(ih + 4));
  int depth = ih[8];
  int ctype = ih[9];
  int interlace = ih[12];
  COLORCNN_CHECK(w >= 1 && h >= 1, "bad PNG dimensions");
  COLORCNN_CHECK(interlace == 0, "interlaced PNG unsupported");

  int channels;
  switch (ctype) {
    case 0: channels = 1; break;
    case 2: channels = 3; break;
    case 3: channels = 1; break;
    case 4: channels = 2; break;
    case 6: channels = 4; break;
    default: throw std::runtime_error("unsupported PNG color type");
  }
  bool depth_ok = (ctype == 0 && (depth == 1 || depth == 2 || depth == 4 || depth == 8 || depth == 16)) ||
                  (ctype == 3 && (depth == 1 || depth == 2 || depth == 4 || depth == 8)) ||
                  ((ctype == 2 || ctype == 4 || ctype == 6) && (depth == 8 || depth == 16));
  COLORCNN_CHECK(depth_ok, "unsupported PNG bit depth " << depth);

  std::vector<uint8_t> plte;
  std::vector<uint8_t> idat;
  for (const auto& c : chunks) {
    if (std::strcmp(c.type, "PLTE") == 0) plte.assign(c.data, c.data + c.len);
    if (std::strcmp(c.type, "IDAT") == 0) idat.insert(idat.end(), c.data, c.data + c.len);
  }
  COLORCNN_CHECK(!idat.empty(), "PNG has no IDAT data");
  if (ctype == 3)
    COLORCNN_CHECK(!plte.empty() && plte.size() % 3 == 0, "indexed PNG missing PLTE");

  size_t row_bits = size_t(w) * channels * depth;
  size_t row_bytes = (row_bits + 7) / 8;
  size_t raw_size = (row_bytes + 1) * size_t(h);
  std::vector<uint8_t> raw = inflate_all(idat.data(), idat.size(), raw_size);

  // unfilter in place; fbpp is the byte distance used by filters
  int fbpp = std::max(1, channels * depth / 8);
  std::vector<uint8_t> prev(row_bytes, 0);
  std::vector<uint8_t> scan(row_bytes);
  std::vector<uint8_t> pixels;
  pixels.reserve(row_bytes * h);
  for (int y = 0; y < h; ++y) {
    const uint8_t* src = raw.data() + size_t(y) * (row_bytes + 1);
    int filter = src[0];
    std::memcpy(scan.data(), src + 1, row_bytes);
    switch (filter) {
      case 0: break;
      case 1:
        for (size_t i = fbpp; i < row_bytes; ++i) scan[i] = uint8_t(scan[i] + scan[i - fbpp]);
        break;
      case 2:
        for (size_t i = 0; i < row_bytes; ++i) scan[i] = uint8_t(scan[i] + prev[i]);
        break;
      case 3:
        for (size_t i = 0; i < row_bytes; ++i) {
          int left = i >= size_t(fbpp) ? scan[i - fbpp] : 0;
          scan[i] = uint8_t(scan[i] + (left + prev[i]) / 2);
        }
        break;
      case 4:
        for (size_t i = 0; i < row_bytes; ++i) {
          int left = i >= size_t(fbpp) ? scan[i - fbpp] : 0;
          int ul = i >= size_t(fbpp) ? prev[i - fbpp] : 0;
          scan[i] = uint8_t(scan[i] + paeth(left, prev[i], ul));
        }
        break;
      default:
        throw std::runtime_error("bad PNG filter type");
    }
    pixels.insert(pixels.end(), scan.begin(), scan.end());
    prev = scan;
  }

  DecodedPng out;
  out.image = RgbImage(h, w);
  auto sample_bits = [&](const uint8_t* row, int x) -> int {
    // depth < 8 single-channel sample, MSB first
    int bit = x * depth;
    int byte = bit >> 3;
    int shift = 8 - depth - (bit & 7);
    return (row[byte] >> shift) & ((1 << depth) - 1);
  };

  if (ctype == 3) {
    out.indexed = true;
    out.index_map = IndexMap(h, w);
    int pal_n = int(plte.size() / 3);
    out.palette.colors.resize(pal_n);
    for (int i = 0; i < pal_n; ++i)
      out.palette.colors[i] = {from_u8(plte[i * 3]), from_u8(plte[i * 3 + 1]),
                               from_u8(plte[i * 3 + 2])};
    for (int y = 0; y < h; ++y) {
      const uint8_t* row = pixels.data() + size_t(y) * row_bytes;
      for (int x = 0; x < w; ++x) {
        int v = depth == 8 ? row[x] : sample_bits(row, x);
        COLORCNN_CHECK(v < pal_n, "palette index out of range in PNG");
        out.index_map.at(y, x) = v;
        const auto& c = out.palette.colors[v];
        float* p = out.image.at(y, x);
        p[0] = c[0];
        p[1] = c[1];
        p[2] = c[2];
      }
    }
    return out;
  }

  int step = channels * (depth == 16 ? 2 : 1);
  for (int y = 0; y < h; ++y) {
    const uint8_t* row = pixels.data() + size_t(y) * row_bytes;
    for (int x = 0; x < w; ++x) {
      float r, g, b;
      if (ctype == 0 && depth < 8) {
        int v = sample_bits(row, x);
        float g8 = float(v) / float((1 << depth) - 1);
        r = g = b = g8;
      } else {
        const uint8_t* s = row + size_t(x) * step;
        auto ch = [&](int i) { return depth == 16 ? s[i * 2] : s[i]; };
        if (ctype == 0 || ctype == 4) {
          r = g = b = from_u8(ch(0));
        } else {
          r = from_u8(ch(0));
          g = from_u8(ch(1));
          b = from_u8(ch(2));
        }
      }
      float* p = out.image.at(y, x);
      p[0] = r;
      p[1] = g;
      p[2] = b;
    }
  }
  return out;
}

std::vector<uint8_t> encode_ppm(const RgbImage& image) {
  std::string header = "P6\n" + std::to_string(image.w) + " " +
                       std::to_string(image.h) + "\n255\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  for (size_t i = 0; i < image.pixel_count() * 3; ++i)
    out.push_back(to_u8(image.px[i]));
  return out;
}

RgbImage decode_ppm(const std::vector<uint8_t>& bytes) {
  size_t pos = 0;
  auto token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(char(bytes[pos++]));
    return t;
  };
  COLORCNN_CHECK(token() == "P6", "not a P6 PPM");
  int w = std::stoi(token());
  int h = std::stoi(token());
  int maxval = std::stoi(token());
  COLORCNN_CHECK(w >= 1 && h >= 1 && maxval >= 1 && maxval <= 255, "bad PPM header");
  ++pos;  // single whitespace after maxval
  COLORCNN_CHECK(bytes.size() - pos >= size_t(w) * h * 3, "truncated PPM");
  RgbImage img(h, w);
  for (size_t i = 0; i < size_t(w) * h * 3; ++i)
    img.px[i] = float(bytes[pos + i]) / float(maxval);
  return img;
}

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  COLORCNN_CHECK(f.good(), "cannot open file: " << path);
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(f),
                              std::istreambuf_iterator<char>());
}

void save_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  COLORCNN_CHECK(f.good(), "cannot open file for writing: " << path);
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  COLORCNN_CHECK(f.good(), "write failed: " << path);
}

RgbImage load_image(const std::string& path) {
  auto bytes = read_file(path);
  if (looks_like_png(bytes)) return decode_png(bytes).image;
  return decode_ppm(bytes);
}

}  // namespace colorcnn::img
