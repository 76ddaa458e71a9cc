#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "colorcnn/img/image.hpp"

namespace colorcnn::img {

// Indexed-color PNG encoder. Bit depth is the smallest of {1,2,4,8} that
// holds the palette; palette entries are rounded to 8 bits per channel.
// Compression settings are fixed (zlib level 9, filter None) so byte
// streams are deterministic and rates comparable across methods.
// Palettes larger than 256 entries are unsupported and throw.
std::vector<uint8_t> encode_indexed_png(const IndexMap& index_map,
                                        const Palette& palette);

// Truecolor (8-bit RGB) writer, used for figure output.
std::vector<uint8_t> encode_rgb_png(const RgbImage& image);

struct DecodedPng {
  RgbImage image;
  // set when the file was palette-mode; empty otherwise
  Palette palette;
  IndexMap index_map;
  bool indexed = false;
};

// Decodes non-interlaced PNGs of color type 0/2/3/4/6, bit depth 1/2/4/8/16
// (16-bit samples are reduced to their high byte). Alpha is dropped.
DecodedPng decode_png(const std::vector<uint8_t>& bytes);

bool looks_like_png(const std::vector<uint8_t>& bytes);

// binary PPM (P6), 8-bit
std::vector<uint8_t> encode_ppm(const RgbImage& image);
RgbImage decode_ppm(const std::vector<uint8_t>& bytes);

// reads a PNG or P6 PPM file from disk
RgbImage load_image(const std::string& path);
void save_bytes(const std::string& path, const std::vector<uint8_t>& bytes);
std::vector<uint8_t> read_file(const std::string& path);

}  // namespace colorcnn::img
