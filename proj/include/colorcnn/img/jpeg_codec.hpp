#pragma once

#include <cstdint>
#include <vector>

#include "colorcnn/img/image.hpp"

namespace colorcnn::img {

// baseline JPEG via libjpeg; quality in [1,100]
std::vector<uint8_t> encode_jpeg(const RgbImage& im, int quality);
RgbImage decode_jpeg(const std::vector<uint8_t>& bytes);

}  // namespace colorcnn::img
