#pragma once

#include "colorcnn/img/image.hpp"

namespace colorcnn::classical {

// Heckbert-style median cut. The box holding the most pixels is split along
// its longest channel range at the median pixel; channel ties go to the lower
// channel index, pixels at the exact median value go to the upper half.
// Palette entries are the mean color of the pixels assigned to each box, so
// images with fewer distinct colors than num_colors yield a shorter palette.
img::QuantResult median_cut(const img::RgbImage& image, int num_colors);

// Octree quantization: colors are inserted into an 8-level octree at 8-bit
// precision, then reducible nodes are collapsed (deepest level first, fewest
// pixels next, insertion order last) until at most num_colors leaves remain.
// Palette entries are leaf mean colors.
img::QuantResult octree_quantize(const img::RgbImage& image, int num_colors);

// Floyd-Steinberg error diffusion against a fixed palette, raster scan.
// Residuals spread 7/16 right, 3/16 below-left, 5/16 below, 1/16 below-right;
// diffused values are clamped to [0,1]. Nearest color is unweighted RGB L2.
img::QuantResult floyd_steinberg_dither(const img::RgbImage& image,
                                        const img::Palette& palette);

}  // namespace colorcnn::classical
