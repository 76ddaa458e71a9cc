#include <algorithm>
#include <numeric>
#include <vector>

#include "colorcnn/classical/classical.hpp"
#include "colorcnn/core/check.hpp"

namespace colorcnn::classical {

namespace {

struct Box {
  std::vector<int32_t> members;  // pixel indices into the image
  float range[3];
  bool splittable = true;

  void update_ranges(const img::RgbImage& image) {
    float lo[3] = {1.0f, 1.0f, 1.0f};
    float hi[3] = {0.0f, 0.0f, 0.0f};
    for (int32_t p : members) {
      const float* px = image.px.data() + size_t(p) * 3;
      for (int c = 0; c < 3; ++c) {
        lo[c] = std::min(lo[c], px[c]);
        hi[c] = std::max(hi[c], px[c]);
      }
    }
    for (int c = 0; c < 3; ++c) range[c] = hi[c] - lo[c];
    splittable = range[0] > 0.0f || range[1] > 0.0f || range[2] > 0.0f;
  }
};

}  // namespace

img::QuantResult median_cut(const img::RgbImage& image, int num_colors) {
  COLORCNN_CHECK(num_colors >= 1, "num_colors must be >= 1");
  COLORCNN_CHECK(image.h >= 1 && image.w >= 1, "image must be non-empty");

  std::vector<Box> boxes(1);
  boxes[0].members.resize(image.pixel_count());
  std::iota(boxes[0].members.begin(), boxes[0].members.end(), 0);
  boxes[0].update_ranges(image);

  while (int(boxes.size()) < num_colors) {
    // largest pixel count among splittable boxes; ties keep the earliest box
    int pick = -1;
    for (int i = 0; i < int(boxes.size()); ++i) {
      if (!boxes[i].splittable) continue;
      if (pick < 0 || boxes[i].members.size() > boxes[pick].members.size()) pick = i;
    }
    if (pick < 0) break;

    Box& box = boxes[pick];
    int axis = 0;
    for (int c = 1; c < 3; ++c)
      if (box.range[c] > box.range[axis]) axis = c;  // tie keeps lower channel

    std::stable_sort(box.members.begin(), box.members.end(),
                     [&](int32_t a, int32_t b) {
                       return image.px[size_t(a) * 3 + axis] < image.px[size_t(b) * 3 + axis];
                     });
    size_t mid = box.members.size() / 2;
    float median_val = image.px[size_t(box.members[mid]) * 3 + axis];
    // pixels with the exact median value go to the upper half
    size_t split = std::lower_bound(box.members.begin(), box.members.end(), median_val,
                                    [&](int32_t a, float v) {
                                      return image.px[size_t(a) * 3 + axis] < v;
                                    }) -
                   box.members.begin();
    if (split == 0) {
      // median equals the box minimum; cut after the min-valued run instead
      float min_val = median_val;
      split = std::upper_bound(box.members.begin(), box.members.end(), min_val,
                               [&](float v, int32_t a) {
                                 return v < image.px[size_t(a) * 3 + axis];
                               }) -
              box.members.begin();
    }

    Box upper;
    upper.members.assign(box.members.begin() + long(split), box.members.end());
    box.members.resize(split);
    box.update_ranges(image);
    upper.update_ranges(image);
    boxes.push_back(std::move(upper));
  }

  img::Palette palette;
  img::IndexMap index_map(image.h, image.w);
  palette.colors.reserve(boxes.size());
  for (int b = 0; b < int(boxes.size()); ++b) {
    double sum[3] = {0, 0, 0};
    for (int32_t p : boxes[b].members) {
      const float* px = image.px.data() + size_t(p) * 3;
      sum[0] += px[0];
      sum[1] += px[1];
      sum[2] += px[2];
    }
    double n = double(boxes[b].members.size());
    palette.colors.push_back({float(sum[0] / n), float(sum[1] / n), float(sum[2] / n)});
    for (int32_t p : boxes[b].members) index_map.idx[p] = b;
  }
  return img::finalize_quant_result(index_map, palette);
}

}  // namespace colorcnn::classical
