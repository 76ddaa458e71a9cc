#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "colorcnn/core/rng.hpp"
#include "colorcnn/img/image.hpp"
#include "colorcnn/nn/tensor.hpp"

namespace colorcnn::data {

struct DatasetDescriptor {
  std::string name;
  int num_classes;
  int64_t train_count;
  int64_t test_count;
  int resolution;
};

// known datasets: cifar10, cifar100, stl10, tiny200
const DatasetDescriptor& descriptor(const std::string& name);

struct ChannelStats {
  float mean[3] = {0, 0, 0};
  float stddev[3] = {0, 0, 0};
};

struct SourceFile {
  std::string path;
  uint32_t crc32 = 0;
  uint64_t bytes = 0;
};

// images held as 8-bit planar RGB (channel, row, column per image) and
// converted to floats in [0,1] at batch-assembly time
struct Dataset {
  std::string name;
  int num_classes = 0;
  int h = 0, w = 0;
  std::vector<uint8_t> pixels;
  std::vector<int> labels;
  std::vector<SourceFile> sources;

  int64_t count() const { return int64_t(labels.size()); }
  size_t image_bytes() const { return size_t(3) * h * w; }
  const uint8_t* image_ptr(int64_t i) const { return pixels.data() + size_t(i) * image_bytes(); }
  img::RgbImage image(int64_t i) const;
  void append(const img::RgbImage& im, int label);
};

// reads the dataset's published archive layout from <root>; counts and
// resolution must match the descriptor exactly. tiny200's "test" split is the
// labeled validation set.
Dataset load_dataset(const std::string& name, const std::string& split,
                     const std::string& root);
// same readers driven by an explicit descriptor, for reduced-size mirrors of
// the published layouts
Dataset load_dataset(const DatasetDescriptor& d, const std::string& split,
                     const std::string& root);

// class-balanced deterministic subset; throws if any class has fewer than
// per_class members
Dataset subset(const Dataset& ds, int per_class, uint64_t seed);

// single-pass per-channel mean/stddev over every pixel (Welford)
ChannelStats channel_stats(const Dataset& ds);
// two-pass reference used to cross-check the streaming version
ChannelStats channel_stats_two_pass(const Dataset& ds);

void write_ingest_manifest(const Dataset& ds, const std::string& path);

// batch assembly -----------------------------------------------------------

void fill_batch(const Dataset& ds, const int64_t* indices, int n,
                nn::Tensor<float>& x, std::vector<int>* y);

// zero-pad by 4 + random crop back to size, then coin-flip horizontal mirror
void augment_batch(nn::Tensor<float>& x, Rng& rng);

// (v - mean) / (stddev * scale) per channel
void normalize_batch(nn::Tensor<float>& x, const ChannelStats& st, float scale);

}  // namespace colorcnn::data
