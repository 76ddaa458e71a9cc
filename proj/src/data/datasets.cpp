#include "colorcnn/data/datasets.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <zlib.h>

#include "colorcnn/core/check.hpp"
#include "colorcnn/img/jpeg_codec.hpp"
#include "colorcnn/img/png_codec.hpp"

namespace fs = std::filesystem;

namespace colorcnn::data {

namespace {

const DatasetDescriptor kDescriptors[] = {
    {"cifar10", 10, 50000, 10000, 32},
    {"cifar100", 100, 50000, 10000, 32},
    {"stl10", 10, 5000, 8000, 96},
    {"tiny200", 200, 100000, 10000, 64},
};

std::vector<uint8_t> read_checked(const std::string& path, Dataset& ds) {
  COLORCNN_CHECK(fs::exists(path), "dataset file missing: " << path);
  auto bytes = img::read_file(path);
  uint32_t crc = uint32_t(crc32(0L, bytes.data(), uInt(bytes.size())));
  ds.sources.push_back({path, crc, bytes.size()});
  return bytes;
}

void append_planar(Dataset& ds, const uint8_t* chw, int label) {
  ds.pixels.insert(ds.pixels.end(), chw, chw + ds.image_bytes());
  ds.labels.push_back(label);
}

void load_cifar_file(Dataset& ds, const std::string& path, int label_bytes,
                     int label_offset) {
  auto bytes = read_checked(path, ds);
  const size_t rec = size_t(label_bytes) + ds.image_bytes();
  COLORCNN_CHECK(bytes.size() % rec == 0, "truncated archive: " << path);
  for (size_t off = 0; off < bytes.size(); off += rec)
    append_planar(ds, bytes.data() + off + label_bytes, bytes[off + label_offset]);
}

void load_cifar10(Dataset& ds, const std::string& root, const std::string& split) {
  const std::string dir = root + "/cifar-10-batches-bin";
  if (split == "train") {
    for (int i = 1; i <= 5; ++i)
      load_cifar_file(ds, dir + "/data_batch_" + std::to_string(i) + ".bin", 1, 0);
  } else {
    load_cifar_file(ds, dir + "/test_batch.bin", 1, 0);
  }
}

void load_cifar100(Dataset& ds, const std::string& root, const std::string& split) {
  const std::string dir = root + "/cifar-100-binary";
  // per record: coarse label, fine label, pixels; we classify fine labels
  load_cifar_file(ds, dir + (split == "train" ? "/train.bin" : "/test.bin"), 2, 1);
}

void load_stl10(Dataset& ds, const std::string& root, const std::string& split) {
  const std::string dir = root + "/stl10_binary";
  const std::string stem = split == "train" ? "train" : "test";
  auto xs = read_checked(dir + "/" + stem + "_X.bin", ds);
  auto ys = read_checked(dir + "/" + stem + "_y.bin", ds);
  const int res = ds.h;
  const size_t rec = ds.image_bytes();
  COLORCNN_CHECK(xs.size() == ys.size() * rec, "image/label size mismatch in " << dir);
  std::vector<uint8_t> chw(rec);
  for (size_t i = 0; i < ys.size(); ++i) {
    const uint8_t* src = xs.data() + i * rec;
    // planes are stored column-major; transpose to row-major
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x)
          chw[(size_t(c) * res + y) * res + x] = src[(size_t(c) * res + x) * res + y];
    int label = int(ys[i]);
    COLORCNN_CHECK(label >= 1 && label <= ds.num_classes,
                   "label " << label << " outside 1.." << ds.num_classes);
    append_planar(ds, chw.data(), label - 1);
  }
}

void append_jpeg(Dataset& ds, const std::string& path, int label) {
  auto bytes = img::read_file(path);
  img::RgbImage im = img::decode_jpeg(bytes);
  COLORCNN_CHECK(im.h == ds.h && im.w == ds.w,
                 "unexpected image size " << im.h << "x" << im.w << " in " << path);
  ds.append(im, label);
}

void load_tiny200(Dataset& ds, const std::string& root, const std::string& split) {
  const std::string dir = root + "/tiny-imagenet-200";
  auto wnid_bytes = read_checked(dir + "/wnids.txt", ds);
  std::map<std::string, int> wnid_to_label;
  {
    std::istringstream in(std::string(wnid_bytes.begin(), wnid_bytes.end()));
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
      if (!line.empty()) wnid_to_label.emplace(line, int(wnid_to_label.size()));
    }
  }
  COLORCNN_CHECK(int(wnid_to_label.size()) == ds.num_classes,
                 "expected " << ds.num_classes << " class ids, got "
                             << wnid_to_label.size());
  if (split == "train") {
    for (const auto& [wnid, label] : wnid_to_label) {
      const std::string img_dir = dir + "/train/" + wnid + "/images";
      COLORCNN_CHECK(fs::is_directory(img_dir), "missing class directory " << img_dir);
      std::vector<std::string> files;
      for (const auto& e : fs::directory_iterator(img_dir))
        files.push_back(e.path().string());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) append_jpeg(ds, f, label);
    }
  } else {
    // the labeled validation split stands in for the unlabeled test set
    auto ann = read_checked(dir + "/val/val_annotations.txt", ds);
    std::istringstream in(std::string(ann.begin(), ann.end()));
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string file, wnid;
      if (!(ls >> file >> wnid)) continue;
      auto it = wnid_to_label.find(wnid);
      COLORCNN_CHECK(it != wnid_to_label.end(), "unknown class id " << wnid);
      append_jpeg(ds, dir + "/val/images/" + file, it->second);
    }
  }
}

}  // namespace

const DatasetDescriptor& descriptor(const std::string& name) {
  for (const auto& d : kDescriptors)
    if (d.name == name) return d;
  throw std::runtime_error("unknown dataset: " + name);
}

img::RgbImage Dataset::image(int64_t i) const {
  img::RgbImage im(h, w);
  const uint8_t* src = image_ptr(i);
  const size_t plane = size_t(h) * w;
  for (size_t j = 0; j < plane; ++j)
    for (int c = 0; c < 3; ++c) im.px[j * 3 + c] = img::from_u8(src[size_t(c) * plane + j]);
  return im;
}

void Dataset::append(const img::RgbImage& im, int label) {
  if (count() == 0 && h == 0) {
    h = im.h;
    w = im.w;
  }
  COLORCNN_CHECK(im.h == h && im.w == w, "image size mismatch on append");
  const size_t plane = size_t(h) * w;
  size_t base = pixels.size();
  pixels.resize(base + image_bytes());
  for (size_t j = 0; j < plane; ++j)
    for (int c = 0; c < 3; ++c)
      pixels[base + size_t(c) * plane + j] = img::to_u8(im.px[j * 3 + c]);
  labels.push_back(label);
}

Dataset load_dataset(const DatasetDescriptor& d, const std::string& split,
                     const std::string& root) {
  COLORCNN_CHECK(split == "train" || split == "test",
                 "split must be train or test, got " << split);
  Dataset ds;
  ds.name = d.name;
  ds.num_classes = d.num_classes;
  ds.h = ds.w = d.resolution;
  if (d.name == "cifar10")
    load_cifar10(ds, root, split);
  else if (d.name == "cifar100")
    load_cifar100(ds, root, split);
  else if (d.name == "stl10")
    load_stl10(ds, root, split);
  else if (d.name == "tiny200")
    load_tiny200(ds, root, split);
  else
    throw std::runtime_error("no reader for dataset layout: " + d.name);
  const int64_t expect = split == "train" ? d.train_count : d.test_count;
  COLORCNN_CHECK(ds.count() == expect, d.name << " " << split << " has " << ds.count()
                                              << " images, expected " << expect);
  for (int v : ds.labels)
    COLORCNN_CHECK(v >= 0 && v < d.num_classes, "label " << v << " out of range");
  return ds;
}

Dataset load_dataset(const std::string& name, const std::string& split,
                     const std::string& root) {
  return load_dataset(descriptor(name), split, root);
}

Dataset subset(const Dataset& ds, int per_class, uint64_t seed) {
  COLORCNN_CHECK(per_class > 0, "per-class count must be positive");
  std::vector<std::vector<int64_t>> by_class(size_t(ds.num_classes));
  for (int64_t i = 0; i < ds.count(); ++i) by_class[size_t(ds.labels[size_t(i)])].push_back(i);
  Rng rng(seed);
  std::vector<int64_t> keep;
  for (int c = 0; c < ds.num_classes; ++c) {
    auto& pool = by_class[size_t(c)];
    COLORCNN_CHECK(int64_t(pool.size()) >= per_class,
                   "class " << c << " has only " << pool.size() << " images, need "
                            << per_class);
    Rng cls = rng.fork(uint64_t(c));
    cls.shuffle(pool.begin(), pool.end());
    keep.insert(keep.end(), pool.begin(), pool.begin() + per_class);
  }
  std::sort(keep.begin(), keep.end());
  Dataset out;
  out.name = ds.name;
  out.num_classes = ds.num_classes;
  out.h = ds.h;
  out.w = ds.w;
  out.sources = ds.sources;
  out.pixels.reserve(keep.size() * ds.image_bytes());
  for (int64_t i : keep) {
    const uint8_t* p = ds.image_ptr(i);
    out.pixels.insert(out.pixels.end(), p, p + ds.image_bytes());
    out.labels.push_back(ds.labels[size_t(i)]);
  }
  return out;
}

ChannelStats channel_stats(const Dataset& ds) {
  COLORCNN_CHECK(ds.count() > 0, "channel_stats needs a non-empty dataset");
  double mean[3] = {0, 0, 0}, m2[3] = {0, 0, 0};
  const size_t plane = size_t(ds.h) * ds.w;
  for (int64_t i = 0; i < ds.count(); ++i) {
    const uint8_t* p = ds.image_ptr(i);
    for (int c = 0; c < 3; ++c) {
      for (size_t j = 0; j < plane; ++j) {
        double v = double(p[size_t(c) * plane + j]) / 255.0;
        double cnt = double((i * int64_t(plane)) + int64_t(j) + 1);
        double delta = v - mean[c];
        mean[c] += delta / cnt;
        m2[c] += delta * (v - mean[c]);
      }
    }
  }
  ChannelStats st;
  double total = double(ds.count()) * double(plane);
  for (int c = 0; c < 3; ++c) {
    st.mean[c] = float(mean[c]);
    st.stddev[c] = float(std::sqrt(m2[c] / total));
  }
  return st;
}

ChannelStats channel_stats_two_pass(const Dataset& ds) {
  COLORCNN_CHECK(ds.count() > 0, "channel_stats needs a non-empty dataset");
  const size_t plane = size_t(ds.h) * ds.w;
  double sum[3] = {0, 0, 0};
  for (int64_t i = 0; i < ds.count(); ++i) {
    const uint8_t* p = ds.image_ptr(i);
    for (int c = 0; c < 3; ++c)
      for (size_t j = 0; j < plane; ++j) sum[c] += double(p[size_t(c) * plane + j]) / 255.0;
  }
  double total = double(ds.count()) * double(plane);
  ChannelStats st;
  for (int c = 0; c < 3; ++c) st.mean[c] = float(sum[c] / total);
  double sq[3] = {0, 0, 0};
  for (int64_t i = 0; i < ds.count(); ++i) {
    const uint8_t* p = ds.image_ptr(i);
    for (int c = 0; c < 3; ++c)
      for (size_t j = 0; j < plane; ++j) {
        double d = double(p[size_t(c) * plane + j]) / 255.0 - double(st.mean[c]);
        sq[c] += d * d;
      }
  }
  for (int c = 0; c < 3; ++c) st.stddev[c] = float(std::sqrt(sq[c] / total));
  return st;
}

void write_ingest_manifest(const Dataset& ds, const std::string& path) {
  std::ofstream f(path);
  COLORCNN_CHECK(f.good(), "cannot write manifest: " << path);
  f << "# dataset " << ds.name << ", " << ds.count() << " images\n";
  for (const auto& s : ds.sources) {
    char crc[16];
    std::snprintf(crc, sizeof crc, "%08x", s.crc32);
    f << crc << "  " << s.bytes << "  " << s.path << "\n";
  }
}

void fill_batch(const Dataset& ds, const int64_t* indices, int n,
                nn::Tensor<float>& x, std::vector<int>* y) {
  if (x.rank() != 4 || x.dim(0) != n || x.dim(2) != ds.h || x.dim(3) != ds.w)
    x = nn::Tensor<float>({n, 3, ds.h, ds.w});
  const size_t ib = ds.image_bytes();
  for (int i = 0; i < n; ++i) {
    const uint8_t* src = ds.image_ptr(indices[i]);
    float* dst = x.ptr() + size_t(i) * ib;
    for (size_t j = 0; j < ib; ++j) dst[j] = float(src[j]) / 255.0f;
  }
  if (y) {
    y->resize(size_t(n));
    for (int i = 0; i < n; ++i) (*y)[size_t(i)] = ds.labels[size_t(indices[i])];
  }
}

void augment_batch(nn::Tensor<float>& x, Rng& rng) {
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const size_t plane = size_t(h) * w;
  std::vector<float> tmp(plane);
  constexpr int kPad = 4;
  for (int i = 0; i < n; ++i) {
    int dy = int(rng.uniform_index(2 * kPad + 1)) - kPad;
    int dx = int(rng.uniform_index(2 * kPad + 1)) - kPad;
    bool flip = rng.bernoulli(0.5);
    for (int c = 0; c < 3; ++c) {
      float* p = x.ptr() + (size_t(i) * 3 + c) * plane;
      std::copy(p, p + plane, tmp.begin());
      for (int yy = 0; yy < h; ++yy) {
        int sy = yy + dy;
        for (int xx = 0; xx < w; ++xx) {
          int sx = (flip ? w - 1 - xx : xx) + dx;
          p[size_t(yy) * w + xx] =
              (sy >= 0 && sy < h && sx >= 0 && sx < w) ? tmp[size_t(sy) * w + sx] : 0.0f;
        }
      }
    }
  }
}

void normalize_batch(nn::Tensor<float>& x, const ChannelStats& st, float scale) {
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const size_t plane = size_t(h) * w;
  for (int c = 0; c < 3; ++c) {
    float denom = std::max(st.stddev[c] * scale, 1e-8f);
    float mean = st.mean[c];
    for (int i = 0; i < n; ++i) {
      float* p = x.ptr() + (size_t(i) * 3 + c) * plane;
      for (size_t j = 0; j < plane; ++j) p[j] = (p[j] - mean) / denom;
    }
  }
}

}  // namespace colorcnn::data
