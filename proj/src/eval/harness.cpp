#include "colorcnn/eval/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "colorcnn/classical/classical.hpp"
#include "colorcnn/core/check.hpp"
#include "colorcnn/eval/svg_plot.hpp"
#include "colorcnn/img/jpeg_codec.hpp"
#include "colorcnn/img/png_codec.hpp"
#include "colorcnn/nn/loss.hpp"
#include "colorcnn/quantizer/quantizer.hpp"

namespace colorcnn::eval {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* method_name(Method m) {
  switch (m) {
    case Method::kMedianCut: return "mediancut";
    case Method::kOctree: return "octree";
    case Method::kMedianCutDither: return "mediancut+dither";
    case Method::kColorCnn: return "colorcnn";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::kMedianCut, Method::kOctree, Method::kMedianCutDither,
                   Method::kColorCnn})
    if (name == method_name(m)) return m;
  throw std::runtime_error("unknown quantizer: " + name);
}

img::QuantResult quantize_classical(Method m, const img::RgbImage& im,
                                    int num_colors) {
  switch (m) {
    case Method::kMedianCut:
      return classical::median_cut(im, num_colors);
    case Method::kOctree:
      return classical::octree_quantize(im, num_colors);
    case Method::kMedianCutDither:
      return classical::floyd_steinberg_dither(
          im, classical::median_cut(im, num_colors).palette);
    case Method::kColorCnn:
      break;
  }
  throw std::runtime_error("colorcnn is not a classical method");
}

std::string record_to_json(const ResultRecord& r) {
  json j;
  j["method"] = r.method;
  j["bit_depth"] = r.bit_depth;
  j["accuracy"] = r.accuracy;
  j["mean_bpp"] = r.mean_bpp;
  j["mean_colors"] = r.mean_colors;
  j["wall_seconds"] = r.wall_seconds;
  return j.dump();
}

std::vector<ResultRecord> read_records(const std::string& path) {
  std::vector<ResultRecord> out;
  std::ifstream f(path);
  if (!f.good()) return out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    ResultRecord r;
    r.method = j.at("method").get<std::string>();
    r.bit_depth = j.at("bit_depth").get<int>();
    r.accuracy = j.at("accuracy").get<double>();
    r.mean_bpp = j.at("mean_bpp").get<double>();
    r.mean_colors = j.at("mean_colors").get<double>();
    r.wall_seconds = j.value("wall_seconds", 0.0);
    out.push_back(std::move(r));
  }
  return out;
}

void append_record(const std::string& path, const ResultRecord& r) {
  std::ofstream f(path, std::ios::app);
  COLORCNN_CHECK(f.good(), "cannot append to " << path);
  f << record_to_json(r) << '\n';
  f.flush();
  COLORCNN_CHECK(f.good(), "record write failed: " << path);
}

namespace {

void tensor_slice_from_image(const img::RgbImage& im, nn::Tensor<float>& x, int n) {
  const int64_t plane = int64_t(im.h) * im.w;
  float* base = x.ptr() + size_t(n) * 3 * plane;
  for (int64_t j = 0; j < plane; ++j)
    for (int r = 0; r < 3; ++r) base[r * plane + j] = im.px[size_t(j) * 3 + r];
}

img::QuantResult slice_quant_result(const quant::HardPassResult& hp, int i) {
  const int k = hp.palette.dim(1);
  const int h = hp.index_map.dim(1), w = hp.index_map.dim(2);
  img::IndexMap idx(h, w);
  const int32_t* ip = hp.index_map.ptr() + size_t(i) * h * w;
  std::copy(ip, ip + size_t(h) * w, idx.idx.begin());
  img::Palette pal;
  pal.colors.resize(size_t(k));
  const float* pp = hp.palette.ptr() + size_t(i) * k * 3;
  for (int c = 0; c < k; ++c)
    pal.colors[size_t(c)] = {pp[c * 3], pp[c * 3 + 1], pp[c * 3 + 2]};
  return img::finalize_quant_result(idx, pal);
}

ResultRecord run_cell(models::Classifier<float>& clf,
                      const data::ChannelStats& stats, const data::Dataset& test,
                      Method method, int depth, models::UNet<float>* net,
                      int batch, const std::string& image_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const int num_colors = 1 << depth;
  const int64_t n = test.count();
  zoo::BatchEvaluator ev(clf, stats);
  double sum_bpp = 0, sum_colors = 0;
  int64_t saved = 0;
  for (int64_t start = 0; start < n; start += batch) {
    const int nb = int(std::min<int64_t>(batch, n - start));
    std::vector<img::QuantResult> results(static_cast<size_t>(nb));
    if (method == Method::kColorCnn) {
      nn::Tensor<float> x({nb, 3, test.h, test.w});
      std::vector<int64_t> idxs(static_cast<size_t>(nb));
      for (int j = 0; j < nb; ++j) idxs[size_t(j)] = start + j;
      data::fill_batch(test, idxs.data(), nb, x, nullptr);
      auto m = net->forward(x, false);
      auto hp = quant::hard_pass(x, m);
      for (int j = 0; j < nb; ++j) results[size_t(j)] = slice_quant_result(hp, j);
    } else {
      for (int j = 0; j < nb; ++j)
        results[size_t(j)] = quantize_classical(method, test.image(start + j), num_colors);
    }
    nn::Tensor<float> xq({nb, 3, test.h, test.w});
    std::vector<int> y(static_cast<size_t>(nb));
    for (int j = 0; j < nb; ++j) {
      tensor_slice_from_image(results[size_t(j)].image, xq, j);
      y[size_t(j)] = test.labels[size_t(start + j)];
      sum_bpp += results[size_t(j)].bits_per_pixel;
      sum_colors += results[size_t(j)].distinct_colors;
      if (!image_dir.empty()) {
        char name[32];
        std::snprintf(name, sizeof name, "img-%06lld.png",
                      static_cast<long long>(saved++));
        img::save_bytes(image_dir + "/" + name,
                        img::encode_indexed_png(results[size_t(j)].index_map,
                                                results[size_t(j)].palette));
      }
    }
    ev.add(std::move(xq), y);
  }
  ResultRecord r;
  r.method = method_name(method);
  r.bit_depth = depth;
  r.accuracy = ev.accuracy();
  r.mean_bpp = sum_bpp / double(n);
  r.mean_colors = sum_colors / double(n);
  r.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace

std::vector<ResultRecord> run_grid(models::Classifier<float>& clf,
                                   const data::ChannelStats& stats,
                                   const data::Dataset& test,
                                   const QuantizerSource& quantizer_for_depth,
                                   const GridOptions& opt) {
  COLORCNN_CHECK(!opt.methods.empty() && !opt.bit_depths.empty(),
                 "grid needs at least one method and one bit depth");
  for (int d : opt.bit_depths)
    COLORCNN_CHECK(d >= 1 && d <= 6, "bit depth must be in [1,6], got " << d);
  fs::create_directories(opt.out_dir);
  const std::string records_path = opt.out_dir + "/records.jsonl";

  std::map<std::pair<std::string, int>, ResultRecord> done;
  for (auto& r : read_records(records_path)) done[{r.method, r.bit_depth}] = r;

  std::vector<ResultRecord> out;
  for (Method m : opt.methods) {
    for (int d : opt.bit_depths) {
      auto key = std::make_pair(std::string(method_name(m)), d);
      if (auto it = done.find(key); it != done.end()) {
        out.push_back(it->second);
        continue;
      }
      models::UNet<float>* net = nullptr;
      if (m == Method::kColorCnn) {
        net = quantizer_for_depth(d);
        COLORCNN_CHECK(net, "no trained quantizer for bit depth " << d);
        COLORCNN_CHECK(net->out_channels() == (1 << d),
                       "quantizer head has " << net->out_channels()
                                             << " channels, expected " << (1 << d));
      }
      std::string image_dir;
      if (opt.save_images) {
        image_dir = opt.out_dir + "/images/" + method_name(m) + "-d" + std::to_string(d);
        fs::create_directories(image_dir);
      }
      ResultRecord r = run_cell(clf, stats, test, m, d, net, opt.batch, image_dir);
      append_record(records_path, r);
      out.push_back(std::move(r));
    }
  }
  return out;
}

void rate_accuracy_curve(const std::vector<ResultRecord>& records,
                         const std::vector<std::pair<double, double>>& jpeg_points,
                         const std::string& svg_path, const std::string& csv_path) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<ResultRecord>> by_method;
  for (const auto& r : records) {
    if (by_method.find(r.method) == by_method.end()) order.push_back(r.method);
    by_method[r.method].push_back(r);
  }

  // classical accuracy should not drop as the palette grows
  for (const auto& name : order) {
    if (name == "colorcnn") continue;
    auto rows = by_method[name];
    std::sort(rows.begin(), rows.end(),
              [](const ResultRecord& a, const ResultRecord& b) {
                return a.bit_depth < b.bit_depth;
              });
    for (size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].accuracy < rows[i - 1].accuracy - 1e-12) {
        std::fprintf(stderr,
                     "warning: %s accuracy drops from d=%d (%.2f%%) to d=%d (%.2f%%)\n",
                     name.c_str(), rows[i - 1].bit_depth, 100 * rows[i - 1].accuracy,
                     rows[i].bit_depth, 100 * rows[i].accuracy);
      }
    }
  }

  std::ofstream csv(csv_path);
  COLORCNN_CHECK(csv.good(), "cannot open " << csv_path << " for writing");
  csv << "method,bit_depth,mean_bpp,accuracy,mean_colors\n";
  LinePlot plot;
  plot.title = "Accuracy under color quantization";
  plot.xlabel = "bits per pixel";
  plot.ylabel = "top-1 accuracy (%)";
  for (const auto& name : order) {
    auto rows = by_method[name];
    std::sort(rows.begin(), rows.end(),
              [](const ResultRecord& a, const ResultRecord& b) {
                return a.mean_bpp < b.mean_bpp;
              });
    PlotSeries s;
    s.name = name;
    for (const auto& r : rows) {
      s.points.emplace_back(r.mean_bpp, 100 * r.accuracy);
      csv << r.method << ',' << r.bit_depth << ',' << r.mean_bpp << ','
          << r.accuracy << ',' << r.mean_colors << '\n';
    }
    plot.series.push_back(std::move(s));
  }
  if (!jpeg_points.empty()) {
    PlotSeries s;
    s.name = "jpeg";
    s.dashed = true;
    auto pts = jpeg_points;
    std::sort(pts.begin(), pts.end());
    for (const auto& p : pts) {
      s.points.emplace_back(p.first, 100 * p.second);
      csv << "jpeg,," << p.first << ',' << p.second << ",\n";
    }
    plot.series.push_back(std::move(s));
  }
  COLORCNN_CHECK(csv.good(), "write failed: " << csv_path);
  csv.close();
  write_svg(plot, svg_path);
}

std::vector<std::pair<double, double>> jpeg_reference_points(
    models::Classifier<float>& clf, const data::Dataset& ds,
    const data::ChannelStats& stats, const std::vector<int>& qualities,
    int batch) {
  std::vector<std::pair<double, double>> points;
  const int64_t n = ds.count();
  COLORCNN_CHECK(n > 0, "empty dataset");
  for (int q : qualities) {
    zoo::BatchEvaluator ev(clf, stats);
    double sum_bpp = 0;
    for (int64_t start = 0; start < n; start += batch) {
      const int nb = int(std::min<int64_t>(batch, n - start));
      nn::Tensor<float> x({nb, 3, ds.h, ds.w});
      std::vector<int> y(static_cast<size_t>(nb));
      for (int j = 0; j < nb; ++j) {
        auto bytes = img::encode_jpeg(ds.image(start + j), q);
        sum_bpp += img::measure_bpp(bytes.size(), ds.h, ds.w);
        tensor_slice_from_image(img::decode_jpeg(bytes), x, j);
        y[size_t(j)] = ds.labels[size_t(start + j)];
      }
      ev.add(std::move(x), y);
    }
    points.emplace_back(sum_bpp / double(n), ev.accuracy());
  }
  std::sort(points.begin(), points.end());
  return points;
}

void ablation_table(const std::vector<ResultRecord>& rows,
                    const std::string& path) {
  size_t label_w = std::string("variant").size();
  for (const auto& r : rows) label_w = std::max(label_w, r.method.size());
  std::ofstream f(path);
  COLORCNN_CHECK(f.good(), "cannot open " << path << " for writing");
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-*s  %9s  %11s  %8s\n", int(label_w), "variant",
                "top-1 (%)", "mean colors", "mean bpp");
  f << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %9.2f  %11.2f  %8.3f\n", int(label_w),
                  r.method.c_str(), 100 * r.accuracy, r.mean_colors, r.mean_bpp);
    f << buf;
  }
  COLORCNN_CHECK(f.good(), "write failed: " << path);
}

namespace {

int predict_class(models::Classifier<float>& clf, const data::ChannelStats& stats,
                  const img::RgbImage& im) {
  auto x = quant::image_to_tensor(im);
  data::normalize_batch(x, stats, 1.0f);
  auto logits = clf.forward(x, false);
  return nn::argmax_row(logits.ptr(), logits.dim(1));
}

void blend_cam_cell(img::RgbImage& canvas, int y0, int x0, const img::RgbImage& im,
                    const std::vector<float>& cam) {
  for (int y = 0; y < im.h; ++y) {
    for (int x = 0; x < im.w; ++x) {
      float v = cam[size_t(y) * im.w + x];
      const float heat[3] = {v, 0.25f * v, 1.0f - v};
      const float* src = im.at(y, x);
      float* dst = canvas.at(y0 + y, x0 + x);
      for (int r = 0; r < 3; ++r) dst[r] = 0.55f * src[r] + 0.45f * heat[r];
    }
  }
}

}  // namespace

void cam_comparison(models::Classifier<float>& clf,
                    const data::ChannelStats& stats,
                    const std::vector<img::RgbImage>& originals,
                    const std::vector<std::string>& method_names,
                    const std::vector<std::vector<img::RgbImage>>& method_images,
                    const std::string& out_png,
                    const nn::Tensor<float>* probe_weight) {
  COLORCNN_CHECK(!originals.empty(), "no images");
  COLORCNN_CHECK(method_names.size() == method_images.size(),
                 "method name/image count mismatch");
  const int h = originals[0].h, w = originals[0].w;
  for (const auto& col : method_images)
    COLORCNN_CHECK(col.size() == originals.size(),
                   "every method needs one image per row");

  const int rows = int(originals.size());
  const int cols = 1 + int(method_names.size());
  const int pad = 2;
  img::RgbImage canvas(rows * h + (rows + 1) * pad, cols * w + (cols + 1) * pad);
  std::fill(canvas.px.begin(), canvas.px.end(), 1.0f);

  for (int i = 0; i < rows; ++i) {
    const int cls = predict_class(clf, stats, originals[size_t(i)]);
    const int y0 = pad + i * (h + pad);
    for (int c = 0; c < cols; ++c) {
      const img::RgbImage& im =
          c == 0 ? originals[size_t(i)] : method_images[size_t(c - 1)][size_t(i)];
      COLORCNN_CHECK(im.h == h && im.w == w, "image size mismatch in row " << i);
      auto cam = zoo::class_activation_map(clf, im, cls, stats, probe_weight);
      blend_cam_cell(canvas, y0, pad + c * (w + pad), im, cam);
    }
  }
  img::save_bytes(out_png, img::encode_rgb_png(canvas));
}

}  // namespace colorcnn::eval
