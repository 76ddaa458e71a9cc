#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "colorcnn/data/datasets.hpp"
#include "colorcnn/img/image.hpp"
#include "colorcnn/models/classifiers.hpp"
#include "colorcnn/models/unet.hpp"
#include "colorcnn/zoo/zoo.hpp"

namespace colorcnn::eval {

enum class Method { kMedianCut, kOctree, kMedianCutDither, kColorCnn };

const char* method_name(Method m);
Method parse_method(const std::string& name);

// classical methods only; kColorCnn needs a trained network and goes through
// run_grid or the hard pass directly
img::QuantResult quantize_classical(Method m, const img::RgbImage& im,
                                    int num_colors);

struct ResultRecord {
  std::string method;
  int bit_depth = 0;
  double accuracy = 0;      // top-1 in [0,1]
  double mean_bpp = 0;      // indexed-PNG bits per pixel, test-set mean
  double mean_colors = 0;   // distinct colors per image, test-set mean
  double wall_seconds = 0;
};

std::string record_to_json(const ResultRecord& r);
std::vector<ResultRecord> read_records(const std::string& path);
void append_record(const std::string& path, const ResultRecord& r);

// hands out the trained network for a colorcnn cell; throw to fail the cell
using QuantizerSource = std::function<models::UNet<float>*(int bit_depth)>;

struct GridOptions {
  std::vector<Method> methods;
  std::vector<int> bit_depths;
  std::string out_dir;
  int batch = 128;
  bool save_images = false;  // keep every quantized test image as indexed PNG
};

// evaluates every (method, depth) cell on the hard-quantized test split.
// Finished cells live in <out_dir>/records.jsonl and are skipped on rerun, so
// an interrupted grid resumes where it stopped.
std::vector<ResultRecord> run_grid(models::Classifier<float>& clf,
                                   const data::ChannelStats& stats,
                                   const data::Dataset& test,
                                   const QuantizerSource& quantizer_for_depth,
                                   const GridOptions& opt);

// accuracy-vs-bitrate figure plus a CSV of the plotted values. jpeg_points
// are (bpp, accuracy) pairs drawn dashed; pass empty to omit the series.
// Classical methods whose accuracy drops as depth grows are reported on
// stderr but still plotted.
void rate_accuracy_curve(const std::vector<ResultRecord>& records,
                         const std::vector<std::pair<double, double>>& jpeg_points,
                         const std::string& svg_path, const std::string& csv_path);

// encodes the whole set at each quality and classifies the decoded images
std::vector<std::pair<double, double>> jpeg_reference_points(
    models::Classifier<float>& clf, const data::Dataset& ds,
    const data::ChannelStats& stats, const std::vector<int>& qualities,
    int batch = 128);

// fixed-width text table; rows typically carry variant labels rather than
// method names (full / no-regularizer / no-jitter)
void ablation_table(const std::vector<ResultRecord>& rows,
                    const std::string& path);

// one row per input image: the original followed by each method's quantized
// version, every cell blended with its class-evidence heatmap for the class
// predicted on the original
void cam_comparison(models::Classifier<float>& clf,
                    const data::ChannelStats& stats,
                    const std::vector<img::RgbImage>& originals,
                    const std::vector<std::string>& method_names,
                    const std::vector<std::vector<img::RgbImage>>& method_images,
                    const std::string& out_png,
                    const nn::Tensor<float>* probe_weight = nullptr);

}  // namespace colorcnn::eval
