#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "colorcnn/quantizer/quantizer.hpp"
#include "colorcnn/zoo/zoo.hpp"

namespace colorcnn::quant {

struct QuantizerTrainOptions {
  QuantizerConfig config;
  int epochs = 30;
  int batch = 128;
  float peak_lr = 0.01f;
  float min_lr = 0.0f;
  int restart_period = 20;  // epochs per cosine cycle
  float momentum = 0.5f;
  float weight_decay = 5e-4f;
  uint64_t seed = 1;
  bool augment = true;
  int val_every = 5;   // epochs between hard-pass validations, 0 disables
  std::string out_dir;
};

struct QuantEpochStat {
  int epoch;
  double loss;
  double ce;
  double reg;
  double val_acc;  // negative when not measured
};

struct QuantTrainLog {
  std::vector<QuantEpochStat> epochs;
  double final_val_acc = -1.0;
};

// optimizes the quantizer network against the frozen classifier: soft pass,
// renormalization at the configured scale, Gaussian jitter, cross-entropy
// plus the weighted diversity penalty. The classifier's parameters are left
// untouched. Validation always runs the hard (deployment) pass at standard
// normalization.
QuantTrainLog train_quantizer(models::UNet<float>& net, models::Classifier<float>& clf,
                              const data::Dataset& train, const data::Dataset& val,
                              const data::ChannelStats& stats,
                              const QuantizerTrainOptions& opt);

struct HardEvalResult {
  double accuracy = 0;
  double mean_colors = -1;
  double mean_bpp = -1;
};

// classifies hard-quantized images; with measure_rate, also averages the
// per-image distinct-color count and indexed-PNG bit rate
HardEvalResult evaluate_hard(models::UNet<float>& net, models::Classifier<float>& clf,
                             const data::Dataset& ds, const data::ChannelStats& stats,
                             int batch = 128, bool measure_rate = false);

void save_quantizer(const std::string& prefix, models::UNet<float>& net,
                    const QuantizerConfig& cfg, const data::ChannelStats& stats,
                    const std::map<std::string, std::string>& extra);

struct LoadedQuantizer {
  std::unique_ptr<models::UNet<float>> net;
  QuantizerConfig config;
  data::ChannelStats stats;
  std::map<std::string, std::string> manifest;
};

LoadedQuantizer load_quantizer(const std::string& prefix);

}  // namespace colorcnn::quant
