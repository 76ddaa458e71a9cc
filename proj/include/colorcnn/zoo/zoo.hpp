#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "colorcnn/data/datasets.hpp"
#include "colorcnn/models/classifiers.hpp"

namespace colorcnn::zoo {

struct ClassifierTrainOptions {
  int epochs = 60;
  int batch = 128;
  float peak_lr = 0.1f;
  float momentum = 0.5f;
  float weight_decay = 5e-4f;
  uint64_t seed = 1;
  bool augment = true;
  int eval_every = 5;   // epochs between held-out evaluations, 0 disables
  std::string out_dir;  // empty: no checkpoint or log files
};

struct EpochStat {
  int epoch;
  double loss;
  double train_acc;
  double val_acc;  // negative when not measured this epoch
};

struct TrainLog {
  std::vector<EpochStat> epochs;
  double final_val_acc = -1.0;
};

TrainLog train_classifier(models::Classifier<float>& clf, const data::Dataset& train,
                          const data::Dataset& test, const data::ChannelStats& stats,
                          const ClassifierTrainOptions& opt);

// streaming top-1 counter over pre-assembled [0,1] image batches; normalizes
// with the classifier's training statistics before the forward pass
class BatchEvaluator {
 public:
  BatchEvaluator(models::Classifier<float>& clf, const data::ChannelStats& stats)
      : clf_(clf), stats_(stats) {}
  void add(nn::Tensor<float> x, const std::vector<int>& y);
  double accuracy() const;
  int64_t total() const { return total_; }

 private:
  models::Classifier<float>& clf_;
  data::ChannelStats stats_;
  int64_t correct_ = 0, total_ = 0;
};

double evaluate_top1(models::Classifier<float>& clf, const data::Dataset& ds,
                     const data::ChannelStats& stats, int batch = 256);

// checkpointing ------------------------------------------------------------

void save_classifier(const std::string& prefix, models::Classifier<float>& clf,
                     const data::ChannelStats& stats,
                     const std::map<std::string, std::string>& extra);

struct LoadedClassifier {
  std::unique_ptr<models::Classifier<float>> clf;
  data::ChannelStats stats;
  std::map<std::string, std::string> manifest;
};

LoadedClassifier load_classifier(const std::string& prefix);

// attention maps -----------------------------------------------------------

// class-evidence heatmap: per-class weighting of the final conv features,
// bilinearly upsampled to the input size and min-max normalized to [0,1].
// Architectures without a pooled linear head need probe_weight from
// train_cam_probe.
std::vector<float> class_activation_map(models::Classifier<float>& clf,
                                        const img::RgbImage& im, int class_id,
                                        const data::ChannelStats& stats,
                                        const nn::Tensor<float>* probe_weight = nullptr);

// fits a pooled-linear readout on frozen features so any backbone can emit
// activation maps; returns the {num_classes, feature_channels} weight
nn::Tensor<float> train_cam_probe(models::Classifier<float>& clf,
                                  const data::Dataset& train,
                                  const data::ChannelStats& stats, int epochs,
                                  uint64_t seed);

// overlap of the top-fraction cells of two equally sized maps
double top_fraction_iou(const std::vector<float>& a, const std::vector<float>& b,
                        double fraction);

std::vector<float> resize_bilinear(const std::vector<float>& src, int sh, int sw,
                                   int dh, int dw);

}  // namespace colorcnn::zoo
