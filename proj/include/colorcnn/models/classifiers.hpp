#pragma once

#include <memory>
#include <string>

#include "colorcnn/nn/layers.hpp"

namespace colorcnn::models {

enum class Arch { kAlexNet, kVgg16, kResNet18 };

inline const char* arch_name(Arch a) {
  switch (a) {
    case Arch::kAlexNet: return "alexnet";
    case Arch::kVgg16: return "vgg16";
    default: return "resnet18";
  }
}

inline Arch parse_arch(const std::string& s) {
  if (s == "alexnet") return Arch::kAlexNet;
  if (s == "vgg16") return Arch::kVgg16;
  if (s == "resnet18") return Arch::kResNet18;
  throw std::runtime_error("unknown architecture: " + s);
}

struct ClassifierSpec {
  Arch arch;
  int num_classes;
  int resolution;
};

template <typename T>
class Classifier : public nn::Module<T> {
 public:
  explicit Classifier(ClassifierSpec spec) : spec_(spec) {}
  const ClassifierSpec& spec() const { return spec_; }
  int num_classes() const { return spec_.num_classes; }
  int resolution() const { return spec_.resolution; }
  // final convolutional activations cached by the last forward, for attention maps
  virtual const nn::Tensor<T>& cam_features() const = 0;
  virtual int feature_channels() const = 0;
  // non-null when the net ends in global-average-pool + linear, whose weight
  // directly provides per-class feature weightings
  virtual const nn::Tensor<T>* cam_weight() const { return nullptr; }

 protected:
  ClassifierSpec spec_;
};

// stride-2 entry conv and three pooling stages; feature maps cached at 1/8
// resolution, fully connected head works at 1/16
template <typename T>
class AlexNet : public Classifier<T> {
 public:
  AlexNet(ClassifierSpec spec, uint64_t dropout_seed = 17)
      : Classifier<T>(spec), drop_rng_(dropout_seed) {
    COLORCNN_CHECK(spec.resolution % 16 == 0,
                   "alexnet needs resolution divisible by 16, got " << spec.resolution);
    stem_.template emplace<nn::Conv2d<T>>(3, 64, 3, 2, 1);
    stem_.template emplace<nn::ReLU<T>>();
    stem_.template emplace<nn::MaxPool2d<T>>(2);
    stem_.template emplace<nn::Conv2d<T>>(64, 192, 3, 1, 1);
    stem_.template emplace<nn::ReLU<T>>();
    stem_.template emplace<nn::MaxPool2d<T>>(2);
    stem_.template emplace<nn::Conv2d<T>>(192, 384, 3, 1, 1);
    stem_.template emplace<nn::ReLU<T>>();
    stem_.template emplace<nn::Conv2d<T>>(384, 256, 3, 1, 1);
    stem_.template emplace<nn::ReLU<T>>();
    stem_.template emplace<nn::Conv2d<T>>(256, 256, 3, 1, 1);
    stem_.template emplace<nn::ReLU<T>>();
    const int s = spec.resolution / 16;
    head_.template emplace<nn::Dropout<T>>(T(0.5), &drop_rng_);
    head_.template emplace<nn::Linear<T>>(256 * s * s, 1024);
    head_.template emplace<nn::ReLU<T>>();
    head_.template emplace<nn::Dropout<T>>(T(0.5), &drop_rng_);
    head_.template emplace<nn::Linear<T>>(1024, 1024);
    head_.template emplace<nn::ReLU<T>>();
    head_.template emplace<nn::Linear<T>>(1024, spec.num_classes);
  }

  nn::Tensor<T> forward(const nn::Tensor<T>& x, bool train) override {
    feats_ = stem_.forward(x, train);
    return head_.forward(pool_.forward(feats_, train), train);
  }
  nn::Tensor<T> backward(const nn::Tensor<T>& dy) override {
    return stem_.backward(pool_.backward(head_.backward(dy)));
  }
  void collect_params(const std::string& p, std::vector<nn::ParamRef<T>>& out) override {
    stem_.collect_params(p + "stem.", out);
    head_.collect_params(p + "head.", out);
  }
  void init(Rng& rng) override {
    stem_.init(rng);
    head_.init(rng);
  }
  void set_frozen(bool f) override {
    this->frozen_ = f;
    stem_.set_frozen(f);
    head_.set_frozen(f);
  }
  const nn::Tensor<T>& cam_features() const override { return feats_; }
  int feature_channels() const override { return 256; }

 private:
  Rng drop_rng_;
  nn::Sequential<T> stem_, head_;
  nn::MaxPool2d<T> pool_{2};
  nn::Tensor<T> feats_;
};

// classifiers that end with global average pooling and a single linear layer;
// the linear weight doubles as the per-class attention weighting
template <typename T>
class GapClassifier : public Classifier<T> {
 public:
  GapClassifier(ClassifierSpec spec, int feat_ch)
      : Classifier<T>(spec), feat_ch_(feat_ch), fc_(feat_ch, spec.num_classes) {}

  nn::Tensor<T> forward(const nn::Tensor<T>& x, bool train) override {
    feats_ = features_forward(x, train);
    return fc_.forward(gap_.forward(feats_, train), train);
  }
  nn::Tensor<T> backward(const nn::Tensor<T>& dy) override {
    return features_backward(gap_.backward(fc_.backward(dy)));
  }
  const nn::Tensor<T>& cam_features() const override { return feats_; }
  int feature_channels() const override { return feat_ch_; }
  const nn::Tensor<T>* cam_weight() const override {
    return &const_cast<GapClassifier*>(this)->fc_.weight();
  }

 protected:
  virtual nn::Tensor<T> features_forward(const nn::Tensor<T>& x, bool train) = 0;
  virtual nn::Tensor<T> features_backward(const nn::Tensor<T>& dy) = 0;

  int feat_ch_;
  nn::GlobalAvgPool<T> gap_;
  nn::Linear<T> fc_;
  nn::Tensor<T> feats_;
};

// 13 batch-normalized 3x3 conv layers in the usual 2-2-3-3-3 grouping; the
// fifth pooling stage is dropped and the fully connected stack replaced by
// global average pooling so small inputs keep a usable feature map
template <typename T>
class Vgg16 : public GapClassifier<T> {
 public:
  explicit Vgg16(ClassifierSpec spec) : GapClassifier<T>(spec, 512) {
    COLORCNN_CHECK(spec.resolution % 16 == 0,
                   "vgg16 needs resolution divisible by 16, got " << spec.resolution);
    int in = 3;
    static constexpr int cfg[] = {64, 64, 0, 128, 128, 0, 256, 256, 256, 0,
                                  512, 512, 512, 0, 512, 512, 512};
    for (int c : cfg) {
      if (c == 0) {
        body_.template emplace<nn::MaxPool2d<T>>(2);
        continue;
      }
      body_.template emplace<nn::Conv2d<T>>(in, c, 3, 1, 1, false);
      body_.template emplace<nn::BatchNorm2d<T>>(c);
      body_.template emplace<nn::ReLU<T>>();
      in = c;
    }
  }

  void collect_params(const std::string& p, std::vector<nn::ParamRef<T>>& out) override {
    body_.collect_params(p + "features.", out);
    this->fc_.collect_params(p + "fc.", out);
  }
  void collect_buffers(const std::string& p, std::vector<nn::BufferRef<T>>& out) override {
    body_.collect_buffers(p + "features.", out);
  }
  void init(Rng& rng) override {
    body_.init(rng);
    this->fc_.init(rng);
  }
  void set_frozen(bool f) override {
    this->frozen_ = f;
    body_.set_frozen(f);
    this->fc_.set_frozen(f);
  }

 protected:
  nn::Tensor<T> features_forward(const nn::Tensor<T>& x, bool train) override {
    return body_.forward(x, train);
  }
  nn::Tensor<T> features_backward(const nn::Tensor<T>& dy) override {
    return body_.backward(dy);
  }

 private:
  nn::Sequential<T> body_;
};

template <typename T>
class BasicBlock : public nn::Module<T> {
 public:
  BasicBlock(int in, int out, int stride) {
    main_.template emplace<nn::Conv2d<T>>(in, out, 3, stride, 1, false);
    main_.template emplace<nn::BatchNorm2d<T>>(out);
    main_.template emplace<nn::ReLU<T>>();
    main_.template emplace<nn::Conv2d<T>>(out, out, 3, 1, 1, false);
    main_.template emplace<nn::BatchNorm2d<T>>(out);
    if (stride != 1 || in != out) {
      down_ = std::make_unique<nn::Sequential<T>>();
      down_->template emplace<nn::Conv2d<T>>(in, out, 1, stride, 0, false);
      down_->template emplace<nn::BatchNorm2d<T>>(out);
    }
  }

  nn::Tensor<T> forward(const nn::Tensor<T>& x, bool train) override {
    z_ = main_.forward(x, train);
    if (down_)
      nn::add_into(z_, down_->forward(x, train));
    else
      nn::add_into(z_, x);
    nn::Tensor<T> y(z_.shape);
    kernels::relu_forward(z_.numel(), z_.ptr(), y.ptr());
    return y;
  }
  nn::Tensor<T> backward(const nn::Tensor<T>& dy) override {
    nn::Tensor<T> g(dy.shape);
    kernels::relu_backward(dy.numel(), z_.ptr(), dy.ptr(), g.ptr());
    nn::Tensor<T> dx = main_.backward(g);
    if (down_)
      nn::add_into(dx, down_->backward(g));
    else
      nn::add_into(dx, g);
    return dx;
  }
  void collect_params(const std::string& p, std::vector<nn::ParamRef<T>>& out) override {
    main_.collect_params(p + "main.", out);
    if (down_) down_->collect_params(p + "down.", out);
  }
  void collect_buffers(const std::string& p, std::vector<nn::BufferRef<T>>& out) override {
    main_.collect_buffers(p + "main.", out);
    if (down_) down_->collect_buffers(p + "down.", out);
  }
  void init(Rng& rng) override {
    main_.init(rng);
    if (down_) down_->init(rng);
  }
  void set_frozen(bool f) override {
    this->frozen_ = f;
    main_.set_frozen(f);
    if (down_) down_->set_frozen(f);
  }

 private:
  nn::Sequential<T> main_;
  std::unique_ptr<nn::Sequential<T>> down_;
  nn::Tensor<T> z_;
};

// small-image variant: 3x3 stride-1 stem without the entry pooling stage,
// then the standard 2-2-2-2 basic-block stages
template <typename T>
class ResNet18 : public GapClassifier<T> {
 public:
  explicit ResNet18(ClassifierSpec spec) : GapClassifier<T>(spec, 512) {
    COLORCNN_CHECK(spec.resolution % 8 == 0,
                   "resnet18 needs resolution divisible by 8, got " << spec.resolution);
    body_.template emplace<nn::Conv2d<T>>(3, 64, 3, 1, 1, false);
    body_.template emplace<nn::BatchNorm2d<T>>(64);
    body_.template emplace<nn::ReLU<T>>();
    body_.template emplace<BasicBlock<T>>(64, 64, 1);
    body_.template emplace<BasicBlock<T>>(64, 64, 1);
    body_.template emplace<BasicBlock<T>>(64, 128, 2);
    body_.template emplace<BasicBlock<T>>(128, 128, 1);
    body_.template emplace<BasicBlock<T>>(128, 256, 2);
    body_.template emplace<BasicBlock<T>>(256, 256, 1);
    body_.template emplace<BasicBlock<T>>(256, 512, 2);
    body_.template emplace<BasicBlock<T>>(512, 512, 1);
  }

  void collect_params(const std::string& p, std::vector<nn::ParamRef<T>>& out) override {
    body_.collect_params(p + "body.", out);
    this->fc_.collect_params(p + "fc.", out);
  }
  void collect_buffers(const std::string& p, std::vector<nn::BufferRef<T>>& out) override {
    body_.collect_buffers(p + "body.", out);
  }
  void init(Rng& rng) override {
    body_.init(rng);
    this->fc_.init(rng);
  }
  void set_frozen(bool f) override {
    this->frozen_ = f;
    body_.set_frozen(f);
    this->fc_.set_frozen(f);
  }

 protected:
  nn::Tensor<T> features_forward(const nn::Tensor<T>& x, bool train) override {
    return body_.forward(x, train);
  }
  nn::Tensor<T> features_backward(const nn::Tensor<T>& dy) override {
    return body_.backward(dy);
  }

 private:
  nn::Sequential<T> body_;
};

template <typename T>
std::unique_ptr<Classifier<T>> build_classifier(const ClassifierSpec& spec,
                                                uint64_t dropout_seed = 17) {
  switch (spec.arch) {
    case Arch::kAlexNet:
      return std::make_unique<AlexNet<T>>(spec, dropout_seed);
    case Arch::kVgg16:
      return std::make_unique<Vgg16<T>>(spec);
    default:
      return std::make_unique<ResNet18<T>>(spec);
  }
}

}  // namespace colorcnn::models
