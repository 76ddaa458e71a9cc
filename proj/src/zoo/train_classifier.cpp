#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "colorcnn/nn/loss.hpp"
#include "colorcnn/nn/optim.hpp"
#include "colorcnn/zoo/zoo.hpp"

namespace colorcnn::zoo {

void BatchEvaluator::add(nn::Tensor<float> x, const std::vector<int>& y) {
  COLORCNN_CHECK(x.dim(0) == int(y.size()), "batch/label count mismatch");
  data::normalize_batch(x, stats_, 1.0f);
  nn::Tensor<float> logits = clf_.forward(x, false);
  correct_ += nn::count_correct(logits, y);
  total_ += int64_t(y.size());
}

double BatchEvaluator::accuracy() const {
  COLORCNN_CHECK(total_ > 0, "no batches evaluated");
  return double(correct_) / double(total_);
}

double evaluate_top1(models::Classifier<float>& clf, const data::Dataset& ds,
                     const data::ChannelStats& stats, int batch) {
  COLORCNN_CHECK(ds.num_classes == clf.num_classes(),
                 "dataset has " << ds.num_classes << " classes, classifier expects "
                                << clf.num_classes());
  BatchEvaluator ev(clf, stats);
  nn::Tensor<float> x;
  std::vector<int> y;
  std::vector<int64_t> idx(size_t(ds.count()));
  std::iota(idx.begin(), idx.end(), int64_t(0));
  for (int64_t at = 0; at < ds.count(); at += batch) {
    int n = int(std::min<int64_t>(batch, ds.count() - at));
    data::fill_batch(ds, idx.data() + at, n, x, &y);
    ev.add(x, y);
  }
  return ev.accuracy();
}

TrainLog train_classifier(models::Classifier<float>& clf, const data::Dataset& train,
                          const data::Dataset& test, const data::ChannelStats& stats,
                          const ClassifierTrainOptions& opt) {
  COLORCNN_CHECK(opt.epochs > 0 && opt.batch > 0, "epochs and batch size must be positive");
  COLORCNN_CHECK(train.count() > 0, "empty training set");

  Rng rng(opt.seed);
  clf.init(rng);

  nn::SgdMomentum<float> sgd(clf.params(), opt.momentum, opt.weight_decay);
  const int64_t steps_per_epoch = (train.count() + opt.batch - 1) / opt.batch;
  nn::OneCycleSchedule sched(opt.peak_lr, steps_per_epoch * opt.epochs);

  std::ofstream log_file;
  if (!opt.out_dir.empty()) {
    std::filesystem::create_directories(opt.out_dir);
    log_file.open(opt.out_dir + "/train-classifier-log.jsonl");
  }

  TrainLog log;
  std::vector<int64_t> order(size_t(train.count()));
  std::iota(order.begin(), order.end(), int64_t(0));
  nn::Tensor<float> x;
  std::vector<int> y;
  int64_t step = 0;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    Rng perm = rng.fork(uint64_t(epoch) + 1);
    perm.shuffle(order.begin(), order.end());
    double loss_sum = 0;
    int64_t correct = 0, seen = 0;
    for (int64_t at = 0; at < train.count(); at += opt.batch, ++step) {
      int n = int(std::min<int64_t>(opt.batch, train.count() - at));
      data::fill_batch(train, order.data() + at, n, x, &y);
      if (opt.augment) data::augment_batch(x, rng);
      data::normalize_batch(x, stats, 1.0f);

      clf.zero_grad();
      nn::Tensor<float> logits = clf.forward(x, true);
      auto ce = nn::softmax_cross_entropy(logits, y);
      COLORCNN_CHECK(std::isfinite(ce.loss),
                     "non-finite loss " << ce.loss << " at epoch " << epoch << " step "
                                        << step << " lr " << sched.lr(step));
      clf.backward(ce.grad);
      sgd.step(float(sched.lr(step)));

      loss_sum += double(ce.loss) * n;
      correct += nn::count_correct(logits, y);
      seen += n;
    }

    EpochStat st;
    st.epoch = epoch;
    st.loss = loss_sum / double(seen);
    st.train_acc = double(correct) / double(seen);
    st.val_acc = -1.0;
    bool last = epoch == opt.epochs - 1;
    if (test.count() > 0 && opt.eval_every > 0 &&
        ((epoch + 1) % opt.eval_every == 0 || last))
      st.val_acc = evaluate_top1(clf, test, stats);
    log.epochs.push_back(st);
    if (st.val_acc >= 0) log.final_val_acc = st.val_acc;

    if (log_file.is_open()) {
      nlohmann::json j{{"epoch", st.epoch},
                       {"loss", st.loss},
                       {"train_acc", st.train_acc}};
      if (st.val_acc >= 0) j["val_acc"] = st.val_acc;
      log_file << j.dump() << "\n" << std::flush;
    }
  }
  return log;
}

}  // namespace colorcnn::zoo
