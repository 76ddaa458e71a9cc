#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "colorcnn/nn/loss.hpp"
#include "colorcnn/nn/optim.hpp"
#include "colorcnn/nn/serialize.hpp"
#include "colorcnn/quantizer/train.hpp"

namespace colorcnn::quant {

namespace {

// gradient of (v - mean) / (stddev * scale) back onto v
void scale_grad_by_norm(nn::Tensor<float>& g, const data::ChannelStats& st,
                        float scale) {
  const int n = g.dim(0);
  const size_t plane = size_t(g.dim(2)) * g.dim(3);
  for (int c = 0; c < 3; ++c) {
    float denom = std::max(st.stddev[c] * scale, 1e-8f);
    for (int i = 0; i < n; ++i) {
      float* p = g.ptr() + (size_t(i) * 3 + c) * plane;
      for (size_t j = 0; j < plane; ++j) p[j] /= denom;
    }
  }
}

}  // namespace

HardEvalResult evaluate_hard(models::UNet<float>& net, models::Classifier<float>& clf,
                             const data::Dataset& ds, const data::ChannelStats& stats,
                             int batch, bool measure_rate) {
  zoo::BatchEvaluator ev(clf, stats);
  nn::Tensor<float> x;
  std::vector<int> y;
  std::vector<int64_t> idx(size_t(ds.count()));
  std::iota(idx.begin(), idx.end(), int64_t(0));
  double color_sum = 0, bpp_sum = 0;
  const int k = net.out_channels();
  for (int64_t at = 0; at < ds.count(); at += batch) {
    int n = int(std::min<int64_t>(batch, ds.count() - at));
    data::fill_batch(ds, idx.data() + at, n, x, &y);
    nn::Tensor<float> m = net.forward(x, false);
    HardPassResult hp = hard_pass(x, m);
    if (measure_rate) {
      const size_t plane = size_t(ds.h) * ds.w;
      for (int i = 0; i < n; ++i) {
        img::IndexMap im(ds.h, ds.w);
        std::copy(hp.index_map.ptr() + size_t(i) * plane,
                  hp.index_map.ptr() + size_t(i + 1) * plane, im.idx.begin());
        img::Palette pal;
        pal.colors.resize(size_t(k));
        for (int c = 0; c < k; ++c)
          for (int r = 0; r < 3; ++r)
            pal.colors[size_t(c)][size_t(r)] = hp.palette.data[(size_t(i) * k + c) * 3 + r];
        img::QuantResult qr = img::finalize_quant_result(im, pal);
        color_sum += qr.distinct_colors;
        bpp_sum += qr.bits_per_pixel;
      }
    }
    ev.add(hp.image, y);
  }
  HardEvalResult r;
  r.accuracy = ev.accuracy();
  if (measure_rate) {
    r.mean_colors = color_sum / double(ds.count());
    r.mean_bpp = bpp_sum / double(ds.count());
  }
  return r;
}

QuantTrainLog train_quantizer(models::UNet<float>& net, models::Classifier<float>& clf,
                              const data::Dataset& train, const data::Dataset& val,
                              const data::ChannelStats& stats,
                              const QuantizerTrainOptions& opt) {
  validate(opt.config);
  COLORCNN_CHECK(net.out_channels() == opt.config.colors(),
                 "network emits " << net.out_channels() << " entries, config wants "
                                  << opt.config.colors());
  COLORCNN_CHECK(train.count() > 0, "empty training set");
  COLORCNN_CHECK(train.num_classes == clf.num_classes(),
                 "dataset/classifier class count mismatch");

  Rng rng(opt.seed);
  net.init(rng);
  clf.set_frozen(true);

  nn::SgdMomentum<float> sgd(net.params(), opt.momentum, opt.weight_decay);
  const int64_t steps_per_epoch = (train.count() + opt.batch - 1) / opt.batch;
  nn::CosineRestartSchedule sched(opt.peak_lr, opt.min_lr,
                                  std::max<int64_t>(1, steps_per_epoch * opt.restart_period));

  std::ofstream log_file;
  if (!opt.out_dir.empty()) {
    std::filesystem::create_directories(opt.out_dir);
    log_file.open(opt.out_dir + "/train-quantizer-log.jsonl");
  }

  QuantTrainLog log;
  std::vector<int64_t> order(size_t(train.count()));
  std::iota(order.begin(), order.end(), int64_t(0));
  nn::Tensor<float> x;
  std::vector<int> y;
  SoftQuantizer<float> softq;
  const float gamma = opt.config.gamma, xi = opt.config.xi;
  int64_t step = 0;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    Rng perm = rng.fork(uint64_t(epoch) + 1);
    perm.shuffle(order.begin(), order.end());
    double ce_sum = 0, reg_sum = 0;
    int64_t seen = 0;
    for (int64_t at = 0; at < train.count(); at += opt.batch, ++step) {
      int n = int(std::min<int64_t>(opt.batch, train.count() - at));
      data::fill_batch(train, order.data() + at, n, x, &y);
      if (opt.augment) data::augment_batch(x, rng);

      nn::Tensor<float> m = net.forward(x, true);
      nn::Tensor<float> xt = softq.forward(x, m);
      nn::Tensor<float> z = xt;
      data::normalize_batch(z, stats, opt.config.norm_scale);
      apply_color_jitter(z, xi, rng);

      nn::Tensor<float> logits = clf.forward(z, false);
      auto ce = nn::softmax_cross_entropy(logits, y);
      nn::Tensor<float> reg = diversity_regularizer(m);
      double reg_mean = 0;
      for (int i = 0; i < n; ++i) reg_mean += double(reg.data[size_t(i)]);
      reg_mean /= double(n);
      COLORCNN_CHECK(std::isfinite(ce.loss) && std::isfinite(reg_mean),
                     "non-finite loss at epoch " << epoch << " step " << step
                                                 << ": cross-entropy " << ce.loss
                                                 << ", penalty " << reg_mean << ", lr "
                                                 << sched.lr(step));

      nn::Tensor<float> dz = clf.backward(ce.grad);
      scale_grad_by_norm(dz, stats, opt.config.norm_scale);
      nn::Tensor<float> dm, dx_unused;
      softq.backward(dz, dm, dx_unused);
      nn::Tensor<float> dr({n});
      dr.fill(gamma / float(n));
      diversity_regularizer_backward(m, dr, dm);

      net.zero_grad();
      net.backward(dm);
      sgd.step(float(sched.lr(step)));

      ce_sum += double(ce.loss) * n;
      reg_sum += reg_mean * n;
      seen += n;
    }

    QuantEpochStat st;
    st.epoch = epoch;
    st.ce = ce_sum / double(seen);
    st.reg = reg_sum / double(seen);
    st.loss = st.ce + double(gamma) * st.reg;
    st.val_acc = -1.0;
    bool last = epoch == opt.epochs - 1;
    if (val.count() > 0 && opt.val_every > 0 &&
        ((epoch + 1) % opt.val_every == 0 || last))
      st.val_acc = evaluate_hard(net, clf, val, stats, opt.batch).accuracy;
    log.epochs.push_back(st);
    if (st.val_acc >= 0) log.final_val_acc = st.val_acc;

    if (log_file.is_open()) {
      nlohmann::json j{{"epoch", st.epoch},
                       {"loss", st.loss},
                       {"cross_entropy", st.ce},
                       {"diversity_penalty", st.reg}};
      if (st.val_acc >= 0) j["val_acc"] = st.val_acc;
      log_file << j.dump() << "\n" << std::flush;
    }
  }
  return log;
}

void save_quantizer(const std::string& prefix, models::UNet<float>& net,
                    const QuantizerConfig& cfg, const data::ChannelStats& stats,
                    const std::map<std::string, std::string>& extra) {
  nn::save_module(prefix + ".ckpt", net);
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("bit_depth", std::to_string(cfg.bit_depth));
  kv.emplace_back("gamma", std::to_string(cfg.gamma));
  kv.emplace_back("xi", std::to_string(cfg.xi));
  kv.emplace_back("norm_scale", std::to_string(cfg.norm_scale));
  kv.emplace_back("base_width", std::to_string(net.base_width()));
  std::ostringstream mean, stddev;
  mean << stats.mean[0] << " " << stats.mean[1] << " " << stats.mean[2];
  stddev << stats.stddev[0] << " " << stats.stddev[1] << " " << stats.stddev[2];
  kv.emplace_back("channel_mean", mean.str());
  kv.emplace_back("channel_std", stddev.str());
  for (const auto& [k, v] : extra) kv.emplace_back(k, v);
  nn::write_manifest(prefix + ".manifest", kv);
}

LoadedQuantizer load_quantizer(const std::string& prefix) {
  LoadedQuantizer out;
  out.manifest = nn::read_manifest(prefix + ".manifest");
  auto need = [&](const std::string& k) -> const std::string& {
    auto it = out.manifest.find(k);
    COLORCNN_CHECK(it != out.manifest.end(), "manifest missing key " << k);
    return it->second;
  };
  out.config.bit_depth = std::stoi(need("bit_depth"));
  out.config.gamma = std::stof(need("gamma"));
  out.config.xi = std::stof(need("xi"));
  out.config.norm_scale = std::stof(need("norm_scale"));
  validate(out.config);
  std::istringstream(need("channel_mean")) >> out.stats.mean[0] >> out.stats.mean[1] >>
      out.stats.mean[2];
  std::istringstream(need("channel_std")) >> out.stats.stddev[0] >> out.stats.stddev[1] >>
      out.stats.stddev[2];
  int base = std::stoi(need("base_width"));
  out.net = std::make_unique<models::UNet<float>>(out.config.colors(), base);
  nn::load_module(prefix + ".ckpt", *out.net);
  return out;
}

}  // namespace colorcnn::quant
