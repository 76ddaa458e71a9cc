#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "colorcnn/core/check.hpp"
#include "colorcnn/core/rng.hpp"
#include "colorcnn/nn/loss.hpp"
#include "colorcnn/data/datasets.hpp"
#include "colorcnn/eval/harness.hpp"
#include "colorcnn/img/jpeg_codec.hpp"
#include "colorcnn/img/png_codec.hpp"
#include "colorcnn/models/classifiers.hpp"
#include "colorcnn/quantizer/quantizer.hpp"
#include "colorcnn/quantizer/train.hpp"
#include "colorcnn/zoo/zoo.hpp"

namespace fs = std::filesystem;
using namespace colorcnn;

namespace {

data::Dataset load_split(const std::string& dataset, const std::string& split,
                         const std::string& root, int per_class, uint64_t seed) {
  data::Dataset ds = data::load_dataset(dataset, split, root);
  if (per_class > 0) ds = data::subset(ds, per_class, seed);
  return ds;
}

img::RgbImage load_any_image(const std::string& path) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  if (ext == "jpg" || ext == "jpeg") return img::decode_jpeg(img::read_file(path));
  return img::load_image(path);
}

std::vector<eval::Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<eval::Method> out;
  for (const auto& n : names) out.push_back(eval::parse_method(n));
  return out;
}

void print_summary(const std::vector<eval::ResultRecord>& records,
                   const std::string& path) {
  std::ofstream f(path);
  COLORCNN_CHECK(f.good(), "cannot open " << path << " for writing");
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-18s %2s  %9s  %11s  %8s  %8s\n", "method", "d",
                "top-1 (%)", "mean colors", "mean bpp", "seconds");
  f << buf;
  std::fputs(buf, stdout);
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%-18s %2d  %9.2f  %11.2f  %8.3f  %8.1f\n",
                  r.method.c_str(), r.bit_depth, 100 * r.accuracy, r.mean_colors,
                  r.mean_bpp, r.wall_seconds);
    f << buf;
    std::fputs(buf, stdout);
  }
}

// "DEPTH=PREFIX" pairs accumulated across --quantizer flags
std::map<int, std::string> parse_quantizer_map(const std::vector<std::string>& pairs) {
  std::map<int, std::string> out;
  for (const auto& p : pairs) {
    auto eq = p.find('=');
    COLORCNN_CHECK(eq != std::string::npos && eq > 0,
                   "expected DEPTH=PREFIX, got '" << p << "'");
    out[std::stoi(p.substr(0, eq))] = p.substr(eq + 1);
  }
  return out;
}

struct QuantizerCache {
  std::map<int, std::string> prefixes;
  std::map<int, quant::LoadedQuantizer> loaded;

  models::UNet<float>* get(int depth) {
    if (auto it = loaded.find(depth); it != loaded.end()) return it->second.net.get();
    auto pit = prefixes.find(depth);
    COLORCNN_CHECK(pit != prefixes.end(),
                   "no --quantizer entry for bit depth " << depth);
    quant::LoadedQuantizer lq = quant::load_quantizer(pit->second);
    COLORCNN_CHECK(lq.config.bit_depth == depth,
                   "checkpoint " << pit->second << " was trained at d="
                                 << lq.config.bit_depth << ", not d=" << depth);
    auto* net = lq.net.get();
    loaded.emplace(depth, std::move(lq));
    return net;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learned and classical color quantization under a frozen classifier"};
  app.require_subcommand(1);
  app.set_config("--config", "", "options file mirroring the flags; flags win");

  std::string dataset = "cifar10", data_root = "data", out_dir = "runs/out";
  std::string arch = "alexnet", clf_prefix, quant_prefix, input_path, output_path;
  std::string records_path, jpeg_csv;
  std::vector<std::string> method_names{"mediancut", "octree", "colorcnn"};
  std::vector<std::string> quantizer_pairs;
  std::vector<int> depths{1};
  std::vector<int> jpeg_qualities;
  std::string full_prefix, noreg_prefix, nojitter_prefix;
  int epochs = 0, batch = 128, depth = 1, per_class = 0, val_every = 5;
  int base_width = 64, cam_count = 4, probe_epochs = 2, restart_period = 20;
  float lr = 0.0f, gamma = 1.0f, xi = 1.0f, norm_scale = 4.0f;
  uint64_t seed = 1;
  bool no_augment = false, save_images = false;

  auto add_data_opts = [&](CLI::App* c) {
    c->add_option("--dataset", dataset, "cifar10 | cifar100 | stl10 | tiny200");
    c->add_option("--data-root", data_root, "directory holding the dataset archives");
    c->add_option("--subset", per_class, "images per class, 0 keeps the full split");
    c->add_option("--seed", seed, "RNG seed (training, subset sampling)");
  };

  auto* tc = app.add_subcommand("train-classifier",
                                "fit a classifier on clean images; writes "
                                "<out>/classifier.{ckpt,manifest}");
  add_data_opts(tc);
  tc->add_option("--arch", arch, "alexnet | vgg16 | resnet18");
  tc->add_option("--out", out_dir, "output directory")->required();
  tc->add_option("--epochs", epochs, "default 60");
  tc->add_option("--batch", batch, "minibatch size");
  tc->add_option("--lr", lr, "1cycle peak learning rate, default 0.1");
  tc->add_option("--eval-every", val_every, "epochs between test evaluations");
  tc->add_flag("--no-augment", no_augment, "disable crop/flip augmentation");
  tc->callback([&] {
    data::Dataset train = load_split(dataset, "train", data_root, per_class, seed);
    data::Dataset test = data::load_dataset(dataset, "test", data_root);
    data::ChannelStats stats = data::channel_stats(train);
    models::ClassifierSpec spec{models::parse_arch(arch), train.num_classes, train.h};
    auto clf = models::build_classifier<float>(spec);
    zoo::ClassifierTrainOptions opt;
    if (epochs > 0) opt.epochs = epochs;
    if (lr > 0) opt.peak_lr = lr;
    opt.batch = batch;
    opt.seed = seed;
    opt.augment = !no_augment;
    opt.eval_every = val_every;
    opt.out_dir = out_dir;
    fs::create_directories(out_dir);
    data::write_ingest_manifest(train, out_dir + "/ingest-manifest.txt");
    zoo::TrainLog log = zoo::train_classifier(*clf, train, test, stats, opt);
    zoo::save_classifier(out_dir + "/classifier", *clf, stats,
                         {{"dataset", dataset},
                          {"epochs", std::to_string(opt.epochs)},
                          {"seed", std::to_string(seed)}});
    std::printf("final top-1: %.4f\n", log.final_val_acc);
  });

  auto* tq = app.add_subcommand("train-quantizer",
                                "fit the learned quantizer against a frozen "
                                "classifier; writes <out>/quantizer.{ckpt,manifest}");
  add_data_opts(tq);
  tq->add_option("--classifier", clf_prefix, "classifier checkpoint prefix")->required();
  tq->add_option("--out", out_dir, "output directory")->required();
  tq->add_option("--depth", depth, "bit depth, palette size 2^d");
  tq->add_option("--gamma", gamma, "diversity penalty weight");
  tq->add_option("--xi", xi, "training jitter scale");
  tq->add_option("--norm-scale", norm_scale, "std multiplier for classifier input");
  tq->add_option("--base-width", base_width, "channels at the first encoder level");
  tq->add_option("--epochs", epochs, "default 30");
  tq->add_option("--batch", batch, "minibatch size");
  tq->add_option("--lr", lr, "cosine-restart peak learning rate, default 0.01");
  tq->add_option("--restart-period", restart_period, "epochs per cosine cycle");
  tq->add_option("--val-every", val_every, "epochs between hard-pass validations");
  tq->add_flag("--no-augment", no_augment, "disable crop/flip augmentation");
  tq->callback([&] {
    zoo::LoadedClassifier lc = zoo::load_classifier(clf_prefix);
    data::Dataset train = load_split(dataset, "train", data_root, per_class, seed);
    data::Dataset test = data::load_dataset(dataset, "test", data_root);
    quant::QuantizerTrainOptions opt;
    opt.config.bit_depth = depth;
    opt.config.gamma = gamma;
    opt.config.xi = xi;
    opt.config.norm_scale = norm_scale;
    if (epochs > 0) opt.epochs = epochs;
    if (lr > 0) opt.peak_lr = lr;
    opt.batch = batch;
    opt.restart_period = restart_period;
    opt.seed = seed;
    opt.augment = !no_augment;
    opt.val_every = val_every;
    opt.out_dir = out_dir;
    fs::create_directories(out_dir);
    models::UNet<float> net(opt.config.colors(), base_width);
    quant::QuantTrainLog log =
        quant::train_quantizer(net, *lc.clf, train, test, lc.stats, opt);
    quant::save_quantizer(out_dir + "/quantizer", net, opt.config, lc.stats,
                          {{"dataset", dataset},
                           {"classifier", clf_prefix},
                           {"epochs", std::to_string(opt.epochs)},
                           {"seed", std::to_string(seed)}});
    std::printf("final hard-pass top-1: %.4f\n", log.final_val_acc);
  });

  auto* qz = app.add_subcommand("quantize", "quantize one image to an indexed PNG");
  qz->add_option("--input", input_path, "PNG, PPM, or JPEG image")->required();
  qz->add_option("--output", output_path, "indexed PNG path")->required();
  qz->add_option("--method", method_names,
                 "mediancut | octree | mediancut+dither | colorcnn")
      ->expected(1);
  qz->add_option("--depth", depth, "bit depth, palette size 2^d");
  qz->add_option("--quantizer", quant_prefix, "checkpoint prefix (colorcnn only)");
  qz->callback([&] {
    img::RgbImage im = load_any_image(input_path);
    eval::Method m = eval::parse_method(method_names.at(0));
    img::QuantResult qr;
    if (m == eval::Method::kColorCnn) {
      COLORCNN_CHECK(!quant_prefix.empty(), "--quantizer is required for colorcnn");
      quant::LoadedQuantizer lq = quant::load_quantizer(quant_prefix);
      qr = quant::hard_quantize(*lq.net, im, lq.config);
      depth = lq.config.bit_depth;
    } else {
      qr = eval::quantize_classical(m, im, 1 << depth);
    }
    img::save_bytes(output_path, img::encode_indexed_png(qr.index_map, qr.palette));
    std::printf("%s d=%d: %d colors, %.4f bpp, index entropy %.4f bits\n",
                method_names.at(0).c_str(), depth, qr.distinct_colors,
                qr.bits_per_pixel, img::palette_entropy(qr.index_map));
  });

  auto* ev = app.add_subcommand("evaluate",
                                "run the method x depth grid on the test split; "
                                "appends <out>/records.jsonl and resumes");
  add_data_opts(ev);
  ev->add_option("--classifier", clf_prefix, "classifier checkpoint prefix")->required();
  ev->add_option("--out", out_dir, "output directory")->required();
  ev->add_option("--methods", method_names, "subset of the known quantizers")
      ->delimiter(',');
  ev->add_option("--depths", depths, "bit depths, e.g. 1,2,3")->delimiter(',');
  ev->add_option("--quantizer", quantizer_pairs,
                 "DEPTH=PREFIX, repeatable, one per colorcnn depth");
  ev->add_option("--batch", batch, "evaluation batch size");
  ev->add_option("--jpeg-qualities", jpeg_qualities,
                 "also classify JPEG round trips; writes <out>/jpeg-points.csv")
      ->delimiter(',');
  ev->add_flag("--save-images", save_images, "store every quantized test image");
  ev->callback([&] {
    zoo::LoadedClassifier lc = zoo::load_classifier(clf_prefix);
    data::Dataset test = load_split(dataset, "test", data_root, per_class, seed);
    QuantizerCache cache;
    cache.prefixes = parse_quantizer_map(quantizer_pairs);
    eval::GridOptions opt;
    opt.methods = parse_methods(method_names);
    opt.bit_depths = depths;
    opt.out_dir = out_dir;
    opt.batch = batch;
    opt.save_images = save_images;
    auto records = eval::run_grid(
        *lc.clf, lc.stats, test, [&](int d) { return cache.get(d); }, opt);
    print_summary(records, out_dir + "/summary.txt");
    if (!jpeg_qualities.empty()) {
      auto pts = eval::jpeg_reference_points(*lc.clf, test, lc.stats, jpeg_qualities,
                                             batch);
      std::ofstream f(out_dir + "/jpeg-points.csv");
      f << "mean_bpp,accuracy\n";
      for (auto& p : pts) f << p.first << ',' << p.second << '\n';
    }
  });

  auto* ab = app.add_subcommand("ablate",
                                "compare full / no-regularizer / no-jitter "
                                "checkpoints at one depth");
  add_data_opts(ab);
  ab->add_option("--classifier", clf_prefix, "classifier checkpoint prefix")->required();
  ab->add_option("--full", full_prefix, "full variant checkpoint prefix")->required();
  ab->add_option("--no-reg", noreg_prefix, "gamma=0 variant checkpoint prefix")
      ->required();
  ab->add_option("--no-jitter", nojitter_prefix, "xi=0 variant checkpoint prefix")
      ->required();
  ab->add_option("--depth", depth, "bit depth the variants were trained at")
      ->default_val(3);
  ab->add_option("--out", out_dir, "output directory")->required();
  ab->add_option("--batch", batch, "evaluation batch size");
  ab->callback([&] {
    zoo::LoadedClassifier lc = zoo::load_classifier(clf_prefix);
    data::Dataset test = load_split(dataset, "test", data_root, per_class, seed);
    std::vector<std::pair<std::string, std::string>> variants{
        {"full", full_prefix},
        {"no-regularizer", noreg_prefix},
        {"no-jitter", nojitter_prefix}};
    std::vector<eval::ResultRecord> rows;
    for (auto& [label, prefix] : variants) {
      quant::LoadedQuantizer lq = quant::load_quantizer(prefix);
      COLORCNN_CHECK(lq.config.bit_depth == depth,
                     label << " checkpoint is d=" << lq.config.bit_depth
                           << ", expected d=" << depth);
      quant::HardEvalResult r =
          quant::evaluate_hard(*lq.net, *lc.clf, test, lc.stats, batch, true);
      rows.push_back({label, depth, r.accuracy, r.mean_bpp, r.mean_colors, 0});
    }
    fs::create_directories(out_dir);
    const std::string table_path = out_dir + "/ablation.txt";
    eval::ablation_table(rows, table_path);
    std::ifstream f(table_path);
    std::string line;
    while (std::getline(f, line)) std::puts(line.c_str());
  });

  auto* pl = app.add_subcommand("plot", "rate-accuracy curve from a records file");
  pl->add_option("--records", records_path, "records.jsonl from evaluate")->required();
  pl->add_option("--out", out_dir, "output directory")->required();
  pl->add_option("--jpeg", jpeg_csv, "jpeg-points.csv for the dashed reference");
  pl->callback([&] {
    auto records = eval::read_records(records_path);
    COLORCNN_CHECK(!records.empty(), "no records in " << records_path);
    std::vector<std::pair<double, double>> pts;
    if (!jpeg_csv.empty()) {
      std::ifstream f(jpeg_csv);
      COLORCNN_CHECK(f.good(), "cannot read " << jpeg_csv);
      std::string line;
      while (std::getline(f, line)) {
        double b, a;
        if (std::sscanf(line.c_str(), "%lf,%lf", &b, &a) == 2) pts.emplace_back(b, a);
      }
    }
    fs::create_directories(out_dir);
    eval::rate_accuracy_curve(records, pts, out_dir + "/rate-accuracy.svg",
                              out_dir + "/rate-accuracy.csv");
    std::printf("wrote %s/rate-accuracy.{svg,csv}\n", out_dir.c_str());
  });

  auto* cam = app.add_subcommand("cam",
                                 "class-evidence heatmap grid: originals vs "
                                 "quantized versions");
  add_data_opts(cam);
  cam->add_option("--classifier", clf_prefix, "classifier checkpoint prefix")
      ->required();
  cam->add_option("--out", output_path, "grid PNG path")->required();
  cam->add_option("--methods", method_names, "columns after the original")
      ->delimiter(',');
  cam->add_option("--depth", depth, "bit depth for every method");
  cam->add_option("--quantizer", quant_prefix, "checkpoint prefix (colorcnn column)");
  cam->add_option("--count", cam_count, "number of test images (rows)");
  cam->add_option("--probe-epochs", probe_epochs,
                  "pooled-readout training epochs for architectures without one");
  cam->callback([&] {
    zoo::LoadedClassifier lc = zoo::load_classifier(clf_prefix);
    data::Dataset test = data::load_dataset(dataset, "test", data_root);
    Rng rng(seed);
    std::vector<int64_t> order(size_t(test.count()));
    for (size_t i = 0; i < order.size(); ++i) order[i] = int64_t(i);
    rng.shuffle(order.begin(), order.end());
    COLORCNN_CHECK(cam_count >= 1 && int64_t(cam_count) <= test.count(),
                   "--count outside the test split");
    std::vector<img::RgbImage> originals;
    for (int i = 0; i < cam_count; ++i) originals.push_back(test.image(order[size_t(i)]));

    std::unique_ptr<quant::LoadedQuantizer> lq;
    std::vector<std::vector<img::RgbImage>> columns;
    for (const auto& name : method_names) {
      eval::Method m = eval::parse_method(name);
      std::vector<img::RgbImage> col;
      for (const auto& im : originals) {
        if (m == eval::Method::kColorCnn) {
          if (!lq) {
            COLORCNN_CHECK(!quant_prefix.empty(),
                           "--quantizer is required for colorcnn");
            lq = std::make_unique<quant::LoadedQuantizer>(
                quant::load_quantizer(quant_prefix));
            COLORCNN_CHECK(lq->config.bit_depth == depth,
                           "checkpoint is d=" << lq->config.bit_depth
                                              << ", expected d=" << depth);
          }
          col.push_back(quant::hard_quantize(*lq->net, im, lq->config).image);
        } else {
          col.push_back(eval::quantize_classical(m, im, 1 << depth).image);
        }
      }
      columns.push_back(std::move(col));
    }

    nn::Tensor<float> probe;
    const nn::Tensor<float>* probe_ptr = nullptr;
    if (lc.clf->cam_weight() == nullptr) {
      data::Dataset train = load_split(dataset, "train", data_root, per_class, seed);
      probe = zoo::train_cam_probe(*lc.clf, train, lc.stats, probe_epochs, seed);
      probe_ptr = &probe;
    }
    eval::cam_comparison(*lc.clf, lc.stats, originals, method_names, columns,
                         output_path, probe_ptr);

    // agreement with the clean-image heatmap, averaged over rows
    for (size_t mi = 0; mi < method_names.size(); ++mi) {
      double iou = 0;
      for (size_t i = 0; i < originals.size(); ++i) {
        int cls = 0;
        {
          auto x = quant::image_to_tensor(originals[i]);
          data::normalize_batch(x, lc.stats, 1.0f);
          auto logits = lc.clf->forward(x, false);
          cls = nn::argmax_row(logits.ptr(), logits.dim(1));
        }
        auto a = zoo::class_activation_map(*lc.clf, originals[i], cls, lc.stats,
                                           probe_ptr);
        auto b = zoo::class_activation_map(*lc.clf, columns[mi][i], cls, lc.stats,
                                           probe_ptr);
        iou += zoo::top_fraction_iou(a, b, 0.2);
      }
      std::printf("%s: mean top-20%% IoU vs original %.3f\n",
                  method_names[mi].c_str(), iou / double(originals.size()));
    }
    std::printf("wrote %s\n", output_path.c_str());
  });

  try {
    CLI11_PARSE(app, argc, argv);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
