#include <sstream>

#include "colorcnn/nn/serialize.hpp"
#include "colorcnn/zoo/zoo.hpp"

namespace colorcnn::zoo {

void save_classifier(const std::string& prefix, models::Classifier<float>& clf,
                     const data::ChannelStats& stats,
                     const std::map<std::string, std::string>& extra) {
  nn::save_module(prefix + ".ckpt", clf);
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("architecture", models::arch_name(clf.spec().arch));
  kv.emplace_back("num_classes", std::to_string(clf.num_classes()));
  kv.emplace_back("resolution", std::to_string(clf.resolution()));
  std::ostringstream mean, stddev;
  mean << stats.mean[0] << " " << stats.mean[1] << " " << stats.mean[2];
  stddev << stats.stddev[0] << " " << stats.stddev[1] << " " << stats.stddev[2];
  kv.emplace_back("channel_mean", mean.str());
  kv.emplace_back("channel_std", stddev.str());
  for (const auto& [k, v] : extra) kv.emplace_back(k, v);
  nn::write_manifest(prefix + ".manifest", kv);
}

LoadedClassifier load_classifier(const std::string& prefix) {
  LoadedClassifier out;
  out.manifest = nn::read_manifest(prefix + ".manifest");
  auto need = [&](const std::string& k) -> const std::string& {
    auto it = out.manifest.find(k);
    COLORCNN_CHECK(it != out.manifest.end(), "manifest missing key " << k);
    return it->second;
  };
  models::ClassifierSpec spec;
  spec.arch = models::parse_arch(need("architecture"));
  spec.num_classes = std::stoi(need("num_classes"));
  spec.resolution = std::stoi(need("resolution"));
  std::istringstream(need("channel_mean")) >> out.stats.mean[0] >> out.stats.mean[1] >>
      out.stats.mean[2];
  std::istringstream(need("channel_std")) >> out.stats.stddev[0] >> out.stats.stddev[1] >>
      out.stats.stddev[2];
  out.clf = models::build_classifier<float>(spec);
  nn::load_module(prefix + ".ckpt", *out.clf);
  return out;
}

}  // namespace colorcnn::zoo
