#pragma once

#include <cmath>
#include <vector>

#include "colorcnn/core/check.hpp"
#include "colorcnn/nn/tensor.hpp"

namespace colorcnn::nn {

template <typename T>
struct LossResult {
  T loss;
  Tensor<T> grad;  // d loss / d logits
};

// mean cross-entropy over the batch, with log-sum-exp stabilization
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits,
                                    const std::vector<int>& labels) {
  const int n = logits.dim(0), k = logits.dim(1);
  COLORCNN_CHECK(int(labels.size()) == n, "label count != batch size");
  LossResult<T> out{T(0), Tensor<T>(logits.shape)};
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const T* row = logits.ptr() + size_t(i) * k;
    T* grow = out.grad.ptr() + size_t(i) * k;
    COLORCNN_CHECK(labels[i] >= 0 && labels[i] < k, "label out of range");
    T mx = row[0];
    for (int c = 1; c < k; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (int c = 0; c < k; ++c) sum += std::exp(double(row[c] - mx));
    double lse = std::log(sum) + double(mx);
    total += lse - double(row[labels[i]]);
    for (int c = 0; c < k; ++c) {
      double p = std::exp(double(row[c]) - lse);
      grow[c] = T((p - (c == labels[i] ? 1.0 : 0.0)) / double(n));
    }
  }
  out.loss = T(total / double(n));
  return out;
}

template <typename T>
int argmax_row(const T* row, int k) {
  int best = 0;
  for (int c = 1; c < k; ++c)
    if (row[c] > row[best]) best = c;
  return best;
}

template <typename T>
int count_correct(const Tensor<T>& logits, const std::vector<int>& labels) {
  const int n = logits.dim(0), k = logits.dim(1);
  int correct = 0;
  for (int i = 0; i < n; ++i)
    if (argmax_row(logits.ptr() + size_t(i) * k, k) == labels[i]) ++correct;
  return correct;
}

}  // namespace colorcnn::nn
