// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>
#include <string>

#include "nfula/error.hpp"
#include "nfula/flow.hpp"

namespace nfula {

namespace {

void fisher_yates(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i-- > 1;) {
    std::size_t j = rng.uniform_index(i + 1);
    std::swap(idx[i], idx[j]);
  }
}

bool any_actnorm_pending(const FlowModel& model) {
  for (const FlowLayer& layer : model.layers)
    if (const auto* an = std::get_if<ActNorm>(&layer); an && !an->initialized)
      return true;
  return false;
}

}  // namespace

AdamState AdamState::zeros_like(const FlowModel& model) {
  AdamState s;
  for (const Tensor* p : collect_params(model)) {
    s.m.push_back(Tensor(p->shape()));
    s.v.push_back(Tensor(p->shape()));
  }
  return s;
}

TrainingTrace train_flow(FlowModel& model, const std::vector<Tensor>& data,
                         const TrainConfig& cfg, Rng& rng, TrainState* state) {
  if (data.empty()) throw DegenerateInputError("train: dataset must be nonempty");
  if (cfg.batch_size == 0) throw DegenerateInputError("train: batch size must be positive");
  if (cfg.lr < 0.0) throw DegenerateInputError("train: learning rate must be nonnegative");
  for (const Tensor& x : data)
    if (x.size() != model.dim) throw ShapeError("train: sample length != model dimension");

  TrainState local;
  TrainState& st = state ? *state : local;
  if (st.adam.empty()) st.adam = AdamState::zeros_like(model);

  if (any_actnorm_pending(model)) {
    std::size_t n0 = std::min(cfg.batch_size, data.size());
    initialize_actnorm(model, {data.begin(), data.begin() + static_cast<long>(n0)});
  }

  std::vector<Tensor*> params = collect_params(model);
  constexpr double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;

  TrainingTrace trace;
  std::vector<std::size_t> idx(data.size());

  for (std::size_t epoch = st.epochs_done; epoch < cfg.epochs; ++epoch) {
    // shuffle from identity so the epoch order depends only on the rng
    // state entering the epoch; resumed runs then match unbroken ones
    std::iota(idx.begin(), idx.end(), 0);
    fisher_yates(idx, rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < data.size(); start += cfg.batch_size) {
      std::size_t stop = std::min(start + cfg.batch_size, data.size());
      std::vector<Tensor> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        Tensor x = data[idx[i]];
        if (cfg.jitter_sigma > 0.0)
          for (std::size_t k = 0; k < x.size(); ++k)
            x[k] += cfg.jitter_sigma * rng.normal();
        batch.push_back(std::move(x));
      }
      LossAndGrad lg = nll_loss_and_grad(model, batch);
      if (!std::isfinite(lg.loss))
        throw NonFiniteError("training loss diverged at update step " +
                             std::to_string(st.adam.t + 1));
      st.adam.t += 1;
      double c1 = 1.0 - std::pow(b1, static_cast<double>(st.adam.t));
      double c2 = 1.0 - std::pow(b2, static_cast<double>(st.adam.t));
      for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        Tensor& m = st.adam.m[k];
        Tensor& v = st.adam.v[k];
        const Tensor& g = lg.grads[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
          m[i] = b1 * m[i] + (1.0 - b1) * g[i];
          v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
          p[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + adam_eps);
        }
      }
      epoch_loss += lg.loss;
      ++batches;
    }
    trace.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
    st.epochs_done = epoch + 1;
  }
  return trace;
}

}  // namespace nfula
