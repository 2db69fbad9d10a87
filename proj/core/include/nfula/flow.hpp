// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nfula/rng.hpp"
#include "nfula/tensor.hpp"

namespace nfula {

// Fully connected net, ReLU on hidden layers, identity output. The last
// linear layer is zero-initialized so a fresh coupling starts as the
// identity map.
struct MlpSubnet {
  std::vector<std::size_t> widths;  // {in, hidden..., out}
  std::vector<Tensor> weights;      // weights[l]: {widths[l+1], widths[l]}
  std::vector<Tensor> biases;       // biases[l]: {widths[l+1]}

  static MlpSubnet create(std::size_t in, std::size_t out,
                          const std::vector<std::size_t>& hidden, Rng& rng);

  // acts, when given, receives {input, hidden activations...}; the cache
  // backward() needs.
  Tensor forward(const Tensor& in, std::vector<Tensor>* acts = nullptr) const;

  // Vector-Jacobian product w.r.t. the input; accumulates parameter
  // gradients into `grad` (same shapes as *this) when grad != nullptr.
  Tensor backward(const Tensor& d_out, const std::vector<Tensor>& acts,
                  MlpSubnet* grad) const;

  MlpSubnet zeros_like() const;
};

struct ActNorm {
  Tensor scale;  // entries must stay away from zero
  Tensor bias;
  // Data-dependent initialization is pending until the first training
  // batch reaches this layer.
  bool initialized = true;
};

struct Permutation {
  std::vector<std::size_t> perm;  // y[i] = x[perm[i]]
};

// Active coordinates are rewritten from the passive ones; the split is a
// triangular map up to a permutation.
struct CouplingMask {
  std::vector<std::uint8_t> mask;      // 1 = active, 0 = passive
  std::vector<std::size_t> active;     // derived index lists
  std::vector<std::size_t> passive;

  static CouplingMask from_mask(std::vector<std::uint8_t> mask);
  // Alternating half/half split; parity flips the halves.
  static CouplingMask half_split(std::size_t d, bool flip);
};

// y_active = x_active + subnet(x_passive); volume preserving.
struct AdditiveCoupling {
  CouplingMask mask;
  MlpSubnet subnet;
};

// y_active = s .* x_active + shift(x_passive) with
// s = sigmoid(scale_subnet(x_passive) + 2); the input-dependent scale
// breaks the global Lipschitz certificate.
struct AffineCoupling {
  CouplingMask mask;
  MlpSubnet scale_subnet;
  MlpSubnet shift_subnet;
};

using FlowLayer = std::variant<ActNorm, Permutation, AdditiveCoupling, AffineCoupling>;

// Layers are listed x-side first: mapping data x to latent z applies them
// in order; sampling applies the layer inverses in reverse order. The base
// distribution is the standard normal on R^d.
struct FlowModel {
  std::size_t dim = 0;
  std::vector<FlowLayer> layers;
};

// Builders.
ActNorm make_actnorm(std::size_t d);                 // s=1, b=0, initialized
ActNorm make_actnorm_pending(std::size_t d);         // awaits first batch
AdditiveCoupling make_additive_coupling(CouplingMask mask,
                                        const std::vector<std::size_t>& hidden,
                                        Rng& rng);
AffineCoupling make_affine_coupling(CouplingMask mask,
                                    const std::vector<std::size_t>& hidden,
                                    Rng& rng);
// Subnet hidden widths used when none are requested explicitly:
// two layers of max(32, 2 * n_passive).
std::vector<std::size_t> default_hidden_widths(std::size_t n_passive);

// Stack of n_couplings alternating-mask couplings, each preceded by an
// ActNorm pending data init when with_actnorm is set.
FlowModel build_coupling_flow(std::size_t d, std::size_t n_couplings,
                              const std::vector<std::size_t>& hidden,
                              bool affine, bool with_actnorm, Rng& rng);

// Data -> latent. Returns z and log|det J| of this direction.
std::pair<Tensor, double> flow_inverse(const FlowModel& model, const Tensor& x);

// Latent -> data; exact inverse of flow_inverse.
Tensor flow_forward(const FlowModel& model, const Tensor& z);

// Latent -> data, also accumulating log|det J| of this direction
// (the negative of the flow_inverse logdet along the same orbit).
std::pair<Tensor, double> flow_forward_logdet(const FlowModel& model, const Tensor& z);

double log_density(const FlowModel& model, const Tensor& x);

// Reverse-mode pullback of the density through the data->latent pass.
Tensor grad_log_density(const FlowModel& model, const Tensor& x);

// Canonical parameter enumeration (trainable tensors only, layer order).
std::vector<Tensor*> collect_params(FlowModel& model);
std::vector<const Tensor*> collect_params(const FlowModel& model);
std::vector<std::string> param_names(const FlowModel& model);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<Tensor> grads;  // aligned with collect_params
};

// Mean negative log density over the batch (constants kept so values are
// comparable across models) and its exact parameter gradient.
LossAndGrad nll_loss_and_grad(const FlowModel& model, const std::vector<Tensor>& batch);

struct CertificationReport {
  bool certified = false;
  std::vector<std::string> reasons;  // one verdict per layer
  double empirical_hessian_bound = 0.0;
};

// Structural check: the density gradient is globally Lipschitz when every
// coupling is additive with ReLU-only subnets and every scale is a
// constant (ActNorm); permutations are harmless. Any affine coupling
// voids the certificate.
CertificationReport certify_lipschitz(const FlowModel& model);

// Max over probes of the spectral norm of the density Hessian, using
// central-difference Hessian-vector products and power iteration.
double empirical_hessian_bound(const FlowModel& model, const std::vector<Tensor>& probes,
                               double fd_step, Rng& rng);

// Training -----------------------------------------------------------------

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  double jitter_sigma = 1.0 / 255.0;  // Gaussian dequantization noise
};

struct TrainingTrace {
  std::vector<double> epoch_loss;  // mean minibatch loss per epoch
};

struct AdamState {
  std::vector<Tensor> m, v;  // aligned with collect_params
  std::uint64_t t = 0;

  static AdamState zeros_like(const FlowModel& model);
  bool empty() const { return m.empty(); }
};

struct TrainState {
  AdamState adam;
  std::uint64_t epochs_done = 0;
};

// Adam (beta1=0.9, beta2=0.999, eps=1e-8) over shuffled minibatches with
// per-sample Gaussian jitter. Pending ActNorm layers are initialized from
// the first batch. Resuming with the recorded TrainState and an Rng
// restored to the recorded counter reproduces an unbroken run bit for bit.
// Throws NonFiniteError (with the step index) if the loss degenerates.
TrainingTrace train_flow(FlowModel& model, const std::vector<Tensor>& data,
                         const TrainConfig& cfg, Rng& rng,
                         TrainState* state = nullptr);

// Initialize all pending ActNorm layers from batch statistics
// (s = 1/std, b = -mean/std per coordinate, with a small epsilon guard).
void initialize_actnorm(FlowModel& model, const std::vector<Tensor>& batch);

}  // namespace nfula
