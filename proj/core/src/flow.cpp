// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include "nfula/flow.hpp"

#include <cmath>
#include <string>

#include "nfula/error.hpp"
#include "nfula/linalg.hpp"

namespace nfula {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kScaleFloor = 1e-12;

Tensor gather(const Tensor& x, const std::vector<std::size_t>& idx) {
  Tensor out({idx.size()});
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = x[idx[i]];
  return out;
}

void scatter(Tensor& x, const std::vector<std::size_t>& idx, const Tensor& v) {
  for (std::size_t i = 0; i < idx.size(); ++i) x[idx[i]] = v[i];
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace

// MlpSubnet --------------------------------------------------------------

MlpSubnet MlpSubnet::create(std::size_t in, std::size_t out,
                            const std::vector<std::size_t>& hidden, Rng& rng) {
  if (in == 0 || out == 0)
    throw ShapeError("subnet: input and output widths must be positive");
  MlpSubnet net;
  net.widths.push_back(in);
  for (std::size_t h : hidden) {
    if (h == 0) throw ShapeError("subnet: hidden widths must be positive");
    net.widths.push_back(h);
  }
  net.widths.push_back(out);
  std::size_t nl = net.widths.size() - 1;
  for (std::size_t l = 0; l < nl; ++l) {
    std::size_t fan_in = net.widths[l], fan_out = net.widths[l + 1];
    Tensor w({fan_out, fan_in});
    if (l + 1 < nl) {
      double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = sd * rng.normal();
    }
    // else: zero output layer, coupling starts as the identity
    net.weights.push_back(std::move(w));
    net.biases.push_back(Tensor({fan_out}));
  }
  return net;
}

Tensor MlpSubnet::forward(const Tensor& in, std::vector<Tensor>* acts) const {
  if (in.size() != widths.front()) throw ShapeError("subnet: input width mismatch");
  if (acts) {
    acts->clear();
    acts->push_back(in);
  }
  Tensor a = in;
  std::size_t nl = weights.size();
  for (std::size_t l = 0; l < nl; ++l) {
    const Tensor& w = weights[l];
    Tensor next({widths[l + 1]});
    for (std::size_t r = 0; r < widths[l + 1]; ++r) {
      double s = biases[l][r];
      const double* wr = w.data() + r * widths[l];
      for (std::size_t c = 0; c < widths[l]; ++c) s += wr[c] * a[c];
      next[r] = s;
    }
    if (l + 1 < nl)
      for (std::size_t r = 0; r < next.size(); ++r) next[r] = std::max(0.0, next[r]);
    a = std::move(next);
    if (acts && l + 1 < nl) acts->push_back(a);
  }
  return a;
}

Tensor MlpSubnet::backward(const Tensor& d_out, const std::vector<Tensor>& acts,
                           MlpSubnet* grad) const {
  std::size_t nl = weights.size();
  Tensor g = d_out;
  for (std::size_t li = nl; li-- > 0;) {
    const Tensor& a = acts[li];
    if (grad) {
      Tensor& gw = grad->weights[li];
      Tensor& gb = grad->biases[li];
      for (std::size_t r = 0; r < widths[li + 1]; ++r) {
        double gr = g[r];
        gb[r] += gr;
        double* gwr = gw.data() + r * widths[li];
        for (std::size_t c = 0; c < widths[li]; ++c) gwr[c] += gr * a[c];
      }
    }
    Tensor prev({widths[li]});
    const Tensor& w = weights[li];
    for (std::size_t r = 0; r < widths[li + 1]; ++r) {
      double gr = g[r];
      const double* wr = w.data() + r * widths[li];
      for (std::size_t c = 0; c < widths[li]; ++c) prev[c] += gr * wr[c];
    }
    if (li > 0)  // ReLU mask: derivative is 0 where the activation clamped
      for (std::size_t c = 0; c < prev.size(); ++c)
        if (a[c] <= 0.0) prev[c] = 0.0;
    g = std::move(prev);
  }
  return g;
}

MlpSubnet MlpSubnet::zeros_like() const {
  MlpSubnet z = *this;
  for (Tensor& w : z.weights) w *= 0.0;
  for (Tensor& b : z.biases) b *= 0.0;
  return z;
}

// Masks and builders -------------------------------------------------------

CouplingMask CouplingMask::from_mask(std::vector<std::uint8_t> mask) {
  CouplingMask m;
  m.mask = std::move(mask);
  for (std::size_t i = 0; i < m.mask.size(); ++i)
    (m.mask[i] ? m.active : m.passive).push_back(i);
  if (m.active.empty() || m.passive.empty())
    throw DegenerateInputError("coupling mask must have active and passive coordinates");
  return m;
}

CouplingMask CouplingMask::half_split(std::size_t d, bool flip) {
  if (d < 2) throw DegenerateInputError("coupling requires dimension >= 2");
  std::vector<std::uint8_t> mask(d);
  for (std::size_t i = 0; i < d; ++i) mask[i] = ((i >= d / 2) != flip) ? 1 : 0;
  return from_mask(std::move(mask));
}

ActNorm make_actnorm(std::size_t d) {
  ActNorm a;
  a.scale = Tensor::full({d}, 1.0);
  a.bias = Tensor({d});
  a.initialized = true;
  return a;
}

ActNorm make_actnorm_pending(std::size_t d) {
  ActNorm a = make_actnorm(d);
  a.initialized = false;
  return a;
}

std::vector<std::size_t> default_hidden_widths(std::size_t n_passive) {
  std::size_t w = std::max<std::size_t>(32, 2 * n_passive);
  return {w, w};
}

AdditiveCoupling make_additive_coupling(CouplingMask mask,
                                        const std::vector<std::size_t>& hidden,
                                        Rng& rng) {
  AdditiveCoupling c;
  c.subnet = MlpSubnet::create(mask.passive.size(), mask.active.size(),
                               hidden.empty() ? default_hidden_widths(mask.passive.size())
                                              : hidden,
                               rng);
  c.mask = std::move(mask);
  return c;
}

AffineCoupling make_affine_coupling(CouplingMask mask,
                                    const std::vector<std::size_t>& hidden,
                                    Rng& rng) {
  AffineCoupling c;
  const auto& h = hidden.empty() ? default_hidden_widths(mask.passive.size()) : hidden;
  c.scale_subnet = MlpSubnet::create(mask.passive.size(), mask.active.size(), h, rng);
  c.shift_subnet = MlpSubnet::create(mask.passive.size(), mask.active.size(), h, rng);
  c.mask = std::move(mask);
  return c;
}

FlowModel build_coupling_flow(std::size_t d, std::size_t n_couplings,
                              const std::vector<std::size_t>& hidden,
                              bool affine, bool with_actnorm, Rng& rng) {
  FlowModel model;
  model.dim = d;
  for (std::size_t j = 0; j < n_couplings; ++j) {
    if (with_actnorm) model.layers.emplace_back(make_actnorm_pending(d));
    CouplingMask mask = CouplingMask::half_split(d, j % 2 == 1);
    if (affine)
      model.layers.emplace_back(make_affine_coupling(std::move(mask), hidden, rng));
    else
      model.layers.emplace_back(make_additive_coupling(std::move(mask), hidden, rng));
  }
  return model;
}

// Layer passes ---------------------------------------------------------------

namespace {

struct LayerCache {
  Tensor in;
  std::vector<Tensor> acts_a;  // additive subnet / affine scale subnet
  std::vector<Tensor> acts_b;  // affine shift subnet
  Tensor s;                    // affine sigmoid scales
};

// Data -> latent direction of one layer; logdet accumulates this direction.
Tensor apply_g(const FlowLayer& layer, const Tensor& x, double& logdet,
               LayerCache* cache) {
  if (cache) cache->in = x;
  if (const auto* an = std::get_if<ActNorm>(&layer)) {
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = an->scale[i] * y[i] + an->bias[i];
      logdet += std::log(std::abs(an->scale[i]));
    }
    return y;
  }
  if (const auto* pm = std::get_if<Permutation>(&layer)) {
    Tensor y({x.size()});
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[pm->perm[i]];
    return y;
  }
  if (const auto* ac = std::get_if<AdditiveCoupling>(&layer)) {
    Tensor xp = gather(x, ac->mask.passive);
    Tensor eta = ac->subnet.forward(xp, cache ? &cache->acts_a : nullptr);
    Tensor y = x;
    for (std::size_t i = 0; i < ac->mask.active.size(); ++i)
      y[ac->mask.active[i]] += eta[i];
    return y;
  }
  const auto& fc = std::get<AffineCoupling>(layer);
  Tensor xp = gather(x, fc.mask.passive);
  Tensor raw = fc.scale_subnet.forward(xp, cache ? &cache->acts_a : nullptr);
  Tensor t = fc.shift_subnet.forward(xp, cache ? &cache->acts_b : nullptr);
  Tensor s({raw.size()});
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = sigmoid(raw[i] + 2.0);
  Tensor y = x;
  for (std::size_t i = 0; i < fc.mask.active.size(); ++i) {
    y[fc.mask.active[i]] = s[i] * x[fc.mask.active[i]] + t[i];
    logdet += std::log(s[i]);
  }
  if (cache) cache->s = std::move(s);
  return y;
}

// Latent -> data direction; logdet (when wanted) accumulates that
// direction, i.e. the negative of apply_g's contribution.
Tensor apply_g_inverse(const FlowLayer& layer, const Tensor& y, double* logdet) {
  if (const auto* an = std::get_if<ActNorm>(&layer)) {
    Tensor x = y;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (std::abs(an->scale[i]) < kScaleFloor)
        throw DegenerateInputError("actnorm scale is singular");
      x[i] = (x[i] - an->bias[i]) / an->scale[i];
      if (logdet) *logdet -= std::log(std::abs(an->scale[i]));
    }
    return x;
  }
  if (const auto* pm = std::get_if<Permutation>(&layer)) {
    Tensor x({y.size()});
    for (std::size_t i = 0; i < y.size(); ++i) x[pm->perm[i]] = y[i];
    return x;
  }
  if (const auto* ac = std::get_if<AdditiveCoupling>(&layer)) {
    Tensor xp = gather(y, ac->mask.passive);
    Tensor eta = ac->subnet.forward(xp);
    Tensor x = y;
    for (std::size_t i = 0; i < ac->mask.active.size(); ++i)
      x[ac->mask.active[i]] -= eta[i];
    return x;
  }
  const auto& fc = std::get<AffineCoupling>(layer);
  Tensor xp = gather(y, fc.mask.passive);
  Tensor raw = fc.scale_subnet.forward(xp);
  Tensor t = fc.shift_subnet.forward(xp);
  Tensor x = y;
  for (std::size_t i = 0; i < fc.mask.active.size(); ++i) {
    double s = sigmoid(raw[i] + 2.0);
    if (s < kScaleFloor) throw DegenerateInputError("affine scale is singular");
    x[fc.mask.active[i]] = (x[fc.mask.active[i]] - t[i]) / s;
    if (logdet) *logdet -= std::log(s);
  }
  return x;
}

struct LayerGrads {
  ActNorm* an = nullptr;
  AdditiveCoupling* ac = nullptr;
  AffineCoupling* fc = nullptr;
};

LayerGrads grads_of(FlowLayer* gl) {
  LayerGrads g;
  if (!gl) return g;
  g.an = std::get_if<ActNorm>(gl);
  g.ac = std::get_if<AdditiveCoupling>(gl);
  g.fc = std::get_if<AffineCoupling>(gl);
  return g;
}

// Pull (d_y, d_logdet) back through one layer of the data->latent pass;
// optionally accumulates parameter gradients into *grad_layer.
Tensor backward_g(const FlowLayer& layer, const LayerCache& cache, const Tensor& d_y,
                  double d_logdet, FlowLayer* grad_layer) {
  LayerGrads g = grads_of(grad_layer);
  if (const auto* an = std::get_if<ActNorm>(&layer)) {
    Tensor d_x = d_y;
    for (std::size_t i = 0; i < d_x.size(); ++i) {
      if (g.an) {
        g.an->scale[i] += d_y[i] * cache.in[i] + d_logdet / an->scale[i];
        g.an->bias[i] += d_y[i];
      }
      d_x[i] *= an->scale[i];
    }
    return d_x;
  }
  if (const auto* pm = std::get_if<Permutation>(&layer)) {
    Tensor d_x({d_y.size()});
    for (std::size_t i = 0; i < d_y.size(); ++i) d_x[pm->perm[i]] = d_y[i];
    return d_x;
  }
  if (const auto* ac = std::get_if<AdditiveCoupling>(&layer)) {
    Tensor d_a = gather(d_y, ac->mask.active);
    Tensor d_in = ac->subnet.backward(d_a, cache.acts_a, g.ac ? &g.ac->subnet : nullptr);
    Tensor d_x = d_y;
    for (std::size_t i = 0; i < ac->mask.passive.size(); ++i)
      d_x[ac->mask.passive[i]] += d_in[i];
    return d_x;
  }
  const auto& fc = std::get<AffineCoupling>(layer);
  Tensor d_a = gather(d_y, fc.mask.active);
  const Tensor& s = cache.s;
  Tensor x_a = gather(cache.in, fc.mask.active);
  Tensor d_raw({s.size()});
  for (std::size_t i = 0; i < s.size(); ++i) {
    double d_s = d_a[i] * x_a[i] + d_logdet / s[i];
    d_raw[i] = d_s * s[i] * (1.0 - s[i]);
  }
  Tensor d_in =
      fc.scale_subnet.backward(d_raw, cache.acts_a, g.fc ? &g.fc->scale_subnet : nullptr);
  Tensor d_in2 =
      fc.shift_subnet.backward(d_a, cache.acts_b, g.fc ? &g.fc->shift_subnet : nullptr);
  d_in += d_in2;
  Tensor d_x = d_y;
  for (std::size_t i = 0; i < fc.mask.active.size(); ++i)
    d_x[fc.mask.active[i]] = d_a[i] * s[i];
  for (std::size_t i = 0; i < fc.mask.passive.size(); ++i)
    d_x[fc.mask.passive[i]] += d_in[i];
  return d_x;
}

std::pair<Tensor, double> inverse_cached(const FlowModel& model, const Tensor& x,
                                         std::vector<LayerCache>* caches) {
  if (x.size() != model.dim) throw ShapeError("flow: input length != model dimension");
  if (caches) caches->resize(model.layers.size());
  Tensor z = x;
  double logdet = 0.0;
  for (std::size_t li = 0; li < model.layers.size(); ++li)
    z = apply_g(model.layers[li], z, logdet, caches ? &(*caches)[li] : nullptr);
  if (!z.all_finite() || !std::isfinite(logdet))
    throw NonFiniteError("flow inverse produced a non-finite value");
  return {std::move(z), logdet};
}

FlowModel zeros_like_model(const FlowModel& model) {
  FlowModel z = model;
  for (Tensor* p : collect_params(z)) *p *= 0.0;
  return z;
}

}  // namespace

std::pair<Tensor, double> flow_inverse(const FlowModel& model, const Tensor& x) {
  return inverse_cached(model, x, nullptr);
}

Tensor flow_forward(const FlowModel& model, const Tensor& z) {
  return flow_forward_logdet(model, z).first;
}

std::pair<Tensor, double> flow_forward_logdet(const FlowModel& model, const Tensor& z) {
  if (z.size() != model.dim) throw ShapeError("flow: input length != model dimension");
  Tensor x = z;
  double logdet = 0.0;
  for (std::size_t li = model.layers.size(); li-- > 0;)
    x = apply_g_inverse(model.layers[li], x, &logdet);
  if (!x.all_finite() || !std::isfinite(logdet))
    throw NonFiniteError("flow forward produced a non-finite value");
  return {std::move(x), logdet};
}

double log_density(const FlowModel& model, const Tensor& x) {
  auto [z, logdet] = flow_inverse(model, x);
  return -0.5 * dot(z, z) - 0.5 * static_cast<double>(model.dim) * kLog2Pi + logdet;
}

Tensor grad_log_density(const FlowModel& model, const Tensor& x) {
  std::vector<LayerCache> caches;
  auto [z, logdet] = inverse_cached(model, x, &caches);
  (void)logdet;
  Tensor d = z;
  d *= -1.0;  // d(-||z||^2/2)/dz
  for (std::size_t li = model.layers.size(); li-- > 0;)
    d = backward_g(model.layers[li], caches[li], d, 1.0, nullptr);
  return d;
}

std::vector<Tensor*> collect_params(FlowModel& model) {
  std::vector<Tensor*> out;
  for (FlowLayer& layer : model.layers) {
    if (auto* an = std::get_if<ActNorm>(&layer)) {
      out.push_back(&an->scale);
      out.push_back(&an->bias);
    } else if (auto* ac = std::get_if<AdditiveCoupling>(&layer)) {
      for (std::size_t l = 0; l < ac->subnet.weights.size(); ++l) {
        out.push_back(&ac->subnet.weights[l]);
        out.push_back(&ac->subnet.biases[l]);
      }
    } else if (auto* fc = std::get_if<AffineCoupling>(&layer)) {
      for (std::size_t l = 0; l < fc->scale_subnet.weights.size(); ++l) {
        out.push_back(&fc->scale_subnet.weights[l]);
        out.push_back(&fc->scale_subnet.biases[l]);
      }
      for (std::size_t l = 0; l < fc->shift_subnet.weights.size(); ++l) {
        out.push_back(&fc->shift_subnet.weights[l]);
        out.push_back(&fc->shift_subnet.biases[l]);
      }
    }
  }
  return out;
}

std::vector<const Tensor*> collect_params(const FlowModel& model) {
  std::vector<Tensor*> p = collect_params(const_cast<FlowModel&>(model));
  return {p.begin(), p.end()};
}

std::vector<std::string> param_names(const FlowModel& model) {
  std::vector<std::string> names;
  auto subnet_names = [&](const std::string& prefix, const MlpSubnet& net) {
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      names.push_back(prefix + "/w" + std::to_string(l));
      names.push_back(prefix + "/b" + std::to_string(l));
    }
  };
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    std::string base = "layer" + std::to_string(li);
    const FlowLayer& layer = model.layers[li];
    if (std::holds_alternative<ActNorm>(layer)) {
      names.push_back(base + "/actnorm/scale");
      names.push_back(base + "/actnorm/bias");
    } else if (const auto* ac = std::get_if<AdditiveCoupling>(&layer)) {
      subnet_names(base + "/additive/subnet", ac->subnet);
    } else if (const auto* fc = std::get_if<AffineCoupling>(&layer)) {
      subnet_names(base + "/affine/scale_subnet", fc->scale_subnet);
      subnet_names(base + "/affine/shift_subnet", fc->shift_subnet);
    }
  }
  return names;
}

LossAndGrad nll_loss_and_grad(const FlowModel& model, const std::vector<Tensor>& batch) {
  if (batch.empty()) throw DegenerateInputError("nll: batch must be nonempty");
  FlowModel grad_model = zeros_like_model(model);
  double loss = 0.0;
  double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<LayerCache> caches;
  for (const Tensor& x : batch) {
    auto [z, logdet] = inverse_cached(model, x, &caches);
    loss += inv_n * (0.5 * dot(z, z) +
                     0.5 * static_cast<double>(model.dim) * kLog2Pi - logdet);
    // d(loss_i)/dz = z / N, d(loss_i)/dlogdet = -1/N
    Tensor d = z;
    d *= inv_n;
    for (std::size_t li = model.layers.size(); li-- > 0;)
      d = backward_g(model.layers[li], caches[li], d, -inv_n, &grad_model.layers[li]);
  }
  LossAndGrad out;
  out.loss = loss;
  for (Tensor* g : collect_params(grad_model)) out.grads.push_back(*g);
  return out;
}

CertificationReport certify_lipschitz(const FlowModel& model) {
  CertificationReport report;
  report.certified = true;
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    const FlowLayer& layer = model.layers[li];
    std::string tag = "layer " + std::to_string(li) + ": ";
    if (std::holds_alternative<ActNorm>(layer)) {
      report.reasons.push_back(tag + "actnorm, constant scale: ok");
    } else if (std::holds_alternative<Permutation>(layer)) {
      report.reasons.push_back(tag + "permutation, volume preserving: ok");
    } else if (std::holds_alternative<AdditiveCoupling>(layer)) {
      report.reasons.push_back(
          tag + "additive coupling, relu subnet has piecewise-constant jacobian: ok");
    } else {
      report.reasons.push_back(
          tag + "affine coupling, input-dependent sigmoid scale: no global certificate");
      report.certified = false;
    }
  }
  return report;
}

double empirical_hessian_bound(const FlowModel& model, const std::vector<Tensor>& probes,
                               double fd_step, Rng& rng) {
  if (probes.empty()) throw DegenerateInputError("hessian bound: probes must be nonempty");
  if (!(fd_step > 0.0)) throw DegenerateInputError("hessian bound: fd_step must be positive");
  double bound = 0.0;
  for (const Tensor& p : probes) {
    LinearMap hvp = [&](const Tensor& v) {
      Tensor xp = p, xm = p;
      axpy(fd_step, v, xp);
      axpy(-fd_step, v, xm);
      Tensor g = grad_log_density(model, xp);
      g -= grad_log_density(model, xm);
      g *= 1.0 / (2.0 * fd_step);
      return g;
    };
    bound = std::max(bound,
                     power_iteration_spectral_norm(hvp, hvp, model.dim, rng, 2000, 1e-7));
  }
  return bound;
}

void initialize_actnorm(FlowModel& model, const std::vector<Tensor>& batch) {
  if (batch.empty()) throw DegenerateInputError("actnorm init: batch must be nonempty");
  std::vector<Tensor> cur = batch;
  for (FlowLayer& layer : model.layers) {
    if (auto* an = std::get_if<ActNorm>(&layer); an && !an->initialized) {
      std::size_t d = an->scale.size();
      double n = static_cast<double>(cur.size());
      for (std::size_t i = 0; i < d; ++i) {
        double mean = 0.0, m2 = 0.0;
        for (const Tensor& x : cur) mean += x[i];
        mean /= n;
        for (const Tensor& x : cur) m2 += (x[i] - mean) * (x[i] - mean);
        double sd = std::sqrt(m2 / n);
        an->scale[i] = 1.0 / (sd + 1e-6);
        an->bias[i] = -mean * an->scale[i];
      }
      an->initialized = true;
    }
    double ld = 0.0;
    for (Tensor& x : cur) x = apply_g(layer, x, ld, nullptr);
  }
}

}  // namespace nfula
