// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include "nfula/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "nfula/error.hpp"

namespace nfula {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw ParseError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw ParseError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_entry(std::ostream& out, const std::string& name, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u32(out, static_cast<std::uint32_t>(t.ndim()));
  for (std::size_t e : t.shape()) put_u64(out, e);
  for (std::size_t i = 0; i < t.size(); ++i)
    put_u64(out, std::bit_cast<std::uint64_t>(t[i]));
}

// u64 values (seeds, counters) are stored as two exact 32-bit halves so
// the payload stays plain finite doubles.
Tensor split_u64(std::uint64_t v) {
  return Tensor({2}, {static_cast<double>(v >> 32),
                      static_cast<double>(v & 0xFFFFFFFFULL)});
}

std::uint64_t join_u64(const Tensor& t) {
  if (t.size() != 2) throw ParseError("checkpoint: bad u64 field shape");
  return (static_cast<std::uint64_t>(t[0]) << 32) | static_cast<std::uint64_t>(t[1]);
}

Tensor scalar(double v) { return Tensor({1}, {v}); }

using EntryMap = std::map<std::string, Tensor>;

const Tensor& need(const EntryMap& m, const std::string& name) {
  auto it = m.find(name);
  if (it == m.end()) throw ParseError("checkpoint: missing entry " + name);
  return it->second;
}

MlpSubnet load_subnet(const EntryMap& m, const std::string& prefix) {
  MlpSubnet net;
  for (std::size_t l = 0;; ++l) {
    auto itw = m.find(prefix + "/w" + std::to_string(l));
    if (itw == m.end()) break;
    const Tensor& w = itw->second;
    const Tensor& b = need(m, prefix + "/b" + std::to_string(l));
    if (w.ndim() != 2 || b.size() != w.rows())
      throw ParseError("checkpoint: inconsistent subnet shapes under " + prefix);
    if (l == 0) net.widths.push_back(w.cols());
    if (net.widths.back() != w.cols())
      throw ParseError("checkpoint: subnet width chain broken under " + prefix);
    net.widths.push_back(w.rows());
    net.weights.push_back(w);
    net.biases.push_back(b);
  }
  if (net.weights.empty()) throw ParseError("checkpoint: no layers under " + prefix);
  return net;
}

CouplingMask load_mask(const Tensor& t) {
  std::vector<std::uint8_t> mask(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] != 0.0 && t[i] != 1.0) throw ParseError("checkpoint: mask entries must be 0/1");
    mask[i] = static_cast<std::uint8_t>(t[i]);
  }
  return CouplingMask::from_mask(std::move(mask));
}

}  // namespace

void save_checkpoint(const std::string& path, const FlowModel& model,
                     const TrainState* train, const Rng* rng) {
  std::ostringstream body;
  std::uint32_t count = 0;
  auto emit = [&](const std::string& name, const Tensor& t) {
    write_entry(body, name, t);
    ++count;
  };

  emit("meta/dim", scalar(static_cast<double>(model.dim)));
  emit("meta/n_layers", scalar(static_cast<double>(model.layers.size())));
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    std::string base = "layer" + std::to_string(li);
    const FlowLayer& layer = model.layers[li];
    if (const auto* an = std::get_if<ActNorm>(&layer)) {
      emit(base + "/kind", scalar(0));
      emit(base + "/actnorm/scale", an->scale);
      emit(base + "/actnorm/bias", an->bias);
      emit(base + "/actnorm/initialized", scalar(an->initialized ? 1.0 : 0.0));
    } else if (const auto* pm = std::get_if<Permutation>(&layer)) {
      emit(base + "/kind", scalar(1));
      Tensor p({pm->perm.size()});
      for (std::size_t i = 0; i < pm->perm.size(); ++i)
        p[i] = static_cast<double>(pm->perm[i]);
      emit(base + "/permutation/perm", p);
    } else if (const auto* ac = std::get_if<AdditiveCoupling>(&layer)) {
      emit(base + "/kind", scalar(2));
      Tensor mk({ac->mask.mask.size()});
      for (std::size_t i = 0; i < mk.size(); ++i) mk[i] = ac->mask.mask[i];
      emit(base + "/additive/mask", mk);
      for (std::size_t l = 0; l < ac->subnet.weights.size(); ++l) {
        emit(base + "/additive/subnet/w" + std::to_string(l), ac->subnet.weights[l]);
        emit(base + "/additive/subnet/b" + std::to_string(l), ac->subnet.biases[l]);
      }
    } else {
      const auto& fc = std::get<AffineCoupling>(layer);
      emit(base + "/kind", scalar(3));
      Tensor mk({fc.mask.mask.size()});
      for (std::size_t i = 0; i < mk.size(); ++i) mk[i] = fc.mask.mask[i];
      emit(base + "/affine/mask", mk);
      for (std::size_t l = 0; l < fc.scale_subnet.weights.size(); ++l) {
        emit(base + "/affine/scale_subnet/w" + std::to_string(l), fc.scale_subnet.weights[l]);
        emit(base + "/affine/scale_subnet/b" + std::to_string(l), fc.scale_subnet.biases[l]);
      }
      for (std::size_t l = 0; l < fc.shift_subnet.weights.size(); ++l) {
        emit(base + "/affine/shift_subnet/w" + std::to_string(l), fc.shift_subnet.weights[l]);
        emit(base + "/affine/shift_subnet/b" + std::to_string(l), fc.shift_subnet.biases[l]);
      }
    }
  }

  if (train) {
    emit("train/epochs_done", split_u64(train->epochs_done));
    emit("train/adam_t", split_u64(train->adam.t));
    std::vector<std::string> names = param_names(model);
    if (!train->adam.empty()) {
      if (train->adam.m.size() != names.size())
        throw ShapeError("checkpoint: adam state does not match model parameters");
      for (std::size_t k = 0; k < names.size(); ++k) {
        emit("train/adam/m/" + names[k], train->adam.m[k]);
        emit("train/adam/v/" + names[k], train->adam.v[k]);
      }
    }
  }
  if (rng) {
    emit("train/rng_seed", split_u64(rng->seed()));
    emit("train/rng_stream", split_u64(rng->stream()));
    emit("train/rng_counter", split_u64(rng->counter()));
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write("NFCK", 4);
  put_u32(f, 1);  // version
  put_u32(f, count);
  std::string s = body.str();
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!f) throw IoError("checkpoint write failed: " + path);
}

FlowCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path);
  char magic[4];
  if (!f.read(magic, 4) || std::memcmp(magic, "NFCK", 4) != 0)
    throw ParseError("checkpoint: bad magic, expected NFCK");
  std::uint32_t version = get_u32(f);
  if (version != 1) throw ParseError("checkpoint: unsupported version");
  std::uint32_t count = get_u32(f);

  EntryMap entries;
  for (std::uint32_t e = 0; e < count; ++e) {
    std::uint32_t name_len = get_u32(f);
    if (name_len == 0 || name_len > 4096) throw ParseError("checkpoint: bad name length");
    std::string name(name_len, '\0');
    if (!f.read(name.data(), name_len)) throw ParseError("checkpoint truncated");
    std::uint32_t ndim = get_u32(f);
    if (ndim == 0 || ndim > 8) throw ParseError("checkpoint: bad tensor rank");
    std::vector<std::size_t> shape(ndim);
    std::size_t total = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
      std::uint64_t ext = get_u64(f);
      if (ext == 0 || total > (1ull << 40) / ext)
        throw ParseError("checkpoint: bad tensor extent");
      shape[i] = static_cast<std::size_t>(ext);
      total *= shape[i];
    }
    std::vector<double> vals(total);
    for (std::size_t i = 0; i < total; ++i)
      vals[i] = std::bit_cast<double>(get_u64(f));
    Tensor t(std::move(shape), std::move(vals));
    t.require_finite(("checkpoint entry " + name).c_str());
    if (!entries.emplace(std::move(name), std::move(t)).second)
      throw ParseError("checkpoint: duplicate entry name");
  }

  FlowCheckpoint ck;
  ck.model.dim = static_cast<std::size_t>(need(entries, "meta/dim")[0]);
  std::size_t n_layers = static_cast<std::size_t>(need(entries, "meta/n_layers")[0]);
  for (std::size_t li = 0; li < n_layers; ++li) {
    std::string base = "layer" + std::to_string(li);
    int kind = static_cast<int>(need(entries, base + "/kind")[0]);
    if (kind == 0) {
      ActNorm an;
      an.scale = need(entries, base + "/actnorm/scale");
      an.bias = need(entries, base + "/actnorm/bias");
      an.initialized = need(entries, base + "/actnorm/initialized")[0] != 0.0;
      if (!an.scale.same_shape(an.bias))
        throw ParseError("checkpoint: actnorm scale/bias shape mismatch");
      for (std::size_t i = 0; i < an.scale.size(); ++i)
        if (an.scale[i] == 0.0) throw ParseError("checkpoint: zero actnorm scale");
      ck.model.layers.emplace_back(std::move(an));
    } else if (kind == 1) {
      const Tensor& p = need(entries, base + "/permutation/perm");
      Permutation pm;
      std::vector<bool> seen(p.size(), false);
      for (std::size_t i = 0; i < p.size(); ++i) {
        auto v = static_cast<std::size_t>(p[i]);
        if (v >= p.size() || seen[v]) throw ParseError("checkpoint: permutation not a bijection");
        seen[v] = true;
        pm.perm.push_back(v);
      }
      ck.model.layers.emplace_back(std::move(pm));
    } else if (kind == 2) {
      AdditiveCoupling ac;
      ac.mask = load_mask(need(entries, base + "/additive/mask"));
      ac.subnet = load_subnet(entries, base + "/additive/subnet");
      if (ac.subnet.widths.front() != ac.mask.passive.size() ||
          ac.subnet.widths.back() != ac.mask.active.size())
        throw ParseError("checkpoint: coupling subnet widths do not match mask");
      ck.model.layers.emplace_back(std::move(ac));
    } else if (kind == 3) {
      AffineCoupling fc;
      fc.mask = load_mask(need(entries, base + "/affine/mask"));
      fc.scale_subnet = load_subnet(entries, base + "/affine/scale_subnet");
      fc.shift_subnet = load_subnet(entries, base + "/affine/shift_subnet");
      ck.model.layers.emplace_back(std::move(fc));
    } else {
      throw ParseError("checkpoint: unknown layer kind");
    }
  }

  if (entries.count("train/adam_t")) {
    ck.has_train_state = true;
    ck.train.epochs_done = join_u64(need(entries, "train/epochs_done"));
    ck.train.adam.t = join_u64(need(entries, "train/adam_t"));
    std::vector<std::string> names = param_names(ck.model);
    if (entries.count("train/adam/m/" + names.front())) {
      for (const std::string& n : names) {
        ck.train.adam.m.push_back(need(entries, "train/adam/m/" + n));
        ck.train.adam.v.push_back(need(entries, "train/adam/v/" + n));
      }
    }
  }
  if (entries.count("train/rng_seed")) {
    ck.rng_seed = join_u64(need(entries, "train/rng_seed"));
    ck.rng_stream = join_u64(need(entries, "train/rng_stream"));
    ck.rng_counter = join_u64(need(entries, "train/rng_counter"));
  }
  return ck;
}

}  // namespace nfula
