// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include "oracles.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "nfula/error.hpp"

namespace nfula::test {

namespace fs = std::filesystem;

Tensor dense_from_operator(const ForwardOperator& op) {
  std::size_t n = op.input_size();
  std::size_t m = op.output_size();
  Tensor a({m, n});
  Tensor e(std::vector<std::size_t>{n});
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    Tensor col = op.apply(e.reshaped(op.input_shape()));
    for (std::size_t i = 0; i < m; ++i) a.at(i, j) = col[i];
    e[j] = 0.0;
  }
  return a;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t l = 0; l < k; ++l) {
      double av = a.at(i, l);
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out.at(i, j) += av * b.at(l, j);
    }
  return out;
}

Tensor transpose(const Tensor& a) {
  Tensor out({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor sym_ata(const Tensor& a) { return matmul(transpose(a), a); }

std::vector<double> jacobi_eigenvalues(Tensor sym) {
  std::size_t n = sym.rows();
  double off = 0.0, total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      total += sym.at(i, j) * sym.at(i, j);
      if (i != j) off += sym.at(i, j) * sym.at(i, j);
    }
  double stop = 1e-26 * (total + 1e-300);
  for (int sweep = 0; sweep < 100 && off > stop; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = sym.at(p, q);
        if (apq == 0.0) continue;
        double app = sym.at(p, p), aqq = sym.at(q, q);
        double theta = (aqq - app) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = sym.at(k, p), akq = sym.at(k, q);
          sym.at(k, p) = c * akp - s * akq;
          sym.at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = sym.at(p, k), aqk = sym.at(q, k);
          sym.at(p, k) = c * apk - s * aqk;
          sym.at(q, k) = s * apk + c * aqk;
        }
      }
    }
    off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) off += sym.at(i, j) * sym.at(i, j);
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = sym.at(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

double svd_norm_jacobi(const Tensor& a) {
  auto eig = jacobi_eigenvalues(sym_ata(a));
  return std::sqrt(std::max(0.0, eig.back()));
}

namespace {

// Eigenvalues of T strictly below x, counted through the Sturm sequence.
std::size_t sturm_count_below(const std::vector<double>& alpha,
                              const std::vector<double>& beta, double x) {
  std::size_t count = 0;
  double d = 1.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    double b2 = i == 0 ? 0.0 : beta[i - 1] * beta[i - 1];
    d = alpha[i] - x - b2 / (d == 0.0 ? 1e-300 : d);
    if (d < 0.0) ++count;
  }
  return count;
}

}  // namespace

double lanczos_top_eigenvalue(const std::function<Tensor(const Tensor&)>& sym_apply,
                              std::size_t dim, std::size_t steps, Rng& rng) {
  steps = std::min(steps, dim);
  std::vector<Tensor> basis;
  std::vector<double> alpha, beta;
  Tensor v = gaussian_vector(rng, dim);
  v *= 1.0 / norm2(v);
  for (std::size_t k = 0; k < steps; ++k) {
    basis.push_back(v);
    Tensor w = sym_apply(v);
    double a = dot(v, w);
    alpha.push_back(a);
    axpy(-a, v, w);
    if (k > 0) axpy(-beta.back(), basis[k - 1], w);
    for (const Tensor& b : basis) axpy(-dot(b, w), b, w);  // full reorth
    double nb = norm2(w);
    if (nb < 1e-13) break;
    beta.push_back(nb);
    w *= 1.0 / nb;
    v = w;
  }
  double gersh = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    double r = std::abs(alpha[i]);
    if (i > 0) r += std::abs(beta[i - 1]);
    if (i + 1 < alpha.size()) r += std::abs(beta[i]);
    gersh = std::max(gersh, r);
  }
  double lo = -gersh - 1.0, hi = gersh + 1.0;
  std::size_t n = alpha.size();
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (sturm_count_below(alpha, beta, mid) >= n)
      hi = mid;  // all eigenvalues below mid
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

Tensor random_spd(std::size_t d, Rng& rng, double diag_boost) {
  Tensor g({d, d});
  for (std::size_t i = 0; i < d * d; ++i) g[i] = rng.normal();
  Tensor spd = matmul(g, transpose(g));
  spd *= 1.0 / static_cast<double>(d);
  for (std::size_t i = 0; i < d; ++i) spd.at(i, i) += diag_boost;
  return spd;
}

Tensor fd_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                   double h) {
  Tensor g(x.shape());
  Tensor xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double orig = xp[i];
    xp[i] = orig + h;
    double fp = f(xp);
    xp[i] = orig - h;
    double fm = f(xp);
    xp[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double max_rel_err(const Tensor& approx, const Tensor& exact) {
  double scale = norm_inf(exact);
  double worst = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    double denom = std::max({std::abs(exact[i]), 0.01 * scale, 1e-10});
    worst = std::max(worst, std::abs(approx[i] - exact[i]) / denom);
  }
  return worst;
}

double simpson(const std::function<double(double)>& f, double lo, double hi,
               std::size_t intervals) {
  if (intervals % 2) ++intervals;
  double h = (hi - lo) / static_cast<double>(intervals);
  double sum = f(lo) + f(hi);
  for (std::size_t i = 1; i < intervals; ++i)
    sum += f(lo + static_cast<double>(i) * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

double simpson2d(const std::function<double(double, double)>& f, double lo1,
                 double hi1, double lo2, double hi2,
                 std::size_t intervals_per_axis) {
  return simpson(
      [&](double x) {
        return simpson([&](double y) { return f(x, y); }, lo2, hi2,
                       intervals_per_axis);
      },
      lo1, hi1, intervals_per_axis);
}

std::vector<double> acf_reference(const std::vector<double>& y, std::size_t max_lag) {
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double denom = 0.0;
  for (double v : y) denom += (v - mean) * (v - mean);
  std::vector<double> out(max_lag + 1);
  for (std::size_t l = 0; l <= max_lag; ++l) {
    double num = 0.0;
    for (std::size_t t = 0; t + l < y.size(); ++t)
      num += (y[t + l] - mean) * (y[t] - mean);
    out[l] = num / denom;
  }
  return out;
}

double w1_sorted_reference(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return sum / static_cast<double>(a.size());
}

double gaussian_tv(double m1, double m2, double s) {
  return std::erf(std::abs(m1 - m2) / (2.0 * std::sqrt(2.0) * s));
}

double normal_pdf(double x, double m, double s) {
  double z = (x - m) / s;
  return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * 3.14159265358979323846));
}

namespace {
std::atomic<unsigned> temp_counter{0};
}

TempDir::TempDir(const std::string& tag) {
  path = (fs::temp_directory_path() /
          ("nfula_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
           std::to_string(temp_counter.fetch_add(1))))
             .string();
  fs::create_directories(path);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path, ec);
}

std::string TempDir::file(const std::string& name) const {
  return (fs::path(path) / name).string();
}

std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace nfula::test
