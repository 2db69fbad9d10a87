// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include "nfula/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "nfula/error.hpp"
#include "nfula/linalg.hpp"

namespace nfula {

double psnr(const Tensor& x, const Tensor& ref, double max_val) {
  require_same_shape(x, ref, "psnr");
  if (!(max_val > 0.0)) throw DegenerateInputError("psnr: max_val must be positive");
  double mse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double d = x[i] - ref[i];
    mse += d * d;
  }
  mse /= static_cast<double>(x.size());
  if (mse == 0.0) return 200.0;
  return std::min(200.0, 10.0 * std::log10(max_val * max_val / mse));
}

AcfCurve acf(const Tensor& series, std::size_t max_lag) {
  std::size_t n = series.size();
  if (max_lag < 1) throw DegenerateInputError("acf: max_lag must be >= 1");
  if (n <= max_lag) throw DegenerateInputError("acf: series shorter than max_lag + 1");
  double mean = 0.0;
  for (std::size_t t = 0; t < n; ++t) mean += series[t];
  mean /= static_cast<double>(n);
  double denom = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    double c = series[t] - mean;
    denom += c * c;
  }
  if (denom == 0.0) throw DegenerateInputError("acf: series has zero variance");
  AcfCurve curve;
  curve.band = "series";
  curve.values.resize(max_lag + 1);
  curve.values[0] = 1.0;
  for (std::size_t l = 1; l <= max_lag; ++l) {
    double num = 0.0;
    for (std::size_t t = 0; t + l < n; ++t)
      num += (series[t + l] - mean) * (series[t] - mean);
    curve.values[l] = num / denom;
  }
  return curve;
}

// Haar ------------------------------------------------------------------------

namespace {

// Orthogonal 2x2 block analysis: for block (a b / c d) the outputs are
// ll=(a+b+c+d)/2, horizontal=(a-b+c-d)/2, vertical=(a+b-c-d)/2,
// diagonal=(a-b-c+d)/2.
void haar_level(const Tensor& in, Tensor& ll, Tensor& h, Tensor& v, Tensor& d) {
  std::size_t r = in.rows(), c = in.cols();
  std::vector<std::size_t> half{r / 2, c / 2};
  ll = Tensor(half);
  h = Tensor(half);
  v = Tensor(half);
  d = Tensor(half);
  for (std::size_t i = 0; i < r / 2; ++i)
    for (std::size_t j = 0; j < c / 2; ++j) {
      double a = in.at(2 * i, 2 * j);
      double b = in.at(2 * i, 2 * j + 1);
      double cc = in.at(2 * i + 1, 2 * j);
      double dd = in.at(2 * i + 1, 2 * j + 1);
      ll.at(i, j) = 0.5 * (a + b + cc + dd);
      h.at(i, j) = 0.5 * (a - b + cc - dd);
      v.at(i, j) = 0.5 * (a + b - cc - dd);
      d.at(i, j) = 0.5 * (a - b - cc + dd);
    }
}

Tensor haar_level_inverse(const Tensor& ll, const Tensor& h, const Tensor& v,
                          const Tensor& d) {
  std::size_t r = ll.rows(), c = ll.cols();
  Tensor out({2 * r, 2 * c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      double s = ll.at(i, j), hh = h.at(i, j), vv = v.at(i, j), dd = d.at(i, j);
      out.at(2 * i, 2 * j) = 0.5 * (s + hh + vv + dd);
      out.at(2 * i, 2 * j + 1) = 0.5 * (s - hh + vv - dd);
      out.at(2 * i + 1, 2 * j) = 0.5 * (s + hh - vv - dd);
      out.at(2 * i + 1, 2 * j + 1) = 0.5 * (s - hh - vv + dd);
    }
  return out;
}

}  // namespace

HaarPyramid haar_dwt2(const Tensor& image, std::size_t levels) {
  if (levels == 0) throw ShapeError("haar: levels must be >= 1");
  std::size_t r = image.rows(), c = image.cols();
  std::size_t div = std::size_t{1} << levels;
  if (r % div != 0 || c % div != 0)
    throw ShapeError("haar: image sides must be divisible by 2^levels");
  HaarPyramid p;
  p.levels = levels;
  Tensor current = image;
  for (std::size_t l = 0; l < levels; ++l) {
    Tensor ll, h, v, d;
    haar_level(current, ll, h, v, d);
    p.yh.push_back(std::move(h));
    p.yh.push_back(std::move(v));
    p.yh.push_back(std::move(d));
    current = std::move(ll);
  }
  p.yl = std::move(current);
  return p;
}

Tensor haar_idwt2(const HaarPyramid& pyramid) {
  if (pyramid.levels == 0 || pyramid.yh.size() != 3 * pyramid.levels)
    throw ShapeError("haar: pyramid has the wrong number of detail bands");
  Tensor current = pyramid.yl;
  for (std::size_t l = pyramid.levels; l-- > 0;) {
    const Tensor& h = pyramid.yh[3 * l];
    const Tensor& v = pyramid.yh[3 * l + 1];
    const Tensor& d = pyramid.yh[3 * l + 2];
    require_same_shape(current, h, "haar inverse");
    require_same_shape(current, v, "haar inverse");
    require_same_shape(current, d, "haar inverse");
    current = haar_level_inverse(current, h, v, d);
  }
  return current;
}

// Band ACF ---------------------------------------------------------------------

namespace {

std::vector<std::size_t> sample_without_replacement(std::size_t pool, std::size_t n,
                                                    Rng& rng) {
  n = std::min(n, pool);
  std::vector<std::size_t> idx(pool);
  for (std::size_t i = 0; i < pool; ++i) idx[i] = i;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + rng.uniform_index(pool - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  return idx;
}

AcfCurve envelope_curve(const std::vector<const AcfCurve*>& curves,
                        const std::string& band, int which) {
  AcfCurve env;
  env.band = band;
  std::size_t lags = curves.front()->values.size();
  env.values.resize(lags);
  std::vector<double> col(curves.size());
  for (std::size_t l = 0; l < lags; ++l) {
    for (std::size_t i = 0; i < curves.size(); ++i) col[i] = curves[i]->values[l];
    std::sort(col.begin(), col.end());
    if (which < 0) {
      env.values[l] = col.front();
    } else if (which > 0) {
      env.values[l] = col.back();
    } else {
      std::size_t m = col.size() / 2;
      env.values[l] = col.size() % 2 == 1 ? col[m] : 0.5 * (col[m - 1] + col[m]);
    }
  }
  return env;
}

}  // namespace

ChainAcfResult chain_acf_bands(const SampleStore& store, std::size_t n_dims_per_band,
                               std::size_t max_lag, Rng& rng) {
  if (n_dims_per_band == 0)
    throw DegenerateInputError("band acf: need at least one dimension per band");
  if (store.size() < max_lag + 2)
    throw DegenerateInputError("band acf: store holds fewer than max_lag + 2 samples");
  const auto& shape = store.sample_shape();
  if (shape.size() != 2 || shape[0] % 2 != 0 || shape[1] % 2 != 0)
    throw ShapeError("band acf: samples must be 2-D with even sides");
  std::size_t half = (shape[0] / 2) * (shape[1] / 2);

  std::vector<std::size_t> yh_coords =
      sample_without_replacement(3 * half, n_dims_per_band, rng);
  std::vector<std::size_t> yl_coords =
      sample_without_replacement(half, n_dims_per_band, rng);

  std::size_t n_series = yh_coords.size() + yl_coords.size();
  std::vector<Tensor> series(n_series, Tensor({store.size()}));
  std::size_t at = 0;
  store.for_each([&](const Tensor& sample) {
    HaarPyramid p = haar_dwt2(sample, 1);
    for (std::size_t i = 0; i < yh_coords.size(); ++i) {
      std::size_t c = yh_coords[i];
      series[i][at] = p.yh[c / half][c % half];
    }
    for (std::size_t i = 0; i < yl_coords.size(); ++i)
      series[yh_coords.size() + i][at] = p.yl[yl_coords[i]];
    ++at;
  });

  ChainAcfResult result;
  std::vector<const AcfCurve*> yh_set, yl_set;
  for (std::size_t i = 0; i < n_series; ++i) {
    bool is_yh = i < yh_coords.size();
    try {
      AcfCurve curve = acf(series[i], max_lag);
      curve.band = is_yh ? "yh" : "yl";
      curve.dim = is_yh ? yh_coords[i] : yl_coords[i - yh_coords.size()];
      result.curves.push_back(std::move(curve));
    } catch (const DegenerateInputError&) {
      ++result.degenerate_skipped;
    }
  }
  for (const AcfCurve& c : result.curves)
    (c.band == "yh" ? yh_set : yl_set).push_back(&c);
  for (auto [set, name] : {std::pair{&yh_set, "yh"}, std::pair{&yl_set, "yl"}}) {
    if (set->empty()) continue;
    result.envelopes.push_back(envelope_curve(*set, std::string(name) + "/min", -1));
    result.envelopes.push_back(envelope_curve(*set, std::string(name) + "/median", 0));
    result.envelopes.push_back(envelope_curve(*set, std::string(name) + "/max", 1));
  }
  return result;
}

// Wasserstein-1 -------------------------------------------------------------------

namespace {

double empirical_quantile(const std::vector<double>& sorted, double q) {
  double p = q * static_cast<double>(sorted.size()) - 0.5;
  if (p <= 0.0) return sorted.front();
  if (p >= static_cast<double>(sorted.size() - 1)) return sorted.back();
  std::size_t lo = static_cast<std::size_t>(p);
  double frac = p - static_cast<double>(lo);
  return sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac;
}

}  // namespace

double wasserstein1_1d(const Tensor& a, const Tensor& b) {
  if (a.size() == 0 || b.size() == 0)
    throw DegenerateInputError("wasserstein: empty sample set");
  a.require_finite("wasserstein input");
  b.require_finite("wasserstein input");
  std::vector<double> sa(a.data(), a.data() + a.size());
  std::vector<double> sb(b.data(), b.data() + b.size());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::size_t m = std::max(sa.size(), sb.size());
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double q = (static_cast<double>(i) + 0.5) / static_cast<double>(m);
    double va = sa.size() == m ? sa[i] : empirical_quantile(sa, q);
    double vb = sb.size() == m ? sb[i] : empirical_quantile(sb, q);
    total += std::abs(va - vb);
  }
  return total / static_cast<double>(m);
}

// Moment probe --------------------------------------------------------------------

namespace {

// Integrates f over [lo, hi] splitting at the supplied breakpoints so each
// Simpson panel sees a smooth integrand. Point density ~400 per unit length.
double integrate_piecewise(const std::function<double(double)>& f, double lo, double hi,
                           std::vector<double> breaks) {
  breaks.push_back(lo);
  breaks.push_back(hi);
  std::sort(breaks.begin(), breaks.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    double a = std::max(breaks[i], lo), b = std::min(breaks[i + 1], hi);
    if (!(b > a)) continue;
    auto n = static_cast<std::size_t>(std::ceil((b - a) * 400.0));
    total += quadrature_integrate_1d(f, a, b, std::max<std::size_t>(n, 801));
  }
  return total;
}

}  // namespace

MomentReport verify_finite_moments(double lambda, double lo, double hi,
                                   std::size_t k_max) {
  if (!(lambda > 0.0)) throw DegenerateInputError("moment probe: lambda must be positive");
  if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw DegenerateInputError("moment probe: malformed box");
  MomentReport report;
  report.lambda = lambda;
  report.lo = lo;
  report.hi = hi;
  const double tail_tol = 1e-12;
  const double domain_cap = 1e3;
  for (std::size_t k = 0; k <= k_max; ++k) {
    auto f = [&](double x) {
      double d = x < lo ? lo - x : (x > hi ? x - hi : 0.0);
      return std::pow(std::abs(x), static_cast<double>(k)) *
             std::exp(-d * d / (2.0 * lambda));
    };
    double radius = std::max(4.0 * std::sqrt(lambda), 1.0);
    double previous = integrate_piecewise(f, lo - radius, hi + radius, {lo, hi, 0.0});
    MomentCheck check;
    check.k = k;
    for (;;) {
      radius *= 2.0;
      if (std::max(std::abs(lo - radius), std::abs(hi + radius)) > domain_cap)
        throw NonConvergenceError(
            "moment probe: tail still above 1e-12 at |x| = 1e3 for k = " +
            std::to_string(k));
      double value = integrate_piecewise(f, lo - radius, hi + radius, {lo, hi, 0.0});
      check.tail = std::abs(value - previous);
      previous = value;
      if (check.tail < tail_tol) {
        check.value = value;
        check.converged = true;
        break;
      }
    }
    report.moments.push_back(check);
  }
  return report;
}

// Posterior stability probe ------------------------------------------------------

WellPosednessReport verify_well_posedness(
    const Prior& prior, double sigma,
    const std::vector<std::pair<double, double>>& y_pairs) {
  if (!(sigma > 0.0))
    throw DegenerateInputError("stability probe: sigma must be positive");
  if (!prior.has_density())
    throw CapabilityError("stability probe: prior must expose a density");
  if (y_pairs.empty()) throw DegenerateInputError("stability probe: no pairs");

  auto log_post = [&](double y, double x) {
    double r = y - x;
    return -r * r / (2.0 * sigma * sigma) + prior.log_density(Tensor::scalar(x));
  };

  WellPosednessReport report;
  const double domain_cap = 1e3;
  for (auto [y1, y2] : y_pairs) {
    double center = 0.5 * (y1 + y2);
    double radius = std::max({8.0 * sigma, 1.0, std::abs(y1 - y2)});
    // One shared log shift per pair keeps the widening increments comparable.
    double shift = std::max(log_post(y1, center), log_post(y2, center));
    for (double x = center - radius; x <= center + radius; x += radius / 64.0)
      shift = std::max({shift, log_post(y1, x), log_post(y2, x)});

    auto q1 = [&](double x) { return std::exp(log_post(y1, x) - shift); };
    auto q2 = [&](double x) { return std::exp(log_post(y2, x) - shift); };
    std::vector<double> breaks{0.0, y1, y2, center};

    double z1 = integrate_piecewise(q1, center - radius, center + radius, breaks);
    double z2 = integrate_piecewise(q2, center - radius, center + radius, breaks);
    for (;;) {
      radius *= 2.0;
      if (radius > domain_cap)
        throw NonConvergenceError("stability probe: posterior mass not converged");
      double n1 = integrate_piecewise(q1, center - radius, center + radius, breaks);
      double n2 = integrate_piecewise(q2, center - radius, center + radius, breaks);
      bool done = std::abs(n1 - z1) <= 1e-12 * n1 && std::abs(n2 - z2) <= 1e-12 * n2;
      z1 = n1;
      z2 = n2;
      if (done) break;
    }
    auto diff = [&](double x) { return std::abs(q1(x) / z1 - q2(x) / z2); };
    double tv = 0.5 * integrate_piecewise(diff, center - radius, center + radius, breaks);

    WellPosednessPair entry;
    entry.y1 = y1;
    entry.y2 = y2;
    entry.tv = tv;
    entry.slope = y1 == y2 ? 0.0 : tv / std::abs(y1 - y2);
    report.pairs.push_back(entry);
  }

  bool any = false;
  for (const auto& p : report.pairs) {
    if (p.y1 == p.y2) continue;
    if (!any) {
      report.slope_min = report.slope_max = p.slope;
      any = true;
    } else {
      report.slope_min = std::min(report.slope_min, p.slope);
      report.slope_max = std::max(report.slope_max, p.slope);
    }
  }
  if (!any)
    report.slopes_bounded = true;  // only identical pairs given
  else if (report.slope_min > 0.0)
    report.slopes_bounded = report.slope_max / report.slope_min <= 10.0;
  else
    report.slopes_bounded = report.slope_max == 0.0;
  return report;
}

// CSV -------------------------------------------------------------------------------

namespace {

// Band labels are free-form check names; quote them when they contain the
// delimiter so the file stays a valid five-field csv.
std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  q += '"';
  return q;
}

void write_row(std::ostream& out, const std::string& metric, const std::string& band,
               std::size_t dim, std::size_t lag, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  out << metric << ',' << csv_quote(band) << ',' << dim << ',' << lag << ',' << buf
      << '\n';
}

}  // namespace

void write_report_csv(const std::string& path, const DiagnosticsReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open report for writing: " + path);
  out << "metric,band,dim,lag,value\n";
  for (const auto& [label, value] : report.psnr_values)
    write_row(out, "psnr", label, 0, 0, value);
  for (const AcfCurve& c : report.acf_curves)
    for (std::size_t l = 0; l < c.values.size(); ++l)
      write_row(out, "acf", c.band, c.dim, l, c.values[l]);
  for (std::size_t i = 0; i < report.w1_values.size(); ++i)
    write_row(out, "w1", report.w1_values[i].first, i, 0, report.w1_values[i].second);
  for (const VerificationCheck& c : report.checks) {
    write_row(out, "check", c.name, 0, 0, c.measured);
    write_row(out, "check_expected", c.name, 0, 0, c.expected);
    write_row(out, "check_passed", c.name, 0, 0, c.passed ? 1.0 : 0.0);
  }
  if (!out.good()) throw IoError("failed while writing report: " + path);
}

DiagnosticsReport read_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "metric,band,dim,lag,value")
    throw ParseError("report csv: missing or wrong header in " + path);
  DiagnosticsReport report;
  std::vector<std::string> check_order;
  auto check_slot = [&](const std::string& name) -> VerificationCheck& {
    for (std::size_t i = 0; i < check_order.size(); ++i)
      if (check_order[i] == name) return report.checks[i];
    check_order.push_back(name);
    report.checks.emplace_back();
    report.checks.back().name = name;
    return report.checks.back();
  };
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 5)
      throw ParseError("report csv: line " + std::to_string(line_no) +
                       ": expected 5 fields");
    char* end = nullptr;
    std::size_t dim = std::strtoull(fields[2].c_str(), &end, 10);
    if (*end != '\0')
      throw ParseError("report csv: line " + std::to_string(line_no) + ": bad dim");
    std::size_t lag = std::strtoull(fields[3].c_str(), &end, 10);
    if (*end != '\0')
      throw ParseError("report csv: line " + std::to_string(line_no) + ": bad lag");
    double value = std::strtod(fields[4].c_str(), &end);
    if (*end != '\0')
      throw ParseError("report csv: line " + std::to_string(line_no) + ": bad value");
    const std::string& metric = fields[0];
    const std::string& band = fields[1];
    if (metric == "psnr") {
      report.psnr_values.emplace_back(band, value);
    } else if (metric == "acf") {
      AcfCurve* curve = nullptr;
      for (AcfCurve& c : report.acf_curves)
        if (c.band == band && c.dim == dim) curve = &c;
      if (!curve) {
        report.acf_curves.emplace_back();
        curve = &report.acf_curves.back();
        curve->band = band;
        curve->dim = dim;
      }
      if (lag >= curve->values.size()) curve->values.resize(lag + 1);
      curve->values[lag] = value;
    } else if (metric == "w1") {
      report.w1_values.emplace_back(band, value);
    } else if (metric == "check") {
      check_slot(band).measured = value;
    } else if (metric == "check_expected") {
      check_slot(band).expected = value;
    } else if (metric == "check_passed") {
      check_slot(band).passed = value != 0.0;
    } else {
      throw ParseError("report csv: line " + std::to_string(line_no) +
                       ": unknown metric " + metric);
    }
  }
  return report;
}

}  // namespace nfula
