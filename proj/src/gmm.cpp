#include "rocmlab/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace rocmlab {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double component_log_density(const std::vector<double>& mean, const std::vector<double>& var,
                             std::span<const double> x) {
  double acc = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double diff = x[j] - mean[j];
    acc += diff * diff / var[j] + std::log(var[j]) + kLog2Pi;
  }
  return -0.5 * acc;
}

std::vector<double> log_joint(const GaussianMixture& gm, std::span<const double> x) {
  std::vector<double> out(gm.components());
  for (std::size_t m = 0; m < gm.components(); ++m) {
    out[m] = gm.weights[m] > 0.0 ? std::log(gm.weights[m]) + component_log_density(gm.means[m], gm.covariances[m], x)
                                 : -std::numeric_limits<double>::infinity();
  }
  return out;
}

double log_sum_exp(const std::vector<double>& v) {
  const double hi = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double e : v) acc += std::exp(e - hi);
  return hi + std::log(acc);
}

}  // namespace

void GaussianMixture::validate() const {
  if (weights.empty()) throw std::invalid_argument("mixture has no components");
  if (means.size() != weights.size() || covariances.size() != weights.size()) {
    throw std::invalid_argument("mixture weights, means and covariances differ in length");
  }
  const std::size_t d = dim();
  if (d == 0) throw std::invalid_argument("mixture dimension is zero");
  double total = 0.0;
  for (std::size_t m = 0; m < weights.size(); ++m) {
    if (!(weights[m] >= 0.0)) throw std::invalid_argument("mixture weight is negative");
    total += weights[m];
    if (means[m].size() != d || covariances[m].size() != d) {
      throw std::invalid_argument("component " + std::to_string(m) + " has the wrong dimension");
    }
    for (double v : covariances[m]) {
      if (!(v > 0.0)) throw std::invalid_argument("covariance entries must be positive");
    }
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("mixture weights do not sum to 1");
}

GaussianMixture GaussianMixture::component(std::size_t m) const {
  if (m >= components()) throw std::out_of_range("component index " + std::to_string(m));
  return GaussianMixture{{1.0}, {means[m]}, {covariances[m]}};
}

double GaussianMixture::log_density(std::span<const double> x) const { return log_sum_exp(log_joint(*this, x)); }

std::vector<double> GaussianMixture::responsibilities(std::span<const double> x) const {
  auto lj = log_joint(*this, x);
  const double lse = log_sum_exp(lj);
  for (double& v : lj) v = std::exp(v - lse);
  return lj;
}

std::vector<double> GaussianMixture::score(std::span<const double> x) const {
  const auto r = responsibilities(x);
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t m = 0; m < components(); ++m) {
    if (r[m] == 0.0) continue;
    for (std::size_t j = 0; j < x.size(); ++j) out[j] += r[m] * (means[m][j] - x[j]) / covariances[m][j];
  }
  return out;
}

Samples GaussianMixture::sample(Rng& rng, std::size_t n, std::vector<int>* labels) const {
  Samples out(n, dim());
  if (labels != nullptr) labels->assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    std::size_t m = 0;
    double cum = weights[0];
    while (u >= cum && m + 1 < components()) cum += weights[++m];
    auto row = out.row(i);
    for (std::size_t j = 0; j < dim(); ++j) row[j] = means[m][j] + std::sqrt(covariances[m][j]) * rng.normal();
    if (labels != nullptr) (*labels)[i] = static_cast<int>(m);
  }
  return out;
}

Samples GaussianMixture::sample_component(Rng& rng, std::size_t n, std::size_t m) const {
  Samples out(n, dim());
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.row(i);
    for (std::size_t j = 0; j < dim(); ++j) row[j] = means[m][j] + std::sqrt(covariances[m][j]) * rng.normal();
  }
  return out;
}

nlohmann::json GaussianMixture::to_json() const {
  return {{"weights", weights}, {"means", means}, {"covariances", covariances}};
}

GaussianMixture GaussianMixture::from_json(const nlohmann::json& doc) {
  GaussianMixture gm;
  try {
    gm.weights = doc.at("weights").get<std::vector<double>>();
    gm.means = doc.at("means").get<std::vector<std::vector<double>>>();
    gm.covariances = doc.at("covariances").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed mixture document: ") + e.what());
  }
  gm.validate();
  return gm;
}

GaussianMixture GaussianMixture::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open mixture file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("mixture file " + path + " is not valid JSON: " + e.what());
  }
  return from_json(doc);
}

void GaussianMixture::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write mixture file " + path);
  out << to_json().dump(2) << '\n';
}

GaussianMixture GaussianMixture::preset(std::string_view name) {
  GaussianMixture gm;
  if (name == "gmm2") {
    gm.weights = {0.5, 0.5};
    gm.means = {{-1.0, 0.0}, {1.0, 0.0}};
    gm.covariances = {{0.0625, 0.0625}, {0.0625, 0.0625}};
  } else if (name == "gmm8-ring") {
    for (int m = 0; m < 8; ++m) {
      const double a = 2.0 * std::numbers::pi * m / 8.0;
      gm.weights.push_back(1.0 / 8.0);
      gm.means.push_back({2.0 * std::cos(a), 2.0 * std::sin(a)});
      gm.covariances.push_back({0.0225, 0.0225});
    }
  } else if (name == "two-moons-gmm") {
    // Five components along each of two interleaved half circles.
    for (int m = 0; m < 5; ++m) {
      const double a = std::numbers::pi * m / 4.0;
      gm.means.push_back({std::cos(a) - 0.5, std::sin(a) - 0.25});
      gm.means.push_back({0.5 - std::cos(a), 0.25 - std::sin(a)});
    }
    gm.weights.assign(10, 0.1);
    gm.covariances.assign(10, {0.01, 0.01});
  } else {
    throw std::invalid_argument("unknown data preset '" + std::string(name) + "'");
  }
  gm.validate();
  return gm;
}

std::vector<std::string> GaussianMixture::preset_names() { return {"gmm2", "gmm8-ring", "two-moons-gmm"}; }

GaussianMixture forward_marginal(const GaussianMixture& gm, const NoiseSchedule& sched, double t) {
  const double a = sched.alpha(t);
  const double s = sched.sigma(t);
  GaussianMixture out = gm;
  for (std::size_t m = 0; m < gm.components(); ++m) {
    for (std::size_t j = 0; j < gm.dim(); ++j) {
      out.means[m][j] = a * gm.means[m][j];
      out.covariances[m][j] = a * a * gm.covariances[m][j] + s * s;
    }
  }
  return out;
}

std::vector<double> score(const GaussianMixture& gm_t, std::span<const double> x) { return gm_t.score(x); }

std::vector<double> sample_mean(const Samples& s) {
  std::vector<double> mu(s.d, 0.0);
  for (std::size_t i = 0; i < s.n; ++i) {
    for (std::size_t j = 0; j < s.d; ++j) mu[j] += s.row(i)[j];
  }
  for (double& v : mu) v /= static_cast<double>(s.n);
  return mu;
}

std::vector<double> sample_covariance(const Samples& s) {
  const auto mu = sample_mean(s);
  std::vector<double> cov(s.d * s.d, 0.0);
  for (std::size_t i = 0; i < s.n; ++i) {
    const auto r = s.row(i);
    for (std::size_t a = 0; a < s.d; ++a) {
      for (std::size_t b = 0; b < s.d; ++b) cov[a * s.d + b] += (r[a] - mu[a]) * (r[b] - mu[b]);
    }
  }
  for (double& v : cov) v /= static_cast<double>(s.n - 1);
  return cov;
}

}  // namespace rocmlab
