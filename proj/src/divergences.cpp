#include "rocmlab/divergences.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rocmlab/errors.hpp"

namespace rocmlab {

namespace {

// Spelled as log1p so that f(1) cancels exactly against softplus(0).
const double kLog2 = std::log1p(1.0);
constexpr double kLogRatioClamp = 50.0;

void check_sigma(double sigma) {
  if (!(sigma > 0.0)) throw DomainError("Gaussian pair needs sigma > 0, got " + std::to_string(sigma));
}

Tensor pair_row(const std::vector<double>& v) { return Tensor::from({1, v.size()}, std::span<const double>(v)); }

double softplus(double l) { return std::max(l, 0.0) + std::log1p(std::exp(-std::abs(l))); }

}  // namespace

DivergenceKind parse_divergence_kind(const std::string& name) {
  if (name == "none") return DivergenceKind::None;
  if (name == "kl") return DivergenceKind::KL;
  if (name == "reverse-kl") return DivergenceKind::ReverseKL;
  if (name == "hellinger") return DivergenceKind::Hellinger;
  if (name == "fisher") return DivergenceKind::Fisher;
  if (name == "js") return DivergenceKind::JS;
  throw ConfigError("unknown divergence '" + name + "' (expected kl, reverse-kl, hellinger, fisher, js or none)");
}

std::string to_string(DivergenceKind kind) {
  switch (kind) {
    case DivergenceKind::None: return "none";
    case DivergenceKind::KL: return "kl";
    case DivergenceKind::ReverseKL: return "reverse-kl";
    case DivergenceKind::Hellinger: return "hellinger";
    case DivergenceKind::Fisher: return "fisher";
    case DivergenceKind::JS: return "js";
  }
  return "none";
}

void DivergenceSpec::validate() const {
  if (!(beta >= 0.0)) throw ConfigError("divergence beta must be non-negative");
  if (mc_samples < 1) throw ConfigError("divergence mc_samples must be at least 1");
}

nlohmann::json DivergenceSpec::to_json() const {
  return {{"kind", to_string(kind)}, {"beta", beta}, {"mc_samples", mc_samples}};
}

DivergenceSpec DivergenceSpec::from_json(const nlohmann::json& doc) {
  DivergenceSpec spec;
  spec.kind = parse_divergence_kind(doc.value("kind", std::string("kl")));
  spec.beta = doc.value("beta", 0.0);
  spec.mc_samples = doc.value("mc_samples", 1);
  spec.validate();
  return spec;
}

void GaussianPair::validate() const {
  check_sigma(sigma);
  if (mu1.size() != mu2.size()) throw ShapeError("Gaussian pair means differ in dimension");
}

double GaussianPair::squared_distance() const {
  double acc = 0.0;
  for (std::size_t j = 0; j < mu1.size(); ++j) acc += (mu1[j] - mu2[j]) * (mu1[j] - mu2[j]);
  return acc;
}

double kl_closed(const GaussianPair& pair) {
  pair.validate();
  return pair.squared_distance() / (2.0 * pair.sigma * pair.sigma);
}

double reverse_kl_closed(const GaussianPair& pair) {
  return kl_closed(GaussianPair{pair.mu2, pair.mu1, pair.sigma});
}

double hellinger_closed(const GaussianPair& pair) {
  pair.validate();
  return 1.0 - std::exp(-pair.squared_distance() / (8.0 * pair.sigma * pair.sigma));
}

double fisher_closed(const GaussianPair& pair) {
  pair.validate();
  const double s2 = pair.sigma * pair.sigma;
  return pair.squared_distance() / (s2 * s2);
}

double js_mc(const GaussianPair& pair, const Samples& z) {
  pair.validate();
  if (z.n == 0 || z.d != pair.mu1.size()) throw ShapeError("js_mc needs nonempty noise of matching dimension");
  NoGradScope no_grad;
  const Tensor mu1 = pair_row(pair.mu1);
  const Tensor mu2 = pair_row(pair.mu2);
  // One [1, d] noise tensor per draw keeps the batched form usable here.
  std::vector<Tensor> noise;
  noise.reserve(z.n);
  for (std::size_t i = 0; i < z.n; ++i) noise.push_back(Tensor::from({1, z.d}, z.row(i)));
  return js_divergence(mu1, mu2, pair.sigma, noise).item();
}

Tensor kl_divergence(const Tensor& mu1, const Tensor& mu2, double sigma) {
  check_sigma(sigma);
  return sum(square(mu1 - mu2), {1}) / (2.0 * sigma * sigma);
}

Tensor hellinger_divergence(const Tensor& mu1, const Tensor& mu2, double sigma) {
  check_sigma(sigma);
  return 1.0 - exp(sum(square(mu1 - mu2), {1}) * (-1.0 / (8.0 * sigma * sigma)));
}

Tensor fisher_divergence(const Tensor& mu1, const Tensor& mu2, double sigma) {
  check_sigma(sigma);
  return sum(square(mu1 - mu2), {1}) / (sigma * sigma * sigma * sigma);
}

Tensor js_divergence(const Tensor& mu1, const Tensor& mu2, double sigma, std::span<const Tensor> noise) {
  check_sigma(sigma);
  if (noise.empty()) throw std::invalid_argument("JS estimate needs at least one noise draw");
  // JS = 1/2 E_p1[log 2p1/(p1+p2)] + 1/2 E_p2[log 2p2/(p1+p2)], with the same
  // noise placing one point under each distribution. Each term is
  // log 2 - softplus(log-ratio), bounded above by log 2, so the estimate has
  // light tails even when the two conditionals barely overlap.
  const double inv = 1.0 / (2.0 * sigma * sigma);
  Tensor total;
  for (std::size_t s = 0; s < noise.size(); ++s) {
    const Tensor x1 = mu1 + noise[s] * sigma;
    const Tensor x2 = mu2 + noise[s] * sigma;
    // Normalizers cancel under the shared covariance.
    const Tensor l21 = (sum(square(x1 - mu1), {1}) - sum(square(x1 - mu2), {1})) * inv;  // log p2/p1 at x1
    const Tensor l12 = (sum(square(x2 - mu2), {1}) - sum(square(x2 - mu1), {1})) * inv;  // log p1/p2 at x2
    const Tensor f = ((kLog2 - softplus(l21)) + (kLog2 - softplus(l12))) * 0.5;
    total = s == 0 ? f : total + f;
  }
  return noise.size() == 1 ? total : total / static_cast<double>(noise.size());
}

Tensor divergence(DivergenceKind kind, const Tensor& mu1, const Tensor& mu2, double sigma,
                  std::span<const Tensor> noise) {
  switch (kind) {
    case DivergenceKind::None: return Tensor::zeros({mu1.shape()[0]});
    case DivergenceKind::KL: return kl_divergence(mu1, mu2, sigma);
    case DivergenceKind::ReverseKL: return kl_divergence(mu2, mu1, sigma);
    case DivergenceKind::Hellinger: return hellinger_divergence(mu1, mu2, sigma);
    case DivergenceKind::Fisher: return fisher_divergence(mu1, mu2, sigma);
    case DivergenceKind::JS: return js_divergence(mu1, mu2, sigma, noise);
  }
  throw std::invalid_argument("unknown divergence kind");
}

double js_generator_from_log(double log_x) {
  const double l = std::clamp(log_x, -kLogRatioClamp, kLogRatioClamp);
  const double x = std::exp(l);
  const double sp = softplus(l);
  return 0.5 * (x * (kLog2 + l - sp) + (kLog2 - sp));
}

Tensor trajectory_divergence(const DivergenceSpec& spec, const TrajectoryRecord& traj,
                             const ConsistencyFunction& policy, const ConsistencyFunction& reference,
                             const NoiseSchedule& sched, const DivergenceOptions& opts, Rng* rng) {
  const std::size_t B = traj.batch();
  const int K = traj.steps;
  if (K < 2 || spec.kind == DivergenceKind::None) return Tensor::zeros({B});
  if (K != sched.steps()) throw ShapeError("trajectory and schedule disagree on K");
  if (spec.kind == DivergenceKind::JS && spec.mc_samples > 1 && rng == nullptr) {
    throw std::invalid_argument("JS with extra Monte-Carlo samples needs an rng");
  }
  const double om[] = {traj.omega};
  Tensor total;
  for (int k = 2; k <= K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const double alpha = sched.alpha_at(k - 1);
    const double sigma = sched.sigma_at(k - 1);
    const double tk[] = {sched.time(k)};
    const StepInputs in{tk, om, traj.conditions};
    const Tensor x_k = opts.detach_states ? traj.states[ku].detach() : traj.states[ku];
    const Tensor own = opts.detach_states ? policy.apply(x_k, in) : traj.denoised[ku];
    const Tensor mu1 = own * alpha;
    const Tensor mu2 = reference.apply(x_k, in) * alpha;
    std::vector<Tensor> noise;
    if (spec.kind == DivergenceKind::JS) {
      noise.push_back(traj.noises[ku - 1]);
      for (int s = 1; s < spec.mc_samples; ++s) {
        const auto z = rng->normals(B * policy.dim());
        noise.push_back(Tensor::from({B, policy.dim()}, std::span<const double>(z)));
      }
    }
    const Tensor d_k = divergence(spec.kind, mu1, mu2, sigma, noise);
    total = k == 2 ? d_k : total + d_k;
  }
  return total;
}

// ---------------------------------------------------------------- quadrature

Integrand f_generator(std::function<double(double)> f_of_log_ratio) {
  return [f = std::move(f_of_log_ratio)](const DensityPoint& p) {
    return std::exp(p.log_p2) * f(p.log_p1 - p.log_p2);
  };
}

Integrand kl_generator() {
  // p2 * (x log x) with x = p1/p2 is p1 * log(p1/p2).
  return [](const DensityPoint& p) { return std::exp(p.log_p1) * (p.log_p1 - p.log_p2); };
}

Integrand hellinger_generator() {
  return f_generator([](double l) {
    const double r = std::exp(0.5 * l) - 1.0;
    return 0.5 * r * r;
  });
}

Integrand js_generator() { return f_generator(js_generator_from_log); }

Integrand zero_generator() {
  return [](const DensityPoint&) { return 0.0; };
}

Integrand fisher_integrand() {
  return [](const DensityPoint& p) {
    const double diff = p.score1 - p.score2;
    return std::exp(p.log_p2) * diff * diff;
  };
}

namespace {

struct Quadrature {
  const Integrand& integrand;
  double mu1;
  double mu2;
  double sigma;

  double eval(double x) const {
    const double s2 = sigma * sigma;
    const double norm = -0.5 * std::log(2.0 * std::numbers::pi * s2);
    const DensityPoint p{x,
                         norm - (x - mu1) * (x - mu1) / (2.0 * s2),
                         norm - (x - mu2) * (x - mu2) / (2.0 * s2),
                         (mu1 - x) / s2,
                         (mu2 - x) / s2};
    return integrand(p);
  }

  double refine(double a, double b, double fa, double fb, double tol, int depth) const {
    const double m = 0.5 * (a + b);
    const double fm = eval(m);
    const double coarse = 0.5 * (b - a) * (fa + fb);
    const double fine = 0.25 * (b - a) * (fa + 2.0 * fm + fb);
    if (!std::isfinite(fine)) throw NumericError("quadrature integrand is not finite");
    if (std::abs(fine - coarse) <= 3.0 * tol) return fine + (fine - coarse) / 3.0;
    if (depth >= 48) throw NumericError("divergence quadrature did not converge");
    return refine(a, m, fa, fm, 0.5 * tol, depth + 1) + refine(m, b, fm, fb, 0.5 * tol, depth + 1);
  }
};

}  // namespace

double divergence_oracle_quadrature(const GaussianPair& pair, const Integrand& integrand, double abs_tol) {
  pair.validate();
  if (pair.mu1.size() != 1) throw ShapeError("quadrature oracle is one-dimensional");
  const Quadrature q{integrand, pair.mu1[0], pair.mu2[0], pair.sigma};
  const double lo = std::min(q.mu1, q.mu2) - 12.0 * pair.sigma;
  const double hi = std::max(q.mu1, q.mu2) + 12.0 * pair.sigma;
  constexpr int kPanels = 256;
  const double width = (hi - lo) / kPanels;
  double total = 0.0;
  double a = lo;
  double fa = q.eval(a);
  for (int i = 0; i < kPanels; ++i) {
    const double b = i + 1 == kPanels ? hi : lo + (i + 1) * width;
    const double fb = q.eval(b);
    total += q.refine(a, b, fa, fb, abs_tol / kPanels, 0);
    a = b;
    fa = fb;
  }
  return total;
}

}  // namespace rocmlab
