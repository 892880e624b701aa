#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rocmlab/consistency.hpp"
#include "rocmlab/divergences.hpp"
#include "rocmlab/errors.hpp"
#include "rocmlab/gmm.hpp"
#include "rocmlab/metrics.hpp"
#include "rocmlab/oracle.hpp"
#include "rocmlab/oracle_check.hpp"
#include "rocmlab/random.hpp"
#include "rocmlab/schedule.hpp"

namespace py = pybind11;
using namespace rocmlab;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Samples to_samples(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected an (n, d) array");
  Samples s(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), s.values.begin());
  return s;
}

Array to_array(const Samples& s) {
  Array out({s.n, s.d});
  std::copy(s.values.begin(), s.values.end(), out.mutable_data());
  return out;
}

py::object json_to_py(const nlohmann::json& doc) {
  return py::module_::import("json").attr("loads")(doc.dump());
}

GaussianPair pair_of(std::vector<double> mu1, std::vector<double> mu2, double sigma) {
  GaussianPair p{std::move(mu1), std::move(mu2), sigma};
  p.validate();
  return p;
}

double quadrature(const std::string& kind, double mu1, double mu2, double sigma) {
  const GaussianPair pair = pair_of({mu1}, {mu2}, sigma);
  switch (parse_divergence_kind(kind)) {
    case DivergenceKind::KL: return divergence_oracle_quadrature(pair, kl_generator());
    case DivergenceKind::Hellinger: return divergence_oracle_quadrature(pair, hellinger_generator());
    case DivergenceKind::JS: return divergence_oracle_quadrature(pair, js_generator());
    case DivergenceKind::Fisher: return divergence_oracle_quadrature(pair, fisher_integrand());
    case DivergenceKind::None: return divergence_oracle_quadrature(pair, zero_generator());
    case DivergenceKind::ReverseKL:
      return divergence_oracle_quadrature(GaussianPair{pair.mu2, pair.mu1, sigma}, kl_generator());
  }
  throw py::value_error("unknown divergence " + kind);
}

}  // namespace

PYBIND11_MODULE(_rocmlab, m) {
  m.doc() = "Consistency-model reward fine-tuning on toy Gaussian mixtures";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<NoiseSchedule>(m, "NoiseSchedule")
      .def(py::init<int>(), py::arg("steps") = 8)
      .def_property_readonly("steps", &NoiseSchedule::steps)
      .def("alpha", &NoiseSchedule::alpha, py::arg("t"))
      .def("sigma", &NoiseSchedule::sigma, py::arg("t"))
      .def("time", &NoiseSchedule::time, py::arg("k"));

  py::class_<GaussianMixture>(m, "GaussianMixture")
      .def_static("preset", &GaussianMixture::preset, py::arg("name"))
      .def_static("preset_names", &GaussianMixture::preset_names)
      .def_static("load", &GaussianMixture::load, py::arg("path"))
      .def_readonly("weights", &GaussianMixture::weights)
      .def_readonly("means", &GaussianMixture::means)
      .def_readonly("covariances", &GaussianMixture::covariances)
      .def_property_readonly("dim", &GaussianMixture::dim)
      .def_property_readonly("components", &GaussianMixture::components)
      .def("log_density", [](const GaussianMixture& gm, std::vector<double> x) { return gm.log_density(x); })
      .def("score", [](const GaussianMixture& gm, std::vector<double> x) { return gm.score(x); })
      .def(
          "sample",
          [](const GaussianMixture& gm, std::size_t n, std::uint64_t seed) {
            Rng rng(seed);
            std::vector<int> labels;
            const Samples s = gm.sample(rng, n, &labels);
            return py::make_tuple(to_array(s), labels);
          },
          py::arg("n"), py::arg("seed") = 0)
      .def("to_json", [](const GaussianMixture& gm) { return json_to_py(gm.to_json()); });

  m.def(
      "kl_closed", [](std::vector<double> a, std::vector<double> b, double s) { return kl_closed(pair_of(a, b, s)); },
      py::arg("mu1"), py::arg("mu2"), py::arg("sigma"));
  m.def(
      "reverse_kl_closed",
      [](std::vector<double> a, std::vector<double> b, double s) { return reverse_kl_closed(pair_of(a, b, s)); },
      py::arg("mu1"), py::arg("mu2"), py::arg("sigma"));
  m.def(
      "hellinger_closed",
      [](std::vector<double> a, std::vector<double> b, double s) { return hellinger_closed(pair_of(a, b, s)); },
      py::arg("mu1"), py::arg("mu2"), py::arg("sigma"));
  m.def(
      "fisher_closed",
      [](std::vector<double> a, std::vector<double> b, double s) { return fisher_closed(pair_of(a, b, s)); },
      py::arg("mu1"), py::arg("mu2"), py::arg("sigma"));
  m.def(
      "js_mc",
      [](std::vector<double> a, std::vector<double> b, double s, std::size_t n, std::uint64_t seed) {
        const GaussianPair pair = pair_of(a, b, s);
        Rng rng(seed);
        Samples z(n, pair.mu1.size());
        for (double& v : z.values) v = rng.normal();
        return js_mc(pair, z);
      },
      py::arg("mu1"), py::arg("mu2"), py::arg("sigma"), py::arg("n") = 100000, py::arg("seed") = 0);
  m.def("divergence_quadrature", &quadrature, py::arg("kind"), py::arg("mu1"), py::arg("mu2"), py::arg("sigma"),
        "1-D divergence between N(mu1, sigma^2) and N(mu2, sigma^2) by adaptive quadrature");

  m.def(
      "sliced_w2", [](const Array& a, const Array& b, int projections, std::uint64_t seed) {
        return sliced_w2(to_samples(a), to_samples(b), projections, seed);
      },
      py::arg("a"), py::arg("b"), py::arg("projections") = 128, py::arg("seed") = 0x5eed);

  m.def("kl_trajectory_constant", [](int steps) { return kl_trajectory_constant(NoiseSchedule(steps)); },
        py::arg("steps") = 8);
  m.def("fisher_trajectory_constant", [](int steps) { return fisher_trajectory_constant(NoiseSchedule(steps)); },
        py::arg("steps") = 8);
  m.def(
      "oracle_optimum",
      [](std::vector<double> theta_ref, std::vector<double> target, double beta, const std::string& kind, int steps) {
        OracleTask task{std::move(theta_ref), std::move(target), beta, parse_divergence_kind(kind),
                        NoiseSchedule(steps)};
        task.validate();
        return task.optimum();
      },
      py::arg("theta_ref"), py::arg("target"), py::arg("beta"), py::arg("kind") = "kl", py::arg("steps") = 8);
  m.def(
      "oracle_objective",
      [](std::vector<double> theta, std::vector<double> theta_ref, std::vector<double> target, double beta,
         const std::string& kind, int steps) {
        OracleTask task{std::move(theta_ref), std::move(target), beta, parse_divergence_kind(kind),
                        NoiseSchedule(steps)};
        task.validate();
        return task.objective(theta);
      },
      py::arg("theta"), py::arg("theta_ref"), py::arg("target"), py::arg("beta"), py::arg("kind") = "kl",
      py::arg("steps") = 8);

  m.def(
      "run_oracle_checks",
      [](std::uint64_t seed, bool corrupt_hellinger_sign) {
        OracleCheckOptions opts;
        opts.seed = seed;
        opts.corrupt_hellinger_sign = corrupt_hellinger_sign;
        OracleReport report;
        {
          py::gil_scoped_release release;
          report = run_oracle_checks(opts);
        }
        return json_to_py(report.to_json());
      },
      py::arg("seed") = 0, py::arg("corrupt_hellinger_sign") = false);

  py::class_<ConsistencyModel>(m, "ConsistencyModel")
      .def_static("load", &ConsistencyModel::load, py::arg("path"))
      .def_property_readonly("dim", &ConsistencyModel::dim)
      .def_property_readonly("steps", [](const ConsistencyModel& mdl) { return mdl.schedule().steps(); })
      .def("save", &ConsistencyModel::save, py::arg("path"))
      .def(
          "generate",
          [](const ConsistencyModel& mdl, std::vector<int> conditions, double omega, std::uint64_t seed) {
            NoGradScope no_grad;
            const TrajectoryRecord traj = generate(mdl, mdl.schedule(), conditions, omega, seed);
            return to_array(Samples::from_tensor(traj.final_state()));
          },
          py::arg("conditions"), py::arg("omega") = 0.0, py::arg("seed") = 0,
          "K-step samples, one row per condition label (-1 = unconditional)");
}
