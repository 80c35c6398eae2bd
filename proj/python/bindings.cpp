#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cslucb/bilinear.hpp"
#include "cslucb/bounds.hpp"
#include "cslucb/confidence.hpp"
#include "cslucb/feature_model.hpp"
#include "cslucb/harness.hpp"
#include "cslucb/policies.hpp"

namespace py = pybind11;
using namespace cslucb;

namespace {

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_python(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

harness::ExperimentConfig config_from(const py::object& o) {
  auto c = from_python(o).get<harness::ExperimentConfig>();
  c.validate();
  return c;
}

py::dict trace_dict(const harness::RegretTrace& t) {
  py::dict d;
  std::vector<std::size_t> action, m, n;
  std::vector<std::string> play;
  std::vector<double> reward, rr, re, slack;
  for (const auto& r : t.rounds) {
    action.push_back(r.action);
    play.emplace_back(policies::to_string(r.play_type));
    reward.push_back(r.reward);
    rr.push_back(r.regret_realized);
    re.push_back(r.regret_expected);
    slack.push_back(r.constraint_slack);
    m.push_back(r.m);
    n.push_back(r.n);
  }
  d["policy"] = t.policy;
  d["alpha"] = t.alpha;
  d["trial"] = t.trial;
  d["action"] = action;
  d["play_type"] = play;
  d["reward"] = reward;
  d["regret_realized"] = rr;
  d["regret_expected"] = re;
  d["constraint_slack"] = slack;
  d["m_t"] = m;
  d["n_t"] = n;
  d["lower_bound"] = t.lower_bounds;
  d["theta_covered"] = t.theta_covered;
  return d;
}

confidence::BetaParams beta_params(double sigma, Eigen::Index dim, double D, double lambda, double A, double delta) {
  confidence::BetaParams p;
  p.sigma = sigma;
  p.dim = dim;
  p.feature_bound = D;
  p.lambda = lambda;
  p.param_bound = A;
  p.delta = delta;
  return p;
}

bounds::TheoryParams theory_from(const py::dict& d) {
  bounds::TheoryParams p;
  auto get = [&](const char* k, double& v) {
    if (d.contains(k)) v = d[k].cast<double>();
  };
  get("d", p.dim);
  get("A", p.param_bound);
  get("D", p.feature_bound);
  get("lambda", p.lambda);
  get("sigma", p.sigma);
  get("delta", p.delta);
  get("alpha", p.alpha);
  get("r_low", p.reward_low);
  get("r_high", p.reward_high);
  get("gap_low", p.gap_low);
  get("gap_high", p.gap_high);
  get("T", p.horizon);
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Conservative linear UCB with context distributions";

  m.def("beta",
        [](std::size_t count, double sigma, Eigen::Index dim, double D, double lambda, double A, double delta) {
          return confidence::beta(count, beta_params(sigma, dim, D, lambda, A, delta));
        },
        py::arg("m"), py::arg("sigma"), py::arg("d"), py::arg("D"), py::arg("lam"), py::arg("A"),
        py::arg("delta"));

  m.def("ucb_value",
        [](const Vector& center, const Matrix& shape, double radius, const Vector& psi) {
          return confidence::ucb_value(confidence::ConfidenceEllipsoid(center, numerics::SpdMatrix(shape), radius), psi);
        },
        py::arg("center"), py::arg("shape"), py::arg("radius"), py::arg("psi"));
  m.def("lcb_value",
        [](const Vector& center, const Matrix& shape, double radius, const Vector& psi) {
          return confidence::lcb_value(confidence::ConfidenceEllipsoid(center, numerics::SpdMatrix(shape), radius), psi);
        },
        py::arg("center"), py::arg("shape"), py::arg("radius"), py::arg("psi"));

  m.def("ridge_fit",
        [](const std::vector<Vector>& psi, const std::vector<double>& y, double lambda) {
          if (psi.size() != y.size()) throw std::invalid_argument("ridge_fit: length mismatch");
          if (psi.empty()) throw std::invalid_argument("ridge_fit: no observations");
          confidence::RidgeState r(psi.front().size(), lambda);
          for (std::size_t i = 0; i < psi.size(); ++i) r.update(psi[i], y[i]);
          return py::make_tuple(r.estimate(), r.gram().entries());
        },
        py::arg("psi"), py::arg("y"), py::arg("lam"));

  m.def("quadratic_features",
        [](const Vector& x, const Vector& c) {
          return feature_model::features(feature_model::QuadraticFeatureMap(x.size()), x, c);
        },
        py::arg("x"), py::arg("c"));
  m.def("quadratic_expected_features",
        [](const Vector& x, const Vector& mean, const Matrix& cov) {
          feature_model::QuadraticFeatureMap map(x.size());
          Rng rng(0);
          return feature_model::expected_features(map, x, feature_model::ContextDistribution::gaussian(mean, cov), 1, rng);
        },
        py::arg("x"), py::arg("mean"), py::arg("cov"));

  m.def("baseline_kth_best",
        [](const Vector& theta, const std::vector<Vector>& psi, std::size_t k) {
          return policies::baseline_kth_best(theta, psi, k);
        },
        py::arg("theta"), py::arg("psi"), py::arg("k"));

  m.def("ucb_regret_bound", [](const py::dict& p, double mt) { return bounds::ucb_regret_bound(theory_from(p), mt); },
        py::arg("params"), py::arg("m"));
  m.def("nT_upper_bound", [](const py::dict& p) { return bounds::nT_upper_bound(theory_from(p)); });
  m.def("nT_lower_bound", [](const py::dict& p) { return bounds::nT_lower_bound(theory_from(p)); });
  m.def("total_regret_bound", [](const py::dict& p) {
    const auto r = bounds::total_regret_bound(theory_from(p));
    py::dict d;
    d["ucb_term"] = r.ucb_term;
    d["conservatism_term"] = r.conservatism_term;
    d["context_term"] = r.context_term;
    d["total"] = r.total();
    return d;
  });
  m.def("elliptical_potential_bound", &bounds::elliptical_potential_bound, py::arg("k"), py::arg("D"), py::arg("lam"),
        py::arg("d"));
  m.def("lemma2_bound", &bounds::lemma2_bound, py::arg("c1"), py::arg("c2"), py::arg("c3"));

  m.def("default_config", [](const std::string& env) {
    nlohmann::json j = harness::default_config(env);
    return to_python(j);
  }, py::arg("environment") = "synthetic");

  m.def("run_trial",
        [](const py::object& config, const std::string& policy, double alpha, std::size_t trial) {
          const auto c = config_from(config);
          harness::RegretTrace t;
          {
            py::gil_scoped_release release;
            t = harness::run_trial(c, harness::policy_from_string(policy), alpha, trial);
          }
          return trace_dict(t);
        },
        py::arg("config"), py::arg("policy"), py::arg("alpha"), py::arg("trial") = 0);

  m.def("run_experiment",
        [](const py::object& config) {
          const auto c = config_from(config);
          nlohmann::json summary;
          {
            py::gil_scoped_release release;
            summary = harness::run_experiment(c).summary;
          }
          return to_python(summary);
        },
        py::arg("config"));

  m.def("train_surrogate",
        [](std::size_t rows, double noise, std::size_t epochs, std::uint64_t seed) {
          bilinear::SurrogateOptions so;
          so.rows = rows;
          so.noise = noise;
          bilinear::SgdOptions opts;
          opts.epochs = epochs;
          Rng data_rng(derive_seed(seed, {0}));
          Rng fit_rng(derive_seed(seed, {1}));
          const auto s = bilinear::make_surrogate(so, data_rng);
          const auto fit = bilinear::sgd_fit(s.data, opts, fit_rng);
          py::dict d;
          d["W"] = fit.model.site_weights;
          d["V"] = fit.model.action_factors;
          d["mse"] = fit.mse_trace;
          d["loss"] = fit.loss_trace;
          return d;
        },
        py::arg("rows") = 2000, py::arg("noise") = 0.01, py::arg("epochs") = 300, py::arg("seed") = 1);

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const std::domain_error& e) {
      PyErr_SetString(PyExc_ArithmeticError, e.what());
    }
  });
}
