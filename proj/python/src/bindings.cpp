#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kinn/aggregator.hpp"
#include "kinn/cli.hpp"
#include "kinn/error.hpp"
#include "kinn/eval.hpp"
#include "kinn/loss.hpp"
#include "kinn/oracle.hpp"
#include "kinn/trainer.hpp"

namespace py = pybind11;
using namespace kinn;

namespace {

GeneratorParams params_from_row(const Eigen::Matrix<double, kParamDim, 1>& row) {
  return GeneratorParams::from_row(std::span<const double, kParamDim>(row.data(), kParamDim));
}

ParamBatch batch_from_matrix(const MatD& theta) {
  if (theta.cols() != kParamDim) throw ContractViolation("expected an N x 7 parameter array");
  ParamBatch batch;
  batch.reserve(static_cast<std::size_t>(theta.rows()));
  for (Eigen::Index i = 0; i < theta.rows(); ++i) {
    const auto p = GeneratorParams::from_row(std::span<const double, kParamDim>(theta.row(i).data(), kParamDim));
    if (auto why = violated_invariant(p)) throw InputError(static_cast<long>(i) + 1, *why);
    batch.push_back(p);
  }
  return batch;
}

py::dict solution_dict(const OracleSolution& s) {
  py::dict d;
  d["x_star"] = Eigen::Vector2d(s.x_star);
  d["lambda_star"] = Eigen::VectorXd(s.lambda_star);
  d["active_set"] = s.active_set;
  d["distance"] = s.distance;
  return d;
}

}  // namespace

PYBIND11_MODULE(_kinn, m) {
  m.doc() = "KKT-informed neural surrogate for generator setpoint projection";

  static py::exception<Error> kinn_error(m, "KinnError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(kinn_error, (e.kind() + ": " + e.what()).c_str());
    }
  });

  m.attr("PARAM_COLUMNS") = std::vector<std::string>(kParamColumns.begin(), kParamColumns.end());
  m.attr("DEFAULT_VALIDATION_SEED") = kDefaultValidationSeed;

  m.def("violated_invariant", [](const Eigen::Matrix<double, kParamDim, 1>& row) {
    return violated_invariant(params_from_row(row));
  }, py::arg("params"), "Description of the first violated invariant, or None.");

  m.def("build_instance", [](const Eigen::Matrix<double, kParamDim, 1>& row) {
    const ProblemInstance inst = build_instance(params_from_row(row));
    return py::make_tuple(Eigen::MatrixXd(inst.G), Eigen::VectorXd(inst.h), Eigen::Vector2d(inst.a));
  }, py::arg("params"), "Constraint data (G, h, a) of one parameter row.");

  m.def("project", [](const Eigen::Matrix<double, kParamDim, 1>& row) {
    return solution_dict(project(build_instance(params_from_row(row))));
  }, py::arg("params"), "Exact projection with multipliers; active_set is 0-based.");

  m.def("project_batch", [](const MatD& theta) {
    const auto insts = build_instances(batch_from_matrix(theta));
    const auto sols = batch_project(insts);
    MatD x(static_cast<Eigen::Index>(sols.size()), kPrimalDim);
    for (std::size_t i = 0; i < sols.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = sols[i].x_star.transpose();
    return x;
  }, py::arg("theta"), "Oracle optima for an N x 7 parameter array.");

  m.def("loss_terms", [](const Eigen::Matrix<double, kParamDim, 1>& row, const Eigen::Vector2d& x,
                         const Eigen::Matrix<double, kConstraintCount, 1>& lambda) {
    const LossTerms t = loss_terms(build_instance(params_from_row(row)), x, lambda);
    return py::make_tuple(t.stationarity, t.inequality, t.complementarity);
  }, py::arg("params"), py::arg("x"), py::arg("lam"),
     "(stationarity, inequality, complementarity) residual norms.");

  m.def("upgrad", [](const MatD& jacobian) {
    std::vector<std::vector<float>> rows;
    for (Eigen::Index i = 0; i < jacobian.rows(); ++i) {
      const Eigen::VectorXf r = jacobian.row(i).transpose().cast<float>();
      rows.emplace_back(r.data(), r.data() + r.size());
    }
    return aggregate_upgrad(LossJacobian(std::move(rows)));
  }, py::arg("jacobian"), "UPGrad direction for an L x P Jacobian.");

  m.def("nnls_solve", &nnls_solve, py::arg("gram"), py::arg("c"),
        "argmin over w >= 0 of 0.5 w'Gw + c'w.");

  m.def("metrics", [](const MatD& pred, const MatD& truth) {
    const Metrics mt = metrics(pred, truth);
    return py::make_tuple(mt.mae, mt.r2);
  }, py::arg("predictions"), py::arg("truths"), "(MAE, pooled R^2).");

  py::class_<NetworkParams>(m, "Model")
      .def(py::init([](int width, int blocks, std::uint64_t seed) {
             Architecture arch;
             arch.width = width;
             arch.blocks = blocks;
             Rng rng(seed);
             return init_params(rng, arch);
           }),
           py::arg("width") = 512, py::arg("blocks") = 3, py::arg("seed") = 0)
      .def_static("load", py::overload_cast<const std::string&>(&load_checkpoint), py::arg("path"))
      .def("save", [](const NetworkParams& p, const std::string& path) { save_checkpoint(p, path); },
           py::arg("path"))
      .def_property_readonly("width", [](const NetworkParams& p) { return p.arch().width; })
      .def_property_readonly("blocks", [](const NetworkParams& p) { return p.arch().blocks; })
      .def_property_readonly("num_parameters", &NetworkParams::size)
      .def("predict", [](const NetworkParams& p, const MatD& theta) {
             const NetworkOutput out = predict(p, batch_from_matrix(theta).theta());
             return py::make_tuple(MatD(out.x_hat.cast<double>()), MatD(out.lambda_hat.cast<double>()));
           }, py::arg("theta"), "(x_hat N x 2, lambda_hat N x 7) for an N x 7 parameter array.")
      .def("evaluate", [](const NetworkParams& p, std::uint64_t seed) {
             return to_json(evaluate(p, build_validation_set(seed)));
           }, py::arg("seed") = kDefaultValidationSeed, "Validation report as a JSON string.")
      .def("__eq__", [](const NetworkParams& a, const NetworkParams& b) { return a == b; });

  m.def("train", [](const std::string& config_json) {
    const TrainConfig cfg = parse_train_config(config_json);
    std::optional<TrainResult> result;
    {
      py::gil_scoped_release release;
      result.emplace(run_training(cfg));
    }
    const TrainResult& r = *result;
    py::dict d;
    d["stop_reason"] = r.stop_reason;
    d["steps"] = r.log.size();
    d["mae"] = r.final_report.metrics.mae;
    d["r2"] = r.final_report.metrics.r2;
    d["best_mae"] = r.best_mae;
    d["loss"] = r.log.back().loss.values();
    d["model"] = r.final_params;
    return d;
  }, py::arg("config_json"), "Runs training from a JSON configuration string.");
}
