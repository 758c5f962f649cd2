#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>

#include <nlohmann/json.hpp>

#include "ills/errors.hpp"
#include "ills/evaluation.hpp"
#include "ills/experiment.hpp"
#include "ills/imputation.hpp"
#include "ills/spreading.hpp"

namespace py = pybind11;
using namespace ills;

namespace {

// Nonzero entries of an items x users array become links.
LinkSet links_of(const Eigen::MatrixXd& adjacency) {
    std::vector<Link> links;
    for (Eigen::Index u = 0; u < adjacency.cols(); ++u)
        for (Eigen::Index i = 0; i < adjacency.rows(); ++i)
            if (adjacency(i, u) != 0.0) links.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(u)});
    return LinkSet(std::move(links), static_cast<std::size_t>(adjacency.rows()),
                   static_cast<std::size_t>(adjacency.cols()));
}

Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> tags_of(const ScoreMatrix& s) {
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> t(s.n_items(), s.n_users());
    for (std::size_t u = 0; u < s.n_users(); ++u)
        for (std::size_t i = 0; i < s.n_items(); ++i) t(i, u) = static_cast<std::uint8_t>(s.provenance(i, u));
    return t;
}

ScoreMatrix from_arrays(const Eigen::MatrixXd& values, const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& tags) {
    if (values.rows() != tags.rows() || values.cols() != tags.cols())
        throw std::invalid_argument("values and tags must have the same shape");
    ScoreMatrix s(values.rows(), values.cols());
    for (Eigen::Index u = 0; u < values.cols(); ++u)
        for (Eigen::Index i = 0; i < values.rows(); ++i) {
            if (tags(i, u) > 3) throw std::invalid_argument("provenance tags are 0..3");
            s.set(i, u, values(i, u), static_cast<Provenance>(tags(i, u)));
        }
    return s;
}

py::object json_loads(const std::string& text) {
    return py::module_::import("json").attr("loads")(text);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Spreading-based recommendation with least-squares imputation";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.def("spread", [](const Eigen::MatrixXd& adjacency) {
        const auto s = densify(build_graph(links_of(adjacency)));
        return py::make_tuple(s.values(), tags_of(s));
    }, py::arg("adjacency"),
       "Spread scores for an items x users 0/1 array. Returns (values, tags); "
       "tags are 0 observed, 1 spread, 2 missing, 3 imputed.");

    m.def("similarity", [](const Eigen::VectorXd& left, const Eigen::VectorXd& right) {
        if (left.size() != right.size()) throw std::invalid_argument("vectors differ in length");
        return similarity_dense({left.data(), static_cast<std::size_t>(left.size())},
                                {right.data(), static_cast<std::size_t>(right.size())});
    }, py::arg("left"), py::arg("right"));

    m.def("lstsq_min_norm", &lstsq_min_norm, py::arg("m"), py::arg("rhs"));

    m.def("nrmse", [](const std::vector<double>& estimates, const std::vector<double>& truths) {
        return nrmse(estimates, truths);
    }, py::arg("estimates"), py::arg("truths"));

    m.def("impute_iteration", [](const Eigen::MatrixXd& values,
                                 const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& tags,
                                 std::size_t k, bool adjacency_basis) {
        ImputeOptions options;
        options.basis = adjacency_basis ? SimilarityBasis::Adjacency : SimilarityBasis::Values;
        const auto next = impute_iteration(from_arrays(values, tags), k, options);
        return py::make_tuple(next.values(), tags_of(next));
    }, py::arg("values"), py::arg("tags"), py::arg("k"), py::arg("adjacency_basis") = false);

    m.def("run_ills", [](const Eigen::MatrixXd& values,
                         const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& tags,
                         std::vector<double> k_grid, std::size_t max_iterations, double tol, double mask_fraction,
                         std::uint64_t seed) {
        IllsConfig config;
        config.k_grid = std::move(k_grid);
        config.max_iterations = max_iterations;
        config.convergence_tol = tol;
        config.mask_fraction = mask_fraction;
        config.seed = seed;
        IllsResult result;
        {
            py::gil_scoped_release release;
            result = run_ills(from_arrays(values, tags), config);
        }
        return py::make_tuple(result.scores.values(), tags_of(result.scores), json_loads(trace_json(result.trace)));
    }, py::arg("values"), py::arg("tags"), py::arg("k_grid") = IllsConfig{}.k_grid,
       py::arg("max_iterations") = 10, py::arg("tol") = 1e-4, py::arg("mask_fraction") = 0.01,
       py::arg("seed") = 0);

    m.def("auc", [](const Eigen::MatrixXd& values, const Eigen::MatrixXd& training, const Eigen::MatrixXd& probe) {
        ScoreMatrix s(values.rows(), values.cols());
        for (Eigen::Index u = 0; u < values.cols(); ++u)
            for (Eigen::Index i = 0; i < values.rows(); ++i)
                s.set(i, u, values(i, u), training(i, u) != 0.0 ? Provenance::Observed : Provenance::Spread);
        return auc(s, DataSplit{links_of(training), links_of(probe), 0, 0.0});
    }, py::arg("values"), py::arg("training"), py::arg("probe"));

    m.def("run_experiment", [](const py::dict& config) {
        const auto text = py::module_::import("json").attr("dumps")(config).cast<std::string>();
        const auto parsed = config_from_json(nlohmann::json::parse(text));
        parsed.validate();
        MetricsReport report;
        {
            py::gil_scoped_release release;
            report = run_experiment(parsed);
        }
        return json_loads(report_json(report));
    }, py::arg("config"),
       "Runs a full experiment from a dict with the same keys as the JSON config "
       "file and returns the report.");
}
