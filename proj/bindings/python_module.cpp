// Python bindings for the core operations: Lyndon bases, signatures,
// log-signature streams, metrics and the PCA export.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lordsig/metrics.hpp"
#include "lordsig/path.hpp"
#include "lordsig/pca.hpp"
#include "lordsig/tensor_algebra.hpp"

namespace py = pybind11;
using namespace lordsig;

namespace {

std::vector<double> as_flat(const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                            int expected_cols, const char* what) {
    if (a.ndim() != 2) throw std::invalid_argument(std::string(what) + ": expected a 2-d array");
    if (expected_cols > 0 && a.shape(1) != expected_cols)
        throw std::invalid_argument(std::string(what) + ": wrong number of columns");
    std::vector<double> flat(static_cast<std::size_t>(a.size()));
    std::copy(a.data(), a.data() + a.size(), flat.begin());
    return flat;
}

py::array_t<double> to_array(const std::vector<double>& v) {
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

}  // namespace

PYBIND11_MODULE(_lordsig, m) {
    m.doc() = "log-signature transforms over piecewise-linear paths";

    m.def("logsig_dim", &tensoralg::logsig_dim, py::arg("channels"), py::arg("depth"),
          "Number of Lyndon words of length <= depth over the alphabet.");

    m.def(
        "lyndon_words",
        [](int channels, int depth) {
            auto basis = tensoralg::lyndon_basis(channels, depth);
            std::vector<std::vector<int>> words;
            words.reserve(basis.size());
            for (const auto& w : basis.words()) words.push_back(w.letters);
            return words;
        },
        py::arg("channels"), py::arg("depth"),
        "All Lyndon words in (length, lexicographic) order.");

    m.def(
        "signature",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> points, int depth) {
            const int d = static_cast<int>(points.shape(1));
            auto flat = as_flat(points, 0, "signature");
            auto sig = tensoralg::path_signature(flat, d, depth);
            std::vector<double> packed;
            for (const auto& level : sig.levels) packed.insert(packed.end(), level.begin(), level.end());
            return to_array(packed);
        },
        py::arg("points"), py::arg("depth"),
        "Flattened signature levels 1..depth of the piecewise-linear path "
        "through the rows of `points`.");

    m.def(
        "logsignature",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> points, int depth) {
            const int d = static_cast<int>(points.shape(1));
            auto basis = tensoralg::lyndon_basis(d, depth);
            auto flat = as_flat(points, 0, "logsignature");
            return to_array(tensoralg::path_logsignature(flat, basis).coeffs);
        },
        py::arg("points"), py::arg("depth"),
        "Log-signature in Lyndon coordinates of the piecewise-linear path.");

    m.def(
        "logsig_stream",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> times,
           py::array_t<double, py::array::c_style | py::array::forcecast> values, int window_obs,
           int depth) {
            if (times.ndim() != 1) throw std::invalid_argument("logsig_stream: times must be 1-d");
            const int raw = static_cast<int>(values.shape(1));
            std::vector<double> t(times.data(), times.data() + times.size());
            auto series = path::TimeSeriesPath::from_raw(std::move(t), as_flat(values, 0, "values"), raw);
            auto basis = tensoralg::lyndon_basis(series.channels(), depth);
            auto plan = path::plan_windows(series, window_obs);
            auto stream = path::logsig_stream(series, plan, basis);

            py::array_t<double> entries({static_cast<py::ssize_t>(stream.count()),
                                         static_cast<py::ssize_t>(basis.size())});
            auto acc = entries.mutable_unchecked<2>();
            for (std::size_t w = 0; w < stream.count(); ++w)
                for (std::size_t j = 0; j < basis.size(); ++j)
                    acc(static_cast<py::ssize_t>(w), static_cast<py::ssize_t>(j)) = stream.entries[w][j];
            return py::make_tuple(entries, to_array(stream.durations));
        },
        py::arg("times"), py::arg("values"), py::arg("window_obs"), py::arg("depth"),
        "Per-window log-signatures (with the time channel appended) and the "
        "window durations. Windows share one boundary observation.");

    m.def(
        "classification_metrics",
        [](const std::vector<int>& labels, const std::vector<std::vector<double>>& probabilities) {
            auto report = eval::classification_metrics(labels, probabilities);
            py::dict out;
            for (const auto& v : report.values) out[py::str(v.name)] = v.value;
            return out;
        },
        py::arg("labels"), py::arg("probabilities"));

    m.def(
        "regression_metrics",
        [](const std::vector<double>& target, const std::vector<double>& predicted) {
            auto report = eval::regression_metrics(target, predicted);
            py::dict out;
            for (const auto& v : report.values) out[py::str(v.name)] = v.value;
            return out;
        },
        py::arg("target"), py::arg("predicted"));

    m.def(
        "pca_project",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> points,
           const std::vector<std::string>& sources) {
            const std::size_t n = static_cast<std::size_t>(points.shape(0));
            const std::size_t dim = static_cast<std::size_t>(points.shape(1));
            std::vector<std::vector<double>> rows(n, std::vector<double>(dim));
            auto acc = points.unchecked<2>();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < dim; ++j)
                    rows[i][j] = acc(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(j));
            auto exported = eval::pca_export(rows, sources);
            py::array_t<double> proj({static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(2)});
            auto pacc = proj.mutable_unchecked<2>();
            for (std::size_t i = 0; i < n; ++i) {
                pacc(static_cast<py::ssize_t>(i), 0) = exported.projected[i][0];
                pacc(static_cast<py::ssize_t>(i), 1) = exported.projected[i][1];
            }
            return py::make_tuple(proj, to_array(exported.explained_ratio));
        },
        py::arg("points"), py::arg("sources"),
        "Top-2 principal projection of tagged points; returns (projections, "
        "explained variance ratios).");
}
