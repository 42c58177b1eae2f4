#include "acme/ising/aggregate.hpp"
#include "acme/ising/query.hpp"
#include "acme/ising/timeout.hpp"
#include "acme/simnet/experiments.hpp"
#include "acme/simnet/report.hpp"
#include "acme/simnet/scenario.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace acme;

namespace {

py::dict query_dict(const ising::SensorQuery& q) {
    py::dict d;
    d["port"] = q.port;
    d["sensor"] = q.sensor;
    d["host"] = q.host ? py::cast(*q.host) : py::none();
    d["op"] = std::string(ising::to_string(q.op));
    d["epoch_ms"] = q.epoch_ms;
    d["url"] = ising::format_query(q);
    return d;
}

std::vector<std::string> aggregate(const std::string& op, const std::vector<std::string>& data) {
    auto p = ising::PartialAggregate(ising::aggregate_from_string(op));
    for (std::size_t i = 0; i < data.size(); ++i) {
        p.merge(ising::init_partial(p.op(), std::vector<ising::SensorValue>{{"n" + std::to_string(i), 0, data[i]}}));
    }
    std::vector<std::string> out;
    for (const auto& t : ising::finalize_partial(p, "local", 0)) out.push_back(t.data);
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Tree aggregation, trigger engine and simulator bindings";

    py::register_exception<ising::QueryParseError>(m, "QueryParseError", PyExc_ValueError);
    py::register_exception<simnet::ScenarioError>(m, "ScenarioError", PyExc_ValueError);

    m.def("parse_query", [](const std::string& url) { return query_dict(ising::parse_query(url)); }, py::arg("url"));
    m.def("aggregate", &aggregate, py::arg("op"), py::arg("values"),
          "Tree-merges one value per node and returns the result data.");
    m.def("node_timeout", &ising::node_timeout, py::arg("node_depth"), py::arg("max_depth"),
          py::arg("compute_max_ms"), py::arg("latency_max_ms"));

    m.def(
        "tree_shape",
        [](std::size_t n, const std::vector<std::uint64_t>& seeds, std::size_t digits) {
            py::list rows;
            for (const auto& r : simnet::run_tree_experiment({}, n, digits, seeds)) {
                py::dict d;
                d["seed"] = r.seed;
                d["n"] = r.n;
                d["avg_depth"] = r.avg_depth;
                d["max_depth"] = r.max_depth;
                d["root_children"] = r.root_children;
                rows.append(d);
            }
            return rows;
        },
        py::arg("n"), py::arg("seeds"), py::arg("digits") = 16);

    m.def(
        "run_scenario",
        [](const std::filesystem::path& path, const std::filesystem::path& out, std::optional<std::uint64_t> seed) {
            auto s = simnet::load_scenario(path);
            if (seed) s.setup.seed = *seed;
            py::gil_scoped_release release;
            return simnet::run_scenario(s, out);
        },
        py::arg("path"), py::arg("out"), py::arg("seed") = py::none());

    m.def("report_latency", &simnet::report_latency);
    m.def("report_bytes", &simnet::report_bytes);
    m.def("report_loss", &simnet::report_loss);
}
