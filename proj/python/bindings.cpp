#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mcopt/catalog.hpp"
#include "mcopt/config.hpp"
#include "mcopt/offline.hpp"
#include "mcopt/physics.hpp"
#include "mcopt/service.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

// Python objects cross the boundary as JSON text.
json to_cpp(const py::object& obj) {
    auto dumps = py::module_::import("json").attr("dumps");
    return json::parse(dumps(obj).cast<std::string>());
}

py::object to_py(const json& doc) {
    return py::module_::import("json").attr("loads")(doc.dump());
}

class Database {
public:
    explicit Database(mcopt::ComboDatabase db) : service_(std::move(db), mcopt::resolve_app_config()) {}

    static Database load(const std::filesystem::path& path) {
        return Database(mcopt::load_database(path));
    }

    std::size_t size() const { return service_.database().combos.size(); }
    const std::string& fingerprint() const { return service_.fingerprint(); }

    std::vector<std::string> keys() const {
        std::vector<std::string> out;
        for (const auto& c : service_.database().combos) out.push_back(c.key());
        return out;
    }

    py::tuple design(const py::object& request) const {
        auto reply = service_.design(to_cpp(request).dump());
        return py::make_tuple(reply.status, to_py(reply.body));
    }

    py::tuple convert(const std::string& combo, double density,
                      std::optional<double> hover_thrust) const {
        std::optional<std::string> hover;
        if (hover_thrust) hover = json(*hover_thrust).dump();
        auto reply = service_.convert(combo, json(density).dump(), hover);
        return py::make_tuple(reply.status, to_py(reply.body));
    }

private:
    mcopt::DesignService service_;
};

py::dict build_database(const std::filesystem::path& motors, const std::filesystem::path& escs,
                        const std::filesystem::path& props, const std::filesystem::path& compat,
                        const std::filesystem::path& measurements,
                        std::optional<std::filesystem::path> output, unsigned threads) {
    const auto m = mcopt::load_motors(motors);
    const auto e = mcopt::load_escs(escs);
    const auto p = mcopt::load_props(props);
    const auto table = mcopt::load_compatibility(compat);
    const mcopt::MeasureFn measure = mcopt::load_measurements(measurements);
    mcopt::BuildReport report;
    {
        py::gil_scoped_release release;
        report = mcopt::build_database(m, e, p, table, measure, {}, threads);
    }
    if (output) mcopt::save_database(report.database, *output);
    py::list failures;
    for (const auto& f : report.failures) failures.append(f.motor_id);
    py::dict out;
    out["database"] = to_py(mcopt::database_to_json(report.database));
    out["failures"] = failures;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multicopter propulsion and vehicle design optimizer.";

    py::register_exception<mcopt::Error>(m, "Error");

    m.def("air_density", [](double altitude, double ground_temp, double std_density) {
        return mcopt::air_density(altitude, {ground_temp, std_density});
    }, py::arg("altitude"), py::arg("ground_temp") = 25.0, py::arg("std_density") = 1.293);

    m.def("fit_thrust_current", [](const std::vector<std::pair<double, double>>& samples) {
        std::vector<mcopt::ThrustCurrentSample> rows;
        for (auto [t, i] : samples) rows.push_back({t, i});
        auto fit = mcopt::fit_thrust_current(rows);
        return py::make_tuple(fit.coeffs.k_t0, fit.coeffs.k_t1, fit.coeffs.k_t2, fit.r_squared);
    }, py::arg("samples"), "Quadratic I = k0 + k1 T + k2 T^2; returns (k0, k1, k2, r_squared).");

    m.def("build_database", &build_database, py::arg("motors"), py::arg("escs"), py::arg("props"),
          py::arg("compat"), py::arg("measurements"), py::arg("output") = py::none(),
          py::arg("threads") = 1u);

    py::class_<Database>(m, "Database")
        .def_static("load", &Database::load, py::arg("path"))
        .def("__len__", &Database::size)
        .def_property_readonly("fingerprint", &Database::fingerprint)
        .def("keys", &Database::keys)
        .def("design", &Database::design, py::arg("request"),
             "Runs a design request (dict); returns (http_status, response dict).")
        .def("convert", &Database::convert, py::arg("combo"), py::arg("density"),
             py::arg("hover_thrust") = py::none());
}
