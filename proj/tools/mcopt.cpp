// mcopt command line: database building, design queries, density conversion,
// curve fitting and the HTTP service.

#include <csignal>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "mcopt/catalog.hpp"
#include "mcopt/config.hpp"
#include "mcopt/designer.hpp"
#include "mcopt/offline.hpp"
#include "mcopt/physics.hpp"
#include "mcopt/service.hpp"

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNoCombos = 2;
constexpr int kExitInfeasible = 3;

struct BuildDbArgs {
    std::string motors, escs, props, compat, measurements, output, config;
    unsigned threads = 1;
    bool estimate = false;
    bool legacy_units = false;
};

struct DesignArgs {
    std::string db, config, format = "table", screening_mode, usage, battery_type;
    std::optional<double> time, payload, thrust_ratio, altitude, density, battery_density, tolerance;
    int rotors = 4;
    int top = 8;
};

struct ServeArgs {
    std::string db, config, host = "127.0.0.1";
    int port = 8080;
};

struct ConvertArgs {
    std::string db, combo;
    double density = 0.0;
    std::optional<double> hover_thrust;
};

struct FitArgs {
    std::string samples;
};

std::optional<std::filesystem::path> config_path(const std::string& flag) {
    if (flag.empty()) return std::nullopt;
    return std::filesystem::path(flag);
}

void print_rejections(std::ostream& out, const std::vector<mcopt::RejectedPair>& rejections) {
    for (const auto& r : rejections) {
        out << "    " << r.esc_id << " + " << r.prop_id << ": " << mcopt::to_string(r.reason);
        if (!r.detail.empty()) out << " (" << r.detail << ")";
        out << '\n';
    }
}

int run_build_db(const BuildDbArgs& a) {
    const mcopt::LoadOptions opts{a.legacy_units};
    const auto motors = mcopt::load_motors(a.motors, opts);
    const auto escs = mcopt::load_escs(a.escs, opts);
    const auto props = mcopt::load_props(a.props, opts);
    const auto compat = mcopt::load_compatibility(a.compat);
    compat.validate_against(motors, escs, props);
    const auto table = mcopt::load_measurements(a.measurements, opts);
    const auto app = mcopt::resolve_app_config(config_path(a.config));

    mcopt::MeasureFn measure = table;
    if (a.estimate) {
        mcopt::PhysicsEstimator estimator;
        measure = [table, estimator](const mcopt::MotorSpec& m, const mcopt::EscSpec& e,
                                     const mcopt::PropSpec& p) {
            auto row = table(m, e, p);
            return row ? row : estimator(m, e, p);
        };
    }
    mcopt::MepObjectiveConfig cfg;
    cfg.weights = app.mep_weights;
    const auto report = mcopt::build_database(motors, escs, props, compat, measure, cfg, a.threads);

    std::cout << "motor                     esc                       prop                J_mep\n";
    for (const auto& c : report.database.combos) {
        std::cout << std::left << std::setw(26) << c.motor_id << std::setw(26) << c.esc_id
                  << std::setw(20) << c.prop_id << std::fixed << std::setprecision(4)
                  << c.mep_score << '\n';
    }
    for (const auto& f : report.failures) {
        std::cout << f.motor_id << ": no feasible pairing\n";
        print_rejections(std::cout, f.rejections);
    }
    std::cout << report.database.combos.size() << " combination(s), " << report.failures.size()
              << " motor(s) without a feasible pairing\n";

    if (report.database.combos.empty()) return kExitNoCombos;
    mcopt::save_database(report.database, a.output);
    return kExitOk;
}

json design_request_json(const DesignArgs& a) {
    json body = json::object();
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) body[key] = *v;
    };
    put("hover_time", a.time);
    put("payload", a.payload);
    put("thrust_ratio", a.thrust_ratio);
    put("altitude", a.altitude);
    put("air_density", a.density);
    put("battery_density", a.battery_density);
    if (!a.usage.empty()) body["usage"] = a.usage;
    if (!a.battery_type.empty()) body["battery_type"] = a.battery_type;
    if (!a.screening_mode.empty()) body["screening_mode"] = a.screening_mode;
    if (a.tolerance) body["defaults"] = {{"screening_tolerance", *a.tolerance}};
    body["rotor_count"] = a.rotors;
    body["top_n"] = a.top;
    return body;
}

void print_table(std::ostream& out, const json& body) {
    out << std::left << std::setw(3) << "#" << std::setw(22) << "motor" << std::setw(22) << "esc"
        << std::setw(16) << "prop" << std::right << std::setw(9) << "mass kg" << std::setw(9)
        << "diam mm" << std::setw(15) << "battery" << std::setw(9) << "time" << std::setw(8)
        << "J" << '\n';
    int rank = 1;
    for (const auto& c : body["candidates"]) {
        std::ostringstream battery;
        battery << std::fixed << std::setprecision(1) << c["battery"]["voltage"].get<double>()
                << "V/" << std::setprecision(0) << c["battery"]["capacity"].get<double>();
        out << std::left << std::setw(3) << rank++ << std::setw(22)
            << c["combo_ref"]["motor_id"].get<std::string>() << std::setw(22)
            << c["combo_ref"]["esc_id"].get<std::string>() << std::setw(16)
            << c["combo_ref"]["prop_id"].get<std::string>() << std::right << std::fixed
            << std::setprecision(3) << std::setw(9) << c["copter_mass"].get<double>()
            << std::setprecision(0) << std::setw(9)
            << 1000.0 * c["airframe"]["diameter"].get<double>() << std::setw(15) << battery.str()
            << std::setprecision(1) << std::setw(9) << c["achieved_time"].get<double>()
            << std::setprecision(3) << std::setw(8) << c["objective"].get<double>() << '\n';
    }
    out << body["accepted_count"].get<std::size_t>() << " accepted, normalizer class "
        << body["normalizer_class"].get<std::string>() << ", " << std::setprecision(2)
        << body["timing_ms"].get<double>() << " ms\n";
}

void print_infeasible(std::ostream& out, const json& body) {
    out << "no feasible design: " << body["error"]["message"].get<std::string>() << '\n';
    if (!body.contains("rejection_summary")) return;
    const auto& summary = body["rejection_summary"];
    for (const auto& [reason, count] : summary["by_reason"].items()) {
        out << "  " << reason << ": " << count.get<std::size_t>() << '\n';
    }
    out << "nearest misses:\n";
    for (const auto& row : summary["nearest"]) {
        out << "  " << row["combo"].get<std::string>() << "  " << row["reason"].get<std::string>()
            << "  " << row["detail"].get<std::string>() << '\n';
    }
}

int run_design_cmd(const DesignArgs& a) {
    if (a.format != "json" && a.format != "table") {
        std::cerr << "--format must be json or table\n";
        return kExitError;
    }
    const auto app = mcopt::resolve_app_config(config_path(a.config));
    const auto db = mcopt::load_database(a.db);
    const auto reply =
        mcopt::run_design(db, mcopt::database_fingerprint(db), design_request_json(a), app);

    if (reply.status == 200) {
        if (a.format == "json") std::cout << reply.body.dump(2) << '\n';
        else print_table(std::cout, reply.body);
        return kExitOk;
    }
    if (reply.status == 422 && reply.body["error"]["code"] == "no_feasible_design") {
        if (a.format == "json") std::cout << reply.body.dump(2) << '\n';
        print_infeasible(std::cerr, reply.body);
        return kExitInfeasible;
    }
    std::cerr << "error [" << reply.body["error"]["code"].get<std::string>()
              << "]: " << reply.body["error"]["message"].get<std::string>() << '\n';
    return kExitError;
}

mcopt::HttpServer* g_server = nullptr;

void handle_signal(int) {
    if (g_server != nullptr) g_server->stop();
}

int run_serve(const ServeArgs& a) {
    auto app = mcopt::resolve_app_config(config_path(a.config));
    mcopt::DesignService service(mcopt::load_database(a.db), std::move(app));
    mcopt::HttpServer server(service);
    const int port = server.bind(a.host, a.port);
    g_server = &server;
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    std::cout << "serving " << service.database().combos.size() << " combinations on http://"
              << a.host << ":" << port << " (database " << service.fingerprint().substr(0, 12)
              << ")" << std::endl;
    server.listen();
    g_server = nullptr;
    return kExitOk;
}

int run_convert(const ConvertArgs& a) {
    mcopt::DesignService service(mcopt::load_database(a.db), mcopt::builtin_config());
    std::optional<std::string> hover;
    if (a.hover_thrust) hover = std::to_string(*a.hover_thrust);
    std::ostringstream density;
    density << std::setprecision(17) << a.density;
    const auto reply = service.convert(a.combo, density.str(), hover);
    (reply.status == 200 ? std::cout : std::cerr) << reply.body.dump(2) << '\n';
    return reply.status == 200 ? kExitOk : kExitError;
}

int run_fit(const FitArgs& a) {
    const json doc = mcopt::read_json_file(a.samples);
    std::vector<mcopt::ThrustCurrentSample> samples;
    for (const auto& row : doc) {
        samples.push_back({row.at("thrust").get<double>(), row.at("current").get<double>()});
    }
    const auto fit = mcopt::fit_thrust_current(samples);
    std::cout << json{{"k_t0", fit.coeffs.k_t0},
                      {"k_t1", fit.coeffs.k_t1},
                      {"k_t2", fit.coeffs.k_t2},
                      {"r_squared", fit.r_squared},
                      {"n_samples", fit.n_samples}}
                     .dump(2)
              << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multicopter propulsion and vehicle design optimizer"};
    app.require_subcommand(1);

    BuildDbArgs build;
    auto* build_cmd = app.add_subcommand("build-db", "select the best ESC/propeller for every motor");
    build_cmd->add_option("--motors", build.motors, "motor catalog (JSON)")->required();
    build_cmd->add_option("--escs", build.escs, "ESC catalog (JSON)")->required();
    build_cmd->add_option("--props", build.props, "propeller catalog (JSON)")->required();
    build_cmd->add_option("--compat", build.compat, "compatibility table (JSON)")->required();
    build_cmd->add_option("--measurements", build.measurements, "bench measurements (JSON)")
        ->required();
    build_cmd->add_option("-o,--output", build.output, "database to write")->required();
    build_cmd->add_option("--threads", build.threads, "worker threads")->check(CLI::Range(1u, 256u));
    build_cmd->add_flag("--estimate", build.estimate,
                        "estimate unmeasured pairs from the steady-state model");
    build_cmd->add_flag("--legacy-units", build.legacy_units, "read masses above 10 as grams");
    build_cmd->add_option("--config", build.config, "configuration file");

    DesignArgs design;
    auto* design_cmd = app.add_subcommand("design", "rank vehicle designs for a requirement");
    design_cmd->add_option("--db", design.db, "combination database")->required();
    design_cmd->add_option("--time", design.time, "hover time, min")->required();
    design_cmd->add_option("--payload", design.payload, "payload, kg")->required();
    auto* ratio = design_cmd->add_option("--thrust-ratio", design.thrust_ratio,
                                         "hover / full-throttle thrust");
    auto* usage = design_cmd->add_option("--usage", design.usage, "usage preset, e.g. heavy_load");
    ratio->excludes(usage);
    design_cmd->add_option("--rotors", design.rotors, "number of propellers");
    auto* altitude = design_cmd->add_option("--altitude", design.altitude, "altitude, m");
    auto* density = design_cmd->add_option("--density", design.density, "air density, kg/m^3");
    altitude->excludes(density);
    auto* energy = design_cmd->add_option("--battery-density", design.battery_density,
                                          "battery energy density, W*h/kg");
    auto* type = design_cmd->add_option("--battery-type", design.battery_type, "e.g. lipo");
    energy->excludes(type);
    design_cmd->add_option("--top", design.top, "number of designs to list");
    design_cmd->add_option("--format", design.format, "json or table");
    design_cmd->add_option("--tolerance", design.tolerance, "screening tolerance");
    design_cmd->add_option("--screening-mode", design.screening_mode,
                           "hover_time, payload or thrust_ratio");
    design_cmd->add_option("--config", design.config, "configuration file");

    ServeArgs serve;
    auto* serve_cmd = app.add_subcommand("serve", "run the HTTP design service");
    serve_cmd->add_option("--db", serve.db, "combination database")->required();
    serve_cmd->add_option("--port", serve.port, "TCP port")->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--host", serve.host, "bind address");
    serve_cmd->add_option("--config", serve.config, "configuration file");

    ConvertArgs convert;
    auto* convert_cmd = app.add_subcommand("convert", "convert combo data to another air density");
    convert_cmd->add_option("--db", convert.db, "combination database")->required();
    convert_cmd->add_option("--combo", convert.combo, "motor:esc:prop")->required();
    convert_cmd->add_option("--density", convert.density, "target density, kg/m^3")->required();
    convert_cmd->add_option("--hover-thrust", convert.hover_thrust, "hover thrust, N");

    std::optional<std::string> config_path;
    auto* config_cmd =
        app.add_subcommand("config", "print the effective configuration (built-in, MCOPT_CONFIG or --config)");
    config_cmd->add_option("--config", config_path, "configuration file");

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "fit the thrust-current curve of a sample table");
    fit_cmd->add_option("samples", fit.samples, "JSON array of {thrust, current}")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n";
        const CLI::App* failed = &app;
        for (auto* sub : app.get_subcommands()) failed = sub;
        std::cerr << failed->help();
        return kExitError;
    }

    try {
        if (*build_cmd) return run_build_db(build);
        if (*design_cmd) return run_design_cmd(design);
        if (*serve_cmd) return run_serve(serve);
        if (*convert_cmd) return run_convert(convert);
        if (*fit_cmd) return run_fit(fit);
        if (*config_cmd) {
            std::optional<std::filesystem::path> path;
            if (config_path) path = *config_path;
            const auto config = mcopt::resolve_app_config(path);
            mcopt::validate(config);
            std::cout << mcopt::to_json(config).dump(2) << '\n';
            return kExitOk;
        }
    } catch (const mcopt::Error& e) {
        std::cerr << "error [" << mcopt::to_string(e.code()) << "]: " << e.what() << '\n';
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
