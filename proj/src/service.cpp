#include "mcopt/service.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <chrono>
#include <map>
#include <set>

#include "httplib.h"
#include "mcopt/physics.hpp"

namespace mcopt {

using nlohmann::json;

namespace {

std::string join_fields(const std::vector<FieldError>& fields) {
    std::string out = "invalid request";
    for (std::size_t i = 0; i < fields.size(); ++i) {
        out += i == 0 ? ": " : "; ";
        out += fields[i].field + " " + fields[i].message;
    }
    return out;
}

const std::set<std::string, std::less<>>& known_request_fields() {
    static const std::set<std::string, std::less<>> fields = {
        "hover_time", "payload",        "thrust_ratio", "usage",      "rotor_count",
        "air_density", "altitude",      "battery_density", "battery_type", "layout",
        "top_n",      "defaults",       "weights",      "normalizers", "screening_mode",
    };
    return fields;
}

class RequestReader {
public:
    explicit RequestReader(const json& body) : body_(body) {}

    std::optional<double> number(const char* field) {
        auto it = body_.find(field);
        if (it == body_.end() || it->is_null()) return std::nullopt;
        if (!it->is_number()) {
            fail(field, "must be a number");
            return std::nullopt;
        }
        return it->get<double>();
    }

    std::optional<std::string> text(const char* field) {
        auto it = body_.find(field);
        if (it == body_.end() || it->is_null()) return std::nullopt;
        if (!it->is_string()) {
            fail(field, "must be a string");
            return std::nullopt;
        }
        return it->get<std::string>();
    }

    std::optional<long long> integer(const char* field) {
        auto it = body_.find(field);
        if (it == body_.end() || it->is_null()) return std::nullopt;
        if (it->is_number_integer()) return it->get<long long>();
        // 4.0 is an integer as far as JSON Schema is concerned.
        if (it->is_number_float()) {
            const double v = it->get<double>();
            if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15) {
                return static_cast<long long>(v);
            }
        }
        fail(field, "must be an integer");
        return std::nullopt;
    }

    std::optional<IndexVector> vector7(const char* field) {
        auto it = body_.find(field);
        if (it == body_.end() || it->is_null()) return std::nullopt;
        if (!it->is_array() || it->size() != kIndexCount) {
            fail(field, "must be an array of 7 numbers");
            return std::nullopt;
        }
        IndexVector v{};
        for (std::size_t i = 0; i < kIndexCount; ++i) {
            if (!(*it)[i].is_number() || !((*it)[i].get<double>() > 0.0)) {
                fail(field, "entries must be positive numbers");
                return std::nullopt;
            }
            v[i] = (*it)[i].get<double>();
        }
        return v;
    }

    bool has(const char* field) const {
        auto it = body_.find(field);
        return it != body_.end() && !it->is_null();
    }

    void fail(std::string field, std::string message) {
        errors_.push_back({std::move(field), std::move(message)});
    }

    std::vector<FieldError>& errors() { return errors_; }

private:
    const json& body_;
    std::vector<FieldError> errors_;
};

json rejection_summary(const std::vector<ComboRejection>& rejections) {
    std::map<std::string, std::size_t> counts;
    for (const auto& r : rejections) ++counts[std::string(to_string(r.reason))];

    std::vector<const ComboRejection*> ranked;
    for (const auto& r : rejections) ranked.push_back(&r);
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto* a, const auto* b) {
        const double ea = a->relative_error.value_or(std::numeric_limits<double>::infinity());
        const double eb = b->relative_error.value_or(std::numeric_limits<double>::infinity());
        if (ea != eb) return ea < eb;
        return a->combo < b->combo;
    });
    json nearest = json::array();
    for (std::size_t i = 0; i < ranked.size() && i < 5; ++i) {
        const auto& r = *ranked[i];
        json row = {{"combo", r.combo}, {"reason", to_string(r.reason)}, {"detail", r.detail}};
        if (r.relative_error) row["relative_error"] = *r.relative_error;
        nearest.push_back(std::move(row));
    }
    return json{{"rejected", rejections.size()}, {"by_reason", counts}, {"nearest", nearest}};
}

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_request:
        case ErrorCode::validation_error:
        case ErrorCode::unsupported_layout:
        case ErrorCode::parse_error:
            return 400;
        case ErrorCode::unknown_combo:
            return 404;
        case ErrorCode::no_feasible_design:
        case ErrorCode::unresolved_normalizer:
        case ErrorCode::domain_error:
            return 422;
        default:
            return 500;
    }
}

std::optional<double> parse_double(const std::string& text) {
    double value = 0.0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return value;
}

std::optional<std::size_t> parse_size(const std::string& text) {
    std::size_t value = 0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return value;
}

}  // namespace

RequestError::RequestError(ErrorCode code, std::vector<FieldError> fields)
    : Error(code, join_fields(fields)), fields_(std::move(fields)) {}

DesignRequest parse_design_request(const json& body, const AppConfig& config) {
    if (!body.is_object()) {
        throw RequestError(ErrorCode::invalid_request, {{"body", "must be a JSON object"}});
    }
    RequestReader in(body);
    for (const auto& [key, value] : body.items()) {
        if (!known_request_fields().contains(key)) in.fail(key, "is not a recognised field");
    }

    DesignRequest out;
    out.defaults = config.defaults;
    out.evaluation = config.evaluation;
    auto& req = out.requirements;

    auto positive = [&](const char* field, bool required) -> double {
        auto v = in.number(field);
        if (!v) {
            if (required && !in.has(field)) in.fail(field, "is required");
            return 0.0;
        }
        if (!(*v > 0.0)) in.fail(field, "must be positive");
        return *v;
    };

    req.hover_time = positive("hover_time", true);
    req.payload = positive("payload", true);

    const bool has_ratio = in.has("thrust_ratio");
    const bool has_usage = in.has("usage");
    if (has_ratio && has_usage) {
        in.fail("thrust_ratio", "give either thrust_ratio or usage, not both");
    } else if (has_usage) {
        if (auto usage = in.text("usage")) {
            auto it = config.usage_presets.find(*usage);
            if (it == config.usage_presets.end()) {
                in.fail("usage", "unknown usage preset '" + *usage + "'");
            } else {
                req.thrust_ratio = it->second.thrust_ratio;
            }
        }
    } else if (auto ratio = in.number("thrust_ratio")) {
        req.thrust_ratio = *ratio;
        if (!(*ratio > 0.0 && *ratio < 1.0)) in.fail("thrust_ratio", "must lie in (0, 1)");
    } else if (!has_ratio) {
        in.fail("thrust_ratio", "is required (or give usage)");
    }

    if (auto rotors = in.integer("rotor_count")) {
        if (*rotors == 3 || (*rotors >= 4 && *rotors % 2 == 0 && *rotors <= 64)) {
            req.rotor_count = static_cast<int>(*rotors);
        } else {
            in.fail("rotor_count", "must be 3 or an even number >= 4");
        }
    }

    const bool has_density = in.has("air_density");
    const bool has_altitude = in.has("altitude");
    if (has_density == has_altitude) {
        in.fail("air_density", "give exactly one of air_density and altitude");
    } else if (has_density) {
        if (auto rho = in.number("air_density")) {
            if (*rho > 0.0 && *rho < 1.5) req.air_density = *rho;
            else in.fail("air_density", "must lie in (0, 1.5)");
        }
    } else if (auto h = in.number("altitude")) {
        if (*h >= 0.0 && *h < 20000.0) req.altitude = *h;
        else in.fail("altitude", "must lie in [0, 20000)");
    }

    const bool has_energy = in.has("battery_density");
    const bool has_type = in.has("battery_type");
    if (has_energy && has_type) {
        in.fail("battery_density", "give either battery_density or battery_type, not both");
    } else if (has_type) {
        if (auto type = in.text("battery_type")) {
            auto it = config.battery_types.find(*type);
            if (it == config.battery_types.end()) {
                in.fail("battery_type", "unknown battery type '" + *type + "'");
            } else {
                req.battery_density = it->second.energy_density;
            }
        }
    } else {
        req.battery_density = positive("battery_density", true);
    }

    bool coaxial = false;
    if (auto layout = in.text("layout")) {
        if (*layout == "coaxial") coaxial = true;
        else if (*layout != "common") in.fail("layout", "must be common or coaxial");
    }

    if (auto top = in.integer("top_n")) {
        if (*top >= 1 && *top <= 1000) out.top_n = static_cast<std::size_t>(*top);
        else in.fail("top_n", "must lie in [1, 1000]");
    }
    if (auto w = in.vector7("weights")) out.evaluation.weights = *w;
    if (auto n = in.vector7("normalizers")) out.evaluation.normalizers = *n;

    if (auto it = body.find("defaults"); it != body.end() && !it->is_null()) {
        try {
            out.defaults = apply_overrides(out.defaults, *it);
        } catch (const ValidationError& e) {
            in.fail("defaults." + e.field(), e.what());
        }
    }
    if (auto mode = in.text("screening_mode")) {
        if (auto parsed = parse_screening_mode(*mode)) out.defaults.screening_mode = *parsed;
        else in.fail("screening_mode", "must be one of hover_time, payload, thrust_ratio");
    }

    if (!in.errors().empty()) throw RequestError(ErrorCode::invalid_request, in.errors());
    if (coaxial) {
        throw RequestError(ErrorCode::unsupported_layout,
                           {{"layout", "only the common layout is supported"}});
    }
    try {
        validate(req);
    } catch (const ValidationError& e) {
        throw RequestError(ErrorCode::invalid_request, {{e.field(), e.what()}});
    }
    return out;
}

json error_body(const Error& error) {
    json e = {{"code", to_string(error.code())}, {"message", error.what()}};
    if (const auto* req = dynamic_cast<const RequestError*>(&error)) {
        json fields = json::array();
        for (const auto& f : req->fields()) {
            fields.push_back({{"field", f.field}, {"message", f.message}});
        }
        e["fields"] = std::move(fields);
    } else if (const auto* v = dynamic_cast<const ValidationError*>(&error)) {
        e["fields"] = json::array({{{"field", v->field()}, {"message", error.what()}}});
    }
    return json{{"error", std::move(e)}};
}

Reply run_design(const ComboDatabase& db, const std::string& fingerprint, const json& body,
                 const AppConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    auto elapsed_ms = [&] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    };
    Reply reply;
    try {
        const DesignRequest request = parse_design_request(body, config);
        const DesignResult result =
            design(db, request.requirements, request.defaults, request.evaluation, request.top_n);
        reply.body = json{{"candidates", result.candidates},
                          {"accepted_count", result.accepted_count},
                          {"normalizer_class", result.normalizer_class},
                          {"normalizers", result.normalizers},
                          {"database_fingerprint", fingerprint}};
    } catch (const NoFeasibleDesign& e) {
        reply.status = 422;
        reply.body = error_body(e);
        reply.body["rejection_summary"] = rejection_summary(e.rejections());
        reply.body["database_fingerprint"] = fingerprint;
    } catch (const Error& e) {
        reply.status = status_for(e.code());
        reply.body = error_body(e);
    }
    reply.body["timing_ms"] = elapsed_ms();
    return reply;
}

DesignService::DesignService(ComboDatabase db, AppConfig config)
    : db_(std::move(db)), fingerprint_(database_fingerprint(db_)), config_(std::move(config)) {}

Reply DesignService::design(const std::string& body) const {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::exception& e) {
        return {400, error_body(Error(ErrorCode::parse_error, e.what()))};
    }
    return run_design(db_, fingerprint_, doc, config_);
}

Reply DesignService::combinations(std::size_t offset, std::size_t limit) const {
    if (limit < 1 || limit > 500) {
        return {400, error_body(RequestError(ErrorCode::invalid_request,
                                             {{"limit", "must lie in [1, 500]"}}))};
    }
    json rows = json::array();
    for (std::size_t i = offset; i < db_.combos.size() && i < offset + limit; ++i) {
        json row = db_.combos[i];
        row["key"] = db_.combos[i].key();
        rows.push_back(std::move(row));
    }
    return {200, json{{"total", db_.combos.size()},
                      {"offset", offset},
                      {"limit", limit},
                      {"combos", std::move(rows)}}};
}

Reply DesignService::convert(const std::optional<std::string>& combo,
                             const std::optional<std::string>& density,
                             const std::optional<std::string>& hover_thrust) const {
    std::vector<FieldError> errors;
    if (!combo) errors.push_back({"combo", "is required"});
    std::optional<double> rho;
    if (!density) {
        errors.push_back({"density", "is required"});
    } else if (rho = parse_double(*density); !rho || !(*rho > 0.0 && *rho < 1.5)) {
        errors.push_back({"density", "must be a number in (0, 1.5)"});
    }
    std::optional<double> thrust;
    if (hover_thrust) {
        thrust = parse_double(*hover_thrust);
        if (!thrust || !(*thrust > 0.0)) errors.push_back({"hover_thrust", "must be positive"});
    }
    if (!errors.empty()) return {400, error_body(RequestError(ErrorCode::invalid_request, errors))};

    const PropulsionCombo* c = db_.find(*combo);
    if (c == nullptr) {
        return {404, error_body(Error(ErrorCode::unknown_combo, "unknown combo '" + *combo + "'"))};
    }
    try {
        const auto full = convert_full_throttle(*c, *rho);
        json out = {{"combo", c->key()},
                    {"reference_density", c->ref_air_density},
                    {"target_density", *rho},
                    {"k_n", solve_kn(*c)},
                    {"reference",
                     {{"full_throttle_speed", c->full_throttle_speed},
                      {"full_throttle_thrust", c->full_throttle_thrust}}},
                    {"full_throttle_speed", full.speed},
                    {"full_throttle_thrust", full.thrust}};
        if (thrust) {
            const double current = eval_thrust_current(c->fit, *thrust);
            const double converted = convert_hover_current(*c, *thrust, current, *rho);
            out["hover"] = {{"thrust", *thrust},
                            {"speed_reference", hover_speed(*c, *thrust)},
                            {"speed", hover_speed_at_density(*c, *thrust, *rho)},
                            {"esc_current_reference", current},
                            {"esc_current", converted},
                            {"current_ratio", converted / current}};
        }
        return {200, std::move(out)};
    } catch (const Error& e) {
        return {status_for(e.code()), error_body(e)};
    }
}

Reply DesignService::health() const {
    return {200, json{{"status", "ok"},
                      {"database_fingerprint", fingerprint_},
                      {"schema_version", db_.schema_version},
                      {"combo_count", db_.combos.size()}}};
}

// ---------------------------------------------------------------------------

struct HttpServer::Impl {
    const DesignService& service;
    httplib::Server server;

    explicit Impl(const DesignService& s) : service(s) {}
};

namespace {

void send(httplib::Response& res, const Reply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(2), "application/json");
}

std::optional<std::string> param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return std::nullopt;
    return req.get_param_value(name);
}

}  // namespace

HttpServer::HttpServer(const DesignService& service) : impl_(std::make_unique<Impl>(service)) {
    auto& svr = impl_->server;
    const DesignService& s = service;

    svr.Post("/api/v1/design", [&s](const httplib::Request& req, httplib::Response& res) {
        send(res, s.design(req.body));
    });
    svr.Get("/api/v1/combinations", [&s](const httplib::Request& req, httplib::Response& res) {
        std::vector<FieldError> errors;
        std::size_t offset = 0;
        std::size_t limit = 50;
        if (auto v = param(req, "offset")) {
            if (auto n = parse_size(*v)) offset = *n;
            else errors.push_back({"offset", "must be a non-negative integer"});
        }
        if (auto v = param(req, "limit")) {
            if (auto n = parse_size(*v)) limit = *n;
            else errors.push_back({"limit", "must be a positive integer"});
        }
        if (!errors.empty()) {
            send(res, {400, error_body(RequestError(ErrorCode::invalid_request, errors))});
            return;
        }
        send(res, s.combinations(offset, limit));
    });
    svr.Get("/api/v1/convert", [&s](const httplib::Request& req, httplib::Response& res) {
        send(res, s.convert(param(req, "combo"), param(req, "density"), param(req, "hover_thrust")));
    });
    svr.Get("/healthz", [&s](const httplib::Request&, httplib::Response& res) {
        send(res, s.health());
    });
    svr.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) {
            const auto code = res.status == 404 ? "not_found" : "http_error";
            res.set_content(json{{"error", {{"code", code}, {"message", "no such endpoint"}}}}.dump(2),
                            "application/json");
        }
    });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    if (!impl_->server.bind_to_port(host, port)) {
        throw Error(ErrorCode::io_error, "cannot bind to " + host + ":" + std::to_string(port));
    }
    return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_->server.is_running()) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace mcopt
