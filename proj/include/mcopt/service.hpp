#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcopt/catalog.hpp"
#include "mcopt/config.hpp"
#include "mcopt/designer.hpp"

namespace mcopt {

struct FieldError {
    std::string field;
    std::string message;
};

/// A design request failed validation; carries every offending field.
class RequestError : public Error {
public:
    RequestError(ErrorCode code, std::vector<FieldError> fields);

    const std::vector<FieldError>& fields() const noexcept { return fields_; }

private:
    std::vector<FieldError> fields_;
};

struct DesignRequest {
    DesignRequirements requirements;
    DesignDefaults defaults;
    EvaluationConfig evaluation;
    std::size_t top_n = 8;
};

/// Parses and validates a request body. Usage and battery-type labels are
/// resolved through `config`; missing overrides fall back to it.
DesignRequest parse_design_request(const nlohmann::json& body, const AppConfig& config);

struct Reply {
    int status = 200;
    nlohmann::json body;
};

/// JSON body of a failure: {"error": {"code", "message", ...}}.
nlohmann::json error_body(const Error& error);

/// Runs a design request and renders the response shared by the CLI and the
/// HTTP service. timing_ms covers parsing, screening and ranking.
Reply run_design(const ComboDatabase& db, const std::string& fingerprint,
                 const nlohmann::json& body, const AppConfig& config);

/// Stateless request handlers over one immutable database snapshot.
class DesignService {
public:
    DesignService(ComboDatabase db, AppConfig config);

    Reply design(const std::string& body) const;
    Reply combinations(std::size_t offset, std::size_t limit) const;
    Reply convert(const std::optional<std::string>& combo, const std::optional<std::string>& density,
                  const std::optional<std::string>& hover_thrust) const;
    Reply health() const;

    const ComboDatabase& database() const noexcept { return db_; }
    const std::string& fingerprint() const noexcept { return fingerprint_; }

private:
    const ComboDatabase db_;
    const std::string fingerprint_;
    const AppConfig config_;
};

/// HTTP front end for a DesignService.
class HttpServer {
public:
    explicit HttpServer(const DesignService& service);
    ~HttpServer();

    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds to host:port (port 0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop() is called.
    void listen();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace mcopt
