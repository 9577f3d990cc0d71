#include "mcopt/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_set>

#include <openssl/evp.h>

#include "mcopt/error.hpp"

namespace mcopt {

using nlohmann::json;

namespace {

// Reads fields from one JSON record and reports failures against that
// record's id (or its position when the id itself is missing).
class RecordReader {
public:
    RecordReader(const json& record, std::size_t index) : record_(record) {
        if (!record.is_object()) {
            throw ValidationError("#" + std::to_string(index), "", "expected an object");
        }
        auto it = record.find("id");
        label_ = (it != record.end() && it->is_string()) ? it->get<std::string>()
                                                           : "#" + std::to_string(index);
    }

    const std::string& label() const { return label_; }

    std::string text(const char* field) const {
        auto it = record_.find(field);
        if (it == record_.end()) {
            throw ValidationError(label_, field, "missing");
        }
        if (!it->is_string()) {
            throw ValidationError(label_, field, "expected a string");
        }
        return it->get<std::string>();
    }

    std::string text_or(const char* field, std::string fallback) const {
        return record_.contains(field) ? text(field) : std::move(fallback);
    }

    double number(const char* field) const {
        auto it = record_.find(field);
        if (it == record_.end()) {
            throw ValidationError(label_, field, "missing");
        }
        if (!it->is_number()) {
            throw ValidationError(label_, field, "expected a number");
        }
        double value = it->get<double>();
        if (!std::isfinite(value)) {
            throw ValidationError(label_, field, "not finite");
        }
        return value;
    }

    std::optional<double> optional_number(const char* field) const {
        auto it = record_.find(field);
        if (it == record_.end() || it->is_null()) {
            return std::nullopt;
        }
        return number(field);
    }

    double mass(const char* field, const LoadOptions& options) const {
        double value = number(field);
        if (options.legacy_units && value > 10.0) {
            value /= 1000.0;
        }
        return value;
    }

    const json& object(const char* field) const {
        auto it = record_.find(field);
        if (it == record_.end() || !it->is_object()) {
            throw ValidationError(label_, field, "expected an object");
        }
        return *it;
    }

private:
    const json& record_;
    std::string label_;
};

void check(bool condition, const std::string& record, const char* field, const char* message) {
    if (!condition) {
        throw ValidationError(record, field, message);
    }
}

const json& expect_array(const json& doc) {
    if (!doc.is_array()) {
        throw Error(ErrorCode::parse_error, "catalog must be a top-level JSON array");
    }
    return doc;
}

template <typename Spec>
void reject_duplicate_ids(const std::vector<Spec>& specs) {
    std::unordered_set<std::string> seen;
    for (const auto& spec : specs) {
        if (!seen.insert(spec.id).second) {
            throw Error(ErrorCode::duplicate_id, "duplicate id '" + spec.id + "'");
        }
    }
}

template <typename Spec, typename ParseOne>
std::vector<Spec> parse_catalog(const json& doc, ParseOne parse_one) {
    std::vector<Spec> specs;
    const auto& array = expect_array(doc);
    specs.reserve(array.size());
    for (std::size_t i = 0; i < array.size(); ++i) {
        RecordReader reader(array[i], i);
        Spec spec = parse_one(reader);
        validate(spec);
        specs.push_back(std::move(spec));
    }
    reject_duplicate_ids(specs);
    return specs;
}

}  // namespace

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "'");
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::parse_error, path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------

void validate(const MotorSpec& m) {
    check(!m.id.empty(), m.id, "id", "must not be empty");
    check(m.kv > 0.0, m.id, "kv", "must be positive");
    check(m.max_current > 0.0, m.id, "max_current", "must be positive");
    check(m.max_voltage > 0.0, m.id, "max_voltage", "must be positive");
    check(m.resistance >= 0.0, m.id, "resistance", "must be non-negative");
    check(m.no_load_current >= 0.0, m.id, "no_load_current", "must be non-negative");
    check(m.no_load_voltage >= 0.0, m.id, "no_load_voltage", "must be non-negative");
    check(m.mass > 0.0, m.id, "mass", "must be positive");
}

void validate(const EscSpec& e) {
    check(!e.id.empty(), e.id, "id", "must not be empty");
    check(e.efficiency > 0.0 && e.efficiency <= 1.0, e.id, "efficiency", "must lie in (0, 1]");
    check(e.max_current > 0.0, e.id, "max_current", "must be positive");
    check(e.max_voltage > 0.0, e.id, "max_voltage", "must be positive");
    check(e.mass >= 0.0, e.id, "mass", "must be non-negative");
}

void validate(const PropSpec& p) {
    check(!p.id.empty(), p.id, "id", "must not be empty");
    check(p.diameter > 0.0, p.id, "diameter", "must be positive");
    check(p.pitch > 0.0, p.id, "pitch", "must be positive");
    check(p.mass >= 0.0, p.id, "mass", "must be non-negative");
    check(!p.thrust_coeff || *p.thrust_coeff > 0.0, p.id, "thrust_coeff", "must be positive");
    check(!p.torque_coeff || *p.torque_coeff > 0.0, p.id, "torque_coeff", "must be positive");
}

std::vector<MotorSpec> parse_motors(const json& doc, const LoadOptions& options) {
    return parse_catalog<MotorSpec>(doc, [&](const RecordReader& r) {
        MotorSpec m;
        m.id = r.text("id");
        m.name = r.text_or("name", m.id);
        m.kv = r.number("kv");
        m.no_load_voltage = r.number("no_load_voltage");
        m.no_load_current = r.number("no_load_current");
        m.resistance = r.number("resistance");
        m.max_current = r.number("max_current");
        m.max_voltage = r.number("max_voltage");
        m.mass = r.mass("mass", options);
        return m;
    });
}

std::vector<EscSpec> parse_escs(const json& doc, const LoadOptions& options) {
    return parse_catalog<EscSpec>(doc, [&](const RecordReader& r) {
        EscSpec e;
        e.id = r.text("id");
        e.name = r.text_or("name", e.id);
        e.max_current = r.number("max_current");
        e.max_voltage = r.number("max_voltage");
        e.efficiency = r.number("efficiency");
        e.mass = r.mass("mass", options);
        return e;
    });
}

std::vector<PropSpec> parse_props(const json& doc, const LoadOptions& options) {
    return parse_catalog<PropSpec>(doc, [&](const RecordReader& r) {
        PropSpec p;
        p.id = r.text("id");
        p.name = r.text_or("name", p.id);
        p.diameter = r.number("diameter");
        p.pitch = r.number("pitch");
        p.mass = r.mass("mass", options);
        p.thrust_coeff = r.optional_number("thrust_coeff");
        p.torque_coeff = r.optional_number("torque_coeff");
        return p;
    });
}

std::vector<MotorSpec> load_motors(const std::filesystem::path& path, const LoadOptions& options) {
    return parse_motors(read_json_file(path), options);
}

std::vector<EscSpec> load_escs(const std::filesystem::path& path, const LoadOptions& options) {
    return parse_escs(read_json_file(path), options);
}

std::vector<PropSpec> load_props(const std::filesystem::path& path, const LoadOptions& options) {
    return parse_props(read_json_file(path), options);
}

void to_json(json& j, const MotorSpec& m) {
    j = json{{"id", m.id},
             {"name", m.name},
             {"kv", m.kv},
             {"no_load_voltage", m.no_load_voltage},
             {"no_load_current", m.no_load_current},
             {"resistance", m.resistance},
             {"max_current", m.max_current},
             {"max_voltage", m.max_voltage},
             {"mass", m.mass}};
}

void to_json(json& j, const EscSpec& e) {
    j = json{{"id", e.id},
             {"name", e.name},
             {"max_current", e.max_current},
             {"max_voltage", e.max_voltage},
             {"efficiency", e.efficiency},
             {"mass", e.mass}};
}

void to_json(json& j, const PropSpec& p) {
    j = json{{"id", p.id},
             {"name", p.name},
             {"diameter", p.diameter},
             {"pitch", p.pitch},
             {"mass", p.mass}};
    if (p.thrust_coeff) j["thrust_coeff"] = *p.thrust_coeff;
    if (p.torque_coeff) j["torque_coeff"] = *p.torque_coeff;
}

// ---------------------------------------------------------------------------
// Compatibility

std::string_view manufacturer_of(std::string_view id) noexcept {
    auto dash = id.find('-');
    if (dash == std::string_view::npos || dash == 0) {
        return {};
    }
    return id.substr(0, dash);
}

void CompatibilityTable::add(std::string motor_id, std::string esc_id, std::string prop_id) {
    entries_.emplace(std::move(motor_id), std::move(esc_id), std::move(prop_id));
}

bool CompatibilityTable::listed(std::string_view motor, std::string_view esc,
                                std::string_view prop) const {
    auto has = [&](std::string_view e, std::string_view p) {
        return entries_.find(std::make_tuple(motor, e, p)) != entries_.end();
    };
    return has(esc, prop) || has(esc, wildcard) || has(wildcard, prop) ||
           has(wildcard, wildcard);
}

bool CompatibilityTable::allows(std::string_view motor, std::string_view esc,
                                std::string_view prop) const {
    if (listed(motor, esc, prop)) {
        return true;
    }
    if (policy_ == CompatPolicy::allow_same_manufacturer) {
        auto maker = manufacturer_of(motor);
        return !maker.empty() && maker == manufacturer_of(esc) && maker == manufacturer_of(prop);
    }
    return false;
}

void CompatibilityTable::validate_against(std::span<const MotorSpec> motors,
                                          std::span<const EscSpec> escs,
                                          std::span<const PropSpec> props) const {
    auto known = [](auto specs, const std::string& id) {
        return std::any_of(specs.begin(), specs.end(),
                           [&](const auto& s) { return s.id == id; });
    };
    for (const auto& [motor, esc, prop] : entries_) {
        std::string label = motor + ":" + esc + ":" + prop;
        check(known(motors, motor), label, "motor", "unknown motor id");
        check(esc == wildcard || known(escs, esc), label, "esc", "unknown esc id");
        check(prop == wildcard || known(props, prop), label, "prop", "unknown prop id");
    }
}

bool check_compatibility(const CompatibilityTable& table, const MotorSpec& motor,
                         const EscSpec& esc, const PropSpec& prop) {
    return table.allows(motor.id, esc.id, prop.id);
}

CompatibilityTable parse_compatibility(const json& doc) {
    if (!doc.is_object()) {
        throw Error(ErrorCode::parse_error, "compatibility table must be a JSON object");
    }
    CompatibilityTable table;
    std::string policy = doc.value("default_policy", "deny-unlisted");
    if (policy == "deny-unlisted") {
        table.set_policy(CompatPolicy::deny_unlisted);
    } else if (policy == "allow-same-manufacturer") {
        table.set_policy(CompatPolicy::allow_same_manufacturer);
    } else {
        throw ValidationError("compat", "default_policy", "unknown policy '" + policy + "'");
    }
    const auto entries = doc.value("entries", json::array());
    if (!entries.is_array()) {
        throw ValidationError("compat", "entries", "expected an array");
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        std::string label = "entries[" + std::to_string(i) + "]";
        if (!e.is_object() || !e.contains("motor") || !e["motor"].is_string()) {
            throw ValidationError(label, "motor", "missing");
        }
        auto id_or_wildcard = [&](const char* field) {
            if (!e.contains(field)) return std::string(CompatibilityTable::wildcard);
            if (!e[field].is_string()) throw ValidationError(label, field, "expected a string");
            return e[field].get<std::string>();
        };
        table.add(e["motor"].get<std::string>(), id_or_wildcard("esc"), id_or_wildcard("prop"));
    }
    return table;
}

CompatibilityTable load_compatibility(const std::filesystem::path& path) {
    return parse_compatibility(read_json_file(path));
}

// ---------------------------------------------------------------------------
// Database

std::string_view to_string(Provenance source) noexcept {
    return source == Provenance::experimental ? "experimental" : "estimated";
}

std::string PropulsionCombo::key() const {
    return motor_id + ":" + esc_id + ":" + prop_id;
}

void validate(const PropulsionCombo& c) {
    const std::string label = c.key();
    auto finite = [](double v) { return std::isfinite(v); };
    check(finite(c.battery_voltage) && c.battery_voltage > 0.0, label, "battery_voltage",
          "must be positive");
    check(finite(c.prop_diameter) && c.prop_diameter > 0.0, label, "prop_diameter",
          "must be positive");
    check(finite(c.kv) && c.kv > 0.0, label, "kv", "must be positive");
    check(finite(c.mass) && c.mass > 0.0, label, "mass", "must be positive");
    check(finite(c.full_throttle_thrust) && c.full_throttle_thrust > 0.0, label,
          "full_throttle_thrust", "must be positive");
    check(finite(c.full_throttle_speed) && c.full_throttle_speed > 0.0, label,
          "full_throttle_speed", "must be positive");
    check(finite(c.full_throttle_current) && c.full_throttle_current > 0.0, label,
          "full_throttle_current", "must be positive");
    check(finite(c.motor_max_current) && c.full_throttle_current <= c.motor_max_current, label,
          "full_throttle_current", "exceeds motor_max_current");
    check(c.ref_air_density > 0.3 && c.ref_air_density < 1.5, label, "ref_air_density",
          "must lie in (0.3, 1.5)");
    check(finite(c.fit.k_t0) && finite(c.fit.k_t1) && finite(c.fit.k_t2), label, "fit_coeffs",
          "not finite");
    const double t = c.full_throttle_thrust;
    const double predicted = c.fit.k_t2 * t * t + c.fit.k_t1 * t + c.fit.k_t0;
    check(std::abs(predicted - c.full_throttle_current) <= 0.10 * c.full_throttle_current, label,
          "fit_coeffs", "fit at full-throttle thrust is not within 10% of full_throttle_current");
}

void ComboDatabase::sort_canonical() {
    std::stable_sort(combos.begin(), combos.end(),
                     [](const PropulsionCombo& a, const PropulsionCombo& b) {
                         if (a.motor_id != b.motor_id) return a.motor_id < b.motor_id;
                         if (a.mep_score != b.mep_score) return a.mep_score > b.mep_score;
                         return a.key() < b.key();
                     });
}

const PropulsionCombo* ComboDatabase::find(std::string_view key) const {
    for (const auto& combo : combos) {
        if (combo.key() == key) {
            return &combo;
        }
    }
    return nullptr;
}

void validate(const ComboDatabase& db) {
    std::unordered_set<std::string> seen;
    for (const auto& combo : db.combos) {
        validate(combo);
        if (!seen.insert(combo.key()).second) {
            throw Error(ErrorCode::duplicate_id, "duplicate combination '" + combo.key() + "'");
        }
    }
}

void to_json(json& j, const PropulsionCombo& c) {
    j = json{{"motor_id", c.motor_id},
             {"esc_id", c.esc_id},
             {"prop_id", c.prop_id},
             {"battery_voltage", c.battery_voltage},
             {"prop_diameter", c.prop_diameter},
             {"kv", c.kv},
             {"mass", c.mass},
             {"full_throttle_thrust", c.full_throttle_thrust},
             {"full_throttle_speed", c.full_throttle_speed},
             {"full_throttle_current", c.full_throttle_current},
             {"motor_max_current", c.motor_max_current},
             {"ref_air_density", c.ref_air_density},
             {"fit_coeffs", {{"k_t0", c.fit.k_t0}, {"k_t1", c.fit.k_t1}, {"k_t2", c.fit.k_t2}}},
             {"source", to_string(c.source)},
             {"mep_score", c.mep_score}};
}

json database_to_json(const ComboDatabase& db) {
    return json{{"schema_version", db.schema_version}, {"combos", db.combos}};
}

ComboDatabase parse_database(const json& doc, const LoadOptions& options) {
    if (!doc.is_object()) {
        throw Error(ErrorCode::parse_error, "database must be a JSON object");
    }
    auto version = doc.find("schema_version");
    if (version == doc.end() || !version->is_string() ||
        version->get<std::string>() != kDatabaseSchemaVersion) {
        throw Error(ErrorCode::schema_version,
                    "unsupported database schema_version " +
                        (version == doc.end() ? std::string("(missing)") : version->dump()) +
                        ", expected \"" + std::string(kDatabaseSchemaVersion) + "\"");
    }
    auto combos = doc.find("combos");
    if (combos == doc.end() || !combos->is_array()) {
        throw Error(ErrorCode::parse_error, "database 'combos' must be an array");
    }
    ComboDatabase db;
    db.combos.reserve(combos->size());
    for (std::size_t i = 0; i < combos->size(); ++i) {
        const json& record = (*combos)[i];
        RecordReader r(record, i);
        PropulsionCombo c;
        c.motor_id = r.text("motor_id");
        c.esc_id = r.text("esc_id");
        c.prop_id = r.text("prop_id");
        c.battery_voltage = r.number("battery_voltage");
        c.prop_diameter = r.number("prop_diameter");
        c.kv = r.number("kv");
        c.mass = r.mass("mass", options);
        c.full_throttle_thrust = r.number("full_throttle_thrust");
        c.full_throttle_speed = r.number("full_throttle_speed");
        c.full_throttle_current = r.number("full_throttle_current");
        c.motor_max_current = r.number("motor_max_current");
        c.ref_air_density = r.number("ref_air_density");
        RecordReader fit(r.object("fit_coeffs"), i);
        c.fit = {fit.number("k_t0"), fit.number("k_t1"), fit.number("k_t2")};
        std::string source = r.text_or("source", "experimental");
        if (source == "experimental") {
            c.source = Provenance::experimental;
        } else if (source == "estimated") {
            c.source = Provenance::estimated;
        } else {
            throw ValidationError(c.key(), "source", "unknown provenance '" + source + "'");
        }
        c.mep_score = r.optional_number("mep_score").value_or(0.0);
        db.combos.push_back(std::move(c));
    }
    validate(db);
    return db;
}

void save_database(const ComboDatabase& db, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::io_error, "cannot write '" + path.string() + "'");
    }
    out << database_to_json(db).dump(2) << '\n';
    if (!out) {
        throw Error(ErrorCode::io_error, "write failed for '" + path.string() + "'");
    }
}

ComboDatabase load_database(const std::filesystem::path& path, const LoadOptions& options) {
    return parse_database(read_json_file(path), options);
}

std::string database_fingerprint(const ComboDatabase& db) {
    const std::string canonical = database_to_json(db).dump();
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(canonical.data(), canonical.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::io_error, "SHA-256 digest failed");
    }
    std::ostringstream hex;
    for (unsigned int i = 0; i < length; ++i) {
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return hex.str();
}

}  // namespace mcopt
