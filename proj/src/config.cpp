#include "mcopt/config.hpp"

#include <cstdlib>

#include "mcopt/catalog.hpp"

namespace mcopt {

using nlohmann::json;

namespace {

// `label` names the field in errors; defaults to the key itself.
double number_at(const json& obj, const char* record, const std::string& field,
                 const std::string& label = {}) {
    const auto it = obj.is_object() ? obj.find(field) : obj.end();
    if (it == obj.end() || !it->is_number()) {
        throw ValidationError(record, label.empty() ? field : label, "expected a number");
    }
    return it->get<double>();
}

IndexVector index_vector(const json& value, const char* record, const char* field) {
    if (!value.is_array() || value.size() != kIndexCount) {
        throw ValidationError(record, field, "expected an array of 7 numbers");
    }
    IndexVector out{};
    for (std::size_t i = 0; i < kIndexCount; ++i) {
        if (!value[i].is_number()) throw ValidationError(record, field, "expected a number");
        out[i] = value[i].get<double>();
    }
    return out;
}

}  // namespace

AppConfig builtin_config() {
    AppConfig c;
    c.usage_presets = {
        {"heavy_load", {0.55, true, ""}},
        {"balanced", {0.5, true, ""}},
        {"long_endurance", {0.6, false, "starting point, adjust to the fleet"}},
        {"agile", {0.4, false, "starting point, adjust to the fleet"}},
    };
    c.battery_types = {
        {"lipo", {240.0, true, ""}},
        {"lihv", {250.0, false, "typical vendor figure"}},
        {"li_ion", {260.0, false, "typical vendor figure"}},
    };
    return c;
}

AppConfig parse_app_config(const json& doc) {
    if (!doc.is_object()) throw Error(ErrorCode::parse_error, "config must be a JSON object");
    AppConfig c = builtin_config();

    if (auto it = doc.find("usage_presets"); it != doc.end()) {
        c.usage_presets.clear();
        for (const auto& [name, row] : it->items()) {
            UsagePreset p;
            p.thrust_ratio = number_at(row, "usage_presets", "thrust_ratio", name + ".thrust_ratio");
            p.authoritative = row.value("authoritative", false);
            p.note = row.value("note", "");
            c.usage_presets.emplace(name, std::move(p));
        }
    }
    if (auto it = doc.find("battery_types"); it != doc.end()) {
        c.battery_types.clear();
        for (const auto& [name, row] : it->items()) {
            BatteryType b;
            b.energy_density = number_at(row, "battery_types", "energy_density", name + ".energy_density");
            b.authoritative = row.value("authoritative", false);
            b.note = row.value("note", "");
            c.battery_types.emplace(name, std::move(b));
        }
    }
    if (auto it = doc.find("defaults"); it != doc.end()) {
        c.defaults = apply_overrides(c.defaults, *it);
    }
    if (auto it = doc.find("evaluation"); it != doc.end()) {
        const json& e = *it;
        if (auto w = e.find("weights"); w != e.end()) {
            c.evaluation.weights = index_vector(*w, "evaluation", "weights");
        }
        if (auto rows = e.find("normalizer_classes"); rows != e.end()) {
            if (!rows->is_array()) {
                throw ValidationError("evaluation", "normalizer_classes", "expected an array");
            }
            c.evaluation.classes.clear();
            for (const auto& row : *rows) {
                NormalizerClass nc;
                nc.name = row.value("name", "");
                nc.min_mass = number_at(row, "normalizer_classes", "min_mass");
                nc.max_mass = number_at(row, "normalizer_classes", "max_mass");
                nc.normalizers =
                    index_vector(row.value("normalizers", json()), "normalizer_classes", "normalizers");
                c.evaluation.classes.push_back(std::move(nc));
            }
        }
    }
    if (auto it = doc.find("mep_weights"); it != doc.end()) {
        c.mep_weights.thrust = number_at(*it, "mep_weights", "thrust");
        c.mep_weights.efficiency = number_at(*it, "mep_weights", "efficiency");
        c.mep_weights.mass = number_at(*it, "mep_weights", "mass");
    }
    validate(c);
    return c;
}

json to_json(const DesignDefaults& d) {
    return json{{"airframe_ratio", d.airframe_ratio},
                {"discharge_ratio", d.discharge_ratio},
                {"other_current", d.other_current},
                {"battery_margin", d.battery_margin},
                {"prop_gap", d.prop_gap},
                {"gravity", d.gravity},
                {"screening_tolerance", d.screening_tolerance},
                {"screening_mode", to_string(d.screening_mode)},
                {"ground_temperature", d.atmosphere.ground_temp},
                {"reference_density", d.atmosphere.std_density}};
}

json to_json(const AppConfig& c) {
    json presets = json::object();
    for (const auto& [name, p] : c.usage_presets) {
        presets[name] = {{"thrust_ratio", p.thrust_ratio}, {"authoritative", p.authoritative}};
        if (!p.note.empty()) presets[name]["note"] = p.note;
    }
    json batteries = json::object();
    for (const auto& [name, b] : c.battery_types) {
        batteries[name] = {{"energy_density", b.energy_density}, {"authoritative", b.authoritative}};
        if (!b.note.empty()) batteries[name]["note"] = b.note;
    }
    json classes = json::array();
    for (const auto& nc : c.evaluation.classes) {
        classes.push_back({{"name", nc.name},
                           {"min_mass", nc.min_mass},
                           {"max_mass", nc.max_mass},
                           {"normalizers", nc.normalizers}});
    }
    return json{{"usage_presets", presets},
                {"battery_types", batteries},
                {"defaults", to_json(c.defaults)},
                {"evaluation", {{"weights", c.evaluation.weights}, {"normalizer_classes", classes}}},
                {"mep_weights",
                 {{"thrust", c.mep_weights.thrust},
                  {"efficiency", c.mep_weights.efficiency},
                  {"mass", c.mep_weights.mass}}}};
}

AppConfig load_app_config(const std::filesystem::path& path) {
    return parse_app_config(read_json_file(path));
}

AppConfig resolve_app_config(const std::optional<std::filesystem::path>& explicit_path) {
    if (explicit_path) return load_app_config(*explicit_path);
    if (const char* env = std::getenv(kConfigEnvVar); env != nullptr && *env != '\0') {
        return load_app_config(env);
    }
    return builtin_config();
}

void validate(const AppConfig& c) {
    for (const auto& [name, p] : c.usage_presets) {
        if (!(p.thrust_ratio > 0.0 && p.thrust_ratio < 1.0)) {
            throw ValidationError("usage_presets", name, "thrust_ratio must lie in (0, 1)");
        }
    }
    for (const auto& [name, b] : c.battery_types) {
        if (!(b.energy_density > 0.0)) {
            throw ValidationError("battery_types", name, "energy_density must be positive");
        }
    }
    validate(c.defaults);
    validate(c.evaluation);
    if (!(c.mep_weights.thrust > 0.0 && c.mep_weights.efficiency > 0.0 &&
          c.mep_weights.mass > 0.0)) {
        throw ValidationError("mep_weights", "weights", "must be positive");
    }
}

DesignDefaults apply_overrides(DesignDefaults d, const json& overrides) {
    if (!overrides.is_object()) {
        throw ValidationError("defaults", "defaults", "expected an object");
    }
    for (const auto& [key, value] : overrides.items()) {
        if (key == "screening_mode") {
            auto mode = value.is_string() ? parse_screening_mode(value.get<std::string>())
                                          : std::nullopt;
            if (!mode) {
                throw ValidationError("defaults", key,
                                      "expected one of hover_time, payload, thrust_ratio");
            }
            d.screening_mode = *mode;
            continue;
        }
        if (!value.is_number()) throw ValidationError("defaults", key, "expected a number");
        const double v = value.get<double>();
        if (key == "airframe_ratio") d.airframe_ratio = v;
        else if (key == "discharge_ratio") d.discharge_ratio = v;
        else if (key == "other_current") d.other_current = v;
        else if (key == "battery_margin") d.battery_margin = v;
        else if (key == "prop_gap") d.prop_gap = v;
        else if (key == "gravity") d.gravity = v;
        else if (key == "screening_tolerance") d.screening_tolerance = v;
        else if (key == "ground_temperature") d.atmosphere.ground_temp = v;
        else if (key == "reference_density") d.atmosphere.std_density = v;
        else throw ValidationError("defaults", key, "unknown key");
    }
    validate(d);
    return d;
}

}  // namespace mcopt
