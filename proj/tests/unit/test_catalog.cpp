#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "mcopt/catalog.hpp"

namespace mcopt {
namespace {

using nlohmann::json;

json mn3508_motor_json() {
    return json{{"id", "TMOTOR-MN3508-380"}, {"name", "MN3508 KV380"}, {"kv", 380},
                {"no_load_voltage", 10},     {"no_load_current", 0.5},    {"resistance", 0.138},
                {"max_current", 14},         {"max_voltage", 22.2},       {"mass", 0.0865}};
}

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
    auto path = std::filesystem::temp_directory_path() / ("mcopt_test_" + name);
    std::ofstream(path) << content;
    return path;
}

TEST(LoadCatalog, SingleMotor) {
    auto motors = parse_motors(json::array({mn3508_motor_json()}));
    ASSERT_EQ(motors.size(), 1u);
    EXPECT_EQ(motors[0].kv, 380.0);
    EXPECT_EQ(motors[0].max_voltage, 22.2);
    EXPECT_EQ(motors[0].max_current, 14.0);
}

TEST(LoadCatalog, EmptyArray) {
    EXPECT_TRUE(parse_motors(json::array()).empty());
    EXPECT_TRUE(parse_escs(json::array()).empty());
    EXPECT_TRUE(parse_props(json::array()).empty());
}

TEST(LoadCatalog, NegativeKvNamesField) {
    auto bad = mn3508_motor_json();
    bad["kv"] = -5;
    try {
        parse_motors(json::array({bad}));
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "kv");
        EXPECT_EQ(e.record(), "TMOTOR-MN3508-380");
        EXPECT_EQ(e.code(), ErrorCode::validation_error);
    }
}

TEST(LoadCatalog, MissingFieldNamesRecordAndField) {
    auto bad = mn3508_motor_json();
    bad.erase("resistance");
    try {
        parse_motors(json::array({bad}));
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "resistance");
    }
}

TEST(LoadCatalog, DuplicateIds) {
    try {
        parse_motors(json::array({mn3508_motor_json(), mn3508_motor_json()}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::duplicate_id);
    }
}

TEST(LoadCatalog, OrderPreserved) {
    auto a = mn3508_motor_json();
    auto b = mn3508_motor_json();
    auto c = mn3508_motor_json();
    a["id"] = "Z-1";
    b["id"] = "A-1";
    c["id"] = "M-1";
    auto motors = parse_motors(json::array({a, b, c}));
    EXPECT_EQ(motors[0].id, "Z-1");
    EXPECT_EQ(motors[1].id, "A-1");
    EXPECT_EQ(motors[2].id, "M-1");
}

TEST(LoadCatalog, EscAndPropInvariants) {
    json esc = {{"id", "E"}, {"max_current", 40}, {"max_voltage", 25.2}, {"efficiency", 1.2},
                {"mass", 0.03}};
    EXPECT_THROW(parse_escs(json::array({esc})), ValidationError);
    esc["efficiency"] = 1.0;
    EXPECT_EQ(parse_escs(json::array({esc})).size(), 1u);

    json prop = {{"id", "P"}, {"diameter", 0.381}, {"pitch", 0.127}, {"mass", 0.02},
                 {"thrust_coeff", 0.1}};
    auto props = parse_props(json::array({prop}));
    ASSERT_TRUE(props[0].thrust_coeff);
    EXPECT_FALSE(props[0].torque_coeff);
    prop["torque_coeff"] = -0.01;
    EXPECT_THROW(parse_props(json::array({prop})), ValidationError);
    prop["torque_coeff"] = 0.01;
    prop["pitch"] = 0;
    EXPECT_THROW(parse_props(json::array({prop})), ValidationError);
}

TEST(LoadCatalog, LegacyUnitsOnlyWhenRequested) {
    auto m = mn3508_motor_json();
    m["mass"] = 134.5;
    EXPECT_DOUBLE_EQ(parse_motors(json::array({m}))[0].mass, 134.5);
    EXPECT_DOUBLE_EQ(parse_motors(json::array({m}), {true})[0].mass, 0.1345);
    m["mass"] = 0.0865;
    EXPECT_DOUBLE_EQ(parse_motors(json::array({m}), {true})[0].mass, 0.0865);
}

TEST(LoadCatalog, FileErrors) {
    try {
        load_motors("/nonexistent/motors.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::io_error);
    }
    auto path = temp_file("broken.json", "[{\"id\": ");
    try {
        load_motors(path);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::parse_error);
    }
    auto object = temp_file("object.json", "{}");
    EXPECT_THROW(load_motors(object), Error);
}

TEST(LoadCatalog, SeedCatalogsLoad) {
    auto motors = load_motors(testing::seed_dir() / "motors.json");
    auto escs = load_escs(testing::seed_dir() / "escs.json");
    auto props = load_props(testing::seed_dir() / "props.json");
    EXPECT_GE(motors.size(), 10u);
    auto compat = load_compatibility(testing::seed_dir() / "compat.json");
    EXPECT_NO_THROW(compat.validate_against(motors, escs, props));
}

// ---------------------------------------------------------------------------

MotorSpec motor(const std::string& id) { return {id, id, 500, 10, 0.5, 0.1, 20, 25, 0.1}; }
EscSpec esc(const std::string& id) { return {id, id, 40, 25, 0.95, 0.03}; }
PropSpec prop(const std::string& id) {
    PropSpec p;
    p.id = id;
    p.diameter = 0.3;
    p.pitch = 0.1;
    p.mass = 0.02;
    return p;
}

TEST(Compatibility, ListedTriple) {
    CompatibilityTable t;
    t.add("A-m", "B-e", "C-p");
    EXPECT_TRUE(check_compatibility(t, motor("A-m"), esc("B-e"), prop("C-p")));
}

TEST(Compatibility, AbsentUnderDenyUnlisted) {
    CompatibilityTable t;
    t.add("A-m", "B-e", "C-p");
    EXPECT_FALSE(check_compatibility(t, motor("A-m"), esc("B-e"), prop("D-p")));
    EXPECT_FALSE(check_compatibility(t, motor("X-m"), esc("X-e"), prop("X-p")));
}

TEST(Compatibility, SameManufacturerPolicy) {
    CompatibilityTable t(CompatPolicy::allow_same_manufacturer);
    EXPECT_TRUE(check_compatibility(t, motor("TMOTOR-m"), esc("TMOTOR-e"), prop("TMOTOR-p")));
    EXPECT_FALSE(check_compatibility(t, motor("TMOTOR-m"), esc("TMOTOR-e"), prop("APC-p")));
    // No hyphen, no manufacturer.
    EXPECT_FALSE(check_compatibility(t, motor("m"), esc("m"), prop("m")));
}

TEST(Compatibility, Wildcards) {
    CompatibilityTable t;
    t.add("A-m", "B-e");
    t.add("A-m", "*", "C-p");
    EXPECT_TRUE(t.allows("A-m", "B-e", "anything"));
    EXPECT_TRUE(t.allows("A-m", "other", "C-p"));
    EXPECT_FALSE(t.allows("A-m", "other", "other"));
}

TEST(Compatibility, PureAndRepeatable) {
    CompatibilityTable t(CompatPolicy::allow_same_manufacturer);
    t.add("A-m", "B-e", "C-p");
    for (int i = 0; i < 5; ++i) {
        EXPECT_TRUE(t.allows("A-m", "B-e", "C-p"));
        EXPECT_TRUE(t.allows("Q-m", "Q-e", "Q-p"));
        EXPECT_FALSE(t.allows("Q-m", "R-e", "Q-p"));
    }
}

TEST(Compatibility, ParseAndValidateAgainst) {
    auto t = parse_compatibility(json{{"default_policy", "allow-same-manufacturer"},
                                      {"entries", json::array({{{"motor", "A-m"}, {"esc", "B-e"}}})}});
    EXPECT_EQ(t.policy(), CompatPolicy::allow_same_manufacturer);
    EXPECT_TRUE(t.allows("A-m", "B-e", "Z-p"));

    std::vector<MotorSpec> motors{motor("A-m")};
    std::vector<EscSpec> escs{esc("B-e")};
    std::vector<PropSpec> props{prop("C-p")};
    EXPECT_NO_THROW(t.validate_against(motors, escs, props));
    t.add("A-m", "missing", "C-p");
    EXPECT_THROW(t.validate_against(motors, escs, props), ValidationError);

    EXPECT_THROW(parse_compatibility(json{{"default_policy", "allow-all"}}), ValidationError);
    EXPECT_EQ(parse_compatibility(json::object()).policy(), CompatPolicy::deny_unlisted);
}

// ---------------------------------------------------------------------------

PropulsionCombo random_combo(std::mt19937& rng, int index) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PropulsionCombo c = testing::mn3508_combo();
    c.motor_id = "M-" + std::to_string(index % 97);
    c.esc_id = "E-" + std::to_string(index);
    c.prop_id = "P-" + std::to_string(index % 13);
    c.battery_voltage = 7.4 + 40 * u(rng);
    c.full_throttle_thrust = 1 + 50 * u(rng);
    c.full_throttle_current = 2 + 30 * u(rng);
    c.motor_max_current = c.full_throttle_current * (1 + u(rng));
    c.ref_air_density = 0.9 + 0.4 * u(rng);
    c.mass = 0.01 + u(rng);
    c.fit = {0.0, c.full_throttle_current / c.full_throttle_thrust * (1 + 0.05 * u(rng)), 0.0};
    c.mep_score = u(rng) * 3 - 1;
    c.source = u(rng) < 0.5 ? Provenance::experimental : Provenance::estimated;
    return c;
}

TEST(Database, RoundTripOneCombo) {
    ComboDatabase db;
    db.combos.push_back(testing::mn3508_combo());
    auto path = std::filesystem::temp_directory_path() / "mcopt_db_one.json";
    save_database(db, path);
    EXPECT_EQ(load_database(path), db);
}

TEST(Database, RoundTripRandomizedPreservesOrderAndBits) {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        ComboDatabase db;
        const int n = trial == 0 ? 1000 : 1 + static_cast<int>(rng() % 200);
        for (int i = 0; i < n; ++i) db.combos.push_back(random_combo(rng, i));
        auto path = std::filesystem::temp_directory_path() / "mcopt_db_random.json";
        save_database(db, path);
        const auto loaded = load_database(path);
        ASSERT_EQ(loaded.combos.size(), db.combos.size());
        EXPECT_TRUE(loaded == db) << "trial " << trial;
        EXPECT_EQ(database_fingerprint(loaded), database_fingerprint(db));
    }
}

TEST(Database, SchemaVersionMismatch) {
    auto doc = database_to_json(ComboDatabase{});
    doc["schema_version"] = "99";
    try {
        parse_database(doc);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::schema_version);
    }
}

TEST(Database, RejectsDuplicateTriples) {
    ComboDatabase db;
    db.combos = {testing::mn3508_combo(), testing::mn3508_combo()};
    EXPECT_THROW(validate(db), Error);
}

TEST(Database, ComboInvariants) {
    auto c = testing::mn3508_combo();
    EXPECT_NO_THROW(validate(c));
    c.full_throttle_current = 15.0;  // above the 14 A motor limit
    EXPECT_THROW(validate(c), ValidationError);
    c = testing::mn3508_combo();
    c.ref_air_density = 1.6;
    EXPECT_THROW(validate(c), ValidationError);
    c = testing::mn3508_combo();
    c.fit.k_t1 *= 1.5;  // fit at T* drifts well past 10% of I*
    EXPECT_THROW(validate(c), ValidationError);
}

TEST(Database, CanonicalOrdering) {
    ComboDatabase db;
    auto a = testing::mn3508_combo();
    auto b = a;
    auto c = a;
    a.motor_id = "B";
    a.mep_score = 0.5;
    b.motor_id = "A";
    b.mep_score = 0.1;
    c.motor_id = "B";
    c.esc_id = "other";
    c.mep_score = 0.9;
    db.combos = {a, b, c};
    db.sort_canonical();
    EXPECT_EQ(db.combos[0].motor_id, "A");
    EXPECT_EQ(db.combos[1].mep_score, 0.9);
    EXPECT_EQ(db.combos[2].mep_score, 0.5);
}

TEST(Database, FindAndFingerprint) {
    ComboDatabase db;
    db.combos.push_back(testing::mn3508_combo());
    EXPECT_NE(db.find("TMOTOR-MN3508-380:TMOTOR-AIR-40A:TMOTOR-P15x5"), nullptr);
    EXPECT_EQ(db.find("nope"), nullptr);
    const auto before = database_fingerprint(db);
    EXPECT_EQ(before.size(), 64u);
    db.combos[0].mass += 1e-12;
    EXPECT_NE(database_fingerprint(db), before);
}

TEST(Database, SeedDatabaseLoads) {
    auto db = load_database(testing::seed_database());
    EXPECT_GE(db.combos.size(), 8u);
    EXPECT_NO_THROW(validate(db));
}

}  // namespace
}  // namespace mcopt
