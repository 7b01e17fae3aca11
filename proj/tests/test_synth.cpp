#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lbdmids/data.hpp"
#include "lbdmids/synth.hpp"
#include "test_util.hpp"

using namespace lbdmids;
using testutil::TempDir;

TEST_CASE("empty counts yield a header-only file") {
    TempDir dir;
    std::string path = dir.file("empty.csv");
    generate_csv(bot_iot_schema(), default_profiles(bot_iot_schema()),
                 {{"Normal", 0}, {"DoS", 0}}, 1, path);

    std::string text = testutil::read_text(path);
    CHECK(text == "rate,srate,drate,min,max,mean,std_dev,state_number,flgs_number,seq,category\n");
}

TEST_CASE("generation is deterministic per seed") {
    TempDir dir;
    const auto& schema = bot_iot_schema();
    ProfileSet profiles = default_profiles(schema);
    std::vector<std::pair<std::string, std::size_t>> counts = {{"Normal", 120}, {"DDoS", 80}};

    generate_csv(schema, profiles, counts, 7, dir.file("a.csv"));
    generate_csv(schema, profiles, counts, 7, dir.file("b.csv"));
    generate_csv(schema, profiles, counts, 8, dir.file("c.csv"));

    std::string a = testutil::read_text(dir.file("a.csv"));
    CHECK(a == testutil::read_text(dir.file("b.csv")));
    CHECK(a != testutil::read_text(dir.file("c.csv")));
}

TEST_CASE("generated rows re-ingest to the declared counts and labels") {
    TempDir dir;
    std::string path = dir.file("flows.csv");
    const auto& schema = bot_iot_schema();
    generate_csv(schema, default_profiles(schema), {{"Normal", 150}, {"Theft", 50}}, 3, path);

    IngestResult in = ingest_csv(path, schema);
    CHECK(in.warnings.empty());
    REQUIRE(in.records.size() == 200);

    std::map<std::string, std::size_t> by_label;
    for (const auto& rec : in.records) ++by_label[rec.label];
    CHECK(by_label["Normal"] == 150);
    CHECK(by_label["Theft"] == 50);

    SUBCASE("every row numerizes cleanly") {
        NumerizeResult num = numerize(in.records, schema);
        CHECK(num.dropped_null == 0);
        CHECK(num.dropped_unknown_label == 0);
        CHECK(num.matrix.values.rows() + num.dropped_duplicate == 200);
    }
    SUBCASE("re-ingesting a rewrite round-trips identical records") {
        // write back out through the CSV writer and ingest again
        std::ostringstream out;
        std::vector<std::string> names;
        for (const ColumnSpec& col : schema.feature_columns) names.push_back(col.name);
        names.push_back(schema.label_column);
        std::ostringstream header;
        write_csv_row(header, names);
        out << header.str();
        for (const auto& rec : in.records) {
            std::vector<std::string> fields;
            for (const ColumnSpec& col : schema.feature_columns)
                fields.push_back(rec.raw.at(col.name));
            fields.push_back(rec.label);
            write_csv_row(out, fields);
        }
        std::string copy = dir.file("copy.csv");
        testutil::write_text(copy, out.str());
        IngestResult again = ingest_csv(copy, schema);
        REQUIRE(again.records.size() == in.records.size());
        for (std::size_t i = 0; i < in.records.size(); ++i)
            CHECK(again.records[i] == in.records[i]);
    }
}

TEST_CASE("unsw schema generates parseable ip columns") {
    TempDir dir;
    std::string path = dir.file("unsw.csv");
    const auto& schema = unsw_nb15_schema();
    generate_csv(schema, default_profiles(schema), {{"Normal", 40}, {"Worms", 10}}, 5, path);

    IngestResult in = ingest_csv(path, schema);
    REQUIRE(in.records.size() == 50);
    for (const auto& rec : in.records) {
        CHECK(parse_ipv4(rec.raw.at("srcip")).has_value());
        CHECK(parse_ipv4(rec.raw.at("dstip")).has_value());
    }
    NumerizeResult num = numerize(in.records, schema);
    CHECK(num.dropped_null == 0);
}

TEST_CASE("per-class sample means track the profile means") {
    TempDir dir;
    std::string path = dir.file("means.csv");
    const auto& schema = bot_iot_schema();
    ProfileSet profiles = parse_profiles(R"({
        "defaults": {"spread": 2.0, "rho": 0.4},
        "classes": {
            "Normal": {"mean": 10.0},
            "DoS":    {"mean": -30.0}
        }
    })", schema);

    const std::size_t n = 4000;
    generate_csv(schema, profiles, {{"Normal", n}, {"DoS", n}}, 17, path);
    IngestResult in = ingest_csv(path, schema);
    NumerizeResult num = numerize(in.records, schema);

    std::map<std::size_t, std::pair<double, std::size_t>> sums;
    for (std::size_t r = 0; r < num.matrix.values.rows(); ++r) {
        auto& [sum, count] = sums[num.labels[r]];
        sum += num.matrix.values(r, 0); // rate column
        ++count;
    }
    // standard error of the mean is spread/sqrt(n); allow 4 of them
    const double margin = 4.0 * 2.0 / std::sqrt(static_cast<double>(n));
    auto idx = [&](const std::string& name) { return *schema.class_index(name); };
    auto mean_of = [&](std::size_t k) { return sums[k].first / sums[k].second; };
    CHECK(std::abs(mean_of(idx("Normal")) - 10.0) < margin);
    CHECK(std::abs(mean_of(idx("DoS")) + 30.0) < margin);
}

TEST_CASE("block interleaving keeps classes in runs") {
    TempDir dir;
    std::string path = dir.file("blocks.csv");
    const auto& schema = bot_iot_schema();
    generate_csv(schema, default_profiles(schema), {{"Normal", 96}, {"DDoS", 96}}, 7, path,
                 32);

    IngestResult in = ingest_csv(path, schema);
    REQUIRE(in.records.size() == 192);
    // 32-row blocks alternate: Normal x32, DDoS x32, ...
    for (std::size_t i = 0; i < 192; ++i) {
        bool normal_block = (i / 32) % 2 == 0;
        CHECK(in.records[i].label == (normal_block ? "Normal" : "DDoS"));
    }
}

TEST_CASE("profile json parsing") {
    const auto& schema = bot_iot_schema();

    SUBCASE("defaults, class overrides and feature overrides stack") {
        ProfileSet p = parse_profiles(R"({
            "defaults": {"mean": 1.0, "spread": 3.0, "rho": 0.25},
            "classes": {
                "Normal": {},
                "DDoS": {"mean": 9.0, "features": {"rate": {"spread": 0.5}}}
            }
        })", schema);

        const ClassProfile* normal = p.find("Normal");
        REQUIRE(normal != nullptr);
        REQUIRE(normal->features.size() == schema.feature_count());
        CHECK(normal->features[0].mean == 1.0);
        CHECK(normal->features[0].spread == 3.0);
        CHECK(normal->features[0].rho == 0.25);

        const ClassProfile* ddos = p.find("DDoS");
        REQUIRE(ddos != nullptr);
        CHECK(ddos->features[0].mean == 9.0);   // rate, class mean + feature spread
        CHECK(ddos->features[0].spread == 0.5);
        CHECK(ddos->features[1].mean == 9.0);   // srate falls back to class values
        CHECK(ddos->features[1].spread == 3.0);
    }
    SUBCASE("unknown class name is rejected") {
        CHECK_THROWS_AS(parse_profiles(R"({"classes": {"Martian": {}}})", schema), ConfigError);
    }
    SUBCASE("unknown feature name is rejected") {
        CHECK_THROWS_AS(parse_profiles(
            R"({"classes": {"Normal": {"features": {"bogus": {"mean": 1}}}}})", schema),
            ConfigError);
    }
    SUBCASE("invalid numbers are rejected") {
        CHECK_THROWS_AS(parse_profiles(
            R"({"classes": {"Normal": {"spread": -1.0}}})", schema), ConfigError);
        CHECK_THROWS_AS(parse_profiles(
            R"({"classes": {"Normal": {"rho": 1.0}}})", schema), ConfigError);
        CHECK_THROWS_AS(parse_profiles("not json", schema), ConfigError);
    }
}

TEST_CASE("generation validates its inputs") {
    TempDir dir;
    const auto& schema = bot_iot_schema();
    ProfileSet profiles = default_profiles(schema);

    CHECK_THROWS_AS(generate_csv(schema, profiles, {{"Martian", 5}}, 1, dir.file("x.csv")),
                    ConfigError);
    CHECK_THROWS_AS(generate_csv(schema, profiles, {{"Normal", 5}}, 1, dir.file("x.csv"), 0),
                    ConfigError);
}

TEST_CASE("default profiles cover every schema class") {
    for (const auto* schema : {&bot_iot_schema(), &unsw_nb15_schema()}) {
        ProfileSet p = default_profiles(*schema);
        for (const std::string& name : schema->class_names) {
            const ClassProfile* c = p.find(name);
            REQUIRE(c != nullptr);
            CHECK(c->features.size() == schema->feature_count());
        }
    }
}
