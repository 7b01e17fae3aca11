#include "lbdmids/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

#include "lbdmids/errors.hpp"
#include "lbdmids/rng.hpp"
#include "lbdmids/serial.hpp"

namespace lbdmids {

namespace {

void check_profile(const FeatureProfile& fp, const std::string& where) {
    if (!(fp.spread >= 0.0)) {
        throw ConfigError(where + ": spread must be nonnegative, got " +
                          std::to_string(fp.spread));
    }
    if (!(std::abs(fp.rho) < 1.0)) {
        throw ConfigError(where + ": |rho| must be below 1, got " + std::to_string(fp.rho));
    }
}

ClassProfile uniform_class(const DatasetSchema& schema, const std::string& name,
                           double mean, double spread, double rho) {
    ClassProfile cp;
    cp.class_name = name;
    cp.features.assign(schema.feature_count(), FeatureProfile{mean, spread, rho});
    return cp;
}

ProfileSet botiot_defaults(const DatasetSchema& schema) {
    struct Row {
        const char* cls;
        double rho;
        double f[10][2]; // {mean, spread} per schema feature order
    };
    // rate, srate, drate, min, max, mean, std_dev, state_number, flgs_number, seq.
    // DDoS and DoS are intentionally close neighbors.
    static const Row table[] = {
        {"Normal", 0.30,
         {{50, 10}, {25, 6}, {25, 6}, {0.05, 0.01}, {0.8, 0.2}, {0.4, 0.1}, {0.1, 0.03},
          {3, 0.8}, {2, 0.5}, {500, 120}}},
        {"DDoS", 0.80,
         {{4000, 300}, {3800, 280}, {40, 10}, {0.001, 0.0004}, {0.02, 0.008}, {0.008, 0.003},
          {0.004, 0.0015}, {5, 0.9}, {6, 0.9}, {1500, 300}}},
        {"DoS", 0.75,
         {{3600, 320}, {3500, 300}, {35, 9}, {0.0012, 0.0005}, {0.025, 0.01}, {0.009, 0.004},
          {0.005, 0.002}, {5, 0.9}, {6, 0.9}, {1400, 280}}},
        {"Reconnaissance", 0.50,
         {{300, 60}, {280, 50}, {15, 5}, {0.01, 0.004}, {0.3, 0.08}, {0.1, 0.04}, {0.05, 0.02},
          {4, 0.8}, {4, 0.8}, {900, 200}}},
        {"Theft", 0.60,
         {{5, 2}, {2, 1}, {2, 1}, {0.5, 0.1}, {30, 8}, {8, 3}, {4, 1.5}, {2, 0.5}, {1, 0.4},
          {200, 80}}},
    };
    ProfileSet set;
    for (const Row& row : table) {
        ClassProfile cp;
        cp.class_name = row.cls;
        for (std::size_t f = 0; f < schema.feature_count(); ++f) {
            cp.features.push_back({row.f[f][0], row.f[f][1], row.rho});
        }
        set.classes.push_back(std::move(cp));
    }
    return set;
}

ProfileSet unsw_defaults(const DatasetSchema& schema) {
    struct Col {
        double base;
        double spread;
        double gain; // per-level mean shift
    };
    // srcip, sport, dstip, dsport, dur, sbytes, dbytes, sttl, dttl, sload,
    // dload, spkts, dpkts. gain/spread >= 7.5, so classes one level apart
    // sit far out in the tails of each other.
    static const Col cols[13] = {
        {3232235520.0, 40, 320}, {1024, 150, 1200}, {167772160.0, 40, 320},
        {80, 120, 1000},         {0.5, 0.2, 1.6},   {500, 60, 480},
        {400, 50, 400},          {30, 3, 23},       {28, 3, 23},
        {2e4, 2.5e3, 2e4},       {1.5e4, 2e3, 1.6e4}, {10, 1.5, 12},
        {8, 1.2, 10},
    };
    // Intensity per class in schema order: Normal, Exploits, Reconnaissance,
    // DoS, Generic, Shellcode, Fuzzers, Worms, Backdoor, Analysis.
    // Exploits (5.0) and DoS (4.7) overlap by design.
    static const double level[10] = {0.0, 5.0, 2.0, 4.7, 8.0, 3.0, 1.2, 9.0, 6.2, 7.1};

    ProfileSet set;
    for (std::size_t c = 0; c < schema.class_names.size(); ++c) {
        ClassProfile cp;
        cp.class_name = schema.class_names[c];
        const double rho = 0.2 + 0.06 * static_cast<double>(c);
        for (const Col& col : cols) {
            cp.features.push_back({col.base + col.gain * level[c], col.spread, rho});
        }
        set.classes.push_back(std::move(cp));
    }
    return set;
}

std::string format_value(ColumnKind kind, double v) {
    char buf[64];
    if (kind == ColumnKind::ipv4) {
        const double clamped = std::clamp(v, 0.0, 4294967295.0);
        const auto ip = static_cast<std::uint32_t>(std::llround(clamped));
        std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", ip >> 24, (ip >> 16) & 0xff,
                      (ip >> 8) & 0xff, ip & 0xff);
    } else {
        std::snprintf(buf, sizeof buf, "%.6f", v);
    }
    return buf;
}

} // namespace

const ClassProfile* ProfileSet::find(const std::string& class_name) const {
    for (const ClassProfile& cp : classes) {
        if (cp.class_name == class_name) return &cp;
    }
    return nullptr;
}

ProfileSet default_profiles(const DatasetSchema& schema) {
    if (schema.name == "bot_iot") return botiot_defaults(schema);
    if (schema.name == "unsw_nb15") return unsw_defaults(schema);
    throw ConfigError("no built-in profiles for schema '" + schema.name +
                      "'; supply a profile file");
}

ProfileSet parse_profiles(const std::string& json_text, const DatasetSchema& schema) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("profile config is not valid JSON: ") + e.what());
    }

    FeatureProfile global;
    global.rho = 0.2;
    if (doc.contains("defaults")) {
        const auto& d = doc["defaults"];
        global.mean = d.value("mean", global.mean);
        global.spread = d.value("spread", global.spread);
        global.rho = d.value("rho", global.rho);
    }

    if (!doc.contains("classes") || !doc["classes"].is_object()) {
        throw ConfigError("profile config needs a 'classes' object");
    }

    ProfileSet set;
    for (const auto& [cls, body] : doc["classes"].items()) {
        if (!schema.class_index(cls)) {
            throw ConfigError("profile config names unknown class '" + cls + "' for schema " +
                              schema.name);
        }
        FeatureProfile class_default = global;
        class_default.mean = body.value("mean", class_default.mean);
        class_default.spread = body.value("spread", class_default.spread);
        class_default.rho = body.value("rho", class_default.rho);

        ClassProfile cp = uniform_class(schema, cls, class_default.mean, class_default.spread,
                                        class_default.rho);
        if (body.contains("features")) {
            for (const auto& [fname, fbody] : body["features"].items()) {
                std::size_t idx = schema.feature_count();
                for (std::size_t f = 0; f < schema.feature_count(); ++f) {
                    if (schema.feature_columns[f].name == fname) idx = f;
                }
                if (idx == schema.feature_count()) {
                    throw ConfigError("profile for class '" + cls +
                                      "' names unknown feature '" + fname + "'");
                }
                FeatureProfile& fp = cp.features[idx];
                fp.mean = fbody.value("mean", fp.mean);
                fp.spread = fbody.value("spread", fp.spread);
                fp.rho = fbody.value("rho", fp.rho);
            }
        }
        for (std::size_t f = 0; f < cp.features.size(); ++f) {
            check_profile(cp.features[f],
                          "class '" + cls + "' feature '" + schema.feature_columns[f].name + "'");
        }
        set.classes.push_back(std::move(cp));
    }
    return set;
}

ProfileSet load_profiles(const std::string& path, const DatasetSchema& schema) {
    const auto bytes = read_file_bytes(path);
    return parse_profiles(std::string(bytes.begin(), bytes.end()), schema);
}

void generate_csv(const DatasetSchema& schema, const ProfileSet& profiles,
                  const std::vector<std::pair<std::string, std::size_t>>& counts,
                  std::uint64_t seed, const std::string& out_path,
                  std::size_t block_rows) {
    if (block_rows == 0) throw ConfigError("generate: block_rows must be at least 1");
    for (const auto& [cls, n] : counts) {
        if (!schema.class_index(cls)) {
            throw ConfigError("generate: unknown class '" + cls + "' for schema " + schema.name);
        }
        if (n > 0 && profiles.find(cls) == nullptr) {
            throw ConfigError("generate: no profile for class '" + cls + "'");
        }
    }

    const std::size_t m = schema.feature_count();
    Rng rng(seed);

    // Full AR(1) chains per class first, then block interleaving below.
    std::vector<std::vector<std::string>> lines_by_class;
    for (const auto& [cls, n] : counts) {
        std::vector<std::string> lines;
        if (n > 0) {
            const ClassProfile& cp = *profiles.find(cls);
            if (cp.features.size() != m) {
                throw ConfigError("profile for class '" + cls + "' covers " +
                                  std::to_string(cp.features.size()) + " features, schema has " +
                                  std::to_string(m));
            }
            for (const FeatureProfile& fp : cp.features) check_profile(fp, "class '" + cls + "'");

            std::vector<double> x(m);
            std::vector<std::string> fields(m + 1);
            std::ostringstream row;
            for (std::size_t r = 0; r < n; ++r) {
                for (std::size_t f = 0; f < m; ++f) {
                    const FeatureProfile& fp = cp.features[f];
                    if (r == 0) {
                        x[f] = rng.normal(fp.mean, fp.spread);
                    } else {
                        const double innovation = fp.spread * std::sqrt(1.0 - fp.rho * fp.rho);
                        x[f] = fp.mean + fp.rho * (x[f] - fp.mean) + rng.normal(0.0, innovation);
                    }
                    fields[f] = format_value(schema.feature_columns[f].kind, x[f]);
                }
                fields[m] = cls;
                row.str(std::string());
                write_csv_row(row, fields);
                lines.push_back(row.str());
            }
        }
        lines_by_class.push_back(std::move(lines));
    }

    std::string out;
    {
        std::ostringstream header;
        std::vector<std::string> names;
        for (const ColumnSpec& col : schema.feature_columns) names.push_back(col.name);
        names.push_back(schema.label_column);
        write_csv_row(header, names);
        out = header.str();
    }

    std::vector<std::size_t> pos(lines_by_class.size(), 0);
    bool emitted = true;
    while (emitted) {
        emitted = false;
        for (std::size_t k = 0; k < lines_by_class.size(); ++k) {
            const auto& lines = lines_by_class[k];
            const std::size_t end = std::min(pos[k] + block_rows, lines.size());
            for (; pos[k] < end; ++pos[k]) {
                out += lines[pos[k]];
                emitted = true;
            }
        }
    }
    atomic_write_text(out_path, out);
}

} // namespace lbdmids
