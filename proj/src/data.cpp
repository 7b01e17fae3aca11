#include "lbdmids/data.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "json.hpp"

#include "lbdmids/errors.hpp"
#include "lbdmids/rng.hpp"
#include "lbdmids/serial.hpp"

namespace lbdmids {

namespace {

constexpr char kDatasetMagic[4] = {'L', 'B', 'D', 'S'};
constexpr std::uint32_t kDatasetVersion = 1;

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::optional<double> parse_number(const std::string& raw) {
    const std::string s = trim(raw);
    if (s.empty()) return std::nullopt;
    const char* begin = s.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(begin, &end);
    if (end != begin + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

DatasetSchema make_unsw_schema() {
    DatasetSchema s;
    s.name = "unsw_nb15";
    s.feature_columns = {
        {"srcip", ColumnKind::ipv4},   {"sport", ColumnKind::numeric},
        {"dstip", ColumnKind::ipv4},   {"dsport", ColumnKind::numeric},
        {"dur", ColumnKind::numeric},  {"sbytes", ColumnKind::numeric},
        {"dbytes", ColumnKind::numeric}, {"sttl", ColumnKind::numeric},
        {"dttl", ColumnKind::numeric}, {"sload", ColumnKind::numeric},
        {"dload", ColumnKind::numeric}, {"spkts", ColumnKind::numeric},
        {"dpkts", ColumnKind::numeric},
    };
    s.label_column = "attack_cat";
    s.class_names = {"Normal",   "Exploits", "Reconnaissance", "DoS",      "Generic",
                     "Shellcode", "Fuzzers",  "Worms",          "Backdoor", "Analysis"};
    return s;
}

DatasetSchema make_botiot_schema() {
    DatasetSchema s;
    s.name = "bot_iot";
    s.feature_columns = {
        {"rate", ColumnKind::numeric},         {"srate", ColumnKind::numeric},
        {"drate", ColumnKind::numeric},        {"min", ColumnKind::numeric},
        {"max", ColumnKind::numeric},          {"mean", ColumnKind::numeric},
        {"std_dev", ColumnKind::numeric},      {"state_number", ColumnKind::numeric},
        {"flgs_number", ColumnKind::numeric},  {"seq", ColumnKind::numeric},
    };
    s.label_column = "category";
    s.class_names = {"Normal", "DDoS", "DoS", "Reconnaissance", "Theft"};
    return s;
}

} // namespace

std::optional<std::size_t> DatasetSchema::class_index(const std::string& label) const {
    for (std::size_t i = 0; i < class_names.size(); ++i) {
        if (class_names[i] == label) return i;
    }
    return std::nullopt;
}

const DatasetSchema& unsw_nb15_schema() {
    static const DatasetSchema s = make_unsw_schema();
    return s;
}

const DatasetSchema& bot_iot_schema() {
    static const DatasetSchema s = make_botiot_schema();
    return s;
}

const DatasetSchema& schema_by_name(const std::string& name) {
    if (name == "unsw_nb15") return unsw_nb15_schema();
    if (name == "bot_iot") return bot_iot_schema();
    throw ConfigError("unknown schema '" + name + "'; expected unsw_nb15 or bot_iot");
}

bool CsvReader::next_row(std::vector<std::string>& fields) {
    fields.clear();
    int c = in_.get();
    if (c == std::istream::traits_type::eof()) return false;
    ++row_;
    std::string field;
    bool in_quotes = false;
    while (true) {
        if (c == std::istream::traits_type::eof()) {
            fields.push_back(std::move(field));
            return true;
        }
        if (in_quotes) {
            if (c == '"') {
                const int next = in_.get();
                if (next == '"') {
                    field.push_back('"');
                } else {
                    in_quotes = false;
                    c = next;
                    continue;
                }
            } else {
                field.push_back(static_cast<char>(c));
            }
        } else if (c == '"' && field.empty()) {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            fields.push_back(std::move(field));
            return true;
        } else if (c == '\r' && in_.peek() == '\n') {
            in_.get();
            fields.push_back(std::move(field));
            return true;
        } else {
            field.push_back(static_cast<char>(c));
        }
        c = in_.get();
    }
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) out << ',';
        const std::string& f = fields[i];
        if (f.find_first_of(",\"\r\n") != std::string::npos) {
            out << '"';
            for (char c : f) {
                if (c == '"') out << "\"\"";
                else out << c;
            }
            out << '"';
        } else {
            out << f;
        }
    }
    out << '\n';
}

IngestResult ingest_csv(const std::string& path, const DatasetSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path + " for reading");

    CsvReader reader(in);
    std::vector<std::string> fields;
    if (!reader.next_row(fields)) throw DataError(path + ": empty file, no header row");

    std::unordered_map<std::string, std::size_t> header_index;
    for (std::size_t i = 0; i < fields.size(); ++i) header_index[lower(trim(fields[i]))] = i;

    std::vector<std::size_t> feature_idx;
    for (const ColumnSpec& col : schema.feature_columns) {
        auto it = header_index.find(lower(col.name));
        if (it == header_index.end()) {
            throw DataError(path + ": missing column '" + col.name + "' required by schema " +
                            schema.name);
        }
        feature_idx.push_back(it->second);
    }
    auto label_it = header_index.find(lower(schema.label_column));
    if (label_it == header_index.end()) {
        throw DataError(path + ": missing label column '" + schema.label_column + "'");
    }
    const std::size_t label_idx = label_it->second;
    const std::size_t header_width = fields.size();

    IngestResult result;
    std::size_t data_row = 0;
    while (reader.next_row(fields)) {
        if (fields.size() == 1 && trim(fields[0]).empty()) continue; // blank line
        ++data_row;
        if (fields.size() != header_width) {
            result.warnings.push_back("row " + std::to_string(reader.row_number()) +
                                      ": expected " + std::to_string(header_width) +
                                      " fields, got " + std::to_string(fields.size()) +
                                      "; row skipped");
            continue;
        }
        const std::string label = trim(fields[label_idx]);
        if (label.empty()) {
            result.warnings.push_back("row " + std::to_string(reader.row_number()) +
                                      ": missing label; row skipped");
            continue;
        }
        FlowRecord rec;
        rec.source_row = data_row;
        rec.label = label;
        for (std::size_t i = 0; i < schema.feature_columns.size(); ++i) {
            rec.raw[schema.feature_columns[i].name] = fields[feature_idx[i]];
        }
        result.records.push_back(std::move(rec));
    }
    return result;
}

std::optional<std::uint32_t> parse_ipv4(const std::string& text) {
    const std::string s = trim(text);
    std::uint32_t value = 0;
    std::size_t pos = 0;
    for (int octet = 0; octet < 4; ++octet) {
        if (octet > 0) {
            if (pos >= s.size() || s[pos] != '.') return std::nullopt;
            ++pos;
        }
        if (pos >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos]))) {
            return std::nullopt;
        }
        std::uint32_t part = 0;
        std::size_t digits = 0;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
            part = part * 10 + static_cast<std::uint32_t>(s[pos] - '0');
            ++pos;
            if (++digits > 3) return std::nullopt;
        }
        if (part > 255) return std::nullopt;
        value = (value << 8) | part;
    }
    if (pos != s.size()) return std::nullopt;
    return value;
}

NumerizeResult numerize(const std::vector<FlowRecord>& records, const DatasetSchema& schema) {
    if (records.empty()) throw DataError("numerize: no records to convert");
    const std::size_t m = schema.feature_count();

    NumerizeResult res;
    std::vector<double> rows;
    rows.reserve(records.size() * m);
    std::unordered_set<std::string> seen;
    std::vector<double> row(m);

    for (const FlowRecord& rec : records) {
        bool ok = true;
        for (std::size_t j = 0; j < m && ok; ++j) {
            const ColumnSpec& col = schema.feature_columns[j];
            auto it = rec.raw.find(col.name);
            const std::string& raw = (it != rec.raw.end()) ? it->second : std::string();
            if (col.kind == ColumnKind::ipv4) {
                auto v = parse_ipv4(raw);
                if (!v) ok = false;
                else row[j] = static_cast<double>(*v);
            } else {
                auto v = parse_number(raw);
                if (!v) ok = false;
                else row[j] = *v;
            }
            if (!ok) {
                ++res.dropped_null;
                res.warnings.push_back("row " + std::to_string(rec.source_row) +
                                       ": null or unparseable '" + col.name +
                                       "' value; row dropped");
            }
        }
        if (!ok) continue;

        auto cls = schema.class_index(rec.label);
        if (!cls) {
            ++res.dropped_unknown_label;
            res.warnings.push_back("row " + std::to_string(rec.source_row) +
                                   ": unknown label '" + rec.label + "'; row dropped");
            continue;
        }

        std::string key(reinterpret_cast<const char*>(row.data()), m * sizeof(double));
        key.append(reinterpret_cast<const char*>(&*cls), sizeof(*cls));
        if (!seen.insert(std::move(key)).second) {
            ++res.dropped_duplicate;
            continue;
        }

        rows.insert(rows.end(), row.begin(), row.end());
        res.labels.push_back(*cls);
    }

    if (res.labels.empty()) {
        throw DataError("numerize: all " + std::to_string(records.size()) +
                        " rows were dropped (null features, unknown labels, or duplicates)");
    }

    res.matrix.column_names.reserve(m);
    for (const ColumnSpec& col : schema.feature_columns) {
        res.matrix.column_names.push_back(col.name);
    }
    res.matrix.values = Matrix(res.labels.size(), m);
    res.matrix.values.data() = std::move(rows);
    return res;
}

ColumnStats zscore_fit(const Matrix& x) {
    if (x.rows() == 0) throw DataError("zscore_fit: empty matrix");
    const std::size_t m = x.cols();
    ColumnStats st;
    st.n = x.rows();
    st.mean.assign(m, 0.0);
    st.stddev.assign(m, 0.0); // accumulates M2 until the final sqrt
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* row = x.row(i);
        const double k = static_cast<double>(i + 1);
        for (std::size_t j = 0; j < m; ++j) {
            const double delta = row[j] - st.mean[j];
            st.mean[j] += delta / k;
            st.stddev[j] += delta * (row[j] - st.mean[j]);
        }
    }
    for (std::size_t j = 0; j < m; ++j) {
        st.stddev[j] = std::sqrt(st.stddev[j] / static_cast<double>(st.n));
    }
    return st;
}

Matrix zscore_transform(const Matrix& x, const ColumnStats& stats) {
    if (x.cols() != stats.mean.size()) {
        throw DimensionError("zscore_transform: matrix has " + std::to_string(x.cols()) +
                             " columns, stats cover " + std::to_string(stats.mean.size()));
    }
    Matrix z(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* src = x.row(i);
        double* dst = z.row(i);
        for (std::size_t j = 0; j < x.cols(); ++j) {
            dst[j] = (stats.stddev[j] == 0.0) ? 0.0 : (src[j] - stats.mean[j]) / stats.stddev[j];
        }
    }
    return z;
}

SplitIndices stratified_split(const std::vector<std::size_t>& labels, std::size_t num_classes,
                              double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("train fraction must lie strictly between 0 and 1, got " +
                          std::to_string(train_fraction));
    }
    if (labels.empty()) throw DataError("split: no samples");

    std::vector<std::vector<std::size_t>> per_class(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_classes) {
            throw DataError("split: label " + std::to_string(labels[i]) +
                            " out of range for " + std::to_string(num_classes) + " classes");
        }
        per_class[labels[i]].push_back(i);
    }

    SplitIndices out;
    Rng rng(seed);
    for (std::size_t c = 0; c < num_classes; ++c) {
        auto& idx = per_class[c];
        if (idx.empty()) continue;
        if (idx.size() < 2) {
            out.warnings.push_back("class " + std::to_string(c) +
                                   " has fewer than 2 samples; assigned entirely to train");
            out.train.insert(out.train.end(), idx.begin(), idx.end());
            continue;
        }
        rng.shuffle(idx);
        auto n_train = static_cast<std::size_t>(
            std::ceil(train_fraction * static_cast<double>(idx.size())));
        n_train = std::min(n_train, idx.size());
        out.train.insert(out.train.end(), idx.begin(), idx.begin() + n_train);
        out.validation.insert(out.validation.end(), idx.begin() + n_train, idx.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.validation.begin(), out.validation.end());
    return out;
}

Matrix take_rows(const Matrix& x, const std::vector<std::size_t>& idx) {
    if (idx.empty()) throw DataError("take_rows: empty index list");
    Matrix out(idx.size(), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const double* src = x.row(idx[i]);
        std::copy(src, src + x.cols(), out.row(i));
    }
    return out;
}

std::vector<std::size_t> take_labels(const std::vector<std::size_t>& labels,
                                     const std::vector<std::size_t>& idx) {
    std::vector<std::size_t> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(labels[i]);
    return out;
}

WindowedDataset window(const Matrix& x, const std::vector<std::size_t>& labels,
                       std::size_t timesteps, std::vector<std::string> class_names) {
    if (timesteps == 0) throw ConfigError("window: timesteps must be at least 1");
    if (labels.size() != x.rows()) {
        throw DimensionError("window: " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(x.rows()) + " rows");
    }
    if (x.rows() < timesteps) {
        throw DataError("window: need at least " + std::to_string(timesteps) + " rows, have " +
                        std::to_string(x.rows()));
    }
    for (std::size_t l : labels) {
        if (l >= class_names.size()) {
            throw DataError("window: label " + std::to_string(l) + " out of range for " +
                            std::to_string(class_names.size()) + " classes");
        }
    }

    const std::size_t n = x.rows() - timesteps + 1;
    WindowedDataset ds;
    ds.timesteps = timesteps;
    ds.class_names = std::move(class_names);
    ds.tensor = Tensor3(n, timesteps, x.cols());
    ds.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < timesteps; ++t) {
            const double* src = x.row(i + t);
            std::copy(src, src + x.cols(), &ds.tensor.at(i, t, 0));
        }
        ds.labels.push_back(labels[i + timesteps - 1]);
    }
    return ds;
}

void save_dataset(const PreprocessedDataset& ds, const std::string& path) {
    const Tensor3& t = ds.windows.tensor;
    if (ds.windows.labels.size() != t.samples) {
        throw DataError("save_dataset: " + std::to_string(ds.windows.labels.size()) +
                        " labels for " + std::to_string(t.samples) + " windows");
    }
    nlohmann::json header = {
        {"schema", ds.schema_name},
        {"class_names", ds.class_names},
        {"timesteps", ds.windows.timesteps},
        {"samples", t.samples},
        {"features", t.features},
        {"stats",
         {{"n", ds.stats.n}, {"mean", ds.stats.mean}, {"stddev", ds.stats.stddev}}},
    };
    const std::string htext = header.dump();

    std::vector<std::uint8_t> buf;
    buf.reserve(16 + htext.size() + t.data.size() * 8 + ds.windows.labels.size() * 4 + 8);
    append_bytes(buf, kDatasetMagic, 4);
    append_u32(buf, kDatasetVersion);
    append_u32(buf, static_cast<std::uint32_t>(htext.size()));
    append_bytes(buf, htext.data(), htext.size());
    for (double v : t.data) append_f64(buf, v);
    for (std::size_t l : ds.windows.labels) append_u32(buf, static_cast<std::uint32_t>(l));
    append_u64(buf, fnv1a64(buf.data(), buf.size()));
    atomic_write_file(path, buf);
}

PreprocessedDataset load_dataset(const std::string& path) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    if (bytes.size() < 20) throw IoError(path + ": truncated dataset file");

    const std::uint64_t computed = fnv1a64(bytes.data(), bytes.size() - 8);
    ByteReader tail{bytes, bytes.size() - 8};
    const std::uint64_t stored = tail.u64();
    if (computed != stored) {
        throw IoError(path + ": checksum mismatch, file is corrupt (stored " +
                      std::to_string(stored) + ", computed " + std::to_string(computed) + ")");
    }

    ByteReader r{bytes};
    if (r.bytes(4) != std::string(kDatasetMagic, 4)) {
        throw IoError(path + ": not a dataset file (bad magic)");
    }
    const std::uint32_t version = r.u32();
    if (version != kDatasetVersion) {
        throw IoError(path + ": unsupported dataset format version " + std::to_string(version) +
                      "; this build reads version " + std::to_string(kDatasetVersion));
    }

    PreprocessedDataset ds;
    std::size_t samples = 0, features = 0;
    try {
        const nlohmann::json header = nlohmann::json::parse(r.bytes(r.u32()));
        ds.schema_name = header.at("schema").get<std::string>();
        ds.class_names = header.at("class_names").get<std::vector<std::string>>();
        ds.windows.timesteps = header.at("timesteps").get<std::size_t>();
        samples = header.at("samples").get<std::size_t>();
        features = header.at("features").get<std::size_t>();
        ds.stats.n = header.at("stats").at("n").get<std::size_t>();
        ds.stats.mean = header.at("stats").at("mean").get<std::vector<double>>();
        ds.stats.stddev = header.at("stats").at("stddev").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": malformed dataset header: " + e.what());
    }
    if (samples == 0 || features == 0 || ds.windows.timesteps == 0) {
        throw IoError(path + ": dataset header declares an empty tensor");
    }
    const std::size_t expect = samples * ds.windows.timesteps * features * 8 + samples * 4 + 8;
    if (r.remaining() != expect) {
        throw IoError(path + ": payload size " + std::to_string(r.remaining() - 8) +
                      " does not match header dimensions");
    }

    ds.windows.class_names = ds.class_names;
    ds.windows.tensor = Tensor3(samples, ds.windows.timesteps, features);
    for (double& v : ds.windows.tensor.data) v = r.f64();
    ds.windows.labels.reserve(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        const std::uint32_t l = r.u32();
        if (l >= ds.class_names.size()) {
            throw IoError(path + ": label " + std::to_string(l) + " out of range for " +
                          std::to_string(ds.class_names.size()) + " classes");
        }
        ds.windows.labels.push_back(l);
    }
    if (r.remaining() != 8) {
        throw IoError(path + ": unexpected trailing bytes after payload");
    }
    return ds;
}

} // namespace lbdmids
