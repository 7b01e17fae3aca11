#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lbdmids/linalg.hpp"

namespace lbdmids {

enum class ColumnKind { numeric, ipv4 };

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
};

struct DatasetSchema {
    std::string name; // unsw_nb15, bot_iot, or custom
    std::vector<ColumnSpec> feature_columns;
    std::string label_column;
    std::vector<std::string> class_names;

    std::size_t feature_count() const { return feature_columns.size(); }
    // Index into class_names, or nullopt for an unknown label.
    std::optional<std::size_t> class_index(const std::string& label) const;
};

const DatasetSchema& unsw_nb15_schema();
const DatasetSchema& bot_iot_schema();
const DatasetSchema& schema_by_name(const std::string& name);

struct FlowRecord {
    std::unordered_map<std::string, std::string> raw; // schema feature columns only
    std::string label;
    std::size_t source_row = 0; // 1-based data-row number in the source file

    bool operator==(const FlowRecord& other) const {
        return raw == other.raw && label == other.label;
    }
};

// RFC-4180 row reader: quoted fields, escaped quotes, embedded newlines,
// CRLF or LF endings.
class CsvReader {
  public:
    explicit CsvReader(std::istream& in) : in_(in) {}
    // Fills `fields` with the next row; returns false at end of input.
    bool next_row(std::vector<std::string>& fields);
    std::size_t row_number() const { return row_; }

  private:
    std::istream& in_;
    std::size_t row_ = 0;
};

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

struct IngestResult {
    std::vector<FlowRecord> records;
    std::vector<std::string> warnings; // per-row diagnostics, each naming the row
};

IngestResult ingest_csv(const std::string& path, const DatasetSchema& schema);

std::optional<std::uint32_t> parse_ipv4(const std::string& text);

struct FeatureMatrix {
    std::vector<std::string> column_names;
    Matrix values;
};

struct NumerizeResult {
    FeatureMatrix matrix;
    std::vector<std::size_t> labels; // class index per surviving row
    std::size_t dropped_null = 0;
    std::size_t dropped_duplicate = 0;
    std::size_t dropped_unknown_label = 0;
    std::vector<std::string> warnings;
};

NumerizeResult numerize(const std::vector<FlowRecord>& records, const DatasetSchema& schema);

struct ColumnStats {
    std::vector<double> mean;
    std::vector<double> stddev; // population form
    std::size_t n = 0;

    bool operator==(const ColumnStats&) const = default;
};

ColumnStats zscore_fit(const Matrix& x);
// (x - mu) / sigma per column; sigma = 0 columns map to all zeros.
Matrix zscore_transform(const Matrix& x, const ColumnStats& stats);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::string> warnings;
};

// Stratified per class; within each class ceil(fraction * n) rows go to train.
// Index lists come back sorted so each partition keeps the original row order.
SplitIndices stratified_split(const std::vector<std::size_t>& labels, std::size_t num_classes,
                              double train_fraction, std::uint64_t seed);

Matrix take_rows(const Matrix& x, const std::vector<std::size_t>& idx);
std::vector<std::size_t> take_labels(const std::vector<std::size_t>& labels,
                                     const std::vector<std::size_t>& idx);

struct WindowedDataset {
    Tensor3 tensor;
    std::vector<std::size_t> labels; // one per window, the window's last row
    std::size_t timesteps = 1;
    std::vector<std::string> class_names;
};

WindowedDataset window(const Matrix& x, const std::vector<std::size_t>& labels,
                       std::size_t timesteps, std::vector<std::string> class_names);

// On-disk container written by the preprocess stage and consumed by train,
// evaluate, and predict.
struct PreprocessedDataset {
    std::string schema_name;
    std::vector<std::string> class_names;
    ColumnStats stats; // the train-split statistics the tensor was normalized with
    WindowedDataset windows;
};

void save_dataset(const PreprocessedDataset& ds, const std::string& path);
PreprocessedDataset load_dataset(const std::string& path);

} // namespace lbdmids
