#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lbdmids {

struct ConfusionMatrix {
    std::size_t k = 0;
    std::vector<std::uint64_t> counts; // k*k row-major, rows = true class
    std::vector<std::string> class_names;

    std::uint64_t at(std::size_t truth, std::size_t pred) const {
        return counts[truth * k + pred];
    }
    std::uint64_t total() const;
};

ConfusionMatrix confusion(const std::vector<std::size_t>& truth,
                          const std::vector<std::size_t>& predicted, std::size_t k,
                          std::vector<std::string> class_names = {});

struct ClassMetrics {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::uint64_t support = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    std::string note; // set when a zero denominator forced a metric to 0
};

struct ClassificationReport {
    std::vector<ClassMetrics> per_class;
    std::vector<std::string> class_names;
    std::uint64_t total = 0;
    double accuracy = 0.0;
    double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;
};

// One-vs-rest metrics per class plus trace/total accuracy and
// support-weighted averages. Zero denominators yield 0.0 with a note.
ClassificationReport report(const ConfusionMatrix& cm);

enum class ReportFormat { table, csv, structured_text };

// table: per-class rows at 2 decimals ending in a weighted-avg row.
// csv / structured_text: machine formats at full precision.
std::string render_report(const ClassificationReport& r, ReportFormat format);

} // namespace lbdmids
