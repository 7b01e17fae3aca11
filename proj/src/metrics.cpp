#include "lbdmids/metrics.hpp"

#include <cstdio>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "lbdmids/errors.hpp"

namespace lbdmids {

namespace {

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void pad_to(std::string& line, std::size_t width) {
    if (line.size() < width) line.append(width - line.size(), ' ');
}

} // namespace

std::uint64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

ConfusionMatrix confusion(const std::vector<std::size_t>& truth,
                          const std::vector<std::size_t>& predicted, std::size_t k,
                          std::vector<std::string> class_names) {
    if (truth.size() != predicted.size()) {
        throw DimensionError("confusion: " + std::to_string(truth.size()) + " true labels vs " +
                             std::to_string(predicted.size()) + " predictions");
    }
    if (k == 0) throw DimensionError("confusion: class count must be at least 1");
    if (!class_names.empty() && class_names.size() != k) {
        throw DimensionError("confusion: " + std::to_string(class_names.size()) +
                             " class names for " + std::to_string(k) + " classes");
    }

    ConfusionMatrix cm;
    cm.k = k;
    cm.counts.assign(k * k, 0);
    if (class_names.empty()) {
        for (std::size_t c = 0; c < k; ++c) cm.class_names.push_back(std::to_string(c));
    } else {
        cm.class_names = std::move(class_names);
    }
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= k || predicted[i] >= k) {
            throw DataError("confusion: label out of range at sample " + std::to_string(i));
        }
        ++cm.counts[truth[i] * k + predicted[i]];
    }
    return cm;
}

ClassificationReport report(const ConfusionMatrix& cm) {
    if (cm.k == 0 || cm.counts.size() != cm.k * cm.k) {
        throw DimensionError("report: malformed confusion matrix");
    }
    const std::uint64_t total = cm.total();
    if (total == 0) throw DataError("report: confusion matrix holds no samples");

    ClassificationReport rep;
    rep.class_names = cm.class_names;
    rep.total = total;

    std::uint64_t trace = 0;
    double wp = 0.0, wf = 0.0;
    for (std::size_t c = 0; c < cm.k; ++c) {
        ClassMetrics m;
        m.tp = cm.at(c, c);
        std::uint64_t row = 0, col = 0;
        for (std::size_t j = 0; j < cm.k; ++j) {
            row += cm.at(c, j);
            col += cm.at(j, c);
        }
        m.support = row;
        m.fn = row - m.tp;
        m.fp = col - m.tp;
        m.tn = total - m.tp - m.fp - m.fn;

        if (m.tp + m.fp > 0) {
            m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
        } else {
            m.note = "no predicted samples";
        }
        if (m.support > 0) {
            m.recall = static_cast<double>(m.tp) / static_cast<double>(m.support);
        } else {
            m.note += m.note.empty() ? "" : "; ";
            m.note += "no actual samples";
        }
        if (m.precision + m.recall > 0.0) {
            m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        }

        trace += m.tp;
        wp += m.precision * static_cast<double>(m.support);
        wf += m.f1 * static_cast<double>(m.support);
        rep.per_class.push_back(std::move(m));
    }

    rep.accuracy = static_cast<double>(trace) / static_cast<double>(total);
    rep.weighted_precision = wp / static_cast<double>(total);
    // recall * support telescopes to TP exactly, so summing the integer TPs
    // keeps weighted recall bitwise equal to trace/total accuracy.
    rep.weighted_recall = static_cast<double>(trace) / static_cast<double>(total);
    rep.weighted_f1 = wf / static_cast<double>(total);
    return rep;
}

std::string render_report(const ClassificationReport& r, ReportFormat format) {
    if (format == ReportFormat::csv) {
        std::string out = "class,precision,recall,f1,support\n";
        for (std::size_t c = 0; c < r.per_class.size(); ++c) {
            const ClassMetrics& m = r.per_class[c];
            out += r.class_names[c] + "," + full(m.precision) + "," + full(m.recall) + "," +
                   full(m.f1) + "," + std::to_string(m.support) + "\n";
        }
        out += "accuracy,,," + full(r.accuracy) + "," + std::to_string(r.total) + "\n";
        out += "weighted_avg," + full(r.weighted_precision) + "," + full(r.weighted_recall) +
               "," + full(r.weighted_f1) + "," + std::to_string(r.total) + "\n";
        return out;
    }

    if (format == ReportFormat::structured_text) {
        nlohmann::json doc;
        doc["total"] = r.total;
        doc["accuracy"] = r.accuracy;
        doc["weighted"] = {{"precision", r.weighted_precision},
                           {"recall", r.weighted_recall},
                           {"f1", r.weighted_f1}};
        doc["classes"] = nlohmann::json::array();
        for (std::size_t c = 0; c < r.per_class.size(); ++c) {
            const ClassMetrics& m = r.per_class[c];
            nlohmann::json row = {{"class", r.class_names[c]}, {"tp", m.tp},
                                  {"fp", m.fp},               {"tn", m.tn},
                                  {"fn", m.fn},               {"support", m.support},
                                  {"precision", m.precision}, {"recall", m.recall},
                                  {"f1", m.f1}};
            if (!m.note.empty()) row["note"] = m.note;
            doc["classes"].push_back(std::move(row));
        }
        return doc.dump(2) + "\n";
    }

    std::size_t name_w = std::string("Weighted avg").size();
    for (const std::string& n : r.class_names) name_w = std::max(name_w, n.size());
    name_w += 2;

    std::ostringstream out;
    std::string head = "Class";
    pad_to(head, name_w);
    out << head << "Precision  Recall  F1      Support\n";
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        const ClassMetrics& m = r.per_class[c];
        std::string line = r.class_names[c];
        pad_to(line, name_w);
        line += fixed2(m.precision) + "       " + fixed2(m.recall) + "    " + fixed2(m.f1) +
                "    " + std::to_string(m.support);
        out << line << "\n";
    }
    std::string acc = "Accuracy";
    pad_to(acc, name_w + 19);
    out << acc << fixed2(r.accuracy) << "    " << r.total << "\n";
    std::string wavg = "Weighted avg";
    pad_to(wavg, name_w);
    out << wavg << fixed2(r.weighted_precision) << "       " << fixed2(r.weighted_recall)
        << "    " << fixed2(r.weighted_f1) << "    " << r.total << "\n";
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        if (!r.per_class[c].note.empty()) {
            out << "note: " << r.class_names[c] << ": " << r.per_class[c].note << "\n";
        }
    }
    return out.str();
}

} // namespace lbdmids
