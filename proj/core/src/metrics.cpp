#include "cnet/metrics.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "cnet/error.hpp"

namespace cnet {

namespace {

std::string lossless(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
    return buf;
}

void summary_row(std::ostringstream& os, const std::string& label, double p, double r,
                 double f1) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-24s %9s %9s %9s\n", label.c_str(), percent(p).c_str(),
                  percent(r).c_str(), percent(f1).c_str());
    os << buf;
}

}  // namespace

TaskMetrics compute_metrics(std::span<const std::int64_t> truth,
                            std::span<const std::int64_t> predicted, std::int64_t num_classes) {
    if (truth.size() != predicted.size()) {
        throw DataError("metrics: " + std::to_string(truth.size()) + " truth labels vs " +
                        std::to_string(predicted.size()) + " predictions");
    }
    if (num_classes < 1) {
        throw DataError("metrics: num_classes must be positive");
    }
    TaskMetrics m;
    m.confusion.assign(static_cast<std::size_t>(num_classes),
                       std::vector<std::int64_t>(static_cast<std::size_t>(num_classes), 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const std::int64_t t = truth[i];
        const std::int64_t p = predicted[i];
        if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
            throw DataError("metrics: label pair (" + std::to_string(t) + ", " +
                            std::to_string(p) + ") at row " + std::to_string(i) +
                            " outside [0, " + std::to_string(num_classes) + ")");
        }
        ++m.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    }

    m.per_class.resize(static_cast<std::size_t>(num_classes));
    for (std::int64_t c = 0; c < num_classes; ++c) {
        std::int64_t tp = m.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
        std::int64_t pred_c = 0;
        std::int64_t true_c = 0;
        for (std::int64_t o = 0; o < num_classes; ++o) {
            pred_c += m.confusion[static_cast<std::size_t>(o)][static_cast<std::size_t>(c)];
            true_c += m.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(o)];
        }
        auto& pc = m.per_class[static_cast<std::size_t>(c)];
        pc.support = true_c;
        pc.precision = pred_c == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pred_c);
        pc.recall = true_c == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(true_c);
        pc.f1 = pc.precision + pc.recall == 0.0
                    ? 0.0
                    : 2.0 * pc.precision * pc.recall / (pc.precision + pc.recall);
        m.macro_precision += pc.precision;
        m.macro_recall += pc.recall;
        m.macro_f1 += pc.f1;
    }
    m.macro_precision /= static_cast<double>(num_classes);
    m.macro_recall /= static_cast<double>(num_classes);
    m.macro_f1 /= static_cast<double>(num_classes);
    return m;
}

std::string summary_table(const TaskMetrics& cuisine, const TaskMetrics& flavor) {
    std::ostringstream os;
    char head[96];
    std::snprintf(head, sizeof(head), "%-24s %9s %9s %9s\n", "Task", "Precision", "Recall",
                  "F1 score");
    os << head;
    summary_row(os, "Cuisine classification", cuisine.macro_precision, cuisine.macro_recall,
                cuisine.macro_f1);
    summary_row(os, "Flavour analysis", flavor.macro_precision, flavor.macro_recall,
                flavor.macro_f1);
    summary_row(os, "Averaged", (cuisine.macro_precision + flavor.macro_precision) / 2.0,
                (cuisine.macro_recall + flavor.macro_recall) / 2.0,
                (cuisine.macro_f1 + flavor.macro_f1) / 2.0);
    return os.str();
}

namespace {

void per_class_block(std::ostringstream& os, const char* title, const TaskMetrics& m,
                     std::span<const std::string_view> labels) {
    os << title << '\n';
    char head[96];
    std::snprintf(head, sizeof(head), "%-24s %9s %9s %9s %9s\n", "Class", "Precision", "Recall",
                  "F1 score", "Support");
    os << head;
    for (std::size_t c = 0; c < m.per_class.size(); ++c) {
        const auto& pc = m.per_class[c];
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%-24s %9s %9s %9s %9lld\n",
                      std::string(labels[c]).c_str(), percent(pc.precision).c_str(),
                      percent(pc.recall).c_str(), percent(pc.f1).c_str(),
                      static_cast<long long>(pc.support));
        os << buf;
    }
}

}  // namespace

std::string full_report(const TaskMetrics& cuisine, const TaskMetrics& flavor,
                        std::span<const std::string_view> cuisine_labels,
                        std::span<const std::string_view> flavor_labels) {
    if (cuisine_labels.size() != cuisine.per_class.size() ||
        flavor_labels.size() != flavor.per_class.size()) {
        throw DataError("report: label list does not match class count");
    }
    std::ostringstream os;
    per_class_block(os, "Cuisine", cuisine, cuisine_labels);
    os << '\n';
    per_class_block(os, "Flavour", flavor, flavor_labels);
    os << '\n';
    os << summary_table(cuisine, flavor);
    return os.str();
}

std::string metrics_kv(const TaskMetrics& cuisine, const TaskMetrics& flavor,
                       std::span<const std::string_view> cuisine_labels,
                       std::span<const std::string_view> flavor_labels) {
    std::ostringstream os;
    const auto task_block = [&os](const char* task, const TaskMetrics& m,
                                  std::span<const std::string_view> labels) {
        for (std::size_t c = 0; c < m.per_class.size(); ++c) {
            const auto& pc = m.per_class[c];
            os << "task=" << task << " class=" << labels[c] << " precision="
               << lossless(pc.precision) << " recall=" << lossless(pc.recall)
               << " f1=" << lossless(pc.f1) << " support=" << pc.support << '\n';
        }
        os << "task=" << task << " macro_precision=" << lossless(m.macro_precision)
           << " macro_recall=" << lossless(m.macro_recall) << " macro_f1="
           << lossless(m.macro_f1) << '\n';
    };
    task_block("cuisine", cuisine, cuisine_labels);
    task_block("flavor", flavor, flavor_labels);
    os << "averaged_precision=" << lossless((cuisine.macro_precision + flavor.macro_precision) / 2.0)
       << " averaged_recall=" << lossless((cuisine.macro_recall + flavor.macro_recall) / 2.0)
       << " averaged_f1=" << lossless((cuisine.macro_f1 + flavor.macro_f1) / 2.0) << '\n';
    return os.str();
}

}  // namespace cnet
