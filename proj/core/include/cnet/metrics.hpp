#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cnet {

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0;
};

struct TaskMetrics {
    /// confusion[truth][prediction]
    std::vector<std::vector<std::int64_t>> confusion;
    std::vector<ClassMetrics> per_class;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
};

/// Per-class precision/recall/F1 plus unweighted macro averages. A class with
/// an empty denominator scores 0 for that statistic.
TaskMetrics compute_metrics(std::span<const std::int64_t> truth,
                            std::span<const std::int64_t> predicted, std::int64_t num_classes);

/// Macro scores of both tasks plus their arithmetic mean, one row per task,
/// percentages with two decimals.
std::string summary_table(const TaskMetrics& cuisine, const TaskMetrics& flavor);

/// summary_table plus a per-class breakdown for each task.
std::string full_report(const TaskMetrics& cuisine, const TaskMetrics& flavor,
                        std::span<const std::string_view> cuisine_labels,
                        std::span<const std::string_view> flavor_labels);

/// One record per line, key=value fields, fractions (not percentages), floats
/// serialized losslessly.
std::string metrics_kv(const TaskMetrics& cuisine, const TaskMetrics& flavor,
                       std::span<const std::string_view> cuisine_labels,
                       std::span<const std::string_view> flavor_labels);

}  // namespace cnet
