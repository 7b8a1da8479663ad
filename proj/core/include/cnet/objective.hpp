#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cnet/error.hpp"
#include "cnet/ops.hpp"
#include "cnet/tensor.hpp"
#include "cnet/vocab.hpp"

namespace cnet {

/// The ordered task set: per task a name, a label vocabulary, and one
/// non-negative mixing weight. At least one weight must be positive.
struct TaskSpec {
    std::vector<std::string> names;
    std::vector<std::vector<std::string>> vocabularies;
    std::vector<double> alphas;

    void validate() const {
        if (names.empty()) {
            throw ConfigError("task spec: no tasks");
        }
        if (vocabularies.size() != names.size() || alphas.size() != names.size()) {
            throw ConfigError("task spec: names, vocabularies and alphas must line up");
        }
        bool any_positive = false;
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (vocabularies[i].empty()) {
                throw ConfigError("task spec: task \"" + names[i] + "\" has an empty vocabulary");
            }
            if (alphas[i] < 0.0) {
                throw ConfigError("task spec: task \"" + names[i] + "\" has a negative weight");
            }
            any_positive = any_positive || alphas[i] > 0.0;
        }
        if (!any_positive) {
            throw ConfigError("task spec: every task weight is zero");
        }
    }

    /// The two tasks this project ships: cuisine then flavor, with the
    /// label orders from the vocab tables.
    static TaskSpec cuisine_flavor(double alpha_cuisine = 1.0, double alpha_flavor = 1.0) {
        TaskSpec spec;
        spec.names = {"cuisine", "flavor"};
        spec.vocabularies.resize(2);
        for (auto name : cuisine_names()) {
            spec.vocabularies[0].emplace_back(name);
        }
        for (auto name : flavor_names()) {
            spec.vocabularies[1].emplace_back(name);
        }
        spec.alphas = {alpha_cuisine, alpha_flavor};
        return spec;
    }
};

/// Inverse-frequency class weights w_y = 1 - N_y / N. They always sum to
/// C - 1, which tests lean on.
inline std::vector<double> class_weights(std::span<const std::int64_t> labels,
                                         std::int64_t num_classes) {
    if (labels.empty()) {
        throw DataError("class_weights: no labels");
    }
    std::vector<std::int64_t> counts(static_cast<std::size_t>(num_classes), 0);
    for (std::int64_t y : labels) {
        if (y < 0 || y >= num_classes) {
            throw DataError("class_weights: label " + std::to_string(y) + " outside [0, " +
                            std::to_string(num_classes) + ")");
        }
        ++counts[static_cast<std::size_t>(y)];
    }
    std::vector<double> weights(static_cast<std::size_t>(num_classes));
    const double total = static_cast<double>(labels.size());
    for (std::size_t c = 0; c < weights.size(); ++c) {
        weights[c] = 1.0 - static_cast<double>(counts[c]) / total;
    }
    return weights;
}

/// Class-weighted cross entropy, summed over instances (the caller divides
/// by the batch size). Gradients flow into `logits` through an internal
/// log-softmax.
template <class T>
TensorPtr<T> weighted_cross_entropy(const TensorPtr<T>& logits,
                                    std::span<const std::int64_t> labels,
                                    std::span<const T> weights) {
    if (logits->rank() != 2) {
        throw ShapeError("weighted_cross_entropy: logits must be 2-d [n,C], got " +
                         shape_str(logits->shape()));
    }
    const std::int64_t n = logits->dim(0);
    const std::int64_t c = logits->dim(1);
    if (static_cast<std::int64_t>(labels.size()) != n) {
        throw ShapeError("weighted_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " rows");
    }
    if (static_cast<std::int64_t>(weights.size()) != c) {
        throw ShapeError("weighted_cross_entropy: " + std::to_string(weights.size()) +
                         " class weights for " + std::to_string(c) + " classes");
    }
    for (std::int64_t i = 0; i < n; ++i) {
        if (labels[static_cast<std::size_t>(i)] < 0 ||
            labels[static_cast<std::size_t>(i)] >= c) {
            throw DataError("weighted_cross_entropy: label " +
                            std::to_string(labels[static_cast<std::size_t>(i)]) + " at row " +
                            std::to_string(i) + " outside [0, " + std::to_string(c) + ")");
        }
    }

    auto lsm = log_softmax(logits);
    T acc = T(0);
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t y = labels[static_cast<std::size_t>(i)];
        acc -= weights[static_cast<std::size_t>(y)] *
               lsm->values()[static_cast<std::size_t>(i * c + y)];
    }
    auto out = Tensor<T>::scalar(acc);
    check_finite(*out, "weighted_cross_entropy");

    if (lsm->requires_grad()) {
        std::vector<std::int64_t> labels_copy(labels.begin(), labels.end());
        std::vector<T> weights_copy(weights.begin(), weights.end());
        out->set_autograd({lsm}, [lsm, labels_copy = std::move(labels_copy),
                                  weights_copy = std::move(weights_copy), n,
                                  c](const Tensor<T>& out_node) {
            const T g = out_node.grad()[0];
            T* dl = lsm->grad_data();
            for (std::int64_t i = 0; i < n; ++i) {
                const std::int64_t y = labels_copy[static_cast<std::size_t>(i)];
                dl[i * c + y] -= weights_copy[static_cast<std::size_t>(y)] * g;
            }
        });
    }
    return out;
}

/// alpha_1 * a + alpha_2 * b as a graph node; a zero coefficient contributes
/// exactly zero gradient to its branch.
template <class T>
TensorPtr<T> joint_loss(const TensorPtr<T>& a, const TensorPtr<T>& b, double alpha_a,
                        double alpha_b) {
    return add(scale(a, static_cast<T>(alpha_a)), scale(b, static_cast<T>(alpha_b)));
}

/// Weighted sum of one scalar loss per task in `spec`, left to right.
template <class T>
TensorPtr<T> joint_loss(const std::vector<TensorPtr<T>>& task_losses, const TaskSpec& spec) {
    spec.validate();
    if (task_losses.size() != spec.alphas.size()) {
        throw ShapeError("joint_loss: " + std::to_string(task_losses.size()) + " losses for " +
                         std::to_string(spec.alphas.size()) + " tasks");
    }
    auto total = scale(task_losses[0], static_cast<T>(spec.alphas[0]));
    for (std::size_t i = 1; i < task_losses.size(); ++i) {
        total = add(total, scale(task_losses[i], static_cast<T>(spec.alphas[i])));
    }
    return total;
}

}  // namespace cnet
