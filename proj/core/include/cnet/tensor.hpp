#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cnet/error.hpp"
#include "cnet/rng.hpp"

namespace cnet {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) {
        n *= d;
    }
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            os << ", ";
        }
        os << shape[i];
    }
    os << ']';
    return os.str();
}

enum class Mode { kTrain, kEval };

template <class T>
class Tensor;

template <class T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

/// Dense n-dimensional array with an optional gradient buffer and the
/// bookkeeping for reverse-mode differentiation. Nodes own strong references
/// to their parents, so a live output keeps the graph needed for backward()
/// alive; leaves (parameters) are held by their module and outlive the graph.
template <class T>
class Tensor : public std::enable_shared_from_this<Tensor<T>> {
    static_assert(std::is_floating_point_v<T>, "Tensor requires float or double");

    struct Private {};

public:
    using BackpropFn = std::function<void(const Tensor<T>&)>;

    Tensor(Private, Shape shape, bool requires_grad)
        : shape_(std::move(shape)), requires_grad_(requires_grad) {
        for (std::int64_t d : shape_) {
            if (d <= 0) {
                throw ShapeError("tensor: non-positive dimension in shape " + shape_str(shape_));
            }
        }
        data_.assign(static_cast<std::size_t>(shape_numel(shape_)), T(0));
        if (requires_grad_) {
            grad_.assign(data_.size(), T(0));
        }
    }

    static TensorPtr<T> create(Shape shape, bool requires_grad = false) {
        return std::make_shared<Tensor<T>>(Private{}, std::move(shape), requires_grad);
    }

    static TensorPtr<T> from_values(Shape shape, std::vector<T> values, bool requires_grad = false) {
        auto t = create(std::move(shape), requires_grad);
        if (values.size() != t->data_.size()) {
            throw ShapeError("tensor: " + std::to_string(values.size()) + " values for shape " +
                             shape_str(t->shape_));
        }
        t->data_ = std::move(values);
        return t;
    }

    static TensorPtr<T> full(Shape shape, T value, bool requires_grad = false) {
        auto t = create(std::move(shape), requires_grad);
        std::fill(t->data_.begin(), t->data_.end(), value);
        return t;
    }

    static TensorPtr<T> zeros(Shape shape, bool requires_grad = false) {
        return create(std::move(shape), requires_grad);
    }

    static TensorPtr<T> ones(Shape shape, bool requires_grad = false) {
        return full(std::move(shape), T(1), requires_grad);
    }

    static TensorPtr<T> scalar(T value, bool requires_grad = false) {
        return from_values({1}, {value}, requires_grad);
    }

    static TensorPtr<T> randn(Shape shape, RandomStream& rng, T stddev = T(1),
                              bool requires_grad = false) {
        auto t = create(std::move(shape), requires_grad);
        for (T& v : t->data_) {
            v = static_cast<T>(rng.normal()) * stddev;
        }
        return t;
    }

    static TensorPtr<T> rand_uniform(Shape shape, RandomStream& rng, T lo, T hi,
                                     bool requires_grad = false) {
        auto t = create(std::move(shape), requires_grad);
        for (T& v : t->data_) {
            v = static_cast<T>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
        }
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::int64_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    bool requires_grad() const { return requires_grad_; }

    void set_requires_grad(bool enable) {
        requires_grad_ = enable;
        if (enable) {
            require_grad_buffer();
        }
    }

    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }
    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    std::span<T> grad() {
        require_grad_buffer();
        return grad_;
    }
    std::span<const T> grad() const {
        const_cast<Tensor<T>*>(this)->require_grad_buffer();
        return grad_;
    }
    T* grad_data() {
        require_grad_buffer();
        return grad_.data();
    }

    T item() const {
        if (numel() != 1) {
            throw ShapeError("item: tensor has " + std::to_string(numel()) + " elements");
        }
        return data_[0];
    }

    void zero_grad() {
        if (requires_grad_) {
            grad_.assign(data_.size(), T(0));
        }
    }

    void accumulate_grad(std::span<const T> g) {
        if (!requires_grad_) {
            return;
        }
        require_grad_buffer();
        if (g.size() != grad_.size()) {
            throw ShapeError("accumulate_grad: got " + std::to_string(g.size()) +
                             " values, expected " + std::to_string(grad_.size()));
        }
        for (std::size_t i = 0; i < grad_.size(); ++i) {
            grad_[i] += g[i];
        }
    }

    /// Marks this tensor as the output of an op. `parents` are the op inputs
    /// whose gradients the closure fills in; the closure reads this node's
    /// grad buffer and accumulates into the parents.
    void set_autograd(std::vector<TensorPtr<T>> parents, BackpropFn backprop) {
        parents_ = std::move(parents);
        backprop_ = std::move(backprop);
        requires_grad_ = true;
        require_grad_buffer();
    }

    const std::vector<TensorPtr<T>>& parents() const { return parents_; }

    /// Reverse-mode pass from a scalar root. Gradients accumulate into every
    /// requires_grad ancestor; call zero_grad (or an optimizer's) between
    /// passes unless accumulation is intended. One backward at a time per
    /// graph; the pass itself does not lock anything.
    void backward() {
        if (numel() != 1) {
            throw ShapeError("backward: root must be a scalar, got shape " + shape_str(shape_));
        }
        if (!requires_grad_) {
            throw Error("backward: root does not require gradients (no graph recorded)");
        }

        // Iterative topological order over the parent DAG.
        std::vector<Tensor<T>*> order;
        std::unordered_set<Tensor<T>*> visited;
        std::vector<std::pair<Tensor<T>*, std::size_t>> stack;
        stack.emplace_back(this, 0);
        visited.insert(this);
        while (!stack.empty()) {
            auto& [node, next_child] = stack.back();
            if (next_child < node->parents_.size()) {
                Tensor<T>* child = node->parents_[next_child].get();
                ++next_child;
                if (child->requires_grad_ && visited.insert(child).second) {
                    stack.emplace_back(child, 0);
                }
            } else {
                order.push_back(node);
                stack.pop_back();
            }
        }

        require_grad_buffer();
        grad_[0] += T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Tensor<T>* node = *it;
            if (node->backprop_) {
                node->backprop_(*node);
            }
        }
    }

private:
    void require_grad_buffer() {
        if (grad_.size() != data_.size()) {
            grad_.assign(data_.size(), T(0));
        }
    }

    Shape shape_;
    std::vector<T> data_;
    std::vector<T> grad_;
    bool requires_grad_ = false;
    std::vector<TensorPtr<T>> parents_;
    BackpropFn backprop_;
};

/// Throws NumericError if any element of `t` is NaN or infinite.
template <class T>
void check_finite(const Tensor<T>& t, const char* op) {
    for (T v : t.values()) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(op) + ": non-finite value in output");
        }
    }
}

template <class T>
bool any_requires_grad(std::initializer_list<const TensorPtr<T>*> tensors) {
    for (const TensorPtr<T>* t : tensors) {
        if (*t && (*t)->requires_grad()) {
            return true;
        }
    }
    return false;
}

}  // namespace cnet
