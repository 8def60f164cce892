#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rainfill {

using Shape = std::vector<int64_t>;

int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated lazily
    bool requires_grad = false;
    bool is_leaf = true;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into parents.
    std::function<void(Node&)> backward_fn;

    std::vector<double>& ensure_grad();
};

}  // namespace detail

/// Dense row-major float64 array with reverse-mode autodiff.
///
/// Copies share the underlying node. Leaves are created with the factory
/// functions; every other tensor is produced by an op in ops.hpp.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    int64_t dim(int axis) const;
    int rank() const { return static_cast<int>(shape().size()); }
    int64_t numel() const;

    std::span<const double> data() const;
    /// Mutable view of the values. Only meaningful on leaves (parameters,
    /// inputs); mutating an interior node invalidates its gradients.
    std::span<double> data_mut();
    double item() const;

    bool requires_grad() const;
    bool has_grad() const;
    /// Empty span when no gradient has been accumulated.
    std::span<const double> grad() const;
    std::span<double> grad_mut();
    void zero_grad();

    /// Accumulates d(this)/d(leaf) into every reachable requires_grad leaf.
    /// Throws std::invalid_argument unless this tensor holds one element.
    void backward() const;

    /// A leaf holding a copy of the values with no graph history.
    Tensor detach() const;

    const std::shared_ptr<detail::Node>& node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

bool grad_enabled();

/// Disables graph construction on this thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

namespace detail {

/// Builds an op result. The graph edge is recorded only when grad mode is on
/// and some parent requires a gradient.
Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<Tensor> parents,
                   std::function<void(Node&)> backward_fn);

void accumulate(const std::shared_ptr<Node>& target, std::span<const double> delta);

}  // namespace detail

}  // namespace rainfill
