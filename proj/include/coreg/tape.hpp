#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "coreg/matrix.hpp"

namespace coreg {

/// Handle to a value recorded on a Tape.
struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
};

/// Reverse-mode gradient tape over whole matrices.
///
/// Every op appends a node holding its forward value and a closure mapping the
/// node's output gradient onto gradients for its inputs. backward() walks the
/// nodes in reverse recording order, so a tape is a topologically sorted DAG by
/// construction. Nodes that do not depend on any parameter skip their closures.
/// A tape is single-use and confined to one thread.
class Tape {
public:
    /// Maps the output gradient to one gradient per input (same order, same shapes).
    using Backward = std::function<std::vector<Matrix>(const Matrix& out_grad)>;

    Tape() = default;
    // Closures refer back into the tape, so it stays put.
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value);
    Var parameter(Matrix value);

    Var matmul(Var a, Var b);
    Var matmul_nt(Var a, Var b);
    Var add(Var a, Var b);
    Var scale(Var a, double s);
    Var add_row_broadcast(Var x, Var row);
    Var append_ones_column(Var x);
    Var leaky_relu(Var x, double slope);
    Var sigmoid(Var x);
    Var select_rows(Var x, std::vector<std::size_t> rows);
    /// Sum over scalars (1x1 values) with fixed coefficients.
    Var linear_combination(std::span<const Var> terms, std::span<const double> weights);

    /// Records an op whose gradient is supplied in closed form by the caller.
    Var custom(Matrix value, std::vector<Var> inputs, Backward backward);

    /// Seeds d(root)/d(root) = 1 and accumulates gradients into every node.
    /// root must be 1x1.
    void backward(Var root);

    const Matrix& value(Var v) const;
    /// Accumulated gradient; zeros of the value's shape when nothing flowed into v.
    Matrix gradient(Var v) const;
    double scalar(Var v) const;

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::vector<std::size_t> inputs;
        Backward backward;
        bool requires_grad = false;
        bool has_grad = false;
    };

    Var push(Matrix value, std::vector<Var> inputs, Backward backward, bool is_parameter = false);
    const Node& node(Var v) const;

    std::vector<Node> nodes_;
};

}  // namespace coreg
