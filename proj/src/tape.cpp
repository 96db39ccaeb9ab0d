#include "coreg/tape.hpp"

#include <utility>

#include "coreg/error.hpp"

namespace coreg {

Var Tape::push(Matrix value, std::vector<Var> inputs, Backward backward, bool is_parameter) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = is_parameter;
    n.inputs.reserve(inputs.size());
    for (Var in : inputs) {
        const Node& parent = node(in);
        n.requires_grad = n.requires_grad || parent.requires_grad;
        n.inputs.push_back(in.id);
    }
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

const Tape::Node& Tape::node(Var v) const {
    if (v.id >= nodes_.size()) fail(ErrorKind::Contract, "tape: variable does not belong to this tape");
    return nodes_[v.id];
}

Var Tape::constant(Matrix value) { return push(std::move(value), {}, nullptr); }

Var Tape::parameter(Matrix value) { return push(std::move(value), {}, nullptr, true); }

Var Tape::matmul(Var a, Var b) {
    Matrix out = coreg::matmul(value(a), value(b));
    return push(std::move(out), {a, b}, [this, a, b](const Matrix& g) {
        return std::vector<Matrix>{coreg::matmul_nt(g, value(b)), matmul_tn(value(a), g)};
    });
}

Var Tape::matmul_nt(Var a, Var b) {
    Matrix out = coreg::matmul_nt(value(a), value(b));
    return push(std::move(out), {a, b}, [this, a, b](const Matrix& g) {
        // out = a b^T: da = g b, db = g^T a
        return std::vector<Matrix>{coreg::matmul(g, value(b)), matmul_tn(g, value(a))};
    });
}

Var Tape::add(Var a, Var b) {
    Matrix out = coreg::add(value(a), value(b));
    return push(std::move(out), {a, b}, [](const Matrix& g) { return std::vector<Matrix>{g, g}; });
}

Var Tape::scale(Var a, double s) {
    Matrix out = coreg::scale(value(a), s);
    return push(std::move(out), {a}, [s](const Matrix& g) { return std::vector<Matrix>{coreg::scale(g, s)}; });
}

Var Tape::add_row_broadcast(Var x, Var row) {
    Matrix out = coreg::add_row_broadcast(value(x), value(row));
    return push(std::move(out), {x, row},
                [](const Matrix& g) { return std::vector<Matrix>{g, column_sums(g)}; });
}

Var Tape::append_ones_column(Var x) {
    Matrix out = coreg::append_ones_column(value(x));
    return push(std::move(out), {x}, [](const Matrix& g) { return std::vector<Matrix>{drop_last_column(g)}; });
}

Var Tape::leaky_relu(Var x, double slope) {
    Matrix out = coreg::leaky_relu(value(x), slope);
    return push(std::move(out), {x}, [this, x, slope](const Matrix& g) {
        return std::vector<Matrix>{hadamard(g, leaky_relu_derivative(value(x), slope))};
    });
}

Var Tape::sigmoid(Var x) {
    Matrix out = coreg::sigmoid(value(x));
    const std::size_t self = nodes_.size();
    return push(std::move(out), {x}, [this, self](const Matrix& g) {
        const Matrix& y = nodes_[self].value;
        Matrix dx(g.rows(), g.cols());
        for (std::size_t i = 0; i < dx.size(); ++i) {
            const double yi = y.data()[i];
            dx.data()[i] = g.data()[i] * yi * (1.0 - yi);
        }
        return std::vector<Matrix>{std::move(dx)};
    });
}

Var Tape::select_rows(Var x, std::vector<std::size_t> rows) {
    Matrix out = coreg::select_rows(value(x), rows);
    const std::size_t n = value(x).rows();
    return push(std::move(out), {x}, [rows = std::move(rows), n](const Matrix& g) {
        Matrix dx(n, g.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto src = g.row(i);
            auto dst = dx.row(rows[i]);
            for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
        }
        return std::vector<Matrix>{std::move(dx)};
    });
}

Var Tape::linear_combination(std::span<const Var> terms, std::span<const double> weights) {
    if (terms.size() != weights.size()) fail(ErrorKind::Contract, "linear_combination: size mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const Matrix& t = value(terms[i]);
        if (t.rows() != 1 || t.cols() != 1) {
            fail(ErrorKind::Dimension, "linear_combination: term is " + t.shape() + ", expected 1x1");
        }
        total += weights[i] * t(0, 0);
    }
    std::vector<double> w(weights.begin(), weights.end());
    return push(Matrix(1, 1, total), std::vector<Var>(terms.begin(), terms.end()),
                [w = std::move(w)](const Matrix& g) {
                    std::vector<Matrix> out;
                    out.reserve(w.size());
                    for (double wi : w) out.emplace_back(1, 1, wi * g(0, 0));
                    return out;
                });
}

Var Tape::custom(Matrix value, std::vector<Var> inputs, Backward backward) {
    return push(std::move(value), std::move(inputs), std::move(backward));
}

void Tape::backward(Var root) {
    const Node& r = node(root);
    if (r.value.rows() != 1 || r.value.cols() != 1) {
        fail(ErrorKind::Dimension, "backward: root must be 1x1, got " + r.value.shape());
    }
    for (Node& n : nodes_) {
        n.has_grad = false;
        n.grad = Matrix();
    }
    nodes_[root.id].grad = Matrix(1, 1, 1.0);
    nodes_[root.id].has_grad = true;

    for (std::size_t i = root.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.has_grad || !n.requires_grad || !n.backward) continue;
        std::vector<Matrix> grads = n.backward(n.grad);
        if (grads.size() != n.inputs.size()) {
            fail(ErrorKind::Contract, "backward: op returned wrong number of input gradients");
        }
        for (std::size_t k = 0; k < grads.size(); ++k) {
            Node& parent = nodes_[n.inputs[k]];
            if (!parent.requires_grad) continue;
            if (!grads[k].same_shape(parent.value)) {
                fail(ErrorKind::Dimension, "backward: gradient " + grads[k].shape() +
                                               " does not match value " + parent.value.shape());
            }
            if (parent.has_grad) {
                add_inplace(parent.grad, grads[k]);
            } else {
                parent.grad = std::move(grads[k]);
                parent.has_grad = true;
            }
        }
    }
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

Matrix Tape::gradient(Var v) const {
    const Node& n = node(v);
    if (n.has_grad) return n.grad;
    return Matrix(n.value.rows(), n.value.cols());
}

double Tape::scalar(Var v) const {
    const Matrix& m = value(v);
    if (m.rows() != 1 || m.cols() != 1) fail(ErrorKind::Dimension, "scalar: value is " + m.shape());
    return m(0, 0);
}

}  // namespace coreg
