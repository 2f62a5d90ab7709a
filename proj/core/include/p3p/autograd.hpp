#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "p3p/types.hpp"

namespace p3p {

/// Named trainable tensor. Vectors are stored as 1 x n.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
};

/// Owns parameters in insertion order; references stay valid on growth.
class ParameterStore {
public:
    Parameter& add(std::string name, Matrix value);
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    bool contains(const std::string& name) const;

    void zero_grad();
    std::size_t size() const { return params_.size(); }
    std::int64_t scalar_count() const;

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

private:
    std::deque<Parameter> params_;
};

namespace ag {

class Tape;

/// Handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const Matrix& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so a reverse
// sweep visits every consumer before its inputs.
class Tape {
public:
    using Backward = std::function<void(Tape&, const Matrix& upstream)>;

    Var constant(Matrix value);
    Var param(Parameter& p);
    Var push(Matrix value, Backward backward);

    const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    void accumulate(Var v, const Matrix& g);
    template <class Fn>
    void accumulate_with(Var v, Fn&& fn) {
        Node& n = nodes_[static_cast<std::size_t>(v.id)];
        if (!n.needs_grad) return;
        if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
        fn(n.grad);
    }
    bool needs_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }

    // Seeds d root = 1 for a 1 x 1 root, propagates, and adds leaf gradients
    // into their parameters.
    void backward(Var root);
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        Backward backward;
        Parameter* param = nullptr;
        bool needs_grad = false;
    };
    std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var matmul_transposed(Var a, Var b);  // a * b^T
Var add(Var a, Var b);
Var add_row(Var a, Var row);          // broadcast a 1 x n row over every row of a
Var scale(Var a, double k);
Var gelu(Var a);
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-6);
// Row-wise softmax over the columns flagged in key_valid. Rows flagged
// invalid in query_valid come out as zeros.
Var masked_softmax(Var scores, const std::vector<std::uint8_t>& query_valid,
                   const std::vector<std::uint8_t>& key_valid);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var gather_rows(Var a, const std::vector<Eigen::Index>& rows);
Var repeat_row(Var row, Eigen::Index count);
Var sum_all(const std::vector<Var>& scalars);

/// Linear layer x W + b with parameters taken from the store.
Var linear(Tape& tape, ParameterStore& store, const std::string& prefix, Var x);

}  // namespace ag

}  // namespace p3p
