#include "p3p/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "p3p/tokenizer.hpp"

namespace p3p {

Parameter& ParameterStore::add(std::string name, Matrix value) {
    if (contains(name)) throw std::invalid_argument("parameter '" + name + "' already exists");
    Matrix grad = Matrix::Zero(value.rows(), value.cols());
    params_.push_back({std::move(name), std::move(value), std::move(grad)});
    return params_.back();
}

Parameter& ParameterStore::get(const std::string& name) {
    for (Parameter& p : params_)
        if (p.name == name) return p;
    throw std::out_of_range("no parameter named '" + name + "'");
}

const Parameter& ParameterStore::get(const std::string& name) const {
    for (const Parameter& p : params_)
        if (p.name == name) return p;
    throw std::out_of_range("no parameter named '" + name + "'");
}

bool ParameterStore::contains(const std::string& name) const {
    for (const Parameter& p : params_)
        if (p.name == name) return true;
    return false;
}

void ParameterStore::zero_grad() {
    for (Parameter& p : params_) p.grad.setZero(p.value.rows(), p.value.cols());
}

std::int64_t ParameterStore::scalar_count() const {
    std::int64_t n = 0;
    for (const Parameter& p : params_) n += p.value.size();
    return n;
}

namespace ag {

const Matrix& Var::value() const { return tape->value(id); }

Var Tape::constant(Matrix value) {
    nodes_.push_back({std::move(value), {}, {}, nullptr, false});
    return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::param(Parameter& p) {
    nodes_.push_back({p.value, {}, {}, &p, true});
    return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::push(Matrix value, Backward backward) {
    nodes_.push_back({std::move(value), {}, std::move(backward), nullptr, true});
    return {this, static_cast<int>(nodes_.size() - 1)};
}

void Tape::accumulate(Var v, const Matrix& g) {
    accumulate_with(v, [&](Matrix& grad) { grad += g; });
}

void Tape::backward(Var root) {
    if (value(root.id).size() != 1) throw std::invalid_argument("backward: root must be a scalar");
    nodes_[static_cast<std::size_t>(root.id)].grad = Matrix::Ones(1, 1);
    for (int i = root.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.grad.size() == 0) continue;
        if (n.backward) {
            const Matrix upstream = std::move(n.grad);
            n.grad.resize(0, 0);
            n.backward(*this, upstream);
        } else if (n.param) {
            n.param->grad += n.grad;
        }
    }
}

namespace {

bool any_needs(Var a) { return a.tape->needs_grad(a); }

void require_same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw std::logic_error("autograd: variables from different tapes");
}

// Builds a node whose backward only runs when at least one input needs it.
Var make(Tape& t, Matrix value, bool needs, Tape::Backward back) {
    if (!needs) return t.constant(std::move(value));
    return t.push(std::move(value), std::move(back));
}

}  // namespace

Var matmul(Var a, Var b) {
    require_same_tape(a, b);
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
    Matrix out = a.value() * b.value();
    return make(*a.tape, std::move(out), any_needs(a) || any_needs(b), [a, b](Tape& t, const Matrix& g) {
        if (t.needs_grad(a)) t.accumulate_with(a, [&](Matrix& ga) { ga.noalias() += g * b.value().transpose(); });
        if (t.needs_grad(b)) t.accumulate_with(b, [&](Matrix& gb) { gb.noalias() += a.value().transpose() * g; });
    });
}

Var matmul_transposed(Var a, Var b) {
    require_same_tape(a, b);
    if (a.cols() != b.cols()) throw std::invalid_argument("matmul_transposed: inner dimensions differ");
    Matrix out = a.value() * b.value().transpose();
    return make(*a.tape, std::move(out), any_needs(a) || any_needs(b), [a, b](Tape& t, const Matrix& g) {
        if (t.needs_grad(a)) t.accumulate_with(a, [&](Matrix& ga) { ga.noalias() += g * b.value(); });
        if (t.needs_grad(b)) t.accumulate_with(b, [&](Matrix& gb) { gb.noalias() += g.transpose() * a.value(); });
    });
}

Var add(Var a, Var b) {
    require_same_tape(a, b);
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("add: shape mismatch");
    Matrix out = a.value() + b.value();
    return make(*a.tape, std::move(out), any_needs(a) || any_needs(b), [a, b](Tape& t, const Matrix& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

Var add_row(Var a, Var row) {
    require_same_tape(a, row);
    if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: shape mismatch");
    Matrix out = a.value();
    out.rowwise() += row.value().row(0);
    return make(*a.tape, std::move(out), any_needs(a) || any_needs(row), [a, row](Tape& t, const Matrix& g) {
        t.accumulate(a, g);
        if (t.needs_grad(row)) t.accumulate_with(row, [&](Matrix& gr) { gr += g.colwise().sum(); });
    });
}

Var scale(Var a, double k) {
    return make(*a.tape, a.value() * k, any_needs(a), [a, k](Tape& t, const Matrix& g) { t.accumulate(a, g * k); });
}

Var gelu(Var a) {
    Matrix out = a.value().unaryExpr([](double v) { return p3p::gelu(v); });
    return make(*a.tape, std::move(out), any_needs(a), [a](Tape& t, const Matrix& g) {
        t.accumulate(a, g.cwiseProduct(a.value().unaryExpr([](double v) { return p3p::gelu_grad(v); })));
    });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
    const Eigen::Index rows = x.rows(), cols = x.cols();
    if (gamma.rows() != 1 || gamma.cols() != cols || beta.rows() != 1 || beta.cols() != cols)
        throw std::invalid_argument("layer_norm: affine parameters must be 1 x width");
    Matrix normed(rows, cols);
    Vector inv_std(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const double mean = x.value().row(r).mean();
        const RowVector centered = x.value().row(r).array() - mean;
        const double var = centered.squaredNorm() / static_cast<double>(cols);
        inv_std(r) = 1.0 / std::sqrt(var + eps);
        normed.row(r) = centered * inv_std(r);
    }
    Matrix out = normed.array().rowwise() * gamma.value().row(0).array();
    out.rowwise() += beta.value().row(0);
    const bool needs = any_needs(x) || any_needs(gamma) || any_needs(beta);
    return make(*x.tape, std::move(out), needs, [x, gamma, beta, normed, inv_std](Tape& t, const Matrix& g) {
        if (t.needs_grad(gamma))
            t.accumulate_with(gamma, [&](Matrix& gg) { gg += g.cwiseProduct(normed).colwise().sum(); });
        if (t.needs_grad(beta)) t.accumulate_with(beta, [&](Matrix& gb) { gb += g.colwise().sum(); });
        if (t.needs_grad(x)) {
            const Eigen::Index n = normed.cols();
            Matrix gx(normed.rows(), n);
            for (Eigen::Index r = 0; r < normed.rows(); ++r) {
                const RowVector gh = g.row(r).cwiseProduct(gamma.value().row(0));
                const double mean_gh = gh.mean();
                const double mean_gh_h = gh.dot(normed.row(r)) / static_cast<double>(n);
                gx.row(r) = inv_std(r) * (gh.array() - mean_gh - normed.row(r).array() * mean_gh_h).matrix();
            }
            t.accumulate(x, gx);
        }
    });
}

Var masked_softmax(Var scores, const std::vector<std::uint8_t>& query_valid,
                   const std::vector<std::uint8_t>& key_valid) {
    const Eigen::Index rows = scores.rows(), cols = scores.cols();
    if (static_cast<Eigen::Index>(query_valid.size()) != rows || static_cast<Eigen::Index>(key_valid.size()) != cols)
        throw std::invalid_argument("masked_softmax: mask size mismatch");
    Matrix out = Matrix::Zero(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (!query_valid[static_cast<std::size_t>(r)]) continue;
        double peak = -std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < cols; ++c)
            if (key_valid[static_cast<std::size_t>(c)]) peak = std::max(peak, scores.value()(r, c));
        double total = 0;
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (!key_valid[static_cast<std::size_t>(c)]) continue;
            out(r, c) = std::exp(scores.value()(r, c) - peak);
            total += out(r, c);
        }
        if (total > 0) out.row(r) /= total;
    }
    const Matrix probs = out;
    return make(*scores.tape, std::move(out), any_needs(scores), [scores, probs](Tape& t, const Matrix& g) {
        // d s = p * (g - <g, p>) row-wise; masked entries have p = 0.
        Matrix gs(probs.rows(), probs.cols());
        for (Eigen::Index r = 0; r < probs.rows(); ++r) {
            const double dot = g.row(r).dot(probs.row(r));
            gs.row(r) = probs.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
        }
        t.accumulate(scores, gs);
    });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || start + count > a.cols()) throw std::invalid_argument("slice_cols: out of range");
    Matrix out = a.value().middleCols(start, count);
    return make(*a.tape, std::move(out), any_needs(a), [a, start, count](Tape& t, const Matrix& g) {
        t.accumulate_with(a, [&](Matrix& ga) { ga.middleCols(start, count) += g; });
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: nothing to join");
    Eigen::Index cols = 0;
    bool needs = false;
    for (const Var& p : parts) {
        if (p.rows() != parts[0].rows()) throw std::invalid_argument("concat_cols: row mismatch");
        cols += p.cols();
        needs = needs || any_needs(p);
    }
    Matrix out(parts[0].rows(), cols);
    Eigen::Index at = 0;
    for (const Var& p : parts) {
        out.middleCols(at, p.cols()) = p.value();
        at += p.cols();
    }
    return make(*parts[0].tape, std::move(out), needs, [parts](Tape& t, const Matrix& g) {
        Eigen::Index at = 0;
        for (const Var& p : parts) {
            const Eigen::Index w = p.cols();
            if (t.needs_grad(p)) t.accumulate(p, g.middleCols(at, w));
            at += w;
        }
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: nothing to join");
    Eigen::Index rows = 0;
    bool needs = false;
    for (const Var& p : parts) {
        if (p.cols() != parts[0].cols()) throw std::invalid_argument("concat_rows: column mismatch");
        rows += p.rows();
        needs = needs || any_needs(p);
    }
    Matrix out(rows, parts[0].cols());
    Eigen::Index at = 0;
    for (const Var& p : parts) {
        out.middleRows(at, p.rows()) = p.value();
        at += p.rows();
    }
    return make(*parts[0].tape, std::move(out), needs, [parts](Tape& t, const Matrix& g) {
        Eigen::Index at = 0;
        for (const Var& p : parts) {
            const Eigen::Index h = p.rows();
            if (t.needs_grad(p)) t.accumulate(p, g.middleRows(at, h));
            at += h;
        }
    });
}

Var gather_rows(Var a, const std::vector<Eigen::Index>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= a.rows()) throw std::invalid_argument("gather_rows: index out of range");
        out.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
    }
    return make(*a.tape, std::move(out), any_needs(a), [a, rows](Tape& t, const Matrix& g) {
        t.accumulate_with(a, [&](Matrix& ga) {
            for (std::size_t i = 0; i < rows.size(); ++i) ga.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
        });
    });
}

Var repeat_row(Var row, Eigen::Index count) {
    if (row.rows() != 1) throw std::invalid_argument("repeat_row: expected a single row");
    Matrix out = row.value().replicate(count, 1);
    return make(*row.tape, std::move(out), any_needs(row), [row](Tape& t, const Matrix& g) {
        t.accumulate(row, g.colwise().sum());
    });
}

Var sum_all(const std::vector<Var>& scalars) {
    if (scalars.empty()) throw std::invalid_argument("sum_all: nothing to sum");
    double total = 0;
    bool needs = false;
    for (const Var& s : scalars) {
        if (s.value().size() != 1) throw std::invalid_argument("sum_all: expected scalars");
        total += s.value()(0, 0);
        needs = needs || any_needs(s);
    }
    return make(*scalars[0].tape, Matrix::Constant(1, 1, total), needs, [scalars](Tape& t, const Matrix& g) {
        for (const Var& s : scalars) t.accumulate(s, g);
    });
}

Var linear(Tape& tape, ParameterStore& store, const std::string& prefix, Var x) {
    const Var w = tape.param(store.get(prefix + ".w"));
    const Var b = tape.param(store.get(prefix + ".b"));
    return add_row(matmul(x, w), b);
}

}  // namespace ag

}  // namespace p3p
