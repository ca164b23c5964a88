#include "lordsig/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lordsig::nn {

namespace {
constexpr double kProbClamp = 1e-12;
}

Var Tape::push(Node n, int len) {
    n.off = values_.size();
    n.len = len;
    values_.resize(values_.size() + static_cast<std::size_t>(len), 0.0);
    nodes_.push_back(n);
    return static_cast<Var>(nodes_.size() - 1);
}

Var Tape::constant(std::span<const double> value) {
    Node n;
    n.op = Op::kConst;
    Var v = push(n, static_cast<int>(value.size()));
    std::copy(value.begin(), value.end(), data(v));
    return v;
}

Var Tape::scalar_constant(double value) { return constant(std::span<const double>{&value, 1}); }

Var Tape::param(int slot, const Tensor& t) {
    Node n;
    n.op = Op::kParam;
    n.slot = slot;
    n.rows = t.rows;
    n.cols = t.cols;
    Var v = push(n, static_cast<int>(t.size()));
    std::copy(t.v.begin(), t.v.end(), data(v));
    return v;
}

Var Tape::affine(Var w, Var b, Var x, int rows, int cols) {
    const auto& wn = nodes_[static_cast<std::size_t>(w)];
    const auto& bn = nodes_[static_cast<std::size_t>(b)];
    const auto& xn = nodes_[static_cast<std::size_t>(x)];
    if (wn.len != rows * cols || bn.len != rows || xn.len != cols)
        throw std::invalid_argument("Tape::affine: dimension mismatch");
    Node n;
    n.op = Op::kAffine;
    n.a = w;
    n.b = b;
    n.c = x;
    n.rows = rows;
    n.cols = cols;
    Var v = push(n, rows);
    compute(nodes_.size() - 1);
    return v;
}

Var Tape::matvec(Var flat, Var x, int rows, int cols) {
    const auto& fn = nodes_[static_cast<std::size_t>(flat)];
    const auto& xn = nodes_[static_cast<std::size_t>(x)];
    if (fn.len != rows * cols || xn.len != cols)
        throw std::invalid_argument("Tape::matvec: dimension mismatch");
    Node n;
    n.op = Op::kMatVec;
    n.a = flat;
    n.b = x;
    n.rows = rows;
    n.cols = cols;
    Var v = push(n, rows);
    compute(nodes_.size() - 1);
    return v;
}

Var Tape::relu(Var x) {
    Node n;
    n.op = Op::kRelu;
    n.a = x;
    Var v = push(n, nodes_[static_cast<std::size_t>(x)].len);
    compute(nodes_.size() - 1);
    return v;
}

Var Tape::tanh(Var x) {
    Node n;
    n.op = Op::kTanh;
    n.a = x;
    Var v = push(n, nodes_[static_cast<std::size_t>(x)].len);
    compute(nodes_.size() - 1);
    return v;
}

Var Tape::scale(double k, Var x) {
    Node n;
    n.op = Op::kScale;
    n.a = x;
    n.k = k;
    Var v = push(n, nodes_[static_cast<std::size_t>(x)].len);
    compute(nodes_.size() - 1);
    return v;
}

Var Tape::axpy(double k, Var x, Var y) {
    if (nodes_[static_cast<std::size_t>(x)].len != nodes_[static_cast<std::size_t>(y)].len)
        throw std::invalid_argument("Tape::axpy: length mismatch");
    Node n;
    n.op = Op::kAxpy;
    n.a = x;
    n.b = y;
    n.k = k;
    Var v = push(n, nodes_[static_cast<std::size_t>(x)].len);
    compute(nodes_.size() - 1);
    return v;
}

Var Tape::add(std::span<const Var> xs) {
    if (xs.empty()) throw std::invalid_argument("Tape::add: no inputs");
    const int len = nodes_[static_cast<std::size_t>(xs[0])].len;
    for (Var x : xs)
        if (nodes_[static_cast<std::size_t>(x)].len != len)
            throw std::invalid_argument("Tape::add: length mismatch");
    Node n;
    n.op = Op::kAdd;
    n.many = static_cast<int>(many_pool_.size());
    n.many_n = static_cast<int>(xs.size());
    many_pool_.insert(many_pool_.end(), xs.begin(), xs.end());
    Var v = push(n, len);
    compute(nodes_.size() - 1);
    return v;
}

Var Tape::mean(std::span<const Var> xs) {
    if (xs.empty()) throw std::invalid_argument("Tape::mean: no inputs");
    const int len = nodes_[static_cast<std::size_t>(xs[0])].len;
    for (Var x : xs)
        if (nodes_[static_cast<std::size_t>(x)].len != len)
            throw std::invalid_argument("Tape::mean: length mismatch");
    Node n;
    n.op = Op::kMean;
    n.many = static_cast<int>(many_pool_.size());
    n.many_n = static_cast<int>(xs.size());
    many_pool_.insert(many_pool_.end(), xs.begin(), xs.end());
    Var v = push(n, len);
    compute(nodes_.size() - 1);
    return v;
}

Var Tape::sq_norm(Var x) {
    Node n;
    n.op = Op::kSqNorm;
    n.a = x;
    Var v = push(n, 1);
    compute(nodes_.size() - 1);
    return v;
}

Var Tape::softmax_cross_entropy(Var logits, int label) {
    const auto& ln = nodes_[static_cast<std::size_t>(logits)];
    if (label < 0 || label >= ln.len)
        throw std::invalid_argument("Tape::softmax_cross_entropy: label out of range");
    Node n;
    n.op = Op::kSoftmaxCE;
    n.a = logits;
    n.label = label;
    Var v = push(n, 1);
    compute(nodes_.size() - 1);
    return v;
}

void Tape::compute(std::size_t i) {
    Node& n = nodes_[i];
    double* out = values_.data() + n.off;
    switch (n.op) {
        case Op::kConst:
        case Op::kParam:
            break;
        case Op::kAffine: {
            const double* w = data(n.a);
            const double* b = data(n.b);
            const double* x = data(n.c);
            for (int r = 0; r < n.rows; ++r) {
                double acc = b[r];
                const double* row = w + static_cast<std::size_t>(r) * static_cast<std::size_t>(n.cols);
                for (int c = 0; c < n.cols; ++c) acc += row[c] * x[c];
                out[r] = acc;
            }
            break;
        }
        case Op::kMatVec: {
            const double* w = data(n.a);
            const double* x = data(n.b);
            for (int r = 0; r < n.rows; ++r) {
                double acc = 0.0;
                const double* row = w + static_cast<std::size_t>(r) * static_cast<std::size_t>(n.cols);
                for (int c = 0; c < n.cols; ++c) acc += row[c] * x[c];
                out[r] = acc;
            }
            break;
        }
        case Op::kRelu: {
            const double* x = data(n.a);
            for (int k = 0; k < n.len; ++k) out[k] = x[k] > 0.0 ? x[k] : 0.0;
            break;
        }
        case Op::kTanh: {
            const double* x = data(n.a);
            for (int k = 0; k < n.len; ++k) out[k] = std::tanh(x[k]);
            break;
        }
        case Op::kScale: {
            const double* x = data(n.a);
            for (int k = 0; k < n.len; ++k) out[k] = n.k * x[k];
            break;
        }
        case Op::kAxpy: {
            const double* x = data(n.a);
            const double* y = data(n.b);
            for (int k = 0; k < n.len; ++k) out[k] = n.k * x[k] + y[k];
            break;
        }
        case Op::kAdd: {
            std::fill(out, out + n.len, 0.0);
            for (int j = 0; j < n.many_n; ++j) {
                const double* x = data(many_pool_[static_cast<std::size_t>(n.many + j)]);
                for (int k = 0; k < n.len; ++k) out[k] += x[k];
            }
            break;
        }
        case Op::kMean: {
            std::fill(out, out + n.len, 0.0);
            for (int j = 0; j < n.many_n; ++j) {
                const double* x = data(many_pool_[static_cast<std::size_t>(n.many + j)]);
                for (int k = 0; k < n.len; ++k) out[k] += x[k];
            }
            const double inv = 1.0 / n.many_n;
            for (int k = 0; k < n.len; ++k) out[k] *= inv;
            break;
        }
        case Op::kSqNorm: {
            const double* x = data(n.a);
            const int len = nodes_[static_cast<std::size_t>(n.a)].len;
            double acc = 0.0;
            for (int k = 0; k < len; ++k) acc += x[k] * x[k];
            out[0] = acc;
            break;
        }
        case Op::kSoftmaxCE: {
            const double* x = data(n.a);
            const int len = nodes_[static_cast<std::size_t>(n.a)].len;
            double m = x[0];
            for (int k = 1; k < len; ++k) m = std::max(m, x[k]);
            double z = 0.0;
            for (int k = 0; k < len; ++k) z += std::exp(x[k] - m);
            const double p = std::exp(x[n.label] - m) / z;
            out[0] = -std::log(std::max(p, kProbClamp));
            break;
        }
    }
}

std::span<const double> Tape::value(Var v) const {
    const Node& n = nodes_[static_cast<std::size_t>(v)];
    return {values_.data() + n.off, static_cast<std::size_t>(n.len)};
}

bool Tape::finite(Var v) const {
    for (double x : value(v))
        if (!std::isfinite(x)) return false;
    return true;
}

void Tape::backward(Var loss) {
    const Node& ln = nodes_[static_cast<std::size_t>(loss)];
    if (ln.len != 1) throw std::invalid_argument("Tape::backward: loss must be scalar");
    adjoints_.assign(values_.size(), 0.0);
    backward_done_ = true;
    adjoints_[ln.off] = 1.0;
    for (std::size_t i = static_cast<std::size_t>(loss) + 1; i-- > 0;) {
        Node& n = nodes_[i];
        const double* dy = adjoints_.data() + n.off;
        switch (n.op) {
            case Op::kConst:
            case Op::kParam:
                break;
            case Op::kAffine: {
                double* dw = adj(n.a);
                double* db = adj(n.b);
                double* dx = adj(n.c);
                const double* w = data(n.a);
                const double* x = data(n.c);
                for (int r = 0; r < n.rows; ++r) {
                    const double g = dy[r];
                    if (g == 0.0) continue;
                    double* dwrow = dw + static_cast<std::size_t>(r) * static_cast<std::size_t>(n.cols);
                    const double* wrow = w + static_cast<std::size_t>(r) * static_cast<std::size_t>(n.cols);
                    for (int c = 0; c < n.cols; ++c) {
                        dwrow[c] += g * x[c];
                        dx[c] += wrow[c] * g;
                    }
                    db[r] += g;
                }
                break;
            }
            case Op::kMatVec: {
                double* dw = adj(n.a);
                double* dx = adj(n.b);
                const double* w = data(n.a);
                const double* x = data(n.b);
                for (int r = 0; r < n.rows; ++r) {
                    const double g = dy[r];
                    if (g == 0.0) continue;
                    double* dwrow = dw + static_cast<std::size_t>(r) * static_cast<std::size_t>(n.cols);
                    const double* wrow = w + static_cast<std::size_t>(r) * static_cast<std::size_t>(n.cols);
                    for (int c = 0; c < n.cols; ++c) {
                        dwrow[c] += g * x[c];
                        dx[c] += wrow[c] * g;
                    }
                }
                break;
            }
            case Op::kRelu: {
                double* dx = adj(n.a);
                const double* x = data(n.a);
                for (int k = 0; k < n.len; ++k)
                    if (x[k] > 0.0) dx[k] += dy[k];
                break;
            }
            case Op::kTanh: {
                double* dx = adj(n.a);
                const double* y = values_.data() + n.off;
                for (int k = 0; k < n.len; ++k) dx[k] += dy[k] * (1.0 - y[k] * y[k]);
                break;
            }
            case Op::kScale: {
                double* dx = adj(n.a);
                for (int k = 0; k < n.len; ++k) dx[k] += n.k * dy[k];
                break;
            }
            case Op::kAxpy: {
                double* dx = adj(n.a);
                double* dz = adj(n.b);
                for (int k = 0; k < n.len; ++k) {
                    dx[k] += n.k * dy[k];
                    dz[k] += dy[k];
                }
                break;
            }
            case Op::kAdd: {
                for (int j = 0; j < n.many_n; ++j) {
                    double* dx = adj(many_pool_[static_cast<std::size_t>(n.many + j)]);
                    for (int k = 0; k < n.len; ++k) dx[k] += dy[k];
                }
                break;
            }
            case Op::kMean: {
                const double inv = 1.0 / n.many_n;
                for (int j = 0; j < n.many_n; ++j) {
                    double* dx = adj(many_pool_[static_cast<std::size_t>(n.many + j)]);
                    for (int k = 0; k < n.len; ++k) dx[k] += inv * dy[k];
                }
                break;
            }
            case Op::kSqNorm: {
                double* dx = adj(n.a);
                const double* x = data(n.a);
                const int len = nodes_[static_cast<std::size_t>(n.a)].len;
                const double g = dy[0];
                for (int k = 0; k < len; ++k) dx[k] += 2.0 * x[k] * g;
                break;
            }
            case Op::kSoftmaxCE: {
                double* dx = adj(n.a);
                const double* x = data(n.a);
                const int len = nodes_[static_cast<std::size_t>(n.a)].len;
                double m = x[0];
                for (int k = 1; k < len; ++k) m = std::max(m, x[k]);
                double z = 0.0;
                for (int k = 0; k < len; ++k) z += std::exp(x[k] - m);
                const double p_label = std::exp(x[n.label] - m) / z;
                if (p_label < kProbClamp) break;  // clamped branch is constant
                const double g = dy[0];
                for (int k = 0; k < len; ++k) {
                    const double p = std::exp(x[k] - m) / z;
                    dx[k] += g * (p - (k == n.label ? 1.0 : 0.0));
                }
                break;
            }
        }
    }
}

std::span<const double> Tape::adjoint(Var v) const {
    if (!backward_done_) throw std::logic_error("Tape::adjoint: backward not run");
    const Node& n = nodes_[static_cast<std::size_t>(v)];
    return {adjoints_.data() + n.off, static_cast<std::size_t>(n.len)};
}

void Tape::accumulate_param_grads(std::vector<Tensor>& grads) const {
    if (!backward_done_) throw std::logic_error("Tape::accumulate_param_grads: backward not run");
    for (const Node& n : nodes_) {
        if (n.op != Op::kParam) continue;
        if (n.slot < 0 || static_cast<std::size_t>(n.slot) >= grads.size())
            throw std::out_of_range("Tape::accumulate_param_grads: slot out of range");
        Tensor& g = grads[static_cast<std::size_t>(n.slot)];
        if (static_cast<int>(g.size()) != n.len)
            throw std::invalid_argument("Tape::accumulate_param_grads: shape mismatch");
        const double* a = adjoints_.data() + n.off;
        for (int k = 0; k < n.len; ++k) g.v[static_cast<std::size_t>(k)] += a[k];
    }
}

double Tape::replay(Var loss) {
    for (std::size_t i = 0; i <= static_cast<std::size_t>(loss); ++i) compute(i);
    return values_[nodes_[static_cast<std::size_t>(loss)].off];
}

void Tape::clear() {
    nodes_.clear();
    values_.clear();
    adjoints_.clear();
    many_pool_.clear();
    backward_done_ = false;
}

}  // namespace lordsig::nn
