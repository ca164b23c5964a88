#ifndef LORDSIG_TAPE_HPP
#define LORDSIG_TAPE_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace lordsig::nn {

// A parameter block or activation buffer: rows x cols, row-major. Vectors
// are rows x 1.
struct Tensor {
    int rows = 0;
    int cols = 1;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}
    std::size_t size() const { return v.size(); }
};

using Var = int;

// Reverse-mode tape over the fixed primitive set the models are built from:
// affine, matrix-vector product (with row-major reshape), relu, tanh,
// elementwise add/scale, squared norm, softmax cross-entropy and mean.
// Parameter leaves are registered against an integer slot so gradients can
// be harvested per parameter block. Tapes are single-threaded; use one per
// sample and combine gradients outside.
class Tape {
public:
    Var constant(std::span<const double> value);
    Var scalar_constant(double value);

    // Leaf bound to parameter slot `slot`; the value is copied at record time
    // so later optimizer updates do not disturb replay.
    Var param(int slot, const Tensor& t);

    // y = reshape(W, rows x cols) * x + b, with W flat of length rows*cols.
    Var affine(Var w, Var b, Var x, int rows, int cols);
    // y = reshape(flat, rows x cols) * x
    Var matvec(Var flat, Var x, int rows, int cols);
    Var relu(Var x);
    Var tanh(Var x);
    Var scale(double k, Var x);
    // k*x + y
    Var axpy(double k, Var x, Var y);
    Var add(std::span<const Var> xs);
    Var sq_norm(Var x);
    // Elementwise mean of same-length inputs.
    Var mean(std::span<const Var> xs);
    // -log(max(softmax(logits)[label], 1e-12))
    Var softmax_cross_entropy(Var logits, int label);

    std::span<const double> value(Var v) const;
    double scalar(Var v) const { return value(v)[0]; }
    bool finite(Var v) const;

    // Reverse accumulation from a scalar loss. May be called once per tape.
    void backward(Var loss);
    std::span<const double> adjoint(Var v) const;

    // Adds the adjoint of every param leaf into grads[slot] (shapes must
    // already match the registered blocks).
    void accumulate_param_grads(std::vector<Tensor>& grads) const;

    // Recomputes the whole forward pass from the recorded leaves; the result
    // reproduces the recorded value bit for bit.
    double replay(Var loss);

    void clear();
    std::size_t node_count() const { return nodes_.size(); }

private:
    enum class Op : unsigned char {
        kConst, kParam, kAffine, kMatVec, kRelu, kTanh, kScale, kAxpy, kAdd,
        kSqNorm, kMean, kSoftmaxCE,
    };
    struct Node {
        Op op;
        Var a = -1, b = -1, c = -1;
        int rows = 0, cols = 0;
        double k = 0.0;
        int label = -1;
        int many = -1, many_n = 0;
        int slot = -1;
        std::size_t off = 0;
        int len = 0;
    };

    Var push(Node n, int len);
    void compute(std::size_t i);
    double* data(Var v) { return values_.data() + nodes_[static_cast<std::size_t>(v)].off; }
    const double* data(Var v) const { return values_.data() + nodes_[static_cast<std::size_t>(v)].off; }
    double* adj(Var v) { return adjoints_.data() + nodes_[static_cast<std::size_t>(v)].off; }

    std::vector<Node> nodes_;
    std::vector<double> values_;
    std::vector<double> adjoints_;
    std::vector<Var> many_pool_;
    bool backward_done_ = false;
};

}  // namespace lordsig::nn

#endif
