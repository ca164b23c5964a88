#ifndef LORDSIG_NN_HPP
#define LORDSIG_NN_HPP

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lordsig/tape.hpp"

namespace lordsig::nn {

// MLP producing a matrix-valued vector field. The layer chain is
// in -> hidden -> ... -> hidden -> out_rows*out_cols with relu after hidden
// layers 1..layers-1, tanh after layer `layers`, and no activation after the
// final affine layer. The flat output reshapes row-major to
// out_rows x out_cols.
struct VectorFieldNet {
    int in = 0;
    int hidden = 0;
    int layers = 0;  // hidden layer count, >= 1
    int out_rows = 0;
    int out_cols = 0;
    std::vector<Tensor> weights;  // layers + 1 blocks
    std::vector<Tensor> biases;

    int out_dim() const { return out_rows * out_cols; }
};

struct AffineMap {
    Tensor weight;  // out x in
    Tensor bias;    // out
};

// Plain feedforward map with relu between hidden layers and a linear output;
// zero hidden layers degenerate to a single affine map.
struct Mlp {
    int in = 0;
    int hidden = 0;
    int layers = 0;  // hidden layer count, >= 0
    int out = 0;
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;
};

// Weights uniform in +-sqrt(1/fan_in), biases zero; bit-reproducible for a
// given seed independent of the standard library's distributions.
VectorFieldNet vf_init(int in, int hidden, int layers, int out_rows, int out_cols,
                       std::uint64_t seed);
AffineMap affine_init(int in, int out, std::uint64_t seed);
Mlp mlp_init(int in, int hidden, int layers, int out, std::uint64_t seed);

// Sum of squared entries over the listed blocks, nothing excluded.
double l2_penalty(std::span<const Tensor* const> blocks);

// Parameter blocks of a model in declaration order; the slot index is what
// ties tape leaves, gradient buffers and optimizer state together.
class ParamRegistry {
public:
    int add(Tensor* block, std::string name);
    void add_net(VectorFieldNet& net, const std::string& prefix);
    void add_affine(AffineMap& map, const std::string& prefix);

    void add_mlp(Mlp& mlp, const std::string& prefix);

    int slot_of(const Tensor* block) const;
    bool contains(const Tensor* block) const { return index_.count(block) != 0; }
    std::size_t size() const { return blocks_.size(); }
    Tensor& block(int slot) { return *blocks_[static_cast<std::size_t>(slot)]; }
    const Tensor& block(int slot) const { return *blocks_[static_cast<std::size_t>(slot)]; }
    const std::string& name(int slot) const { return names_[static_cast<std::size_t>(slot)]; }

    std::vector<Tensor> zero_grads() const;
    std::int64_t total_parameters() const;

private:
    std::vector<Tensor*> blocks_;
    std::vector<std::string> names_;
    std::unordered_map<const Tensor*, int> index_;
};

// Per-tape cache of parameter leaves so each block is recorded once per tape.
// Without a registry, blocks are recorded as constants (no gradients).
class TapeBinder {
public:
    TapeBinder(Tape& tape, const ParamRegistry& registry)
        : tape_(tape), registry_(&registry), cache_(registry.size(), -1) {}
    explicit TapeBinder(Tape& tape) : tape_(tape), registry_(nullptr) {}

    Var var(const Tensor* block);
    Tape& tape() { return tape_; }

private:
    Tape& tape_;
    const ParamRegistry* registry_;
    std::vector<Var> cache_;
    std::unordered_map<const Tensor*, Var> const_cache_;
};

// Flat (out_rows*out_cols) output of the field MLP on the tape.
Var vf_forward_taped(TapeBinder& binder, const VectorFieldNet& net, Var x);
Var affine_taped(TapeBinder& binder, const AffineMap& map, Var x);
Var mlp_taped(TapeBinder& binder, const Mlp& mlp, Var x);
Var l2_taped(TapeBinder& binder, std::span<const Tensor* const> blocks);

// Convenience evaluation, reshaped to out_rows x out_cols. Runs through a
// scratch tape so it cannot drift from the trained path.
Tensor vf_forward(const VectorFieldNet& net, std::span<const double> x);

// Reverse-mode gradients of the recorded scalar loss for every slot, in
// registry order. Throws on a non-finite loss.
std::vector<Tensor> grad(Tape& tape, Var loss, const ParamRegistry& registry);

// Adam with bias correction; state is kept per slot.
class AdamOptimizer {
public:
    AdamOptimizer(double lr, std::size_t slots)
        : lr_(lr), m_(slots), v_(slots) {}

    // Applies one step to the blocks named by `subset` using grads aligned
    // with the registry.
    void step(ParamRegistry& registry, const std::vector<Tensor>& grads,
              std::span<const int> subset);

private:
    double lr_;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    std::int64_t t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace lordsig::nn

#endif
