#include "lordsig/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace lordsig::nn {

namespace {

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

Tensor uniform_block(int rows, int cols, std::mt19937_64& rng) {
    Tensor t(rows, cols);
    const double bound = std::sqrt(1.0 / cols);  // fan_in = cols
    for (auto& w : t.v) w = (2.0 * uniform01(rng) - 1.0) * bound;
    return t;
}

}  // namespace

VectorFieldNet vf_init(int in, int hidden, int layers, int out_rows, int out_cols,
                       std::uint64_t seed) {
    if (in < 1 || hidden < 1 || layers < 1 || out_rows < 1 || out_cols < 1)
        throw std::invalid_argument("vf_init: invalid shape");
    std::mt19937_64 rng(seed);
    VectorFieldNet net;
    net.in = in;
    net.hidden = hidden;
    net.layers = layers;
    net.out_rows = out_rows;
    net.out_cols = out_cols;
    int prev = in;
    for (int l = 0; l < layers; ++l) {
        net.weights.push_back(uniform_block(hidden, prev, rng));
        net.biases.emplace_back(hidden, 1);
        prev = hidden;
    }
    net.weights.push_back(uniform_block(out_rows * out_cols, prev, rng));
    net.biases.emplace_back(out_rows * out_cols, 1);
    return net;
}

AffineMap affine_init(int in, int out, std::uint64_t seed) {
    if (in < 1 || out < 1) throw std::invalid_argument("affine_init: invalid shape");
    std::mt19937_64 rng(seed);
    AffineMap map;
    map.weight = uniform_block(out, in, rng);
    map.bias = Tensor(out, 1);
    return map;
}

Mlp mlp_init(int in, int hidden, int layers, int out, std::uint64_t seed) {
    if (in < 1 || out < 1 || layers < 0 || (layers > 0 && hidden < 1))
        throw std::invalid_argument("mlp_init: invalid shape");
    std::mt19937_64 rng(seed);
    Mlp mlp;
    mlp.in = in;
    mlp.hidden = hidden;
    mlp.layers = layers;
    mlp.out = out;
    int prev = in;
    for (int l = 0; l < layers; ++l) {
        mlp.weights.push_back(uniform_block(hidden, prev, rng));
        mlp.biases.emplace_back(hidden, 1);
        prev = hidden;
    }
    mlp.weights.push_back(uniform_block(out, prev, rng));
    mlp.biases.emplace_back(out, 1);
    return mlp;
}

double l2_penalty(std::span<const Tensor* const> blocks) {
    double acc = 0.0;
    for (const Tensor* t : blocks)
        for (double x : t->v) acc += x * x;
    return acc;
}

int ParamRegistry::add(Tensor* block, std::string name) {
    const int slot = static_cast<int>(blocks_.size());
    blocks_.push_back(block);
    names_.push_back(std::move(name));
    index_.emplace(block, slot);
    return slot;
}

void ParamRegistry::add_net(VectorFieldNet& net, const std::string& prefix) {
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        add(&net.weights[l], prefix + ".w" + std::to_string(l));
        add(&net.biases[l], prefix + ".b" + std::to_string(l));
    }
}

void ParamRegistry::add_affine(AffineMap& map, const std::string& prefix) {
    add(&map.weight, prefix + ".w");
    add(&map.bias, prefix + ".b");
}

void ParamRegistry::add_mlp(Mlp& mlp, const std::string& prefix) {
    for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
        add(&mlp.weights[l], prefix + ".w" + std::to_string(l));
        add(&mlp.biases[l], prefix + ".b" + std::to_string(l));
    }
}

int ParamRegistry::slot_of(const Tensor* block) const {
    auto it = index_.find(block);
    if (it == index_.end()) throw std::out_of_range("ParamRegistry: unknown block");
    return it->second;
}

std::vector<Tensor> ParamRegistry::zero_grads() const {
    std::vector<Tensor> grads;
    grads.reserve(blocks_.size());
    for (const Tensor* t : blocks_) grads.emplace_back(t->rows, t->cols);
    return grads;
}

std::int64_t ParamRegistry::total_parameters() const {
    std::int64_t n = 0;
    for (const Tensor* t : blocks_) n += static_cast<std::int64_t>(t->size());
    return n;
}

Var TapeBinder::var(const Tensor* block) {
    if (registry_ == nullptr) {
        auto it = const_cache_.find(block);
        if (it != const_cache_.end()) return it->second;
        Var v = tape_.constant(block->v);
        const_cache_.emplace(block, v);
        return v;
    }
    const int slot = registry_->slot_of(block);
    Var& cached = cache_[static_cast<std::size_t>(slot)];
    if (cached < 0) cached = tape_.param(slot, *block);
    return cached;
}

Var vf_forward_taped(TapeBinder& binder, const VectorFieldNet& net, Var x) {
    Tape& tape = binder.tape();
    Var h = x;
    int prev = net.in;
    for (int l = 0; l < net.layers; ++l) {
        h = tape.affine(binder.var(&net.weights[static_cast<std::size_t>(l)]),
                        binder.var(&net.biases[static_cast<std::size_t>(l)]), h, net.hidden, prev);
        h = (l + 1 < net.layers) ? tape.relu(h) : tape.tanh(h);
        prev = net.hidden;
    }
    return tape.affine(binder.var(&net.weights.back()), binder.var(&net.biases.back()), h,
                       net.out_dim(), prev);
}

Var affine_taped(TapeBinder& binder, const AffineMap& map, Var x) {
    return binder.tape().affine(binder.var(&map.weight), binder.var(&map.bias), x,
                                map.weight.rows, map.weight.cols);
}

Var mlp_taped(TapeBinder& binder, const Mlp& mlp, Var x) {
    Tape& tape = binder.tape();
    Var h = x;
    int prev = mlp.in;
    for (int l = 0; l < mlp.layers; ++l) {
        h = tape.affine(binder.var(&mlp.weights[static_cast<std::size_t>(l)]),
                        binder.var(&mlp.biases[static_cast<std::size_t>(l)]), h, mlp.hidden, prev);
        h = tape.relu(h);
        prev = mlp.hidden;
    }
    return tape.affine(binder.var(&mlp.weights.back()), binder.var(&mlp.biases.back()), h, mlp.out,
                       prev);
}

Var l2_taped(TapeBinder& binder, std::span<const Tensor* const> blocks) {
    Tape& tape = binder.tape();
    std::vector<Var> terms;
    terms.reserve(blocks.size());
    for (const Tensor* t : blocks) terms.push_back(tape.sq_norm(binder.var(t)));
    return tape.add(terms);
}

Tensor vf_forward(const VectorFieldNet& net, std::span<const double> x) {
    if (static_cast<int>(x.size()) != net.in)
        throw std::invalid_argument("vf_forward: input dimension mismatch");
    Tape tape;
    TapeBinder binder(tape);
    Var out = vf_forward_taped(binder, net, tape.constant(x));
    Tensor result(net.out_rows, net.out_cols);
    auto flat = tape.value(out);
    std::copy(flat.begin(), flat.end(), result.v.begin());
    return result;
}

std::vector<Tensor> grad(Tape& tape, Var loss, const ParamRegistry& registry) {
    if (!tape.finite(loss))
        throw std::runtime_error("grad: non-finite loss (divergence)");
    tape.backward(loss);
    auto grads = registry.zero_grads();
    tape.accumulate_param_grads(grads);
    return grads;
}

void AdamOptimizer::step(ParamRegistry& registry, const std::vector<Tensor>& grads,
                         std::span<const int> subset) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (int slot : subset) {
        Tensor& p = registry.block(slot);
        const Tensor& g = grads[static_cast<std::size_t>(slot)];
        auto& m = m_[static_cast<std::size_t>(slot)];
        auto& v = v_[static_cast<std::size_t>(slot)];
        if (m.empty()) {
            m.assign(p.size(), 0.0);
            v.assign(p.size(), 0.0);
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g.v[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g.v[i] * g.v[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.v[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace lordsig::nn
