#include "lordsig/tensor_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace lordsig::tensoralg {

namespace {

void check_dims(int d, int D) {
    if (d < 1 || D < 1)
        throw std::invalid_argument("tensoralg: channels and depth must be >= 1");
}

std::size_t level_size(int d, int k) {
    std::size_t n = 1;
    for (int i = 0; i < k; ++i) n *= static_cast<std::size_t>(d);
    return n;
}

// Index of the word (letters[0..k)) inside its level, letters 1-based.
std::size_t word_index(std::span<const int> letters, int d) {
    std::size_t idx = 0;
    for (int c : letters) idx = idx * static_cast<std::size_t>(d) + static_cast<std::size_t>(c - 1);
    return idx;
}

bool lex_less(const std::vector<int>& a, const std::vector<int>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

int mobius(int n) {
    int mu = 1;
    for (int p = 2; p * p <= n; ++p) {
        if (n % p == 0) {
            n /= p;
            if (n % p == 0) return 0;
            mu = -mu;
        }
    }
    if (n > 1) mu = -mu;
    return mu;
}

// All Lyndon words of length <= D over {1..d} via Duval's algorithm,
// bucketed by length (each bucket comes out lexicographically sorted).
std::vector<std::vector<std::vector<int>>> duval_words(int d, int D) {
    std::vector<std::vector<std::vector<int>>> by_length(static_cast<std::size_t>(D) + 1);
    std::vector<int> w{1};
    while (!w.empty()) {
        if (static_cast<int>(w.size()) <= D)
            by_length[w.size()].push_back(w);
        std::vector<int> t;
        t.reserve(static_cast<std::size_t>(D));
        for (int i = 0; i < D; ++i) t.push_back(w[static_cast<std::size_t>(i) % w.size()]);
        while (!t.empty() && t.back() == d) t.pop_back();
        if (!t.empty()) t.back() += 1;
        w = std::move(t);
    }
    return by_length;
}

}  // namespace

TruncatedTensor TruncatedTensor::zero(int d, int D) {
    check_dims(d, D);
    TruncatedTensor t;
    t.channels = d;
    t.depth = D;
    t.levels.resize(static_cast<std::size_t>(D));
    for (int k = 1; k <= D; ++k) t.levels[static_cast<std::size_t>(k) - 1].assign(level_size(d, k), 0.0);
    return t;
}

TruncatedTensor TruncatedTensor::identity(int d, int D) {
    TruncatedTensor t = zero(d, D);
    t.scalar = 1.0;
    return t;
}

std::int64_t logsig_dim(int d, int D) {
    check_dims(d, D);
    std::int64_t total = 0;
    for (int n = 1; n <= D; ++n) {
        std::int64_t acc = 0;
        for (int k = 1; k <= n; ++k) {
            if (n % k != 0) continue;
            std::int64_t p = 1;
            for (int i = 0; i < n / k; ++i) p *= d;
            acc += mobius(k) * p;
        }
        total += acc / n;
    }
    return total;
}

LyndonBasis::LyndonBasis(int d, int D, std::vector<LyndonWord> words)
    : channels_(d), depth_(D), words_(std::move(words)) {
    level_offsets_.assign(static_cast<std::size_t>(D) + 2, words_.size());
    for (std::size_t i = words_.size(); i-- > 0;)
        level_offsets_[words_[i].letters.size()] = i;
    // offsets for empty lengths fall back to the next populated one
    for (std::size_t k = level_offsets_.size() - 1; k-- > 1;)
        if (level_offsets_[k] > level_offsets_[k + 1]) level_offsets_[k] = level_offsets_[k + 1];
}

std::pair<std::size_t, std::size_t> LyndonBasis::level_range(int length) const {
    if (length < 1 || length > depth_) return {words_.size(), words_.size()};
    return {level_offsets_[static_cast<std::size_t>(length)],
            level_offsets_[static_cast<std::size_t>(length) + 1]};
}

LyndonBasis lyndon_basis(int d, int D) {
    check_dims(d, D);
    auto by_length = duval_words(d, D);

    // Bracket expansions via the standard factorization w = uv, v the
    // lexicographically smallest proper suffix. u and v are shorter Lyndon
    // words, so their expansions are already available.
    std::map<std::vector<int>, std::vector<double>> expansions;
    std::vector<LyndonWord> words;
    for (int len = 1; len <= D; ++len) {
        for (const auto& w : by_length[static_cast<std::size_t>(len)]) {
            std::vector<double> exp;
            if (len == 1) {
                exp.assign(level_size(d, 1), 0.0);
                exp[static_cast<std::size_t>(w[0] - 1)] = 1.0;
            } else {
                std::size_t split = 1;
                std::vector<int> best(w.begin() + 1, w.end());
                for (std::size_t s = 2; s < w.size(); ++s) {
                    std::vector<int> suf(w.begin() + static_cast<std::ptrdiff_t>(s), w.end());
                    if (lex_less(suf, best)) {
                        best = std::move(suf);
                        split = s;
                    }
                }
                std::vector<int> u(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(split));
                std::vector<int> v(w.begin() + static_cast<std::ptrdiff_t>(split), w.end());
                const auto& ue = expansions.at(u);
                const auto& ve = expansions.at(v);
                const std::size_t vn = ve.size();
                exp.assign(level_size(d, len), 0.0);
                for (std::size_t i = 0; i < ue.size(); ++i) {
                    if (ue[i] == 0.0) continue;
                    for (std::size_t j = 0; j < vn; ++j)
                        exp[i * vn + j] += ue[i] * ve[j];
                }
                const std::size_t un = ue.size();
                for (std::size_t j = 0; j < vn; ++j) {
                    if (ve[j] == 0.0) continue;
                    for (std::size_t i = 0; i < un; ++i)
                        exp[j * un + i] -= ve[j] * ue[i];
                }
            }
            expansions.emplace(w, exp);
            words.push_back(LyndonWord{w, std::move(exp)});
        }
    }

    // Triangularity under (length, lex): the expansion of w has coefficient 1
    // at w itself and vanishes at every lexicographically smaller Lyndon word
    // of the same length. A violation would be a construction bug.
    for (int len = 1; len <= D; ++len) {
        for (const auto& w : words) {
            if (static_cast<int>(w.letters.size()) != len) continue;
            if (w.expansion[word_index(w.letters, d)] != 1.0)
                throw std::logic_error("lyndon_basis: diagonal coefficient != 1");
            for (const auto& v : words) {
                if (v.letters.size() != w.letters.size()) continue;
                if (!lex_less(v.letters, w.letters)) continue;
                if (w.expansion[word_index(v.letters, d)] != 0.0)
                    throw std::logic_error("lyndon_basis: expansion not triangular");
            }
        }
    }

    LyndonBasis basis(d, D, std::move(words));
    if (static_cast<std::int64_t>(basis.size()) != logsig_dim(d, D))
        throw std::logic_error("lyndon_basis: word count disagrees with Witt formula");
    return basis;
}

TruncatedTensor tensor_mul(const TruncatedTensor& a, const TruncatedTensor& b) {
    if (a.channels != b.channels || a.depth != b.depth)
        throw std::invalid_argument("tensor_mul: mismatched channels or depth");
    const int d = a.channels;
    const int D = a.depth;
    TruncatedTensor c = TruncatedTensor::zero(d, D);
    c.scalar = a.scalar * b.scalar;
    for (int k = 1; k <= D; ++k) {
        auto& out = c.levels[static_cast<std::size_t>(k) - 1];
        if (a.scalar != 0.0) {
            const auto& bk = b.levels[static_cast<std::size_t>(k) - 1];
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += a.scalar * bk[i];
        }
        if (b.scalar != 0.0) {
            const auto& ak = a.levels[static_cast<std::size_t>(k) - 1];
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += ak[i] * b.scalar;
        }
        for (int j = 1; j < k; ++j) {
            const auto& aj = a.levels[static_cast<std::size_t>(j) - 1];
            const auto& bk = b.levels[static_cast<std::size_t>(k - j) - 1];
            std::size_t idx = 0;
            for (double av : aj) {
                if (av == 0.0) {
                    idx += bk.size();
                    continue;
                }
                for (double bv : bk) out[idx++] += av * bv;
            }
        }
    }
    return c;
}

TruncatedTensor tensor_exp(const TruncatedTensor& x) {
    if (x.scalar != 0.0)
        throw std::invalid_argument("tensor_exp: scalar term must be 0");
    TruncatedTensor result = TruncatedTensor::identity(x.channels, x.depth);
    TruncatedTensor power = x;
    double factorial = 1.0;
    for (int k = 1; k <= x.depth; ++k) {
        factorial *= k;
        for (std::size_t lv = 0; lv < result.levels.size(); ++lv)
            for (std::size_t i = 0; i < result.levels[lv].size(); ++i)
                result.levels[lv][i] += power.levels[lv][i] / factorial;
        if (k < x.depth) power = tensor_mul(power, x);
    }
    return result;
}

TruncatedTensor tensor_log(const TruncatedTensor& x) {
    if (x.scalar != 1.0)
        throw std::invalid_argument("tensor_log: scalar term must be 1");
    TruncatedTensor y = x;
    y.scalar = 0.0;
    TruncatedTensor result = TruncatedTensor::zero(x.channels, x.depth);
    TruncatedTensor power = y;
    double sign = 1.0;
    for (int k = 1; k <= x.depth; ++k) {
        for (std::size_t lv = 0; lv < result.levels.size(); ++lv)
            for (std::size_t i = 0; i < result.levels[lv].size(); ++i)
                result.levels[lv][i] += sign * power.levels[lv][i] / k;
        if (k < x.depth) power = tensor_mul(power, y);
        sign = -sign;
    }
    return result;
}

TruncatedTensor segment_signature(std::span<const double> dx, int D) {
    const int d = static_cast<int>(dx.size());
    check_dims(d, D);
    TruncatedTensor s = TruncatedTensor::identity(d, D);
    auto& first = s.levels[0];
    for (int i = 0; i < d; ++i) first[static_cast<std::size_t>(i)] = dx[static_cast<std::size_t>(i)];
    for (int k = 2; k <= D; ++k) {
        const auto& prev = s.levels[static_cast<std::size_t>(k) - 2];
        auto& cur = s.levels[static_cast<std::size_t>(k) - 1];
        std::size_t idx = 0;
        for (double pv : prev)
            for (int i = 0; i < d; ++i)
                cur[idx++] = pv * dx[static_cast<std::size_t>(i)] / k;
    }
    return s;
}

TruncatedTensor path_signature(std::span<const double> points, int d, int D) {
    check_dims(d, D);
    if (points.size() % static_cast<std::size_t>(d) != 0)
        throw std::invalid_argument("path_signature: point buffer not a multiple of d");
    const std::size_t n = points.size() / static_cast<std::size_t>(d);
    if (n < 2)
        throw std::invalid_argument("path_signature: need at least 2 points");
    std::vector<double> dx(static_cast<std::size_t>(d));
    TruncatedTensor sig;
    for (std::size_t i = 1; i < n; ++i) {
        for (int j = 0; j < d; ++j)
            dx[static_cast<std::size_t>(j)] =
                points[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)] -
                points[(i - 1) * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)];
        TruncatedTensor seg = segment_signature(dx, D);
        sig = (i == 1) ? std::move(seg) : tensor_mul(sig, seg);
    }
    return sig;
}

LogSignature logsig_from_tensor(const TruncatedTensor& log_tensor, const LyndonBasis& basis) {
    if (log_tensor.channels != basis.channels() || log_tensor.depth != basis.depth())
        throw std::invalid_argument("logsig_from_tensor: tensor does not match basis");
    const int d = basis.channels();
    LogSignature out;
    out.channels = d;
    out.depth = basis.depth();
    out.coeffs.assign(basis.size(), 0.0);
    for (int len = 1; len <= basis.depth(); ++len) {
        auto [first, last] = basis.level_range(len);
        if (first == last) continue;
        // Forward elimination against the unit-triangular expansion matrix:
        // reading words in increasing lex order, the residual at word w is
        // exactly its coefficient.
        std::vector<double> residual = log_tensor.levels[static_cast<std::size_t>(len) - 1];
        for (std::size_t wi = first; wi < last; ++wi) {
            const auto& w = basis.words()[wi];
            const double c = residual[word_index(w.letters, d)];
            out.coeffs[wi] = c;
            if (c != 0.0)
                for (std::size_t i = 0; i < residual.size(); ++i)
                    residual[i] -= c * w.expansion[i];
        }
    }
    return out;
}

LogSignature path_logsignature(std::span<const double> points, const LyndonBasis& basis) {
    TruncatedTensor sig = path_signature(points, basis.channels(), basis.depth());
    return logsig_from_tensor(tensor_log(sig), basis);
}

}  // namespace lordsig::tensoralg
