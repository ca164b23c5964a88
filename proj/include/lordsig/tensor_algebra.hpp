#ifndef LORDSIG_TENSOR_ALGEBRA_HPP
#define LORDSIG_TENSOR_ALGEBRA_HPP

#include <cstdint>
#include <span>
#include <vector>

namespace lordsig::tensoralg {

// Element of the tensor algebra over R^d, truncated at depth D.
// levels[k-1] holds the d^k coefficients of level k, indexed by words
// (i_1,...,i_k) over {1..d} with i_1 varying slowest (row-major).
// Group-like elements (signatures) have scalar == 1, Lie elements scalar == 0.
struct TruncatedTensor {
    int channels = 0;
    int depth = 0;
    double scalar = 0.0;
    std::vector<std::vector<double>> levels;

    static TruncatedTensor zero(int d, int D);
    static TruncatedTensor identity(int d, int D);
};

// A Lyndon word over {1..d} together with the dense tensor-space expansion of
// its bracketed Lie element (standard factorization, recursively bracketed).
// The expansion is homogeneous: it lives entirely in level |letters|.
struct LyndonWord {
    std::vector<int> letters;
    std::vector<double> expansion;
};

// All Lyndon words of length <= D over {1..d}, sorted by (length, lex).
// Shareable read-only; building one is the dominant setup cost per (d, D).
class LyndonBasis {
public:
    LyndonBasis(int d, int D, std::vector<LyndonWord> words);

    int channels() const { return channels_; }
    int depth() const { return depth_; }
    const std::vector<LyndonWord>& words() const { return words_; }
    std::size_t size() const { return words_.size(); }

    // [first, last) range of word indices with the given length.
    std::pair<std::size_t, std::size_t> level_range(int length) const;

private:
    int channels_;
    int depth_;
    std::vector<LyndonWord> words_;
    std::vector<std::size_t> level_offsets_;
};

// Log-signature coefficients in the Lyndon-word coordinate frame, ordered as
// the basis words are.
struct LogSignature {
    int channels = 0;
    int depth = 0;
    std::vector<double> coeffs;
};

// Number of Lyndon words of length <= D over d letters (Witt formula).
std::int64_t logsig_dim(int d, int D);

LyndonBasis lyndon_basis(int d, int D);

// Truncated tensor product: level k of the result is sum_j a_j (x) b_{k-j}.
TruncatedTensor tensor_mul(const TruncatedTensor& a, const TruncatedTensor& b);

// Truncated exp/log power series. exp requires scalar 0, log requires
// scalar 1; they invert each other within the truncation.
TruncatedTensor tensor_exp(const TruncatedTensor& x);
TruncatedTensor tensor_log(const TruncatedTensor& x);

// Signature of the straight segment with increment dx: exp of the level-1
// element, computed in closed form.
TruncatedTensor segment_signature(std::span<const double> dx, int D);

// Signature of the piecewise-linear path through the given points
// (row-major n x d, n >= 2), as the Chen product of segment signatures.
TruncatedTensor path_signature(std::span<const double> points, int d, int D);

// tensor_log of the path signature, projected onto Lyndon coordinates via
// the triangular structure of the bracket expansions.
LogSignature path_logsignature(std::span<const double> points, const LyndonBasis& basis);

// Projection of an arbitrary Lie element (log tensor) onto the basis.
LogSignature logsig_from_tensor(const TruncatedTensor& log_tensor, const LyndonBasis& basis);

}  // namespace lordsig::tensoralg

#endif
