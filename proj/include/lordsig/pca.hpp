#ifndef LORDSIG_PCA_HPP
#define LORDSIG_PCA_HPP

#include <array>
#include <string>
#include <vector>

namespace lordsig::eval {

// Top-2 principal directions of a tagged point cloud, fit jointly on every
// point after mean-centering. Sign convention: the largest-magnitude entry
// of each direction is positive.
struct PcaExport {
    std::vector<std::vector<double>> directions;   // 2 rows, orthonormal
    std::vector<double> explained_ratio;           // non-increasing, sums <= 1
    std::vector<std::array<double, 2>> projected;  // one row per point
    std::vector<std::string> sources;              // tag per point
};

// points must share one dimension (zero-pad lower-dimensional families before
// calling); needs >= 3 points and a covariance of rank >= 1.
PcaExport pca_export(const std::vector<std::vector<double>>& points,
                     const std::vector<std::string>& sources);

// Symmetric eigendecomposition by cyclic Jacobi rotations; eigenvalues are
// returned in decreasing order with matching rows in `vectors`.
void eigen_symmetric(std::vector<std::vector<double>> matrix, std::vector<double>& eigenvalues,
                     std::vector<std::vector<double>>& vectors);

}  // namespace lordsig::eval

#endif
