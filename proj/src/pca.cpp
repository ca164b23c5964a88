#include "lordsig/pca.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lordsig::eval {

void eigen_symmetric(std::vector<std::vector<double>> a, std::vector<double>& eigenvalues,
                     std::vector<std::vector<double>>& vectors) {
    const std::size_t n = a.size();
    vectors.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) vectors[i][i] = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-26) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a[p][q] == 0.0) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = vectors[p][k], vkq = vectors[q][k];
                    vectors[p][k] = c * vkp - s * vkq;
                    vectors[q][k] = s * vkp + c * vkq;
                }
            }
        }
    }

    eigenvalues.resize(n);
    for (std::size_t i = 0; i < n; ++i) eigenvalues[i] = a[i][i];
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return eigenvalues[x] > eigenvalues[y]; });
    std::vector<double> sorted_vals(n);
    std::vector<std::vector<double>> sorted_vecs(n);
    for (std::size_t i = 0; i < n; ++i) {
        sorted_vals[i] = eigenvalues[order[i]];
        sorted_vecs[i] = vectors[order[i]];
    }
    eigenvalues = std::move(sorted_vals);
    vectors = std::move(sorted_vecs);
}

PcaExport pca_export(const std::vector<std::vector<double>>& points,
                     const std::vector<std::string>& sources) {
    if (points.size() < 3) throw std::invalid_argument("pca_export: need at least 3 points");
    if (points.size() != sources.size())
        throw std::invalid_argument("pca_export: one source tag per point required");
    const std::size_t dim = points.front().size();
    for (const auto& p : points)
        if (p.size() != dim) throw std::invalid_argument("pca_export: points must share one dimension");

    std::vector<double> mean(dim, 0.0);
    for (const auto& p : points)
        for (std::size_t j = 0; j < dim; ++j) mean[j] += p[j];
    for (auto& m : mean) m /= static_cast<double>(points.size());

    std::vector<std::vector<double>> cov(dim, std::vector<double>(dim, 0.0));
    for (const auto& p : points)
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j)
                cov[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]);
    const double denom = static_cast<double>(points.size()) - 1.0;
    for (auto& row : cov)
        for (auto& x : row) x /= denom;

    std::vector<double> eigenvalues;
    std::vector<std::vector<double>> vectors;
    eigen_symmetric(cov, eigenvalues, vectors);

    double total = 0.0;
    for (double v : eigenvalues) total += std::max(v, 0.0);
    if (total <= 0.0) throw std::invalid_argument("pca_export: rank-0 covariance");

    PcaExport out;
    for (std::size_t k = 0; k < 2 && k < dim; ++k) {
        auto dir = vectors[k];
        std::size_t arg = 0;
        for (std::size_t j = 1; j < dim; ++j)
            if (std::abs(dir[j]) > std::abs(dir[arg])) arg = j;
        if (dir[arg] < 0.0)
            for (auto& x : dir) x = -x;
        out.directions.push_back(std::move(dir));
        out.explained_ratio.push_back(std::max(eigenvalues[k], 0.0) / total);
    }
    while (out.directions.size() < 2) {  // dim == 1 degenerates to a zero second axis
        out.directions.emplace_back(dim, 0.0);
        out.explained_ratio.push_back(0.0);
    }

    out.sources = sources;
    out.projected.reserve(points.size());
    for (const auto& p : points) {
        std::array<double, 2> proj{0.0, 0.0};
        for (std::size_t k = 0; k < 2; ++k)
            for (std::size_t j = 0; j < dim; ++j) proj[k] += (p[j] - mean[j]) * out.directions[k][j];
        out.projected.push_back(proj);
    }
    return out;
}

}  // namespace lordsig::eval
