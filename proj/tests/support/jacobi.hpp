#pragma once

// Independent PCA route for cross-checking the library SVD: cyclic Jacobi
// eigendecomposition of the n x n Gram matrix of the row-centred data.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace beacon::testing {

struct SymEigen {
    std::vector<double> values;               // descending
    std::vector<std::vector<double>> vectors; // vectors[j] is the eigenvector for values[j]
};

// a: n x n symmetric, row-major.
inline SymEigen jacobi_eigen(std::vector<double> a, std::size_t n, double tol = 1e-15, int max_sweeps = 100) {
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
    auto A = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };
    auto V = [&](std::size_t i, std::size_t j) -> double& { return v[i * n + j]; };

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0, diag = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            diag += A(i, i) * A(i, i);
            for (std::size_t j = i + 1; j < n; ++j) off += A(i, j) * A(i, j);
        }
        if (off <= tol * tol * std::max(diag, 1e-300)) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (A(p, q) == 0.0) continue;
                const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return A(x, x) > A(y, y); });
    SymEigen out;
    for (std::size_t j : order) {
        out.values.push_back(A(j, j));
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = V(i, j);
        out.vectors.push_back(std::move(col));
    }
    return out;
}

// m: rows x n, row-major. Returns the rows x k projection, column-major
// (pseudo-chunk j occupies entries [j*rows, (j+1)*rows)), with each component
// signed so its largest-magnitude loading is positive.
inline std::vector<double> oracle_pca(const std::vector<double>& m, std::size_t rows, std::size_t n, std::size_t k) {
    std::vector<double> c(m);
    for (std::size_t r = 0; r < rows; ++r) {
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += c[r * n + j];
        mean /= static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) c[r * n + j] -= mean;
    }
    std::vector<double> gram(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < rows; ++r) s += c[r * n + i] * c[r * n + j];
            gram[i * n + j] = gram[j * n + i] = s;
        }
    }
    auto eig = jacobi_eigen(gram, n);
    std::vector<double> out(rows * k, 0.0);
    for (std::size_t comp = 0; comp < k; ++comp) {
        auto& vec = eig.vectors[comp];
        std::size_t arg = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (std::abs(vec[i]) > std::abs(vec[arg])) arg = i;
        }
        if (vec[arg] < 0) {
            for (double& x : vec) x = -x;
        }
        for (std::size_t r = 0; r < rows; ++r) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += c[r * n + j] * vec[j];
            out[comp * rows + r] = s;
        }
    }
    return out;
}

}  // namespace beacon::testing
