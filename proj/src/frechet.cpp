#include "svs/frechet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "svs/error.hpp"

namespace svs::eval {
namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const Matrix> as_matrix(const GaussianStats& s) {
    return Eigen::Map<const Matrix>(s.cov.data(), s.dim(), s.dim());
}

// Eigenvalues below -kNegativeTolerance (relative to the spectrum's scale)
// mean the input was not PSD.
constexpr double kNegativeTolerance = 1e-6;

Eigen::VectorXd clamped_eigenvalues(const Eigen::VectorXd& values, const char* what) {
    const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
    Eigen::VectorXd out = values;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        if (out[i] < -kNegativeTolerance * scale) {
            throw NumericalError(std::string("frechet distance: ") + what + " has a negative eigenvalue " +
                                 std::to_string(out[i]));
        }
        out[i] = std::max(out[i], 0.0);
    }
    return out;
}

}  // namespace

GaussianStats gaussian_stats(const torch::Tensor& features) {
    if (features.dim() != 2) throw DimensionError("gaussian_stats expects an n x d feature matrix");
    const auto n = features.size(0);
    const auto d = features.size(1);
    if (n < 2) throw ValidationError("gaussian_stats needs at least 2 samples, got " + std::to_string(n));
    const auto f = features.to(torch::kFloat64).contiguous();
    if (!torch::isfinite(f).all().item<bool>()) throw NumericalError("gaussian_stats: non-finite features");
    Eigen::Map<const Matrix> x(f.data_ptr<double>(), n, d);
    GaussianStats s;
    s.count = n;
    const Eigen::RowVectorXd mu = x.colwise().mean();
    const Matrix centered = x.rowwise() - mu;
    Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    cov = 0.5 * (cov + cov.transpose());
    s.mean.assign(mu.data(), mu.data() + d);
    s.cov.assign(cov.data(), cov.data() + d * d);
    return s;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
    if (a.dim() != b.dim()) {
        throw DimensionError("frechet distance: dimensions differ (" + std::to_string(a.dim()) + " vs " +
                             std::to_string(b.dim()) + ")");
    }
    const auto d = a.dim();
    if (d == 0 || static_cast<int64_t>(a.cov.size()) != d * d || static_cast<int64_t>(b.cov.size()) != d * d) {
        throw DimensionError("frechet distance: malformed statistics");
    }
    const Matrix sa = as_matrix(a);
    const Matrix sb = as_matrix(b);

    Eigen::SelfAdjointEigenSolver<Matrix> eig_a(0.5 * (sa + sa.transpose()));
    if (eig_a.info() != Eigen::Success) throw NumericalError("frechet distance: eigendecomposition failed");
    const auto lambda_a = clamped_eigenvalues(eig_a.eigenvalues(), "first covariance");
    const Matrix root_a = eig_a.eigenvectors() * lambda_a.cwiseSqrt().asDiagonal() * eig_a.eigenvectors().transpose();

    Matrix product = root_a * sb * root_a;
    product = 0.5 * (product + product.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig_p(product, Eigen::EigenvaluesOnly);
    if (eig_p.info() != Eigen::Success) throw NumericalError("frechet distance: eigendecomposition failed");
    const double trace_root = clamped_eigenvalues(eig_p.eigenvalues(), "covariance product").cwiseSqrt().sum();

    double mean_term = 0.0;
    for (int64_t i = 0; i < d; ++i) {
        const double diff = a.mean[static_cast<size_t>(i)] - b.mean[static_cast<size_t>(i)];
        mean_term += diff * diff;
    }
    const double value = mean_term + sa.trace() + sb.trace() - 2.0 * trace_root;
    if (!std::isfinite(value)) throw NumericalError("frechet distance is not finite");
    return std::max(value, 0.0);
}

}  // namespace svs::eval
