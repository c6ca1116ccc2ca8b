#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

namespace svs::eval {

struct GaussianStats {
    std::vector<double> mean;
    std::vector<double> cov;  // row-major d x d
    int64_t count = 0;

    int64_t dim() const { return static_cast<int64_t>(mean.size()); }
};

// Sample mean and unbiased covariance of an n x d feature matrix, n >= 2.
GaussianStats gaussian_stats(const torch::Tensor& features);

// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)). The square root trace is
// taken from the eigenvalues of the symmetric S_a^(1/2) S_b S_a^(1/2).
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

}  // namespace svs::eval
