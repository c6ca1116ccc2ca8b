#pragma once

#include <cmath>
#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <functional>
#include <string>

#include <torch/torch.h>

namespace svs::test {

// Central-difference gradient of a scalar function, one element at a time.
inline torch::Tensor numeric_gradient(const std::function<double(const torch::Tensor&)>& f, const torch::Tensor& x,
                                      double h = 1e-6) {
    auto probe = x.detach().clone();
    auto grad = torch::zeros_like(probe);
    auto flat = probe.view({-1});
    auto g = grad.view({-1});
    for (int64_t i = 0; i < flat.numel(); ++i) {
        const double orig = flat[i].item<double>();
        flat[i] = orig + h;
        const double up = f(probe);
        flat[i] = orig - h;
        const double down = f(probe);
        flat[i] = orig;
        g[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

inline double relative_error(const torch::Tensor& a, const torch::Tensor& b) {
    const double diff = (a - b).abs().max().item<double>();
    const double scale = std::max({a.abs().max().item<double>(), b.abs().max().item<double>(), 1e-12});
    return diff / scale;
}

inline double max_abs(const torch::Tensor& t) { return t.abs().max().item<double>(); }

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("svs_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace svs::test
