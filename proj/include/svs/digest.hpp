#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include <torch/torch.h>

namespace svs {

// Hex SHA-256 helpers used for content digests in manifests and checksums.
std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_hex(std::string_view text);
std::string sha256_file(const std::filesystem::path& path);

// Digest of a tensor's dtype, shape and raw contiguous bytes.
std::string tensor_digest(const torch::Tensor& tensor);

// Digest over every named parameter and buffer of a module, in registration order.
std::string module_digest(const torch::nn::Module& module);

}  // namespace svs
