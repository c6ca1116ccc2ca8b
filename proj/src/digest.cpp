#include "svs/digest.hpp"

#include <array>
#include <fstream>
#include <iterator>
#include <vector>

#include <openssl/evp.h>

#include "svs/error.hpp"

namespace svs {
namespace {

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) { EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr); }
    ~Sha256() { EVP_MD_CTX_free(ctx_); }
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const void* data, size_t size) { EVP_DigestUpdate(ctx_, data, size); }
    void update(std::string_view text) { update(text.data(), text.size()); }

    std::string hex() {
        std::array<unsigned char, EVP_MAX_MD_SIZE> out{};
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx_, out.data(), &len);
        static constexpr char kDigits[] = "0123456789abcdef";
        std::string result;
        result.reserve(2 * len);
        for (unsigned int i = 0; i < len; ++i) {
            result.push_back(kDigits[out[i] >> 4]);
            result.push_back(kDigits[out[i] & 0xF]);
        }
        return result;
    }

private:
    EVP_MD_CTX* ctx_;
};

void hash_tensor(Sha256& sha, const torch::Tensor& tensor) {
    auto t = tensor.detach().contiguous().cpu();
    sha.update(std::string(c10::toString(t.scalar_type())));
    for (auto d : t.sizes()) {
        int64_t dim = d;
        sha.update(&dim, sizeof(dim));
    }
    sha.update(t.data_ptr(), t.numel() * t.element_size());
}

}  // namespace

std::string sha256_hex(std::span<const unsigned char> bytes) {
    Sha256 sha;
    sha.update(bytes.data(), bytes.size());
    return sha.hex();
}

std::string sha256_hex(std::string_view text) {
    Sha256 sha;
    sha.update(text);
    return sha.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    Sha256 sha;
    std::vector<char> buffer(1 << 16);
    while (in) {
        in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
        sha.update(buffer.data(), static_cast<size_t>(in.gcount()));
    }
    return sha.hex();
}

std::string tensor_digest(const torch::Tensor& tensor) {
    Sha256 sha;
    hash_tensor(sha, tensor);
    return sha.hex();
}

std::string module_digest(const torch::nn::Module& module) {
    Sha256 sha;
    for (const auto& item : module.named_parameters()) {
        sha.update(item.key());
        hash_tensor(sha, item.value());
    }
    for (const auto& item : module.named_buffers()) {
        sha.update(item.key());
        hash_tensor(sha, item.value());
    }
    return sha.hex();
}

}  // namespace svs
