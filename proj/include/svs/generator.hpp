#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "svs/layers.hpp"

namespace svs::gen {

struct GeneratorConfig {
    int64_t num_classes = 4;
    int64_t levels = 3;
    int64_t base_channels = 32;
    int64_t channel_cap = 256;
    int64_t flow_net_blocks = 4;
    // Hidden width of every SPADE modulation branch.
    int64_t spade_hidden = 32;
    bool spectral_norm = false;
    int64_t noise_dim = 0;
    // false: semantic map concatenated to the image encoder input, plain
    // normalized decoder and an external occlusion blend with the warped frame.
    bool use_spade = true;
    // Number of decoder levels appended by grow_resolution.
    int64_t growth_levels = 0;

    int64_t channels_at(int64_t level) const;
    // Encoder and decoder width of the g-th grown level (1-based).
    int64_t grown_channels(int64_t g) const;
    int64_t size_unit() const { return int64_t{1} << (levels + growth_levels); }
    bool operator==(const GeneratorConfig&) const = default;
};

void validate(const GeneratorConfig& config);

struct GeneratorOutput {
    torch::Tensor frame;      // [B, 3, H, W] in [-1, 1]
    torch::Tensor flow;       // [B, 2, H, W]
    torch::Tensor occlusion;  // [B, 1, H, W] in [0, 1]
    torch::Tensor warped;     // [B, 3, H, W]
};

// Triple-pyramid generator: flow/occlusion predictor, warped-image encoder,
// semantic encoder with a broadcast bottleneck, and a SPADE decoder whose skip
// connections are blended with the image encoder by the predicted occlusion.
class GeneratorImpl : public torch::nn::Module {
public:
    explicit GeneratorImpl(GeneratorConfig config);

    const GeneratorConfig& config() const { return config_; }

    // One-hot [B, N, H, W] inputs at the generator's full resolution.
    std::pair<torch::Tensor, torch::Tensor> predict_flow(const torch::Tensor& s_prev, const torch::Tensor& s_cur);
    // Features ordered finest first: grown levels (finest grown first), then base levels 0..L.
    std::vector<torch::Tensor> encode_warped_image(const torch::Tensor& warped);
    std::vector<torch::Tensor> encode_semantics(const torch::Tensor& s_cur);
    torch::Tensor decode_frame(const std::vector<torch::Tensor>& semantic_pyramid,
                               const std::vector<torch::Tensor>& image_pyramid, const torch::Tensor& occlusion,
                               const std::optional<torch::Tensor>& noise = std::nullopt);

    // x_prev: [B, 3, H, W]; s_prev, s_cur: [B, H, W] integer label maps.
    GeneratorOutput forward(const torch::Tensor& x_prev, const torch::Tensor& s_prev, const torch::Tensor& s_cur,
                            const std::optional<torch::Tensor>& noise = std::nullopt);

    // Appends one decoder level (plus its encoder stems and output head) for
    // twice the input resolution. Existing tensors are left untouched.
    void grow();

    // Disables the occlusion prediction and uses this constant instead
    // (testing hook for the skip-fusion contract).
    void force_occlusion(std::optional<double> value) { forced_occlusion_ = value; }

private:
    void check_input(const torch::Tensor& x, int64_t channels, const char* what) const;
    torch::Tensor pool_to_base(const torch::Tensor& x) const;
    void add_grown_level(int64_t g);

    GeneratorConfig config_;
    std::optional<double> forced_occlusion_;

    // flow / occlusion predictor
    nn::Conv flow_stem{nullptr};
    std::vector<nn::Conv> flow_down;
    std::vector<nn::ResBlock> flow_res;
    std::vector<nn::Conv> flow_up;
    nn::Conv flow_head{nullptr};
    nn::Conv occ_head{nullptr};

    // warped-image encoder
    nn::Conv img_stem{nullptr};
    std::vector<nn::Conv> img_down;

    // semantic encoder
    nn::Conv sem_stem{nullptr};
    std::vector<nn::Conv> sem_down;

    // decoder, blocks ordered from the bottleneck up
    nn::Conv dec_start{nullptr};
    std::vector<nn::SpadeResBlock> dec_blocks;
    std::vector<nn::NormResBlock> plain_blocks;
    nn::Conv out_head{nullptr};

    // grown levels
    std::vector<nn::Conv> grown_img_stem;
    std::vector<nn::Conv> grown_sem_stem;
    std::vector<nn::SpadeResBlock> grown_blocks;
    std::vector<nn::NormResBlock> grown_plain_blocks;
    std::vector<nn::Conv> grown_heads;
};
TORCH_MODULE(Generator);

// Returns the configuration after growth; the module is grown in place.
GeneratorConfig grow_resolution(Generator& generator);

}  // namespace svs::gen
