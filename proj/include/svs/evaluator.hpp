#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "svs/extractors.hpp"
#include "svs/frechet.hpp"
#include "svs/generator.hpp"
#include "svs/scene_forge.hpp"

namespace svs::eval {

// Rows are ground truth, columns predictions.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int64_t num_classes);

    void add(const torch::Tensor& truth, const torch::Tensor& prediction);
    int64_t at(int64_t truth, int64_t prediction) const;
    int64_t total() const;
    int64_t num_classes() const { return n_; }

private:
    int64_t n_;
    std::vector<int64_t> counts_;
};

struct MiouResult {
    double miou = 0.0;
    // Empty for classes with an empty union; those are left out of the mean.
    std::vector<std::optional<double>> per_class;
};

MiouResult miou(const ConfusionMatrix& confusion);

// Frames [n, 3, H, W] through the frame extractor.
double fid(const torch::Tensor& real, const torch::Tensor& fake, nn::FrozenConvStack& extractor);
// Clips [n, K, 3, H, W] through the clip extractor.
double fvd(const torch::Tensor& real, const torch::Tensor& fake, nn::FrozenConvStack& extractor);

constexpr int64_t kClipLength = 8;
constexpr int64_t kClipStride = 4;
// Clips of `length` frames every `stride` frames of a [T, 3, H, W] sequence.
torch::Tensor sequence_clips(const torch::Tensor& frames, int64_t length = kClipLength, int64_t stride = kClipStride);

// Small encoder-decoder segmenter used as the MIoU backbone.
class SegmenterImpl : public torch::nn::Module {
public:
    SegmenterImpl(int64_t num_classes, int64_t width);

    torch::Tensor forward(const torch::Tensor& images);
    torch::Tensor predict(const torch::Tensor& images);
    int64_t num_classes() const { return num_classes_; }

private:
    int64_t num_classes_;
    torch::nn::Conv2d stem{nullptr}, down{nullptr}, mid{nullptr}, fuse{nullptr}, head{nullptr};
};
TORCH_MODULE(Segmenter);

struct SegmenterOptions {
    int64_t width = 16;
    int64_t max_steps = 600;
    int64_t check_every = 50;
    int64_t batch_frames = 8;
    double lr = 2e-3;
    double held_out_fraction = 0.25;
    double threshold = 0.90;
    std::uint64_t seed = 0;
};

struct TrainedSegmenter {
    Segmenter net{nullptr};
    double held_out_miou = 0.0;
    int64_t steps = 0;
    std::string digest;
};

// Trains on real frames of the leading sequences and accepts the segmenter
// once the held-out sequences reach the threshold. The result is frozen.
TrainedSegmenter train_eval_segmenter(const std::vector<forge::VideoSample>& data, int64_t num_classes,
                                      const SegmenterOptions& options = {});

MiouResult segment_miou(Segmenter& segmenter, const std::vector<torch::Tensor>& frames,
                        const std::vector<torch::Tensor>& labels);

// Generated sequences: rollout from the real first frame of each sample,
// without gradients and without touching module state.
std::vector<torch::Tensor> generate_sequences(gen::Generator& generator, const std::vector<forge::VideoSample>& data,
                                              int64_t t_used = 0);

// MIoU of generated frames 1..T-1 against their label maps.
MiouResult generated_miou(gen::Generator& generator, Segmenter& segmenter, const std::vector<forge::VideoSample>& data,
                          int64_t t_used = 0);

}  // namespace svs::eval
