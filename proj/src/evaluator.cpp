#include "svs/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "svs/digest.hpp"
#include "svs/error.hpp"
#include "svs/trainer.hpp"

namespace svs::eval {
namespace F = torch::nn::functional;

ConfusionMatrix::ConfusionMatrix(int64_t num_classes) : n_(num_classes) {
    if (num_classes < 1) throw ValidationError("confusion matrix needs at least one class");
    counts_.assign(static_cast<size_t>(n_ * n_), 0);
}

void ConfusionMatrix::add(const torch::Tensor& truth, const torch::Tensor& prediction) {
    if (truth.sizes() != prediction.sizes()) throw DimensionError("confusion matrix: label shapes differ");
    const auto t = truth.reshape({-1}).to(torch::kLong);
    const auto p = prediction.reshape({-1}).to(torch::kLong);
    if (t.numel() == 0) return;
    if (t.min().item<int64_t>() < 0 || t.max().item<int64_t>() >= n_ || p.min().item<int64_t>() < 0 ||
        p.max().item<int64_t>() >= n_) {
        throw ValidationError("confusion matrix: label outside [0, num_classes)");
    }
    const auto bins = torch::bincount(t * n_ + p, {}, n_ * n_).contiguous();
    const auto* b = bins.data_ptr<int64_t>();
    for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += b[i];
}

int64_t ConfusionMatrix::at(int64_t truth, int64_t prediction) const {
    if (truth < 0 || truth >= n_ || prediction < 0 || prediction >= n_) throw IndexError("confusion matrix index out of range");
    return counts_[static_cast<size_t>(truth * n_ + prediction)];
}

int64_t ConfusionMatrix::total() const {
    int64_t sum = 0;
    for (auto c : counts_) sum += c;
    return sum;
}

MiouResult miou(const ConfusionMatrix& m) {
    const auto n = m.num_classes();
    MiouResult result;
    result.per_class.resize(static_cast<size_t>(n));
    double sum = 0.0;
    int64_t valid = 0;
    for (int64_t c = 0; c < n; ++c) {
        const auto tp = m.at(c, c);
        int64_t fp = 0;
        int64_t fn = 0;
        for (int64_t o = 0; o < n; ++o) {
            if (o == c) continue;
            fp += m.at(o, c);
            fn += m.at(c, o);
        }
        const auto uni = tp + fp + fn;
        if (uni == 0) continue;
        const double iou = static_cast<double>(tp) / static_cast<double>(uni);
        result.per_class[static_cast<size_t>(c)] = iou;
        sum += iou;
        ++valid;
    }
    if (valid == 0) throw ValidationError("miou: confusion matrix is empty");
    result.miou = sum / static_cast<double>(valid);
    return result;
}

double fid(const torch::Tensor& real, const torch::Tensor& fake, nn::FrozenConvStack& extractor) {
    return frechet_distance(gaussian_stats(nn::frame_embedding(extractor, real)),
                            gaussian_stats(nn::frame_embedding(extractor, fake)));
}

double fvd(const torch::Tensor& real, const torch::Tensor& fake, nn::FrozenConvStack& extractor) {
    return frechet_distance(gaussian_stats(nn::clip_embedding(extractor, real)),
                            gaussian_stats(nn::clip_embedding(extractor, fake)));
}

torch::Tensor sequence_clips(const torch::Tensor& frames, int64_t length, int64_t stride) {
    if (frames.dim() != 4) throw DimensionError("sequence_clips expects [T, 3, H, W]");
    if (length < 1 || stride < 1) throw ValidationError("sequence_clips: length and stride must be >= 1");
    std::vector<torch::Tensor> clips;
    for (int64_t t = 0; t + length <= frames.size(0); t += stride) clips.push_back(frames.narrow(0, t, length));
    if (clips.empty()) {
        throw ValidationError("sequence of " + std::to_string(frames.size(0)) + " frames is shorter than the clip length " +
                              std::to_string(length));
    }
    return torch::stack(clips);
}

SegmenterImpl::SegmenterImpl(int64_t num_classes, int64_t width) : num_classes_(num_classes) {
    using torch::nn::Conv2dOptions;
    stem = register_module("stem", torch::nn::Conv2d(Conv2dOptions(3, width, 3).padding(1)));
    down = register_module("down", torch::nn::Conv2d(Conv2dOptions(width, 2 * width, 3).stride(2).padding(1)));
    mid = register_module("mid", torch::nn::Conv2d(Conv2dOptions(2 * width, 2 * width, 3).padding(1)));
    fuse = register_module("fuse", torch::nn::Conv2d(Conv2dOptions(3 * width, width, 3).padding(1)));
    head = register_module("head", torch::nn::Conv2d(Conv2dOptions(width, num_classes, 1)));
}

torch::Tensor SegmenterImpl::forward(const torch::Tensor& images) {
    if (images.dim() != 4 || images.size(1) != 3) throw DimensionError("segmenter expects [B, 3, H, W]");
    const auto f0 = F::leaky_relu(stem(images), F::LeakyReLUFuncOptions().negative_slope(0.2));
    auto f1 = F::leaky_relu(down(f0), F::LeakyReLUFuncOptions().negative_slope(0.2));
    f1 = F::leaky_relu(mid(f1), F::LeakyReLUFuncOptions().negative_slope(0.2));
    const auto up = F::interpolate(f1, F::InterpolateFuncOptions()
                                           .size(std::vector<int64_t>{f0.size(2), f0.size(3)})
                                           .mode(torch::kBilinear)
                                           .align_corners(false));
    const auto f2 = F::leaky_relu(fuse(torch::cat({f0, up}, 1)), F::LeakyReLUFuncOptions().negative_slope(0.2));
    return head(f2);
}

torch::Tensor SegmenterImpl::predict(const torch::Tensor& images) {
    torch::NoGradGuard guard;
    return forward(images).argmax(1);
}

MiouResult segment_miou(Segmenter& segmenter, const std::vector<torch::Tensor>& frames,
                        const std::vector<torch::Tensor>& labels) {
    if (frames.size() != labels.size()) throw DimensionError("segment_miou: frame and label counts differ");
    ConfusionMatrix m(segmenter->num_classes());
    for (size_t i = 0; i < frames.size(); ++i) m.add(labels[i], segmenter->predict(frames[i]));
    return miou(m);
}

TrainedSegmenter train_eval_segmenter(const std::vector<forge::VideoSample>& data, int64_t num_classes,
                                      const SegmenterOptions& o) {
    if (num_classes < 2) throw ValidationError("segmenter: at least 2 classes are required");
    if (data.size() < 2) throw ValidationError("segmenter: at least 2 sequences are required (train and held-out)");
    const auto held = std::clamp<size_t>(static_cast<size_t>(std::ceil(o.held_out_fraction * static_cast<double>(data.size()))), 1,
                                         data.size() - 1);
    const auto train_count = data.size() - held;

    std::vector<torch::Tensor> train_frames;
    std::vector<torch::Tensor> train_labels;
    std::vector<torch::Tensor> test_frames;
    std::vector<torch::Tensor> test_labels;
    for (size_t i = 0; i < data.size(); ++i) {
        forge::check_sample(data[i], static_cast<int>(num_classes));
        (i < train_count ? train_frames : test_frames).push_back(data[i].frames);
        (i < train_count ? train_labels : test_labels).push_back(data[i].semantic);
    }
    const auto frames = torch::cat(train_frames, 0);
    const auto labels = torch::cat(train_labels, 0);
    if (std::get<0>(torch::_unique(labels)).numel() < 2) {
        throw ValidationError("segmenter: training labels contain fewer than 2 classes");
    }

    torch::manual_seed(o.seed);
    TrainedSegmenter out;
    out.net = Segmenter(num_classes, o.width);
    torch::optim::Adam opt(out.net->parameters(), torch::optim::AdamOptions(o.lr));
    std::mt19937_64 rng(o.seed);
    const auto count = static_cast<std::uint64_t>(frames.size(0));
    for (int64_t step = 1; step <= o.max_steps; ++step) {
        std::vector<int64_t> pick;
        for (int64_t b = 0; b < o.batch_frames; ++b) pick.push_back(static_cast<int64_t>(rng() % count));
        const auto idx = torch::tensor(pick, torch::kLong);
        opt.zero_grad();
        const auto logits = out.net->forward(frames.index_select(0, idx));
        const auto loss = F::cross_entropy(logits, labels.index_select(0, idx));
        if (!std::isfinite(loss.item<double>())) throw NumericalError("segmenter training diverged");
        loss.backward();
        opt.step();
        out.steps = step;
        if (step % o.check_every == 0 || step == o.max_steps) {
            out.held_out_miou = segment_miou(out.net, test_frames, test_labels).miou;
            if (out.held_out_miou >= o.threshold) break;
        }
    }
    if (out.held_out_miou < o.threshold) {
        throw ValidationError("segmenter reached only " + std::to_string(out.held_out_miou) +
                              " held-out mIoU, below the acceptance threshold " + std::to_string(o.threshold));
    }
    out.net->eval();
    for (auto& p : out.net->parameters()) p.set_requires_grad(false);
    out.digest = module_digest(*out.net);
    return out;
}

std::vector<torch::Tensor> generate_sequences(gen::Generator& generator, const std::vector<forge::VideoSample>& data,
                                              int64_t t_used) {
    torch::NoGradGuard guard;
    const bool was_training = generator->is_training();
    generator->eval();
    std::vector<torch::Tensor> out;
    for (const auto& s : data) {
        const auto length = t_used > 0 ? std::min(t_used, s.length()) : s.length();
        const auto r = train::rollout(generator, s, length);
        out.push_back(torch::cat(r.frames, 0));
    }
    generator->train(was_training);
    return out;
}

MiouResult generated_miou(gen::Generator& generator, Segmenter& segmenter, const std::vector<forge::VideoSample>& data,
                          int64_t t_used) {
    const auto sequences = generate_sequences(generator, data, t_used);
    std::vector<torch::Tensor> frames;
    std::vector<torch::Tensor> labels;
    for (size_t i = 0; i < data.size(); ++i) {
        const auto length = sequences[i].size(0);
        frames.push_back(sequences[i].narrow(0, 1, length - 1));
        labels.push_back(data[i].semantic.narrow(0, 1, length - 1));
    }
    return segment_miou(segmenter, frames, labels);
}

}  // namespace svs::eval
