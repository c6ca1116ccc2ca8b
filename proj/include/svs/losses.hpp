#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

// Objectives of the generator and discriminators. Every expectation is
// realized as a mean over pixels (and batch / patch positions).
namespace svs::loss {

struct LossWeights {
    double vgg = 10.0;
    double fm = 10.0;
    double flow = 10.0;
    double warp = 10.0;
    // Empty: uniform 1/L over the extractor / discriminator layers.
    std::vector<double> perceptual_layers;
    std::vector<double> fm_layers;
    bool operator==(const LossWeights&) const = default;
};

void validate(const LossWeights& weights);

// Uniform weights 1/count, or the explicit list if its length matches.
std::vector<double> layer_weights(const std::vector<double>& explicit_weights, size_t count, const char* what);

// Inverse per-pixel class frequency over the whole batch:
// alpha_c = total / (count_c * n_present) for present classes, 0 otherwise (float64).
torch::Tensor class_weights(const torch::Tensor& labels, int64_t num_classes);

// Mean over pixels of alpha[s] * -log softmax(logits)[s].
torch::Tensor oasis_real_term(const torch::Tensor& logits, const torch::Tensor& labels, const torch::Tensor& alpha);
// Mean over pixels of -log softmax(logits)[N] (the fake class).
torch::Tensor oasis_fake_term(const torch::Tensor& logits_fake, int64_t num_classes);

torch::Tensor oasis_d_loss(const torch::Tensor& logits_real, const torch::Tensor& logits_fake,
                           const torch::Tensor& labels, const torch::Tensor& alpha);
torch::Tensor oasis_g_loss(const torch::Tensor& logits_fake, const torch::Tensor& labels, const torch::Tensor& alpha);

enum class AdvObjective { Hinge, Saturating };

// Hinge: d = mean relu(1 - real) + mean relu(1 + fake), g = -mean fake.
// Saturating: d = mean softplus(-real) + mean softplus(fake), g = -mean softplus(fake),
// i.e. log D(real) + log(1 - D(fake)) with sigmoid outputs.
// Summed over every patch tensor in the lists.
torch::Tensor adversarial_d_loss(const std::vector<torch::Tensor>& real, const std::vector<torch::Tensor>& fake,
                                 AdvObjective objective = AdvObjective::Hinge);
torch::Tensor adversarial_g_loss(const std::vector<torch::Tensor>& fake, AdvObjective objective = AdvObjective::Hinge);

struct AdvLosses {
    torch::Tensor d_loss;
    torch::Tensor g_loss;
};
AdvLosses video_adv_losses(const std::vector<torch::Tensor>& real_patches, const std::vector<torch::Tensor>& fake_patches,
                           AdvObjective objective = AdvObjective::Hinge);

using FeatureFn = std::function<std::vector<torch::Tensor>(const torch::Tensor&)>;

// sum_l beta_l * mean |phi_l(x_hat) - phi_l(x)|
torch::Tensor perceptual_loss(const torch::Tensor& x_hat, const torch::Tensor& x, const FeatureFn& extractor,
                              const std::vector<double>& betas);

// sum_l alpha_l * mean |fake_l - real_l|; real features are detached.
torch::Tensor feature_matching_loss(const std::vector<torch::Tensor>& fake_features,
                                    const std::vector<torch::Tensor>& real_features,
                                    const std::vector<double>& alphas);

struct FlowWarpTerms {
    torch::Tensor flow;  // lambda_OF * mean |OF_hat - OF_gt|
    torch::Tensor warp;  // lambda_W * mean |WI - x_next|
    torch::Tensor total() const { return flow + warp; }
};
FlowWarpTerms flow_warp_terms(const torch::Tensor& flow_pred, const torch::Tensor& flow_gt, const torch::Tensor& warped,
                              const torch::Tensor& x_next, double lambda_flow, double lambda_warp);
torch::Tensor flow_warp_loss(const torch::Tensor& flow_pred, const torch::Tensor& flow_gt, const torch::Tensor& warped,
                             const torch::Tensor& x_next, double lambda_flow, double lambda_warp);

struct GeneratorTerms {
    torch::Tensor image_adv;  // OASIS generator term, or the image patch term without OASIS
    torch::Tensor video_adv;
    torch::Tensor flow;       // flow + warp, already weighted
    torch::Tensor vgg;
    torch::Tensor fm;
};
// L_G = image_adv + video_adv + flow + lambda_vgg * vgg + lambda_fm * fm
torch::Tensor total_generator_loss(const GeneratorTerms& terms, const LossWeights& weights);

// Scalars logged after every training step. The OASIS fields are absent when
// the segmentation discriminator is disabled and the image patch fields are
// absent when it is enabled.
struct LossReport {
    std::optional<double> g_oasis;
    std::optional<double> d_oasis;
    std::optional<double> g_image_adv;
    std::optional<double> d_image_adv;
    double g_adv = 0.0;
    double d_adv = 0.0;
    double vgg = 0.0;
    double fm = 0.0;
    double flow = 0.0;
    double warp = 0.0;
    double total_g = 0.0;
    double total_d = 0.0;

    // (name, value) for every present field, in a fixed order.
    std::vector<std::pair<std::string, double>> fields() const;
    // Throws NumericalError naming the first non-finite field.
    void check_finite() const;
};

}  // namespace svs::loss
