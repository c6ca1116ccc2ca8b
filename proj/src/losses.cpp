#include "svs/losses.hpp"

#include <cmath>

#include "svs/error.hpp"

namespace svs::loss {
namespace F = torch::nn::functional;

void validate(const LossWeights& w) {
    for (double v : {w.vgg, w.fm, w.flow, w.warp}) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("loss weights must be finite and >= 0");
    }
    for (const auto* list : {&w.perceptual_layers, &w.fm_layers})
        for (double v : *list)
            if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("layer weights must be finite and >= 0");
}

std::vector<double> layer_weights(const std::vector<double>& explicit_weights, size_t count, const char* what) {
    if (explicit_weights.empty()) return std::vector<double>(count, count == 0 ? 0.0 : 1.0 / static_cast<double>(count));
    if (explicit_weights.size() != count) {
        throw ConfigError(std::string(what) + ": expected " + std::to_string(count) + " layer weights, got " +
                          std::to_string(explicit_weights.size()));
    }
    return explicit_weights;
}

torch::Tensor class_weights(const torch::Tensor& labels, int64_t num_classes) {
    if (labels.numel() == 0) throw ValidationError("class_weights: empty label batch");
    const auto flat = labels.reshape({-1}).to(torch::kLong);
    if (flat.min().item<int64_t>() < 0 || flat.max().item<int64_t>() >= num_classes) {
        throw ValidationError("class_weights: label outside [0, num_classes)");
    }
    const auto counts = torch::bincount(flat, {}, num_classes).to(torch::kFloat64);
    const auto present = counts.gt(0);
    const double n_present = present.sum().item<double>();
    const double total = static_cast<double>(flat.numel());
    return torch::where(present, total / (counts.clamp_min(1.0) * n_present), torch::zeros_like(counts));
}

namespace {

void check_logits(const torch::Tensor& logits, int64_t num_classes, const char* who) {
    if (logits.dim() != 4 || logits.size(1) != num_classes + 1) {
        throw DimensionError(std::string(who) + ": logits must have N+1 = " + std::to_string(num_classes + 1) + " channels");
    }
}

}  // namespace

torch::Tensor oasis_real_term(const torch::Tensor& logits, const torch::Tensor& labels, const torch::Tensor& alpha) {
    const auto n = alpha.size(0);
    check_logits(logits, n, "oasis");
    if (labels.dim() != 3 || labels.size(0) != logits.size(0) || labels.size(1) != logits.size(2) ||
        labels.size(2) != logits.size(3)) {
        throw DimensionError("oasis: labels must be [B, H, W] matching the logits");
    }
    const auto target = labels.to(torch::kLong);
    const auto nll = -F::log_softmax(logits, F::LogSoftmaxFuncOptions(1)).gather(1, target.unsqueeze(1)).squeeze(1);
    const auto weight = alpha.to(logits.dtype()).index_select(0, target.reshape({-1})).view_as(nll);
    return (weight * nll).mean();
}

torch::Tensor oasis_fake_term(const torch::Tensor& logits_fake, int64_t num_classes) {
    check_logits(logits_fake, num_classes, "oasis");
    return -F::log_softmax(logits_fake, F::LogSoftmaxFuncOptions(1)).select(1, num_classes).mean();
}

torch::Tensor oasis_d_loss(const torch::Tensor& logits_real, const torch::Tensor& logits_fake,
                           const torch::Tensor& labels, const torch::Tensor& alpha) {
    return oasis_real_term(logits_real, labels, alpha) + oasis_fake_term(logits_fake, alpha.size(0));
}

torch::Tensor oasis_g_loss(const torch::Tensor& logits_fake, const torch::Tensor& labels, const torch::Tensor& alpha) {
    return oasis_real_term(logits_fake, labels, alpha);
}

torch::Tensor adversarial_d_loss(const std::vector<torch::Tensor>& real, const std::vector<torch::Tensor>& fake,
                                 AdvObjective objective) {
    if (real.size() != fake.size() || real.empty()) throw DimensionError("adversarial loss: mismatched patch lists");
    torch::Tensor total = torch::zeros({}, real.front().options());
    for (size_t i = 0; i < real.size(); ++i) {
        if (objective == AdvObjective::Hinge) {
            total = total + torch::relu(1 - real[i]).mean() + torch::relu(1 + fake[i]).mean();
        } else {
            total = total + F::softplus(-real[i]).mean() + F::softplus(fake[i]).mean();
        }
    }
    return total;
}

torch::Tensor adversarial_g_loss(const std::vector<torch::Tensor>& fake, AdvObjective objective) {
    if (fake.empty()) throw DimensionError("adversarial loss: empty patch list");
    torch::Tensor total = torch::zeros({}, fake.front().options());
    for (const auto& f : fake) total = total + (objective == AdvObjective::Hinge ? -f.mean() : -F::softplus(f).mean());
    return total;
}

AdvLosses video_adv_losses(const std::vector<torch::Tensor>& real_patches, const std::vector<torch::Tensor>& fake_patches,
                           AdvObjective objective) {
    return {adversarial_d_loss(real_patches, fake_patches, objective), adversarial_g_loss(fake_patches, objective)};
}

torch::Tensor perceptual_loss(const torch::Tensor& x_hat, const torch::Tensor& x, const FeatureFn& extractor,
                              const std::vector<double>& betas) {
    if (x_hat.sizes() != x.sizes()) throw DimensionError("perceptual loss: image shapes differ");
    const auto fake = extractor(x_hat);
    std::vector<torch::Tensor> real;
    {
        torch::NoGradGuard guard;
        real = extractor(x);
    }
    if (betas.size() != fake.size()) throw ConfigError("perceptual loss: beta count does not match extractor layers");
    torch::Tensor total = torch::zeros({}, x_hat.options());
    for (size_t l = 0; l < fake.size(); ++l) total = total + betas[l] * (fake[l] - real[l]).abs().mean();
    return total;
}

torch::Tensor feature_matching_loss(const std::vector<torch::Tensor>& fake_features,
                                    const std::vector<torch::Tensor>& real_features, const std::vector<double>& alphas) {
    if (fake_features.size() != real_features.size()) throw DimensionError("feature matching: layer counts differ");
    if (alphas.size() != fake_features.size()) throw ConfigError("feature matching: alpha count does not match layers");
    if (fake_features.empty()) return torch::zeros({});
    torch::Tensor total = torch::zeros({}, fake_features.front().options());
    for (size_t l = 0; l < fake_features.size(); ++l) {
        if (fake_features[l].sizes() != real_features[l].sizes()) throw DimensionError("feature matching: layer shapes differ");
        total = total + alphas[l] * (fake_features[l] - real_features[l].detach()).abs().mean();
    }
    return total;
}

FlowWarpTerms flow_warp_terms(const torch::Tensor& flow_pred, const torch::Tensor& flow_gt, const torch::Tensor& warped,
                              const torch::Tensor& x_next, double lambda_flow, double lambda_warp) {
    if (flow_pred.sizes() != flow_gt.sizes()) throw DimensionError("flow loss: predicted and target flow shapes differ");
    if (warped.sizes() != x_next.sizes()) throw DimensionError("warp loss: warped and target frame shapes differ");
    return {lambda_flow * (flow_pred - flow_gt).abs().mean(), lambda_warp * (warped - x_next).abs().mean()};
}

torch::Tensor flow_warp_loss(const torch::Tensor& flow_pred, const torch::Tensor& flow_gt, const torch::Tensor& warped,
                             const torch::Tensor& x_next, double lambda_flow, double lambda_warp) {
    return flow_warp_terms(flow_pred, flow_gt, warped, x_next, lambda_flow, lambda_warp).total();
}

torch::Tensor total_generator_loss(const GeneratorTerms& t, const LossWeights& w) {
    return t.image_adv + t.video_adv + t.flow + w.vgg * t.vgg + w.fm * t.fm;
}

std::vector<std::pair<std::string, double>> LossReport::fields() const {
    std::vector<std::pair<std::string, double>> out;
    if (g_oasis) out.emplace_back("g_oasis", *g_oasis);
    if (d_oasis) out.emplace_back("d_oasis", *d_oasis);
    if (g_image_adv) out.emplace_back("g_image_adv", *g_image_adv);
    if (d_image_adv) out.emplace_back("d_image_adv", *d_image_adv);
    out.emplace_back("g_adv", g_adv);
    out.emplace_back("d_adv", d_adv);
    out.emplace_back("vgg", vgg);
    out.emplace_back("fm", fm);
    out.emplace_back("flow", flow);
    out.emplace_back("warp", warp);
    out.emplace_back("total_g", total_g);
    out.emplace_back("total_d", total_d);
    return out;
}

void LossReport::check_finite() const {
    for (const auto& [name, value] : fields()) {
        if (!std::isfinite(value)) throw NumericalError("non-finite loss term '" + name + "'");
    }
}

}  // namespace svs::loss
