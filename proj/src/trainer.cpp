#include "svs/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "svs/error.hpp"
#include "svs/warp.hpp"

namespace svs::train {
namespace F = torch::nn::functional;

void validate(const TrainConfig& c) {
    gen::validate(c.generator);
    disc::validate(c.disc_image);
    disc::validate(c.disc_video);
    loss::validate(c.weights);
    validate(c.schedule);
    const auto n = c.generator.num_classes;
    if (c.disc_image.num_classes != n || c.disc_video.num_classes != n) {
        throw ConfigError("num_classes differs between generator and discriminators");
    }
    if (c.batch_sequences < 1) throw ConfigError("train.batch_sequences must be >= 1");
    if (c.steps_per_epoch < 0) throw ConfigError("train.steps_per_epoch must be >= 0");
}

namespace {

torch::optim::AdamOptions adam_options(const TrainSchedule& s) {
    return torch::optim::AdamOptions(s.base_lr).betas({s.beta1, s.beta2});
}

void require_finite(const char* name, const torch::Tensor& value) {
    if (!torch::isfinite(value).all().item<bool>()) throw NumericalError(std::string("non-finite loss term '") + name + "'");
}

std::vector<torch::Tensor> concat(std::vector<torch::Tensor> a, const std::vector<torch::Tensor>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TrainState::TrainState(TrainConfig cfg)
    : config(std::move(cfg)), sampler(config.seed), noise_rng(at::make_generator<at::CPUGeneratorImpl>(config.seed)) {
    validate(config);
    torch::manual_seed(config.seed);
    generator = gen::Generator(config.generator);
    if (config.use_oasis) {
        disc_image = disc::SegmentationDiscriminator(config.disc_image);
    } else {
        const auto& d = config.disc_image;
        disc_patch = disc::ConditionalPatchDiscriminator(d.num_classes, d.levels, d.base_channels, d.channel_cap,
                                                         d.spectral_norm);
    }
    for (auto rate : config.disc_video.temporal_rates) disc_video.emplace_back(config.disc_video, rate);
    perceptual = nn::make_perceptual_extractor(config.extractor_seed);
    opt_g = std::make_unique<torch::optim::Adam>(generator->parameters(), adam_options(config.schedule));
    opt_d = std::make_unique<torch::optim::Adam>(discriminator_parameters(), adam_options(config.schedule));
}

std::vector<torch::Tensor> TrainState::discriminator_parameters() const {
    std::vector<torch::Tensor> params =
        disc_image ? disc_image->parameters() : disc_patch->parameters();
    for (const auto& d : disc_video) params = concat(std::move(params), d->parameters());
    return params;
}

torch::Tensor RolloutResult::generated() const {
    std::vector<torch::Tensor> out(frames.begin() + 1, frames.end());
    return torch::cat(out, 0);
}

RolloutResult rollout(gen::Generator& generator, const forge::VideoSample& sample, int64_t t_used, DetachPolicy policy,
                      const at::Generator* noise_rng) {
    if (t_used < 2) throw ValidationError("rollout: at least 2 frames are required, got " + std::to_string(t_used));
    if (t_used > sample.length()) {
        throw ValidationError("rollout: " + std::to_string(t_used) + " frames requested from a sample of " +
                              std::to_string(sample.length()));
    }
    const auto noise_dim = generator->config().noise_dim;
    RolloutResult result;
    result.frames.push_back(sample.frames.narrow(0, 0, 1));
    auto prev = result.frames.front();
    for (int64_t t = 1; t < t_used; ++t) {
        std::optional<torch::Tensor> noise;
        if (noise_dim > 0) {
            noise = noise_rng ? torch::randn({1, noise_dim}, *noise_rng) : torch::zeros({1, noise_dim});
        }
        auto out = generator->forward(prev, sample.semantic.narrow(0, t - 1, 1), sample.semantic.narrow(0, t, 1), noise);
        result.frames.push_back(out.frame);
        prev = policy == DetachPolicy::Detach ? out.frame.detach() : out.frame;
        result.outputs.push_back(std::move(out));
    }
    return result;
}

forge::VideoSample upscale_sample(const forge::VideoSample& s, int64_t factor) {
    if (factor < 1) throw ValidationError("upscale factor must be >= 1");
    if (factor == 1) return s;
    const auto h = s.height() * factor;
    const auto w = s.width() * factor;
    const auto nearest = [&](const torch::Tensor& x) {
        return F::interpolate(x, F::InterpolateFuncOptions().size(std::vector<int64_t>{h, w}).mode(torch::kNearest));
    };
    forge::VideoSample out;
    out.frames = F::interpolate(s.frames, F::InterpolateFuncOptions()
                                              .size(std::vector<int64_t>{h, w})
                                              .mode(torch::kBilinear)
                                              .align_corners(false));
    out.semantic = nearest(s.semantic.unsqueeze(1).to(torch::kFloat32)).squeeze(1).to(torch::kLong);
    out.flows = warp::resize_flow(s.flows, h, w);
    out.occlusions = nearest(s.occlusions);
    return out;
}

namespace {

struct Prepared {
    forge::VideoSample clip;  // the cropped, rescaled training window
    RolloutResult result;
    torch::Tensor real_next;  // frames 1..T_used-1
    torch::Tensor labels_next;
    torch::Tensor alpha;
};

struct VideoClips {
    torch::Tensor real;
    torch::Tensor fake;
    torch::Tensor labels;
};

std::optional<VideoClips> video_clips(const Prepared& p, const torch::Tensor& fake_next, int64_t rate, int64_t k) {
    const auto length = p.clip.length();
    if (length < 1 + (k - 1) * rate) return std::nullopt;
    const auto windows = disc::extract_windows(length, rate, k);
    const auto fake_seq = torch::cat({p.clip.frames.narrow(0, 0, 1), fake_next}, 0);
    return VideoClips{disc::gather_windows(p.clip.frames, windows), disc::gather_windows(fake_seq, windows),
                      disc::gather_windows(p.clip.semantic, windows)};
}

}  // namespace

void apply_learning_rate(TrainState& state) {
    const auto lr = state.stage().lr;
    for (auto* opt : {state.opt_g.get(), state.opt_d.get()}) {
        for (auto& group : opt->param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    }
}

loss::LossReport train_step(TrainState& state, std::span<const forge::VideoSample> batch) {
    if (batch.empty()) throw ValidationError("train_step: empty batch");
    const auto& cfg = state.config;
    const auto stage = state.stage();
    apply_learning_rate(state);
    const auto n = cfg.generator.num_classes;
    const auto k = cfg.disc_video.frames_per_window;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());

    state.generator->train();
    if (state.disc_image) state.disc_image->train();
    if (state.disc_patch) state.disc_patch->train();
    for (auto& d : state.disc_video) d->train();

    std::vector<Prepared> prepared;
    for (const auto& raw : batch) {
        forge::check_sample(raw, static_cast<int>(n));
        const auto sample = upscale_sample(raw, state.data_scale());
        const auto t_used = std::min<int64_t>(stage.seq_len, sample.length());
        int64_t t0 = 0;
        if (cfg.random_crop && sample.length() > t_used) {
            t0 = static_cast<int64_t>(state.sampler() % static_cast<std::uint64_t>(sample.length() - t_used + 1));
        }
        Prepared p;
        p.clip.frames = sample.frames.narrow(0, t0, t_used);
        p.clip.semantic = sample.semantic.narrow(0, t0, t_used);
        p.clip.flows = sample.flows.narrow(0, t0, t_used - 1);
        p.clip.occlusions = sample.occlusions.narrow(0, t0, t_used - 1);
        p.result = rollout(state.generator, p.clip, t_used, cfg.detach, &state.noise_rng);
        p.real_next = p.clip.frames.narrow(0, 1, t_used - 1);
        p.labels_next = p.clip.semantic.narrow(0, 1, t_used - 1);
        p.alpha = loss::class_weights(p.labels_next, n);
        prepared.push_back(std::move(p));
    }

    loss::LossReport report;
    double d_image = 0.0;
    double d_video = 0.0;

    // Discriminator update on detached generator outputs.
    state.opt_d->zero_grad();
    for (auto& p : prepared) {
        const auto fake = p.result.generated().detach();
        torch::Tensor image_term;
        if (cfg.use_oasis) {
            const auto real_logits = state.disc_image->forward(p.real_next).logits.front();
            const auto fake_logits = state.disc_image->forward(fake).logits.front();
            image_term = loss::oasis_d_loss(real_logits, fake_logits, p.labels_next, p.alpha);
        } else {
            image_term = loss::adversarial_d_loss(state.disc_patch->forward(p.real_next, p.labels_next).logits,
                                                  state.disc_patch->forward(fake, p.labels_next).logits, cfg.adversarial);
        }
        require_finite(cfg.use_oasis ? "d_oasis" : "d_image_adv", image_term);
        torch::Tensor video_term = torch::zeros({});
        for (auto& dv : state.disc_video) {
            const auto clips = video_clips(p, fake, dv->rate(), k);
            if (!clips) continue;
            video_term = video_term + loss::adversarial_d_loss(dv->forward(clips->real, clips->labels).logits,
                                                               dv->forward(clips->fake, clips->labels).logits,
                                                               cfg.adversarial);
        }
        require_finite("d_adv", video_term);
        ((image_term + video_term) * inv_batch).backward();
        d_image += image_term.item<double>() * inv_batch;
        d_video += video_term.item<double>() * inv_batch;
    }
    state.opt_d->step();

    // Generator update against the refreshed discriminators.
    double g_image = 0.0, g_video = 0.0, vgg = 0.0, fm = 0.0, flow = 0.0, warp_term = 0.0, total_g = 0.0;
    const auto betas = loss::layer_weights(cfg.weights.perceptual_layers, static_cast<size_t>(state.perceptual->stages()),
                                           "loss.perceptual_layers");
    const loss::FeatureFn extractor = [&](const torch::Tensor& x) { return state.perceptual->forward(x); };
    const bool fm_image = cfg.fm_source != FeatureMatchSource::Video;
    const bool fm_video = cfg.fm_source != FeatureMatchSource::Image;

    state.opt_g->zero_grad();
    for (auto& p : prepared) {
        const auto fake = p.result.generated();
        std::vector<torch::Tensor> fake_feats;
        std::vector<torch::Tensor> real_feats;

        torch::Tensor image_term;
        disc::DiscOutput fake_out;
        disc::DiscOutput real_out;
        if (cfg.use_oasis) {
            fake_out = state.disc_image->forward(fake);
            image_term = loss::oasis_g_loss(fake_out.logits.front(), p.labels_next, p.alpha);
            if (fm_image) {
                torch::NoGradGuard guard;
                real_out = state.disc_image->forward(p.real_next);
            }
        } else {
            fake_out = state.disc_patch->forward(fake, p.labels_next);
            image_term = loss::adversarial_g_loss(fake_out.logits, cfg.adversarial);
            if (fm_image) {
                torch::NoGradGuard guard;
                real_out = state.disc_patch->forward(p.real_next, p.labels_next);
            }
        }
        if (fm_image) {
            fake_feats = concat(std::move(fake_feats), fake_out.features);
            real_feats = concat(std::move(real_feats), real_out.features);
        }

        torch::Tensor video_term = torch::zeros({});
        for (auto& dv : state.disc_video) {
            const auto clips = video_clips(p, fake, dv->rate(), k);
            if (!clips) continue;
            const auto out = dv->forward(clips->fake, clips->labels);
            video_term = video_term + loss::adversarial_g_loss(out.logits, cfg.adversarial);
            if (fm_video) {
                torch::NoGradGuard guard;
                const auto real = dv->forward(clips->real, clips->labels);
                fake_feats = concat(std::move(fake_feats), out.features);
                real_feats = concat(std::move(real_feats), real.features);
            }
        }

        std::vector<torch::Tensor> flows;
        for (const auto& o : p.result.outputs) flows.push_back(o.flow);
        const auto flow_pred = torch::cat(flows, 0);
        const auto t_used = p.clip.length();
        const auto warped_real = warp::bilinear_warp(p.clip.frames.narrow(0, 0, t_used - 1), flow_pred);
        const auto fw = loss::flow_warp_terms(flow_pred, p.clip.flows, warped_real, p.real_next, cfg.weights.flow,
                                              cfg.weights.warp);

        const auto vgg_term = loss::perceptual_loss(fake, p.real_next, extractor, betas);
        const auto alphas = loss::layer_weights(cfg.weights.fm_layers, fake_feats.size(), "loss.fm_layers");
        const auto fm_term = loss::feature_matching_loss(fake_feats, real_feats, alphas);

        const loss::GeneratorTerms terms{image_term, video_term, fw.total(), vgg_term, fm_term};
        const auto total = loss::total_generator_loss(terms, cfg.weights);
        require_finite(cfg.use_oasis ? "g_oasis" : "g_image_adv", image_term);
        require_finite("g_adv", video_term);
        require_finite("flow", fw.flow);
        require_finite("warp", fw.warp);
        require_finite("vgg", vgg_term);
        require_finite("fm", fm_term);
        require_finite("total_g", total);
        (total * inv_batch).backward();

        g_image += image_term.item<double>() * inv_batch;
        g_video += video_term.item<double>() * inv_batch;
        vgg += vgg_term.item<double>() * inv_batch;
        fm += fm_term.item<double>() * inv_batch;
        flow += fw.flow.item<double>() * inv_batch;
        warp_term += fw.warp.item<double>() * inv_batch;
        total_g += total.item<double>() * inv_batch;
    }
    state.opt_g->step();

    if (cfg.use_oasis) {
        report.g_oasis = g_image;
        report.d_oasis = d_image;
    } else {
        report.g_image_adv = g_image;
        report.d_image_adv = d_image;
    }
    report.g_adv = g_video;
    report.d_adv = d_video;
    report.vgg = vgg;
    report.fm = fm;
    report.flow = flow;
    report.warp = warp_term;
    report.total_g = total_g;
    report.total_d = d_image + d_video;
    report.check_finite();

    state.step += 1;
    state.epoch_step += 1;
    return report;
}

void spatial_progression(TrainState& state) {
    auto& old_opt = *state.opt_g;
    state.config.generator = gen::grow_resolution(state.generator);
    auto grown = std::make_unique<torch::optim::Adam>(state.generator->parameters(), adam_options(state.config.schedule));
    for (const auto& [key, param_state] : old_opt.state()) grown->state()[key] = param_state->clone();
    state.opt_g = std::move(grown);
    state.epoch = state.config.schedule.main_epochs() + 1;
    state.epoch_step = 0;
    apply_learning_rate(state);
}

std::string log_record(const TrainState& state, const Stage& stage, const loss::LossReport& report) {
    nlohmann::ordered_json j;
    j["step"] = state.step;
    j["epoch"] = state.epoch;
    j["seq_len"] = stage.seq_len;
    j["lr"] = stage.lr;
    for (const auto& [name, value] : report.fields()) j[name] = value;
    return j.dump();
}

namespace {

std::vector<int64_t> epoch_order(std::uint64_t seed, int64_t epoch, int64_t size) {
    std::vector<int64_t> order(static_cast<size_t>(size));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

}  // namespace

void run_training(TrainState& state, int64_t dataset_size, const SampleSource& source, int64_t until_epoch,
                  int64_t max_steps, std::ostream* log,
                  const std::function<void(const TrainState&, const loss::LossReport&)>& on_step) {
    if (dataset_size < 1) throw ValidationError("training needs at least one sequence");
    const auto per_batch = state.config.batch_sequences;
    const auto steps_per_epoch = state.config.steps_per_epoch > 0
                                     ? state.config.steps_per_epoch
                                     : std::max<int64_t>(1, dataset_size / per_batch);
    until_epoch = std::min(until_epoch, state.config.schedule.total_epochs());
    int64_t taken = 0;
    while (state.epoch <= until_epoch && (max_steps <= 0 || taken < max_steps)) {
        const auto order = epoch_order(state.config.seed, state.epoch, dataset_size);
        std::vector<forge::VideoSample> batch;
        for (int64_t b = 0; b < per_batch; ++b) {
            const auto pos = (state.epoch_step * per_batch + b) % dataset_size;
            batch.push_back(source(order[static_cast<size_t>(pos)]));
        }
        const auto stage = state.stage();
        const auto report = train_step(state, batch);
        if (log) *log << log_record(state, stage, report) << '\n' << std::flush;
        ++taken;
        if (state.epoch_step >= steps_per_epoch) {
            state.epoch += 1;
            state.epoch_step = 0;
        }
        if (on_step) on_step(state, report);
    }
}

}  // namespace svs::train
