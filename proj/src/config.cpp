#include "svs/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

#include "svs/error.hpp"
#include "svs/image_io.hpp"

namespace svs::cfg {

const std::vector<KeyDoc>& schema() {
    static const std::vector<KeyDoc> keys{
        {"model.num_classes", "semantic classes N including background"},
        {"model.levels", "generator pyramid levels below full resolution"},
        {"model.base_channels", "generator width at full resolution"},
        {"model.channel_cap", "maximum generator width"},
        {"model.flow_net_blocks", "residual blocks at the flow-net bottleneck"},
        {"model.spade_hidden", "hidden width of the SPADE modulation convs"},
        {"model.spectral_norm", "spectral normalization in the generator"},
        {"model.noise_dim", "latent noise channels broadcast at the bottleneck (0: none)"},
        {"model.use_spade", "SPADE decoder; false concatenates labels to the image encoder"},
        {"model.growth_levels", "decoder levels appended by spatial growth"},
        {"model.d_levels", "image discriminator depth"},
        {"model.d_base_channels", "discriminator width at full resolution"},
        {"model.d_channel_cap", "maximum discriminator width"},
        {"model.d_spectral_norm", "spectral normalization in the discriminators"},
        {"model.dv_frames", "frames K per video-discriminator window"},
        {"model.dv_rates", "temporal subsampling rates, one video discriminator each"},
        {"model.dv_levels", "patch levels of each video discriminator"},
        {"loss.vgg", "perceptual loss weight"},
        {"loss.fm", "feature-matching loss weight"},
        {"loss.flow", "flow loss weight"},
        {"loss.warp", "warp loss weight"},
        {"loss.perceptual_layers", "per-stage perceptual weights (empty: uniform)"},
        {"loss.fm_layers", "per-layer feature-matching weights (empty: uniform)"},
        {"loss.oasis", "segmentation discriminator with the N+1-class objective"},
        {"loss.adversarial", "video adversarial objective: hinge or saturating"},
        {"loss.fm_source", "discriminators used for feature matching: both, image or video"},
        {"train.seed", "seed of initialization, sampling and noise"},
        {"train.detach", "rollout gradient policy: detach or full"},
        {"train.steps_per_epoch", "optimizer steps per epoch (0: one pass over the data)"},
        {"train.batch_sequences", "sequences accumulated per optimizer step"},
        {"train.extractor_seed", "seed of the frozen perceptual extractor"},
        {"schedule.ramp", "sequence-length ramp as start_epoch:length pairs"},
        {"schedule.constant_epochs", "epochs at the base learning rate"},
        {"schedule.decay_epochs", "epochs of linear learning-rate decay to zero"},
        {"schedule.post_growth_epochs", "epochs after spatial growth"},
        {"schedule.post_growth_step", "epochs per ramp stage after growth"},
        {"schedule.base_lr", "Adam learning rate"},
        {"schedule.beta1", "Adam beta1"},
        {"schedule.beta2", "Adam beta2"},
        {"data.random_crop", "random temporal crop when samples exceed the scheduled length"},
    };
    return keys;
}

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

bool known_key(const std::string& key) {
    for (const auto& k : schema())
        if (k.key == key) return true;
    return false;
}

std::string fmt_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string fmt_bool(bool v) { return v ? "true" : "false"; }

template <class T>
std::string join(const std::vector<T>& values, const std::function<std::string(const T&)>& fmt) {
    std::string out;
    for (size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + fmt(values[i]);
    return out;
}

int64_t parse_int(const std::string& key, const std::string& v) {
    int64_t out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    }
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out)) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> split(const std::string& v, char sep) {
    std::vector<std::string> out;
    if (trim(v).empty()) return out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    return out;
}

}  // namespace

KeyValues parse_text(std::string_view text, const std::string& origin) {
    KeyValues out;
    std::istringstream in{std::string(text)};
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        const auto body = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(number) + ": expected 'key = value'");
        }
        const auto key = trim(body.substr(0, eq));
        if (!known_key(key)) throw ConfigError(origin + ":" + std::to_string(number) + ": unknown key '" + key + "'");
        out[key] = trim(body.substr(eq + 1));
    }
    return out;
}

KeyValues read_file(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    return parse_text(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), path.string());
}

std::string to_text(const KeyValues& values) {
    std::string out;
    for (const auto& [k, v] : values) out += k + " = " + v + "\n";
    return out;
}

KeyValues to_key_values(const train::TrainConfig& c) {
    const std::function<std::string(const double&)> dbl = [](const double& v) { return fmt_double(v); };
    const std::function<std::string(const int64_t&)> integer = [](const int64_t& v) { return std::to_string(v); };
    const std::function<std::string(const train::StageBoundary&)> stage = [](const train::StageBoundary& b) {
        return std::to_string(b.start_epoch) + ":" + std::to_string(b.seq_len);
    };
    const auto& g = c.generator;
    KeyValues kv;
    kv["model.num_classes"] = std::to_string(g.num_classes);
    kv["model.levels"] = std::to_string(g.levels);
    kv["model.base_channels"] = std::to_string(g.base_channels);
    kv["model.channel_cap"] = std::to_string(g.channel_cap);
    kv["model.flow_net_blocks"] = std::to_string(g.flow_net_blocks);
    kv["model.spade_hidden"] = std::to_string(g.spade_hidden);
    kv["model.spectral_norm"] = fmt_bool(g.spectral_norm);
    kv["model.noise_dim"] = std::to_string(g.noise_dim);
    kv["model.use_spade"] = fmt_bool(g.use_spade);
    kv["model.growth_levels"] = std::to_string(g.growth_levels);
    kv["model.d_levels"] = std::to_string(c.disc_image.levels);
    kv["model.d_base_channels"] = std::to_string(c.disc_image.base_channels);
    kv["model.d_channel_cap"] = std::to_string(c.disc_image.channel_cap);
    kv["model.d_spectral_norm"] = fmt_bool(c.disc_image.spectral_norm);
    kv["model.dv_frames"] = std::to_string(c.disc_video.frames_per_window);
    kv["model.dv_rates"] = join(c.disc_video.temporal_rates, integer);
    kv["model.dv_levels"] = std::to_string(c.disc_video.patch_levels);
    kv["loss.vgg"] = fmt_double(c.weights.vgg);
    kv["loss.fm"] = fmt_double(c.weights.fm);
    kv["loss.flow"] = fmt_double(c.weights.flow);
    kv["loss.warp"] = fmt_double(c.weights.warp);
    kv["loss.perceptual_layers"] = join(c.weights.perceptual_layers, dbl);
    kv["loss.fm_layers"] = join(c.weights.fm_layers, dbl);
    kv["loss.oasis"] = fmt_bool(c.use_oasis);
    kv["loss.adversarial"] = c.adversarial == loss::AdvObjective::Hinge ? "hinge" : "saturating";
    kv["loss.fm_source"] = c.fm_source == train::FeatureMatchSource::Both    ? "both"
                           : c.fm_source == train::FeatureMatchSource::Image ? "image"
                                                                             : "video";
    kv["train.seed"] = std::to_string(c.seed);
    kv["train.detach"] = c.detach == train::DetachPolicy::Detach ? "detach" : "full";
    kv["train.steps_per_epoch"] = std::to_string(c.steps_per_epoch);
    kv["train.batch_sequences"] = std::to_string(c.batch_sequences);
    kv["train.extractor_seed"] = std::to_string(c.extractor_seed);
    kv["schedule.ramp"] = join(c.schedule.ramp, stage);
    kv["schedule.constant_epochs"] = std::to_string(c.schedule.constant_epochs);
    kv["schedule.decay_epochs"] = std::to_string(c.schedule.decay_epochs);
    kv["schedule.post_growth_epochs"] = std::to_string(c.schedule.post_growth_epochs);
    kv["schedule.post_growth_step"] = std::to_string(c.schedule.post_growth_step);
    kv["schedule.base_lr"] = fmt_double(c.schedule.base_lr);
    kv["schedule.beta1"] = fmt_double(c.schedule.beta1);
    kv["schedule.beta2"] = fmt_double(c.schedule.beta2);
    kv["data.random_crop"] = fmt_bool(c.random_crop);
    return kv;
}

train::TrainConfig from_key_values(const KeyValues& values, const train::TrainConfig& base) {
    train::TrainConfig c = base;
    for (const auto& [key, v] : values) {
        auto& g = c.generator;
        if (key == "model.num_classes") {
            g.num_classes = parse_int(key, v);
            c.disc_image.num_classes = g.num_classes;
            c.disc_video.num_classes = g.num_classes;
        } else if (key == "model.levels") g.levels = parse_int(key, v);
        else if (key == "model.base_channels") g.base_channels = parse_int(key, v);
        else if (key == "model.channel_cap") g.channel_cap = parse_int(key, v);
        else if (key == "model.flow_net_blocks") g.flow_net_blocks = parse_int(key, v);
        else if (key == "model.spade_hidden") g.spade_hidden = parse_int(key, v);
        else if (key == "model.spectral_norm") g.spectral_norm = parse_bool(key, v);
        else if (key == "model.noise_dim") g.noise_dim = parse_int(key, v);
        else if (key == "model.use_spade") g.use_spade = parse_bool(key, v);
        else if (key == "model.growth_levels") g.growth_levels = parse_int(key, v);
        else if (key == "model.d_levels") c.disc_image.levels = parse_int(key, v);
        else if (key == "model.d_base_channels") {
            c.disc_image.base_channels = parse_int(key, v);
            c.disc_video.base_channels = c.disc_image.base_channels;
        } else if (key == "model.d_channel_cap") {
            c.disc_image.channel_cap = parse_int(key, v);
            c.disc_video.channel_cap = c.disc_image.channel_cap;
        } else if (key == "model.d_spectral_norm") {
            c.disc_image.spectral_norm = parse_bool(key, v);
            c.disc_video.spectral_norm = c.disc_image.spectral_norm;
        } else if (key == "model.dv_frames") c.disc_video.frames_per_window = parse_int(key, v);
        else if (key == "model.dv_rates") {
            c.disc_video.temporal_rates.clear();
            for (const auto& item : split(v, ',')) c.disc_video.temporal_rates.push_back(parse_int(key, item));
        } else if (key == "model.dv_levels") c.disc_video.patch_levels = parse_int(key, v);
        else if (key == "loss.vgg") c.weights.vgg = parse_double(key, v);
        else if (key == "loss.fm") c.weights.fm = parse_double(key, v);
        else if (key == "loss.flow") c.weights.flow = parse_double(key, v);
        else if (key == "loss.warp") c.weights.warp = parse_double(key, v);
        else if (key == "loss.perceptual_layers" || key == "loss.fm_layers") {
            auto& list = key == "loss.fm_layers" ? c.weights.fm_layers : c.weights.perceptual_layers;
            list.clear();
            for (const auto& item : split(v, ',')) list.push_back(parse_double(key, item));
        } else if (key == "loss.oasis") c.use_oasis = parse_bool(key, v);
        else if (key == "loss.adversarial") {
            if (v == "hinge") c.adversarial = loss::AdvObjective::Hinge;
            else if (v == "saturating") c.adversarial = loss::AdvObjective::Saturating;
            else throw ConfigError(key + ": expected hinge or saturating, got '" + v + "'");
        } else if (key == "loss.fm_source") {
            if (v == "both") c.fm_source = train::FeatureMatchSource::Both;
            else if (v == "image") c.fm_source = train::FeatureMatchSource::Image;
            else if (v == "video") c.fm_source = train::FeatureMatchSource::Video;
            else throw ConfigError(key + ": expected both, image or video, got '" + v + "'");
        } else if (key == "train.seed") c.seed = parse_u64(key, v);
        else if (key == "train.detach") {
            if (v == "detach") c.detach = train::DetachPolicy::Detach;
            else if (v == "full") c.detach = train::DetachPolicy::FullBackprop;
            else throw ConfigError(key + ": expected detach or full, got '" + v + "'");
        } else if (key == "train.steps_per_epoch") c.steps_per_epoch = parse_int(key, v);
        else if (key == "train.batch_sequences") c.batch_sequences = parse_int(key, v);
        else if (key == "train.extractor_seed") c.extractor_seed = parse_u64(key, v);
        else if (key == "schedule.ramp") {
            c.schedule.ramp.clear();
            for (const auto& item : split(v, ',')) {
                const auto colon = item.find(':');
                if (colon == std::string::npos) throw ConfigError(key + ": expected start:length, got '" + item + "'");
                c.schedule.ramp.push_back({parse_int(key, trim(item.substr(0, colon))), parse_int(key, trim(item.substr(colon + 1)))});
            }
        } else if (key == "schedule.constant_epochs") c.schedule.constant_epochs = parse_int(key, v);
        else if (key == "schedule.decay_epochs") c.schedule.decay_epochs = parse_int(key, v);
        else if (key == "schedule.post_growth_epochs") c.schedule.post_growth_epochs = parse_int(key, v);
        else if (key == "schedule.post_growth_step") c.schedule.post_growth_step = parse_int(key, v);
        else if (key == "schedule.base_lr") c.schedule.base_lr = parse_double(key, v);
        else if (key == "schedule.beta1") c.schedule.beta1 = parse_double(key, v);
        else if (key == "schedule.beta2") c.schedule.beta2 = parse_double(key, v);
        else if (key == "data.random_crop") c.random_crop = parse_bool(key, v);
        else throw ConfigError("unknown configuration key '" + key + "'");
    }
    train::validate(c);
    return c;
}

KeyValues merge(const std::optional<std::filesystem::path>& file, const char* env_seed, const KeyValues& overrides) {
    KeyValues out;
    if (file) out = read_file(*file);
    if (env_seed != nullptr && *env_seed != '\0') {
        parse_u64("SVS_SEED", env_seed);
        out["train.seed"] = env_seed;
    }
    for (const auto& [k, v] : overrides) {
        if (!known_key(k)) throw ConfigError("unknown key '" + k + "'");
        out[k] = v;
    }
    return out;
}

}  // namespace svs::cfg
