#include "svs/checkpoint.hpp"

#include <cstring>
#include <sstream>

#include <json.hpp>

#include "svs/config.hpp"
#include "svs/digest.hpp"
#include "svs/error.hpp"
#include "svs/image_io.hpp"

namespace svs::train {
namespace {

torch::Tensor text_tensor(const std::string& text) {
    auto t = torch::empty({static_cast<int64_t>(text.size())}, torch::kUInt8);
    std::memcpy(t.data_ptr(), text.data(), text.size());
    return t;
}

std::string tensor_text(const torch::Tensor& t) {
    const auto c = t.contiguous();
    return std::string(static_cast<const char*>(c.data_ptr()), static_cast<size_t>(c.numel()));
}

void save_module(torch::serialize::OutputArchive& archive, const std::string& key, const torch::nn::Module& module) {
    torch::serialize::OutputArchive sub;
    module.save(sub);
    archive.write(key, sub);
}

void load_module(torch::serialize::InputArchive& archive, const std::string& key, torch::nn::Module& module) {
    torch::serialize::InputArchive sub;
    archive.read(key, sub);
    module.load(sub);
}

torch::serialize::InputArchive open_archive(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
    const auto bytes = io::read_file(path);
    std::istringstream in(std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    torch::serialize::InputArchive archive;
    try {
        archive.load_from(in);
    } catch (const c10::Error& e) {
        throw IoError("cannot read checkpoint " + path.string() + ": not a checkpoint archive");
    }
    return archive;
}

CheckpointMeta read_meta(torch::serialize::InputArchive& archive, const std::filesystem::path& path) {
    CheckpointMeta meta;
    torch::Tensor config_text;
    torch::Tensor counters;
    try {
        archive.read("meta_config", config_text);
        archive.read("meta_counters", counters);
    } catch (const c10::Error&) {
        throw IoError("checkpoint " + path.string() + " lacks its metadata");
    }
    const auto text = tensor_text(config_text);
    meta.config = cfg::from_key_values(cfg::parse_text(text, path.string() + ":config"));
    meta.epoch = counters[0].item<int64_t>();
    meta.step = counters[1].item<int64_t>();
    meta.epoch_step = counters[2].item<int64_t>();
    return meta;
}

std::unique_ptr<TrainState> restore(torch::serialize::InputArchive& archive, const CheckpointMeta& meta,
                                    const std::filesystem::path& path) {
    auto state = std::make_unique<TrainState>(meta.config);
    try {
        load_module(archive, "generator", *state->generator);
        if (state->disc_image) load_module(archive, "disc_image", *state->disc_image);
        if (state->disc_patch) load_module(archive, "disc_patch", *state->disc_patch);
        for (size_t i = 0; i < state->disc_video.size(); ++i) {
            load_module(archive, "disc_video_" + std::to_string(i), *state->disc_video[i]);
        }
        torch::serialize::InputArchive opt_g;
        archive.read("opt_g", opt_g);
        state->opt_g->load(opt_g);
        torch::serialize::InputArchive opt_d;
        archive.read("opt_d", opt_d);
        state->opt_d->load(opt_d);
        torch::Tensor sampler;
        archive.read("meta_sampler", sampler);
        std::istringstream in(tensor_text(sampler));
        in >> state->sampler;
        torch::Tensor noise;
        archive.read("meta_noise_rng", noise);
        state->noise_rng.set_state(noise);
    } catch (const c10::Error& e) {
        throw IoError("checkpoint " + path.string() + " does not match its configuration");
    }
    state->epoch = meta.epoch;
    state->step = meta.step;
    state->epoch_step = meta.epoch_step;
    return state;
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
    auto p = checkpoint;
    return p.replace_extension(".json");
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
    torch::serialize::OutputArchive archive;
    save_module(archive, "generator", *state.generator);
    if (state.disc_image) save_module(archive, "disc_image", *state.disc_image);
    if (state.disc_patch) save_module(archive, "disc_patch", *state.disc_patch);
    for (size_t i = 0; i < state.disc_video.size(); ++i) {
        save_module(archive, "disc_video_" + std::to_string(i), *state.disc_video[i]);
    }
    torch::serialize::OutputArchive opt_g;
    state.opt_g->save(opt_g);
    archive.write("opt_g", opt_g);
    torch::serialize::OutputArchive opt_d;
    state.opt_d->save(opt_d);
    archive.write("opt_d", opt_d);

    const auto config_text = cfg::to_text(cfg::to_key_values(state.config));
    archive.write("meta_config", text_tensor(config_text));
    archive.write("meta_counters", torch::tensor({state.epoch, state.step, state.epoch_step}, torch::kLong));
    std::ostringstream sampler;
    sampler << state.sampler;
    archive.write("meta_sampler", text_tensor(sampler.str()));
    archive.write("meta_noise_rng", state.noise_rng.get_state());

    std::ostringstream out;
    archive.save_to(out);
    const auto bytes = out.str();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    io::write_file_atomic(path, bytes);

    nlohmann::ordered_json side;
    side["epoch"] = state.epoch;
    side["step"] = state.step;
    side["epoch_step"] = state.epoch_step;
    const auto stage = state.stage();
    side["stage"] = {{"seq_len", stage.seq_len}, {"lr", stage.lr}, {"post_growth_epoch", stage.post_growth_epoch}};
    side["rng_sha256"] = sha256_hex(std::string_view(sampler.str() + tensor_text(state.noise_rng.get_state())));
    side["archive_sha256"] = sha256_hex(std::string_view(bytes));
    side["generator_sha256"] = module_digest(*state.generator);
    side["config"] = cfg::to_key_values(state.config);
    io::write_file_atomic(sidecar_path(path), side.dump(2) + "\n");
}

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path) {
    auto archive = open_archive(path);
    return read_meta(archive, path);
}

std::unique_ptr<TrainState> load_checkpoint(const std::filesystem::path& path) {
    auto archive = open_archive(path);
    const auto meta = read_meta(archive, path);
    return restore(archive, meta, path);
}

std::unique_ptr<TrainState> load_checkpoint(const std::filesystem::path& path, const TrainConfig& expected) {
    auto archive = open_archive(path);
    const auto meta = read_meta(archive, path);
    if (!(meta.config == expected)) {
        const auto stored = cfg::to_key_values(meta.config);
        const auto wanted = cfg::to_key_values(expected);
        std::string diff;
        for (const auto& [k, v] : wanted) {
            const auto it = stored.find(k);
            if (it == stored.end() || it->second != v) {
                diff = k + " (checkpoint " + (it == stored.end() ? std::string("unset") : it->second) + ", requested " + v + ")";
                break;
            }
        }
        throw ConfigError("checkpoint " + path.string() + " was written with a different configuration: " + diff);
    }
    return restore(archive, meta, path);
}

}  // namespace svs::train
