#include "svs/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "svs/checkpoint.hpp"
#include "svs/config.hpp"
#include "svs/dataset.hpp"
#include "svs/digest.hpp"
#include "svs/error.hpp"
#include "svs/evaluator.hpp"
#include "svs/image_io.hpp"
#include "svs/scene_forge.hpp"
#include "svs/trainer.hpp"

namespace svs::cli {
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string directory_digest(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::vector<std::string> entries;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        entries.push_back(fs::relative(e.path(), dir).generic_string() + " " + sha256_file(e.path()));
    }
    std::sort(entries.begin(), entries.end());
    std::string joined;
    for (const auto& e : entries) joined += e + "\n";
    return sha256_hex(std::string_view(joined));
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::pair<int, int> parse_size(const std::string& text) {
    const auto x = text.find('x');
    try {
        if (x == std::string::npos) throw std::invalid_argument(text);
        size_t used = 0;
        const int w = std::stoi(text.substr(0, x), &used);
        if (used != x) throw std::invalid_argument(text);
        const auto rest = text.substr(x + 1);
        const int h = std::stoi(rest, &used);
        if (used != rest.size()) throw std::invalid_argument(text);
        return {w, h};
    } catch (const std::logic_error&) {
        throw ValidationError("--size expects WxH, got '" + text + "'");
    }
}

// Output directory assembled under <dir>.partial and renamed at the end.
class StagedDir {
public:
    explicit StagedDir(fs::path target) : target_(std::move(target)) {
        if (fs::exists(target_) && !(fs::is_directory(target_) && fs::is_empty(target_))) {
            throw IoError("output directory exists and is not empty: " + target_.string());
        }
        staging_ = target_;
        staging_ += ".partial";
        fs::remove_all(staging_);
        fs::create_directories(staging_);
    }
    ~StagedDir() {
        if (!committed_) {
            std::error_code ec;
            fs::remove_all(staging_, ec);
        }
    }
    StagedDir(const StagedDir&) = delete;
    StagedDir& operator=(const StagedDir&) = delete;

    const fs::path& path() const { return staging_; }
    void commit() {
        if (fs::exists(target_)) fs::remove(target_);
        if (target_.has_parent_path()) fs::create_directories(target_.parent_path());
        fs::rename(staging_, target_);
        committed_ = true;
    }

private:
    fs::path target_;
    fs::path staging_;
    bool committed_ = false;
};

json input_entry(const fs::path& p) {
    json j;
    j["path"] = p.string();
    j["sha256"] = fs::is_directory(p) ? directory_digest(p) : sha256_file(p);
    return j;
}

json run_manifest(const std::string& command, const std::vector<std::string>& args, const json& inputs) {
    json j;
    j["command"] = command;
    j["args"] = args;
    j["inputs"] = inputs;
    return j;
}

std::vector<forge::VideoSample> load_all(const forge::Dataset& data, int64_t scale) {
    std::vector<forge::VideoSample> out;
    for (size_t i = 0; i < data.size(); ++i) out.push_back(train::upscale_sample(data.load(i), scale));
    return out;
}

// ---- make-data

struct MakeDataArgs {
    std::string out;
    int scenes = 16;
    int frames = 8;
    std::string size = "64x32";
    int classes = 4;
    std::uint64_t seed = 0;
    bool subpixel = false;
};

void cmd_make_data(const MakeDataArgs& a, std::ostream& out) {
    const auto [w, h] = parse_size(a.size);
    if (a.scenes < 1) throw ValidationError("--scenes must be >= 1");
    forge::RandomSceneOptions opts;
    opts.width = w;
    opts.height = h;
    opts.frames = a.frames;
    opts.num_classes = a.classes;
    opts.subpixel = a.subpixel;
    std::vector<forge::VideoSample> samples;
    for (int i = 0; i < a.scenes; ++i) {
        const auto spec = forge::random_scene(opts, mix_seed(a.seed, static_cast<std::uint64_t>(i)));
        samples.push_back(forge::render_scene(spec));
    }
    forge::DatasetManifest manifest;
    manifest.num_classes = a.classes;
    manifest.frames = a.frames;
    manifest.width = w;
    manifest.height = h;
    manifest.sequences = a.scenes;
    manifest.seed = a.seed;
    manifest.palette = forge::class_palette(a.classes);
    forge::write_dataset(samples, a.out, manifest);
    out << "wrote " << a.scenes << " sequences to " << a.out << "\n";
}

// ---- train

struct TrainArgs {
    std::string data;
    std::string config;
    std::string out;
    std::string resume;
    std::string ablation = "full";
    std::vector<std::string> set;
    std::optional<std::uint64_t> seed;
    int64_t epochs = 0;
    int64_t max_steps = 0;
};

cfg::KeyValues parse_sets(const std::vector<std::string>& sets) {
    cfg::KeyValues kv;
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
        kv[s.substr(0, eq)] = s.substr(eq + 1);
    }
    return kv;
}

void apply_ablation(const std::string& ablation, cfg::KeyValues& kv) {
    if (ablation == "full") return;
    if (ablation == "no_oasis") {
        kv["loss.oasis"] = "false";
    } else if (ablation == "no_spade") {
        kv["model.use_spade"] = "false";
    } else {
        throw ConfigError("--ablation must be full, no_oasis or no_spade");
    }
}

void cmd_train(const TrainArgs& a, const std::vector<std::string>& args, std::ostream& out) {
    forge::Dataset data(a.data);
    const auto n = data.manifest().num_classes;

    auto overrides = parse_sets(a.set);
    if (a.seed) overrides["train.seed"] = std::to_string(*a.seed);
    std::optional<fs::path> file;
    if (!a.config.empty()) file = a.config;
    auto kv = cfg::merge(file, std::getenv("SVS_SEED"), overrides);
    apply_ablation(a.ablation, kv);
    if (const auto it = kv.find("model.num_classes"); it == kv.end()) {
        kv["model.num_classes"] = std::to_string(n);
    } else if (it->second != std::to_string(n)) {
        throw ConfigError("model.num_classes = " + it->second + " but the dataset has " + std::to_string(n) + " classes");
    }

    const fs::path out_dir = a.out;
    fs::create_directories(out_dir);
    std::unique_ptr<train::TrainState> state;
    json inputs = json::array({input_entry(a.data)});
    if (file) inputs.push_back(input_entry(*file));
    if (!a.resume.empty()) {
        // Growth is a checkpoint property, not a user setting.
        const auto meta = train::read_checkpoint_meta(a.resume);
        if (!kv.count("model.growth_levels")) kv["model.growth_levels"] = std::to_string(meta.config.generator.growth_levels);
        const auto config = cfg::from_key_values(kv);
        state = train::load_checkpoint(a.resume, config);
        inputs.push_back(input_entry(a.resume));
    } else {
        state = std::make_unique<train::TrainState>(cfg::from_key_values(kv));
    }
    const auto& config = state->config;
    if (config.generator.size_unit() > 0) {
        const auto unit = int64_t{1} << config.generator.levels;
        if (data.manifest().width % unit != 0 || data.manifest().height % unit != 0) {
            throw ConfigError("dataset size must be divisible by " + std::to_string(unit));
        }
    }

    const auto resolved = cfg::to_text(cfg::to_key_values(config));
    io::write_file_atomic(out_dir / "config.resolved", resolved);
    io::write_file_atomic(out_dir / "run.json", run_manifest("train", args, inputs).dump(2) + "\n");

    const auto& sched = config.schedule;
    int64_t until = state->epoch <= sched.main_epochs() ? sched.main_epochs() : sched.total_epochs();
    if (a.epochs > 0) until = std::min<int64_t>(until, a.epochs);

    std::ofstream log(out_dir / "train_log.jsonl", a.resume.empty() ? std::ios::trunc : std::ios::app);
    if (!log) throw IoError("cannot open " + (out_dir / "train_log.jsonl").string());
    const train::SampleSource source = [&](int64_t i) { return data.load(static_cast<size_t>(i)); };
    train::run_training(*state, static_cast<int64_t>(data.size()), source, until, a.max_steps, &log);
    train::save_checkpoint(*state, out_dir / "checkpoint.pt");
    out << "trained to step " << state->step << " (epoch " << state->epoch << "), checkpoint "
        << (out_dir / "checkpoint.pt").string() << "\n";
}

// ---- generate

struct GenerateArgs {
    std::string ckpt;
    std::string ref;
    std::string maps;
    std::string out;
    int64_t frames = 0;
    std::uint64_t seed = 0;
    bool debug = false;
};

io::Image8 occlusion_gray(const torch::Tensor& occ) {
    const auto o = occ.squeeze(0).clamp(0.0, 1.0).mul(255.0).round().to(torch::kUInt8).contiguous();
    io::Image8 img;
    img.height = static_cast<int>(o.size(0));
    img.width = static_cast<int>(o.size(1));
    img.channels = 1;
    img.pixels.assign(o.data_ptr<std::uint8_t>(), o.data_ptr<std::uint8_t>() + o.numel());
    return img;
}

void cmd_generate(const GenerateArgs& a, const std::vector<std::string>& args, std::ostream& out) {
    if (a.frames < 2) throw ValidationError("--frames must be >= 2");
    auto state = train::load_checkpoint(a.ckpt);
    auto& g = state->generator;
    const auto ref_bytes = io::read_file(a.ref);
    const auto ref = io::image_to_frame(io::decode_png(ref_bytes, a.ref)).unsqueeze(0);
    std::vector<torch::Tensor> maps;
    for (int t = 0; t < a.frames; ++t) {
        const auto p = fs::path(a.maps) / forge::numbered("sem", t, ".png");
        if (!fs::exists(p)) throw IoError("missing label map " + p.string());
        auto labels = io::image_to_labels(io::read_png(p));
        if (labels.size(0) != ref.size(2) || labels.size(1) != ref.size(3)) {
            throw DimensionError("label map " + p.string() + " does not match the reference frame size");
        }
        maps.push_back(labels.unsqueeze(0));
    }

    StagedDir staged(a.out);
    io::write_file_atomic(staged.path() / forge::numbered("frame", 0, ".png"), ref_bytes.data(), ref_bytes.size());
    g->eval();
    torch::NoGradGuard guard;
    const auto noise_rng = at::make_generator<at::CPUGeneratorImpl>(a.seed);
    const auto noise_dim = g->config().noise_dim;
    auto prev = ref;
    for (int t = 1; t < a.frames; ++t) {
        std::optional<torch::Tensor> noise;
        if (noise_dim > 0) noise = torch::randn({1, noise_dim}, noise_rng);
        const auto o = g->forward(prev, maps[static_cast<size_t>(t - 1)], maps[static_cast<size_t>(t)], noise);
        io::write_png(staged.path() / forge::numbered("frame", t, ".png"), io::frame_to_image(o.frame[0]));
        if (a.debug) {
            io::write_flo(staged.path() / forge::numbered("flow", t, ".flo"), o.flow[0]);
            io::write_png(staged.path() / forge::numbered("occ", t, ".png"), occlusion_gray(o.occlusion[0]));
        }
        prev = o.frame;
    }
    json inputs = json::array({input_entry(a.ckpt), input_entry(a.ref), input_entry(a.maps)});
    io::write_file_atomic(staged.path() / "run.json", run_manifest("generate", args, inputs).dump(2) + "\n");
    staged.commit();
    out << "wrote " << a.frames << " frames to " << a.out << "\n";
}

// ---- eval

struct EvalArgs {
    std::string ckpt;
    std::string data;
    std::string metrics = "fid,fvd,miou";
    std::string report;
    std::uint64_t seed = 0;
    int64_t segmenter_steps = 600;
};

void cmd_eval(const EvalArgs& a, const std::vector<std::string>& args, std::ostream& out) {
    std::vector<std::string> metrics;
    {
        std::istringstream in(a.metrics);
        std::string m;
        while (std::getline(in, m, ',')) {
            if (m != "fid" && m != "fvd" && m != "miou") throw ValidationError("unknown metric '" + m + "'");
            metrics.push_back(m);
        }
    }
    if (metrics.empty()) throw ValidationError("--metrics is empty");
    const auto wants = [&](const char* m) { return std::find(metrics.begin(), metrics.end(), m) != metrics.end(); };

    auto state = train::load_checkpoint(a.ckpt);
    forge::Dataset data(a.data);
    if (data.manifest().num_classes != state->config.generator.num_classes) {
        throw ConfigError("dataset and checkpoint disagree on num_classes");
    }
    const auto samples = load_all(data, state->data_scale());
    const auto generated = eval::generate_sequences(state->generator, samples);

    json report;
    if (wants("fid") || wants("fvd")) {
        std::vector<torch::Tensor> real_frames, fake_frames, real_clips, fake_clips;
        for (size_t i = 0; i < samples.size(); ++i) {
            const auto length = samples[i].length();
            real_frames.push_back(samples[i].frames.narrow(0, 1, length - 1));
            fake_frames.push_back(generated[i].narrow(0, 1, length - 1));
            if (wants("fvd")) {
                real_clips.push_back(eval::sequence_clips(samples[i].frames));
                fake_clips.push_back(eval::sequence_clips(generated[i]));
            }
        }
        if (wants("fid")) {
            auto extractor = nn::make_frame_extractor(a.seed);
            report["fid"] = eval::fid(torch::cat(real_frames), torch::cat(fake_frames), extractor);
        }
        if (wants("fvd")) {
            auto extractor = nn::make_clip_extractor(a.seed);
            report["fvd"] = eval::fvd(torch::cat(real_clips), torch::cat(fake_clips), extractor);
        }
    }
    if (wants("miou")) {
        eval::SegmenterOptions opts;
        opts.seed = a.seed;
        opts.max_steps = a.segmenter_steps;
        auto seg = eval::train_eval_segmenter(samples, state->config.generator.num_classes, opts);
        const auto r = eval::generated_miou(state->generator, seg.net, samples);
        report["miou"] = r.miou;
        json per_class = json::array();
        for (const auto& c : r.per_class) per_class.push_back(c ? json(*c) : json(nullptr));
        report["per_class_iou"] = per_class;
        report["segmenter"] = {{"held_out_miou", seg.held_out_miou}, {"steps", seg.steps}, {"sha256", seg.digest}};
    }
    report["config_digest"] = sha256_hex(std::string_view(cfg::to_text(cfg::to_key_values(state->config))));
    report["dataset_digest"] = directory_digest(a.data);
    report["checkpoint_digest"] = sha256_file(a.ckpt);
    report["seed"] = a.seed;
    report["note"] = "features come from fixed-seed random extractors; values are not comparable to published FID/FVD";
    report["run"] = run_manifest("eval", args, json::array({input_entry(a.ckpt), input_entry(a.data)}));
    const fs::path report_path = a.report;
    if (report_path.has_parent_path()) fs::create_directories(report_path.parent_path());
    io::write_file_atomic(report_path, report.dump(2) + "\n");
    out << "wrote " << a.report << "\n";
}

// ---- grow

void cmd_grow(const std::string& in, const std::string& out_path, std::ostream& out) {
    auto state = train::load_checkpoint(in);
    train::spatial_progression(*state);
    train::save_checkpoint(*state, out_path);
    out << "grew generator to " << state->config.generator.growth_levels << " extra level(s); epoch " << state->epoch
        << "\n";
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"svsgan: semantic video synthesis with warped-frame guidance", "svsgan"};
    app.require_subcommand(1);

    MakeDataArgs md;
    auto* make_data = app.add_subcommand("make-data", "render a synthetic dataset of moving shapes");
    make_data->add_option("--out", md.out, "output dataset directory (must not exist or be empty)")->required();
    make_data->add_option("--scenes", md.scenes, "number of sequences")->capture_default_str();
    make_data->add_option("--frames", md.frames, "frames per sequence")->capture_default_str();
    make_data->add_option("--size", md.size, "frame size WxH")->capture_default_str();
    make_data->add_option("--classes", md.classes, "semantic classes including background")->capture_default_str();
    make_data->add_option("--seed", md.seed, "scene seed")->capture_default_str();
    make_data->add_flag("--subpixel", md.subpixel, "quarter-pixel velocities instead of integer ones");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "train the generator and discriminators");
    train_cmd->add_option("--data", tr.data, "dataset directory")->required();
    train_cmd->add_option("--config", tr.config, "flat key = value config file");
    train_cmd->add_option("--out", tr.out, "run directory (log, checkpoint, resolved config)")->required();
    train_cmd->add_option("--resume", tr.resume, "checkpoint to resume from");
    train_cmd->add_option("--ablation", tr.ablation, "full, no_oasis or no_spade")
        ->check(CLI::IsMember({"full", "no_oasis", "no_spade"}))
        ->capture_default_str();
    train_cmd->add_option("--set", tr.set, "config override key=value (repeatable)");
    train_cmd->add_option("--seed", tr.seed, "seed override (wins over SVS_SEED and the config file)");
    train_cmd->add_option("--epochs", tr.epochs, "stop after this epoch (0: end of the current phase)");
    train_cmd->add_option("--max-steps", tr.max_steps, "stop after this many steps (0: unlimited)");
    {
        std::string keys = "Config keys:\n";
        for (const auto& k : cfg::schema()) keys += "  " + k.key + "  " + k.description + "\n";
        train_cmd->footer(keys);
    }

    GenerateArgs ga;
    auto* generate = app.add_subcommand("generate", "autoregressive inference from a reference frame");
    generate->add_option("--ckpt", ga.ckpt, "checkpoint")->required();
    generate->add_option("--ref", ga.ref, "reference frame (PNG)")->required();
    generate->add_option("--maps", ga.maps, "directory with sem_%04d.png label maps")->required();
    generate->add_option("--out", ga.out, "output directory")->required();
    generate->add_option("--frames", ga.frames, "frames including the reference")->required();
    generate->add_option("--seed", ga.seed, "noise seed")->capture_default_str();
    generate->add_flag("--debug", ga.debug, "also write flow_%04d.flo and occ_%04d.png sidecars");

    EvalArgs ea;
    auto* eval_cmd = app.add_subcommand("eval", "FID, FVD and MIoU of generated sequences");
    eval_cmd->add_option("--ckpt", ea.ckpt, "checkpoint")->required();
    eval_cmd->add_option("--data", ea.data, "dataset directory")->required();
    eval_cmd->add_option("--metrics", ea.metrics, "comma-separated subset of fid,fvd,miou")->capture_default_str();
    eval_cmd->add_option("--report", ea.report, "report.json path")->required();
    eval_cmd->add_option("--seed", ea.seed, "extractor and segmenter seed")->capture_default_str();
    eval_cmd->add_option("--segmenter-steps", ea.segmenter_steps, "maximum segmenter training steps")
        ->capture_default_str();

    std::string grow_in;
    std::string grow_out;
    auto* grow = app.add_subcommand("grow", "append a decoder level for twice the resolution");
    grow->add_option("--ckpt", grow_in, "input checkpoint")->required();
    grow->add_option("--out", grow_out, "output checkpoint")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        err << "svsgan: error: " << one_line(e.what()) << "\n";
        return 2;
    }

    try {
        if (*make_data) cmd_make_data(md, out);
        else if (*train_cmd) cmd_train(tr, args, out);
        else if (*generate) cmd_generate(ga, args, out);
        else if (*eval_cmd) cmd_eval(ea, args, out);
        else if (*grow) cmd_grow(grow_in, grow_out, out);
        return 0;
    } catch (const Error& e) {
        err << "svsgan: error: " << one_line(e.what()) << "\n";
        return e.exit_code();
    } catch (const fs::filesystem_error& e) {
        err << "svsgan: error: " << one_line(e.what()) << "\n";
        return 3;
    } catch (const c10::Error& e) {
        err << "svsgan: error: " << one_line(e.what_without_backtrace()) << "\n";
        return 2;
    }
}

}  // namespace svs::cli
