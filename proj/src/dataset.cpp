#include "svs/dataset.hpp"

#include <cstdio>

#include <json.hpp>

#include "svs/error.hpp"
#include "svs/image_io.hpp"

namespace svs::forge {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json manifest_to_json(const DatasetManifest& m) {
    json palette = json::array();
    for (const auto& c : m.palette) palette.push_back({c[0], c[1], c[2]});
    return json{{"num_classes", m.num_classes}, {"frames", m.frames},   {"width", m.width},
                {"height", m.height},           {"sequences", m.sequences}, {"seed", m.seed},
                {"palette", palette},           {"frame_encoding", "byte = round(127.5 * (v + 1))"}};
}

DatasetManifest manifest_from_json(const json& j, const std::string& name) {
    DatasetManifest m;
    try {
        m.num_classes = j.at("num_classes").get<int>();
        m.frames = j.at("frames").get<int>();
        m.width = j.at("width").get<int>();
        m.height = j.at("height").get<int>();
        m.sequences = j.at("sequences").get<int>();
        m.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& c : j.at("palette")) m.palette.push_back({c.at(0).get<float>(), c.at(1).get<float>(), c.at(2).get<float>()});
    } catch (const json::exception& e) {
        throw ValidationError("malformed manifest " + name + ": " + e.what());
    }
    if (m.num_classes < 2 || m.frames < 2 || m.width < 1 || m.height < 1 || m.sequences < 0) {
        throw ValidationError("manifest " + name + " has out-of-range fields");
    }
    if (static_cast<int>(m.palette.size()) != m.num_classes) {
        throw ValidationError("manifest " + name + ": palette size does not match num_classes");
    }
    return m;
}

void expect_dims(const io::Image8& img, const DatasetManifest& m, const fs::path& path) {
    if (img.width != m.width || img.height != m.height) {
        throw ValidationError(path.string() + ": dimensions differ from manifest");
    }
}

}  // namespace

std::string numbered(const std::string& prefix, int index, const std::string& extension) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%04d%s", prefix.c_str(), index, extension.c_str());
    return buf;
}

std::string sequence_dir_name(std::size_t index) { return numbered("seq", static_cast<int>(index), ""); }

void write_dataset(const std::vector<VideoSample>& samples, const fs::path& dir, const DatasetManifest& manifest) {
    if (static_cast<int>(samples.size()) != manifest.sequences) {
        throw ValidationError("manifest sequence count does not match the sample list");
    }
    for (const auto& s : samples) {
        check_sample(s, manifest.num_classes);
        if (s.length() != manifest.frames || s.width() != manifest.width || s.height() != manifest.height) {
            throw ValidationError("sample shape does not match the manifest");
        }
    }
    std::error_code ec;
    if (fs::exists(dir) && !fs::is_empty(dir, ec)) throw IoError("refusing to overwrite non-empty directory " + dir.string());

    auto staging = dir;
    staging += ".partial";
    fs::remove_all(staging, ec);
    if (!fs::create_directories(staging, ec) && ec) throw IoError("cannot create " + staging.string());

    for (size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        const auto seq = staging / sequence_dir_name(i);
        fs::create_directories(seq, ec);
        if (ec) throw IoError("cannot create " + seq.string());
        for (int t = 0; t < s.length(); ++t) {
            io::write_png(seq / numbered("frame", t, ".png"), io::frame_to_image(s.frames[t]));
            io::write_png(seq / numbered("sem", t, ".png"), io::labels_to_image(s.semantic[t]));
            if (t >= 1) {
                io::write_flo(seq / numbered("flow", t, ".flo"), s.flows[t - 1]);
                io::write_png(seq / numbered("occ", t, ".png"), io::occlusion_to_image(s.occlusions[t - 1]));
            }
        }
    }
    io::write_file_atomic(staging / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");

    if (fs::exists(dir)) fs::remove(dir, ec);
    fs::rename(staging, dir, ec);
    if (ec) throw IoError("cannot move dataset into " + dir.string() + ": " + ec.message());
}

Dataset::Dataset(fs::path dir) : dir_(std::move(dir)) {
    const auto path = dir_ / "manifest.json";
    const auto bytes = io::read_file(path);
    json j;
    try {
        j = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw IoError("corrupt manifest " + path.string() + ": " + e.what());
    }
    manifest_ = manifest_from_json(j, path.string());
}

VideoSample Dataset::load(std::size_t index) const {
    if (index >= size()) throw IndexError("sequence index " + std::to_string(index) + " out of range");
    const auto& m = manifest_;
    const auto seq = dir_ / sequence_dir_name(index);
    VideoSample s;
    s.frames = torch::empty({m.frames, 3, m.height, m.width}, torch::kFloat32);
    s.semantic = torch::empty({m.frames, m.height, m.width}, torch::kInt64);
    s.flows = torch::empty({m.frames - 1, 2, m.height, m.width}, torch::kFloat32);
    s.occlusions = torch::empty({m.frames - 1, 1, m.height, m.width}, torch::kFloat32);
    for (int t = 0; t < m.frames; ++t) {
        const auto frame_path = seq / numbered("frame", t, ".png");
        const auto frame = io::read_png(frame_path);
        expect_dims(frame, m, frame_path);
        s.frames[t].copy_(io::image_to_frame(frame));

        const auto sem_path = seq / numbered("sem", t, ".png");
        const auto sem = io::read_png(sem_path);
        expect_dims(sem, m, sem_path);
        auto labels = io::image_to_labels(sem);
        if (labels.max().item<int64_t>() >= m.num_classes) {
            throw ValidationError(sem_path.string() + ": label exceeds manifest num_classes");
        }
        s.semantic[t].copy_(labels);

        if (t >= 1) {
            const auto flow_path = seq / numbered("flow", t, ".flo");
            auto flow = io::read_flo(flow_path);
            if (flow.size(1) != m.height || flow.size(2) != m.width) {
                throw ValidationError(flow_path.string() + ": dimensions differ from manifest");
            }
            s.flows[t - 1].copy_(flow);
            const auto occ_path = seq / numbered("occ", t, ".png");
            const auto occ = io::read_png(occ_path);
            expect_dims(occ, m, occ_path);
            s.occlusions[t - 1].copy_(io::image_to_occlusion(occ));
        }
    }
    return s;
}

Dataset read_dataset(const fs::path& dir) { return Dataset(dir); }

}  // namespace svs::forge
