#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "svs/scene_forge.hpp"

namespace svs::forge {

struct DatasetManifest {
    int num_classes = 0;
    int frames = 0;
    int width = 0;
    int height = 0;
    int sequences = 0;
    std::uint64_t seed = 0;
    std::vector<Rgb> palette;
};

// Layout: manifest.json plus seq_%04d/{frame,sem,occ}_%04d.png and
// seq_%04d/flow_%04d.flo. Flow and occlusion files are numbered by target
// frame, 1..T-1. The directory is assembled under a temporary name and renamed
// into place; an existing non-empty directory is refused.
void write_dataset(const std::vector<VideoSample>& samples, const std::filesystem::path& dir,
                   const DatasetManifest& manifest);

// Read-only handle; sequences are decoded on demand and the handle may be
// shared across threads.
class Dataset {
public:
    explicit Dataset(std::filesystem::path dir);

    const DatasetManifest& manifest() const { return manifest_; }
    const std::filesystem::path& dir() const { return dir_; }
    std::size_t size() const { return static_cast<std::size_t>(manifest_.sequences); }
    VideoSample load(std::size_t index) const;

private:
    std::filesystem::path dir_;
    DatasetManifest manifest_;
};

Dataset read_dataset(const std::filesystem::path& dir);

std::string sequence_dir_name(std::size_t index);
std::string numbered(const std::string& prefix, int index, const std::string& extension);

}  // namespace svs::forge
