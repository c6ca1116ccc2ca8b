#pragma once

#include "svs/scene_forge.hpp"
#include "svs/trainer.hpp"

namespace svs::test {

// Small enough for a train_step to take well under a second.
inline train::TrainConfig tiny_config(int64_t num_classes = 3) {
    train::TrainConfig c;
    c.generator.num_classes = num_classes;
    c.generator.base_channels = 8;
    c.generator.channel_cap = 16;
    c.generator.flow_net_blocks = 1;
    c.generator.spade_hidden = 8;
    c.disc_image.num_classes = num_classes;
    c.disc_image.base_channels = 8;
    c.disc_image.channel_cap = 16;
    c.disc_video.num_classes = num_classes;
    c.disc_video.base_channels = 8;
    c.disc_video.channel_cap = 16;
    c.disc_video.patch_levels = 2;
    return c;
}

inline forge::VideoSample tiny_sample(std::uint64_t seed, int frames = 6, int width = 32, int height = 16,
                                      int num_classes = 3) {
    forge::RandomSceneOptions o;
    o.width = width;
    o.height = height;
    o.frames = frames;
    o.num_classes = num_classes;
    return forge::render_scene(forge::random_scene(o, seed));
}

}  // namespace svs::test
