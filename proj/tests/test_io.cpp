#include "doctest_torch.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "support.hpp"
#include "svs/dataset.hpp"
#include "svs/digest.hpp"
#include "svs/error.hpp"
#include "svs/image_io.hpp"

using namespace svs;
namespace fs = std::filesystem;

namespace {

std::vector<forge::VideoSample> two_samples() {
    forge::RandomSceneOptions opts;
    opts.width = 32;
    opts.height = 16;
    opts.frames = 4;
    opts.num_classes = 3;
    return {forge::render_scene(forge::random_scene(opts, 3)), forge::render_scene(forge::random_scene(opts, 4))};
}

forge::DatasetManifest manifest_for(const std::vector<forge::VideoSample>& s) {
    forge::DatasetManifest m;
    m.num_classes = 3;
    m.frames = 4;
    m.width = 32;
    m.height = 16;
    m.sequences = static_cast<int>(s.size());
    m.seed = 3;
    m.palette = forge::class_palette(3);
    return m;
}

}  // namespace

TEST_SUITE("io") {
    TEST_CASE("frame quantization endpoints") {
        CHECK(io::quantize(-1.0F) == 0);
        CHECK(io::quantize(1.0F) == 255);
        CHECK(io::quantize(0.0F) == 128);  // round(127.5)
        CHECK(io::quantize(-3.0F) == 0);
        CHECK(io::dequantize(0) == -1.0F);
        CHECK(io::dequantize(255) == 1.0F);
    }

    TEST_CASE("png round trip is lossless for bytes") {
        io::Image8 img;
        img.width = 5;
        img.height = 3;
        img.channels = 3;
        for (int i = 0; i < 45; ++i) img.pixels.push_back(static_cast<std::uint8_t>(i * 5));
        const auto back = io::decode_png(io::encode_png(img), "mem");
        CHECK(back.width == 5);
        CHECK(back.height == 3);
        CHECK(back.channels == 3);
        CHECK(back.pixels == img.pixels);
        CHECK_THROWS_AS(io::decode_png({1, 2, 3}, "junk"), IoError);
    }

    TEST_CASE(".flo layout is bit exact") {
        // 2 x 1 field: pixel 0 = (1.5, -2), pixel 1 = (0.25, 3)
        auto flow = torch::tensor({1.5F, 0.25F, -2.0F, 3.0F}).view({2, 1, 2});
        const auto bytes = io::encode_flo(flow);
        REQUIRE(bytes.size() == 12 + 2 * 8);
        float magic = 0;
        std::int32_t w = 0, h = 0;
        std::memcpy(&magic, bytes.data(), 4);
        std::memcpy(&w, bytes.data() + 4, 4);
        std::memcpy(&h, bytes.data() + 8, 4);
        CHECK(magic == 202021.25F);
        CHECK(w == 2);
        CHECK(h == 1);
        float values[4];
        std::memcpy(values, bytes.data() + 12, 16);
        CHECK(values[0] == 1.5F);
        CHECK(values[1] == -2.0F);
        CHECK(values[2] == 0.25F);
        CHECK(values[3] == 3.0F);
        CHECK(torch::equal(io::decode_flo(bytes, "mem"), flow));
        auto bad = bytes;
        bad[0] ^= 0xFF;
        CHECK_THROWS_AS(io::decode_flo(bad, "mem"), IoError);
        bad = bytes;
        bad.pop_back();
        CHECK_THROWS_AS(io::decode_flo(bad, "mem"), IoError);
    }

    TEST_CASE("dataset write/read round trip") {
        const auto dir = test::temp_dir("dataset");
        const auto samples = two_samples();
        forge::write_dataset(samples, dir / "data", manifest_for(samples));
        CHECK_FALSE(fs::exists(dir / "data.partial"));
        const auto data = forge::read_dataset(dir / "data");
        REQUIRE(data.size() == 2);
        CHECK(data.manifest().num_classes == 3);
        for (size_t i = 0; i < 2; ++i) {
            const auto back = data.load(i);
            CHECK(torch::equal(back.semantic, samples[i].semantic));
            CHECK(torch::equal(back.flows, samples[i].flows));
            CHECK(torch::equal(back.occlusions, samples[i].occlusions));
            const auto quantized = samples[i].frames.clamp(-1, 1).add(1).mul(127.5).round().div(127.5).sub(1);
            CHECK((back.frames - quantized).abs().max().item<float>() <= 1e-6F);
        }
        CHECK_THROWS_AS(data.load(2), IndexError);
        CHECK_THROWS_AS(forge::write_dataset(samples, dir / "data", manifest_for(samples)), IoError);
        fs::remove_all(dir);
    }

    TEST_CASE("corrupt files and class-count mismatches are reported") {
        const auto dir = test::temp_dir("dataset_bad");
        const auto samples = two_samples();
        forge::write_dataset(samples, dir / "data", manifest_for(samples));

        const auto frame = dir / "data" / "seq_0001" / "frame_0002.png";
        { std::ofstream(frame, std::ios::binary | std::ios::trunc) << "garbage"; }
        const auto data = forge::read_dataset(dir / "data");
        try {
            data.load(1);
            FAIL("expected an I/O error");
        } catch (const IoError& e) {
            CHECK(std::string(e.what()).find("frame_0002.png") != std::string::npos);
        }
        fs::remove(dir / "data" / "seq_0000" / "flow_0001.flo");
        CHECK_THROWS_AS(data.load(0), IoError);

        // Manifest claims 2 classes while the label maps use 3.
        auto m = manifest_for(samples);
        m.num_classes = 2;
        m.palette = forge::class_palette(2);
        fs::remove_all(dir / "data2");
        CHECK_THROWS_AS(forge::write_dataset(samples, dir / "data2", m), ValidationError);
        forge::write_dataset(samples, dir / "data3", manifest_for(samples));
        {
            const auto path = dir / "data3" / "manifest.json";
            const auto bytes = io::read_file(path);
            auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
            j["num_classes"] = 2;
            j["palette"].erase(2);
            io::write_file_atomic(path, j.dump());
        }
        CHECK_THROWS_AS(forge::read_dataset(dir / "data3").load(0), ValidationError);
        CHECK_THROWS_AS(forge::read_dataset(dir / "missing"), IoError);
        fs::remove_all(dir);
    }

    TEST_CASE("digests") {
        CHECK(sha256_hex(std::string_view("abc")) ==
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        const auto a = torch::arange(6, torch::kFloat32);
        CHECK(tensor_digest(a) == tensor_digest(a.clone()));
        CHECK(tensor_digest(a) != tensor_digest(a.view({2, 3})));
        CHECK(tensor_digest(a) != tensor_digest(a.to(torch::kFloat64)));
    }
}
