#include "doctest_torch.hpp"

#include <map>

#include "support.hpp"
#include "svs/digest.hpp"
#include "svs/error.hpp"
#include "svs/generator.hpp"

using namespace svs;

namespace {

gen::GeneratorConfig small_config() {
    gen::GeneratorConfig c;
    c.num_classes = 3;
    c.base_channels = 8;
    c.channel_cap = 32;
    c.flow_net_blocks = 1;
    c.spade_hidden = 8;
    return c;
}

struct Inputs {
    torch::Tensor x_prev;
    torch::Tensor s_prev;
    torch::Tensor s_cur;
};

Inputs random_inputs(int64_t n, int64_t h, int64_t w, std::uint64_t seed) {
    torch::manual_seed(seed);
    return {torch::rand({1, 3, h, w}) * 2 - 1, torch::randint(0, n, {1, h, w}, torch::kLong),
            torch::randint(0, n, {1, h, w}, torch::kLong)};
}

void randomize(torch::nn::Module& m, std::uint64_t seed) {
    torch::manual_seed(seed);
    torch::NoGradGuard guard;
    for (auto& p : m.parameters()) p.normal_(0.0, 0.2);
}

std::map<std::string, std::string> digests(const torch::nn::Module& m) {
    std::map<std::string, std::string> out;
    for (const auto& p : m.named_parameters()) out[p.key()] = tensor_digest(p.value());
    return out;
}

int64_t spade_count(int64_t c, int64_t sem, int64_t hidden) { return sem * hidden * 9 + hidden + 2 * (hidden * c * 9 + c); }

int64_t spade_block_count(int64_t in, int64_t out, int64_t sem, int64_t hidden) {
    const auto mid = std::min(in, out);
    int64_t n = spade_count(in, sem, hidden) + in * mid * 9 + mid + spade_count(mid, sem, hidden) + mid * out * 9 + out;
    if (in != out) n += spade_count(in, sem, hidden) + in * out;
    return n;
}

}  // namespace

TEST_SUITE("generator") {
    TEST_CASE("output contract at 64x32") {
        auto c = small_config();
        gen::Generator g(c);
        const auto in = random_inputs(c.num_classes, 32, 64, 1);
        const auto out = g->forward(in.x_prev, in.s_prev, in.s_cur);
        CHECK(out.frame.sizes() == torch::IntArrayRef({1, 3, 32, 64}));
        CHECK(out.flow.sizes() == torch::IntArrayRef({1, 2, 32, 64}));
        CHECK(out.occlusion.sizes() == torch::IntArrayRef({1, 1, 32, 64}));
        CHECK(out.warped.sizes() == torch::IntArrayRef({1, 3, 32, 64}));
        CHECK(out.frame.abs().max().item<float>() <= 1.0F);
        CHECK(out.occlusion.min().item<float>() >= 0.0F);
        CHECK(out.occlusion.max().item<float>() <= 1.0F);
        const auto [flow, occ] = g->predict_flow(nn::one_hot(in.s_prev, 3), nn::one_hot(in.s_cur, 3));
        CHECK(torch::equal(flow, out.flow));
    }

    TEST_CASE("input validation") {
        auto c = small_config();
        gen::Generator g(c);
        const auto in = random_inputs(3, 16, 32, 2);
        CHECK_THROWS_AS(g->forward(in.x_prev, in.s_prev, in.s_cur.narrow(2, 0, 16)), DimensionError);
        CHECK_THROWS_AS(g->forward(torch::zeros({1, 3, 12, 32}), torch::zeros({1, 12, 32}, torch::kLong),
                                   torch::zeros({1, 12, 32}, torch::kLong)),
                        ConfigError);
        CHECK_THROWS_AS(g->forward(in.x_prev, in.s_prev, torch::full({1, 16, 32}, 3, torch::kLong)), ValidationError);
        CHECK_THROWS_AS(g->predict_flow(torch::zeros({1, 3, 16, 32}), torch::zeros({1, 2, 16, 32})), DimensionError);
        auto bad = c;
        bad.levels = 1;
        CHECK_THROWS_AS(gen::Generator{bad}, ConfigError);
        bad = c;
        bad.base_channels = 2;
        CHECK_THROWS_AS(gen::Generator{bad}, ConfigError);
    }

    TEST_CASE("deterministic and sensitive to the current label map") {
        auto c = small_config();
        torch::manual_seed(5);
        gen::Generator g(c);
        randomize(*g, 6);
        const auto in = random_inputs(3, 16, 32, 3);
        const auto a = g->forward(in.x_prev, in.s_prev, in.s_cur);
        const auto b = g->forward(in.x_prev, in.s_prev, in.s_cur);
        CHECK(torch::equal(a.frame, b.frame));
        auto other = in.s_cur.clone();
        other.narrow(1, 0, 8).fill_(1);
        CHECK(test::max_abs(g->forward(in.x_prev, in.s_prev, other).frame - a.frame) > 0.0);
    }

    TEST_CASE("occlusion 1 removes the previous frame from the output") {
        auto c = small_config();
        gen::Generator g(c);
        randomize(*g, 7);
        g->force_occlusion(1.0);
        const auto in = random_inputs(3, 16, 32, 4);
        const auto a = g->forward(in.x_prev, in.s_prev, in.s_cur).frame;
        const auto b = g->forward(torch::rand({1, 3, 16, 32}) * 2 - 1, in.s_prev, in.s_cur).frame;
        CHECK(test::max_abs(a - b) == 0.0);
    }

    TEST_CASE("occlusion 0 passes the image skip through the fusion unchanged") {
        // The deepest fusion replaces the decoder start with the image skip, so
        // the start conv cannot influence the output.
        auto c = small_config();
        gen::Generator g(c);
        randomize(*g, 8);
        g->force_occlusion(0.0);
        const auto in = random_inputs(3, 16, 32, 5);
        const auto before = g->forward(in.x_prev, in.s_prev, in.s_cur).frame;
        {
            torch::NoGradGuard guard;
            for (auto& p : g->named_parameters()) {
                if (p.key().rfind("dec_start.", 0) == 0) p.value().normal_();
            }
        }
        const auto after = g->forward(in.x_prev, in.s_prev, in.s_cur).frame;
        CHECK(test::max_abs(before - after) == 0.0);
    }

    TEST_CASE("gradient reaches every parameter") {
        for (bool spade : {true, false}) {
            CAPTURE(spade);
            auto c = small_config();
            c.use_spade = spade;
            gen::Generator g(c);
            randomize(*g, 9);
            const auto in = random_inputs(3, 16, 32, 6);
            const auto w = torch::randn({1, 3, 16, 32});
            (g->forward(in.x_prev, in.s_prev, in.s_cur).frame * w).sum().backward();
            for (const auto& p : g->named_parameters()) {
                CAPTURE(p.key());
                REQUIRE(p.value().grad().defined());
                CHECK(p.value().grad().norm().item<double>() > 0.0);
            }
        }
    }

    TEST_CASE("zero-initialized modulation: only the shared SPADE convs start without gradient") {
        auto c = small_config();
        torch::manual_seed(10);
        gen::Generator g(c);
        const auto in = random_inputs(3, 16, 32, 7);
        const auto w = torch::randn({1, 3, 16, 32});
        torch::optim::Adam opt(g->parameters(), torch::optim::AdamOptions(1e-3));
        (g->forward(in.x_prev, in.s_prev, in.s_cur).frame * w).sum().backward();
        for (const auto& p : g->named_parameters()) {
            CAPTURE(p.key());
            const bool is_shared = p.key().find(".shared.") != std::string::npos;
            CHECK((p.value().grad().norm().item<double>() == 0.0) == is_shared);
        }
        opt.step();
        opt.zero_grad();
        (g->forward(in.x_prev, in.s_prev, in.s_cur).frame * w).sum().backward();
        for (const auto& p : g->named_parameters()) {
            CAPTURE(p.key());
            CHECK(p.value().grad().norm().item<double>() > 0.0);
        }
    }

    TEST_CASE("growth appends a level and preserves existing tensors") {
        auto c = small_config();
        gen::Generator g(c);
        randomize(*g, 11);
        const auto before = digests(*g);
        const auto count = nn::param_count(*g);
        const auto grown = gen::grow_resolution(g);
        CHECK(grown.growth_levels == 1);
        const auto after = digests(*g);
        for (const auto& [name, digest] : before) {
            CAPTURE(name);
            REQUIRE(after.count(name) == 1);
            CHECK(after.at(name) == digest);
        }
        // New tensors: image stem, semantic stem, one SPADE block, output head.
        const auto incoming = c.channels_at(0);
        const auto width = c.grown_channels(1);
        const auto bottleneck = c.channels_at(c.levels);
        const auto expected = (3 * incoming * 9 + incoming) + (c.num_classes * width * 9 + width) +
                              spade_block_count(incoming, width, width + bottleneck, c.spade_hidden) + (width * 3 * 9 + 3);
        CHECK(nn::param_count(*g) - count == expected);

        const auto in = random_inputs(3, 32, 64, 8);
        const auto out = g->forward(in.x_prev, in.s_prev, in.s_cur);
        CHECK(out.frame.sizes() == torch::IntArrayRef({1, 3, 32, 64}));
        CHECK(out.flow.sizes() == torch::IntArrayRef({1, 2, 32, 64}));
        // 16x32 inputs are no longer divisible by the grown size unit? They are
        // (unit 16), but 8x16 is not.
        CHECK_THROWS_AS(g->forward(torch::zeros({1, 3, 8, 16}), torch::zeros({1, 8, 16}, torch::kLong),
                                   torch::zeros({1, 8, 16}, torch::kLong)),
                        ConfigError);
    }

    TEST_CASE("param_count equals an independent traversal") {
        auto c = small_config();
        gen::Generator g(c);
        int64_t total = 0;
        for (const auto& p : g->named_parameters()) {
            int64_t n = 1;
            for (auto d : p.value().sizes()) n *= d;
            total += n;
        }
        CHECK(nn::param_count(*g) == total);
        CHECK(total > 0);
    }

    TEST_CASE("noise input changes the output") {
        auto c = small_config();
        c.noise_dim = 4;
        gen::Generator g(c);
        randomize(*g, 12);
        const auto in = random_inputs(3, 16, 32, 9);
        const auto a = g->forward(in.x_prev, in.s_prev, in.s_cur, torch::zeros({1, 4})).frame;
        const auto b = g->forward(in.x_prev, in.s_prev, in.s_cur, torch::ones({1, 4})).frame;
        CHECK(test::max_abs(a - b) > 0.0);
        CHECK_THROWS_AS(g->forward(in.x_prev, in.s_prev, in.s_cur, torch::zeros({1, 3})), DimensionError);
    }
}
