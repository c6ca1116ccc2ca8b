#include "doctest_torch.hpp"

#include "support.hpp"
#include "svs/discriminators.hpp"
#include "svs/error.hpp"

using namespace svs;

namespace {

disc::DiscIConfig small_d(int64_t n) {
    disc::DiscIConfig c;
    c.num_classes = n;
    c.base_channels = 8;
    c.channel_cap = 32;
    return c;
}

disc::DiscVConfig small_v() {
    disc::DiscVConfig c;
    c.num_classes = 3;
    c.base_channels = 8;
    c.channel_cap = 16;
    return c;
}

}  // namespace

TEST_SUITE("discriminators") {
    TEST_CASE("segmentation discriminator emits N+1 full-resolution channels") {
        torch::manual_seed(1);
        disc::SegmentationDiscriminator d(small_d(5));
        for (auto [h, w] : {std::pair<int64_t, int64_t>{16, 32}, {32, 64}}) {
            const auto out = d->forward(torch::rand({2, 3, h, w}) * 2 - 1);
            REQUIRE(out.logits.size() == 1);
            CHECK(out.logits[0].sizes() == torch::IntArrayRef({2, 6, h, w}));
            CHECK(out.features.size() == 6);
        }
        CHECK_THROWS_AS(d->forward(torch::zeros({1, 3, 12, 32})), ConfigError);
        CHECK_THROWS_AS(d->forward(torch::zeros({1, 4, 16, 32})), ConfigError);
        auto bad = small_d(1);
        CHECK_THROWS_AS(disc::SegmentationDiscriminator{bad}, ConfigError);
    }

    TEST_CASE("feature list runs from the shallow encoder to the deep decoder") {
        disc::SegmentationDiscriminator d(small_d(3));
        const auto out = d->forward(torch::zeros({1, 3, 32, 64}));
        // Encoder stages shrink, decoder stages grow back.
        CHECK(out.features[0].size(2) == 16);
        CHECK(out.features[1].size(2) == 8);
        CHECK(out.features[2].size(2) == 4);
        CHECK(out.features.back().size(2) > out.features[3].size(2));
    }

    TEST_CASE("patch discriminator logits at input / 2^l") {
        disc::PatchDiscriminator d(3, 3, 8, 16, true);
        const auto out = d->forward(torch::zeros({1, 3, 32, 64}));
        REQUIRE(out.logits.size() == 3);
        for (int64_t l = 0; l < 3; ++l) {
            CHECK(out.logits[l].sizes() == torch::IntArrayRef({1, 1, 32 >> (l + 1), 64 >> (l + 1)}));
        }
        CHECK_THROWS_AS(d->forward(torch::zeros({1, 4, 32, 64})), DimensionError);
    }

    TEST_CASE("video discriminator enforces three frames") {
        disc::VideoDiscriminator d(small_v(), 1);
        const auto labels3 = torch::zeros({1, 3, 32, 64}, torch::kLong);
        const auto out = d->forward(torch::zeros({1, 3, 3, 32, 64}), labels3);
        CHECK(out.logits.size() == 3);
        CHECK_THROWS_AS(d->forward(torch::zeros({1, 2, 3, 32, 64}), torch::zeros({1, 2, 32, 64}, torch::kLong)),
                        ValidationError);
        CHECK_THROWS_AS(d->forward(torch::zeros({1, 3, 3, 32, 64}), torch::zeros({1, 3, 16, 64}, torch::kLong)),
                        DimensionError);
    }

    TEST_CASE("video discriminator sees frame order") {
        torch::manual_seed(2);
        disc::VideoDiscriminator d(small_v(), 1);
        torch::NoGradGuard guard;
        for (auto& p : d->parameters()) p.normal_(0.0, 0.3);
        const auto clip = torch::rand({1, 3, 3, 16, 32}) * 2 - 1;
        const auto labels = torch::randint(0, 3, {1, 3, 16, 32}, torch::kLong);
        const auto perm = torch::tensor({2, 0, 1}, torch::kLong);
        const auto a = d->forward(clip, labels).logits[0];
        const auto b = d->forward(clip.index_select(1, perm), labels.index_select(1, perm)).logits[0];
        CHECK(test::max_abs(a - b) > 0.0);
    }

    TEST_CASE("conditional patch discriminator depends on the labels") {
        torch::manual_seed(3);
        disc::ConditionalPatchDiscriminator d(3, 2, 8, 16, false);
        const auto x = torch::rand({1, 3, 16, 32});
        const auto a = d->forward(x, torch::zeros({1, 16, 32}, torch::kLong)).logits[0];
        const auto b = d->forward(x, torch::ones({1, 16, 32}, torch::kLong)).logits[0];
        CHECK(test::max_abs(a - b) > 0.0);
        CHECK_THROWS_AS(d->forward(torch::zeros({1, 1, 16, 32}), torch::zeros({1, 16, 32}, torch::kLong)),
                        DimensionError);
    }

    TEST_CASE("window extraction") {
        CHECK(disc::extract_windows(30, 1, 3).size() == 28);
        CHECK(disc::extract_windows(30, 2, 3).size() == 26);
        const auto one = disc::extract_windows(5, 2, 3);
        REQUIRE(one.size() == 1);
        CHECK(one[0].indices == std::vector<int64_t>{0, 2, 4});
        CHECK_THROWS_AS(disc::extract_windows(4, 2, 3), ValidationError);
        CHECK_THROWS_AS(disc::extract_windows(5, 0, 3), ValidationError);

        const auto seq = torch::arange(6, torch::kFloat).view({6, 1});
        const auto stacked = disc::gather_windows(seq, disc::extract_windows(6, 2, 3));
        CHECK(stacked.sizes() == torch::IntArrayRef({2, 3, 1}));
        CHECK(stacked[1][2][0].item<float>() == 5.0F);
    }

    TEST_CASE("configuration validation") {
        auto v = small_v();
        v.temporal_rates = {2, 1};
        CHECK_THROWS_AS(disc::validate(v), ConfigError);
        v = small_v();
        v.temporal_rates.clear();
        CHECK_THROWS_AS(disc::validate(v), ConfigError);
        v = small_v();
        v.frames_per_window = 1;
        CHECK_THROWS_AS(disc::validate(v), ConfigError);
    }

    TEST_CASE("gradient reaches every discriminator parameter") {
        torch::manual_seed(4);
        disc::SegmentationDiscriminator di(small_d(3));
        disc::VideoDiscriminator dv(small_v(), 2);
        {
            torch::NoGradGuard guard;
            for (auto& p : di->parameters()) p.normal_(0.0, 0.3);
            for (auto& p : dv->parameters()) p.normal_(0.0, 0.3);
        }
        auto out = di->forward(torch::rand({1, 3, 16, 32}) * 2 - 1);
        (out.logits[0] * torch::randn_like(out.logits[0])).sum().backward();
        for (const auto& p : di->named_parameters()) {
            CAPTURE(p.key());
            REQUIRE(p.value().grad().defined());
            CHECK(p.value().grad().norm().item<double>() > 0.0);
        }
        auto vout = dv->forward(torch::rand({1, 3, 3, 16, 32}), torch::randint(0, 3, {1, 3, 16, 32}, torch::kLong));
        torch::Tensor total = torch::zeros({});
        for (const auto& l : vout.logits) total = total + (l * torch::randn_like(l)).sum();
        total.backward();
        for (const auto& p : dv->named_parameters()) {
            CAPTURE(p.key());
            REQUIRE(p.value().grad().defined());
            CHECK(p.value().grad().norm().item<double>() > 0.0);
        }
    }
}
