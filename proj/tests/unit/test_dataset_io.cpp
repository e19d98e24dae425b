#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <unistd.h>

#include "oamfso/dataset_io.hpp"
#include "oamfso/model_io.hpp"

namespace oamfso::io {
namespace {

const channel::ChannelConfig kCfg{};

Errc decode_error(std::span<const std::uint8_t> bytes) {
    try {
        (void)decode_dataset(bytes);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "decode succeeded";
    return Errc::invalid_argument;
}

Dataset three_images() {
    CnnDataOptions opt{.sigma = 2.0, .per_class = 2, .train_per_class = 1, .seed = 4};
    Dataset d = generate_cnn_dataset(kCfg, opt).test;
    d.manifest.n_images = 3;
    d.manifest.labels.resize(3);
    d.images.resize(3 * d.image_pixels());
    return d;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("oamfso-test-" + std::to_string(::getpid()) + "-" + name);
}

TEST(GnnDataset, DeskCountsAndLayout) {
    const auto pair = generate_gnn_dataset(kCfg, {.sigma = 50.0, .n_screens = 4, .train_screens = 3, .seed = 2});
    EXPECT_EQ(pair.train.manifest.n_images, 33u);
    EXPECT_EQ(pair.test.manifest.n_images, 11u);
    EXPECT_EQ(pair.train.manifest.kind, DatasetKind::turbulent_noisy);
    EXPECT_EQ(pair.train.manifest.n_targets, 11u);
    EXPECT_EQ(pair.train.targets, pair.test.targets);
    for (std::size_t i = 0; i < 33; ++i) {
        EXPECT_EQ(pair.train.manifest.labels[i], static_cast<int>(i / 3));
        EXPECT_EQ(pair.train.manifest.target_of[i], i / 3);
    }
    EXPECT_EQ(pair.test.manifest.screen_of[0], 3);
    EXPECT_EQ(pair.train.manifest.provenance.sigma, 50.0);
    EXPECT_EQ(pair.train.manifest.provenance.scale_constant, scale_constant(channel::Channel(kCfg)));
}

TEST(GnnDataset, FullScaleCounts) {
    const auto pair = generate_gnn_dataset(kCfg, {.n_screens = 99, .train_screens = 50, .seed = 1, .jobs = 2});
    EXPECT_EQ(pair.train.manifest.n_images + pair.test.manifest.n_images, 1089u);
    EXPECT_EQ(pair.train.manifest.n_images, 550u);
    EXPECT_EQ(pair.test.manifest.n_images, 539u);
}

TEST(GnnDataset, EveryImageSeesItsOwnScreen) {
    const auto pair = generate_gnn_dataset(kCfg, {.sigma = 0.0, .n_screens = 3, .train_screens = 2, .seed = 3});
    const auto& d = pair.train;
    EXPECT_FALSE(std::equal(d.image(0).begin(), d.image(0).end(), d.image(1).begin()));
}

TEST(GnnDataset, DeterministicAndIndependentOfCount) {
    const GnnDataOptions a{.n_screens = 3, .train_screens = 2, .seed = 9, .jobs = 1};
    GnnDataOptions b = a;
    b.n_screens = 4;
    b.jobs = 3;
    const auto x = generate_gnn_dataset(kCfg, a);
    const auto y = generate_gnn_dataset(kCfg, a);
    EXPECT_EQ(encode_dataset(x.train), encode_dataset(y.train));
    const auto z = generate_gnn_dataset(kCfg, b);
    EXPECT_EQ(x.train.images, z.train.images);
}

TEST(GnnDataset, RejectsBadSplit) {
    try {
        (void)generate_gnn_dataset(kCfg, {.n_screens = 5, .train_screens = 5});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::invalid_split);
    }
}

TEST(GnnDataset, FlatScreensRecordZeroCn2) {
    const auto pair = generate_gnn_dataset(kCfg, {.n_screens = 2, .train_screens = 1, .turbulence = false});
    EXPECT_EQ(pair.train.manifest.provenance.cn2, 0.0);
}

TEST(CnnDataset, CountsSplitAndNoise) {
    const auto pair = generate_cnn_dataset(kCfg, {.seed = 5, .jobs = 2});
    EXPECT_EQ(pair.train.manifest.n_images + pair.test.manifest.n_images, 1650u);
    EXPECT_EQ(pair.train.manifest.n_images, 11u * 130u);
    EXPECT_EQ(pair.test.manifest.n_images, 11u * 20u);
    EXPECT_EQ(pair.train.manifest.kind, DatasetKind::cnn_train);

    const auto clean = channel::clean_receiver_image(channel::Symbol(0), kCfg);
    const auto img = pair.train.image(0);
    double s = 0.0, s2 = 0.0;
    int count = 0;
    for (int r = 0; r < 128; ++r) {
        for (int c = 0; c < 128; ++c) {
            if (r >= 16 && r < 112 && c >= 16 && c < 112) continue;
            const double d = img[static_cast<std::size_t>(r * 128 + c)] - clean(r, c);
            s += d;
            s2 += d * d;
            ++count;
        }
    }
    const double var = s2 / count - (s / count) * (s / count);
    EXPECT_GT(var, 0.9 * 4.0);
    EXPECT_LT(var, 1.1 * 4.0);
}

TEST(CnnDataset, NoiseStreamsArePerImage) {
    const auto a = generate_cnn_dataset(kCfg, {.per_class = 4, .train_per_class = 2, .seed = 6});
    const auto b = generate_cnn_dataset(kCfg, {.per_class = 6, .train_per_class = 2, .seed = 6});
    EXPECT_EQ(a.train.images, b.train.images);
}

TEST(Container, RoundTripIsBitExact) {
    const auto d = three_images();
    const auto path = temp_path("rt.oamd");
    save_dataset(d, path);
    const auto back = load_dataset(path);
    std::filesystem::remove(path);
    EXPECT_EQ(back, d);
    EXPECT_EQ(encode_dataset(back), encode_dataset(d));
}

TEST(Container, TruncationIsReported) {
    const auto bytes = encode_dataset(three_images());
    for (std::size_t cut : {std::size_t{3}, std::size_t{7}, std::size_t{40}, bytes.size() - 1}) {
        EXPECT_EQ(decode_error(std::span(bytes).first(cut)), Errc::truncated) << cut;
    }
}

TEST(Container, WrongMagicIsReported) {
    auto bytes = encode_dataset(three_images());
    bytes[0] = 'X';
    EXPECT_EQ(decode_error(bytes), Errc::bad_magic);
}

TEST(Container, VersionAndHeaderChecks) {
    auto bytes = encode_dataset(three_images());
    auto bad_version = bytes;
    bad_version[4] = 9;
    EXPECT_EQ(decode_error(bad_version), Errc::unsupported_version);
    auto extra = bytes;
    extra.insert(extra.end(), 4, 0);
    EXPECT_EQ(decode_error(extra), Errc::header_mismatch);
    auto garbled = bytes;
    garbled[9] = '!';
    EXPECT_EQ(decode_error(garbled), Errc::header_mismatch);
}

TEST(Container, LittleEndianLayout) {
    const auto d = three_images();
    const auto bytes = encode_dataset(d);
    ASSERT_GT(bytes.size(), 9u);
    EXPECT_EQ(std::memcmp(bytes.data(), "OAMD", 4), 0);
    EXPECT_EQ(bytes[4], kFormatVersion);
    const std::uint32_t header = bytes[5] | (bytes[6] << 8) | (bytes[7] << 16) | (static_cast<std::uint32_t>(bytes[8]) << 24);
    EXPECT_EQ(bytes.size(), 9u + header + 4u * (d.images.size() + d.targets.size()));
}

TEST(Container, ManifestValidation) {
    auto d = three_images();
    d.manifest.labels[0] = 11;
    EXPECT_THROW(d.manifest.validate(), Error);
}

TEST(Weights, GnnRoundTripAndValidation) {
    Rng rng(1);
    gnn::GnnModel model{gnn::GnnParams::init({.latent_side = 4, .image_side = 16}, rng), 123.5};
    const auto path = temp_path("gnn.oamw");
    save_model(model, path);
    const auto back = load_gnn(path);
    std::filesystem::remove(path);
    auto a = model.params, b = back.params;
    auto ab = a.blocks(), bb = b.blocks();
    ASSERT_EQ(ab.size(), bb.size());
    for (std::size_t k = 0; k < ab.size(); ++k) {
        EXPECT_EQ(ab[k].name, bb[k].name);
        EXPECT_TRUE(std::equal(ab[k].values.begin(), ab[k].values.end(), bb[k].values.begin()));
    }
    EXPECT_EQ(back.scale, 123.5);

    auto file = to_weight_file(model);
    file.layers[2].shape[0] += 1;
    EXPECT_THROW((void)gnn_from_weight_file(file), Error);
    file = to_weight_file(model);
    file.layers[0].name = "renamed";
    EXPECT_THROW((void)gnn_from_weight_file(file), Error);
}

TEST(Weights, CnnRoundTripAndErrors) {
    Rng rng(2);
    cnn::CnnModel model{cnn::CnnParams::init({.image_side = 16, .hidden = 8}, rng), 7.0};
    const auto bytes = encode_weights(to_weight_file(model));
    EXPECT_EQ(decode_weights(bytes), to_weight_file(model));
    EXPECT_THROW((void)decode_weights(std::span(bytes).first(bytes.size() - 3)), Error);
    auto bad = bytes;
    bad[1] = 'z';
    try {
        (void)decode_weights(bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::bad_magic);
    }
    EXPECT_THROW((void)gnn_from_weight_file(to_weight_file(model)), Error);
}

TEST(Files, AtomicWriteLeavesNoTemporary) {
    const auto path = temp_path("atomic.txt");
    write_file_atomic(path, std::string_view("hello"));
    EXPECT_TRUE(std::filesystem::exists(path));
    auto tmp = path;
    tmp += ".tmp";
    EXPECT_FALSE(std::filesystem::exists(tmp));
    EXPECT_EQ(read_file(path).size(), 5u);
    std::filesystem::remove(path);
    EXPECT_THROW((void)read_file(path), Error);
}

}  // namespace
}  // namespace oamfso::io
