#include <gtest/gtest.h>

#include <sstream>

#include "oamfso/eval.hpp"

namespace oamfso::eval {
namespace {

std::vector<Symbol> symbols(std::initializer_list<int> ells) {
    std::vector<Symbol> out;
    for (int e : ells) out.emplace_back(e);
    return out;
}

TEST(Ser, Arithmetic) {
    std::vector<Symbol> labels, preds;
    for (int i = 0; i < 539; ++i) {
        labels.emplace_back(i % 11);
        preds.emplace_back(i < 43 ? (i + 5) % 11 : i % 11);
    }
    EXPECT_DOUBLE_EQ(symbol_error_rate(preds, labels), 43.0 / 539.0);
    EXPECT_NEAR(symbol_error_rate(preds, labels), 0.07978, 1e-5);
    EXPECT_EQ(symbol_error_rate(labels, labels), 0.0);
    EXPECT_THROW((void)symbol_error_rate(symbols({1}), symbols({1, 2})), Error);
    EXPECT_THROW((void)symbol_error_rate({}, {}), Error);
}

TEST(Crosstalk, PerfectClassifierIsDiagonal) {
    std::vector<Symbol> labels;
    for (int i = 0; i < 539; ++i) labels.emplace_back(i / 49);
    const auto m = crosstalk(labels, labels);
    for (int t = 0; t < kNumSymbols; ++t) {
        EXPECT_EQ(m.row_sum(t), 49u);
        EXPECT_EQ(m.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(t)], 49u);
    }
    EXPECT_EQ(m.off_diagonal(), 0u);
}

class CrosstalkProperty : public ::testing::TestWithParam<int> {};

TEST_P(CrosstalkProperty, IdentitiesHoldForRandomClassifiers) {
    Rng rng(static_cast<std::uint64_t>(GetParam()));
    const int per_class = 1 + static_cast<int>(rng.below(60));
    std::vector<Symbol> labels, preds;
    for (int t = 0; t < kNumSymbols; ++t) {
        for (int i = 0; i < per_class; ++i) {
            labels.emplace_back(t);
            preds.emplace_back(rng.uniform() < 0.4 ? static_cast<int>(rng.below(11)) : t);
        }
    }
    const auto m = crosstalk(preds, labels);
    for (int t = 0; t < kNumSymbols; ++t) EXPECT_EQ(m.row_sum(t), static_cast<std::size_t>(per_class));
    EXPECT_EQ(m.diagonal() + m.off_diagonal(), m.total());
    EXPECT_EQ(m.total(), labels.size());
    EXPECT_EQ(static_cast<double>(m.off_diagonal()) / static_cast<double>(m.total()),
              symbol_error_rate(preds, labels));
}

INSTANTIATE_TEST_SUITE_P(Seeds, CrosstalkProperty, ::testing::Range(1, 26));

TEST(SweepAxis, NamesRoundTrip) {
    for (auto a : {SweepAxis::latent_side, SweepAxis::sigma, SweepAxis::cn2, SweepAxis::z}) {
        EXPECT_EQ(sweep_axis_from_string(to_string(a)), a);
    }
    EXPECT_THROW((void)sweep_axis_from_string("snr"), Error);
}

TEST(SweepAxis, WithAxisSetsField) {
    const PipelineConfig base;
    EXPECT_EQ(with_axis(base, SweepAxis::latent_side, 24).gnn.latent_side, 24u);
    EXPECT_EQ(with_axis(base, SweepAxis::sigma, 80).sigma, 80.0);
    EXPECT_EQ(with_axis(base, SweepAxis::cn2, 1e-14).channel.turbulence.cn2, 1e-14);
    const auto z = with_axis(base, SweepAxis::z, 800);
    EXPECT_EQ(z.channel.z, 800.0);
    EXPECT_EQ(z.channel.turbulence.z, 800.0);
    EXPECT_THROW((void)with_axis(base, SweepAxis::latent_side, 2.5), Error);
}

TEST(PipelineConfig, Validation) {
    PipelineConfig c;
    EXPECT_NO_THROW(c.validate());
    c.train_screens = 20;
    EXPECT_THROW(c.validate(), Error);
    c = {};
    c.gnn.image_side = 64;
    EXPECT_THROW(c.validate(), Error);
    c = {};
    c.sigma = -1.0;
    EXPECT_THROW(c.validate(), Error);
}

TEST(PipelineSeeds, DistinctStreams) {
    const auto s = pipeline_seeds(1);
    EXPECT_NE(s.gnn_data, s.gnn_train);
    EXPECT_NE(s.cnn_data, s.cnn_train);
    EXPECT_NE(s.gnn_data, pipeline_seeds(2).gnn_data);
}

// 32-pixel grid keeps the full pipeline to a few seconds.
PipelineConfig tiny_config() {
    PipelineConfig c;
    c.channel.grid = {.n = 32, .pitch = 5e-3};
    c.gnn.image_side = 32;
    c.gnn.latent_side = 4;
    c.gnn_train.epochs = 3;
    c.gnn_train.lr = 1e-3;
    c.n_screens = 3;
    c.train_screens = 2;
    c.cnn_data.per_class = 12;
    c.cnn_data.train_per_class = 8;
    c.cnn_train.epochs = 25;
    return c;
}

TEST(Pipeline, NoTurbulenceLowNoiseIsNearPerfect) {
    PipelineConfig c = tiny_config();
    c.turbulence = false;
    c.sigma = 2.0;
    const auto r = run_pipeline(c);
    EXPECT_LE(r.ser_uncorrected, 0.01);
    EXPECT_EQ(r.cn2, 0.0);
    EXPECT_EQ(r.n_test, 11u);
    EXPECT_EQ(r.before.off_diagonal(), static_cast<std::size_t>(std::lround(r.ser_uncorrected * 11)));
}

TEST(Pipeline, ReportIsReproducibleAndBounded) {
    const PipelineConfig c = tiny_config();
    const auto a = run_pipeline(c);
    const auto b = run_pipeline(c);
    EXPECT_EQ(a.ser_uncorrected, b.ser_uncorrected);
    EXPECT_EQ(a.ser_corrected, b.ser_corrected);
    EXPECT_EQ(a.loss_history, b.loss_history);
    EXPECT_EQ(a.before, b.before);
    EXPECT_EQ(a.after, b.after);
    for (double s : {a.ser_uncorrected, a.ser_corrected}) {
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0);
    }
    EXPECT_EQ(a.after.off_diagonal(), static_cast<std::size_t>(std::lround(a.ser_corrected * a.n_test)));
}

TEST(Sweep, RowsPerValueAndSeed) {
    PipelineConfig c = tiny_config();
    c.gnn_train.epochs = 1;
    const std::vector<double> values{10.0, 50.0};
    const std::vector<std::uint64_t> seeds{1, 2};
    const auto points = sweep(SweepAxis::sigma, values, c, seeds);
    ASSERT_EQ(points.size(), 4u);
    const auto csv = sweep_csv(SweepAxis::sigma, points);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "axis_name,axis_value,seed,ser_uncorrected,ser_corrected,n_test,train_loss_final,wall_seconds");
    int rows = 0;
    while (std::getline(in, line)) {
        EXPECT_EQ(line.rfind("sigma,", 0), 0u);
        ++rows;
    }
    EXPECT_EQ(rows, 4);
    const auto summary = sweep_summary_csv(SweepAxis::sigma, points);
    EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 3);
}

TEST(CrosstalkCsv, BlockLayout) {
    const auto labels = symbols({0, 1, 2});
    const auto csv = crosstalk_csv(crosstalk(labels, labels), "before correction");
    EXPECT_EQ(csv.rfind("# before correction\ntransmitted,pred_0,", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
}

}  // namespace
}  // namespace oamfso::eval
