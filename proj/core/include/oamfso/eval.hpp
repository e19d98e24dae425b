#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "oamfso/autoencoder.hpp"
#include "oamfso/dataset_io.hpp"
#include "oamfso/demodulator.hpp"

namespace oamfso::eval {

using channel::kNumSymbols;
using channel::Symbol;

struct CrosstalkMatrix {
    /// counts[transmitted][predicted]
    std::array<std::array<std::size_t, kNumSymbols>, kNumSymbols> counts{};

    [[nodiscard]] std::size_t row_sum(int transmitted) const;
    [[nodiscard]] std::size_t total() const;
    [[nodiscard]] std::size_t diagonal() const;
    [[nodiscard]] std::size_t off_diagonal() const { return total() - diagonal(); }

    friend bool operator==(const CrosstalkMatrix&, const CrosstalkMatrix&) = default;
};

double symbol_error_rate(std::span<const Symbol> predictions, std::span<const Symbol> labels);
CrosstalkMatrix crosstalk(std::span<const Symbol> predictions, std::span<const Symbol> labels);

struct PipelineConfig {
    channel::ChannelConfig channel{};
    double sigma = 50.0;
    bool turbulence = true;
    int n_screens = 20;
    int train_screens = 14;
    gnn::GnnArchitecture gnn{};
    gnn::GnnTrainConfig gnn_train{};
    cnn::CnnTrainConfig cnn_train{};
    io::CnnDataOptions cnn_data{};
    std::uint64_t seed = 1;
    unsigned jobs = 1;

    void validate() const;
};

struct SerReport {
    double cn2 = 0.0;
    double z = 0.0;
    double sigma = 0.0;
    std::size_t latent_side = 0;
    std::uint64_t seed = 0;
    double ser_uncorrected = 0.0;
    double ser_corrected = 0.0;
    std::size_t n_test = 0;
    double train_loss_final = 0.0;
    std::vector<double> loss_history;  // autoencoder, mean loss per epoch
    double cnn_test_accuracy = 0.0;
    double wall_seconds = 0.0;
    CrosstalkMatrix before;
    CrosstalkMatrix after;
};

/// Derived seeds for each random element of one pipeline run.
struct PipelineSeeds {
    std::uint64_t gnn_data;
    std::uint64_t gnn_train;
    std::uint64_t cnn_data;
    std::uint64_t cnn_train;
};
PipelineSeeds pipeline_seeds(std::uint64_t seed);

/// Trained classifiers shared by pipeline runs whose channel geometry and
/// seed agree (the classifier never sees turbulence, so cn2 and sigma do not
/// enter the key). Thread-safe.
class CnnCache {
public:
    struct Entry {
        std::once_flag once;
        cnn::CnnModel model;
        double test_accuracy = 0.0;
    };
    std::shared_ptr<Entry> get(const PipelineConfig& config);

private:
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Entry>> entries_;
};

struct PipelineHooks {
    std::function<void(const std::string&)> log;
    gnn::EpochCallback gnn_epoch;
};

SerReport run_pipeline(const PipelineConfig& config, CnnCache* cache = nullptr,
                       const PipelineHooks& hooks = {});

/// Evaluate fixed models on a test split.
struct Evaluation {
    std::vector<Symbol> labels;
    std::vector<Symbol> raw;
    std::vector<Symbol> corrected;
};
Evaluation evaluate(const io::Dataset& test, const cnn::CnnModel& classifier, const gnn::GnnModel* corrector,
                    unsigned jobs = 1);

enum class SweepAxis { latent_side, sigma, cn2, z };
std::string_view to_string(SweepAxis axis) noexcept;
SweepAxis sweep_axis_from_string(std::string_view name);
PipelineConfig with_axis(PipelineConfig config, SweepAxis axis, double value);

struct SweepPoint {
    double axis_value;
    SerReport report;
};

std::vector<SweepPoint> sweep(SweepAxis axis, std::span<const double> values, const PipelineConfig& base,
                              std::span<const std::uint64_t> seeds, const PipelineHooks& hooks = {});

/// One row per point: axis_name, axis_value, seed, ser_uncorrected,
/// ser_corrected, n_test, train_loss_final, wall_seconds.
std::string sweep_csv(SweepAxis axis, std::span<const SweepPoint> points);

/// Mean, min and max of both SERs per axis value.
std::string sweep_summary_csv(SweepAxis axis, std::span<const SweepPoint> points);

/// 11 x 11 block headed by `title`, rows labelled by transmitted class.
std::string crosstalk_csv(const CrosstalkMatrix& matrix, const std::string& title);

}  // namespace oamfso::eval
