#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oamfso/channel.hpp"

namespace oamfso::io {

inline constexpr std::uint8_t kFormatVersion = 1;

enum class DatasetKind { clean_target, turbulent_noisy, cnn_train };

std::string_view to_string(DatasetKind kind) noexcept;
DatasetKind dataset_kind_from_string(std::string_view name);

/// Everything needed to regenerate a dataset bit-for-bit.
struct Provenance {
    double cn2 = 5e-14;
    double z = 500.0;
    double sigma = 0.0;
    std::uint64_t seed = 0;
    double wavelength = 1550e-9;
    double w0 = 0.04;
    double pitch = 3.5e-3;
    double tx_power = 0.0;
    double scale_constant = 1.0;  // largest clean-target pixel
    int n_screens = 0;            // gnn datasets only
    int split_index = 0;          // first screen / per-class image in this split

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct DatasetManifest {
    int version = kFormatVersion;
    std::size_t n_images = 0;
    int height = 0;
    int width = 0;
    DatasetKind kind = DatasetKind::cnn_train;
    std::string split;                    // "train" or "test"
    std::vector<int> labels;              // class per image
    std::vector<std::size_t> target_of;   // clean target per image (turbulent_noisy)
    std::vector<int> screen_of;           // screen draw index within its class (turbulent_noisy)
    std::size_t n_targets = 0;            // clean targets stored after the images
    Provenance provenance;

    void validate() const;
    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Manifest plus 32-bit pixels, row-major, images then targets.
struct Dataset {
    DatasetManifest manifest;
    std::vector<float> images;
    std::vector<float> targets;

    [[nodiscard]] std::size_t image_pixels() const noexcept {
        return static_cast<std::size_t>(manifest.height) * static_cast<std::size_t>(manifest.width);
    }
    [[nodiscard]] std::span<const float> image(std::size_t i) const;
    [[nodiscard]] std::span<const float> target(std::size_t i) const;
    [[nodiscard]] GridSpec grid() const;
    [[nodiscard]] NoisyRaster noisy_raster(std::size_t i) const;
    [[nodiscard]] IntensityImage target_image(std::size_t i) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct DatasetPair {
    Dataset train;
    Dataset test;
};

struct GnnDataOptions {
    double sigma = 50.0;
    int n_screens = 20;
    int train_screens = 14;
    std::uint64_t seed = 1;
    bool turbulence = true;  // false: flat screens (noise only)
    unsigned jobs = 1;
};

/// GNN data: every symbol sees n_screens independent phase screens; draw j
/// of symbol ell is image (ell, j). Draws below `train_screens` form the
/// training split. Clean targets (11) are stored in both files.
DatasetPair generate_gnn_dataset(const channel::ChannelConfig& cfg, const GnnDataOptions& options);

/// CNN data: clean receiver images plus N(0, sigma^2), no turbulence.
struct CnnDataOptions {
    double sigma = 2.0;
    int per_class = 150;
    int train_per_class = 130;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
};

DatasetPair generate_cnn_dataset(const channel::ChannelConfig& cfg, const CnnDataOptions& options);

/// Largest pixel over the 11 clean receiver images (rounded to float), the
/// shared network input divisor.
double scale_constant(const channel::Channel& channel);

void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_dataset(const Dataset& data);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);

struct NamedArray {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> values;

    friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

struct WeightFile {
    std::string model;                          // "gnn" or "cnn"
    std::map<std::string, double> attributes;   // architecture and scale
    std::vector<NamedArray> layers;

    friend bool operator==(const WeightFile&, const WeightFile&) = default;
};

std::vector<std::uint8_t> encode_weights(const WeightFile& weights);
WeightFile decode_weights(std::span<const std::uint8_t> bytes);
void save_weights(const WeightFile& weights, const std::filesystem::path& path);
WeightFile load_weights(const std::filesystem::path& path);

/// Writes to a sibling temporary then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace oamfso::io
