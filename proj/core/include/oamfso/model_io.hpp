#pragma once

#include <filesystem>

#include "oamfso/autoencoder.hpp"
#include "oamfso/dataset_io.hpp"
#include "oamfso/demodulator.hpp"

namespace oamfso::io {

WeightFile to_weight_file(const gnn::GnnModel& model);
WeightFile to_weight_file(const cnn::CnnModel& model);

/// Rebuild a model, checking layer names and shapes against the architecture
/// recorded in the file.
gnn::GnnModel gnn_from_weight_file(const WeightFile& file);
cnn::CnnModel cnn_from_weight_file(const WeightFile& file);

inline void save_model(const gnn::GnnModel& m, const std::filesystem::path& p) { save_weights(to_weight_file(m), p); }
inline void save_model(const cnn::CnnModel& m, const std::filesystem::path& p) { save_weights(to_weight_file(m), p); }
inline gnn::GnnModel load_gnn(const std::filesystem::path& p) { return gnn_from_weight_file(load_weights(p)); }
inline cnn::CnnModel load_cnn(const std::filesystem::path& p) { return cnn_from_weight_file(load_weights(p)); }

}  // namespace oamfso::io
