#include "oamfso/model_io.hpp"

#include <cmath>

namespace oamfso::io {

namespace {

std::vector<NamedArray> export_blocks(std::vector<nn::ParamBlock> blocks) {
    std::vector<NamedArray> out;
    for (const auto& b : blocks) out.push_back({b.name, b.shape, {b.values.begin(), b.values.end()}});
    return out;
}

void import_blocks(const WeightFile& file, std::vector<nn::ParamBlock> blocks) {
    require(file.layers.size() == blocks.size(), Errc::header_mismatch,
            "weight file holds " + std::to_string(file.layers.size()) + " layers, model expects " +
                std::to_string(blocks.size()));
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const auto& src = file.layers[k];
        require(src.name == blocks[k].name && src.shape == blocks[k].shape, Errc::header_mismatch,
                "layer " + std::to_string(k) + " is " + src.name + " " + nn::shape_string(src.shape) +
                    ", expected " + blocks[k].name + " " + nn::shape_string(blocks[k].shape));
        std::copy(src.values.begin(), src.values.end(), blocks[k].values.begin());
    }
}

double attribute(const WeightFile& file, const std::string& key) {
    const auto it = file.attributes.find(key);
    require(it != file.attributes.end(), Errc::header_mismatch, "weight file lacks attribute " + key);
    return it->second;
}

std::size_t size_attribute(const WeightFile& file, const std::string& key) {
    const double v = attribute(file, key);
    require(v >= 0.0 && v == std::floor(v), Errc::header_mismatch, "attribute " + key + " must be a count");
    return static_cast<std::size_t>(v);
}

}  // namespace

WeightFile to_weight_file(const gnn::GnnModel& model) {
    gnn::GnnParams params = model.params;
    const auto& a = params.arch;
    return {"gnn",
            {{"latent_side", static_cast<double>(a.latent_side)},
             {"image_side", static_cast<double>(a.image_side)},
             {"feature_maps", static_cast<double>(a.feature_maps)},
             {"dropout", a.dropout},
             {"scale", model.scale}},
            export_blocks(params.blocks())};
}

WeightFile to_weight_file(const cnn::CnnModel& model) {
    cnn::CnnParams params = model.params;
    const auto& a = params.arch;
    return {"cnn",
            {{"image_side", static_cast<double>(a.image_side)},
             {"hidden", static_cast<double>(a.hidden)},
             {"classes", static_cast<double>(a.classes)},
             {"scale", model.scale}},
            export_blocks(params.blocks())};
}

gnn::GnnModel gnn_from_weight_file(const WeightFile& file) {
    require(file.model == "gnn", Errc::header_mismatch, "weight file holds a " + file.model + " model");
    gnn::GnnArchitecture arch;
    arch.latent_side = size_attribute(file, "latent_side");
    arch.image_side = size_attribute(file, "image_side");
    arch.feature_maps = size_attribute(file, "feature_maps");
    arch.dropout = attribute(file, "dropout");
    gnn::GnnModel model{gnn::GnnParams::zeros(arch), attribute(file, "scale")};
    import_blocks(file, model.params.blocks());
    return model;
}

cnn::CnnModel cnn_from_weight_file(const WeightFile& file) {
    require(file.model == "cnn", Errc::header_mismatch, "weight file holds a " + file.model + " model");
    cnn::CnnArchitecture arch;
    arch.image_side = size_attribute(file, "image_side");
    arch.hidden = size_attribute(file, "hidden");
    arch.classes = size_attribute(file, "classes");
    cnn::CnnModel model{cnn::CnnParams::zeros(arch), attribute(file, "scale")};
    import_blocks(file, model.params.blocks());
    return model;
}

}  // namespace oamfso::io
