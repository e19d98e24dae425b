#include "run_config.hpp"

#include <cstdlib>

namespace oamfso::cli {

using nlohmann::json;

std::uint64_t default_seed() {
    if (const char* env = std::getenv("OAM_FSO_SEED"); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const auto value = std::strtoull(env, &end, 10);
        require(end != nullptr && *end == '\0', Errc::invalid_argument,
                std::string("OAM_FSO_SEED is not an unsigned integer: ") + env);
        return value;
    }
    return 1;
}

json to_json(const eval::PipelineConfig& c) {
    return {
        {"grid", {{"n", c.channel.grid.n}, {"pitch", c.channel.grid.pitch}, {"wavelength", c.channel.grid.wavelength}}},
        {"w0", c.channel.w0},
        {"slm_to_screen", c.channel.slm_to_screen},
        {"z", c.channel.z},
        {"tx_power", c.channel.tx_power},
        {"turbulence",
         {{"enabled", c.turbulence},
          {"cn2", c.channel.turbulence.cn2},
          {"l_min", c.channel.turbulence.l_min},
          {"l_max", c.channel.turbulence.l_max},
          {"path_length", c.channel.turbulence.z}}},
        {"sigma", c.sigma},
        {"screens", c.n_screens},
        {"train_screens", c.train_screens},
        {"gnn",
         {{"latent", c.gnn.latent_side},
          {"feature_maps", c.gnn.feature_maps},
          {"dropout", c.gnn.dropout},
          {"lr", c.gnn_train.lr},
          {"epochs", c.gnn_train.epochs},
          {"batch", c.gnn_train.batch_size}}},
        {"cnn",
         {{"lr", c.cnn_train.lr},
          {"epochs", c.cnn_train.epochs},
          {"batch", c.cnn_train.batch_size},
          {"sigma", c.cnn_data.sigma},
          {"per_class", c.cnn_data.per_class},
          {"train_per_class", c.cnn_data.train_per_class}}},
        {"seed", c.seed},
        {"jobs", c.jobs},
    };
}

namespace {

template <class T>
void take(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void merge_json(const json& j, eval::PipelineConfig& c) {
    require(j.is_object(), Errc::invalid_argument, "run config must be a JSON object");
    try {
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            take(g, "n", c.channel.grid.n);
            take(g, "pitch", c.channel.grid.pitch);
            take(g, "wavelength", c.channel.grid.wavelength);
        }
        take(j, "w0", c.channel.w0);
        take(j, "slm_to_screen", c.channel.slm_to_screen);
        if (j.contains("z")) {
            take(j, "z", c.channel.z);
            c.channel.turbulence.z = c.channel.z;
        }
        take(j, "tx_power", c.channel.tx_power);
        if (j.contains("turbulence")) {
            const auto& t = j.at("turbulence");
            take(t, "enabled", c.turbulence);
            take(t, "cn2", c.channel.turbulence.cn2);
            take(t, "l_min", c.channel.turbulence.l_min);
            take(t, "l_max", c.channel.turbulence.l_max);
            take(t, "path_length", c.channel.turbulence.z);
        }
        take(j, "cn2", c.channel.turbulence.cn2);
        take(j, "sigma", c.sigma);
        take(j, "screens", c.n_screens);
        take(j, "train_screens", c.train_screens);
        if (j.contains("gnn")) {
            const auto& g = j.at("gnn");
            take(g, "latent", c.gnn.latent_side);
            take(g, "feature_maps", c.gnn.feature_maps);
            take(g, "dropout", c.gnn.dropout);
            take(g, "lr", c.gnn_train.lr);
            take(g, "epochs", c.gnn_train.epochs);
            take(g, "batch", c.gnn_train.batch_size);
        }
        if (j.contains("cnn")) {
            const auto& n = j.at("cnn");
            take(n, "lr", c.cnn_train.lr);
            take(n, "epochs", c.cnn_train.epochs);
            take(n, "batch", c.cnn_train.batch_size);
            take(n, "sigma", c.cnn_data.sigma);
            take(n, "per_class", c.cnn_data.per_class);
            take(n, "train_per_class", c.cnn_data.train_per_class);
        }
        take(j, "seed", c.seed);
        take(j, "jobs", c.jobs);
    } catch (const json::exception& e) {
        throw Error(Errc::invalid_argument, std::string("run config: ") + e.what());
    }
    c.gnn.image_side = static_cast<std::size_t>(c.channel.grid.n);
}

void apply_paper_scale(eval::PipelineConfig& c) {
    c.n_screens = 99;
    c.train_screens = 50;
}

json to_json(const eval::SerReport& r) {
    auto matrix = [](const eval::CrosstalkMatrix& m) {
        json rows = json::array();
        for (const auto& row : m.counts) rows.push_back(row);
        return rows;
    };
    return {{"cn2", r.cn2},
            {"z", r.z},
            {"sigma", r.sigma},
            {"latent_side", r.latent_side},
            {"seed", r.seed},
            {"ser_uncorrected", r.ser_uncorrected},
            {"ser_corrected", r.ser_corrected},
            {"n_test", r.n_test},
            {"train_loss_final", r.train_loss_final},
            {"cnn_test_accuracy", r.cnn_test_accuracy},
            {"crosstalk_before", matrix(r.before)},
            {"crosstalk_after", matrix(r.after)}};
}

}  // namespace oamfso::cli
