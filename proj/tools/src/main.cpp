#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>

#include "oamfso/model_io.hpp"
#include "run_config.hpp"
#include "selftest.hpp"

namespace {

using namespace oamfso;
using nlohmann::json;

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct ValidationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void log_line(const std::string& text) { std::cerr << text << '\n'; }

void print_resolved(const std::string& command, const json& resolved) {
    std::cout << "resolved " << command << ' ' << resolved.dump() << std::endl;
}

std::filesystem::path with_suffix(const std::filesystem::path& out, const std::string& tag) {
    std::filesystem::path stem = out;
    const std::string ext = out.has_extension() ? out.extension().string() : std::string(".oamd");
    stem.replace_extension();
    stem += "." + tag + ext;
    return stem;
}

// Shared physics and training flags; every value starts at the library default.
struct Options {
    eval::PipelineConfig config;
    std::string kind = "gnn";
    std::string in, out, test_in, config_path, axis = "sigma";
    std::vector<double> values;
    std::vector<std::uint64_t> seeds;
    bool paper_scale = false;
    bool no_turbulence = false;
    bool target = false;
    std::size_t index = 0;
    std::optional<std::uint64_t> seed;
    std::optional<double> z;
    std::optional<int> epochs;
    std::optional<std::size_t> batch;
    std::optional<double> lr;
};

void add_physics(CLI::App& cmd, Options& o) {
    cmd.add_option("--cn2", o.config.channel.turbulence.cn2, "Turbulence strength (m^-2/3)");
    cmd.add_option("--z", o.z, "Screen to receiver distance (m)");
    cmd.add_option("--sigma", o.config.sigma, "Dark-noise standard deviation");
    cmd.add_option("--screens", o.config.n_screens, "Phase screens per class");
    cmd.add_option("--train-screens", o.config.train_screens, "Screens in the training split");
    cmd.add_flag("--paper-scale", o.paper_scale, "99 screens per class, 50 train / 49 test");
    cmd.add_flag("--no-turbulence", o.no_turbulence, "Flat phase screens (noise only)");
}

void add_seed_jobs(CLI::App& cmd, Options& o) {
    cmd.add_option("--seed", o.seed, "Base seed (default OAM_FSO_SEED or 1)");
    cmd.add_option("--jobs", o.config.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

void add_training(CLI::App& cmd, Options& o) {
    cmd.add_option("--epochs", o.epochs, "Training epochs");
    cmd.add_option("--batch", o.batch, "Mini-batch size");
    cmd.add_option("--lr", o.lr, "Adam learning rate");
}

// Folds optional flags into the config; `target` picks which network the
// training flags address.
void resolve(Options& o, const std::string& target) {
    auto& c = o.config;
    if (o.paper_scale) cli::apply_paper_scale(c);
    if (o.no_turbulence) c.turbulence = false;
    if (o.z) {
        c.channel.z = *o.z;
        c.channel.turbulence.z = *o.z;
    }
    c.seed = o.seed ? *o.seed : cli::default_seed();
    if (target == "gnn") {
        if (o.epochs) c.gnn_train.epochs = *o.epochs;
        if (o.batch) c.gnn_train.batch_size = *o.batch;
        if (o.lr) c.gnn_train.lr = *o.lr;
    } else if (target == "cnn") {
        if (o.epochs) c.cnn_train.epochs = *o.epochs;
        if (o.batch) c.cnn_train.batch_size = *o.batch;
        if (o.lr) c.cnn_train.lr = *o.lr;
    }
    c.gnn.image_side = static_cast<std::size_t>(c.channel.grid.n);
    c.validate();
}

void require_out(const Options& o) {
    if (o.out.empty()) throw ValidationFailure("--out is required");
}

int gen_data(Options& o) {
    resolve(o, "");
    require_out(o);
    if (o.kind != "gnn" && o.kind != "cnn") throw ValidationFailure("--kind must be gnn or cnn");
    const auto& c = o.config;
    json resolved = cli::to_json(c);
    resolved["kind"] = o.kind;
    resolved["out"] = o.out;
    print_resolved("gen-data", resolved);
    const auto t0 = std::chrono::steady_clock::now();
    io::DatasetPair pair;
    if (o.kind == "gnn") {
        pair = io::generate_gnn_dataset(c.channel, {.sigma = c.sigma,
                                                    .n_screens = c.n_screens,
                                                    .train_screens = c.train_screens,
                                                    .seed = c.seed,
                                                    .turbulence = c.turbulence,
                                                    .jobs = c.jobs});
    } else {
        io::CnnDataOptions opt = c.cnn_data;
        opt.seed = c.seed;
        opt.jobs = c.jobs;
        pair = io::generate_cnn_dataset(c.channel, opt);
    }
    const auto train_path = with_suffix(o.out, "train");
    const auto test_path = with_suffix(o.out, "test");
    io::save_dataset(pair.train, train_path);
    io::save_dataset(pair.test, test_path);
    log_line(fmt::format("wrote {} ({} images) and {} ({} images) in {:.1f}s", train_path.string(),
                         pair.train.manifest.n_images, test_path.string(), pair.test.manifest.n_images,
                         std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()));
    return 0;
}

gnn::GnnTrainingSet gnn_set(const io::Dataset& d) {
    require(d.manifest.kind == io::DatasetKind::turbulent_noisy, Errc::invalid_argument,
            "autoencoder training needs a turbulent_noisy dataset");
    gnn::GnnTrainingSet set;
    for (std::size_t i = 0; i < d.manifest.n_images; ++i) set.inputs.push_back(d.noisy_raster(i));
    for (std::size_t t = 0; t < d.manifest.n_targets; ++t) set.targets.push_back(d.target_image(t));
    set.target_of = d.manifest.target_of;
    return set;
}

cnn::CnnTrainingSet cnn_set(const io::Dataset& d) {
    cnn::CnnTrainingSet set;
    for (std::size_t i = 0; i < d.manifest.n_images; ++i) set.images.push_back(d.noisy_raster(i));
    set.labels = d.manifest.labels;
    return set;
}

io::Dataset load_input(const std::string& path) {
    if (path.empty()) throw ValidationFailure("--in is required");
    if (!std::filesystem::exists(path)) throw ValidationFailure("input " + path + " does not exist");
    return io::load_dataset(path);
}

int train_gnn_cmd(Options& o) {
    resolve(o, "gnn");
    require_out(o);
    const io::Dataset data = load_input(o.in);
    const auto& c = o.config;
    json resolved = {{"in", o.in}, {"out", o.out}, {"seed", c.seed}, {"latent", c.gnn.latent_side},
                     {"lr", c.gnn_train.lr}, {"epochs", c.gnn_train.epochs}, {"batch", c.gnn_train.batch_size},
                     {"dropout", c.gnn.dropout}, {"feature_maps", c.gnn.feature_maps}};
    print_resolved("train-gnn", resolved);
    gnn::GnnArchitecture arch = c.gnn;
    arch.image_side = static_cast<std::size_t>(data.manifest.height);
    gnn::GnnTrainConfig train = c.gnn_train;
    train.seed = c.seed;
    const auto result = gnn::train_gnn(gnn_set(data), arch, train, [](int epoch, double loss) {
        log_line(fmt::format("epoch {} loss {:.6e}", epoch, loss));
    });
    io::save_model(result.model, o.out);
    log_line("wrote " + o.out);
    return 0;
}

int train_cnn_cmd(Options& o) {
    resolve(o, "cnn");
    require_out(o);
    const io::Dataset data = load_input(o.in);
    require(data.manifest.kind == io::DatasetKind::cnn_train, Errc::invalid_argument,
            "classifier training needs a cnn_train dataset");
    const auto& c = o.config;
    json resolved = {{"in", o.in}, {"test", o.test_in}, {"out", o.out}, {"seed", c.seed},
                     {"lr", c.cnn_train.lr}, {"epochs", c.cnn_train.epochs}, {"batch", c.cnn_train.batch_size}};
    print_resolved("train-cnn", resolved);
    cnn::CnnTrainConfig train = c.cnn_train;
    train.seed = c.seed;
    cnn::CnnArchitecture arch;
    arch.image_side = static_cast<std::size_t>(data.manifest.height);
    const auto result = cnn::train_cnn(cnn_set(data), data.manifest.provenance.scale_constant, arch, train,
                                       [](int epoch, double loss) {
                                           log_line(fmt::format("epoch {} loss {:.6e}", epoch, loss));
                                       });
    if (!o.test_in.empty()) {
        const io::Dataset test = load_input(o.test_in);
        log_line(fmt::format("test accuracy {:.4f}", cnn::accuracy(result.model, cnn_set(test))));
    }
    io::save_model(result.model, o.out);
    log_line("wrote " + o.out);
    return 0;
}

void write_report(const eval::SerReport& r, const std::string& out) {
    const json j = cli::to_json(r);
    if (out.empty()) {
        std::cout << j.dump(2) << std::endl;
        return;
    }
    io::write_file_atomic(out, j.dump(2) + "\n");
    std::filesystem::path ct = out;
    ct.replace_extension(".crosstalk.csv");
    io::write_file_atomic(ct, eval::crosstalk_csv(r.before, "before correction") +
                                  eval::crosstalk_csv(r.after, "after correction"));
    log_line("wrote " + out + " and " + ct.string());
}

int eval_cmd(Options& o) {
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw ValidationFailure("cannot read config " + o.config_path);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw ValidationFailure("config " + o.config_path + " is not valid JSON: " + e.what());
        }
        cli::merge_json(j, o.config);
        if (!o.seed && j.contains("seed")) o.seed = o.config.seed;
    }
    resolve(o, "gnn");
    json resolved = cli::to_json(o.config);
    resolved["out"] = o.out;
    print_resolved("eval", resolved);
    eval::PipelineHooks hooks{log_line, [](int epoch, double loss) {
                                  if (epoch % 10 == 0) log_line(fmt::format("gnn epoch {} loss {:.6e}", epoch, loss));
                              }};
    const eval::SerReport r = eval::run_pipeline(o.config, nullptr, hooks);
    write_report(r, o.out);
    return 0;
}

int sweep_cmd(Options& o) {
    resolve(o, "gnn");
    require_out(o);
    const eval::SweepAxis axis = eval::sweep_axis_from_string(o.axis);
    if (o.values.empty()) throw ValidationFailure("--values is required");
    if (o.seeds.empty()) o.seeds = {o.config.seed};
    for (double v : o.values) eval::with_axis(o.config, axis, v).validate();
    json resolved = cli::to_json(o.config);
    resolved["axis"] = o.axis;
    resolved["values"] = o.values;
    resolved["seeds"] = o.seeds;
    resolved["out"] = o.out;
    print_resolved("sweep", resolved);
    const auto points = eval::sweep(axis, o.values, o.config, o.seeds, {log_line, {}});
    io::write_file_atomic(o.out, eval::sweep_csv(axis, points));
    std::filesystem::path summary = o.out;
    summary.replace_extension(".summary.csv");
    io::write_file_atomic(summary, eval::sweep_summary_csv(axis, points));
    std::filesystem::path ct = o.out;
    ct.replace_extension(".crosstalk.csv");
    std::string blocks;
    for (const auto& p : points) {
        const auto tag = fmt::format("{}={} seed={}", o.axis, p.axis_value, p.report.seed);
        blocks += eval::crosstalk_csv(p.report.before, tag + " before correction");
        blocks += eval::crosstalk_csv(p.report.after, tag + " after correction");
    }
    io::write_file_atomic(ct, blocks);
    log_line("wrote " + o.out + ", " + summary.string() + " and " + ct.string());
    return 0;
}

int render_cmd(Options& o) {
    require_out(o);
    const io::Dataset data = load_input(o.in);
    const std::size_t count = o.target ? data.manifest.n_targets : data.manifest.n_images;
    if (o.index >= count) {
        throw ValidationFailure(fmt::format("--index {} out of range ({} available)", o.index, count));
    }
    print_resolved("render", {{"in", o.in}, {"index", o.index}, {"target", o.target}, {"out", o.out}});
    const auto px = o.target ? data.target(o.index) : data.image(o.index);
    // Negative pixels clamp to 0 for display; then min-max to 8 bits.
    float lo = std::numeric_limits<float>::infinity(), hi = 0.0f;
    for (float v : px) {
        const float c = std::max(v, 0.0f);
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    std::string pgm = fmt::format("P5\n{} {}\n255\n", data.manifest.width, data.manifest.height);
    const float span = hi - lo;
    for (float v : px) {
        const float c = std::max(v, 0.0f);
        const float t = span > 0.0f ? (c - lo) / span : 0.0f;
        pgm.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0f))));
    }
    io::write_file_atomic(o.out, pgm);
    log_line("wrote " + o.out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"OAM free-space optical link simulator with autoencoder correction"};
    app.require_subcommand(1);
    Options o;

    auto* gen = app.add_subcommand("gen-data", "Generate train/test containers");
    gen->add_option("--kind", o.kind, "gnn (turbulent) or cnn (clean + sigma 2)")->check(CLI::IsMember({"gnn", "cnn"}));
    add_physics(*gen, o);
    add_seed_jobs(*gen, o);
    gen->add_option("--out", o.out, "Output path; .train/.test are inserted before the extension");

    auto* tg = app.add_subcommand("train-gnn", "Train the autoencoder on a turbulent training container");
    tg->add_option("--in", o.in, "Training container");
    tg->add_option("--latent", o.config.gnn.latent_side, "Latent side s (s*s units)");
    add_training(*tg, o);
    add_seed_jobs(*tg, o);
    tg->add_option("--out", o.out, "Weight file");

    auto* tc = app.add_subcommand("train-cnn", "Train the classifier on a clean container");
    tc->add_option("--in", o.in, "Training container");
    tc->add_option("--test", o.test_in, "Optional test container for an accuracy report");
    add_training(*tc, o);
    add_seed_jobs(*tc, o);
    tc->add_option("--out", o.out, "Weight file");

    auto* ev = app.add_subcommand("eval", "Run the full pipeline for one configuration");
    ev->add_option("--config", o.config_path, "JSON run config; flags override it");
    add_physics(*ev, o);
    ev->add_option("--latent", o.config.gnn.latent_side, "Latent side s (s*s units)");
    add_training(*ev, o);
    add_seed_jobs(*ev, o);
    ev->add_option("--out", o.out, "Report JSON (cross-talk CSV written alongside)");

    auto* sw = app.add_subcommand("sweep", "Run the pipeline over one axis and several seeds");
    sw->add_option("--axis", o.axis, "latent_side, sigma, cn2 or z");
    sw->add_option("--values", o.values, "Axis values")->delimiter(',');
    sw->add_option("--seeds", o.seeds, "Seeds")->delimiter(',');
    add_physics(*sw, o);
    sw->add_option("--latent", o.config.gnn.latent_side, "Latent side s (s*s units)");
    add_training(*sw, o);
    add_seed_jobs(*sw, o);
    sw->add_option("--out", o.out, "CSV report");

    auto* rd = app.add_subcommand("render", "Write one image of a container as binary PGM");
    rd->add_option("--in", o.in, "Container");
    rd->add_option("--index", o.index, "Image index");
    rd->add_flag("--target", o.target, "Render a clean target instead of an image");
    rd->add_option("--out", o.out, "PGM path");

    auto* st = app.add_subcommand("selftest", "Run the quick invariant suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*gen) return gen_data(o);
        if (*tg) return train_gnn_cmd(o);
        if (*tc) return train_cnn_cmd(o);
        if (*ev) return eval_cmd(o);
        if (*sw) return sweep_cmd(o);
        if (*rd) return render_cmd(o);
        if (*st) return cli::run_selftest(std::cout) ? 0 : kExitRuntime;
    } catch (const ValidationFailure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const oamfso::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        switch (e.code()) {
            case Errc::invalid_argument:
            case Errc::invalid_split:
            case Errc::beam_too_large:
            case Errc::sampling_violation:
            case Errc::missing_class:
                return kExitValidation;
            default:
                return kExitRuntime;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitValidation;
}
