#include "oamfso/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fmt/format.h>

#include "oamfso/parallel.hpp"

namespace oamfso::eval {

std::size_t CrosstalkMatrix::row_sum(int transmitted) const {
    require(transmitted >= 0 && transmitted < kNumSymbols, Errc::invalid_argument, "class out of range");
    const auto& row = counts[static_cast<std::size_t>(transmitted)];
    std::size_t s = 0;
    for (auto c : row) s += c;
    return s;
}

std::size_t CrosstalkMatrix::total() const {
    std::size_t s = 0;
    for (int t = 0; t < kNumSymbols; ++t) s += row_sum(t);
    return s;
}

std::size_t CrosstalkMatrix::diagonal() const {
    std::size_t s = 0;
    for (std::size_t t = 0; t < kNumSymbols; ++t) s += counts[t][t];
    return s;
}

namespace {

void require_pairs(std::span<const Symbol> predictions, std::span<const Symbol> labels) {
    require(!labels.empty(), Errc::empty_input, "no predictions");
    require(predictions.size() == labels.size(), Errc::shape_mismatch,
            "predictions and labels differ in length");
}

}  // namespace

double symbol_error_rate(std::span<const Symbol> predictions, std::span<const Symbol> labels) {
    require_pairs(predictions, labels);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) wrong += predictions[i] == labels[i] ? 0 : 1;
    return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

CrosstalkMatrix crosstalk(std::span<const Symbol> predictions, std::span<const Symbol> labels) {
    require_pairs(predictions, labels);
    CrosstalkMatrix m;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        ++m.counts[static_cast<std::size_t>(labels[i].ell())][static_cast<std::size_t>(predictions[i].ell())];
    }
    return m;
}

void PipelineConfig::validate() const {
    channel.validate();
    gnn.validate();
    require(sigma >= 0.0 && std::isfinite(sigma), Errc::invalid_argument, "sigma must be >= 0");
    require(n_screens >= 2 && train_screens >= 1 && train_screens < n_screens, Errc::invalid_split,
            "train screens must lie in [1, n_screens)");
    require(static_cast<std::size_t>(channel.grid.n) == gnn.image_side, Errc::shape_mismatch,
            "autoencoder image side differs from grid");
    require(gnn_train.epochs >= 0 && gnn_train.batch_size >= 1 && gnn_train.lr > 0.0, Errc::invalid_argument,
            "invalid autoencoder training settings");
    require(cnn_train.epochs >= 0 && cnn_train.batch_size >= 1 && cnn_train.lr > 0.0, Errc::invalid_argument,
            "invalid classifier training settings");
    require(cnn_data.per_class >= 2 && cnn_data.train_per_class >= 1 &&
                cnn_data.train_per_class < cnn_data.per_class,
            Errc::invalid_split, "classifier split must lie in [1, per_class)");
}

PipelineSeeds pipeline_seeds(std::uint64_t seed) {
    return {derive_seed(seed, {0x6e0d}), derive_seed(seed, {0x6e7a}), derive_seed(seed, {0xc0d}),
            derive_seed(seed, {0xc7a})};
}

namespace {

std::string cnn_key(const PipelineConfig& c) {
    const auto& ch = c.channel;
    return fmt::format("{}|{:a}|{:a}|{:a}|{:a}|{:a}|{}|{:a}|{}|{}|{:a}|{}|{}|{}", ch.grid.n, ch.grid.pitch,
                       ch.grid.wavelength, ch.w0, ch.z, ch.tx_power, c.seed, c.cnn_data.sigma,
                       c.cnn_data.per_class, c.cnn_data.train_per_class, c.cnn_train.lr, c.cnn_train.epochs,
                       c.cnn_train.batch_size, c.cnn_train.seed);
}

cnn::CnnTrainingSet cnn_set(const io::Dataset& d) {
    cnn::CnnTrainingSet set;
    for (std::size_t i = 0; i < d.manifest.n_images; ++i) set.images.push_back(d.noisy_raster(i));
    set.labels = d.manifest.labels;
    return set;
}

void train_classifier(const PipelineConfig& config, CnnCache::Entry& entry, const PipelineHooks& hooks) {
    const PipelineSeeds seeds = pipeline_seeds(config.seed);
    io::CnnDataOptions data_opt = config.cnn_data;
    data_opt.seed = seeds.cnn_data;
    data_opt.jobs = config.jobs;
    const io::DatasetPair data = io::generate_cnn_dataset(config.channel, data_opt);
    cnn::CnnTrainConfig train = config.cnn_train;
    train.seed = seeds.cnn_train;
    const cnn::CnnTrainingSet train_set = cnn_set(data.train);
    const cnn::CnnTrainingSet test_set = cnn_set(data.test);
    cnn::CnnArchitecture arch;
    arch.image_side = static_cast<std::size_t>(config.channel.grid.n);
    entry.model = cnn::train_cnn(train_set, data.train.manifest.provenance.scale_constant, arch, train).model;
    entry.test_accuracy = cnn::accuracy(entry.model, test_set);
    if (hooks.log) hooks.log(fmt::format("classifier test accuracy {:.4f}", entry.test_accuracy));
}

}  // namespace

std::shared_ptr<CnnCache::Entry> CnnCache::get(const PipelineConfig& config) {
    std::lock_guard lock(mutex_);
    auto& slot = entries_[cnn_key(config)];
    if (!slot) slot = std::make_shared<Entry>();
    return slot;
}

Evaluation evaluate(const io::Dataset& test, const cnn::CnnModel& classifier, const gnn::GnnModel* corrector,
                    unsigned jobs) {
    const std::size_t n = test.manifest.n_images;
    require(n > 0, Errc::empty_input, "test set is empty");
    Evaluation e;
    e.labels.resize(n);
    e.raw.resize(n);
    if (corrector != nullptr) e.corrected.resize(n);
    parallel_for(n, jobs, [&](std::size_t i) {
        const NoisyRaster img = test.noisy_raster(i);
        e.labels[i] = Symbol(test.manifest.labels[i]);
        e.raw[i] = cnn::classify(img.values(), classifier);
        if (corrector != nullptr) e.corrected[i] = cnn::classify(gnn::reconstruct(img, *corrector).values(), classifier);
    });
    return e;
}

SerReport run_pipeline(const PipelineConfig& config, CnnCache* cache, const PipelineHooks& hooks) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const PipelineSeeds seeds = pipeline_seeds(config.seed);

    CnnCache local;
    CnnCache& classifiers = cache != nullptr ? *cache : local;
    const auto entry = classifiers.get(config);
    std::call_once(entry->once, [&] { train_classifier(config, *entry, hooks); });

    const io::DatasetPair data = io::generate_gnn_dataset(
        config.channel, {.sigma = config.sigma,
                         .n_screens = config.n_screens,
                         .train_screens = config.train_screens,
                         .seed = seeds.gnn_data,
                         .turbulence = config.turbulence,
                         .jobs = config.jobs});
    gnn::GnnTrainingSet train_set;
    for (std::size_t i = 0; i < data.train.manifest.n_images; ++i) {
        train_set.inputs.push_back(data.train.noisy_raster(i));
    }
    for (std::size_t t = 0; t < data.train.manifest.n_targets; ++t) {
        train_set.targets.push_back(data.train.target_image(t));
    }
    train_set.target_of = data.train.manifest.target_of;
    gnn::GnnTrainConfig train = config.gnn_train;
    train.seed = seeds.gnn_train;
    const gnn::GnnTrainResult trained = gnn::train_gnn(train_set, config.gnn, train, hooks.gnn_epoch);

    const Evaluation e = evaluate(data.test, entry->model, &trained.model, config.jobs);
    SerReport r;
    r.cn2 = config.turbulence ? config.channel.turbulence.cn2 : 0.0;
    r.z = config.channel.z;
    r.sigma = config.sigma;
    r.latent_side = config.gnn.latent_side;
    r.seed = config.seed;
    r.ser_uncorrected = symbol_error_rate(e.raw, e.labels);
    r.ser_corrected = symbol_error_rate(e.corrected, e.labels);
    r.n_test = e.labels.size();
    r.train_loss_final = trained.loss_history.empty() ? std::nan("") : trained.loss_history.back();
    r.loss_history = trained.loss_history;
    r.cnn_test_accuracy = entry->test_accuracy;
    r.before = crosstalk(e.raw, e.labels);
    r.after = crosstalk(e.corrected, e.labels);
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (hooks.log) {
        hooks.log(fmt::format("seed {} sigma {} cn2 {:g} z {} latent {}: ser {:.4f} -> {:.4f} ({} test images)",
                              r.seed, r.sigma, r.cn2, r.z, r.latent_side, r.ser_uncorrected, r.ser_corrected,
                              r.n_test));
    }
    return r;
}

std::string_view to_string(SweepAxis axis) noexcept {
    switch (axis) {
        case SweepAxis::latent_side: return "latent_side";
        case SweepAxis::sigma: return "sigma";
        case SweepAxis::cn2: return "cn2";
        case SweepAxis::z: return "z";
    }
    return "unknown";
}

SweepAxis sweep_axis_from_string(std::string_view name) {
    for (auto a : {SweepAxis::latent_side, SweepAxis::sigma, SweepAxis::cn2, SweepAxis::z}) {
        if (name == to_string(a)) return a;
    }
    throw Error(Errc::invalid_argument, "unknown sweep axis '" + std::string(name) + "'");
}

PipelineConfig with_axis(PipelineConfig config, SweepAxis axis, double value) {
    switch (axis) {
        case SweepAxis::latent_side:
            require(value >= 1.0 && value == std::floor(value), Errc::invalid_argument,
                    "latent side must be a positive integer");
            config.gnn.latent_side = static_cast<std::size_t>(value);
            break;
        case SweepAxis::sigma: config.sigma = value; break;
        case SweepAxis::cn2: config.channel.turbulence.cn2 = value; break;
        case SweepAxis::z:
            config.channel.z = value;
            config.channel.turbulence.z = value;
            break;
    }
    return config;
}

std::vector<SweepPoint> sweep(SweepAxis axis, std::span<const double> values, const PipelineConfig& base,
                              std::span<const std::uint64_t> seeds, const PipelineHooks& hooks) {
    require(!values.empty() && !seeds.empty(), Errc::empty_input, "sweep needs values and seeds");
    std::vector<PipelineConfig> configs;
    std::vector<SweepPoint> points;
    for (double v : values) {
        for (auto s : seeds) {
            PipelineConfig c = with_axis(base, axis, v);
            c.seed = s;
            c.validate();
            configs.push_back(c);
            points.push_back({v, {}});
        }
    }
    CnnCache cache;
    // Points run one per thread; each pipeline is single-threaded inside.
    const unsigned jobs = base.jobs;
    PipelineHooks inner = hooks;
    if (jobs > 1) inner.gnn_epoch = {};
    parallel_for(configs.size(), jobs, [&](std::size_t k) {
        PipelineConfig c = configs[k];
        c.jobs = 1;
        points[k].report = run_pipeline(c, &cache, inner);
    });
    return points;
}

std::string sweep_csv(SweepAxis axis, std::span<const SweepPoint> points) {
    std::string out = "axis_name,axis_value,seed,ser_uncorrected,ser_corrected,n_test,train_loss_final,wall_seconds\n";
    for (const auto& p : points) {
        const auto& r = p.report;
        out += fmt::format("{},{},{},{},{},{},{},{:.3f}\n", to_string(axis), p.axis_value, r.seed,
                           r.ser_uncorrected, r.ser_corrected, r.n_test, r.train_loss_final, r.wall_seconds);
    }
    return out;
}

std::string sweep_summary_csv(SweepAxis axis, std::span<const SweepPoint> points) {
    std::string out =
        "axis_name,axis_value,n_seeds,ser_uncorrected_mean,ser_uncorrected_min,ser_uncorrected_max,"
        "ser_corrected_mean,ser_corrected_min,ser_corrected_max\n";
    std::vector<double> values;
    for (const auto& p : points) {
        if (std::find(values.begin(), values.end(), p.axis_value) == values.end()) values.push_back(p.axis_value);
    }
    for (double v : values) {
        std::vector<double> unc, cor;
        for (const auto& p : points) {
            if (p.axis_value != v) continue;
            unc.push_back(p.report.ser_uncorrected);
            cor.push_back(p.report.ser_corrected);
        }
        auto mean = [](const std::vector<double>& x) {
            double s = 0.0;
            for (double e : x) s += e;
            return s / static_cast<double>(x.size());
        };
        out += fmt::format("{},{},{},{},{},{},{},{},{}\n", to_string(axis), v, unc.size(), mean(unc),
                           *std::min_element(unc.begin(), unc.end()), *std::max_element(unc.begin(), unc.end()),
                           mean(cor), *std::min_element(cor.begin(), cor.end()),
                           *std::max_element(cor.begin(), cor.end()));
    }
    return out;
}

std::string crosstalk_csv(const CrosstalkMatrix& matrix, const std::string& title) {
    std::string out = "# " + title + "\ntransmitted";
    for (int p = 0; p < kNumSymbols; ++p) out += fmt::format(",pred_{}", p);
    out += '\n';
    for (int t = 0; t < kNumSymbols; ++t) {
        out += std::to_string(t);
        for (auto c : matrix.counts[static_cast<std::size_t>(t)]) out += fmt::format(",{}", c);
        out += '\n';
    }
    return out;
}

}  // namespace oamfso::eval
