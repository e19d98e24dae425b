#include "oamfso/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <system_error>

#include "oamfso/parallel.hpp"
#include "oamfso/turbulence.hpp"

namespace oamfso::io {

using nlohmann::json;

namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'O', 'A', 'M', 'D'};
constexpr std::size_t kPreamble = kMagic.size() + 1 + 4;

// Stream tags for derive_seed paths.
constexpr std::uint64_t kScreenStream = 1;
constexpr std::uint64_t kGnnNoiseStream = 2;
constexpr std::uint64_t kCnnNoiseStream = 3;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

void put_f32(std::vector<std::uint8_t>& out, std::span<const float> values) {
    out.reserve(out.size() + values.size() * 4);
    for (float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

void put_f64(std::vector<std::uint8_t>& out, std::span<const double> values) {
    out.reserve(out.size() + values.size() * 8);
    for (double d : values) {
        const auto bits = std::bit_cast<std::uint64_t>(d);
        put_u32(out, static_cast<std::uint32_t>(bits));
        put_u32(out, static_cast<std::uint32_t>(bits >> 32));
    }
}

std::vector<std::uint8_t> container(const json& header, std::span<const std::uint8_t> payload) {
    const std::string text = header.dump();
    require(text.size() <= 0xffffffffu, Errc::io_error, "header too large");
    std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
    out.push_back(kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

struct Parsed {
    json header;
    std::span<const std::uint8_t> payload;
};

Parsed parse_container(std::span<const std::uint8_t> bytes) {
    const std::size_t head = std::min(bytes.size(), kMagic.size());
    require(std::equal(kMagic.begin(), kMagic.begin() + head, bytes.begin()), Errc::bad_magic,
            "not an OAMD container");
    require(bytes.size() >= kPreamble, Errc::truncated, "container preamble is truncated");
    require(bytes[4] == kFormatVersion, Errc::unsupported_version,
            "container version " + std::to_string(bytes[4]) + " is not supported");
    const std::size_t header_len = get_u32(bytes.data() + 5);
    require(bytes.size() - kPreamble >= header_len, Errc::truncated, "container header is truncated");
    Parsed parsed;
    try {
        parsed.header = json::parse(bytes.begin() + kPreamble, bytes.begin() + kPreamble + header_len);
    } catch (const json::exception& e) {
        throw Error(Errc::header_mismatch, std::string("container header is not valid JSON: ") + e.what());
    }
    parsed.payload = bytes.subspan(kPreamble + header_len);
    return parsed;
}

void check_payload(std::size_t have, std::size_t want) {
    require(have >= want, Errc::truncated,
            "payload holds " + std::to_string(have) + " bytes, header describes " + std::to_string(want));
    require(have == want, Errc::header_mismatch,
            "payload holds " + std::to_string(have) + " bytes, header describes " + std::to_string(want));
}

template <class F>
auto header_field(F&& get) {
    try {
        return get();
    } catch (const json::exception& e) {
        throw Error(Errc::header_mismatch, std::string("container header: ") + e.what());
    }
}

std::vector<float> to_f32(std::span<const double> values) {
    std::vector<float> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [](double v) { return static_cast<float>(v); });
    return out;
}

json provenance_json(const Provenance& p) {
    return {{"cn2", p.cn2},         {"z", p.z},         {"sigma", p.sigma},
            {"seed", p.seed},       {"wavelength", p.wavelength}, {"w0", p.w0},
            {"pitch", p.pitch},     {"tx_power", p.tx_power},     {"scale_constant", p.scale_constant},
            {"n_screens", p.n_screens}, {"split_index", p.split_index}};
}

Provenance provenance_from(const json& j) {
    Provenance p;
    p.cn2 = j.at("cn2").get<double>();
    p.z = j.at("z").get<double>();
    p.sigma = j.at("sigma").get<double>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.wavelength = j.at("wavelength").get<double>();
    p.w0 = j.at("w0").get<double>();
    p.pitch = j.at("pitch").get<double>();
    p.tx_power = j.at("tx_power").get<double>();
    p.scale_constant = j.at("scale_constant").get<double>();
    p.n_screens = j.at("n_screens").get<int>();
    p.split_index = j.at("split_index").get<int>();
    return p;
}

Provenance base_provenance(const channel::ChannelConfig& cfg, double sigma, std::uint64_t seed,
                           double scale) {
    Provenance p;
    p.cn2 = cfg.turbulence.cn2;
    p.z = cfg.z;
    p.sigma = sigma;
    p.seed = seed;
    p.wavelength = cfg.grid.wavelength;
    p.w0 = cfg.w0;
    p.pitch = cfg.grid.pitch;
    p.tx_power = cfg.tx_power;
    p.scale_constant = scale;
    return p;
}

std::vector<float> clean_targets(const channel::Channel& channel) {
    std::vector<float> out;
    for (int ell = 0; ell < channel::kNumSymbols; ++ell) {
        const auto img = to_f32(channel.clean_image(channel::Symbol(ell)).values());
        out.insert(out.end(), img.begin(), img.end());
    }
    return out;
}

}  // namespace

std::string_view to_string(DatasetKind kind) noexcept {
    switch (kind) {
        case DatasetKind::clean_target: return "clean_target";
        case DatasetKind::turbulent_noisy: return "turbulent_noisy";
        case DatasetKind::cnn_train: return "cnn_train";
    }
    return "unknown";
}

DatasetKind dataset_kind_from_string(std::string_view name) {
    for (auto kind : {DatasetKind::clean_target, DatasetKind::turbulent_noisy, DatasetKind::cnn_train}) {
        if (name == to_string(kind)) return kind;
    }
    throw Error(Errc::header_mismatch, "unknown dataset kind '" + std::string(name) + "'");
}

void DatasetManifest::validate() const {
    require(version == kFormatVersion, Errc::unsupported_version, "manifest version mismatch");
    require(height > 0 && width > 0, Errc::header_mismatch, "image extent must be positive");
    require(labels.size() == n_images, Errc::header_mismatch, "labels length differs from n_images");
    for (int l : labels) {
        require(l >= 0 && l < channel::kNumSymbols, Errc::header_mismatch, "label out of [0, 10]");
    }
    if (kind == DatasetKind::turbulent_noisy) {
        require(target_of.size() == n_images && screen_of.size() == n_images, Errc::header_mismatch,
                "target and screen indices must cover every image");
        for (auto t : target_of) require(t < n_targets, Errc::header_mismatch, "target index out of range");
    } else {
        require(target_of.empty() && screen_of.empty(), Errc::header_mismatch,
                "only turbulent datasets carry target and screen indices");
    }
}

std::span<const float> Dataset::image(std::size_t i) const {
    require(i < manifest.n_images, Errc::invalid_argument, "image index out of range");
    return std::span<const float>(images).subspan(i * image_pixels(), image_pixels());
}

std::span<const float> Dataset::target(std::size_t i) const {
    require(i < manifest.n_targets, Errc::invalid_argument, "target index out of range");
    return std::span<const float>(targets).subspan(i * image_pixels(), image_pixels());
}

GridSpec Dataset::grid() const {
    require(manifest.height == manifest.width, Errc::header_mismatch, "images must be square");
    return GridSpec{manifest.height, manifest.provenance.pitch, manifest.provenance.wavelength};
}

NoisyRaster Dataset::noisy_raster(std::size_t i) const {
    const auto px = image(i);
    return NoisyRaster(grid(), std::vector<double>(px.begin(), px.end()));
}

IntensityImage Dataset::target_image(std::size_t i) const {
    const auto px = target(i);
    return IntensityImage(grid(), std::vector<double>(px.begin(), px.end()));
}

double scale_constant(const channel::Channel& channel) {
    const auto targets = clean_targets(channel);
    return *std::max_element(targets.begin(), targets.end());
}

DatasetPair generate_gnn_dataset(const channel::ChannelConfig& cfg, const GnnDataOptions& opt) {
    require(opt.n_screens >= 2 && opt.train_screens >= 1 && opt.train_screens < opt.n_screens,
            Errc::invalid_split, "train screens must lie in [1, n_screens)");
    require(opt.sigma >= 0.0, Errc::invalid_argument, "sigma must be >= 0");
    const channel::Channel channel(cfg);
    const GridSpec& grid = cfg.grid;
    const std::vector<float> targets = clean_targets(channel);
    const double scale = *std::max_element(targets.begin(), targets.end());
    const std::vector<double> amplitudes =
        opt.turbulence ? turbulence::screen_amplitudes(grid, cfg.turbulence, grid.wavelength)
                       : std::vector<double>{};

    const std::size_t npix = grid.pixels();
    const auto screens = static_cast<std::size_t>(opt.n_screens);
    // Image (ell, j) lives at slot j * 11 + ell during generation.
    std::vector<float> all(screens * channel::kNumSymbols * npix);
    parallel_for(screens, opt.jobs, [&](std::size_t j) {
        for (int ell = 0; ell < channel::kNumSymbols; ++ell) {
            PhaseScreen screen(grid);
            if (opt.turbulence) {
                Rng screen_rng(derive_seed(opt.seed, {kScreenStream, j, static_cast<std::uint64_t>(ell)}));
                screen = turbulence::phase_screen(grid, amplitudes, screen_rng);
            }
            Rng noise_rng(derive_seed(opt.seed, {kGnnNoiseStream, j, static_cast<std::uint64_t>(ell)}));
            const auto noisy = channel.turbulent_image(channel::Symbol(ell), screen, opt.sigma, noise_rng);
            const auto px = noisy.pixels.values();
            std::transform(px.begin(), px.end(),
                           all.begin() + static_cast<std::ptrdiff_t>((j * channel::kNumSymbols + ell) * npix),
                           [](double v) { return static_cast<float>(v); });
        }
    });

    Provenance prov = base_provenance(cfg, opt.sigma, opt.seed, scale);
    if (!opt.turbulence) prov.cn2 = 0.0;
    prov.n_screens = opt.n_screens;
    auto make = [&](int first, int last, const char* split) {
        Dataset d;
        d.manifest.kind = DatasetKind::turbulent_noisy;
        d.manifest.height = d.manifest.width = grid.n;
        d.manifest.split = split;
        d.manifest.n_targets = channel::kNumSymbols;
        d.manifest.provenance = prov;
        d.manifest.provenance.split_index = first;
        d.targets = targets;
        for (int ell = 0; ell < channel::kNumSymbols; ++ell) {
            for (int j = first; j < last; ++j) {
                d.manifest.labels.push_back(ell);
                d.manifest.target_of.push_back(static_cast<std::size_t>(ell));
                d.manifest.screen_of.push_back(j);
                const auto src = all.begin() +
                                 static_cast<std::ptrdiff_t>((static_cast<std::size_t>(j) * channel::kNumSymbols +
                                                              static_cast<std::size_t>(ell)) * npix);
                d.images.insert(d.images.end(), src, src + static_cast<std::ptrdiff_t>(npix));
            }
        }
        d.manifest.n_images = d.manifest.labels.size();
        return d;
    };
    return {make(0, opt.train_screens, "train"), make(opt.train_screens, opt.n_screens, "test")};
}

DatasetPair generate_cnn_dataset(const channel::ChannelConfig& cfg, const CnnDataOptions& opt) {
    require(opt.per_class >= 2 && opt.train_per_class >= 1 && opt.train_per_class < opt.per_class,
            Errc::invalid_split, "train images per class must lie in [1, per_class)");
    require(opt.sigma >= 0.0, Errc::invalid_argument, "sigma must be >= 0");
    const channel::Channel channel(cfg);
    const GridSpec& grid = cfg.grid;
    const std::size_t npix = grid.pixels();
    std::vector<IntensityImage> clean;
    for (int ell = 0; ell < channel::kNumSymbols; ++ell) clean.push_back(channel.clean_image(channel::Symbol(ell)));
    const std::vector<float> targets = clean_targets(channel);
    const double scale = *std::max_element(targets.begin(), targets.end());

    const auto per_class = static_cast<std::size_t>(opt.per_class);
    std::vector<float> all(channel::kNumSymbols * per_class * npix);
    parallel_for(channel::kNumSymbols * per_class, opt.jobs, [&](std::size_t slot) {
        const std::size_t ell = slot / per_class;
        const std::size_t i = slot % per_class;
        Rng noise_rng(derive_seed(opt.seed, {kCnnNoiseStream, ell, i}));
        const auto noisy = channel::add_dark_noise(clean[ell], opt.sigma, noise_rng);
        const auto px = noisy.pixels.values();
        std::transform(px.begin(), px.end(), all.begin() + static_cast<std::ptrdiff_t>(slot * npix),
                       [](double v) { return static_cast<float>(v); });
    });

    const Provenance prov = base_provenance(cfg, opt.sigma, opt.seed, scale);
    auto make = [&](int first, int last, const char* split) {
        Dataset d;
        d.manifest.kind = DatasetKind::cnn_train;
        d.manifest.height = d.manifest.width = grid.n;
        d.manifest.split = split;
        d.manifest.provenance = prov;
        d.manifest.provenance.cn2 = 0.0;
        d.manifest.provenance.split_index = first;
        for (std::size_t ell = 0; ell < channel::kNumSymbols; ++ell) {
            for (int i = first; i < last; ++i) {
                d.manifest.labels.push_back(static_cast<int>(ell));
                const auto src = all.begin() +
                                 static_cast<std::ptrdiff_t>((ell * per_class + static_cast<std::size_t>(i)) * npix);
                d.images.insert(d.images.end(), src, src + static_cast<std::ptrdiff_t>(npix));
            }
        }
        d.manifest.n_images = d.manifest.labels.size();
        return d;
    };
    return {make(0, opt.train_per_class, "train"), make(opt.train_per_class, opt.per_class, "test")};
}

std::vector<std::uint8_t> encode_dataset(const Dataset& data) {
    const auto& m = data.manifest;
    m.validate();
    require(data.images.size() == m.n_images * data.image_pixels() &&
                data.targets.size() == m.n_targets * data.image_pixels(),
            Errc::header_mismatch, "pixel payload does not match manifest");
    json header = {{"kind", to_string(m.kind)},  {"version", m.version},     {"n_images", m.n_images},
                   {"height", m.height},         {"width", m.width},         {"split", m.split},
                   {"labels", m.labels},         {"target_of", m.target_of}, {"screen_of", m.screen_of},
                   {"n_targets", m.n_targets},   {"provenance", provenance_json(m.provenance)}};
    std::vector<std::uint8_t> payload;
    put_f32(payload, data.images);
    put_f32(payload, data.targets);
    return container(header, payload);
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
    const Parsed parsed = parse_container(bytes);
    const json& h = parsed.header;
    Dataset d;
    header_field([&] {
        auto& m = d.manifest;
        m.kind = dataset_kind_from_string(h.at("kind").get<std::string>());
        m.version = h.at("version").get<int>();
        m.n_images = h.at("n_images").get<std::size_t>();
        m.height = h.at("height").get<int>();
        m.width = h.at("width").get<int>();
        m.split = h.at("split").get<std::string>();
        m.labels = h.at("labels").get<std::vector<int>>();
        m.target_of = h.at("target_of").get<std::vector<std::size_t>>();
        m.screen_of = h.at("screen_of").get<std::vector<int>>();
        m.n_targets = h.at("n_targets").get<std::size_t>();
        m.provenance = provenance_from(h.at("provenance"));
        return 0;
    });
    d.manifest.validate();
    const std::size_t npix = d.image_pixels();
    const std::size_t n_images = d.manifest.n_images * npix;
    const std::size_t n_targets = d.manifest.n_targets * npix;
    check_payload(parsed.payload.size(), (n_images + n_targets) * 4);
    auto read = [&](std::size_t offset, std::size_t count) {
        std::vector<float> out(count);
        const std::uint8_t* p = parsed.payload.data() + offset * 4;
        for (std::size_t i = 0; i < count; ++i) out[i] = std::bit_cast<float>(get_u32(p + 4 * i));
        return out;
    };
    d.images = read(0, n_images);
    d.targets = read(n_images, n_targets);
    return d;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
    write_file_atomic(path, encode_dataset(data));
}

Dataset load_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

std::vector<std::uint8_t> encode_weights(const WeightFile& weights) {
    json layers = json::array();
    std::vector<std::uint8_t> payload;
    for (const auto& layer : weights.layers) {
        std::size_t count = 1;
        for (auto d : layer.shape) count *= d;
        require(count == layer.values.size(), Errc::header_mismatch,
                "layer " + layer.name + " shape does not match its values");
        layers.push_back({{"name", layer.name}, {"shape", layer.shape}});
        put_f64(payload, layer.values);
    }
    json header = {{"kind", "weights"},
                   {"version", kFormatVersion},
                   {"model", weights.model},
                   {"attributes", weights.attributes},
                   {"layers", layers}};
    return container(header, payload);
}

WeightFile decode_weights(std::span<const std::uint8_t> bytes) {
    const Parsed parsed = parse_container(bytes);
    const json& h = parsed.header;
    WeightFile w;
    std::vector<std::size_t> counts;
    header_field([&] {
        require(h.at("kind").get<std::string>() == "weights", Errc::header_mismatch,
                "container does not hold weights");
        w.model = h.at("model").get<std::string>();
        w.attributes = h.at("attributes").get<std::map<std::string, double>>();
        for (const auto& l : h.at("layers")) {
            NamedArray a;
            a.name = l.at("name").get<std::string>();
            a.shape = l.at("shape").get<std::vector<std::size_t>>();
            std::size_t count = 1;
            for (auto d : a.shape) count *= d;
            counts.push_back(count);
            w.layers.push_back(std::move(a));
        }
        return 0;
    });
    std::size_t total = 0;
    for (auto c : counts) total += c;
    check_payload(parsed.payload.size(), total * 8);
    const std::uint8_t* p = parsed.payload.data();
    for (std::size_t k = 0; k < w.layers.size(); ++k) {
        auto& values = w.layers[k].values;
        values.resize(counts[k]);
        for (auto& v : values) {
            const std::uint64_t bits = get_u32(p) | (static_cast<std::uint64_t>(get_u32(p + 4)) << 32);
            v = std::bit_cast<double>(bits);
            p += 8;
        }
    }
    return w;
}

void save_weights(const WeightFile& weights, const std::filesystem::path& path) {
    write_file_atomic(path, encode_weights(weights));
}

WeightFile load_weights(const std::filesystem::path& path) { return decode_weights(read_file(path)); }

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(static_cast<bool>(out), Errc::io_error, "cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.close();
        if (!out) {
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            throw Error(Errc::io_error, "failed writing " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(Errc::io_error, "cannot move output into place at " + path.string());
    }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), Errc::io_error, "cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace oamfso::io
