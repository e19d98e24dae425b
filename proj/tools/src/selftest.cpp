#include "selftest.hpp"

#include <cmath>
#include <fmt/format.h>
#include <functional>
#include <unistd.h>
#include <string>
#include <vector>

#include "oamfso/channel.hpp"
#include "oamfso/dataset_io.hpp"
#include "oamfso/eval.hpp"
#include "oamfso/field_optics.hpp"
#include "oamfso/fft.hpp"
#include "oamfso/nn/layers.hpp"
#include "oamfso/turbulence.hpp"

namespace oamfso::cli {
namespace {

struct Check {
    std::string name;
    std::function<std::string(bool&)> body;
};

double relative(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

nn::Tensor random_tensor(nn::Shape shape, Rng& rng) {
    nn::Tensor t(std::move(shape));
    for (auto& v : t.values()) v = rng.normal();
    return t;
}

double dot(const nn::Tensor& a, const nn::Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::vector<Check> checks() {
    return {
        {"fft round trip",
         [](bool& ok) {
             Rng rng(7);
             std::vector<Complex> a(64 * 64);
             for (auto& v : a) v = {rng.normal(), rng.normal()};
             auto b = a;
             fft::forward(b, 64);
             fft::inverse(b, 64);
             double err = 0.0;
             for (std::size_t i = 0; i < a.size(); ++i) err = std::max(err, std::abs(a[i] - b[i]));
             ok = err < 1e-12;
             return fmt::format("max error {:.2e}", err);
         }},
        {"propagation conserves power",
         [](bool& ok) {
             const GridSpec grid{};
             const auto field = optics::gaussian_beam(grid, 0.04);
             const double p0 = optics::total_power(field);
             const double p1 = optics::total_power(optics::propagate(field, 500.0));
             ok = relative(p1, p0) < 1e-9;
             return fmt::format("relative change {:.2e}", relative(p1, p0));
         }},
        {"superposition lobe count",
         [](bool& ok) {
             const channel::ChannelConfig cfg{};
             const int lobes = optics::count_lobes(channel::clean_receiver_image(channel::Symbol(3), cfg));
             ok = lobes == 6;
             return fmt::format("ell 3 shows {} lobes", lobes);
         }},
        {"fried parameter",
         [](bool& ok) {
             const double r0 = turbulence::fried_parameter({}, 1550e-9).r0;
             ok = std::abs(r0 - 0.0453) < 1e-3;
             return fmt::format("r0 {:.5f} m", r0);
         }},
        {"snr anchor",
         [](bool& ok) {
             const double db = channel::measure_snr(50.0);
             ok = std::abs(db + 3.87) < 1e-9;
             return fmt::format("sigma 50 -> {:.3f} dB", db);
         }},
        {"transpose conv is the conv adjoint",
         [](bool& ok) {
             Rng rng(11);
             const auto layer = nn::ConvLayer::he_normal(2, 3, 2, 3, rng);
             auto unbiased = layer;
             unbiased.bias.clear();
             const auto x = random_tensor({2, 10, 10}, rng);
             const auto y = random_tensor({3, 5, 5}, rng);
             const double lhs = dot(nn::conv2d(x, layer), y);
             const double rhs = dot(x, nn::transpose_conv2d(y, unbiased, 10, 10));
             ok = relative(lhs, rhs) < 1e-10;
             return fmt::format("relative gap {:.2e}", relative(lhs, rhs));
         }},
        {"dense gradient",
         [](bool& ok) {
             Rng rng(13);
             auto layer = nn::DenseLayer::he_normal(6, 4, rng);
             const auto x = random_tensor({2, 6}, rng);
             auto grads = layer.zeros_like();
             const auto y = nn::dense(x, layer);
             nn::dense_backward(x, layer, y, grads);
             const double h = 1e-5;
             double worst = 0.0;
             for (std::size_t i = 0; i < layer.weight.size(); ++i) {
                 const double saved = layer.weight[i];
                 layer.weight[i] = saved + h;
                 const double up = 0.5 * dot(nn::dense(x, layer), nn::dense(x, layer));
                 layer.weight[i] = saved - h;
                 const double down = 0.5 * dot(nn::dense(x, layer), nn::dense(x, layer));
                 layer.weight[i] = saved;
                 worst = std::max(worst, relative(grads.weight[i], (up - down) / (2 * h)));
             }
             ok = worst < 1e-6;
             return fmt::format("worst relative error {:.2e}", worst);
         }},
        {"cross-talk identity",
         [](bool& ok) {
             std::vector<channel::Symbol> truth, pred;
             for (int i = 0; i < 539; ++i) {
                 truth.emplace_back(i % 11);
                 pred.emplace_back(i < 43 ? (i + 1) % 11 : i % 11);
             }
             const auto m = eval::crosstalk(pred, truth);
             const double ser = eval::symbol_error_rate(pred, truth);
             ok = m.total() == 539 && m.off_diagonal() == 43 && ser == 43.0 / 539.0;
             return fmt::format("ser {:.6f}", ser);
         }},
        {"container round trip",
         [](bool& ok) {
             io::CnnDataOptions opt;
             opt.per_class = 2;
             opt.train_per_class = 1;
             const auto pair = io::generate_cnn_dataset({}, opt);
             const auto path = std::filesystem::temp_directory_path() /
                               fmt::format("oam-fso-selftest-{}.oamd", ::getpid());
             io::save_dataset(pair.test, path);
             const auto back = io::load_dataset(path);
             std::filesystem::remove(path);
             ok = back.images == pair.test.images && back.targets == pair.test.targets &&
                  back.manifest.labels == pair.test.manifest.labels;
             return fmt::format("{} images", back.manifest.n_images);
         }},
    };
}

}  // namespace

bool run_selftest(std::ostream& out) {
    bool all = true;
    for (const auto& c : checks()) {
        bool ok = false;
        std::string detail;
        try {
            detail = c.body(ok);
        } catch (const std::exception& e) {
            ok = false;
            detail = e.what();
        }
        all = all && ok;
        out << (ok ? "PASS " : "FAIL ") << c.name << ": " << detail << '\n';
    }
    out << (all ? "selftest passed" : "selftest failed") << std::endl;
    return all;
}

}  // namespace oamfso::cli
