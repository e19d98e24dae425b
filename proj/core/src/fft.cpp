#include "oamfso/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>
#include <vector>

namespace oamfso::fft {
namespace {

// FFTW planning is not thread-safe, execution with the new-array interface
// is. Plans are created once per size under a lock and reused. ESTIMATE
// planning keeps the chosen algorithm, and therefore the rounding, identical
// from run to run.
class PlanCache {
public:
    ~PlanCache() {
        for (auto& [n, plans] : plans_) {
            fftw_destroy_plan(plans.first);
            fftw_destroy_plan(plans.second);
        }
    }

    std::pair<fftw_plan, fftw_plan> get(int n) {
        std::lock_guard lock(mutex_);
        if (auto it = plans_.find(n); it != plans_.end()) return it->second;
        std::vector<Complex> scratch(static_cast<std::size_t>(n) * n);
        auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        fftw_plan fwd = fftw_plan_dft_2d(n, n, buf, buf, FFTW_FORWARD, flags);
        fftw_plan inv = fftw_plan_dft_2d(n, n, buf, buf, FFTW_BACKWARD, flags);
        return plans_.emplace(n, std::pair{fwd, inv}).first->second;
    }

private:
    std::mutex mutex_;
    std::map<int, std::pair<fftw_plan, fftw_plan>> plans_;
};

PlanCache& cache() {
    static PlanCache instance;
    return instance;
}

void check(std::span<Complex> data, int n) {
    require(n > 0 && data.size() == static_cast<std::size_t>(n) * static_cast<std::size_t>(n),
            Errc::shape_mismatch, "fft buffer is not n x n");
}

}  // namespace

void forward(std::span<Complex> data, int n) {
    check(data, n);
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(cache().get(n).first, buf, buf);
}

void inverse(std::span<Complex> data, int n) {
    check(data, n);
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(cache().get(n).second, buf, buf);
    const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
    for (auto& v : data) v *= norm;
}

}  // namespace oamfso::fft
