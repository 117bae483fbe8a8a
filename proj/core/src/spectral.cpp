#include "sflab/spectral.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

namespace sflab::spectral {
namespace {

// FFTW planning is not thread safe; execution on distinct arrays is.
// Plans are created with FFTW_UNALIGNED so they can run on any buffer,
// and with FFTW_ESTIMATE so plan selection never depends on timing.
struct PlanPair {
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
};

std::mutex g_plan_mutex;
std::map<std::pair<int, int>, PlanPair>& plan_cache() {
    static std::map<std::pair<int, int>, PlanPair> cache;
    return cache;
}

const PlanPair& plans_for(int dim, int n) {
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    auto& cache = plan_cache();
    auto it = cache.find({dim, n});
    if (it != cache.end()) return it->second;

    std::size_t total = 1;
    int dims[3] = {n, n, n};
    for (int i = 0; i < dim; ++i) total *= static_cast<std::size_t>(n);
    fftw_complex* buf = fftw_alloc_complex(total);
    PlanPair p;
    p.fwd = fftw_plan_dft(dim, dims, buf, buf, FFTW_FORWARD,
                          FFTW_ESTIMATE | FFTW_UNALIGNED);
    p.bwd = fftw_plan_dft(dim, dims, buf, buf, FFTW_BACKWARD,
                          FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
    auto [ins, ok] = cache.emplace(std::make_pair(dim, n), p);
    (void)ok;
    return ins->second;
}

} // namespace

void forward(int dim, int n, std::complex<double>* data) {
    const PlanPair& p = plans_for(dim, n);
    fftw_execute_dft(p.fwd, reinterpret_cast<fftw_complex*>(data),
                     reinterpret_cast<fftw_complex*>(data));
}

void inverse(int dim, int n, std::complex<double>* data) {
    const PlanPair& p = plans_for(dim, n);
    fftw_execute_dft(p.bwd, reinterpret_cast<fftw_complex*>(data),
                     reinterpret_cast<fftw_complex*>(data));
    std::size_t total = 1;
    for (int i = 0; i < dim; ++i) total *= static_cast<std::size_t>(n);
    const double scale = 1.0 / static_cast<double>(total);
    for (std::size_t i = 0; i < total; ++i) data[i] *= scale;
}

} // namespace sflab::spectral
