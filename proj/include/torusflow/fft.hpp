#pragma once

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "torusflow/grid.hpp"

namespace torusflow {
namespace detail {

/// One cached in-place c2c plan pair per (dim, n). Plans are created with
/// FFTW_ESTIMATE so the transform algorithm (and hence round-off) is
/// reproducible run to run. Data is staged through the plan's own buffer,
/// which keeps alignment requirements away from callers.
class FftPlans {
public:
    static FftPlans& get(const TorusGrid& grid) {
        static std::mutex registry_mutex;
        static std::map<std::pair<int, int>, std::unique_ptr<FftPlans>> registry;
        std::lock_guard<std::mutex> lock(registry_mutex);
        auto key = std::make_pair(grid.dim(), grid.n());
        auto it = registry.find(key);
        if (it == registry.end())
            it = registry.emplace(key, std::unique_ptr<FftPlans>(new FftPlans(grid))).first;
        return *it->second;
    }

    void forward(const std::complex<double>* in, std::complex<double>* out) {
        run(forward_, in, out);
    }
    void backward(const std::complex<double>* in, std::complex<double>* out) {
        run(backward_, in, out);
    }

    FftPlans(const FftPlans&) = delete;
    FftPlans& operator=(const FftPlans&) = delete;

    ~FftPlans() {
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
        fftw_free(buffer_);
    }

private:
    explicit FftPlans(const TorusGrid& grid) : size_(grid.num_points()) {
        buffer_ = fftw_alloc_complex(size_);
        const int n = grid.n();
        if (grid.dim() == 2) {
            forward_ = fftw_plan_dft_2d(n, n, buffer_, buffer_, FFTW_FORWARD, FFTW_ESTIMATE);
            backward_ = fftw_plan_dft_2d(n, n, buffer_, buffer_, FFTW_BACKWARD, FFTW_ESTIMATE);
        } else {
            forward_ = fftw_plan_dft_3d(n, n, n, buffer_, buffer_, FFTW_FORWARD, FFTW_ESTIMATE);
            backward_ = fftw_plan_dft_3d(n, n, n, buffer_, buffer_, FFTW_BACKWARD, FFTW_ESTIMATE);
        }
    }

    void run(fftw_plan plan, const std::complex<double>* in, std::complex<double>* out) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto* buf = reinterpret_cast<std::complex<double>*>(buffer_);
        for (std::size_t i = 0; i < size_; ++i) buf[i] = in[i];
        fftw_execute(plan);
        for (std::size_t i = 0; i < size_; ++i) out[i] = buf[i];
    }

    std::size_t size_;
    fftw_complex* buffer_;
    fftw_plan forward_;
    fftw_plan backward_;
    std::mutex mutex_;
};

} // namespace detail

/// Unnormalized DFT, x-fastest layout matching TorusGrid::index.
inline void fft_forward_raw(const TorusGrid& grid, const std::complex<double>* in,
                            std::complex<double>* out) {
    detail::FftPlans::get(grid).forward(in, out);
}

inline void fft_backward_raw(const TorusGrid& grid, const std::complex<double>* in,
                             std::complex<double>* out) {
    detail::FftPlans::get(grid).backward(in, out);
}

} // namespace torusflow
