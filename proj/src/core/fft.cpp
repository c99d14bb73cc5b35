#include "core/fft.hpp"

#include <fftw3.h>

#include <cstring>

#include "core/common.hpp"

namespace egs {

RealFft::RealFft(int n) : n_(n) {
    check_contract(n > 0 && (n & (n - 1)) == 0, "fft: size must be a power of two");
    buf_real_ = fftwf_alloc_real(n);
    buf_cplx_ = fftwf_alloc_complex(n / 2 + 1);
    plan_fwd_ = fftwf_plan_dft_r2c_1d(n, buf_real_, static_cast<fftwf_complex*>(buf_cplx_),
                                      FFTW_ESTIMATE);
    plan_inv_ = fftwf_plan_dft_c2r_1d(n, static_cast<fftwf_complex*>(buf_cplx_), buf_real_,
                                      FFTW_ESTIMATE);
}

RealFft::~RealFft() {
    fftwf_destroy_plan(static_cast<fftwf_plan>(plan_fwd_));
    fftwf_destroy_plan(static_cast<fftwf_plan>(plan_inv_));
    fftwf_free(buf_real_);
    fftwf_free(buf_cplx_);
}

void RealFft::forward(const float* in, std::complex<float>* out) const {
    std::memcpy(buf_real_, in, sizeof(float) * n_);
    fftwf_execute(static_cast<fftwf_plan>(plan_fwd_));
    std::memcpy(out, buf_cplx_, sizeof(fftwf_complex) * (n_ / 2 + 1));
}

void RealFft::inverse(const std::complex<float>* in, float* out) const {
    std::memcpy(buf_cplx_, in, sizeof(fftwf_complex) * (n_ / 2 + 1));
    fftwf_execute(static_cast<fftwf_plan>(plan_inv_));
    std::memcpy(out, buf_real_, sizeof(float) * n_);
}

}  // namespace egs
