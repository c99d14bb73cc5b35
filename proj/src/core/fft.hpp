#pragma once

#include <complex>
#include <vector>

namespace egs {

// Real FFT of size n (power of two): forward produces n/2+1 complex bins,
// inverse consumes them and returns n real samples (unnormalized; caller
// divides by n). Backed by FFTW with cached ESTIMATE plans so the algorithm
// choice, and therefore the output bits, are stable across runs.
class RealFft {
public:
    explicit RealFft(int n);
    ~RealFft();
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    int size() const { return n_; }
    void forward(const float* in, std::complex<float>* out) const;
    void inverse(const std::complex<float>* in, float* out) const;

private:
    int n_;
    void* plan_fwd_;
    void* plan_inv_;
    float* buf_real_;
    void* buf_cplx_;
};

}  // namespace egs
