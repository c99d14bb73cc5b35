#include "core/audio_spectro.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "core/fft.hpp"

namespace egs {

void StftParams::validate() const {
    check_contract(window_length > 0 && (window_length & (window_length - 1)) == 0,
                   "stft: window_length must be a power of two");
    check_contract(hop_length > 0 && hop_length <= window_length,
                   "stft: hop_length must be in (0, window_length]");
    check_contract(fft_bins_kept > 0 && fft_bins_kept <= window_length / 2 + 1,
                   "stft: fft_bins_kept out of range");
    check_contract(window == "hann", "stft: unknown window '" + window + "'");
}

GridFile Spectrogram::to_grid() const {
    GridFile g;
    g.magic = "EGSPEC1";
    g.rows = static_cast<uint32_t>(values.dim(0));
    g.cols = static_cast<uint32_t>(values.dim(1));
    g.sample_rate = static_cast<uint32_t>(sample_rate);
    g.window = static_cast<uint32_t>(params.window_length);
    g.hop = static_cast<uint32_t>(params.hop_length);
    g.scale_min = scale_min;
    g.scale_max = scale_max;
    g.values = values;
    return g;
}

Spectrogram Spectrogram::from_grid(const GridFile& g) {
    Spectrogram s;
    s.values = g.values;
    s.sample_rate = static_cast<int>(g.sample_rate);
    s.params.window_length = static_cast<int>(g.window);
    s.params.hop_length = static_cast<int>(g.hop);
    s.params.fft_bins_kept = static_cast<int>(g.cols);
    s.scale_min = g.scale_min;
    s.scale_max = g.scale_max;
    return s;
}

double rms(const Waveform& w) {
    if (w.samples.empty()) throw ContractError("rms: empty waveform");
    double acc = 0.0;
    for (float s : w.samples) acc += static_cast<double>(s) * s;
    return std::sqrt(acc / static_cast<double>(w.samples.size()));
}

std::vector<int64_t> select_clips(const Waveform& w, double clip_seconds, double threshold) {
    check_contract(clip_seconds > 0, "select_clips: clip_seconds must be positive");
    int64_t clip_samples = static_cast<int64_t>(std::llround(clip_seconds * w.sample_rate));
    check_contract(clip_samples <= static_cast<int64_t>(w.samples.size()),
                   "select_clips: clip longer than waveform");
    std::vector<int64_t> offsets;
    for (int64_t o = 0; o + clip_samples <= static_cast<int64_t>(w.samples.size());
         o += clip_samples) {
        double acc = 0.0;
        for (int64_t i = o; i < o + clip_samples; ++i)
            acc += static_cast<double>(w.samples[i]) * w.samples[i];
        if (std::sqrt(acc / static_cast<double>(clip_samples)) > threshold) offsets.push_back(o);
    }
    return offsets;
}

namespace {

std::vector<float> hann_window(int n) {
    std::vector<float> w(n);
    for (int i = 0; i < n; ++i)
        w[i] = static_cast<float>(0.5 - 0.5 * std::cos(2.0 * M_PI * i / n));
    return w;
}

// Centered complex STFT with a fixed frame count; frame t covers
// [t*hop - win/2, t*hop + win/2), zero padded outside the signal.
void stft_complex(const std::vector<float>& x, const StftParams& p, int frames,
                  std::vector<std::complex<float>>& out) {
    const int win = p.window_length;
    const int bins = win / 2 + 1;
    const auto w = hann_window(win);
    RealFft fft(win);
    std::vector<float> frame(win);
    out.resize(static_cast<size_t>(frames) * bins);
    const int64_t n = static_cast<int64_t>(x.size());
    for (int t = 0; t < frames; ++t) {
        int64_t start = static_cast<int64_t>(t) * p.hop_length - win / 2;
        for (int i = 0; i < win; ++i) {
            int64_t s = start + i;
            frame[i] = (s >= 0 && s < n) ? x[static_cast<size_t>(s)] * w[i] : 0.0f;
        }
        fft.forward(frame.data(), &out[static_cast<size_t>(t) * bins]);
    }
}

// Least-squares overlap-add inverse of the centered STFT above.
std::vector<float> istft(const std::vector<std::complex<float>>& spec, const StftParams& p,
                         int frames, int64_t out_len) {
    const int win = p.window_length;
    const int bins = win / 2 + 1;
    const auto w = hann_window(win);
    RealFft fft(win);
    const int64_t pad = win / 2;
    std::vector<double> acc(out_len + 2 * pad, 0.0);
    std::vector<double> env(out_len + 2 * pad, 0.0);
    std::vector<float> frame(win);
    for (int t = 0; t < frames; ++t) {
        fft.inverse(&spec[static_cast<size_t>(t) * bins], frame.data());
        int64_t start = static_cast<int64_t>(t) * p.hop_length - win / 2 + pad;
        for (int i = 0; i < win; ++i) {
            acc[start + i] += static_cast<double>(frame[i]) / win * w[i];
            env[start + i] += static_cast<double>(w[i]) * w[i];
        }
    }
    std::vector<float> x(out_len);
    for (int64_t i = 0; i < out_len; ++i) {
        double e = env[i + pad];
        x[i] = e > 1e-11 ? static_cast<float>(acc[i + pad] / e) : 0.0f;
    }
    return x;
}

}  // namespace

Spectrogram stft_spectrogram(const Waveform& w, const StftParams& p) {
    p.validate();
    if (static_cast<int>(w.samples.size()) < p.window_length)
        throw ContractError("stft: waveform shorter than one window");
    const int frames = static_cast<int>(w.samples.size()) / p.hop_length;
    const int bins = p.window_length / 2 + 1;
    std::vector<std::complex<float>> spec;
    stft_complex(w.samples, p, frames, spec);

    Spectrogram s;
    s.params = p;
    s.sample_rate = w.sample_rate;
    s.values = Tensor({frames, p.fft_bins_kept});
    float lo = std::numeric_limits<float>::max();
    float hi = std::numeric_limits<float>::lowest();
    for (int t = 0; t < frames; ++t) {
        for (int f = 0; f < p.fft_bins_kept; ++f) {
            float m = std::abs(spec[static_cast<size_t>(t) * bins + f]);
            float lm = std::log1p(m);
            s.values.at2(t, f) = lm;
            lo = std::min(lo, lm);
            hi = std::max(hi, lm);
        }
    }
    s.scale_min = lo;
    s.scale_max = hi;
    if (hi > lo) {
        float inv = 1.0f / (hi - lo);
        for (auto& v : s.values.v) v = (v - lo) * inv;
    } else {
        s.values.fill(0.0f);  // silence: everything sits on the normalization floor
    }
    return s;
}

namespace {

inline double cubic_kernel(double t) {
    // Catmull-Rom (a = -0.5); partition of unity, so constants are preserved.
    double at = std::abs(t);
    if (at <= 1.0) return 1.5 * at * at * at - 2.5 * at * at + 1.0;
    if (at < 2.0) return -0.5 * at * at * at + 2.5 * at * at - 4.0 * at + 2.0;
    return 0.0;
}

// Resize rows of [r,c] grid to new_r (interpolating along axis 0).
Tensor resize_axis0(const Tensor& in, int new_r) {
    const int r = in.dim(0), c = in.dim(1);
    Tensor out({new_r, c});
    double scale = static_cast<double>(r) / new_r;
    for (int y = 0; y < new_r; ++y) {
        double src = (y + 0.5) * scale - 0.5;
        int i0 = static_cast<int>(std::floor(src)) - 1;
        double wsum[4];
        for (int k = 0; k < 4; ++k) wsum[k] = cubic_kernel(src - (i0 + k));
        for (int k = 0; k < 4; ++k) {
            int idx = std::clamp(i0 + k, 0, r - 1);
            const float* row = &in.v[static_cast<size_t>(idx) * c];
            float* orow = &out.v[static_cast<size_t>(y) * c];
            float wk = static_cast<float>(wsum[k]);
            for (int x = 0; x < c; ++x) orow[x] += wk * row[x];
        }
    }
    return out;
}

Tensor transpose2d(const Tensor& in) {
    const int r = in.dim(0), c = in.dim(1);
    Tensor out({c, r});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.at2(j, i) = in.at2(i, j);
    return out;
}

}  // namespace

Tensor resize_grid(const Tensor& grid, int rows, int cols, bool clamp01) {
    check_contract(grid.ndim() == 2, "resize: need 2-d grid");
    check_contract(rows > 0 && cols > 0, "resize: non-positive target dims");
    check_contract(grid.dim(0) >= 2 && grid.dim(1) >= 2, "resize: degenerate source");
    if (rows == grid.dim(0) && cols == grid.dim(1)) return grid;
    Tensor t = resize_axis0(grid, rows);
    t = transpose2d(resize_axis0(transpose2d(t), cols));
    if (clamp01)
        for (auto& v : t.v) v = std::clamp(v, 0.0f, 1.0f);
    return t;
}

Spectrogram resize_spectrogram(const Spectrogram& s, int rows, int cols) {
    Spectrogram out = s;
    out.values = resize_grid(s.values, rows, cols, true);
    return out;
}

Tensor denormalized_magnitudes(const Spectrogram& s) {
    Tensor m = s.values;
    float span = s.scale_max - s.scale_min;
    for (auto& v : m.v) {
        float lm = v * span + s.scale_min;
        v = std::expm1(lm);
        if (v < 0.0f) v = 0.0f;
    }
    return m;
}

GriffinLimResult griffin_lim_invert(const Spectrogram& s, int iterations, double momentum) {
    s.params.validate();
    check_contract(iterations >= 0, "griffin_lim: negative iterations");
    check_contract(momentum >= 0.0 && momentum < 1.0, "griffin_lim: momentum out of [0,1)");
    const int frames = s.time_frames();
    const int kept = s.freq_bins();
    const int bins = s.params.window_length / 2 + 1;
    check_contract(kept <= bins, "griffin_lim: more bins than the window provides");

    Tensor mag = denormalized_magnitudes(s);

    // Native clips re-synthesize to exactly 10 s; other shapes cover all frames.
    int64_t out_len;
    if (s.sample_rate == kNativeSampleRate && frames == kNativeFrames)
        out_len = kClipSamples;
    else
        out_len = static_cast<int64_t>(frames) * s.params.hop_length;

    auto apply_magnitudes = [&](const std::vector<std::complex<float>>& phase_src,
                                std::vector<std::complex<float>>& dst) {
        dst.assign(static_cast<size_t>(frames) * bins, {0.0f, 0.0f});
        for (int t = 0; t < frames; ++t) {
            for (int f = 0; f < kept; ++f) {
                std::complex<float> ph = phase_src.empty()
                                             ? std::complex<float>(1.0f, 0.0f)
                                             : phase_src[static_cast<size_t>(t) * bins + f];
                float a = std::abs(ph);
                if (a > 1e-12f)
                    ph /= a;
                else
                    ph = {1.0f, 0.0f};
                dst[static_cast<size_t>(t) * bins + f] = mag.at2(t, f) * ph;
            }
        }
    };

    GriffinLimResult result;
    std::vector<std::complex<float>> angles;       // current phase carrier
    std::vector<std::complex<float>> rebuilt;      // STFT of latest reconstruction
    std::vector<std::complex<float>> rebuilt_prev;
    std::vector<std::complex<float>> spec;
    apply_magnitudes({}, spec);  // zero phase start

    const float mcoef = static_cast<float>(momentum / (1.0 + momentum));
    for (int it = 0; it < iterations; ++it) {
        std::vector<float> x = istft(spec, s.params, frames, out_len);
        stft_complex(x, s.params, frames, rebuilt);
        double err = 0.0;
        for (int t = 0; t < frames; ++t)
            for (int f = 0; f < kept; ++f) {
                double d = std::abs(rebuilt[static_cast<size_t>(t) * bins + f]) - mag.at2(t, f);
                err += d * d;
            }
        result.projection_errors.push_back(std::sqrt(err));

        angles = rebuilt;
        if (mcoef > 0.0f && !rebuilt_prev.empty())
            for (size_t i = 0; i < angles.size(); ++i)
                angles[i] -= mcoef * rebuilt_prev[i];
        rebuilt_prev = rebuilt;
        apply_magnitudes(angles, spec);
    }

    GriffinLimResult out = std::move(result);
    out.waveform.sample_rate = s.sample_rate;
    out.waveform.samples = istft(spec, s.params, frames, out_len);
    // Final safety clamp: phase recovery can overshoot slightly.
    for (auto& v : out.waveform.samples) v = std::clamp(v, -1.0f, 1.0f);
    return out;
}

double spectral_rel_error(const Spectrogram& reference, const Spectrogram& probe) {
    Tensor a = denormalized_magnitudes(reference);
    Tensor b = denormalized_magnitudes(probe);
    check_contract(a.same_shape(b), "spectral_rel_error: shape mismatch");
    double num = 0.0, den = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        double d = static_cast<double>(a.v[i]) - b.v[i];
        num += d * d;
        den += static_cast<double>(a.v[i]) * a.v[i];
    }
    return den > 0 ? std::sqrt(num / den) : 0.0;
}

double spectral_snr_db(const Spectrogram& reference, const Spectrogram& probe) {
    double rel = spectral_rel_error(reference, probe);
    if (rel <= 0) return 300.0;  // identical
    return -20.0 * std::log10(rel);
}

}  // namespace egs
