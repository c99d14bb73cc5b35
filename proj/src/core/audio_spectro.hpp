#pragma once

// Audio <-> spectrogram-image conversions: RMS clip selection, STFT analysis
// with log + min-max scaling, bicubic grid resizing, and Griffin-Lim phase
// recovery. These are the deterministic DSP legs of the pipeline; all
// functions are pure.

#include <optional>
#include <string>
#include <vector>

#include "core/container.hpp"
#include "core/tensor.hpp"
#include "core/wav.hpp"

namespace egs {

struct StftParams {
    int window_length = 2048;
    int hop_length = 512;
    int fft_bins_kept = 1024;  // of window_length/2 + 1
    std::string window = "hann";

    void validate() const;
};

struct Spectrogram {
    Tensor values;  // [time_frames, freq_bins], values in [0,1]
    StftParams params;
    int sample_rate = 22050;
    bool log_scaled = true;
    // log1p-magnitude range removed by the per-clip min-max normalization;
    // kept so inversion is exact.
    float scale_min = 0.0f;
    float scale_max = 0.0f;

    int time_frames() const { return values.dim(0); }
    int freq_bins() const { return values.dim(1); }

    GridFile to_grid() const;
    static Spectrogram from_grid(const GridFile& g);
};

// Native 10-second / 22050 Hz geometry.
constexpr int kNativeSampleRate = 22050;
constexpr double kClipSeconds = 10.0;
constexpr int kClipSamples = 220500;
constexpr int kNativeFrames = 430;
constexpr int kNativeBins = 1024;

// sqrt(mean(x^2)) with a double accumulator. Errors on empty input.
double rms(const Waveform& w);

// Start offsets (in samples) of non-overlapping clip-length windows, tiled
// from the start of the waveform, whose RMS exceeds the threshold.
std::vector<int64_t> select_clips(const Waveform& w, double clip_seconds, double threshold);

// Magnitude STFT -> log1p -> per-clip min-max to [0,1]. For a native
// 10 s / 22050 Hz clip the output is exactly 430 x 1024.
Spectrogram stft_spectrogram(const Waveform& w, const StftParams& p = StftParams());

// Separable bicubic resize; output clamped to [0,1]. Identity shape returns a
// bit-equal copy.
Spectrogram resize_spectrogram(const Spectrogram& s, int rows, int cols);
Tensor resize_grid(const Tensor& grid, int rows, int cols, bool clamp01);

struct GriffinLimResult {
    Waveform waveform;
    std::vector<double> projection_errors;  // ||M - |STFT(x_n)|||_F per iteration
};

// Undoes the scaling (min-max, expm1) and recovers phase by alternating
// projections; momentum > 0 gives the accelerated variant, momentum = 0 the
// classic monotone one. iterations = 0 returns the zero-phase reconstruction.
GriffinLimResult griffin_lim_invert(const Spectrogram& s, int iterations,
                                    double momentum = 0.99);

// Frobenius distance between de-normalized magnitudes of two spectrograms,
// relative to the first; used by round-trip properties.
double spectral_rel_error(const Spectrogram& reference, const Spectrogram& probe);

// 10*log10(||M_ref||^2 / ||M_ref - M_probe||^2) on linear magnitudes.
double spectral_snr_db(const Spectrogram& reference, const Spectrogram& probe);

// Linear magnitude grid with scaling undone.
Tensor denormalized_magnitudes(const Spectrogram& s);

}  // namespace egs
