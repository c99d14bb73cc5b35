#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>

#include "core/audio_spectro.hpp"
#include "core/container.hpp"
#include "core/rng.hpp"
#include "core/wav.hpp"

using namespace egs;

namespace {

Waveform sine_clip(double freq, double amp = 1.0, int samples = kClipSamples,
                   int rate = kNativeSampleRate) {
    Waveform w;
    w.sample_rate = rate;
    w.samples.resize(samples);
    for (int i = 0; i < samples; ++i)
        w.samples[i] = static_cast<float>(amp * std::sin(2.0 * M_PI * freq * i / rate));
    return w;
}

std::filesystem::path temp_file(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("egs_test_" + name);
    std::filesystem::remove(p);
    return p;
}

}  // namespace

TEST_CASE("rms: silence, constant, unit sine") {
    Waveform silence;
    silence.samples.assign(kClipSamples, 0.0f);
    CHECK(rms(silence) == 0.0);

    Waveform constant;
    constant.samples.assign(kClipSamples, 0.5f);
    CHECK(rms(constant) == doctest::Approx(0.5).epsilon(1e-9));

    // Closed form: unit-amplitude sine over whole periods has RMS 1/sqrt(2).
    Waveform sine = sine_clip(441.0);  // 441 Hz at 22050 -> exactly 50 samples/period
    CHECK(rms(sine) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));

    Waveform empty;
    CHECK_THROWS_AS(rms(empty), ContractError);
}

TEST_CASE("select_clips: silence, loud middle segment, zero threshold") {
    const int rate = kNativeSampleRate;
    Waveform w;
    w.sample_rate = rate;
    w.samples.assign(30 * rate, 0.0f);
    CHECK(select_clips(w, 10.0, 0.01).empty());

    // One loud 10 s middle segment (RMS 0.3), quiet elsewhere (RMS 0.001).
    Rng rng(5);
    for (int i = 0; i < 30 * rate; ++i) {
        bool loud = i >= 10 * rate && i < 20 * rate;
        double amp = loud ? 0.3 * std::sqrt(2.0) : 0.001 * std::sqrt(2.0);
        w.samples[i] = static_cast<float>(amp * std::sin(2.0 * M_PI * 500.0 * i / rate));
    }
    auto offsets = select_clips(w, 10.0, 0.05);

    // Oracle: exhaustive scan over the same non-overlapping tiling.
    std::vector<int64_t> expect;
    for (int64_t o = 0; o + 10 * rate <= 30 * rate; o += 10 * rate) {
        double acc = 0.0;
        for (int64_t i = o; i < o + 10 * rate; ++i) acc += double(w.samples[i]) * w.samples[i];
        if (std::sqrt(acc / (10.0 * rate)) > 0.05) expect.push_back(o);
    }
    CHECK(offsets == expect);
    REQUIRE(offsets.size() == 1);
    CHECK(offsets[0] >= 10 * rate);
    CHECK(offsets[0] < 20 * rate);

    // Threshold 0 on a non-silent waveform: maximal disjoint packing.
    auto all = select_clips(w, 10.0, 0.0);
    CHECK(all.size() == 3);  // floor(30/10)
    for (size_t i = 1; i < all.size(); ++i) CHECK(all[i] - all[i - 1] >= 10 * rate);
}

TEST_CASE("stft: native shape 430x1024") {
    Waveform w = sine_clip(1000.0, 0.8);
    Spectrogram s = stft_spectrogram(w);
    CHECK(s.time_frames() == kNativeFrames);
    CHECK(s.freq_bins() == kNativeBins);
    for (float v : s.values.v) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    CHECK(s.values.all_finite());
}

TEST_CASE("stft: silence gives a constant floor grid") {
    Waveform w;
    w.samples.assign(kClipSamples, 0.0f);
    Spectrogram s = stft_spectrogram(w);
    for (float v : s.values.v) CHECK(v == 0.0f);
}

TEST_CASE("stft: pure 1 kHz sine peaks at the predicted bin in every frame") {
    Waveform w = sine_clip(1000.0, 0.8);
    Spectrogram s = stft_spectrogram(w);
    double bin_width = double(kNativeSampleRate) / s.params.window_length;
    int expected_bin = static_cast<int>(std::lround(1000.0 / bin_width));
    CHECK(expected_bin == 93);
    for (int t = 0; t < s.time_frames(); ++t) {
        int arg = 0;
        for (int f = 1; f < s.freq_bins(); ++f)
            if (s.values.at2(t, f) > s.values.at2(t, arg)) arg = f;
        CHECK(arg == expected_bin);
    }
}

TEST_CASE("stft: one-window DFT oracle in double precision") {
    // Middle frame of a steady sine must match a directly computed windowed DFT.
    Waveform w = sine_clip(1000.0, 0.8);
    StftParams p;
    Spectrogram s = stft_spectrogram(w, p);
    const int t = 200;  // interior frame, fully inside the signal
    const int win = p.window_length;
    std::vector<double> frame(win);
    for (int i = 0; i < win; ++i) {
        int64_t idx = int64_t(t) * p.hop_length - win / 2 + i;
        double hann = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / win);
        frame[i] = (idx >= 0 && idx < kClipSamples) ? w.samples[idx] * hann : 0.0;
    }
    double span = s.scale_max - s.scale_min;
    for (int f = 0; f < s.freq_bins(); f += 41) {
        std::complex<double> acc(0.0, 0.0);
        for (int i = 0; i < win; ++i) {
            double ang = -2.0 * M_PI * f * i / win;
            acc += frame[i] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        double expect_norm = span > 0 ? (std::log1p(std::abs(acc)) - s.scale_min) / span : 0.0;
        CHECK(s.values.at2(t, f) == doctest::Approx(expect_norm).epsilon(5e-3));
    }
}

TEST_CASE("stft: too-short waveform is rejected") {
    Waveform w;
    w.samples.assign(1000, 0.1f);
    CHECK_THROWS_AS(stft_spectrogram(w), ContractError);
}

TEST_CASE("resize: 430x1024 -> 512x512, identity, constant") {
    Waveform w = sine_clip(2000.0, 0.7);
    Spectrogram s = stft_spectrogram(w);
    Spectrogram r = resize_spectrogram(s, 512, 512);
    CHECK(r.time_frames() == 512);
    CHECK(r.freq_bins() == 512);
    for (float v : r.values.v) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }

    Spectrogram same = resize_spectrogram(s, s.time_frames(), s.freq_bins());
    CHECK(same.values.v == s.values.v);  // bit-equal identity

    Spectrogram c;
    c.values = Tensor::full({64, 48}, 0.37f);
    Spectrogram rc = resize_spectrogram(c, 100, 33);
    for (float v : rc.values.v) CHECK(v == doctest::Approx(0.37f).epsilon(1e-5));

    CHECK_THROWS_AS(resize_spectrogram(s, 0, 16), ContractError);
}

TEST_CASE("griffin-lim: sine round trip reaches 20 dB, silence stays silent") {
    Waveform w = sine_clip(1000.0, 0.6);
    Spectrogram s = stft_spectrogram(w);
    auto gl = griffin_lim_invert(s, 60);
    CHECK(gl.waveform.samples.size() == kClipSamples);
    Spectrogram re = stft_spectrogram(gl.waveform);
    CHECK(spectral_snr_db(s, re) >= 20.0);

    Waveform silence;
    silence.samples.assign(kClipSamples, 0.0f);
    Spectrogram ss = stft_spectrogram(silence);
    auto gl_silence = griffin_lim_invert(ss, 10);
    for (float v : gl_silence.waveform.samples) CHECK(std::abs(v) < 1e-3f);
}

TEST_CASE("griffin-lim: classic projection errors are non-increasing") {
    Rng rng(77);
    Waveform w;
    w.sample_rate = kNativeSampleRate;
    w.samples.resize(kClipSamples);
    for (int i = 0; i < kClipSamples; ++i) {
        double t = double(i) / kNativeSampleRate;
        w.samples[i] = static_cast<float>(0.4 * std::sin(2 * M_PI * 700 * t) +
                                          0.2 * std::sin(2 * M_PI * 2900 * t) +
                                          0.05 * rng.gaussian());
    }
    Spectrogram s = stft_spectrogram(w);
    auto gl = griffin_lim_invert(s, 30, 0.0);
    REQUIRE(gl.projection_errors.size() == 30);
    for (size_t i = 1; i < gl.projection_errors.size(); ++i)
        CHECK(gl.projection_errors[i] <= gl.projection_errors[i - 1] * (1.0 + 1e-6));
}

TEST_CASE("griffin-lim: round-trip error non-increasing in iteration count") {
    Waveform w = sine_clip(1500.0, 0.5);
    Spectrogram s = stft_spectrogram(w);
    double prev = 1e300;
    for (int iters : {0, 5, 15, 40}) {
        auto gl = griffin_lim_invert(s, iters, 0.0);
        Spectrogram re = stft_spectrogram(gl.waveform);
        double rel = spectral_rel_error(s, re);
        CHECK(rel <= prev * (1.0 + 1e-6));
        prev = rel;
    }
}

TEST_CASE("griffin-lim: zero iterations gives the zero-phase reconstruction") {
    Waveform w = sine_clip(1000.0, 0.6);
    Spectrogram s = stft_spectrogram(w);
    auto a = griffin_lim_invert(s, 0);
    auto b = griffin_lim_invert(s, 0);
    CHECK(a.waveform.samples == b.waveform.samples);
    CHECK(a.projection_errors.empty());
}

TEST_CASE("stft is pure: identical inputs give bit-identical outputs") {
    Waveform w = sine_clip(3123.0, 0.3);
    Spectrogram a = stft_spectrogram(w);
    Spectrogram b = stft_spectrogram(w);
    CHECK(a.values.v == b.values.v);
    CHECK(a.scale_min == b.scale_min);
    CHECK(a.scale_max == b.scale_max);
}

TEST_CASE("spectrogram container round trips bit-exactly") {
    Waveform w = sine_clip(4000.0, 0.9);
    Spectrogram s = stft_spectrogram(w);
    auto path = temp_file("spec.egs");
    write_grid(path.string(), s.to_grid());
    GridFile g = read_grid(path.string(), "EGSPEC1");
    CHECK(g.values.v == s.values.v);
    CHECK(g.scale_min == s.scale_min);
    CHECK(g.scale_max == s.scale_max);
    CHECK(g.rows == uint32_t(s.time_frames()));
    CHECK(g.cols == uint32_t(s.freq_bins()));
    CHECK(g.window == uint32_t(s.params.window_length));
    CHECK(g.hop == uint32_t(s.params.hop_length));

    Spectrogram back = Spectrogram::from_grid(g);
    CHECK(back.values.v == s.values.v);
    std::filesystem::remove(path);
}

TEST_CASE("wav io: 16-bit PCM mono round trip") {
    Waveform w = sine_clip(800.0, 0.5, 22050);
    auto path = temp_file("tone.wav");
    write_wav(path.string(), w);
    Waveform r = read_wav(path.string());
    REQUIRE(r.samples.size() == w.samples.size());
    CHECK(r.sample_rate == w.sample_rate);
    double max_err = 0.0;
    for (size_t i = 0; i < w.samples.size(); ++i)
        max_err = std::max(max_err, std::abs(double(w.samples[i]) - r.samples[i]));
    CHECK(max_err < 1.0 / 32000.0);
    std::filesystem::remove(path);
}

TEST_CASE("resample: changes rate and approximately preserves duration") {
    Waveform w = sine_clip(440.0, 0.5, 44100, 44100);
    Waveform r = resample(w, 22050);
    CHECK(r.sample_rate == 22050);
    CHECK(std::abs(int64_t(r.samples.size()) - 22050) <= 1);
}
