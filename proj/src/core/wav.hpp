#pragma once

#include <string>
#include <vector>

namespace egs {

struct Waveform {
    std::vector<float> samples;  // amplitudes in [-1, 1]
    int sample_rate = 22050;

    double duration_seconds() const {
        return samples.empty() ? 0.0 : static_cast<double>(samples.size()) / sample_rate;
    }
};

// 16-bit PCM mono WAV. Values are clamped to [-1, 1] on write; reads
// normalize to [-1, 1].
void write_wav(const std::string& path, const Waveform& w);
Waveform read_wav(const std::string& path);

// Linear resampling to a target rate (ingestion policy: everything becomes
// 22050 Hz before entering the pipeline).
Waveform resample(const Waveform& w, int target_rate);

}  // namespace egs
