#include "core/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "core/common.hpp"

namespace egs {
namespace {

void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<char*>(&v), 4); }
void put_u16(std::ostream& os, uint16_t v) { os.write(reinterpret_cast<char*>(&v), 2); }

}  // namespace

void write_wav(const std::string& path, const Waveform& w) {
    check_contract(w.sample_rate > 0, "wav: bad sample rate");
    std::ofstream os(path, std::ios::binary);
    check_contract(os.good(), "wav: cannot open " + path + " for writing");
    uint32_t data_bytes = static_cast<uint32_t>(w.samples.size() * 2);
    os.write("RIFF", 4);
    put_u32(os, 36 + data_bytes);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    put_u32(os, 16);
    put_u16(os, 1);  // PCM
    put_u16(os, 1);  // mono
    put_u32(os, static_cast<uint32_t>(w.sample_rate));
    put_u32(os, static_cast<uint32_t>(w.sample_rate * 2));
    put_u16(os, 2);
    put_u16(os, 16);
    os.write("data", 4);
    put_u32(os, data_bytes);
    for (float s : w.samples) {
        float c = std::clamp(s, -1.0f, 1.0f);
        int16_t q = static_cast<int16_t>(std::lrint(c * 32767.0f));
        os.write(reinterpret_cast<char*>(&q), 2);
    }
    check_contract(os.good(), "wav: write failed for " + path);
}

Waveform read_wav(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is.good()) throw DataError("wav: cannot open " + path);
    char tag[4];
    is.read(tag, 4);
    if (std::memcmp(tag, "RIFF", 4) != 0) throw DataError("wav: not a RIFF file: " + path);
    is.seekg(4, std::ios::cur);
    is.read(tag, 4);
    if (std::memcmp(tag, "WAVE", 4) != 0) throw DataError("wav: not a WAVE file: " + path);

    Waveform w;
    uint16_t channels = 0, bits = 0;
    bool got_fmt = false;
    while (is.good()) {
        is.read(tag, 4);
        uint32_t sz = 0;
        is.read(reinterpret_cast<char*>(&sz), 4);
        if (!is.good()) break;
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            uint16_t fmt = 0;
            is.read(reinterpret_cast<char*>(&fmt), 2);
            is.read(reinterpret_cast<char*>(&channels), 2);
            uint32_t rate = 0;
            is.read(reinterpret_cast<char*>(&rate), 4);
            is.seekg(6, std::ios::cur);
            is.read(reinterpret_cast<char*>(&bits), 2);
            if (sz > 16) is.seekg(sz - 16, std::ios::cur);
            if (fmt != 1) throw DataError("wav: only PCM supported: " + path);
            w.sample_rate = static_cast<int>(rate);
            got_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            if (!got_fmt) throw DataError("wav: data before fmt: " + path);
            if (bits != 16) throw DataError("wav: only 16-bit supported: " + path);
            if (channels == 0) throw DataError("wav: zero channels: " + path);
            uint32_t n = sz / 2 / channels;
            w.samples.resize(n);
            std::vector<int16_t> raw(sz / 2);
            is.read(reinterpret_cast<char*>(raw.data()), sz);
            for (uint32_t i = 0; i < n; ++i) {
                // downmix by averaging if multichannel
                double acc = 0.0;
                for (uint16_t c = 0; c < channels; ++c) acc += raw[i * channels + c];
                w.samples[i] = static_cast<float>(acc / channels / 32768.0);
            }
            return w;
        } else {
            is.seekg(sz + (sz & 1), std::ios::cur);
        }
    }
    throw DataError("wav: no data chunk in " + path);
}

Waveform resample(const Waveform& w, int target_rate) {
    check_contract(target_rate > 0, "resample: bad target rate");
    if (w.sample_rate == target_rate) return w;
    Waveform out;
    out.sample_rate = target_rate;
    size_t n = static_cast<size_t>(
        std::llround(static_cast<double>(w.samples.size()) * target_rate / w.sample_rate));
    out.samples.resize(n);
    double step = static_cast<double>(w.sample_rate) / target_rate;
    for (size_t i = 0; i < n; ++i) {
        double src = i * step;
        size_t i0 = std::min(static_cast<size_t>(src), w.samples.size() - 1);
        size_t i1 = std::min(i0 + 1, w.samples.size() - 1);
        double f = src - static_cast<double>(i0);
        out.samples[i] = static_cast<float>((1.0 - f) * w.samples[i0] + f * w.samples[i1]);
    }
    return out;
}

}  // namespace egs
