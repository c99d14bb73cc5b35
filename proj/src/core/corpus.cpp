#include "core/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "core/audio_spectro.hpp"

namespace fs = std::filesystem;

namespace egs {
namespace {

constexpr double kToneHz[kEventClasses] = {950.0, 2100.0, 4300.0, 8700.0};
constexpr float kTint[kEventClasses][3] = {
    {0.90f, 0.30f, 0.30f}, {0.30f, 0.90f, 0.30f}, {0.30f, 0.40f, 0.95f}, {0.90f, 0.85f, 0.30f}};

std::string fmt_float(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

Tensor class_text_embedding(int event_class) {
    check_contract(event_class >= 0 && event_class < kEventClasses, "bad event class");
    Rng rng(0xC1A55E50ull + static_cast<uint64_t>(event_class), 0x7e);
    Tensor v({512});
    double norm = 0.0;
    for (auto& x : v.v) {
        x = static_cast<float>(rng.gaussian());
        norm += static_cast<double>(x) * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : v.v) x = static_cast<float>(x / norm);
    return v;
}

SyntheticClip generate_synthetic_clip(Rng rng) {
    SyntheticClip clip;
    clip.event_class = static_cast<int>(rng.below(kEventClasses));
    const int n_events = 1 + static_cast<int>(rng.below(4));

    // Event times in [0.8, 9.0] s, separated by at least 1.4 s.
    std::vector<double> times;
    int guard = 0;
    while (static_cast<int>(times.size()) < n_events && guard++ < 1000) {
        double t = rng.uniform(0.8, 9.0);
        bool ok = true;
        for (double u : times)
            if (std::abs(u - t) < 1.4) ok = false;
        if (ok) times.push_back(t);
    }
    std::sort(times.begin(), times.end());
    for (double t : times) clip.events.push_back({t, clip.event_class});

    // --- video ---
    clip.video.fps = kNativeFps;
    const int frames = kNativeFps * 10;
    const float base = 0.06f + 0.06f * static_cast<float>(rng.uniform());
    const double fx = rng.uniform(0.08, 0.30), fy = rng.uniform(0.08, 0.30);
    const double px = rng.uniform(0.0, 6.28), py = rng.uniform(0.0, 6.28);
    const float* tint = kTint[clip.event_class];
    for (int f = 0; f < frames; ++f) {
        double t = static_cast<double>(f) / kNativeFps;
        Tensor img({3, kFrameSize, kFrameSize});
        float drift = 0.015f * static_cast<float>(std::sin(2 * M_PI * 0.05 * t));
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < kFrameSize * kFrameSize; ++i)
                img.v[static_cast<size_t>(c) * kFrameSize * kFrameSize + i] = base + drift;

        // flash intensity: three frames after each event
        float flash = 0.0f;
        bool contact = false;
        for (double et : times) {
            double dt = t - et;
            if (dt >= 0.0 && dt < 0.1) {
                flash = std::max(flash, 0.65f * static_cast<float>(1.0 - dt / 0.1));
                contact = true;
            }
        }
        int cx = static_cast<int>(27.0 + 22.0 * std::sin(2 * M_PI * fx * t + px));
        int cy = static_cast<int>(27.0 + 22.0 * std::sin(2 * M_PI * fy * t + py));
        int half = contact ? 8 : 5;
        for (int y = std::max(0, cy - half); y < std::min(kFrameSize, cy + half); ++y)
            for (int x = std::max(0, cx - half); x < std::min(kFrameSize, cx + half); ++x)
                for (int c = 0; c < 3; ++c)
                    img.at3(c, y, x) = contact ? 1.0f : tint[c];
        if (flash > 0.0f)
            for (auto& v : img.v) v = v * (1.0f - flash) + flash;
        for (auto& v : img.v) v = std::clamp(v, 0.0f, 1.0f);
        clip.video.frames.push_back(std::move(img));
    }

    // --- audio ---
    clip.audio.sample_rate = kNativeSampleRate;
    clip.audio.samples.assign(kClipSamples, 0.0f);
    for (auto& s : clip.audio.samples) s = static_cast<float>(0.0025 * rng.gaussian());
    const double tone = kToneHz[clip.event_class];
    for (double et : times) {
        int64_t start = static_cast<int64_t>(et * kNativeSampleRate);
        int64_t burst = static_cast<int64_t>(0.14 * kNativeSampleRate);
        for (int64_t i = 0; i < burst && start + i < kClipSamples; ++i) {
            double dt = static_cast<double>(i) / kNativeSampleRate;
            double env = std::exp(-dt / 0.04);
            double s = 0.55 * env * std::sin(2 * M_PI * tone * dt);
            if (dt < 0.008) s += 0.35 * (1.0 - dt / 0.008) * rng.gaussian() * 0.5;
            clip.audio.samples[start + i] =
                static_cast<float>(std::clamp(s + clip.audio.samples[start + i], -1.0, 1.0));
        }
    }
    return clip;
}

std::vector<ClipRecord> generate_synthetic_corpus(const std::string& dir, int n, uint64_t seed) {
    check_contract(n >= 2, "gen-synthetic: need at least 2 clips");
    fs::create_directories(dir);
    Rng root(seed);
    std::vector<ClipRecord> records;
    records.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        SyntheticClip clip = generate_synthetic_clip(root.fork("clip", static_cast<uint64_t>(i)));
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "clip_%05d", i);
        ClipRecord rec;
        rec.clip_id = idbuf;
        rec.video_path = (fs::path(dir) / (rec.clip_id + ".vid")).string();
        rec.audio_path = (fs::path(dir) / (rec.clip_id + ".wav")).string();
        write_clip(rec.video_path, clip.video);
        write_wav(rec.audio_path, clip.audio);
        rec.events = clip.events;
        Tensor emb = class_text_embedding(clip.event_class);
        rec.gt_text_embedding.assign(emb.v.begin(), emb.v.end());
        records.push_back(std::move(rec));
    }
    write_manifest((fs::path(dir) / "manifest.tsv").string(), records);
    return records;
}

void write_manifest(const std::string& path, const std::vector<ClipRecord>& records) {
    std::ofstream os(path, std::ios::binary);
    check_contract(os.good(), "manifest: cannot open " + path + " for writing");
    os << "clip_id\tvideo\taudio\temb_rows\tevents\ttext_embedding\n";
    fs::path base = fs::path(path).parent_path();
    auto rel = [&](const std::string& p) -> std::string {
        if (p.empty()) return "-";
        fs::path fp(p);
        if (fp.parent_path() == base) return fp.filename().string();
        return p;
    };
    for (const auto& r : records) {
        os << r.clip_id << '\t' << rel(r.video_path) << '\t' << rel(r.audio_path) << '\t'
           << rel(r.emb_rows_path) << '\t';
        if (r.events.empty()) os << '-';
        for (size_t i = 0; i < r.events.size(); ++i) {
            if (i) os << ';';
            os << fmt_float(r.events[i].time_seconds) << ':' << r.events[i].event_class;
        }
        os << '\t';
        if (r.gt_text_embedding.empty()) {
            os << '-';
        } else {
            for (size_t i = 0; i < r.gt_text_embedding.size(); ++i) {
                if (i) os << ',';
                os << fmt_float(r.gt_text_embedding[i]);
            }
        }
        os << '\n';
    }
    check_contract(os.good(), "manifest: write failed for " + path);
}

std::vector<ClipRecord> read_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is.good()) throw DataError("manifest: cannot open " + path);
    fs::path base = fs::path(path).parent_path();
    std::string line;
    std::getline(is, line);
    if (line.rfind("clip_id\t", 0) != 0) throw DataError("manifest: missing header row in " + path);
    std::vector<ClipRecord> records;
    auto resolve = [&](const std::string& p) -> std::string {
        if (p.empty() || p == "-") return "";
        fs::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };
    size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, '\t')) cols.push_back(col);
        if (cols.size() != 6)
            throw DataError("manifest: expected 6 columns at line " + std::to_string(line_no));
        ClipRecord r;
        r.clip_id = cols[0];
        r.video_path = resolve(cols[1]);
        r.audio_path = resolve(cols[2]);
        r.emb_rows_path = resolve(cols[3]);
        if (cols[4] != "-" && !cols[4].empty()) {
            std::stringstream es(cols[4]);
            std::string ev;
            while (std::getline(es, ev, ';')) {
                auto colon = ev.find(':');
                if (colon == std::string::npos)
                    throw DataError("manifest: bad event field at line " + std::to_string(line_no));
                EventAnnotation a;
                a.time_seconds = std::stod(ev.substr(0, colon));
                a.event_class = std::stoi(ev.substr(colon + 1));
                r.events.push_back(a);
            }
        }
        if (cols[5] != "-" && !cols[5].empty()) {
            std::stringstream ts(cols[5]);
            std::string f;
            while (std::getline(ts, f, ',')) r.gt_text_embedding.push_back(std::stof(f));
            if (r.gt_text_embedding.size() != 512)
                throw DataError("manifest: text embedding is not 512-d at line " +
                                std::to_string(line_no));
        }
        for (const std::string& p : {r.video_path, r.audio_path, r.emb_rows_path})
            if (!p.empty() && !fs::exists(p))
                throw DataError("manifest: referenced file missing: " + p);
        // uniqueness of ids
        for (const auto& prev : records)
            if (prev.clip_id == r.clip_id)
                throw DataError("manifest: duplicate clip_id " + r.clip_id);
        records.push_back(std::move(r));
    }
    return records;
}

}  // namespace egs
