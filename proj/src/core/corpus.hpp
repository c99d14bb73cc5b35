#pragma once

// Synthetic paired audio-video corpus and the tab-separated clip manifest.
// Each 10 s clip shows a moving marker over a dim background; 1-4 impact
// events flash the frame and emit a class-specific tone burst over a low
// noise floor. Event class controls both the marker tint and the burst
// frequency, and maps to a fixed per-class text-embedding vector.

#include <string>
#include <vector>

#include "core/tensor.hpp"
#include "core/video_embed.hpp"
#include "core/wav.hpp"

namespace egs {

struct EventAnnotation {
    double time_seconds = 0.0;
    int event_class = 0;
};

struct ClipRecord {
    std::string clip_id;
    std::string video_path;           // packed clip or frame directory
    std::string audio_path;           // optional for inference-only records
    std::string emb_rows_path;        // optional precomputed embedding rows
    std::vector<float> gt_text_embedding;  // optional, length 512
    std::vector<EventAnnotation> events;
};

constexpr int kEventClasses = 4;
constexpr int kFrameSize = 64;

// Deterministic per-class unit text vectors (independent of corpus seed).
Tensor class_text_embedding(int event_class);

struct SyntheticClip {
    VideoClip video;
    Waveform audio;
    std::vector<EventAnnotation> events;
    int event_class = 0;
};

SyntheticClip generate_synthetic_clip(Rng rng);

// Writes n clips + manifest.tsv under dir; byte-identical for equal seeds.
std::vector<ClipRecord> generate_synthetic_corpus(const std::string& dir, int n, uint64_t seed);

void write_manifest(const std::string& path, const std::vector<ClipRecord>& records);
std::vector<ClipRecord> read_manifest(const std::string& path);

}  // namespace egs
