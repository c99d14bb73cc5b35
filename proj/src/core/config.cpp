#include "core/config.hpp"

#include <fstream>

#include "core/common.hpp"

namespace egs {
namespace {

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

double parse_num(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for " + key + ": '" + v + "'");
    }
}

}  // namespace

PipelineConfig PipelineConfig::defaults() { return PipelineConfig{}; }

PipelineConfig PipelineConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is.good()) throw ConfigError("config: cannot open " + path);
    PipelineConfig cfg;
    std::string line;
    size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: missing '=' at line " + std::to_string(line_no));
        std::string key = line.substr(start, eq - start);
        std::string value = line.substr(eq + 1);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        size_t vs = value.find_first_not_of(" \t");
        value = vs == std::string::npos ? "" : value.substr(vs);
        cfg.apply(key, value);
    }
    cfg.validate();
    return cfg;
}

void PipelineConfig::apply(const std::string& key, const std::string& value) {
    raw[key] = value;
    if (key == "stft.window") stft_window = static_cast<int>(parse_num(value, key));
    else if (key == "stft.hop") stft_hop = static_cast<int>(parse_num(value, key));
    else if (key == "stft.bins") stft_bins = static_cast<int>(parse_num(value, key));
    else if (key == "audio.rms_threshold") rms_threshold = parse_num(value, key);
    else if (key == "audio.clip_seconds") clip_seconds = parse_num(value, key);
    else if (key == "griffinlim.iterations") griffin_lim_iterations = static_cast<int>(parse_num(value, key));
    else if (key == "griffinlim.momentum") griffin_lim_momentum = parse_num(value, key);
    else if (key == "video.fps_effective") fps_effective = static_cast<int>(parse_num(value, key));
    else if (key == "diffusion.T") diffusion_steps = static_cast<int>(parse_num(value, key));
    else if (key == "diffusion.ddim_steps") ddim_steps = static_cast<int>(parse_num(value, key));
    else if (key == "diffusion.guidance_scale") guidance_scale = parse_num(value, key);
    else if (key == "syncronet.enabled") syncronet_enabled = parse_bool(value, key);
    else if (key == "syncronet.cross_attention") syncronet_cross_attention = parse_bool(value, key);
    else if (key == "train.lr") train_lr = parse_num(value, key);
    else if (key == "train.optimizer") train_optimizer = value;
    else if (key == "train.epochs") train_epochs = static_cast<int>(parse_num(value, key));
    else if (key == "train.vae.steps") vae_steps = static_cast<int>(parse_num(value, key));
    else if (key == "train.vae.crop") vae_crop = static_cast<int>(parse_num(value, key));
    else if (key == "train.vae.lr") vae_lr = parse_num(value, key);
    else if (key == "train.diffusion.steps") diffusion_train_steps = static_cast<int>(parse_num(value, key));
    else if (key == "train.audiosr.lr") audiosr_lr = parse_num(value, key);
    else if (key == "train.audiosr.epochs") audiosr_epochs = static_cast<int>(parse_num(value, key));
    else if (key == "train.vaas.lr") vaas_lr = parse_num(value, key);
    else if (key == "train.vaas.epochs") vaas_epochs = static_cast<int>(parse_num(value, key));
    else if (key == "train.vaas.pairs") vaas_pairs = static_cast<int>(parse_num(value, key));
    else if (key == "train.mlp.lr") mlp_lr = parse_num(value, key);
    else if (key == "train.mlp.epochs") mlp_epochs = static_cast<int>(parse_num(value, key));
    else if (key == "train.summarizer.lr") summarizer_lr = parse_num(value, key);
    else if (key == "train.summarizer.epochs") summarizer_epochs = static_cast<int>(parse_num(value, key));
    else if (key == "train.frame_encoder.steps") frame_encoder_steps = static_cast<int>(parse_num(value, key));
    else if (key == "seeds.corpus") seed_corpus = static_cast<uint64_t>(parse_num(value, key));
    else if (key == "seeds.training") seed_training = static_cast<uint64_t>(parse_num(value, key));
    else if (key == "seeds.sampling") seed_sampling = static_cast<uint64_t>(parse_num(value, key));
    else if (key == "seeds.vaas") seed_vaas = static_cast<uint64_t>(parse_num(value, key));
    else if (key == "seeds.eval") seed_eval = static_cast<uint64_t>(parse_num(value, key));
    else throw ConfigError("config: unknown key '" + key + "'");
}

void PipelineConfig::validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
    if (stft_window <= 0 || (stft_window & (stft_window - 1)) != 0)
        fail("stft.window must be a power of two");
    if (stft_hop <= 0 || stft_hop > stft_window) fail("stft.hop must be in (0, window]");
    if (stft_bins <= 0 || stft_bins > stft_window / 2 + 1) fail("stft.bins out of range");
    if (rms_threshold < 0) fail("audio.rms_threshold must be >= 0");
    if (clip_seconds <= 0) fail("audio.clip_seconds must be positive");
    if (griffin_lim_iterations < 0) fail("griffinlim.iterations must be >= 0");
    if (griffin_lim_momentum < 0 || griffin_lim_momentum >= 1)
        fail("griffinlim.momentum must be in [0,1)");
    if (fps_effective != 4 && fps_effective != 15 && fps_effective != 30)
        fail("video.fps_effective must be one of 4, 15, 30");
    if (diffusion_steps < 2) fail("diffusion.T must be >= 2");
    if (ddim_steps < 2 || ddim_steps > diffusion_steps)
        fail("diffusion.ddim_steps must be in [2, T]");
    if (guidance_scale < 0) fail("diffusion.guidance_scale must be >= 0");
    if (train_lr <= 0 || vae_lr <= 0 || audiosr_lr <= 0 || vaas_lr <= 0 || mlp_lr <= 0 ||
        summarizer_lr <= 0)
        fail("learning rates must be positive");
    if (train_optimizer != "adamw" && train_optimizer != "adam")
        fail("train.optimizer must be adam or adamw");
    if (train_epochs <= 0 || vae_steps <= 0 || diffusion_train_steps <= 0 || audiosr_epochs <= 0 ||
        vaas_epochs <= 0 || mlp_epochs <= 0 || summarizer_epochs <= 0 || frame_encoder_steps < 0)
        fail("step/epoch counts must be positive");
    if (vae_crop < 8 || vae_crop % 8 != 0) fail("train.vae.crop must be a positive multiple of 8");
    if (vaas_pairs < 4) fail("train.vaas.pairs must be >= 4");
}

uint64_t PipelineConfig::hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& [k, v] : raw) {
        h = fnv1a64(k, h);
        h = fnv1a64(v, h);
    }
    // Fold in effective defaults so an empty file still hashes the behavior.
    for (double d : {static_cast<double>(stft_window), static_cast<double>(stft_hop),
                     static_cast<double>(fps_effective), static_cast<double>(diffusion_steps),
                     static_cast<double>(ddim_steps), guidance_scale, train_lr,
                     static_cast<double>(syncronet_enabled),
                     static_cast<double>(syncronet_cross_attention)})
        h = fnv1a64(&d, sizeof(d), h);
    return h;
}

}  // namespace egs
