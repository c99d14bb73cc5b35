#include "core/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace egs {
namespace {

Tensor normalized(const Tensor& v) {
    double n = 0.0;
    for (float x : v.v) n += static_cast<double>(x) * x;
    n = std::sqrt(n);
    Tensor out = v;
    if (n > 1e-12)
        for (auto& x : out.v) x = static_cast<float>(x / n);
    return out;
}

StftParams stft_params_from(const PipelineConfig& cfg) {
    StftParams p;
    p.window_length = cfg.stft_window;
    p.hop_length = cfg.stft_hop;
    p.fft_bins_kept = cfg.stft_bins;
    return p;
}

std::string events_to_string(const std::vector<EventAnnotation>& events) {
    if (events.empty()) return "-";
    std::ostringstream os;
    for (size_t i = 0; i < events.size(); ++i) {
        if (i) os << ';';
        os << events[i].time_seconds << ':' << events[i].event_class;
    }
    return os.str();
}

std::vector<EventAnnotation> events_from_string(const std::string& s) {
    std::vector<EventAnnotation> out;
    if (s == "-" || s.empty()) return out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ';')) {
        auto colon = tok.find(':');
        check_contract(colon != std::string::npos, "store index: bad events field");
        out.push_back({std::stod(tok.substr(0, colon)), std::stoi(tok.substr(colon + 1))});
    }
    return out;
}

Tensor load_grid_tensor(const std::string& path, const std::string& magic) {
    return read_grid(path, magic).values;
}

// Latents are cached as [4, 64*64] grids.
Tensor load_latent(const std::string& path) {
    Tensor flat = load_grid_tensor(path, "EGSLAT1");
    Tensor z({4, 64, 64});
    check_contract(flat.numel() == z.numel(), "latent cache: bad size");
    z.v = flat.v;
    return z;
}

int clip_class(const StoreEntry& e) {
    return e.events.empty() ? 0 : e.events.front().event_class;
}

}  // namespace

std::vector<const StoreEntry*> PreparedStore::included() const {
    std::vector<const StoreEntry*> out;
    for (const auto& e : entries)
        if (!e.excluded) out.push_back(&e);
    return out;
}

const StoreEntry* PreparedStore::find(const std::string& clip_id) const {
    for (const auto& e : entries)
        if (e.clip_id == clip_id && !e.excluded) return &e;
    return nullptr;
}

void PreparedStore::save_index() const {
    std::string path = (fs::path(dir) / "index.tsv").string();
    std::ofstream os(path, std::ios::binary);
    check_contract(os.good(), "store: cannot write index " + path);
    os << "# median_scale_min=" << median_scale_min << " median_scale_max=" << median_scale_max
       << "\n";
    os << "clip_id\tspec_native\tspec512\temb_rows\temb512\tlatent\taudio\texcluded\treason\t"
          "scale_min\tscale_max\tevents\ttext_embedding\n";
    auto base = fs::path(dir);
    auto rel = [&](const std::string& p) {
        if (p.empty()) return std::string("-");
        fs::path fp(p);
        return fp.parent_path() == base ? fp.filename().string() : p;
    };
    for (const auto& e : entries) {
        os << e.clip_id << '\t' << rel(e.spec_native) << '\t' << rel(e.spec512) << '\t'
           << rel(e.emb_rows) << '\t' << rel(e.emb512) << '\t' << rel(e.latent) << '\t'
           << (e.audio_path.empty() ? "-" : e.audio_path) << '\t' << (e.excluded ? 1 : 0) << '\t'
           << (e.exclude_reason.empty() ? "-" : e.exclude_reason) << '\t' << e.scale_min << '\t'
           << e.scale_max << '\t' << events_to_string(e.events) << '\t';
        if (e.gt_text_embedding.empty()) {
            os << '-';
        } else {
            for (size_t i = 0; i < e.gt_text_embedding.size(); ++i) {
                if (i) os << ',';
                os << e.gt_text_embedding[i];
            }
        }
        os << '\n';
    }
}

PreparedStore PreparedStore::load(const std::string& dir) {
    PreparedStore store;
    store.dir = dir;
    std::string path = (fs::path(dir) / "index.tsv").string();
    std::ifstream is(path);
    if (!is.good()) throw DataError("store: cannot open index " + path);
    std::string line;
    std::getline(is, line);
    {
        std::stringstream ss(line);
        std::string tok;
        while (ss >> tok) {
            auto eq = tok.find('=');
            if (tok.rfind("median_scale_min", 2) != std::string::npos ||
                tok.rfind("median_scale_min=", 0) == 0)
                store.median_scale_min = std::stof(tok.substr(eq + 1));
            else if (tok.rfind("median_scale_max=", 0) == 0)
                store.median_scale_max = std::stof(tok.substr(eq + 1));
        }
    }
    std::getline(is, line);  // header
    auto base = fs::path(dir);
    auto resolve = [&](const std::string& p) {
        if (p == "-" || p.empty()) return std::string();
        fs::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, '\t')) cols.push_back(col);
        check_contract(cols.size() == 13, "store index: expected 13 columns");
        StoreEntry e;
        e.clip_id = cols[0];
        e.spec_native = resolve(cols[1]);
        e.spec512 = resolve(cols[2]);
        e.emb_rows = resolve(cols[3]);
        e.emb512 = resolve(cols[4]);
        e.latent = resolve(cols[5]);
        e.audio_path = cols[6] == "-" ? "" : cols[6];
        e.excluded = cols[7] == "1";
        e.exclude_reason = cols[8] == "-" ? "" : cols[8];
        e.scale_min = std::stof(cols[9]);
        e.scale_max = std::stof(cols[10]);
        e.events = events_from_string(cols[11]);
        if (cols[12] != "-") {
            std::stringstream ts(cols[12]);
            std::string f;
            while (std::getline(ts, f, ',')) e.gt_text_embedding.push_back(std::stof(f));
        }
        store.entries.push_back(std::move(e));
    }
    return store;
}

std::string ckpt_path(const std::string& dir, const std::string& stage) {
    return (fs::path(dir) / (stage + ".egsckpt")).string();
}

namespace {

void require_checkpoint(const std::string& dir, const std::string& stage) {
    if (!fs::exists(ckpt_path(dir, stage)))
        throw DataError("missing checkpoint for stage '" + stage + "': " +
                        ckpt_path(dir, stage));
}

FrameEncoder load_frame_encoder(const std::string& ckpt_dir) {
    require_checkpoint(ckpt_dir, "frame_encoder");
    FrameEncoder enc;
    enc.load(ckpt_path(ckpt_dir, "frame_encoder"));
    return enc;
}

}  // namespace

PreparedStore prepare(const std::vector<ClipRecord>& corpus, const std::string& store_dir,
                      const PipelineConfig& cfg, const std::string& ckpt_dir) {
    check_contract(!corpus.empty(), "prepare: empty corpus");
    fs::create_directories(store_dir);
    fs::create_directories(ckpt_dir);

    // Frame encoder: reuse an existing checkpoint, otherwise run the
    // contrastive warm-up on a corpus sample and save it.
    FrameEncoder enc;
    std::string enc_path = ckpt_path(ckpt_dir, "frame_encoder");
    if (fs::exists(enc_path)) {
        enc.load(enc_path);
    } else {
        std::vector<VideoClip> warmup;
        for (size_t i = 0; i < corpus.size() && warmup.size() < 8;
             i += std::max<size_t>(1, corpus.size() / 8))
            if (!corpus[i].video_path.empty()) warmup.push_back(read_clip(corpus[i].video_path));
        if (cfg.frame_encoder_steps > 0 && !warmup.empty()) {
            Rng rng(cfg.seed_training, 0xfe);
            train_frame_encoder(enc, warmup, cfg.frame_encoder_steps, 8, 1e-3f, rng);
        }
        enc.save(enc_path, {{"steps", std::to_string(cfg.frame_encoder_steps)}});
    }

    PreparedStore store;
    store.dir = store_dir;
    StftParams sp = stft_params_from(cfg);
    std::vector<float> mins, maxs;
    int done = 0;
    for (const auto& rec : corpus) {
        StoreEntry e;
        e.clip_id = rec.clip_id;
        e.events = rec.events;
        e.gt_text_embedding = rec.gt_text_embedding;
        e.audio_path = rec.audio_path;
        try {
            check_contract(!rec.audio_path.empty(), "no audio for clip");
            Waveform w = read_wav(rec.audio_path);
            if (w.sample_rate != kNativeSampleRate) w = resample(w, kNativeSampleRate);
            auto offsets = select_clips(w, cfg.clip_seconds, cfg.rms_threshold);
            if (offsets.empty()) {
                e.excluded = true;
                e.exclude_reason = "rms_below_threshold";
                store.entries.push_back(std::move(e));
                continue;
            }
            Waveform clip;
            clip.sample_rate = w.sample_rate;
            int64_t clip_samples = static_cast<int64_t>(
                std::llround(cfg.clip_seconds * w.sample_rate));
            clip.samples.assign(w.samples.begin() + offsets[0],
                                w.samples.begin() + offsets[0] + clip_samples);

            Spectrogram native = stft_spectrogram(clip, sp);
            Spectrogram resized = resize_spectrogram(native, 512, 512);
            e.scale_min = native.scale_min;
            e.scale_max = native.scale_max;

            VideoClip video = read_clip(rec.video_path);
            VideoEmbedding ev = encode_video(enc, video);

            auto out = [&](const std::string& suffix) {
                return (fs::path(store_dir) / (rec.clip_id + suffix)).string();
            };
            e.spec_native = out(".spec.egs");
            e.spec512 = out(".spec512.egs");
            e.emb_rows = out(".embrows.egs");
            e.emb512 = out(".emb512.egs");
            write_grid(e.spec_native, native.to_grid());
            write_grid(e.spec512, resized.to_grid());
            write_grid(e.emb_rows, ev.to_grid(false));
            write_grid(e.emb512, ev.to_grid(true));
            mins.push_back(native.scale_min);
            maxs.push_back(native.scale_max);
        } catch (const DataError& ex) {
            e.excluded = true;
            e.exclude_reason = ex.what();
        } catch (const ContractError& ex) {
            e.excluded = true;
            e.exclude_reason = ex.what();
        }
        store.entries.push_back(std::move(e));
        if (++done % 64 == 0)
            std::cerr << "prepare: " << done << "/" << corpus.size() << " clips\n";
    }
    if (store.included().empty()) throw DataError("prepare: every clip failed");
    auto median_of = [](std::vector<float>& v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    store.median_scale_min = median_of(mins);
    store.median_scale_max = median_of(maxs);
    store.save_index();
    return store;
}

void train_vae_stage(PreparedStore& store, const PipelineConfig& cfg,
                     const std::string& ckpt_dir) {
    auto clips = store.included();
    std::vector<Tensor> images;
    images.reserve(clips.size());
    for (const auto* e : clips) images.push_back(load_grid_tensor(e->spec512, "EGSPEC1"));

    Vae vae(cfg.seed_training);
    VaeTrainConfig tc;
    tc.steps = cfg.vae_steps;
    tc.crop = cfg.vae_crop;
    tc.lr = static_cast<float>(cfg.vae_lr);
    tc.seed = cfg.seed_training;
    auto losses = train_vae(vae, images, tc);
    vae.save(ckpt_path(ckpt_dir, "vae"),
             {{"steps", std::to_string(tc.steps)},
              {"final_loss", std::to_string(losses.empty() ? 0.0 : losses.back())}});

    // Cache latents for the diffusion stages.
    for (size_t i = 0; i < clips.size(); ++i) {
        Tensor z = vae.encode(images[i]);
        GridFile g;
        g.magic = "EGSLAT1";
        g.rows = 4;
        g.cols = 64 * 64;
        g.values = Tensor({4, 64 * 64});
        g.values.v = z.v;
        std::string path = (fs::path(store.dir) / (clips[i]->clip_id + ".lat.egs")).string();
        write_grid(path, g);
        for (auto& e : store.entries)
            if (e.clip_id == clips[i]->clip_id) e.latent = path;
    }
    store.save_index();
}

void train_mlp_stage(const PreparedStore& store, const PipelineConfig& cfg,
                     const std::string& ckpt_dir) {
    auto clips = store.included();
    std::vector<Tensor> means, targets;
    for (const auto* e : clips) {
        if (e->gt_text_embedding.empty()) continue;
        VideoEmbedding ev;
        ev.native = load_grid_tensor(e->emb_rows, "EGVEMB1");
        means.push_back(normalized(mean_embedding(ev)));
        Tensor t({512});
        std::copy(e->gt_text_embedding.begin(), e->gt_text_embedding.end(), t.v.begin());
        targets.push_back(std::move(t));
    }
    if (means.empty()) throw DataError("train-mlp: no clips carry text embeddings");
    VideoToTextMlp mlp(cfg.seed_training);
    auto losses = train_video_to_text_mlp(mlp, means, targets, cfg.mlp_epochs,
                                          static_cast<float>(cfg.mlp_lr), cfg.seed_training);
    mlp.save(ckpt_path(ckpt_dir, "mlp"),
             {{"epochs", std::to_string(cfg.mlp_epochs)},
              {"final_loss", std::to_string(losses.empty() ? 0.0 : losses.back())}});
}

void train_diffusion_stage(const PreparedStore& store, const PipelineConfig& cfg,
                           const std::string& ckpt_dir) {
    auto clips = store.included();
    std::vector<Tensor> latents;
    for (const auto* e : clips) {
        check_contract(!e->latent.empty(), "train-diffusion: run train-vae first");
        latents.push_back(load_latent(e->latent));
    }
    NoiseSchedule ns = NoiseSchedule::linear(cfg.diffusion_steps);
    UNet unet(UNetConfig{}, cfg.seed_training);
    AdamW opt(unet.params(), static_cast<float>(cfg.train_lr * 2.0),
              cfg.train_optimizer == "adamw" ? 1e-2f : 0.0f);
    Rng rng(cfg.seed_training, 0xd7);
    double running = 0.0;
    for (int s = 0; s < cfg.diffusion_train_steps; ++s) {
        const Tensor& z0 = latents[rng.below(static_cast<uint32_t>(latents.size()))];
        int t = static_cast<int>(rng.below(static_cast<uint32_t>(ns.total_steps)));
        Tensor eps(z0.shape);
        for (auto& v : eps.v) v = static_cast<float>(rng.gaussian());
        opt.zero_grad();
        auto loss = ldm_loss(
            ns, [&](const VarT<float>& z_t, int tt) { return unet.forward(z_t, tt, nullptr); },
            z0, t, eps);
        backward(loss);
        opt.step();
        running += loss->value.v[0];
        if ((s + 1) % 200 == 0) {
            std::cerr << "train-diffusion: step " << (s + 1) << " mean loss "
                      << running / 200.0 << "\n";
            running = 0.0;
        }
    }
    save_checkpoint(ckpt_path(ckpt_dir, "unet"), "unet", unet.params(),
                    {{"steps", std::to_string(cfg.diffusion_train_steps)},
                     {"optimizer", cfg.train_optimizer},
                     {"lr", std::to_string(cfg.train_lr * 2.0)}});
}

void train_syncronet_stage(const PreparedStore& store, const PipelineConfig& cfg,
                           const std::string& ckpt_dir, bool cross_attention, int holdout_clips) {
    require_checkpoint(ckpt_dir, "unet");
    require_checkpoint(ckpt_dir, "mlp");
    UNet unet(UNetConfig{}, cfg.seed_training);
    load_checkpoint(ckpt_path(ckpt_dir, "unet"), "unet", unet.params());
    unet.params().set_trainable(false);
    VideoToTextMlp mlp(cfg.seed_training);
    mlp.load(ckpt_path(ckpt_dir, "mlp"));

    auto clips = store.included();
    size_t usable = clips.size() > static_cast<size_t>(holdout_clips)
                        ? clips.size() - static_cast<size_t>(holdout_clips)
                        : clips.size();
    std::vector<SyncroTrainItem> items;
    for (size_t i = 0; i < usable; ++i) {
        const auto* e = clips[i];
        check_contract(!e->latent.empty(), "train-syncronet: run train-vae first");
        SyncroTrainItem it;
        it.z0 = load_latent(e->latent);
        it.ev_rows = load_grid_tensor(e->emb_rows, "EGVEMB1");
        it.ev_resized = load_grid_tensor(e->emb512, "EGVEMB1");
        it.c_t = mlp.apply(normalized(mean_embedding(embedding_from_rows(it.ev_rows, 30))));
        items.push_back(std::move(it));
    }

    NoiseSchedule ns = NoiseSchedule::linear(cfg.diffusion_steps);
    SyncroNet syncro(UNetConfig{}, cfg.seed_training + 1);
    syncro.init_from_denoiser(unet);
    SyncroTrainConfig tc;
    tc.epochs = cfg.train_epochs;
    tc.lr = static_cast<float>(cfg.train_lr);
    tc.weight_decay = cfg.train_optimizer == "adamw" ? 1e-2f : 0.0f;
    tc.seed = cfg.seed_training;
    tc.cross_attention = cross_attention;
    tc.fps_effective = cfg.fps_effective;
    auto losses = train_syncronet(syncro, unet, ns, items, tc);
    std::string stage = cross_attention ? "syncronet" : "syncronet_nocross";
    save_syncronet(ckpt_path(ckpt_dir, stage), syncro, unet,
                   {{"epochs", std::to_string(tc.epochs)},
                    {"lr", std::to_string(cfg.train_lr)},
                    {"final_loss", std::to_string(losses.empty() ? 0.0 : losses.back())}});
    std::cerr << "train-syncronet(" << stage << "): final epoch loss "
              << (losses.empty() ? 0.0 : losses.back()) << "\n";
}

void train_audiosr_stage(const PreparedStore& store, const PipelineConfig& cfg,
                         const std::string& ckpt_dir) {
    auto clips = store.included();
    std::vector<std::pair<Tensor, Tensor>> pairs;
    for (const auto* e : clips) {
        Tensor native = load_grid_tensor(e->spec_native, "EGSPEC1");  // [430,1024]
        Tensor hi = resize_grid(native, 512, 1024, true);
        Tensor lo = resize_grid(hi, 512, 512, true);
        pairs.push_back({std::move(lo), std::move(hi)});
    }
    AudioSRModel m(cfg.seed_training);
    AudioSRTrainConfig tc;
    tc.epochs = cfg.audiosr_epochs;
    tc.lr = static_cast<float>(cfg.audiosr_lr);
    tc.seed = cfg.seed_training;
    auto losses = train_audio_sr(m, pairs, tc);
    m.save(ckpt_path(ckpt_dir, "audio_sr"),
           {{"epochs", std::to_string(tc.epochs)},
            {"lr", std::to_string(cfg.audiosr_lr)},
            {"final_loss", std::to_string(losses.empty() ? 0.0 : losses.back())}});
}

double train_vaas_stage(const PreparedStore& store, const PipelineConfig& cfg,
                        const std::string& ckpt_dir) {
    auto clips = store.included();
    std::vector<Tensor> audio, video;
    for (const auto* e : clips) {
        audio.push_back(load_grid_tensor(e->spec512, "EGSPEC1"));
        video.push_back(load_grid_tensor(e->emb512, "EGVEMB1"));
    }
    VaasCorpusView corpus{&audio, &video};
    auto dataset = build_vaas_dataset(clips.size(), cfg.vaas_pairs, cfg.seed_vaas);
    VaasModel m(cfg.seed_training);
    VaasTrainConfig tc;
    tc.epochs = cfg.vaas_epochs;
    tc.lr = static_cast<float>(cfg.vaas_lr);
    tc.seed = cfg.seed_vaas;
    auto result = train_vaas(m, dataset, corpus, tc);
    m.save(ckpt_path(ckpt_dir, "vaas"),
           {{"epochs", std::to_string(tc.epochs)},
            {"holdout_accuracy", std::to_string(result.holdout_accuracy)},
            {"pairs", std::to_string(dataset.size())}});
    std::cerr << "train-vaas: holdout accuracy " << result.holdout_accuracy << "% over "
              << result.holdout_count << " pairs\n";
    return result.holdout_accuracy;
}

void train_summarizer_stage(const PreparedStore& store, const PipelineConfig& cfg,
                            const std::string& ckpt_dir, int holdout_clips) {
    auto clips = store.included();
    size_t usable = clips.size() > static_cast<size_t>(holdout_clips)
                        ? clips.size() - static_cast<size_t>(holdout_clips)
                        : clips.size();
    std::vector<Tensor> embs;
    std::vector<Waveform> audios;
    std::vector<SummarizerTrainItem> items;
    embs.reserve(usable);
    audios.reserve(usable);
    for (size_t i = 0; i < usable; ++i) {
        const auto* e = clips[i];
        if (e->gt_text_embedding.empty())
            throw DataError("train-summarizer: clip " + e->clip_id + " lacks a text embedding");
        embs.push_back(load_grid_tensor(e->emb512, "EGVEMB1"));
        Waveform w = read_wav(e->audio_path);
        if (w.sample_rate != kNativeSampleRate) w = resample(w, kNativeSampleRate);
        w.samples.resize(kClipSamples, 0.0f);
        audios.push_back(std::move(w));
    }
    for (size_t i = 0; i < usable; ++i) {
        SummarizerTrainItem it;
        it.ev_resized = &embs[i];
        it.audio = &audios[i];
        Tensor t({512});
        std::copy(clips[i]->gt_text_embedding.begin(), clips[i]->gt_text_embedding.end(),
                  t.v.begin());
        it.gt_text = std::move(t);
        items.push_back(it);
    }
    SummarizerModel m(cfg.seed_training);
    SummarizerTrainConfig tc;
    tc.epochs = cfg.summarizer_epochs;
    tc.lr = static_cast<float>(cfg.summarizer_lr);
    tc.seed = cfg.seed_training;
    auto losses = train_summarizer(m, items, tc);
    m.save(ckpt_path(ckpt_dir, "summarizer"),
           {{"epochs", std::to_string(tc.epochs)},
            {"lr", std::to_string(cfg.summarizer_lr)},
            {"final_loss", std::to_string(losses.empty() ? 0.0 : losses.back())}});
}

namespace {

struct ModelBundle {
    Vae vae;
    UNet unet;
    VideoToTextMlp mlp;
    std::optional<SyncroNet> syncro;
    std::optional<AudioSRModel> sr;
    NoiseSchedule ns;

    ModelBundle(const PipelineConfig& cfg, const std::string& ckpt_dir, const InferOptions& opt)
        : vae(cfg.seed_training), unet(UNetConfig{}, cfg.seed_training), mlp(cfg.seed_training) {
        require_checkpoint(ckpt_dir, "vae");
        vae.load(ckpt_path(ckpt_dir, "vae"));
        require_checkpoint(ckpt_dir, "unet");
        load_checkpoint(ckpt_path(ckpt_dir, "unet"), "unet", unet.params());
        require_checkpoint(ckpt_dir, "mlp");
        mlp.load(ckpt_path(ckpt_dir, "mlp"));
        if (opt.use_syncronet) {
            std::string stage = !opt.syncronet_stage.empty()
                                    ? opt.syncronet_stage
                                    : (opt.cross_attention ? "syncronet" : "syncronet_nocross");
            require_checkpoint(ckpt_dir, stage);
            syncro.emplace(UNetConfig{}, cfg.seed_training + 1);
            load_syncronet(ckpt_path(ckpt_dir, stage), *syncro, unet);
        }
        if (opt.enhance) {
            require_checkpoint(ckpt_dir, "audio_sr");
            sr.emplace(cfg.seed_training);
            sr->load(ckpt_path(ckpt_dir, "audio_sr"));
        }
        ns = NoiseSchedule::linear(cfg.diffusion_steps);
    }
};

Tensor generate_spec512(ModelBundle& mb, const PipelineConfig& cfg, const VideoEmbedding& ev,
                        uint64_t sample_seed) {
    Tensor c_t = mb.mlp.apply(normalized(mean_embedding(ev)));
    Tensor ctx = UNet::ensure_rows(c_t);
    Rng rng(cfg.seed_sampling ^ sample_seed, 0xdd);
    Tensor z({4, 64, 64});
    for (auto& v : z.v) v = static_cast<float>(rng.gaussian());
    auto ts = ddim_timesteps(mb.ns.total_steps, cfg.ddim_steps);
    for (size_t k = 0; k < ts.size(); ++k) {
        int t = ts[k];
        int t_prev = k + 1 < ts.size() ? ts[k + 1] : -1;
        ControlSignalSet cs;
        const ControlSignalSet* csp = nullptr;
        if (mb.syncro) {
            cs = mb.syncro->controls_for(z, ev, t, static_cast<float>(cfg.guidance_scale));
            csp = &cs;
        }
        Tensor eps = mb.unet.predict_eps(z, t, &ctx, csp);
        z = ddim_update(mb.ns, z, eps, t, t_prev);
    }
    return mb.vae.decode(z);
}

VideoEmbedding embedding_for(const PreparedStore& store, const StoreEntry& e, int fps_effective) {
    VideoEmbedding ev;
    ev.native = load_grid_tensor(e.emb_rows, "EGVEMB1");
    ev.resized = load_grid_tensor(e.emb512, "EGVEMB1");
    ev.fps = kNativeFps;
    if (fps_effective < kNativeFps) ev = reduce_fps(ev, fps_effective);
    return ev;
}

}  // namespace

InferResult infer_clip(const PreparedStore& store, const std::string& clip_id,
                       const PipelineConfig& cfg, const std::string& ckpt_dir,
                       const InferOptions& opt, const std::string& out_wav,
                       const std::string& dump_dir) {
    const StoreEntry* entry = store.find(clip_id);
    if (!entry) throw DataError("infer: unknown clip " + clip_id);
    auto t0 = std::chrono::steady_clock::now();

    ModelBundle mb(cfg, ckpt_dir, opt);
    VideoEmbedding ev = embedding_for(store, *entry, opt.fps_effective);

    uint64_t sample_seed = fnv1a64(clip_id) ^ opt.sample_seed;
    Tensor gen = generate_spec512(mb, cfg, ev, sample_seed);

    InferResult result;
    result.spec512.values = gen;
    result.spec512.params = stft_params_from(cfg);
    result.spec512.sample_rate = kNativeSampleRate;
    result.spec512.scale_min = store.median_scale_min;
    result.spec512.scale_max = store.median_scale_max;

    Spectrogram widened = result.spec512;
    if (mb.sr) widened = mb.sr->upsample(result.spec512);
    result.spec_native = resize_spectrogram(widened, kNativeFrames, kNativeBins);

    auto gl = griffin_lim_invert(result.spec_native, cfg.griffin_lim_iterations,
                                 cfg.griffin_lim_momentum);
    result.waveform = gl.waveform;
    auto t1 = std::chrono::steady_clock::now();
    result.wall_seconds = std::chrono::duration<double>(t1 - t0).count();

    if (!out_wav.empty()) write_wav(out_wav, result.waveform);
    if (opt.dump_intermediates && !dump_dir.empty()) {
        fs::create_directories(dump_dir);
        write_grid((fs::path(dump_dir) / (clip_id + ".spec512.egs")).string(),
                   result.spec512.to_grid());
        if (mb.sr)
            write_grid((fs::path(dump_dir) / (clip_id + ".spec1024.egs")).string(),
                       widened.to_grid());
        write_grid((fs::path(dump_dir) / (clip_id + ".spec_native.egs")).string(),
                   result.spec_native.to_grid());
    }
    return result;
}

std::vector<std::pair<std::string, Tensor>> generate_variant(
    const PreparedStore& store, const PipelineConfig& cfg, const std::string& ckpt_dir,
    const InferOptions& opt, const std::vector<std::string>& clip_ids) {
    InferOptions local = opt;
    local.enhance = false;  // alignment scoring happens on the 512x512 grids
    ModelBundle mb(cfg, ckpt_dir, local);
    std::vector<std::pair<std::string, Tensor>> out;
    for (const auto& id : clip_ids) {
        const StoreEntry* e = store.find(id);
        if (!e) continue;
        VideoEmbedding ev = embedding_for(store, *e, opt.fps_effective);
        Tensor gen = generate_spec512(mb, cfg, ev, fnv1a64(id) ^ opt.sample_seed);
        out.push_back({id, std::move(gen)});
    }
    return out;
}

std::string format_report_line(const EvaluationRecord& r) {
    std::ostringstream os;
    os << "variant=" << (r.variant.empty() ? "-" : r.variant) << "\tn_pairs=" << r.n_pairs
       << "\tvaas=" << r.vaas << "\tvaas_mean=" << r.vaas_mean << "\tfid=" << r.fid_value
       << "\tis=" << r.is_value << "\tthreshold=" << r.threshold
       << "\tvaas_checkpoint=" << r.vaas_checksum << "\tseed=" << r.seed;
    return os.str();
}

void append_report(const std::string& path, const EvaluationRecord& r) {
    std::ofstream os(path, std::ios::app);
    check_contract(os.good(), "report: cannot open " + path);
    os << format_report_line(r) << "\n";
}

EvaluationRecord evaluate_generated(const std::vector<std::pair<std::string, Tensor>>& generated,
                                    const PreparedStore& store, const VaasModel& vaas_model,
                                    const PipelineConfig& cfg, const std::string& variant) {
    if (generated.empty()) throw DataError("evaluate: empty generated set");
    EvaluationRecord rec;
    rec.variant = variant;
    rec.n_pairs = static_cast<int>(generated.size());
    rec.threshold = 0.5;
    rec.vaas_checksum = vaas_model.params().checksum();
    rec.seed = cfg.seed_eval;

    std::vector<double> scores;
    std::vector<Tensor> gen_features;
    for (const auto& [id, spec] : generated) {
        const StoreEntry* e = store.find(id);
        if (!e) throw DataError("evaluate: clip " + id + " not in reference store");
        VideoEmbedding ev = embedding_for(store, *e, cfg.fps_effective);
        scores.push_back(vaas_model.score(spec, ev.resized));
        gen_features.push_back(vaas_model.extract_features(spec));
    }
    rec.vaas = vaas_aggregate(scores, rec.threshold);
    rec.vaas_mean = 0.0;
    for (double s : scores) rec.vaas_mean += s;
    rec.vaas_mean /= static_cast<double>(scores.size());

    // Reference features over the whole included corpus.
    std::vector<Tensor> ref_features;
    std::vector<int> ref_labels;
    for (const auto* e : store.included()) {
        Tensor spec = load_grid_tensor(e->spec512, "EGSPEC1");
        ref_features.push_back(vaas_model.extract_features(spec));
        ref_labels.push_back(clip_class(*e));
    }
    rec.fid_value = fid(gen_features, ref_features);

    SoftmaxProbe probe(VaasModel::kFeatureDim, kEventClasses);
    probe.train(ref_features, ref_labels, 200, 0.5);
    std::vector<std::vector<double>> probs;
    for (const auto& f : gen_features) probs.push_back(probe.predict(f));
    rec.is_value = inception_score(probs);
    return rec;
}

EvaluationRecord evaluate_dir(const std::string& generated_dir, const PreparedStore& store,
                              const std::string& vaas_ckpt, const PipelineConfig& cfg,
                              const std::string& report_path) {
    VaasModel vaas_model(cfg.seed_training);
    vaas_model.load(vaas_ckpt);
    std::vector<std::pair<std::string, Tensor>> generated;
    for (const auto& entry : fs::directory_iterator(generated_dir)) {
        std::string name = entry.path().filename().string();
        auto pos = name.find(".spec512.egs");
        if (pos == std::string::npos) continue;
        generated.push_back({name.substr(0, pos),
                             load_grid_tensor(entry.path().string(), "EGSPEC1")});
    }
    std::sort(generated.begin(), generated.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    if (generated.empty()) throw DataError("evaluate: no *.spec512.egs files in " + generated_dir);
    auto rec = evaluate_generated(generated, store, vaas_model, cfg, "evaluate");
    if (!report_path.empty()) append_report(report_path, rec);
    return rec;
}

std::vector<std::string> holdout_clip_ids(const PreparedStore& store, int n) {
    auto inc = store.included();
    std::vector<std::string> ids;
    size_t start = inc.size() > static_cast<size_t>(n) ? inc.size() - static_cast<size_t>(n) : 0;
    for (size_t i = start; i < inc.size(); ++i) ids.push_back(inc[i]->clip_id);
    return ids;
}

std::vector<EvaluationRecord> run_ablation_suite(const PreparedStore& store,
                                                 const PipelineConfig& cfg,
                                                 const std::string& ckpt_dir,
                                                 const std::string& report_path, int eval_clips) {
    require_checkpoint(ckpt_dir, "vaas");
    VaasModel vaas_model(cfg.seed_training);
    vaas_model.load(ckpt_path(ckpt_dir, "vaas"));
    auto ids = holdout_clip_ids(store, eval_clips);

    struct VariantSpec {
        std::string name;
        bool use_syncronet;
        bool cross_attention;
        int fps;
    };
    const VariantSpec variants[5] = {{"no-syncronet", false, true, 30},
                                     {"no-cross-attn", true, false, 30},
                                     {"fps4", true, true, 4},
                                     {"fps15", true, true, 15},
                                     {"fps30", true, true, 30}};
    std::vector<EvaluationRecord> rows;
    for (const auto& v : variants) {
        InferOptions opt;
        opt.use_syncronet = v.use_syncronet;
        opt.cross_attention = v.cross_attention;
        opt.fps_effective = v.fps;
        PipelineConfig vcfg = cfg;
        vcfg.fps_effective = v.fps;
        auto generated = generate_variant(store, vcfg, ckpt_dir, opt, ids);
        auto rec = evaluate_generated(generated, store, vaas_model, vcfg, v.name);
        rows.push_back(rec);
        if (!report_path.empty()) append_report(report_path, rec);
        std::cerr << "ablation " << v.name << ": vaas=" << rec.vaas
                  << "% mean=" << rec.vaas_mean << " fid=" << rec.fid_value << "\n";
    }
    return rows;
}

double summarize_stage(const PreparedStore& store, const PipelineConfig& cfg,
                       const std::string& ckpt_dir, AudioSource source,
                       const std::string& report_path, int holdout_clips) {
    require_checkpoint(ckpt_dir, "summarizer");
    SummarizerModel m(cfg.seed_training);
    m.load(ckpt_path(ckpt_dir, "summarizer"));
    auto ids = holdout_clip_ids(store, holdout_clips);
    check_contract(!ids.empty(), "summarize: no held-out clips");

    std::vector<Tensor> embs;
    std::vector<Waveform> audios;
    std::vector<Tensor> texts;
    embs.reserve(ids.size());
    for (const auto& id : ids) {
        const StoreEntry* e = store.find(id);
        check_contract(e && !e->gt_text_embedding.empty(), "summarize: missing text embedding");
        embs.push_back(load_grid_tensor(e->emb512, "EGVEMB1"));
        Tensor t({512});
        std::copy(e->gt_text_embedding.begin(), e->gt_text_embedding.end(), t.v.begin());
        texts.push_back(std::move(t));
        if (source == AudioSource::GroundTruth) {
            Waveform w = read_wav(e->audio_path);
            if (w.sample_rate != kNativeSampleRate) w = resample(w, kNativeSampleRate);
            w.samples.resize(kClipSamples, 0.0f);
            audios.push_back(std::move(w));
        } else if (source == AudioSource::Generated) {
            InferOptions opt;
            opt.fps_effective = cfg.fps_effective;
            audios.push_back(infer_clip(store, id, cfg, ckpt_dir, opt).waveform);
        }
    }
    std::vector<SummaryReportItem> items;
    for (size_t i = 0; i < ids.size(); ++i) {
        SummaryReportItem it;
        it.ev_resized = &embs[i];
        it.audio = source == AudioSource::None ? nullptr : &audios[i];
        it.gt_text = texts[i];
        items.push_back(it);
    }
    double mean_cos = summarization_report(m, items, source);
    if (!report_path.empty()) {
        std::ofstream os(report_path, std::ios::app);
        const char* name = source == AudioSource::None
                               ? "none"
                               : (source == AudioSource::GroundTruth ? "gt" : "generated");
        os << "summary_audio_source=" << name << "\tn=" << ids.size()
           << "\tmean_cosine=" << mean_cos << "\n";
    }
    return mean_cos;
}

uint64_t file_checksum(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is.good()) throw DataError("checksum: cannot open " + path);
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[65536];
    while (is.good()) {
        is.read(buf, sizeof(buf));
        std::streamsize n = is.gcount();
        if (n > 0) h = fnv1a64(buf, static_cast<size_t>(n), h);
    }
    return h;
}

void write_run_manifest(const std::string& path, const std::string& command,
                        const PipelineConfig& cfg,
                        const std::vector<std::pair<std::string, uint64_t>>& checkpoints,
                        const std::vector<std::pair<std::string, uint64_t>>& inputs) {
    std::ofstream os(path, std::ios::binary);
    check_contract(os.good(), "run manifest: cannot open " + path);
    os << "command=" << command << "\n";
    os << "config_hash=" << cfg.hash() << "\n";
    os << "seed.corpus=" << cfg.seed_corpus << "\n";
    os << "seed.training=" << cfg.seed_training << "\n";
    os << "seed.sampling=" << cfg.seed_sampling << "\n";
    os << "seed.vaas=" << cfg.seed_vaas << "\n";
    os << "seed.eval=" << cfg.seed_eval << "\n";
    for (const auto& [name, sum] : checkpoints) os << "checkpoint." << name << "=" << sum << "\n";
    for (const auto& [name, sum] : inputs) os << "input." << name << "=" << sum << "\n";
}

}  // namespace egs
