#include "egosonics/egosonics.h"

#include <fstream>
#include <functional>
#include <new>
#include <string>

#include "core/acceptance.hpp"
#include "core/blas.hpp"
#include "core/config.hpp"
#include "core/corpus.hpp"
#include "core/pipeline.hpp"

using namespace egs;

struct egs_pipeline {
    PipelineConfig cfg;
    std::string last_error;
    egs_status open_status = EGS_OK;
};

namespace {

egs_status run_guarded(egs_pipeline* p, const char* what, const std::function<void()>& fn) {
    if (!p) return EGS_E_CONTRACT;
    try {
        p->last_error.clear();
        fn();
        return EGS_OK;
    } catch (const ConfigError& e) {
        p->last_error = std::string(what) + ": " + e.what();
        return EGS_E_CONFIG;
    } catch (const DataError& e) {
        p->last_error = std::string(what) + ": " + e.what();
        return EGS_E_DATA;
    } catch (const std::exception& e) {
        p->last_error = std::string(what) + ": " + e.what();
        return EGS_E_CONTRACT;
    }
}

AudioSource parse_source(const std::string& s) {
    if (s == "none") return AudioSource::None;
    if (s == "gt") return AudioSource::GroundTruth;
    if (s == "generated") return AudioSource::Generated;
    throw ConfigError("audio source must be none|gt|generated, got '" + s + "'");
}

}  // namespace

extern "C" {

const char* egs_version(void) { return "0.1.0"; }

egs_pipeline* egs_open(const char* config_path) {
    pin_blas_threads();
    auto* p = new (std::nothrow) egs_pipeline();
    if (!p) return nullptr;
    if (config_path && *config_path) {
        p->open_status = run_guarded(p, "open", [&] {
            p->cfg = PipelineConfig::from_file(config_path);
        });
    } else {
        p->cfg = PipelineConfig::defaults();
    }
    return p;
}

void egs_close(egs_pipeline* p) { delete p; }

egs_status egs_open_status(const egs_pipeline* p) {
    return p ? p->open_status : EGS_E_CONTRACT;
}

egs_status egs_set(egs_pipeline* p, const char* key, const char* value) {
    return run_guarded(p, "set", [&] {
        if (!key || !value) throw ConfigError("null key/value");
        p->cfg.apply(key, value);
        p->cfg.validate();
    });
}

const char* egs_last_error(const egs_pipeline* p) {
    return p ? p->last_error.c_str() : "null pipeline";
}

egs_status egs_gen_synthetic(egs_pipeline* p, const char* out_dir, int n_clips, uint64_t seed) {
    return run_guarded(p, "gen-synthetic", [&] {
        if (!out_dir) throw ConfigError("null output dir");
        generate_synthetic_corpus(out_dir, n_clips, seed);
        write_run_manifest(std::string(out_dir) + "/run_manifest.txt", "gen-synthetic", p->cfg, {},
                           {{"n", static_cast<uint64_t>(n_clips)}, {"seed", seed}});
    });
}

egs_status egs_prepare(egs_pipeline* p, const char* manifest_path, const char* store_dir,
                       const char* ckpt_dir) {
    return run_guarded(p, "prepare", [&] {
        if (!manifest_path || !store_dir || !ckpt_dir) throw ConfigError("null path");
        auto corpus = read_manifest(manifest_path);
        prepare(corpus, store_dir, p->cfg, ckpt_dir);
        write_run_manifest(std::string(store_dir) + "/run_manifest.txt", "prepare", p->cfg, {},
                           {{"manifest", file_checksum(manifest_path)}});
    });
}

egs_status egs_train(egs_pipeline* p, const char* stage, const char* store_dir,
                     const char* ckpt_dir) {
    return run_guarded(p, "train", [&] {
        if (!stage || !store_dir || !ckpt_dir) throw ConfigError("null argument");
        auto store = PreparedStore::load(store_dir);
        std::string s(stage);
        if (s == "vae") train_vae_stage(store, p->cfg, ckpt_dir);
        else if (s == "mlp") train_mlp_stage(store, p->cfg, ckpt_dir);
        else if (s == "diffusion") train_diffusion_stage(store, p->cfg, ckpt_dir);
        else if (s == "syncronet")
            train_syncronet_stage(store, p->cfg, ckpt_dir, p->cfg.syncronet_cross_attention);
        else if (s == "audiosr") train_audiosr_stage(store, p->cfg, ckpt_dir);
        else if (s == "vaas") train_vaas_stage(store, p->cfg, ckpt_dir);
        else if (s == "summarizer") train_summarizer_stage(store, p->cfg, ckpt_dir);
        else throw ConfigError("unknown training stage '" + s + "'");
        std::vector<std::pair<std::string, uint64_t>> ck;
        for (const char* name : {"frame_encoder", "vae", "mlp", "unet", "syncronet",
                                 "syncronet_nocross", "audio_sr", "vaas", "summarizer"}) {
            std::string path = ckpt_path(ckpt_dir, name);
            if (std::ifstream(path).good()) ck.push_back({name, file_checksum(path)});
        }
        write_run_manifest(std::string(ckpt_dir) + "/run_manifest_train_" + s + ".txt",
                           "train-" + s, p->cfg, ck,
                           {{"store_index", file_checksum(store_dir + std::string("/index.tsv"))}});
    });
}

egs_status egs_infer(egs_pipeline* p, const char* store_dir, const char* ckpt_dir,
                     const char* clip_id, const char* out_wav, const char* dump_dir,
                     int use_syncronet) {
    return run_guarded(p, "infer", [&] {
        if (!store_dir || !ckpt_dir || !clip_id) throw ConfigError("null argument");
        auto store = PreparedStore::load(store_dir);
        InferOptions opt;
        opt.use_syncronet = use_syncronet != 0 && p->cfg.syncronet_enabled;
        opt.cross_attention = p->cfg.syncronet_cross_attention;
        opt.fps_effective = p->cfg.fps_effective;
        opt.dump_intermediates = dump_dir != nullptr;
        infer_clip(store, clip_id, p->cfg, ckpt_dir, opt, out_wav ? out_wav : "",
                   dump_dir ? dump_dir : "");
        if (out_wav && *out_wav) {
            std::vector<std::pair<std::string, uint64_t>> ck;
            for (const char* name : {"vae", "mlp", "unet", "syncronet", "audio_sr"}) {
                std::string path = ckpt_path(ckpt_dir, name);
                if (std::ifstream(path).good()) ck.push_back({name, file_checksum(path)});
            }
            write_run_manifest(std::string(out_wav) + ".manifest.txt", "infer", p->cfg, ck,
                               {{"clip", fnv1a64(std::string(clip_id))}});
        }
    });
}

egs_status egs_enhance(egs_pipeline* p, const char* in_spec, const char* ckpt_dir,
                       const char* out_spec) {
    return run_guarded(p, "enhance", [&] {
        if (!in_spec || !ckpt_dir || !out_spec) throw ConfigError("null argument");
        AudioSRModel m(p->cfg.seed_training);
        m.load(ckpt_path(ckpt_dir, "audio_sr"));
        Spectrogram s = Spectrogram::from_grid(read_grid(in_spec, "EGSPEC1"));
        Spectrogram hi = m.upsample(s);
        write_grid(out_spec, hi.to_grid());
    });
}

egs_status egs_evaluate(egs_pipeline* p, const char* generated_dir, const char* reference_store,
                        const char* vaas_checkpoint, const char* report_path) {
    return run_guarded(p, "evaluate", [&] {
        if (!generated_dir || !reference_store || !vaas_checkpoint)
            throw ConfigError("null argument");
        auto store = PreparedStore::load(reference_store);
        evaluate_dir(generated_dir, store, vaas_checkpoint, p->cfg,
                     report_path ? report_path : "");
    });
}

egs_status egs_summarize(egs_pipeline* p, const char* store_dir, const char* ckpt_dir,
                         const char* audio_source, const char* report_path, int holdout_clips,
                         double* out_mean_cosine) {
    return run_guarded(p, "summarize", [&] {
        if (!store_dir || !ckpt_dir || !audio_source) throw ConfigError("null argument");
        auto store = PreparedStore::load(store_dir);
        double v = summarize_stage(store, p->cfg, ckpt_dir, parse_source(audio_source),
                                   report_path ? report_path : "", holdout_clips);
        if (out_mean_cosine) *out_mean_cosine = v;
    });
}

egs_status egs_ablate_fps(egs_pipeline* p, const char* store_dir, const char* ckpt_dir,
                          const char* report_path, int eval_clips) {
    return run_guarded(p, "ablate-fps", [&] {
        if (!store_dir || !ckpt_dir) throw ConfigError("null argument");
        auto store = PreparedStore::load(store_dir);
        run_ablation_suite(store, p->cfg, ckpt_dir, report_path ? report_path : "", eval_clips);
    });
}

egs_status egs_run_acceptance(egs_pipeline* p, const char* workdir) {
    return run_guarded(p, "run-acceptance", [&] {
        if (!workdir) throw ConfigError("null workdir");
        auto results = run_acceptance(workdir);
        if (!all_passed(results)) throw ContractError("acceptance criteria failed");
    });
}

}  // extern "C"
