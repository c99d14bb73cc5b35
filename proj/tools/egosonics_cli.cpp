// Command-line front end. Every subcommand goes through the shared-library
// C API; exit codes are the egs_status values (0 ok, 1 contract violation,
// 2 data error, 3 bad config).

#include <CLI11.hpp>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "egosonics/egosonics.h"

namespace {

struct PipelineHandle {
    egs_pipeline* p = nullptr;
    ~PipelineHandle() {
        if (p) egs_close(p);
    }
};

int finish(egs_pipeline* p, egs_status st, const char* what) {
    if (st != EGS_OK) std::fprintf(stderr, "%s failed: %s\n", what, egs_last_error(p));
    return static_cast<int>(st);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"egosonics: synchronized audio generation for silent egocentric video"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "flat key=value configuration file");
    app.add_option("--set", overrides, "config override, e.g. --set video.fps_effective=15");

    std::string out_dir, store_dir = "store", ckpt_dir = "checkpoints", manifest, clip_id;
    std::string out_wav, dump_dir, in_spec, out_spec, generated_dir, reference_store;
    std::string vaas_ckpt, report_path, audio_source = "gt", workdir = "acceptance_work";
    int n_clips = 8;
    uint64_t seed = 7;
    int holdout = 16, eval_clips = 16;
    bool no_syncronet = false, dump = false;

    auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic paired corpus");
    gen->add_option("--out", out_dir)->required();
    gen->add_option("--n", n_clips);
    gen->add_option("--seed", seed);

    auto* prep = app.add_subcommand("prepare", "preprocess a corpus into the artifact store");
    prep->add_option("--manifest", manifest)->required();
    prep->add_option("--store", store_dir);
    prep->add_option("--checkpoints", ckpt_dir);

    const char* train_stages[7] = {"vae", "diffusion", "mlp", "syncronet", "audiosr", "vaas",
                                   "summarizer"};
    std::vector<CLI::App*> train_cmds;
    for (const char* st : train_stages) {
        auto* c = app.add_subcommand(std::string("train-") + (std::string(st) == "audiosr"
                                                                  ? "audiosr"
                                                                  : st),
                                     std::string("train the ") + st + " stage");
        c->add_option("--store", store_dir);
        c->add_option("--checkpoints", ckpt_dir);
        train_cmds.push_back(c);
    }

    auto* inf = app.add_subcommand("infer", "video-to-audio inference for one clip");
    inf->add_option("--store", store_dir);
    inf->add_option("--checkpoints", ckpt_dir);
    inf->add_option("--clip", clip_id)->required();
    inf->add_option("--out", out_wav)->required();
    inf->add_option("--dump-dir", dump_dir);
    inf->add_flag("--no-syncronet", no_syncronet);
    inf->add_flag("--dump-intermediates", dump);

    auto* enh = app.add_subcommand("enhance", "super-resolve a 512x512 spectrogram container");
    enh->add_option("--in", in_spec)->required();
    enh->add_option("--out", out_spec)->required();
    enh->add_option("--checkpoints", ckpt_dir);

    auto* ev = app.add_subcommand("evaluate", "VAAS/FID/IS report for generated spectrograms");
    ev->add_option("--generated", generated_dir)->required();
    ev->add_option("--reference", reference_store)->required();
    ev->add_option("--vaas-checkpoint", vaas_ckpt)->required();
    ev->add_option("--report", report_path);

    auto* sum = app.add_subcommand("summarize", "summarization probe report");
    sum->add_option("--store", store_dir);
    sum->add_option("--checkpoints", ckpt_dir);
    sum->add_option("--audio-source", audio_source)
        ->check(CLI::IsMember({"none", "gt", "generated"}));
    sum->add_option("--report", report_path);
    sum->add_option("--holdout", holdout);

    auto* abl = app.add_subcommand("ablate-fps", "run the five-variant ablation suite");
    abl->add_option("--store", store_dir);
    abl->add_option("--checkpoints", ckpt_dir);
    abl->add_option("--report", report_path);
    abl->add_option("--eval-clips", eval_clips);

    auto* acc = app.add_subcommand("run-acceptance", "run the acceptance criteria");
    acc->add_option("--workdir", workdir);

    CLI11_PARSE(app, argc, argv);

    PipelineHandle h;
    h.p = egs_open(config_path.empty() ? nullptr : config_path.c_str());
    if (!h.p) {
        std::fprintf(stderr, "out of memory\n");
        return 1;
    }
    if (egs_open_status(h.p) != EGS_OK)
        return finish(h.p, egs_open_status(h.p), "load config");
    for (const auto& ov : overrides) {
        auto eq = ov.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "--set expects key=value, got '%s'\n", ov.c_str());
            return 3;
        }
        egs_status st = egs_set(h.p, ov.substr(0, eq).c_str(), ov.substr(eq + 1).c_str());
        if (st != EGS_OK) return finish(h.p, st, "apply override");
    }

    if (gen->parsed())
        return finish(h.p, egs_gen_synthetic(h.p, out_dir.c_str(), n_clips, seed),
                      "gen-synthetic");
    if (prep->parsed())
        return finish(h.p,
                      egs_prepare(h.p, manifest.c_str(), store_dir.c_str(), ckpt_dir.c_str()),
                      "prepare");
    for (size_t i = 0; i < train_cmds.size(); ++i)
        if (train_cmds[i]->parsed())
            return finish(
                h.p, egs_train(h.p, train_stages[i], store_dir.c_str(), ckpt_dir.c_str()),
                "train");
    if (inf->parsed())
        return finish(h.p,
                      egs_infer(h.p, store_dir.c_str(), ckpt_dir.c_str(), clip_id.c_str(),
                                out_wav.c_str(),
                                (dump || !dump_dir.empty())
                                    ? (dump_dir.empty() ? "." : dump_dir.c_str())
                                    : nullptr,
                                no_syncronet ? 0 : 1),
                      "infer");
    if (enh->parsed())
        return finish(h.p, egs_enhance(h.p, in_spec.c_str(), ckpt_dir.c_str(), out_spec.c_str()),
                      "enhance");
    if (ev->parsed())
        return finish(h.p,
                      egs_evaluate(h.p, generated_dir.c_str(), reference_store.c_str(),
                                   vaas_ckpt.c_str(),
                                   report_path.empty() ? nullptr : report_path.c_str()),
                      "evaluate");
    if (sum->parsed()) {
        double mean_cos = 0.0;
        egs_status st = egs_summarize(h.p, store_dir.c_str(), ckpt_dir.c_str(),
                                      audio_source.c_str(),
                                      report_path.empty() ? nullptr : report_path.c_str(),
                                      holdout, &mean_cos);
        if (st == EGS_OK) std::printf("mean_cosine=%.6f\n", mean_cos);
        return finish(h.p, st, "summarize");
    }
    if (abl->parsed())
        return finish(h.p,
                      egs_ablate_fps(h.p, store_dir.c_str(), ckpt_dir.c_str(),
                                     report_path.empty() ? nullptr : report_path.c_str(),
                                     eval_clips),
                      "ablate-fps");
    if (acc->parsed()) return finish(h.p, egs_run_acceptance(h.p, workdir.c_str()), "acceptance");
    return 0;
}
