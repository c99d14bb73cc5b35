/* C API for the egosonics pipeline. All functionality is reachable through
 * an opaque pipeline handle plus status codes; strings returned by the
 * library stay owned by the handle and are valid until the next call on it.
 *
 * Status codes mirror the CLI exit codes:
 *   0 ok, 1 contract violation, 2 data error, 3 bad configuration.
 */
#ifndef EGOSONICS_H
#define EGOSONICS_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define EGS_API __declspec(dllexport)
#else
#define EGS_API __attribute__((visibility("default")))
#endif

typedef struct egs_pipeline egs_pipeline;

typedef enum egs_status {
    EGS_OK = 0,
    EGS_E_CONTRACT = 1,
    EGS_E_DATA = 2,
    EGS_E_CONFIG = 3
} egs_status;

EGS_API const char* egs_version(void);

/* config_path may be NULL for defaults. Returns NULL only on allocation
 * failure; configuration errors are reported via egs_last_error on the
 * returned handle after egs_ok() is checked. */
EGS_API egs_pipeline* egs_open(const char* config_path);
EGS_API void egs_close(egs_pipeline* p);

/* Non-zero when the handle failed to initialize. */
EGS_API egs_status egs_open_status(const egs_pipeline* p);

/* Applies one dotted-key override, e.g. ("syncronet.cross_attention", "false"). */
EGS_API egs_status egs_set(egs_pipeline* p, const char* key, const char* value);

EGS_API const char* egs_last_error(const egs_pipeline* p);

/* Dataset + preprocessing */
EGS_API egs_status egs_gen_synthetic(egs_pipeline* p, const char* out_dir, int n_clips,
                                     uint64_t seed);
EGS_API egs_status egs_prepare(egs_pipeline* p, const char* manifest_path, const char* store_dir,
                               const char* ckpt_dir);

/* Training stages: "vae", "mlp", "diffusion", "syncronet", "audiosr",
 * "vaas", "summarizer". */
EGS_API egs_status egs_train(egs_pipeline* p, const char* stage, const char* store_dir,
                             const char* ckpt_dir);

/* Inference; out_wav may be NULL to skip writing. dump_dir (nullable)
 * receives intermediate artifacts. */
EGS_API egs_status egs_infer(egs_pipeline* p, const char* store_dir, const char* ckpt_dir,
                             const char* clip_id, const char* out_wav, const char* dump_dir,
                             int use_syncronet);

/* Spectrogram enhancement: 512x512 container in, 512x1024 container out. */
EGS_API egs_status egs_enhance(egs_pipeline* p, const char* in_spec, const char* ckpt_dir,
                               const char* out_spec);

EGS_API egs_status egs_evaluate(egs_pipeline* p, const char* generated_dir,
                                const char* reference_store, const char* vaas_checkpoint,
                                const char* report_path);

/* audio_source: "none" | "gt" | "generated"; mean cosine similarity lands in
 * *out_mean_cosine when non-NULL. */
EGS_API egs_status egs_summarize(egs_pipeline* p, const char* store_dir, const char* ckpt_dir,
                                 const char* audio_source, const char* report_path,
                                 int holdout_clips, double* out_mean_cosine);

EGS_API egs_status egs_ablate_fps(egs_pipeline* p, const char* store_dir, const char* ckpt_dir,
                                  const char* report_path, int eval_clips);

/* Full acceptance suite; prints one line per criterion. workdir holds
 * corpora, stores, and checkpoints (reused across runs when present). */
EGS_API egs_status egs_run_acceptance(egs_pipeline* p, const char* workdir);

#ifdef __cplusplus
}
#endif

#endif /* EGOSONICS_H */
