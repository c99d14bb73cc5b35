#include "core/video_embed.hpp"

#include <cstring>
#include <fstream>

namespace egs {

void write_clip(const std::string& path, const VideoClip& clip) {
    check_contract(!clip.frames.empty(), "clip: no frames");
    const int h = clip.frames[0].dim(1), w = clip.frames[0].dim(2);
    std::ofstream os(path, std::ios::binary);
    check_contract(os.good(), "clip: cannot open " + path + " for writing");
    os.write("EGSVID1", 7);
    auto w32 = [&](uint32_t v) { os.write(reinterpret_cast<char*>(&v), 4); };
    w32(static_cast<uint32_t>(clip.frames.size()));
    w32(static_cast<uint32_t>(h));
    w32(static_cast<uint32_t>(w));
    w32(static_cast<uint32_t>(clip.fps));
    std::vector<unsigned char> row(static_cast<size_t>(h) * w * 3);
    for (const auto& f : clip.frames) {
        check_contract(f.dim(0) == 3 && f.dim(1) == h && f.dim(2) == w, "clip: ragged frames");
        size_t k = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c)
                    row[k++] = static_cast<unsigned char>(
                        std::lround(std::clamp(f.at3(c, y, x), 0.0f, 1.0f) * 255.0f));
        os.write(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    check_contract(os.good(), "clip: write failed for " + path);
}

VideoClip read_clip(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is.good()) throw DataError("clip: cannot open " + path);
    char magic[7];
    is.read(magic, 7);
    if (std::memcmp(magic, "EGSVID1", 7) != 0) throw DataError("clip: bad magic in " + path);
    auto r32 = [&]() {
        uint32_t v = 0;
        is.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    uint32_t n = r32(), h = r32(), w = r32(), fps = r32();
    check_contract(n < (1u << 20) && h < (1u << 14) && w < (1u << 14), "clip: absurd header");
    VideoClip clip;
    clip.fps = static_cast<int>(fps);
    clip.frames.reserve(n);
    std::vector<unsigned char> row(static_cast<size_t>(h) * w * 3);
    for (uint32_t i = 0; i < n; ++i) {
        is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!is.good()) throw DataError("clip: truncated file " + path);
        Tensor f({3, static_cast<int>(h), static_cast<int>(w)});
        size_t k = 0;
        for (uint32_t y = 0; y < h; ++y)
            for (uint32_t x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c)
                    f.at3(c, static_cast<int>(y), static_cast<int>(x)) = row[k++] / 255.0f;
        clip.frames.push_back(std::move(f));
    }
    return clip;
}

GridFile VideoEmbedding::to_grid(bool resized_grid) const {
    GridFile g;
    g.magic = "EGVEMB1";
    const Tensor& t = resized_grid ? resized : native;
    g.rows = static_cast<uint32_t>(t.dim(0));
    g.cols = static_cast<uint32_t>(t.dim(1));
    g.sample_rate = static_cast<uint32_t>(fps);
    g.scale_min = 0.0f;
    g.scale_max = 1.0f;
    g.values = t;
    return g;
}

FrameEncoder::FrameEncoder(uint64_t init_seed) {
    Rng rng(init_seed, 0x7e);
    // Patch tokens carry RGB values of an 8x8 patch -> 192 inputs.
    patch_proj_ = LinearLayerT<float>(params_, "patch", kPatch * kPatch * 3, kTokenDim, rng);
    pos_param_ = params_.add("pos", Tensor::randn({256, kTokenDim}, rng, 0.02f));
    for (int b = 0; b < 2; ++b) {
        std::string pre = "blk" + std::to_string(b);
        ln1_[b] = LayerNormLayerT<float>(params_, pre + ".ln1", kTokenDim);
        attn_[b] = SelfAttentionT<float>(params_, pre + ".attn", kTokenDim, rng);
        ln2_[b] = LayerNormLayerT<float>(params_, pre + ".ln2", kTokenDim);
        ff1_[b] = LinearLayerT<float>(params_, pre + ".ff1", kTokenDim, kTokenDim * 2, rng);
        ff2_[b] = LinearLayerT<float>(params_, pre + ".ff2", kTokenDim * 2, kTokenDim, rng);
    }
    out_proj_ = LinearLayerT<float>(params_, "out", kTokenDim, kFrameFeatureDim, rng);
}

VarT<float> FrameEncoder::forward(const VarT<float>& frame) const {
    const auto& fv = frame->value;
    check_contract(fv.ndim() == 3 && fv.dim(0) == 3, "frame encoder: need [3,H,W] input");
    const int h = fv.dim(1), w = fv.dim(2);
    check_contract(h % kPatch == 0 && w % kPatch == 0, "frame encoder: dims must divide by patch");
    const int gy = h / kPatch, gx = w / kPatch, n = gy * gx;
    check_contract(n <= pos_param_->value.dim(0), "frame encoder: too many patches");

    // Gather patches into token rows.
    Tensor tok({n, kPatch * kPatch * 3});
    for (int py = 0; py < gy; ++py)
        for (int px = 0; px < gx; ++px) {
            float* dst = &tok.v[static_cast<size_t>(py * gx + px) * tok.dim(1)];
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < kPatch; ++y)
                    for (int x = 0; x < kPatch; ++x)
                        *dst++ = fv.at3(c, py * kPatch + y, px * kPatch + x);
        }
    auto tokens = patch_proj_(leaf(std::move(tok)));
    // Add (truncated) positional table.
    Tensor pos({n, kTokenDim});
    std::copy(pos_param_->value.v.begin(),
              pos_param_->value.v.begin() + static_cast<size_t>(n) * kTokenDim, pos.v.begin());
    auto pos_slice = make_node<float>(
        std::move(pos), {pos_param_}, [n](NodeT<float>& nd) {
            auto& g = nd.parents[0]->ensure_grad();
            for (int64_t i = 0; i < static_cast<int64_t>(n) * kTokenDim; ++i)
                g.v[i] += nd.grad.v[i];
        });
    auto x = add(tokens, pos_slice);
    for (int b = 0; b < 2; ++b) {
        x = attn_[b](ln1_[b](x));
        x = add(x, ff2_[b](relu(ff1_[b](ln2_[b](x)))));
    }
    auto pooled = mean_rows(x);
    return l2_normalize(out_proj_.vec(pooled));
}

Tensor FrameEncoder::encode(const Tensor& frame) const {
    NoGradGuard ng;
    return forward(leaf(frame))->value;
}

void FrameEncoder::save(const std::string& path,
                        const std::map<std::string, std::string>& meta) const {
    save_checkpoint(path, "frame_encoder", params_, meta);
}

void FrameEncoder::load(const std::string& path) {
    load_checkpoint(path, "frame_encoder", params_);
}

std::vector<double> train_frame_encoder(FrameEncoder& enc, const std::vector<VideoClip>& clips,
                                        int steps, int batch, float lr, Rng& rng) {
    check_contract(!clips.empty(), "frame encoder training: empty corpus");
    AdamW opt(enc.params(), lr);
    std::vector<double> losses;
    const float inv_temp = 10.0f;
    for (int s = 0; s < steps; ++s) {
        opt.zero_grad();
        // Anchor/positive = adjacent frames of one clip; negatives = rest of batch.
        std::vector<VarT<float>> anchors, positives;
        for (int b = 0; b < batch; ++b) {
            const auto& clip = clips[rng.below(static_cast<uint32_t>(clips.size()))];
            int fi = static_cast<int>(rng.below(static_cast<uint32_t>(clip.frames.size() - 1)));
            anchors.push_back(enc.forward(leaf(clip.frames[fi])));
            positives.push_back(enc.forward(leaf(clip.frames[fi + 1])));
        }
        // InfoNCE over cosine similarities (embeddings are unit norm).
        VarT<float> loss;
        for (int i = 0; i < batch; ++i) {
            Tensor srow({1, batch});
            std::vector<VarT<float>> sims;
            for (int j = 0; j < batch; ++j) {
                auto d = mul(anchors[i], positives[j]);
                sims.push_back(scale(mean_all(d), inv_temp * kFrameFeatureDim));
            }
            // log-softmax at index i, assembled from scalar nodes
            VarT<float> row = sims[0];
            for (int j = 1; j < batch; ++j) row = concat_vec(row, sims[j]);
            auto sm = softmax_rows(reshape(row, {1, batch}));
            auto picked = mul(sm, leaf([&] {
                                  Tensor m({1, batch});
                                  m.at2(0, i) = 1.0f;
                                  return m;
                              }()));
            auto p = scale(mean_all(picked), static_cast<float>(batch));
            auto nll = scale(unary_op(
                                 p, [](float x) { return std::log(std::max(x, 1e-9f)); },
                                 [](float x, float) { return 1.0f / std::max(x, 1e-9f); }),
                             -1.0f);
            loss = loss ? add(loss, nll) : nll;
        }
        loss = scale(loss, 1.0f / batch);
        backward(loss);
        opt.step();
        losses.push_back(loss->value.v[0]);
    }
    return losses;
}

VideoEmbedding encode_video(const FrameEncoder& enc, const VideoClip& clip) {
    check_contract(!clip.frames.empty(), "encode_video: empty clip");
    VideoEmbedding e;
    e.fps = clip.fps;
    e.native = Tensor({static_cast<int>(clip.frames.size()), kFrameFeatureDim});
    for (size_t i = 0; i < clip.frames.size(); ++i) {
        Tensor row = enc.encode(clip.frames[i]);
        std::copy(row.v.begin(), row.v.end(),
                  e.native.v.begin() + static_cast<int64_t>(i) * kFrameFeatureDim);
    }
    e.resized = resize_grid(e.native, kEmbeddingImageSize, kEmbeddingImageSize, false);
    return e;
}

VideoEmbedding embedding_from_rows(Tensor rows, int fps) {
    check_contract(rows.ndim() == 2 && rows.dim(1) == kFrameFeatureDim,
                   "embedding rows must be [frames,512]");
    VideoEmbedding e;
    e.fps = fps;
    e.native = std::move(rows);
    e.resized = resize_grid(e.native, kEmbeddingImageSize, kEmbeddingImageSize, false);
    return e;
}

Tensor mean_embedding(const VideoEmbedding& e) {
    check_contract(e.native.numel() > 0, "mean_embedding: no native rows");
    const int n = e.native.dim(0), d = e.native.dim(1);
    TensorD acc({d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) acc.v[j] += e.native.at2(i, j);
    Tensor out({d});
    for (int j = 0; j < d; ++j) out.v[j] = static_cast<float>(acc.v[j] / n);
    return out;
}

VideoEmbedding reduce_fps(const VideoEmbedding& e, int target_fps) {
    check_contract(target_fps > 0, "reduce_fps: target must be positive");
    if (target_fps >= e.fps) return e;
    const int n = e.native.dim(0), d = e.native.dim(1);
    VideoEmbedding out;
    out.fps = e.fps;  // shape and nominal rate unchanged; rows are held
    out.native = Tensor({n, d});
    // Row i holds the most recent retained frame: the k-th retained frame is
    // ceil(k * native / target), matching the hold-last-sample reduction.
    for (int i = 0; i < n; ++i) {
        int k = static_cast<int>((static_cast<int64_t>(i) * target_fps) / e.fps);
        int src = static_cast<int>(
            (static_cast<int64_t>(k) * e.fps + target_fps - 1) / target_fps);
        if (src > i) src = i;  // retained frame cannot come from the future
        std::copy(&e.native.v[static_cast<size_t>(src) * d],
                  &e.native.v[static_cast<size_t>(src) * d] + d,
                  &out.native.v[static_cast<size_t>(i) * d]);
    }
    out.resized = resize_grid(out.native, kEmbeddingImageSize, kEmbeddingImageSize, false);
    return out;
}

}  // namespace egs
