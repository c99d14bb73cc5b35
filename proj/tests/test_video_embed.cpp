#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "core/corpus.hpp"
#include "core/video_embed.hpp"

using namespace egs;

namespace {

Tensor test_frame(Rng& rng) { return Tensor::uniform({3, 64, 64}, rng, 0.0f, 1.0f); }

VideoClip small_clip(int frames, Rng& rng) {
    VideoClip c;
    c.fps = 30;
    for (int i = 0; i < frames; ++i) c.frames.push_back(test_frame(rng));
    return c;
}

}  // namespace

TEST_CASE("encode_frame: unit norm, determinism, shape errors") {
    FrameEncoder enc(3);
    Rng rng(1);
    Tensor f = test_frame(rng);
    Tensor e1 = enc.encode(f);
    Tensor e2 = enc.encode(f);
    REQUIRE(e1.numel() == 512);
    CHECK(e1.v == e2.v);  // determinism, bit-exact
    double norm = 0.0;
    for (float v : e1.v) norm += double(v) * v;
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-6));

    Tensor bad({2, 64, 64});
    CHECK_THROWS_AS(enc.encode(bad), ContractError);
}

TEST_CASE("encode_frame: marker position changes the embedding after training") {
    // Two frames from the synthetic generator differing in marker position.
    SyntheticClip clip = generate_synthetic_clip(Rng(5).fork("clip", 0));
    FrameEncoder enc(3);
    std::vector<VideoClip> clips{clip.video};
    Rng trng(9);
    auto losses = train_frame_encoder(enc, clips, 30, 6, 1e-3f, trng);
    REQUIRE(losses.size() == 30);
    Tensor a = enc.encode(clip.video.frames[0]);
    Tensor b = enc.encode(clip.video.frames[150]);
    double cos = 0.0;
    for (int i = 0; i < 512; ++i) cos += double(a.v[i]) * b.v[i];
    CHECK(cos < 0.999);
}

TEST_CASE("encode_video: shapes, degenerate clip, identical frames") {
    FrameEncoder enc(3);
    Rng rng(2);
    VideoClip clip = small_clip(12, rng);
    VideoEmbedding e = encode_video(enc, clip);
    CHECK(e.native.dim(0) == 12);
    CHECK(e.native.dim(1) == 512);
    CHECK(e.resized.dim(0) == 512);
    CHECK(e.resized.dim(1) == 512);
    CHECK(e.native.all_finite());
    CHECK(e.resized.all_finite());

    VideoClip one;
    one.fps = 30;
    one.frames.push_back(test_frame(rng));
    CHECK_THROWS(encode_video(enc, VideoClip{}));

    VideoClip same;
    same.fps = 30;
    Tensor f = test_frame(rng);
    for (int i = 0; i < 5; ++i) same.frames.push_back(f);
    VideoEmbedding es = encode_video(enc, same);
    for (int i = 1; i < 5; ++i)
        for (int j = 0; j < 512; ++j) CHECK(es.native.at2(i, j) == es.native.at2(0, j));
}

TEST_CASE("encode_video preserves frame order") {
    FrameEncoder enc(3);
    Rng rng(3);
    VideoClip clip = small_clip(6, rng);
    VideoEmbedding e = encode_video(enc, clip);
    VideoClip rev = clip;
    std::reverse(rev.frames.begin(), rev.frames.end());
    VideoEmbedding er = encode_video(enc, rev);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 512; ++j) CHECK(er.native.at2(i, j) == e.native.at2(5 - i, j));
}

TEST_CASE("mean_embedding: identical rows, symmetry, summation oracle") {
    VideoEmbedding e;
    e.native = Tensor({4, 512});
    Rng rng(4);
    Tensor u = Tensor::randn({512}, rng);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 512; ++j) e.native.at2(i, j) = u.v[j];
    Tensor m = mean_embedding(e);
    for (int j = 0; j < 512; ++j) CHECK(m.v[j] == doctest::Approx(u.v[j]).epsilon(1e-7));

    VideoEmbedding pm;
    pm.native = Tensor({2, 512});
    for (int j = 0; j < 512; ++j) {
        pm.native.at2(0, j) = u.v[j];
        pm.native.at2(1, j) = -u.v[j];
    }
    Tensor z = mean_embedding(pm);
    for (int j = 0; j < 512; ++j) CHECK(std::abs(z.v[j]) < 1e-7f);

    VideoEmbedding r;
    r.native = Tensor::randn({300, 512}, rng);
    Tensor mr = mean_embedding(r);
    for (int j = 0; j < 512; j += 37) {
        double acc = 0.0;
        for (int i = 0; i < 300; ++i) acc += r.native.at2(i, j);
        CHECK(mr.v[j] == doctest::Approx(acc / 300.0).epsilon(1e-6));
    }
}

TEST_CASE("reduce_fps: identity, 15 fps pairing, 4 fps row count, idempotency") {
    Rng rng(6);
    VideoEmbedding e;
    e.fps = 30;
    e.native = Tensor::randn({300, 512}, rng);
    e.resized = resize_grid(e.native, 512, 512, false);

    VideoEmbedding same = reduce_fps(e, 30);
    CHECK(same.native.v == e.native.v);

    VideoEmbedding half = reduce_fps(e, 15);
    for (int i = 1; i < 300; i += 2)
        for (int j = 0; j < 512; j += 61) CHECK(half.native.at2(i, j) == half.native.at2(i - 1, j));
    for (int i = 0; i < 300; i += 2)
        for (int j = 0; j < 512; j += 61) CHECK(half.native.at2(i, j) == e.native.at2(i, j));

    VideoEmbedding four = reduce_fps(e, 4);
    CHECK(four.native.dim(0) == 300);
    int distinct = 1;
    for (int i = 1; i < 300; ++i) {
        bool same_row = true;
        for (int j = 0; j < 512; ++j)
            if (four.native.at2(i, j) != four.native.at2(i - 1, j)) same_row = false;
        if (!same_row) ++distinct;
    }
    CHECK(distinct <= 40);

    VideoEmbedding twice = reduce_fps(four, 4);
    CHECK(twice.native.v == four.native.v);  // idempotent

    CHECK_THROWS_AS(reduce_fps(e, 0), ContractError);
}

TEST_CASE("reduce_fps keeps means inside the convex hull of original rows") {
    Rng rng(7);
    VideoEmbedding e;
    e.fps = 30;
    e.native = Tensor::uniform({30, 512}, rng, -1.0f, 1.0f);
    e.resized = resize_grid(e.native, 512, 512, false);
    VideoEmbedding red = reduce_fps(e, 4);
    Tensor m = mean_embedding(red);
    for (int j = 0; j < 512; j += 23) {
        float lo = 1e9f, hi = -1e9f;
        for (int i = 0; i < 30; ++i) {
            lo = std::min(lo, e.native.at2(i, j));
            hi = std::max(hi, e.native.at2(i, j));
        }
        CHECK(m.v[j] >= lo - 1e-6f);
        CHECK(m.v[j] <= hi + 1e-6f);
    }
}

TEST_CASE("packed clip file round trips") {
    Rng rng(8);
    VideoClip clip = small_clip(4, rng);
    auto path = std::filesystem::temp_directory_path() / "egs_test_clip.vid";
    write_clip(path.string(), clip);
    VideoClip back = read_clip(path.string());
    REQUIRE(back.frames.size() == 4);
    CHECK(back.fps == 30);
    double max_err = 0.0;
    for (int i = 0; i < 4; ++i)
        max_err = std::max(max_err, max_abs_diff(clip.frames[i], back.frames[i]));
    CHECK(max_err <= 0.5 / 255.0 + 1e-6);
    std::filesystem::remove(path);
}

TEST_CASE("embedding container uses the EGVEMB1 magic") {
    FrameEncoder enc(3);
    Rng rng(9);
    VideoEmbedding e = encode_video(enc, small_clip(3, rng));
    auto path = std::filesystem::temp_directory_path() / "egs_test_emb.egs";
    write_grid(path.string(), e.to_grid(false));
    GridFile g = read_grid(path.string(), "EGVEMB1");
    CHECK(g.values.v == e.native.v);
    CHECK_THROWS_AS(read_grid(path.string(), "EGSPEC1"), DataError);
    std::filesystem::remove(path);
}

TEST_CASE("precomputed-row ingestion builds the same embedding object") {
    Rng rng(10);
    Tensor rows = Tensor::randn({30, 512}, rng);
    VideoEmbedding e = embedding_from_rows(rows, 30);
    CHECK(e.native.v == rows.v);
    CHECK(e.resized.dim(0) == 512);
}
