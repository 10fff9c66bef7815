/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/pipeline/pipeline.hpp
 *
 * Copyright 2026 The tth authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tth/anim/train.hpp"
#include "tth/common/rng.hpp"
#include "tth/data/corpus.hpp"
#include "tth/data/synth.hpp"
#include "tth/face/fit.hpp"
#include "tth/face/raster.hpp"
#include "tth/io/container.hpp"
#include "tth/io/png.hpp"
#include "tth/metrics/metrics.hpp"
#include "tth/nn/gradcheck.hpp"
#include "tth/pipeline/config.hpp"
#include "tth/pipeline/speaker.hpp"
#include "tth/pipeline/watermark.hpp"
#include "tth/render/train.hpp"
#include "tth/style/style.hpp"

namespace tth::pipeline {

/// Artifact layout under the run directory.
struct Paths {
    std::filesystem::path out;

    std::filesystem::path corpus() const { return out / "corpus"; }
    std::filesystem::path speaker() const { return out / "speaker"; }
    std::filesystem::path speaker_corpus() const { return speaker() / "corpus"; }
    std::filesystem::path speaker_frames() const { return speaker() / "frames"; }
    std::filesystem::path landmarks_json() const { return speaker() / "landmarks.json"; }
    std::filesystem::path targets() const { return speaker() / "targets.tns"; }
    std::filesystem::path truth_json() const { return speaker() / "truth.json"; }
    std::filesystem::path fit_json() const { return speaker() / "fit.json"; }
    std::filesystem::path ckpt() const { return out / "ckpt"; }
    std::filesystem::path anim_gen(anim::AnimRole r) const {
        return ckpt() / (std::string(anim::role_name(r)) + ".gen.tns");
    }
    std::filesystem::path anim_disc(anim::AnimRole r) const {
        return ckpt() / (std::string(anim::role_name(r)) + ".disc.tns");
    }
    std::filesystem::path anim_curves(anim::AnimRole r) const {
        return ckpt() / (std::string(anim::role_name(r)) + "_curves.csv");
    }
    std::filesystem::path style_ckpt() const { return ckpt() / "style.tns"; }
    std::filesystem::path style_curves() const { return ckpt() / "style_curves.csv"; }
    std::filesystem::path render_gen() const { return ckpt() / "render.gen.tns"; }
    std::filesystem::path render_disc() const { return ckpt() / "render.disc.tns"; }
    std::filesystem::path render_curves() const { return ckpt() / "render_curves.csv"; }
    std::filesystem::path frames() const { return out / "frames"; }
    std::filesystem::path params() const { return out / "params"; }
    std::filesystem::path landmarks() const { return out / "landmarks"; }
    std::filesystem::path report_json() const { return out / "report.json"; }
    std::filesystem::path eval_json() const { return out / "eval.json"; }
    std::filesystem::path gradcheck_json() const { return out / "gradcheck.json"; }
};

namespace detail {

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("malformed JSON in " + path.string());
    return j;
}

inline nlohmann::json rows_json(const nn::Tensor& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < t.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < t.cols(); ++c) row.push_back(t.at(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline nn::Tensor rows_tensor(const nlohmann::json& rows, int cols, const char* what) {
    if (!rows.is_array() || rows.empty())
        throw std::runtime_error(std::string(what) + ": row array required");
    nn::Tensor t = nn::Tensor::zeros({static_cast<int>(rows.size()), cols});
    for (int r = 0; r < t.rows(); ++r) {
        const auto& row = rows[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<int>(row.size()) != cols)
            throw std::runtime_error(std::string(what) + ": row width mismatch");
        for (int c = 0; c < cols; ++c) t.at(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return t;
}

inline const double* row_ptr(const nn::Tensor& t, int r) {
    return t.data.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(t.cols());
}

inline std::string frame_name(int t, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04d.%s", t, ext);
    return buf;
}

inline std::string target_key(int utt, int frame) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "u%d.f%04d", utt, frame);
    return buf;
}

/// [-1, 1] renderer output to a clamped [0, 1] image.
inline nn::Tensor to_unit_image(const nn::Tensor& x) {
    nn::Tensor out = x;
    for (double& v : out.data) v = std::clamp(0.5 * (v + 1.0), 0.0, 1.0);
    return out;
}

inline void require_artifacts(const char* cmd,
                              const std::vector<std::filesystem::path>& required) {
    std::string missing;
    for (const auto& p : required)
        if (!std::filesystem::exists(p)) missing += (missing.empty() ? "" : ", ") + p.string();
    if (!missing.empty())
        throw std::runtime_error(std::string(cmd) + ": missing artifacts: " + missing);
}

inline anim::TrainSchedule schedule_for(const Config& cfg, anim::AnimRole role) {
    anim::TrainSchedule sch;
    const std::string base = role == anim::AnimRole::Mouth ? "anim.mouth" : "anim.encdec";
    sch.epochs_fixed = cfg.get_int(base + ".epochs_fixed");
    sch.epochs_decay = cfg.get_int(base + ".epochs_decay");
    sch.batch_size = cfg.get_int("anim.batch");
    sch.g_lr = cfg.get_double("anim.g_lr");
    sch.d_lr = cfg.get_double("anim.d_lr");
    return sch;
}

inline anim::GeneratorBundle bundle_for(const Config& cfg, anim::AnimRole role,
                                        std::uint64_t seed) {
    anim::MouthNetConfig mcfg;
    mcfg.channels = cfg.get_int("anim.mouth.channels");
    mcfg.blocks = cfg.get_int("anim.mouth.blocks");
    anim::EncDecConfig ecfg;
    ecfg.channels = cfg.get_int("anim.encdec.channels");
    anim::PatchDiscConfig dcfg;
    dcfg.channels = cfg.get_int("anim.disc.channels");
    anim::GeneratorBundle b = anim::GeneratorBundle::make(role, seed, mcfg, ecfg, dcfg);
    b.lambda = role == anim::AnimRole::Mouth ? cfg.get_double("anim.lambda.mouth")
                                             : cfg.get_double("anim.lambda.upper");
    return b;
}

inline anim::GeneratorBundle load_bundle(const Config& cfg, anim::AnimRole role,
                                         std::uint64_t seed, const Paths& paths) {
    anim::GeneratorBundle b = bundle_for(cfg, role, seed);
    io::load_checkpoint(paths.anim_gen(role), b.gen);
    return b;
}

/// Landmark tracks of the synthetic speaker as written by synth-data.
struct SpeakerTracks {
    std::uint64_t face_seed = 0;
    int height = 0;
    int width = 0;
    std::vector<std::string> names;
    std::vector<std::vector<nn::Tensor>> points; // per utterance, per frame 68 x 2
};

inline SpeakerTracks load_tracks(const Paths& paths) {
    const nlohmann::json j = read_json(paths.landmarks_json());
    SpeakerTracks tr;
    tr.face_seed = j.at("face_seed").get<std::uint64_t>();
    tr.height = j.at("height").get<int>();
    tr.width = j.at("width").get<int>();
    for (const auto& u : j.at("utterances")) {
        tr.names.push_back(u.at("name").get<std::string>());
        std::vector<nn::Tensor> frames;
        for (const auto& f : u.at("points")) frames.push_back(rows_tensor(f, 2, "landmarks"));
        tr.points.push_back(std::move(frames));
    }
    if (tr.names.empty()) throw std::runtime_error("landmarks.json lists no utterances");
    return tr;
}

/// Renderer dataset rebuilt from landmark tracks and stored targets.
inline std::vector<render::RenderSample> render_samples(const Config& cfg, const Paths& paths,
                                                        const SpeakerTracks& tr) {
    const io::Container targets = io::Container::load(paths.targets());
    const int limit = cfg.get_int("render.frames");
    if (limit < 1) throw std::runtime_error("render.frames must be >= 1");
    std::vector<render::RenderSample> samples;
    for (std::size_t ui = 0; ui < tr.points.size() && static_cast<int>(samples.size()) < limit;
         ++ui) {
        std::vector<nn::Tensor> rasters;
        rasters.reserve(tr.points[ui].size());
        for (const auto& pts : tr.points[ui])
            rasters.push_back(face::rasterize(pts, tr.height, tr.width).image);
        for (std::size_t t = 0; t < rasters.size() && static_cast<int>(samples.size()) < limit;
             ++t) {
            render::RenderSample s;
            s.volume = render::build_volume(rasters, static_cast<int>(t));
            auto it = targets.tensors.find(target_key(static_cast<int>(ui), static_cast<int>(t)));
            if (it == targets.tensors.end())
                throw std::runtime_error("targets.tns is missing frame " +
                                         target_key(static_cast<int>(ui), static_cast<int>(t)));
            s.target = it->second;
            for (double& v : s.target.data) v = 2.0 * v - 1.0;
            s.box = points_box(tr.points[ui][t], 0, 68, 2, tr.height, tr.width);
            samples.push_back(std::move(s));
        }
    }
    return samples;
}

inline std::vector<double> fit_s_vector(const Paths& paths) {
    const nlohmann::json j = read_json(paths.fit_json());
    std::vector<double> s;
    for (const auto& v : j.at("s")) s.push_back(v.get<double>());
    if (s.size() != static_cast<std::size_t>(face::kShapeDims))
        throw std::runtime_error("fit.json: s must have 60 entries");
    return s;
}

/// Per-dimension bounds for generated head tracks: rotations, in-plane
/// translation, then depth. Driving landmarks requires a camera-visible
/// pose at any training stage.
inline constexpr std::array<double, face::kPoseDims> kPoseLo{-0.6, -0.6, -0.6, -0.8, -0.8, 1.8};
inline constexpr std::array<double, face::kPoseDims> kPoseHi{0.6, 0.6, 0.6, 0.8, 0.8, 3.2};

inline nn::Tensor clamp_pose_track(const nn::Tensor& m_hed) {
    if (m_hed.rank() != 2 || m_hed.cols() != face::kPoseDims)
        throw std::invalid_argument("clamp_pose_track: T x 6 track required");
    nn::Tensor out = m_hed;
    for (int t = 0; t < out.rows(); ++t)
        for (int d = 0; d < face::kPoseDims; ++d)
            out.at(t, d) = std::clamp(out.at(t, d), kPoseLo[static_cast<std::size_t>(d)],
                                      kPoseHi[static_cast<std::size_t>(d)]);
    return out;
}

/// Generated blendshape weights clamped to validity before driving.
inline nn::Tensor clamp_unit_track(const nn::Tensor& m) {
    nn::Tensor out = m;
    for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
    return out;
}

inline int emotion_index(const std::string& name) {
    const std::vector<std::string> names{"surprise", "anger", "neutral", "happiness"};
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    throw std::runtime_error("unknown emotion '" + name +
                             "' (expected surprise|anger|neutral|happiness)");
}

inline std::vector<int> tile_track(const std::vector<int>& src, int T) {
    std::vector<int> out(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t)
        out[static_cast<std::size_t>(t)] = src[static_cast<std::size_t>(t) % src.size()];
    return out;
}

inline void write_scalar_curve_csv(const std::filesystem::path& path,
                                   const std::vector<double>& curve) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write curves file " + path.string());
    f << "epoch,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < curve.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, curve[i]);
        f << buf;
    }
}

inline void write_render_curve_csv(const std::filesystem::path& path,
                                   const std::vector<render::RenderEpoch>& curve) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write curves file " + path.string());
    f << "epoch,g_total,g_perc,g_l1_img,g_l1_face,g_adv,d_loss\n";
    char buf[192];
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const auto& e = curve[i];
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, e.g_total,
                      e.g_perc, e.g_l1_img, e.g_l1_face, e.g_adv, e.d_loss);
        f << buf;
    }
}

} // namespace detail

/**
 * Synthesizes the training corpus plus the speaker reference recordings:
 * transcripts, per-frame landmark tracks of a hidden identity with a fixed
 * articulation style, and procedural target frames.
 */
inline void cmd_synth_data(const Config& cfg, std::uint64_t seed,
                           const std::filesystem::path& out) {
    const Paths paths{out};
    const int fps = cfg.get_int("data.fps");
    const int size = cfg.get_int("render.size");
    if (size < 64) throw std::runtime_error("render.size must be >= 64");

    const data::Corpus corpus =
        data::synth_corpus(common::stage_seed(seed, "pipeline.corpus"),
                           cfg.get_int("data.utterances"), fps);
    corpus.save(paths.corpus());

    const data::Corpus reference =
        data::synth_corpus(common::stage_seed(seed, "pipeline.speaker.text"),
                           cfg.get_int("speaker.utterances"), fps);
    reference.save(paths.speaker_corpus());

    const std::uint64_t face_seed = common::stage_seed(seed, "pipeline.speaker.face");
    const face::FaceModel model = face::synth_face_model(face_seed);
    const face::LandmarkBases lb = face::landmark_bases(model);
    const face::Intrinsics K = face::intrinsics_for(size, size);
    common::Rng id_rng(common::stage_seed(seed, "pipeline.speaker.identity"));
    std::vector<double> s(static_cast<std::size_t>(face::kShapeDims));
    for (double& v : s) v = 0.15 * id_rng.normal();

    nlohmann::json lm;
    lm["face_seed"] = face_seed;
    lm["height"] = size;
    lm["width"] = size;
    lm["utterances"] = nlohmann::json::array();
    io::Container targets;
    targets.meta["kind"] = "speaker-targets";
    std::filesystem::create_directories(paths.speaker_frames());

    for (std::size_t ui = 0; ui < reference.utterances.size(); ++ui) {
        const data::Utterance& u = reference.utterances[ui];
        const nn::Tensor styled = speaker_style(u.m_mou);
        nlohmann::json entry;
        entry["name"] = reference.names[ui];
        entry["points"] = nlohmann::json::array();
        for (int t = 0; t < u.frames(); ++t) {
            const nn::Tensor pts =
                face::drive_landmarks(lb, s, detail::row_ptr(u.m_hed, t),
                                      detail::row_ptr(u.m_upp, t), detail::row_ptr(styled, t), K);
            entry["points"].push_back(detail::rows_json(pts));
            const nn::Tensor target = speaker_target(pts, size, size);
            targets.tensors.emplace(detail::target_key(static_cast<int>(ui), t), target);
            char png[48];
            std::snprintf(png, sizeof(png), "u%zu_f%04d.png", ui, t);
            io::PngWriter::write(paths.speaker_frames() / png, target);
        }
        lm["utterances"].push_back(std::move(entry));
    }
    detail::write_json(paths.landmarks_json(), lm);
    targets.save(paths.targets());

    nlohmann::json truth;
    truth["s"] = s;
    truth["style_scale"] = kSpeakerStyleScale;
    truth["style_offset"] = kSpeakerStyleOffset;
    detail::write_json(paths.truth_json(), truth);
}

/// Trains one animation generator on the synthetic corpus.
inline void cmd_train_anim(const Config& cfg, std::uint64_t seed,
                           const std::filesystem::path& out, anim::AnimRole role) {
    const Paths paths{out};
    detail::require_artifacts("train-anim", {paths.corpus()});
    const data::Corpus corpus = data::Corpus::load(paths.corpus());
    anim::GeneratorBundle b = detail::bundle_for(cfg, role, seed);
    const auto curves = anim::train_generator(b, corpus, detail::schedule_for(cfg, role), seed);
    std::filesystem::create_directories(paths.ckpt());
    io::save_checkpoint(paths.anim_gen(role), b.gen);
    io::save_checkpoint(paths.anim_disc(role), b.disc);
    anim::write_curves_csv(paths.anim_curves(role), curves);
}

/// Recovers the speaker's shape from landmark keyframes, then per-frame
/// pose and expression tracks for every reference utterance.
inline void cmd_fit_face(const Config& cfg, std::uint64_t seed,
                         const std::filesystem::path& out) {
    (void)seed;
    const Paths paths{out};
    detail::require_artifacts("fit-face", {paths.landmarks_json()});
    const detail::SpeakerTracks tr = detail::load_tracks(paths);
    const face::FaceModel model = face::synth_face_model(tr.face_seed);
    const face::Intrinsics K = face::intrinsics_for(tr.width, tr.height);
    const double lambda = cfg.get_double("fit.lambda");

    std::vector<const nn::Tensor*> all_frames;
    for (const auto& utt : tr.points)
        for (const auto& pts : utt) all_frames.push_back(&pts);
    const int want = std::min<int>(cfg.get_int("fit.keyframes"),
                                   static_cast<int>(all_frames.size()));
    if (want < 1) throw std::runtime_error("fit-face: no keyframes");
    face::FitProblem problem;
    problem.lambda_e = lambda;
    problem.lambda_s = lambda;
    problem.K = K;
    const std::size_t stride = std::max<std::size_t>(1, all_frames.size() / static_cast<std::size_t>(want));
    for (std::size_t i = 0; i < all_frames.size() && static_cast<int>(problem.keyframes.size()) < want;
         i += stride)
        problem.keyframes.push_back(*all_frames[i]);

    const face::FitResult res = face::fit(model, problem, cfg.get_int("fit.iterations"));

    nlohmann::json j;
    j["s"] = res.state.s;
    j["keyframe_reprojection"] = res.mean_reprojection_error;
    j["utterances"] = nlohmann::json::array();
    for (std::size_t ui = 0; ui < tr.points.size(); ++ui) {
        const auto frames = face::fit_sequence(model, res.state.s, tr.points[ui], K, lambda,
                                               cfg.get_int("fit.seq_iterations"));
        nlohmann::json entry;
        entry["name"] = tr.names[ui];
        nlohmann::json pose = nlohmann::json::array();
        nlohmann::json expr = nlohmann::json::array();
        double reproj = 0.0;
        for (const auto& f : frames) {
            pose.push_back(std::vector<double>(f.pose.begin(), f.pose.end()));
            expr.push_back(f.e);
            reproj += f.reprojection_error;
        }
        entry["pose"] = std::move(pose);
        entry["expr"] = std::move(expr);
        entry["reprojection"] = reproj / static_cast<double>(frames.size());
        j["utterances"].push_back(std::move(entry));
    }
    detail::write_json(paths.fit_json(), j);
}

/// Learns the speaker's mouth retargeting map from fitted expressions.
inline void cmd_train_style(const Config& cfg, std::uint64_t seed,
                            const std::filesystem::path& out) {
    const Paths paths{out};
    detail::require_artifacts("train-style", {paths.speaker_corpus(), paths.fit_json(),
                                              paths.anim_gen(anim::AnimRole::Mouth)});
    const data::Corpus reference = data::Corpus::load(paths.speaker_corpus());
    const anim::GeneratorBundle mouth =
        detail::load_bundle(cfg, anim::AnimRole::Mouth, seed, paths);

    const nlohmann::json fit = detail::read_json(paths.fit_json());
    std::vector<nn::Tensor> exprs;
    for (const auto& u : fit.at("utterances"))
        exprs.push_back(detail::rows_tensor(u.at("expr"), face::kExprDims, "fit.json expr"));
    const style::StylePairs pairs = style::build_pairs(reference, exprs, mouth);

    style::StyleMap map = style::StyleMap::make(seed, cfg.get_int("style.hidden"));
    std::vector<double> curve;
    const int batch = cfg.get_int("style.batch");
    for (int stage = 1; stage <= 3; ++stage) {
        const std::string n = std::to_string(stage);
        const auto part = style::train_style(map, pairs, cfg.get_int("style.epochs" + n),
                                             cfg.get_double("style.lr" + n),
                                             seed + static_cast<std::uint64_t>(stage - 1), batch);
        curve.insert(curve.end(), part.begin(), part.end());
    }
    std::filesystem::create_directories(paths.ckpt());
    io::save_checkpoint(paths.style_ckpt(), map.params, nullptr,
                        {{"hidden", cfg.get_int("style.hidden")}});
    detail::write_scalar_curve_csv(paths.style_curves(), curve);
}

/// Trains the volume-conditioned renderer against the speaker targets.
inline void cmd_train_render(const Config& cfg, std::uint64_t seed,
                             const std::filesystem::path& out) {
    const Paths paths{out};
    detail::require_artifacts("train-render", {paths.landmarks_json(), paths.targets()});
    const detail::SpeakerTracks tr = detail::load_tracks(paths);
    const auto samples = detail::render_samples(cfg, paths, tr);

    render::RendererNets nets =
        render::RendererNets::make(seed, {cfg.get_int("render.channels")});
    render::VidDisc disc = render::VidDisc::make(seed, {cfg.get_int("render.disc.channels")});
    const render::FeaturePyramid pyr =
        render::FeaturePyramid::make(seed, render::kImageChannels,
                                     cfg.get_int("render.pyramid.stages"),
                                     cfg.get_int("render.pyramid.channels"));
    render::RenderTrainConfig rc;
    rc.epochs = cfg.get_int("render.epochs");
    rc.batch_size = cfg.get_int("render.batch");
    rc.lr0 = cfg.get_double("render.lr0");
    rc.lr1 = cfg.get_double("render.lr1");
    rc.weights = render::VidLossWeights{cfg.get_double("render.alpha"),
                                        cfg.get_double("render.beta"),
                                        cfg.get_double("render.gamma"), 1.0};
    rc.seed = seed;
    const auto curve = render::train_renderer(nets, disc, pyr, samples, rc);

    std::filesystem::create_directories(paths.ckpt());
    io::save_checkpoint(paths.render_gen(), nets.params,
                        nullptr, {{"channels", nets.cfg.channels}});
    io::save_checkpoint(paths.render_disc(), disc.params, nullptr,
                        {{"channels", disc.cfg.channels}});
    detail::write_render_curve_csv(paths.render_curves(), curve);
}

/**
 * Full synthesis flow: time-aligned text to animation parameters, style
 * retargeting, landmark driving, rasterization, space-time volumes and
 * rendered frames, plus parameter and landmark sidecar files.
 */
inline void cmd_generate(const Config& cfg, std::uint64_t seed,
                         const std::filesystem::path& out, const std::string& emotion,
                         bool watermark) {
    const Paths paths{out};
    const int emo = detail::emotion_index(emotion);
    detail::require_artifacts(
        "generate",
        {paths.anim_gen(anim::AnimRole::Mouth), paths.anim_gen(anim::AnimRole::Upper),
         paths.anim_gen(anim::AnimRole::Head), paths.style_ckpt(), paths.render_gen(),
         paths.fit_json(), paths.landmarks_json()});

    const detail::SpeakerTracks tr = detail::load_tracks(paths);
    const face::FaceModel model = face::synth_face_model(tr.face_seed);
    const face::LandmarkBases lb = face::landmark_bases(model);
    const face::Intrinsics K = face::intrinsics_for(tr.width, tr.height);
    const std::vector<double> s = detail::fit_s_vector(paths);

    const anim::GeneratorBundle mouth =
        detail::load_bundle(cfg, anim::AnimRole::Mouth, seed, paths);
    const anim::GeneratorBundle upper =
        detail::load_bundle(cfg, anim::AnimRole::Upper, seed, paths);
    const anim::GeneratorBundle head = detail::load_bundle(cfg, anim::AnimRole::Head, seed, paths);
    style::StyleMap map = style::StyleMap::make(seed, cfg.get_int("style.hidden"));
    io::load_checkpoint(paths.style_ckpt(), map.params);
    render::RendererNets nets =
        render::RendererNets::make(seed, {cfg.get_int("render.channels")});
    io::load_checkpoint(paths.render_gen(), nets.params);

    const int T = cfg.get_int("generate.frames");
    if (T < 1) throw std::runtime_error("generate.frames must be >= 1");
    const int fps = cfg.get_int("data.fps");
    const data::Corpus text =
        data::synth_corpus(common::stage_seed(seed, "pipeline.generate.text"), 1, fps);
    const std::vector<int> ph = detail::tile_track(text.utterances[0].ph, T);
    const std::vector<int> w = detail::tile_track(text.utterances[0].w, T);

    const nn::Tensor m_mou = style::apply_style(map, mouth.generate(ph));
    const nn::Tensor m_upp = detail::clamp_unit_track(upper.generate(w, emo));
    const nn::Tensor m_hed = detail::clamp_pose_track(head.generate(w));

    std::vector<nn::Tensor> points;
    std::vector<nn::Tensor> rasters;
    points.reserve(static_cast<std::size_t>(T));
    rasters.reserve(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        points.push_back(face::drive_landmarks(lb, s, detail::row_ptr(m_hed, t),
                                               detail::row_ptr(m_upp, t),
                                               detail::row_ptr(m_mou, t), K));
        rasters.push_back(face::rasterize(points.back(), tr.height, tr.width).image);
    }

    std::filesystem::create_directories(paths.frames());
    std::filesystem::create_directories(paths.params());
    std::filesystem::create_directories(paths.landmarks());
    for (int t = 0; t < T; ++t) {
        const render::Volume v = render::build_volume(rasters, t);
        const render::RenderOut r = render::render_frame(nets, v);
        nn::Tensor img = detail::to_unit_image(r.fused);
        if (watermark) stamp_watermark(img);
        io::PngWriter::write(paths.frames() / detail::frame_name(t, "png"), img);
        detail::write_json(paths.landmarks() / detail::frame_name(t, "json"),
                           detail::rows_json(points[static_cast<std::size_t>(t)]));
    }
    detail::write_json(paths.params() / "m_mou.json", detail::rows_json(m_mou));
    detail::write_json(paths.params() / "m_upp.json", detail::rows_json(m_upp));
    detail::write_json(paths.params() / "m_hed.json", detail::rows_json(m_hed));

    nlohmann::json report;
    report["frames"] = T;
    report["fps"] = fps;
    report["emotion"] = emotion;
    report["watermark"] = watermark;
    report["height"] = tr.height;
    report["width"] = tr.width;
    detail::write_json(paths.report_json(), report);
}

/// Parameter, landmark and image metrics over the test split and the
/// speaker reference, written as one JSON report.
inline void cmd_eval(const Config& cfg, std::uint64_t seed,
                     const std::filesystem::path& out) {
    const Paths paths{out};
    detail::require_artifacts(
        "eval", {paths.corpus(), paths.speaker_corpus(), paths.fit_json(),
                 paths.landmarks_json(), paths.targets(),
                 paths.anim_gen(anim::AnimRole::Mouth), paths.anim_gen(anim::AnimRole::Upper),
                 paths.style_ckpt(), paths.render_gen()});

    const data::Corpus corpus = data::Corpus::load(paths.corpus());
    const anim::GeneratorBundle mouth =
        detail::load_bundle(cfg, anim::AnimRole::Mouth, seed, paths);
    const anim::GeneratorBundle upper =
        detail::load_bundle(cfg, anim::AnimRole::Upper, seed, paths);
    style::StyleMap map = style::StyleMap::make(seed, cfg.get_int("style.hidden"));
    io::load_checkpoint(paths.style_ckpt(), map.params);
    const detail::SpeakerTracks tr = detail::load_tracks(paths);
    const face::FaceModel model = face::synth_face_model(tr.face_seed);
    const std::vector<double> s = detail::fit_s_vector(paths);

    nlohmann::json j;
    std::vector<int> idx = corpus.test_indices();
    j["split"] = idx.empty() ? "train" : "test";
    if (idx.empty()) idx = corpus.train_indices();
    nlohmann::json utts = nlohmann::json::object();
    double mse_sum = 0.0, lmd_sum = 0.0, ssim_sum = 0.0;
    for (int i : idx) {
        const data::Utterance& u = corpus.utterances[static_cast<std::size_t>(i)];
        const nn::Tensor mh_mou = mouth.generate(u.ph);
        const nn::Tensor mh_upp = upper.generate(u.w, u.emotion);
        nlohmann::json e;
        e["mse_mouth"] = metrics::mse_params(mh_mou, u.m_mou);
        e["lmd"] = metrics::lmd_3d(model, s, u.m_mou, mh_mou, u.m_upp);
        e["ssim_upper"] = metrics::ssim_param_metric(mh_upp, u.m_upp);
        mse_sum += e["mse_mouth"].get<double>();
        lmd_sum += e["lmd"].get<double>();
        ssim_sum += e["ssim_upper"].get<double>();
        utts[corpus.names[static_cast<std::size_t>(i)]] = std::move(e);
    }
    j["utterances"] = std::move(utts);

    const data::Corpus reference = data::Corpus::load(paths.speaker_corpus());
    const nlohmann::json fit = detail::read_json(paths.fit_json());
    double style_mse = 0.0;
    int style_n = 0;
    for (std::size_t ui = 0; ui < reference.utterances.size(); ++ui) {
        const nn::Tensor expr = detail::rows_tensor(
            fit.at("utterances")[ui].at("expr"), face::kExprDims, "fit.json expr");
        nn::Tensor personal = nn::Tensor::zeros({expr.rows(), data::kMouthDims});
        for (int t = 0; t < expr.rows(); ++t)
            for (int d = 0; d < data::kMouthDims; ++d)
                personal.at(t, d) = expr.at(t, data::kUpperDims + d);
        const nn::Tensor styled =
            style::apply_style(map, mouth.generate(reference.utterances[ui].ph));
        style_mse += metrics::mse_params(styled, personal);
        ++style_n;
    }
    j["style_mse"] = style_mse / style_n;

    render::RendererNets nets =
        render::RendererNets::make(seed, {cfg.get_int("render.channels")});
    io::load_checkpoint(paths.render_gen(), nets.params);
    const auto samples = detail::render_samples(cfg, paths, tr);
    double img_ssim = 0.0;
    for (const auto& sample : samples) {
        const render::RenderOut r = render_frame(nets, sample.volume);
        img_ssim += metrics::ssim_image(detail::to_unit_image(r.fused),
                                        detail::to_unit_image(sample.target));
    }
    j["image_ssim"] = img_ssim / static_cast<double>(samples.size());

    nlohmann::json agg;
    agg["mse_mouth"] = mse_sum / static_cast<double>(idx.size());
    agg["lmd"] = lmd_sum / static_cast<double>(idx.size());
    agg["ssim_upper"] = ssim_sum / static_cast<double>(idx.size());
    j["aggregate"] = std::move(agg);
    detail::write_json(paths.eval_json(), j);
}

/**
 * Finite-difference audit of every differentiable net at reduced sizes,
 * one max-relative-error entry per net. Returns false (and still writes
 * the report) if any entry reaches 1e-4.
 */
inline bool cmd_gradcheck(const Config& cfg, std::uint64_t seed,
                          const std::filesystem::path& out) {
    (void)cfg;
    const Paths paths{out};
    nlohmann::json nets = nlohmann::json::object();
    common::Rng rng(common::stage_seed(seed, "pipeline.gradcheck"));

    const anim::MouthNetConfig mcfg{16, 8, 2};
    const anim::EncDecConfig ecfg{16, 8};
    const anim::PatchDiscConfig dcfg{8};
    const int T = 16;
    std::vector<int> ph, w;
    for (int t = 0; t < T; ++t) {
        ph.push_back(rng.uniform_int(data::kPhonemeVocab));
        w.push_back(rng.uniform_int(data::kWordVocab));
    }

    auto check_anim = [&](anim::AnimRole role) {
        anim::GeneratorBundle b = anim::GeneratorBundle::make(role, seed, mcfg, ecfg, dcfg);
        b.lambda = role == anim::AnimRole::Mouth ? anim::kLambdaMouth : anim::kLambdaUpper;
        nn::Tensor target = nn::Tensor::zeros({T, anim::role_out_dims(role)});
        for (double& v : target.data) v = rng.uniform(0.05, 0.95);
        const std::vector<int>& symbols = role == anim::AnimRole::Mouth ? ph : w;
        const int emo = role == anim::AnimRole::Upper ? 1 : -1;

        auto g_loss = [&](const nn::ParamStore& p) {
            nn::Tape t;
            const nn::ConstBinding Pg(t, p);
            const nn::ConstBinding Pd(t, b.disc);
            const int pred = b.forward(t, Pg, symbols, emo);
            const int rec = role == anim::AnimRole::Mouth
                                ? anim::l1_seq_node(t, pred, t.constant(target))
                                : anim::ssim_seq_loss_node(t, pred, t.constant(target));
            const int adv = anim::lsgan_g_node(t, anim::forward_patch_disc(t, Pd, pred));
            return t.val(t.add(adv, t.scale(rec, b.lambda))).data[0];
        };
        {
            nn::Tape t;
            const nn::TapeBinding Pg(t, b.gen);
            const nn::ConstBinding Pd(t, b.disc);
            const int pred = b.forward(t, Pg, symbols, emo);
            const int rec = role == anim::AnimRole::Mouth
                                ? anim::l1_seq_node(t, pred, t.constant(target))
                                : anim::ssim_seq_loss_node(t, pred, t.constant(target));
            const int adv = anim::lsgan_g_node(t, anim::forward_patch_disc(t, Pd, pred));
            t.backward_scalar(t.add(adv, t.scale(rec, b.lambda)));
            const auto res = nn::grad_check(b.gen, g_loss, Pg.collect_grads(), 1e-5, 8);
            nets[std::string(anim::role_name(role)) + ".gen"] = res.max_rel_err;
        }
        {
            const nn::Tensor fake = b.generate(symbols, emo);
            auto d_loss = [&](const nn::ParamStore& p) {
                nn::Tape t;
                const nn::ConstBinding Pd(t, p);
                const int dl = anim::lsgan_d_node(
                    t, anim::forward_patch_disc(t, Pd, t.constant(target)),
                    anim::forward_patch_disc(t, Pd, t.constant(fake)));
                return t.val(dl).data[0];
            };
            nn::Tape t;
            const nn::TapeBinding Pd(t, b.disc);
            t.backward_scalar(anim::lsgan_d_node(
                t, anim::forward_patch_disc(t, Pd, t.constant(target)),
                anim::forward_patch_disc(t, Pd, t.constant(fake))));
            const auto res = nn::grad_check(b.disc, d_loss, Pd.collect_grads(), 1e-5, 8);
            nets[std::string(anim::role_name(role)) + ".disc"] = res.max_rel_err;
        }
    };
    check_anim(anim::AnimRole::Mouth);
    check_anim(anim::AnimRole::Upper);
    check_anim(anim::AnimRole::Head);

    {
        style::StyleMap map = style::StyleMap::make(seed, 16);
        nn::Tensor x = nn::Tensor::zeros({8, data::kMouthDims});
        nn::Tensor y = nn::Tensor::zeros({8, data::kMouthDims});
        for (double& v : x.data) v = rng.uniform(0.05, 0.95);
        for (double& v : y.data) v = rng.uniform(0.05, 0.95);
        auto loss = [&](const nn::ParamStore& p) {
            nn::Tape t;
            const nn::ConstBinding P(t, p);
            const int pred = map.forward(t, P, t.constant(x));
            return t.val(t.mean_all(t.square(t.sub(pred, t.constant(y))))).data[0];
        };
        nn::Tape t;
        const nn::TapeBinding P(t, map.params);
        const int pred = map.forward(t, P, t.constant(x));
        t.backward_scalar(t.mean_all(t.square(t.sub(pred, t.constant(y)))));
        const auto res = nn::grad_check(map.params, loss, P.collect_grads(), 1e-5, 8);
        nets["style"] = res.max_rel_err;
    }

    {
        render::RendererNets rnets = render::RendererNets::make(seed, {2}, 15);
        render::VidDisc disc = render::VidDisc::make(seed, {2}, 18);
        const render::FeaturePyramid pyr = render::FeaturePyramid::make(seed, 3, 2, 2);
        std::vector<nn::Tensor> imgs;
        for (int i = 0; i < 3; ++i) {
            nn::Tensor img = nn::Tensor::zeros({16, 16, 1});
            for (double& v : img.data) v = rng.uniform(0.0, 1.0);
            imgs.push_back(img);
        }
        const render::Volume vol = render::build_volume(imgs, 1);
        nn::Tensor real = nn::Tensor::zeros({16, 16, 3});
        for (double& v : real.data) v = rng.uniform(-1.0, 1.0);
        const render::CropBox box{4, 4, 8, 8};
        const render::VidLossWeights wts{};

        auto g_loss = [&](const nn::ParamStore& p) {
            nn::Tape t;
            const nn::ConstBinding Pg(t, p);
            const nn::ConstBinding Pd(t, disc.params);
            const render::RenderNodes r = render::render_nodes(t, Pg, t.constant(vol.data));
            const render::VidLossNodes n = render::loss_video_nodes(
                t, pyr, Pd, r, t.constant(real), t.constant(vol.data), box, wts);
            return t.val(n.total).data[0];
        };
        {
            nn::Tape t;
            const nn::TapeBinding Pg(t, rnets.params);
            const nn::ConstBinding Pd(t, disc.params);
            const render::RenderNodes r = render::render_nodes(t, Pg, t.constant(vol.data));
            const render::VidLossNodes n = render::loss_video_nodes(
                t, pyr, Pd, r, t.constant(real), t.constant(vol.data), box, wts);
            t.backward_scalar(n.total);
            const auto res = nn::grad_check(rnets.params, g_loss, Pg.collect_grads(), 1e-5, 4);
            nets["render.gen"] = res.max_rel_err;
        }
        {
            const render::RenderOut ro = render::render_frame(rnets, vol);
            auto d_loss = [&](const nn::ParamStore& p) {
                nn::Tape t;
                const nn::ConstBinding Pd(t, p);
                return t
                    .val(render::disc_loss_nodes(t, Pd, t.constant(real), t.constant(ro.fused),
                                                 t.constant(vol.data)))
                    .data[0];
            };
            nn::Tape t;
            const nn::TapeBinding Pd(t, disc.params);
            t.backward_scalar(render::disc_loss_nodes(t, Pd, t.constant(real),
                                                      t.constant(ro.fused), t.constant(vol.data)));
            const auto res = nn::grad_check(disc.params, d_loss, Pd.collect_grads(), 1e-5, 8);
            nets["render.disc"] = res.max_rel_err;
        }
    }

    const double threshold = 1e-4;
    bool pass = true;
    for (const auto& [name, err] : nets.items())
        if (!(err.get<double>() < threshold)) pass = false;
    nlohmann::json j;
    j["threshold"] = threshold;
    j["nets"] = std::move(nets);
    j["pass"] = pass;
    detail::write_json(paths.gradcheck_json(), j);
    return pass;
}

} // namespace tth::pipeline
