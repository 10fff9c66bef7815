/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: tools/tth.cpp
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
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tth/pipeline/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Key-value config file");
    cmd->add_option("--seed", args.seed, "Run seed")->capture_default_str();
    cmd->add_option("--out", args.out, "Run directory")->required();
}

tth::pipeline::Config load_config(const CommonArgs& args) {
    if (args.config_path.empty()) return tth::pipeline::Config{};
    return tth::pipeline::Config::from_file(args.config_path);
}

int fail(const std::string& command, const std::string& message) {
    nlohmann::json j;
    j["error"]["command"] = command;
    j["error"]["message"] = message;
    std::cout << j.dump() << std::endl;
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic text-to-talking-head pipeline"};
    app.require_subcommand(1);

    CommonArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth-data", "Synthesize corpus and speaker footage");
    add_common(synth, synth_args);

    CommonArgs anim_args;
    std::string anim_role;
    CLI::App* train_anim = app.add_subcommand("train-anim", "Train one animation generator");
    train_anim->add_option("role", anim_role, "mouth|upper|head")
        ->required()
        ->check(CLI::IsMember({"mouth", "upper", "head"}));
    add_common(train_anim, anim_args);

    CommonArgs fit_args;
    CLI::App* fit = app.add_subcommand("fit-face", "Fit shape, pose and expression tracks");
    add_common(fit, fit_args);

    CommonArgs style_args;
    CLI::App* style = app.add_subcommand("train-style", "Train the mouth retargeting map");
    add_common(style, style_args);

    CommonArgs render_args;
    CLI::App* render = app.add_subcommand("train-render", "Train the neural renderer");
    add_common(render, render_args);

    CommonArgs gen_args;
    std::string emotion;
    bool watermark = false;
    CLI::App* generate = app.add_subcommand("generate", "Synthesize a talking-head sequence");
    add_common(generate, gen_args);
    generate->add_option("--emotion", emotion, "surprise|anger|neutral|happiness")->required();
    generate->add_flag("--watermark", watermark, "Stamp a SYNTHETIC mark on every frame");

    CommonArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "Score held-out utterances and renders");
    add_common(eval, eval_args);

    CommonArgs grad_args;
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference audit of all nets");
    add_common(gradcheck, grad_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        return fail("parse", e.what());
    }

    const CLI::App* active = app.get_subcommands().front();
    const std::string name = active->get_name();
    try {
        if (active == synth) {
            tth::pipeline::cmd_synth_data(load_config(synth_args), synth_args.seed,
                                          synth_args.out);
        } else if (active == train_anim) {
            const tth::anim::AnimRole role = anim_role == "mouth" ? tth::anim::AnimRole::Mouth
                                             : anim_role == "upper"
                                                 ? tth::anim::AnimRole::Upper
                                                 : tth::anim::AnimRole::Head;
            tth::pipeline::cmd_train_anim(load_config(anim_args), anim_args.seed, anim_args.out,
                                          role);
        } else if (active == fit) {
            tth::pipeline::cmd_fit_face(load_config(fit_args), fit_args.seed, fit_args.out);
        } else if (active == style) {
            tth::pipeline::cmd_train_style(load_config(style_args), style_args.seed,
                                           style_args.out);
        } else if (active == render) {
            tth::pipeline::cmd_train_render(load_config(render_args), render_args.seed,
                                            render_args.out);
        } else if (active == generate) {
            tth::pipeline::cmd_generate(load_config(gen_args), gen_args.seed, gen_args.out,
                                        emotion, watermark);
        } else if (active == eval) {
            tth::pipeline::cmd_eval(load_config(eval_args), eval_args.seed, eval_args.out);
        } else {
            if (!tth::pipeline::cmd_gradcheck(load_config(grad_args), grad_args.seed,
                                              grad_args.out))
                return fail(name, "gradient audit exceeded threshold, see gradcheck.json");
        }
    } catch (const std::exception& e) {
        return fail(name, e.what());
    }
    return 0;
}
