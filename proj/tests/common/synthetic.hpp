#pragma once

#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "zsmad/experiments.hpp"

namespace zsmad::testing {

// Every generator in every medium: per medium `bona` bona fide samples and
// `morphs` morphs per generator.
inline Manifest full_grid_manifest(int bona, int morphs) {
    Manifest m;
    m.source_tag = "grid";
    for (Medium md : kMediums) {
        for (int i = 0; i < bona; ++i) {
            m.samples.push_back({fmt::format("bf-{}-{}", to_string(md), i), "x.png", Label::BonaFide, Generator::None, md, {}});
        }
        for (Generator g : kMorphGenerators) {
            for (int i = 0; i < morphs; ++i) {
                m.samples.push_back({fmt::format("m-{}-{}-{}", to_string(g), to_string(md), i), "x.png", Label::Morph, g, md, {}});
            }
        }
    }
    return m;
}

// Random p_morph per (sample, prompt); morphs lean higher.
inline BankRun synthetic_run(const Manifest& m, const PromptBank& bank, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    BankRun run;
    for (const auto& s : m.samples) {
        for (const auto& p : bank.pairs) {
            ScoreRecord r;
            r.sample_id = s.id;
            r.prompt_id = p.id;
            r.p_morph = s.label == Label::Morph ? 0.3 + 0.7 * u(rng) : 0.7 * u(rng);
            r.p_bonafide = 1.0 - r.p_morph;
            run.records.push_back(r);
        }
    }
    return run;
}

inline std::vector<ModelScores> synthetic_baselines(const Manifest& m, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<ModelScores> out;
    for (const char* name : {"resnet50", "vgg19", "vit"}) {
        ModelScores ms{name, {}};
        for (const auto& s : m.samples) ms.scores.emplace_back(s.id, u(rng));
        out.push_back(std::move(ms));
    }
    return out;
}

}  // namespace zsmad::testing
