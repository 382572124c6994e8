#include "zsmad/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "zsmad/errors.hpp"
#include "zsmad/parallel.hpp"

namespace zsmad {

namespace {

void require_both_classes(const Manifest& m) {
    if (m.count(Label::BonaFide) == 0 || m.count(Label::Morph) == 0) {
        throw DegenerateError(fmt::format("manifest '{}' needs at least one bona fide and one morph sample (has {} and {})",
                                          m.source_tag, m.count(Label::BonaFide), m.count(Label::Morph)));
    }
}

std::vector<Generator> generators_present(const Manifest& m) {
    std::set<Generator> g;
    for (const auto& s : m.samples) {
        if (s.label == Label::Morph) g.insert(s.generator);
    }
    return {g.begin(), g.end()};
}

std::vector<Medium> mediums_present(const Manifest& m) {
    std::set<Medium> md;
    for (const auto& s : m.samples) md.insert(s.medium);
    return {md.begin(), md.end()};
}

// sample_id -> score for one prompt.
using ScoreIndex = std::unordered_map<std::string, double>;

std::vector<ScoreIndex> index_by_prompt(const PromptBank& bank, const BankRun& run) {
    std::unordered_map<std::string, size_t> slot;
    for (size_t k = 0; k < bank.pairs.size(); ++k) slot.emplace(bank.pairs[k].id, k);
    std::vector<ScoreIndex> out(bank.pairs.size());
    for (const auto& r : run.records) {
        const auto it = slot.find(r.prompt_id);
        if (it != slot.end()) out[it->second].emplace(r.sample_id, r.p_morph);
    }
    return out;
}

LabeledScores gather(const Manifest& slice, const ScoreIndex& scores) {
    LabeledScores ls;
    for (const auto& s : slice.samples) {
        const auto it = scores.find(s.id);
        if (it == scores.end()) continue;
        (s.label == Label::Morph ? ls.morph : ls.bonafide).push_back(it->second);
    }
    return ls;
}

struct Evaluated {
    std::size_t n_bonafide = 0, n_morph = 0;
    bool degenerate = false;
    OperatingPoint op;
};

Evaluated evaluate(const LabeledScores& ls, double target) {
    Evaluated e{ls.bonafide.size(), ls.morph.size(), ls.bonafide.empty() || ls.morph.empty(), {}};
    if (!e.degenerate) e.op = bpcer_at_macer(ls, target);
    else e.op.target_macer = target;
    return e;
}

template <class Pred>
std::vector<double> cell_values(const ExperimentResult& r, Pred pred) {
    std::vector<double> v;
    for (const auto& c : r.cells) {
        if (!c.degenerate && pred(c)) v.push_back(c.op.bpcer);
    }
    return v;
}

}  // namespace

std::vector<const Cell*> ExperimentResult::degenerate_cells() const {
    std::vector<const Cell*> out;
    for (const auto& c : cells) {
        if (c.degenerate) out.push_back(&c);
    }
    return out;
}

std::string AggregateStat::key() const {
    std::vector<std::string> parts;
    if (prompt_id) parts.push_back("prompt=" + *prompt_id);
    if (generator) parts.push_back(fmt::format("generator={}", to_string(*generator)));
    if (medium) parts.push_back(fmt::format("medium={}", to_string(*medium)));
    if (category) parts.push_back(fmt::format("category={}", to_string(*category)));
    return parts.empty() ? "all" : fmt::format("{}", fmt::join(parts, "|"));
}

double quantile(std::span<const double> sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<size_t>(std::floor(h));
    const size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

AggregateStat summarize(std::string group, std::vector<double> values) {
    AggregateStat a;
    a.group = std::move(group);
    a.n = values.size();
    if (values.empty()) return a;
    std::sort(values.begin(), values.end());
    a.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    a.min = values.front();
    a.max = values.back();
    a.q1 = quantile(values, 0.25);
    a.median = quantile(values, 0.5);
    a.q3 = quantile(values, 0.75);
    return a;
}

LabeledScores cell_scores(const Manifest& manifest, const BankRun& run, const Cell& cell) {
    ScoreIndex index;
    for (const auto& r : run.records) {
        if (r.prompt_id == cell.prompt_id) index.emplace(r.sample_id, r.p_morph);
    }
    return gather(slice(manifest, cell.generator, cell.medium), index);
}

ExperimentResult build_cells(const Manifest& manifest, const PromptBank& bank, const BankRun& run, double target_macer) {
    require_both_classes(manifest);
    const auto index = index_by_prompt(bank, run);
    const auto generators = generators_present(manifest);
    const auto mediums = mediums_present(manifest);
    ExperimentResult result;
    result.target_macer = target_macer;
    result.skipped = run.skipped;
    for (size_t k = 0; k < bank.pairs.size(); ++k) {
        for (Generator g : generators) {
            for (Medium m : mediums) {
                const auto e = evaluate(gather(slice(manifest, g, m), index[k]), target_macer);
                result.cells.push_back({bank.pairs[k].id, bank.pairs[k].category, g, m, e.n_bonafide, e.n_morph,
                                        e.degenerate, e.op});
            }
        }
    }
    return result;
}

ExperimentResult experiment1(const Manifest& manifest, const PromptBank& bank, const EmbeddingModel& model,
                             double target_macer, int threads) {
    require_both_classes(manifest);
    return build_cells(manifest, bank, run_bank(manifest, bank, model, threads), target_macer);
}

std::vector<AggregateStat> experiment2(const ExperimentResult& result) {
    std::set<Generator> gens;
    std::set<Medium> meds;
    for (const auto& c : result.cells) {
        gens.insert(c.generator);
        meds.insert(c.medium);
    }
    const std::array<PromptCategory, 2> cats = {PromptCategory::Short, PromptCategory::Long};
    std::vector<AggregateStat> out;
    auto emit = [&](AggregateStat a) {
        if (a.n > 0) out.push_back(std::move(a));
    };
    for (Generator g : gens) {
        for (Medium m : meds) {
            auto a = summarize("generator-medium", cell_values(result, [&](const Cell& c) { return c.generator == g && c.medium == m; }));
            a.generator = g;
            a.medium = m;
            emit(std::move(a));
        }
    }
    for (Generator g : gens) {
        for (Medium m : meds) {
            for (auto cat : cats) {
                auto a = summarize("generator-medium-category", cell_values(result, [&](const Cell& c) {
                    return c.generator == g && c.medium == m && c.category == cat;
                }));
                a.generator = g;
                a.medium = m;
                a.category = cat;
                emit(std::move(a));
            }
        }
    }
    for (Medium m : meds) {
        auto a = summarize("medium", cell_values(result, [&](const Cell& c) { return c.medium == m; }));
        a.medium = m;
        emit(std::move(a));
    }
    for (Medium m : meds) {
        for (auto cat : cats) {
            auto a = summarize("medium-category", cell_values(result, [&](const Cell& c) { return c.medium == m && c.category == cat; }));
            a.medium = m;
            a.category = cat;
            emit(std::move(a));
        }
    }
    for (auto cat : cats) {
        auto a = summarize("category", cell_values(result, [&](const Cell& c) { return c.category == cat; }));
        a.category = cat;
        emit(std::move(a));
    }
    return out;
}

PromptRanking experiment3(const ExperimentResult& result, const PromptBank& bank) {
    PromptRanking ranking;
    const AggregateStat* best = nullptr;
    for (const auto& p : bank.pairs) {
        auto a = summarize("prompt", cell_values(result, [&](const Cell& c) { return c.prompt_id == p.id; }));
        if (a.n == 0) continue;
        a.prompt_id = p.id;
        a.category = p.category;
        ranking.per_prompt.push_back(std::move(a));
    }
    for (const auto& a : ranking.per_prompt) {
        if (!best || a.mean < best->mean) best = &a;
    }
    if (best) ranking.best_prompt = *best->prompt_id;
    return ranking;
}

std::vector<ComparisonRow> compare_from_scores(const Manifest& manifest, const PromptBank& bank, const BankRun& run,
                                               std::span<const ModelScores> baselines, double target_macer) {
    require_both_classes(manifest);
    const auto index = index_by_prompt(bank, run);
    std::vector<ScoreIndex> baseline_index;
    for (const auto& b : baselines) baseline_index.emplace_back(b.scores.begin(), b.scores.end());
    std::vector<ComparisonRow> rows;
    for (Medium m : mediums_present(manifest)) {
        const Manifest pooled = slice(manifest, std::nullopt, m);
        ComparisonRow dual{kDualEncoderName, m, "", 0, 0, true, {}};
        dual.op.target_macer = target_macer;
        for (size_t k = 0; k < bank.pairs.size(); ++k) {
            const auto e = evaluate(gather(pooled, index[k]), target_macer);
            if (k == 0 || (dual.degenerate && !e.degenerate)) {
                dual = {kDualEncoderName, m, e.degenerate ? "" : bank.pairs[k].id, e.n_bonafide, e.n_morph, e.degenerate, e.op};
            } else if (!e.degenerate && e.op.bpcer < dual.op.bpcer) {
                dual = {kDualEncoderName, m, bank.pairs[k].id, e.n_bonafide, e.n_morph, false, e.op};
            }
        }
        rows.push_back(dual);
        for (size_t b = 0; b < baselines.size(); ++b) {
            const auto e = evaluate(gather(pooled, baseline_index[b]), target_macer);
            rows.push_back({baselines[b].model, m, "", e.n_bonafide, e.n_morph, e.degenerate, e.op});
        }
    }
    return rows;
}

ModelScores score_baseline(const Manifest& manifest, const Baseline& baseline, int threads) {
    check_disjoint(baseline.scorer, manifest);
    std::vector<std::optional<double>> scores(manifest.samples.size());
    parallel_for(manifest.samples.size(), threads, [&](size_t i) {
        try {
            const auto img = preprocess(decode(manifest.resolve(manifest.samples[i])), baseline.backbone.spec());
            scores[i] = baseline_score(baseline.scorer, baseline.backbone, img);
        } catch (const Error&) {
        }
    });
    ModelScores out{baseline.scorer.name, {}};
    for (size_t i = 0; i < scores.size(); ++i) {
        if (scores[i]) out.scores.emplace_back(manifest.samples[i].id, *scores[i]);
    }
    return out;
}

std::vector<ComparisonRow> compare_models(const Manifest& manifest, const PromptBank& bank, const EmbeddingModel& model,
                                          std::span<const Baseline> baselines, double target_macer, int threads) {
    require_both_classes(manifest);
    const BankRun run = run_bank(manifest, bank, model, threads);
    std::vector<ModelScores> scores;
    for (const auto& b : baselines) scores.push_back(score_baseline(manifest, b, threads));
    return compare_from_scores(manifest, bank, run, scores, target_macer);
}

}  // namespace zsmad
