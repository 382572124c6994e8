// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failures.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "goldens.hpp"
#include "metric_oracle.hpp"
#include "synthetic.hpp"
#include "test_support.hpp"
#include "zsmad/classifier.hpp"
#include "zsmad/encoder.hpp"
#include "zsmad/errors.hpp"
#include "zsmad/experiments.hpp"
#include "zsmad/explain.hpp"
#include "zsmad/metrics.hpp"
#include "zsmad/tokenizer.hpp"

namespace {

namespace fs = std::filesystem;
using namespace zsmad;
using zsmad::testing::kFixtures;
using zsmad::testing::slurp;
using zsmad::testing::TempDir;

const fs::path kSamples = kFixtures / "samples";
const fs::path kGolden = kFixtures / "toy_run" / "golden";

// Thrown by a check with a description of the first violation.
struct Violation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Violation(what);
}

struct Criterion {
    std::string name;
    double budget_s;  // 0 means no runtime bound
    std::function<std::string()> check;  // returns a detail string
};

int run_cli(const std::string& args, const fs::path& stdout_file) {
    const std::string cmd = fmt::format("{} {} >'{}' 2>/dev/null", ZSMAD_CLI, args, stdout_file.string());
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::string metric_oracle() {
    std::mt19937_64 rng(2024);
    size_t points = 0;
    for (int n = 0; n < 500; ++n) {
        const auto s = zsmad::testing::random_scores(rng);
        require(s.bonafide.size() + s.morph.size() <= 50, "instance larger than 50 scores");
        const auto sweep = zsmad::testing::sweep(s);
        const auto curve = det_curve(s);
        require(curve.size() == sweep.size(), fmt::format("instance {}: det_curve length", n));
        for (size_t i = 0; i < curve.size(); ++i) {
            require(curve[i].threshold == sweep[i].t && curve[i].macer == sweep[i].macer && curve[i].bpcer == sweep[i].bpcer,
                    fmt::format("instance {}: det point {}", n, i));
        }
        points += curve.size();
        for (double target : {0.01, 0.05, 0.1, 0.2, 0.5}) {
            const auto op = bpcer_at_macer(s, target);
            const auto want = zsmad::testing::oracle_bpcer_at_macer(s, target);
            require(op.threshold == want.t && op.bpcer == want.bpcer && op.achieved_macer == want.macer,
                    fmt::format("instance {}: bpcer_at_macer({})", n, target));
        }
        require(eer(s) == zsmad::testing::oracle_eer(s), fmt::format("instance {}: eer", n));
    }
    return fmt::format("500 instances, {} DET points, 5 targets each", points);
}

std::string softmax_invariants() {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> cos(-1.0, 1.0), scale(1e-3, 1000.0), bump(0.0, 0.5);
    double worst_sum = 0;
    for (int i = 0; i < 10000; ++i) {
        const double b = cos(rng), m = cos(rng), s = i % 10 == 0 ? 1000.0 : scale(rng);
        const auto p = softmax_pair(b, m, s);
        require(!std::isnan(p.p_morph) && !std::isnan(p.p_bonafide), fmt::format("NaN at ({}, {}, {})", b, m, s));
        worst_sum = std::max(worst_sum, std::fabs(p.p_morph + p.p_bonafide - 1.0));
        require(worst_sum <= 1e-6, fmt::format("sum off by {} at ({}, {}, {})", worst_sum, b, m, s));
        // The larger cosine carries the larger probability.
        require((m > b) == (p.p_morph > p.p_bonafide) && (m == b) == (p.p_morph == p.p_bonafide),
                fmt::format("argmax at ({}, {}, {})", b, m, s));
        // Raising the morph cosine never lowers p_morph; raising the bona fide one never raises it.
        const double d = bump(rng);
        require(softmax_pair(b, std::min(1.0, m + d), s).p_morph >= p.p_morph, fmt::format("monotone in cos_m at {}", i));
        require(softmax_pair(std::min(1.0, b + d), m, s).p_morph <= p.p_morph, fmt::format("monotone in cos_b at {}", i));
        // A sharper scale moves p_morph away from 1/2 without crossing it.
        const auto sharper = softmax_pair(b, m, std::min(1000.0, s * 2));
        require(std::fabs(sharper.p_morph - 0.5) >= std::fabs(p.p_morph - 0.5) - 1e-15 &&
                    (sharper.p_morph > 0.5) == (p.p_morph > 0.5),
                fmt::format("scale monotonicity at {}", i));
    }
    return fmt::format("10000 triples, max |sum - 1| = {:.1e}", worst_sum);
}

std::string tokenizer_goldens() {
    const auto cases = zsmad::testing::tokenizer_cases();
    std::map<std::string, Vocabulary> vocabs;
    size_t truncated = 0;
    for (const auto& c : cases) {
        auto it = vocabs.find(c.vocab);
        if (it == vocabs.end()) it = vocabs.emplace(c.vocab, zsmad::testing::fixture_vocab(c.vocab)).first;
        const auto problem = zsmad::testing::tokenizer_mismatch(c, it->second);
        require(problem.empty(), problem);
        if (c.ids.size() == static_cast<size_t>(it->second.context_length())) {
            require(c.ids.back() == it->second.eot_id(), "truncated sequence does not end in EOT");
            ++truncated;
        }
    }
    require(cases.size() >= 20 * vocabs.size(), "fewer than 20 strings per vocabulary");
    require(truncated > 0, "no case exercises truncation");
    return fmt::format("{} cases over {} vocabularies, {} truncated", cases.size(), vocabs.size(), truncated);
}

std::string toy_end_to_end() {
    TempDir dir;
    const fs::path bundle = dir / "toy";
    require(run_cli(fmt::format("make-toy --out {} --seed 1 --dim 16 --backbones", q(bundle)), dir / "make.txt") == 0,
            "make-toy failed");
    for (const auto& e : fs::recursive_directory_iterator(kFixtures / "toy_bundle")) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), kFixtures / "toy_bundle");
        require(slurp(bundle / rel) == slurp(e.path()), "make-toy differs from fixture: " + rel.string());
    }
    require(run_cli(fmt::format("classify --bundle {} --image {}", q(bundle), q(kSamples / "images" / "bf_d1.png")),
                    dir / "classify.csv") == 0,
            "classify failed");
    require(slurp(dir / "classify.csv") == slurp(kGolden / "classify_bf_d1.csv"), "classify output differs");
    std::string baselines;
    for (const char* name : {"resnet50", "vgg19", "vit"}) baselines += " --baseline " + q(bundle / "backbones" / (std::string(name) + ".onnx"));
    size_t files = 0;
    for (int threads : {1, 2, 4, 8}) {
        const fs::path out = dir / fmt::format("run{}", threads);
        const int code = run_cli(fmt::format("evaluate --bundle {} --manifest {} --out {} --threads {}{} --reference {}", q(bundle),
                                             q(kSamples / "manifest.csv"), q(out), threads, baselines, q(kSamples / "reference.csv")),
                                 dir / "summary.txt");
        require(code == 0, fmt::format("evaluate failed at {} threads", threads));
        require(slurp(dir / "summary.txt") == slurp(kGolden / "summary.txt"), fmt::format("summary differs at {} threads", threads));
        for (const char* f : {"scores.csv", "cells.csv", "aggregates.csv"}) require(fs::exists(out / f), std::string("missing ") + f);
        files = 0;
        for (const auto& e : fs::recursive_directory_iterator(out)) {
            if (!e.is_regular_file()) continue;
            const auto rel = fs::relative(e.path(), out);
            require(slurp(e.path()) == slurp(kGolden / rel), fmt::format("{} differs at {} threads", rel.string(), threads));
            ++files;
        }
    }
    return fmt::format("12-sample manifest, {} output files identical at 1/2/4/8 threads", files);
}

std::string embedding_contracts() {
    const auto model = load_bundle(kFixtures / "toy_bundle");
    const auto manifest = load_manifest(kSamples / "manifest.csv");
    std::vector<ImageTensor> images;
    for (const auto& s : manifest.samples) {
        try {
            images.push_back(preprocess(decode(manifest.resolve(s)), model.config().preprocess()));
        } catch (const Error&) {
        }
    }
    std::vector<TokenSequence> texts;
    for (const auto& p : default_prompt_bank().pairs) {
        texts.push_back(tokenize(p.bonafide_text, model.vocab()));
        texts.push_back(tokenize(p.morph_text, model.vocab()));
    }
    double norm_err = 0, batch_err = 0;
    auto compare = [&](const std::vector<Embedding>& batch, const std::function<Embedding(size_t)>& single) {
        for (size_t i = 0; i < batch.size(); ++i) {
            const auto one = single(i);
            norm_err = std::max(norm_err, std::fabs(std::sqrt(dot(one, one)) - 1.0));
            norm_err = std::max(norm_err, std::fabs(std::sqrt(dot(batch[i], batch[i])) - 1.0));
            for (size_t k = 0; k < one.size(); ++k) batch_err = std::max(batch_err, static_cast<double>(std::fabs(batch[i][k] - one[k])));
        }
    };
    compare(model.encode_images(images), [&](size_t i) { return model.encode_image(images[i]); });
    compare(model.encode_texts(texts), [&](size_t i) { return model.encode_text(texts[i]); });
    require(norm_err <= 1e-5, fmt::format("norm error {:.2e}", norm_err));
    require(batch_err <= 1e-6, fmt::format("batch error {:.2e}", batch_err));
    return fmt::format("{} images, {} texts; max |norm - 1| = {:.1e}, max batch diff = {:.1e}", images.size(), texts.size(),
                       norm_err, batch_err);
}

std::string lime_sanity() {
    RawImage img(48, 48);
    for (int y = 0; y < 48; ++y) {
        for (int x = 0; x < 48; ++x) {
            img.at(y, x, 0) = static_cast<uint8_t>((x * 7 + y * 3) % 256);
            img.at(y, x, 1) = static_cast<uint8_t>(((x / 3 + y / 3) % 2) ? 220 : 30);
            img.at(y, x, 2) = static_cast<uint8_t>(y * 5);
        }
    }
    const auto mask = segment(img, kDefaultSegments);
    const int target = 24;  // centre cell
    const auto fill = mean_color(img);
    // Linear in the fraction of the target segment left intact.
    const ImageScorer scorer = [&](const RawImage& p) {
        int on = 0, total = 0;
        for (size_t i = 0; i < mask.ids.size(); ++i) {
            if (mask.ids[i] != target) continue;
            ++total;
            on += (p.pixels[i * 3] != fill[0] || p.pixels[i * 3 + 1] != fill[1] || p.pixels[i * 3 + 2] != fill[2]) ? 1 : 0;
        }
        return 0.1 + 0.8 * on / total;
    };
    ExplainOptions opt;
    opt.seed = 31;
    const auto a = explain(img, mask, scorer, opt);
    opt.threads = 4;
    const auto b = explain(img, mask, scorer, opt);
    require(a.weights == b.weights && a.intercept == b.intercept && a.fit_quality == b.fit_quality, "fixed seed not deterministic");
    double others = 0;
    for (int i = 0; i < mask.n_segments; ++i) {
        if (i != target) others = std::max(others, std::fabs(a.weights[i]));
    }
    require(a.weights[target] > 3 * others, fmt::format("target weight {:.3f} vs other {:.3f}", a.weights[target], others));
    require(a.fit_quality > 0.9, fmt::format("fit_quality {:.3f}", a.fit_quality));
    return fmt::format("target weight {:.3f}, max other {:.3f}, fit_quality {:.4f}", a.weights[target], others, a.fit_quality);
}

std::string experiment_cardinality() {
    const auto manifest = zsmad::testing::full_grid_manifest(3, 2);
    const auto bank = default_prompt_bank();
    require(bank.pairs.size() == 10, "bank is not 10 pairs");
    const auto run = zsmad::testing::synthetic_run(manifest, bank, 8);
    const auto result = build_cells(manifest, bank, run, kDefaultTargetMacer);
    require(result.cells.size() == 150, fmt::format("{} cells", result.cells.size()));
    require(result.degenerate_cells().empty(), "degenerate cells on a full grid");
    const auto baselines = zsmad::testing::synthetic_baselines(manifest, 9);
    const auto table = compare_from_scores(manifest, bank, run, baselines, kDefaultTargetMacer);
    require(table.size() == 12, fmt::format("{} comparison rows", table.size()));
    std::set<std::pair<std::string, Medium>> keys;
    for (const auto& r : table) keys.emplace(r.model, r.medium);
    require(keys.size() == 12, "comparison rows are not distinct (model, medium) pairs");
    return "5 generators x 3 mediums x 10 prompts = 150 cells; 4 models x 3 mediums = 12 rows";
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"metric oracle equivalence", 10, metric_oracle},
        {"softmax invariants", 5, softmax_invariants},
        {"tokenizer golden suite", 1, tokenizer_goldens},
        {"toy bundle end to end", 30, toy_end_to_end},
        {"embedding contracts", 0, embedding_contracts},
        {"LIME sanity", 20, lime_sanity},
        {"experiment cardinality", 0, experiment_cardinality},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = true;
        try {
            detail = c.check();
        } catch (const std::exception& e) {
            ok = false;
            detail = e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (ok && c.budget_s > 0 && secs >= c.budget_s) {
            ok = false;
            detail += fmt::format("; over the {:g} s budget", c.budget_s);
        }
        failures += ok ? 0 : 1;
        fmt::print("{} {} ({:.2f} s): {}\n", ok ? "PASS" : "FAIL", c.name, secs, detail);
    }
    return failures;
}
