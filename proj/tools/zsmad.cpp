// zsmad: zero-shot morphing attack detection command line.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "zsmad/baselines.hpp"
#include "zsmad/classifier.hpp"
#include "zsmad/digest.hpp"
#include "zsmad/encoder.hpp"
#include "zsmad/errors.hpp"
#include "zsmad/experiments.hpp"
#include "zsmad/explain.hpp"
#include "zsmad/imaging.hpp"
#include "zsmad/manifest.hpp"
#include "zsmad/parallel.hpp"
#include "zsmad/report.hpp"
#include "zsmad/toy_bundle.hpp"

namespace fs = std::filesystem;
using namespace zsmad;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInference = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string bundle;
    std::string bank;
    int threads = default_threads();
};

struct ClassifyArgs {
    Common common;
    std::string image;
};

struct EvaluateArgs {
    Common common;
    std::string manifest;
    std::string out;
    double target_macer = kDefaultTargetMacer;
    uint64_t seed = 0;
    std::vector<std::string> baselines;
    std::string reference;
};

struct ExplainArgs {
    Common common;
    std::string image;
    std::string prompt;
    std::string out;
    int segments = kDefaultSegments;
    ExplainOptions options;
};

struct MakeToyArgs {
    std::string out;
    uint64_t seed = 0;
    int dim = 16;
    bool backbones = false;
};

struct ExportArgs {
    std::string result;
    std::string out;
    std::string format = "csv";
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--bundle", c.bundle, "Model bundle directory")->envname("ZSMAD_BUNDLE")->required();
    cmd->add_option("--bank", c.bank, "Prompt bank JSON (default: built-in bank)");
    cmd->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
}

PromptBank bank_for(const Common& c) {
    PromptBank bank = c.bank.empty() ? default_prompt_bank() : load_prompt_bank(c.bank);
    bank.validate();
    return bank;
}

void add_bundle_digest(DigestBuilder& d, const fs::path& dir) {
    for (const char* f : kBundleFiles) d.add_file(f, dir / f);
}

void print_digest(const std::string& hex) { fmt::print(stderr, "config digest {}\n", hex); }

int cmd_classify(const ClassifyArgs& a) {
    const PromptBank bank = bank_for(a.common);
    const RawImage img = decode(a.image);
    const ModelBundle model = load_bundle(a.common.bundle);

    DigestBuilder d;
    add_bundle_digest(d, a.common.bundle);
    d.add("bank", prompt_bank_to_json(bank)).add_file("image", a.image);
    print_digest(d.hex());

    const Embedding e = model.encode_image(preprocess(img, model.config().preprocess()));
    std::vector<ScoreRecord> records(bank.pairs.size());
    parallel_for(bank.pairs.size(), a.common.threads,
                 [&](size_t k) { records[k] = score(e, bank.pairs[k], model); });
    std::string out = "prompt_id,p_morph,predicted_text\n";
    for (const auto& r : records) {
        out += fmt::format("{},{},{}\n", csv_field(r.prompt_id), format_real(r.p_morph), csv_field(r.predicted_text));
    }
    fmt::print("{}", out);
    return kOk;
}

std::string det_name(const Cell& c) {
    return fmt::format("{}__{}__{}.csv", c.prompt_id, to_string(c.generator), to_string(c.medium));
}

int cmd_evaluate(const EvaluateArgs& a) {
    if (!(a.target_macer > 0.0 && a.target_macer < 1.0)) throw UsageError("--target-macer must lie in (0, 1)");
    if (!a.baselines.empty() && a.reference.empty()) throw UsageError("--baseline needs --reference");
    if (a.baselines.empty() && !a.reference.empty()) throw UsageError("--reference given without --baseline");

    const PromptBank bank = bank_for(a.common);
    const Manifest manifest = load_manifest(a.manifest);
    if (manifest.samples.empty()) throw ConstraintError(fmt::format("manifest '{}' is empty", a.manifest));
    std::optional<Manifest> reference;
    if (!a.reference.empty()) reference = load_manifest(a.reference);
    for (const auto& b : a.baselines) {
        if (!fs::exists(b)) throw IoError(fmt::format("baseline graph not found: {}", b));
    }
    const ModelBundle model = load_bundle(a.common.bundle);

    DigestBuilder d;
    add_bundle_digest(d, a.common.bundle);
    d.add("bank", prompt_bank_to_json(bank)).add_file("manifest", a.manifest);
    d.add("target_macer", format_real(a.target_macer)).add("seed", std::to_string(a.seed));
    for (const auto& b : a.baselines) {
        d.add_file("baseline", b).add_file("baseline_sidecar", fs::path(b).replace_extension(".json"));
    }
    if (reference) d.add_file("reference", a.reference);
    const std::string digest = d.hex();
    print_digest(digest);

    std::vector<ModelScores> baseline_scores;
    for (const auto& b : a.baselines) {
        Baseline baseline{Backbone::load(b), {}};
        baseline.scorer = fit_prototype(baseline.backbone, *reference, a.common.threads);
        check_disjoint(baseline.scorer, manifest);
        baseline_scores.push_back(score_baseline(manifest, baseline, a.common.threads));
    }

    const BankRun run = run_bank(manifest, bank, model, a.common.threads);
    ExperimentResult result = build_cells(manifest, bank, run, a.target_macer);
    auto comparison = compare_from_scores(manifest, bank, run, baseline_scores, a.target_macer);
    const RunReport report = RunReport::assemble(digest, bank, std::move(result), std::move(comparison));

    const fs::path out(a.out);
    write_report(report, out);
    {
        std::ofstream f(out / "scores.csv", std::ios::binary);
        f << scores_to_csv(run.records);
        if (!f) throw IoError(fmt::format("cannot write {}", (out / "scores.csv").string()));
    }
    const fs::path det_dir = out / "det";
    fs::create_directories(det_dir);
    for (const auto& c : report.result.cells) {
        if (c.degenerate) continue;
        std::ofstream f(det_dir / det_name(c), std::ios::binary);
        f << det_to_csv(det_curve(cell_scores(manifest, run, c)));
        if (!f) throw IoError(fmt::format("cannot write {}", (det_dir / det_name(c)).string()));
    }
    for (const auto& s : run.skipped) fmt::print(stderr, "skipped {}: {}\n", s.id, s.reason);
    fmt::print("{}", summary_table(report));
    return kOk;
}

int cmd_explain(const ExplainArgs& a) {
    const PromptBank bank = bank_for(a.common);
    const PromptPair& pair = bank.find(a.prompt);
    const RawImage img = decode(a.image);
    const ModelBundle model = load_bundle(a.common.bundle);

    ExplainOptions options = a.options;
    options.threads = a.common.threads;
    DigestBuilder d;
    add_bundle_digest(d, a.common.bundle);
    d.add("bank", prompt_bank_to_json(bank)).add("prompt", pair.id).add_file("image", a.image);
    d.add("segments", std::to_string(a.segments)).add("samples", std::to_string(options.n_samples));
    d.add("seed", std::to_string(options.seed)).add("kernel_width", format_real(options.kernel_width));
    d.add("ridge", format_real(options.ridge));
    print_digest(d.hex());

    const SegmentMask mask = segment(img, a.segments);
    const SaliencyMap map = explain(img, pair, model, mask, options);
    const fs::path out(a.out);
    fs::create_directories(out);
    {
        std::ofstream f(out / "saliency.json", std::ios::binary);
        f << saliency_to_json(map, mask, options, pair.id);
        if (!f) throw IoError(fmt::format("cannot write {}", (out / "saliency.json").string()));
    }
    write_png(out / "overlay.png", saliency_overlay(img, mask, map));
    fmt::print("segments {} ({}x{}), fit_quality {}, seed {}\n", mask.n_segments, mask.rows, mask.cols,
               format_real(map.fit_quality), map.seed);
    return kOk;
}

int cmd_make_toy(const MakeToyArgs& a) {
    make_toy_bundle(a.seed, a.dim, a.out);
    fmt::print("wrote toy bundle to {}\n", a.out);
    if (a.backbones) {
        for (const auto& p : make_toy_backbones(a.seed, fs::path(a.out) / "backbones")) fmt::print("wrote {}\n", p.string());
    }
    return kOk;
}

int cmd_export_report(const ExportArgs& a) {
    std::ifstream in(a.result, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot read {}", a.result));
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const RunReport report = report_from_json(text);
    const fs::path out(a.out);
    if (a.format == "json") {
        fs::create_directories(out);
        std::ofstream f(out / "results.json", std::ios::binary);
        f << report_to_json(report);
        if (!f) throw IoError(fmt::format("cannot write {}", (out / "results.json").string()));
    } else {
        write_report(report, out);
        fs::remove(out / "results.json");
    }
    fmt::print("{}", summary_table(report));
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-shot morphing attack detection with a dual image-text encoder"};
    app.require_subcommand(1);

    ClassifyArgs classify_args;
    auto* classify = app.add_subcommand("classify", "Score one image against every prompt pair");
    classify->add_option("--image", classify_args.image, "Face image (PNG or JPEG)")->required();
    add_common(classify, classify_args.common);

    EvaluateArgs eval_args;
    auto* evaluate = app.add_subcommand("evaluate", "Run the prompt, cell and model comparison experiments");
    evaluate->add_option("--manifest", eval_args.manifest, "Evaluation manifest (CSV or JSON)")->required();
    evaluate->add_option("--out", eval_args.out, "Output directory")->required();
    evaluate->add_option("--target-macer", eval_args.target_macer, "Attack error rate of the operating point");
    evaluate->add_option("--seed", eval_args.seed, "Run seed, recorded in the digest");
    evaluate->add_option("--baseline", eval_args.baselines, "Image-only backbone graph; repeatable");
    evaluate->add_option("--reference", eval_args.reference, "Bona fide manifest for the baseline prototypes");
    add_common(evaluate, eval_args.common);

    ExplainArgs explain_args;
    auto* explain_cmd = app.add_subcommand("explain", "Grid LIME saliency for one image and prompt pair");
    explain_cmd->add_option("--image", explain_args.image, "Face image")->required();
    explain_cmd->add_option("--prompt", explain_args.prompt, "Prompt pair id")->required();
    explain_cmd->add_option("--out", explain_args.out, "Output directory")->required();
    explain_cmd->add_option("--segments", explain_args.segments, "Grid segments")->check(CLI::PositiveNumber);
    explain_cmd->add_option("--samples", explain_args.options.n_samples, "Perturbed samples");
    explain_cmd->add_option("--seed", explain_args.options.seed, "Sampling seed");
    explain_cmd->add_option("--kernel-width", explain_args.options.kernel_width, "Kernel width (0 = 0.25*sqrt(segments))")
        ->check(CLI::NonNegativeNumber);
    explain_cmd->add_option("--ridge", explain_args.options.ridge, "Ridge strength")->check(CLI::NonNegativeNumber);
    add_common(explain_cmd, explain_args.common);

    MakeToyArgs toy_args;
    auto* make_toy = app.add_subcommand("make-toy", "Write a small deterministic bundle for tests and demos");
    make_toy->add_option("--out", toy_args.out, "Bundle directory")->required();
    make_toy->add_option("--seed", toy_args.seed, "Weight seed");
    make_toy->add_option("--dim", toy_args.dim, "Embedding width")->check(CLI::Range(2, 4096));
    make_toy->add_flag("--backbones", toy_args.backbones, "Also write three toy image-only backbones");

    ExportArgs export_args;
    auto* export_report = app.add_subcommand("export-report", "Re-emit a results.json as JSON or CSV tables");
    export_report->add_option("--result", export_args.result, "results.json of an evaluate run")->required();
    export_report->add_option("--out", export_args.out, "Output directory")->required();
    export_report->add_option("--format", export_args.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*classify) return cmd_classify(classify_args);
        if (*evaluate) return cmd_evaluate(eval_args);
        if (*explain_cmd) return cmd_explain(explain_args);
        if (*make_toy) return cmd_make_toy(toy_args);
        if (*export_report) return cmd_export_report(export_args);
    } catch (const UsageError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kUsage;
    } catch (const InferenceError& e) {
        fmt::print(stderr, "inference error: {}\n", e.what());
        return kInference;
    } catch (const SingularFitError& e) {
        fmt::print(stderr, "explain error: {}\n", e.what());
        return kInference;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kData;
    }
    return kUsage;
}
