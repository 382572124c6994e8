#include "zsmad/report.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include "io_util.hpp"
#include "zsmad/errors.hpp"

namespace zsmad {

namespace {

using json = nlohmann::ordered_json;

json op_json(bool degenerate, const OperatingPoint& op) {
    if (degenerate) return {{"achieved_macer", nullptr}, {"bpcer", nullptr}, {"threshold", nullptr}, {"reached", nullptr}};
    return {{"achieved_macer", op.achieved_macer}, {"bpcer", op.bpcer}, {"threshold", op.threshold}, {"reached", op.reached}};
}

OperatingPoint op_from(const nlohmann::json& j, double target) {
    OperatingPoint op;
    op.target_macer = target;
    if (j.at("bpcer").is_null()) return op;
    op.achieved_macer = j.at("achieved_macer").get<double>();
    op.bpcer = j.at("bpcer").get<double>();
    op.threshold = j.at("threshold").get<double>();
    op.reached = j.at("reached").get<bool>();
    return op;
}

json stat_json(const AggregateStat& a) {
    json j;
    j["group"] = a.group;
    j["key"] = a.key();
    j["n"] = a.n;
    for (auto [name, v] : {std::pair{"mean", a.mean}, {"min", a.min}, {"q1", a.q1}, {"median", a.median}, {"q3", a.q3}, {"max", a.max}}) {
        j[name] = v;
    }
    return j;
}

template <class T, class Parse>
T parse_enum(const nlohmann::json& j, const char* key, Parse parse) {
    const auto s = j.at(key).get<std::string>();
    const auto v = parse(s);
    if (!v) throw ParseError(fmt::format("result JSON: unknown {} '{}'", key, s));
    return *v;
}

std::optional<PromptCategory> parse_category(std::string_view s) {
    if (s == "short") return PromptCategory::Short;
    if (s == "long") return PromptCategory::Long;
    return std::nullopt;
}

std::string opt_real(bool degenerate, double v) { return degenerate ? "" : format_real(v); }

}  // namespace

std::string format_real(double v) { return fmt::format("{:.10g}", v); }

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string scores_to_csv(std::span<const ScoreRecord> records) {
    std::string out = "sample_id,prompt_id,p_morph,cos_bonafide,cos_morph,predicted_text\n";
    for (const auto& r : records) {
        out += fmt::format("{},{},{},{},{},{}\n", csv_field(r.sample_id), csv_field(r.prompt_id), format_real(r.p_morph),
                           format_real(r.cos_bonafide), format_real(r.cos_morph), csv_field(r.predicted_text));
    }
    return out;
}

std::string det_to_csv(std::span<const DetPoint> curve) {
    std::string out = "threshold,macer,bpcer\n";
    for (const auto& p : curve) out += fmt::format("{},{},{}\n", format_real(p.threshold), format_real(p.macer), format_real(p.bpcer));
    return out;
}

std::string cells_to_csv(const ExperimentResult& result) {
    std::string out = "prompt_id,category,generator,medium,n_bonafide,n_morph,degenerate,achieved_macer,bpcer,threshold\n";
    for (const auto& c : result.cells) {
        out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", csv_field(c.prompt_id), to_string(c.category),
                           to_string(c.generator), to_string(c.medium), c.n_bonafide, c.n_morph, c.degenerate ? 1 : 0,
                           opt_real(c.degenerate, c.op.achieved_macer), opt_real(c.degenerate, c.op.bpcer),
                           opt_real(c.degenerate, c.op.threshold));
    }
    return out;
}

std::string aggregates_to_csv(std::span<const AggregateStat> stats) {
    std::string out = "group,prompt_id,generator,medium,category,n,mean,min,q1,median,q3,max\n";
    for (const auto& a : stats) {
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", a.group, csv_field(a.prompt_id.value_or("")),
                           a.generator ? to_string(*a.generator) : "", a.medium ? to_string(*a.medium) : "",
                           a.category ? to_string(*a.category) : "", a.n, format_real(a.mean), format_real(a.min),
                           format_real(a.q1), format_real(a.median), format_real(a.q3), format_real(a.max));
    }
    return out;
}

std::string comparison_to_csv(std::span<const ComparisonRow> rows) {
    std::string out = "model,medium,prompt_id,n_bonafide,n_morph,degenerate,achieved_macer,bpcer,threshold\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{},{},{},{},{},{},{}\n", csv_field(r.model), to_string(r.medium), csv_field(r.prompt_id),
                           r.n_bonafide, r.n_morph, r.degenerate ? 1 : 0, opt_real(r.degenerate, r.op.achieved_macer),
                           opt_real(r.degenerate, r.op.bpcer), opt_real(r.degenerate, r.op.threshold));
    }
    return out;
}

std::string skipped_to_csv(std::span<const SkippedSample> skipped) {
    std::string out = "sample_id,reason\n";
    for (const auto& s : skipped) out += fmt::format("{},{}\n", csv_field(s.id), csv_field(s.reason));
    return out;
}

RunReport RunReport::assemble(std::string digest, PromptBank bank, ExperimentResult result, std::vector<ComparisonRow> comparison) {
    RunReport r;
    r.config_digest = std::move(digest);
    r.experiment2 = zsmad::experiment2(result);
    r.experiment3 = zsmad::experiment3(result, bank);
    r.bank = std::move(bank);
    r.result = std::move(result);
    r.comparison = std::move(comparison);
    return r;
}

std::string report_to_json(const RunReport& report) {
    json doc;
    doc["config_digest"] = report.config_digest;
    doc["target_macer"] = report.result.target_macer;
    json prompts = json::array();
    for (const auto& p : report.bank.pairs) {
        prompts.push_back({{"id", p.id}, {"bonafide_text", p.bonafide_text}, {"morph_text", p.morph_text},
                           {"category", to_string(p.category)}});
    }
    doc["prompts"] = std::move(prompts);
    json cells = json::array();
    for (const auto& c : report.result.cells) {
        json j = {{"prompt_id", c.prompt_id}, {"category", to_string(c.category)}, {"generator", to_string(c.generator)},
                  {"medium", to_string(c.medium)}, {"n_bonafide", c.n_bonafide}, {"n_morph", c.n_morph},
                  {"degenerate", c.degenerate}};
        j.update(op_json(c.degenerate, c.op));
        cells.push_back(std::move(j));
    }
    doc["per_cell"] = std::move(cells);
    json e2 = json::array();
    for (const auto& a : report.experiment2) e2.push_back(stat_json(a));
    json e3 = json::array();
    for (const auto& a : report.experiment3.per_prompt) e3.push_back(stat_json(a));
    doc["aggregates"] = {{"experiment2", std::move(e2)},
                         {"experiment3", {{"per_prompt", std::move(e3)}, {"best_prompt", report.experiment3.best_prompt}}}};
    json rows = json::array();
    for (const auto& r : report.comparison) {
        json j = {{"model", r.model}, {"medium", to_string(r.medium)}, {"prompt_id", r.prompt_id},
                  {"n_bonafide", r.n_bonafide}, {"n_morph", r.n_morph}, {"degenerate", r.degenerate}};
        j.update(op_json(r.degenerate, r.op));
        rows.push_back(std::move(j));
    }
    doc["comparison"] = std::move(rows);
    json skipped = json::array();
    for (const auto& s : report.result.skipped) skipped.push_back({{"id", s.id}, {"reason", s.reason}});
    doc["skipped"] = std::move(skipped);
    return doc.dump(2) + "\n";
}

RunReport report_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("result JSON: ") + e.what());
    }
    try {
        const double target = doc.at("target_macer").get<double>();
        PromptBank bank;
        for (const auto& p : doc.at("prompts")) {
            bank.pairs.push_back({p.at("id").get<std::string>(), p.at("bonafide_text").get<std::string>(),
                                  p.at("morph_text").get<std::string>(), parse_enum<PromptCategory>(p, "category", parse_category)});
        }
        ExperimentResult result;
        result.target_macer = target;
        for (const auto& c : doc.at("per_cell")) {
            Cell cell;
            cell.prompt_id = c.at("prompt_id").get<std::string>();
            cell.category = parse_enum<PromptCategory>(c, "category", parse_category);
            cell.generator = parse_enum<Generator>(c, "generator", parse_generator);
            cell.medium = parse_enum<Medium>(c, "medium", parse_medium);
            cell.n_bonafide = c.at("n_bonafide").get<size_t>();
            cell.n_morph = c.at("n_morph").get<size_t>();
            cell.degenerate = c.at("degenerate").get<bool>();
            cell.op = op_from(c, target);
            result.cells.push_back(std::move(cell));
        }
        for (const auto& s : doc.at("skipped")) result.skipped.push_back({s.at("id").get<std::string>(), s.at("reason").get<std::string>()});
        std::vector<ComparisonRow> rows;
        for (const auto& r : doc.at("comparison")) {
            ComparisonRow row;
            row.model = r.at("model").get<std::string>();
            row.medium = parse_enum<Medium>(r, "medium", parse_medium);
            row.prompt_id = r.at("prompt_id").get<std::string>();
            row.n_bonafide = r.at("n_bonafide").get<size_t>();
            row.n_morph = r.at("n_morph").get<size_t>();
            row.degenerate = r.at("degenerate").get<bool>();
            row.op = op_from(r, target);
            rows.push_back(std::move(row));
        }
        return RunReport::assemble(doc.at("config_digest").get<std::string>(), std::move(bank), std::move(result), std::move(rows));
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("result JSON: ") + e.what());
    }
}

std::string summary_table(const RunReport& report) {
    std::string out = fmt::format("BPCER @ MACER = {:g}%\n", report.result.target_macer * 100.0);
    out += fmt::format("{:<14} {:<8} {:<8} {:>10} {:>10}\n", "model", "medium", "prompt", "bpcer(%)", "macer(%)");
    for (const auto& r : report.comparison) {
        out += fmt::format("{:<14} {:<8} {:<8} {:>10} {:>10}\n", r.model, to_string(r.medium), r.prompt_id.empty() ? "-" : r.prompt_id,
                           r.degenerate ? "n/a" : fmt::format("{:.2f}", r.op.bpcer * 100.0),
                           r.degenerate ? "n/a" : fmt::format("{:.2f}", r.op.achieved_macer * 100.0));
    }
    const auto& best = report.experiment3.best_prompt;
    out += fmt::format("best prompt across cells: {}\n", best.empty() ? "none" : best);
    const auto degenerate = report.result.degenerate_cells().size();
    out += fmt::format("cells: {} ({} degenerate), skipped samples: {}\n", report.result.cells.size(), degenerate,
                       report.result.skipped.size());
    return out;
}

void write_report(const RunReport& report, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError(fmt::format("cannot create {}: {}", out_dir.string(), ec.message()));
    detail::write_file(out_dir / "results.json", report_to_json(report));
    detail::write_file(out_dir / "cells.csv", cells_to_csv(report.result));
    detail::write_file(out_dir / "aggregates.csv", aggregates_to_csv(report.experiment2));
    detail::write_file(out_dir / "prompts.csv", aggregates_to_csv(report.experiment3.per_prompt));
    detail::write_file(out_dir / "table1.csv", comparison_to_csv(report.comparison));
    detail::write_file(out_dir / "skipped.csv", skipped_to_csv(report.result.skipped));
}

}  // namespace zsmad
