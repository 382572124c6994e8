#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "zsmad/experiments.hpp"

namespace zsmad {

// Ten significant digits; stable across runs and platforms.
std::string format_real(double v);

// Quotes a field only when it holds a comma, quote or line break.
std::string csv_field(std::string_view s);

std::string scores_to_csv(std::span<const ScoreRecord> records);
std::string det_to_csv(std::span<const DetPoint> curve);
std::string cells_to_csv(const ExperimentResult& result);
std::string aggregates_to_csv(std::span<const AggregateStat> stats);
std::string comparison_to_csv(std::span<const ComparisonRow> rows);
std::string skipped_to_csv(std::span<const SkippedSample> skipped);

// Everything one evaluation run persists.
struct RunReport {
    std::string config_digest;
    PromptBank bank;
    ExperimentResult result;
    std::vector<AggregateStat> experiment2;
    PromptRanking experiment3;
    std::vector<ComparisonRow> comparison;

    // Recomputes both aggregate sets from the cells.
    static RunReport assemble(std::string digest, PromptBank bank, ExperimentResult result,
                              std::vector<ComparisonRow> comparison);
};

std::string report_to_json(const RunReport& report);
// Reads the cells, comparison and skipped list and recomputes the aggregates.
// Throws ParseError or SchemaError.
RunReport report_from_json(const std::string& text);

// Fixed-width text table of the comparison and the best prompt.
std::string summary_table(const RunReport& report);

// results.json plus the figure tables: cells.csv, aggregates.csv,
// prompts.csv, table1.csv and skipped.csv.
void write_report(const RunReport& report, const std::filesystem::path& out_dir);

}  // namespace zsmad
