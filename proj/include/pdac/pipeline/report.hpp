#pragma once

#include "pdac/pipeline/ablation.hpp"

namespace pdac::pipeline {

/// Flat per-run table: row, seed, mcc, accuracy, auc_roc.
void write_results_csv(const std::string& path,
                       const std::vector<RunResult>& runs);

/// Per-run values plus per-row mean and sample stddev.
void write_results_json(const std::string& path,
                        const std::vector<RunResult>& runs,
                        const std::vector<RowSummary>& summaries);

/// Box-and-whisker plot of per-seed MCC per row. Output is deterministic:
/// identical inputs yield byte-identical SVG.
void write_mcc_boxplot(const std::string& path,
                       const std::vector<RowSummary>& summaries);

}  // namespace pdac::pipeline
