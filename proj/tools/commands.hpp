#pragma once

#include <ostream>

#include "antq/evaluation.hpp"
#include "run_config.hpp"

namespace antq::cli {

// Each command validates the configuration, writes `<out>/<name>.config`
// with every value materialized, and reports progress to `log`.

/// Writes data/{train,val,test}.jsonl, classes.txt and class_counts.csv.
void gen_data(const RunConfig& config, std::ostream& log);

/// Writes the stage-1 checkpoint, stage1_log.csv and stage1_metrics.json.
void train_stage1(const RunConfig& config, std::ostream& log);

/// Writes the full checkpoint and stage2_log.csv. Starts from the stage-1
/// checkpoint unless the segment encoder is disabled or stage 1 is skipped.
void train_stage2(const RunConfig& config, std::ostream& log);

/// Writes moc.csv, map.csv and metrics.json (plus an SVG when plots are on).
EvaluationReport eval(const RunConfig& config, std::ostream& log);

/// Re-renders plots from the CSVs in the output directory and prints the
/// metric tables.
void report(const RunConfig& config, std::ostream& log);

}  // namespace antq::cli
