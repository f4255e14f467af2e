#pragma once

#include <map>
#include <string>
#include <vector>

#include "asiplab/config.hpp"

namespace asiplab {

/// Result of one subcommand. `json_text` is the report without its
/// timestamp; `csv` maps file names to contents (header row first).
struct ExperimentReport {
  std::string subcommand;
  std::string json_text;
  std::map<std::string, std::string> csv;
  bool contract_ok = true;
  std::vector<std::string> violations;
};

/// thermo, gap, bounds, encoding, condition-h, assumption6, decay-base,
/// sigma2, clt, lil, coboundary, all.
const std::vector<std::string>& subcommands();
bool is_subcommand(const std::string& name);

/// Throws std::invalid_argument for an unknown subcommand; numerical
/// failures propagate as the library's exceptions.
ExperimentReport run_experiment(const std::string& subcommand, const ExperimentConfig& config);

/// <out_root>/<subcommand>-seed<seed>-<hash>
std::string report_directory(const std::string& out_root, const std::string& subcommand,
                             const ExperimentConfig& config);

/// Writes report.json (with a "timestamp" field) and the CSVs; returns the
/// directory.
std::string write_report(const ExperimentReport& report, const ExperimentConfig& config,
                         const std::string& out_root);

struct ReplayOutcome {
  int exit_code = 0;  ///< 0 identical, 2 divergent, 1 unreadable
  std::string message;
};

/// Reruns the experiment recorded in a report (path to report.json or its
/// directory) and compares report.json without the timestamp, then every
/// CSV, byte for byte.
ReplayOutcome replay_report(const std::string& path);

}  // namespace asiplab
