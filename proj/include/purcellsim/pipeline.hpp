#pragma once

#include <string>
#include <vector>

#include "purcellsim/config.hpp"
#include "purcellsim/report.hpp"
#include "purcellsim/timetag.hpp"

namespace purcellsim {

struct Table {
  std::string name;  // file stem
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void write_csv(std::ostream& os) const;
};

enum class RunStatus { ok = 0, undefined_estimate = 3 };

struct RunArtifacts {
  Report report;
  std::vector<Table> tables;
  std::vector<std::pair<std::string, TimeTagStream>> streams;  // (file stem, stream)
  RunStatus status = RunStatus::ok;

  const Table& table(const std::string& name) const;
};

struct RunOptions {
  Execution mode = Execution::parallel;
  int threads = 0;  // 0: take run.threads, then the OpenMP default
};

// Simulation followed by the analyses of the configured experiment.
RunArtifacts run_config(const RunConfig& config, const RunOptions& options = {});

// Estimators only, on an existing stream: binned g2 and an arrival-time
// lifetime fit. An estimator without a defined value is reported as a
// status entry and sets RunStatus::undefined_estimate.
RunArtifacts analyze_stream(const TimeTagStream& stream, const RunConfig& config);

// Writes report.txt, config.ini, <table>.csv and time-tag files into
// out_dir. Every file goes to a temporary name first and all are renamed
// once every write succeeded; on failure the temporaries are removed.
void write_artifacts(const std::string& out_dir, const RunArtifacts& artifacts,
                     const RunConfig& config);

}  // namespace purcellsim
