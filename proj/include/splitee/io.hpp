#pragma once

// CSV tables and the activity score parameter file.
//
// CSV dialect: comma separated, one header row, '.' decimal point, no quoting,
// no missing values. Doubles are written in shortest round-trip form.

#include "splitee/activity.hpp"
#include "splitee/split_engine.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace splitee {

/// Throws FileNotFound, ParseError (ragged row, empty or non-numeric field,
/// duplicate column) naming the file and line.
Dataset read_csv(const std::string& path);
Dataset parse_csv(std::istream& in, const std::string& source = "<stream>");

void write_csv(const std::string& path, const Dataset& data);
void write_csv(std::ostream& out, const Dataset& data);

/// Shortest representation that parses back to the same double.
std::string format_double(double value);

/// Splits file: one column per split (any header), entries 0 or 1.
SplitAssignment read_splits(const std::string& path);

struct ScoreFile {
  static constexpr int kFormatVersion = 1;

  std::vector<std::string> covariates;
  activity::ActivityScoreParams params;
  activity::ScoreScaling scaling;
};

void write_score_file(const std::string& path, const ScoreFile& file);
/// Throws FileNotFound, ParseError (bad JSON, unknown format_version, missing key).
ScoreFile read_score_file(const std::string& path);

}  // namespace splitee
