#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "delta/harness.hpp"

namespace delta::report {

// Episode reports as JSON Lines (one object per row) or CSV with the fixed
// header: method,scenario,rho,pi,B,alpha,lambda,seed,acc_mean_class,
// acc_overall,pred_std,pred_range,duration_ms. Doubles carry 17 significant
// digits, so parse(write(rows)) reproduces every numeric field bit-exactly.
// Unused rho/pi are empty CSV cells and JSON nulls.

void write_jsonl(std::ostream& out, const std::vector<harness::ReportRow>& rows);
void write_csv(std::ostream& out, const std::vector<harness::ReportRow>& rows);

// Dispatches on extension: .jsonl/.json -> JSON Lines, .csv -> CSV.
void write_file(const std::string& path, const std::vector<harness::ReportRow>& rows);

// Throws the same ConfigError write_file would for an unsupported extension,
// without writing anything. Lets callers reject a bad report path before
// spending work producing the rows.
void validate_path(const std::string& path);

std::vector<harness::ReportRow> read_jsonl(std::istream& in);
std::vector<harness::ReportRow> read_csv(std::istream& in);
std::vector<harness::ReportRow> read_file(const std::string& path);

}  // namespace delta::report
