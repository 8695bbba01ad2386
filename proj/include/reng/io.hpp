#pragma once
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "reng/simulation.hpp"

namespace reng {

// Shortest text that parses back to the same double ("inf", "nan" included).
std::string format_number(double x);
double parse_number(const std::string& s, const std::string& where);

// policies.csv: policy_id, age_at_origin, gender, V, C, as_of, then one column per extra covariate.
void write_policies_csv(std::ostream& os, const std::vector<TransactionRecord>& records);
// transactions.csv: policy_id, time, event_type, claimed_onset, adjud_from, adjud_to, eligible_from, eligible_to.
void write_transactions_csv(std::ostream& os, const std::vector<TransactionRecord>& records);

// Records in policies.csv order, events in file order. Without an as_of column every record is observed
// to default_as_of. Every record is validated; errors name the file and line.
std::vector<TransactionRecord> read_portfolio_csv(std::istream& policies, std::istream& transactions,
                                                  double default_as_of);
std::vector<TransactionRecord> load_portfolio(const std::filesystem::path& policies,
                                              const std::filesystem::path& transactions, double default_as_of);

// paths.csv: policy_id, time, to_state.
void write_paths_csv(std::ostream& os, const std::vector<TransactionRecord>& records,
                     const std::vector<JumpPath>& paths);
std::map<std::string, std::vector<Jump>> read_paths_csv(std::istream& is);

struct ReserveRow {
  ReserveBreakdown reserve;
  double naive = 0.0;
};

void write_reserves_csv(std::ostream& os, const PortfolioReport& report);
std::vector<ReserveRow> read_reserves_csv(std::istream& is);

void write_runoff_csv(std::ostream& os, const RunoffReport& report);
std::vector<RunoffPeriod> read_runoff_csv(std::istream& is);

// Portfolio reserve by category for each method, one row per bar segment.
struct CategoryBar {
  std::string method;
  Category category;
  long count = 0;
  double mean = 0.0;
  double portfolio = 0.0;
};
void write_category_csv(std::ostream& os, const std::vector<CategoryBar>& bars);
std::vector<CategoryBar> read_category_csv(std::istream& is);

json read_json_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& content);

}  // namespace reng
