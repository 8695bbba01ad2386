#pragma once
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "reng/estimation.hpp"
#include "reng/io.hpp"

namespace reng {

enum ExitCode { kExitOk = 0, kExitRuntime = 1, kExitConfig = 2, kExitVerdict = 3 };

enum class Command { Simulate, Estimate, Reserve, ValidateRunoff };
Command parse_command(const std::string& s);

struct RunOptions {
  Command command = Command::Simulate;
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  int threads = 0;  // 0: OpenMP default
};

// --threads wins, then RESERVE_ENGINE_THREADS, then 0.
int resolve_threads(std::optional<int> flag);

json runoff_config_to_json(const RunoffConfig& c);
RunoffConfig runoff_config_from_json(const json& j);

// Category totals on a deterministic sample of at most n policies per category
// (all policies when n <= 0), and the portfolio bars obtained by scaling the sample mean by the category count.
struct CategoryTable {
  std::map<Category, CategorySummary> sample;
  std::vector<CategoryBar> bars;
};
CategoryTable category_table(const PortfolioReport& report, long per_category, std::uint64_t seed);
std::string format_category_table(const CategoryTable& t);

// Runs one command; relative paths in the config resolve against the config's directory.
// Returns kExitOk or kExitVerdict and throws on failure.
int run_command(const RunOptions& opt, std::ostream& out);

// Parses argv and maps exceptions to exit codes.
int cli_main(int argc, char** argv);

}  // namespace reng
