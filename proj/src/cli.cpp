#include "reng/cli.hpp"

#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "reng/errors.hpp"
#include "reng/jsonutil.hpp"
#include "reng/rng.hpp"

namespace reng {

namespace fs = std::filesystem;

namespace {

constexpr Category kCategories[] = {Category::CBNR, Category::RBNSi, Category::RBNSr, Category::Settled};
constexpr std::uint64_t kSamplePurpose = 0x5a;

struct Context {
  fs::path base;
  fs::path out;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  json manifest = json::object();

  fs::path resolve(const std::string& p) const {
    fs::path x(p);
    return x.is_absolute() ? x : base / x;
  }
  void emit(const std::string& name, const std::string& content) {
    write_file(out / name, content);
    manifest["files"][name] = fnv1a_hex(content);
  }
};

// A JSON value given inline or as a path to a JSON file.
json inline_or_file(const Context& c, const json& v) {
  return v.is_string() ? read_json_file(c.resolve(v.get<std::string>())) : v;
}

std::vector<TransactionRecord> load_data(const Context& c, const json& j, double default_as_of) {
  check_keys(j, {"policies", "transactions"}, "data");
  return load_portfolio(c.resolve(get_req<std::string>(j, "policies", "data")),
                        c.resolve(get_req<std::string>(j, "transactions", "data")), default_as_of);
}

template <class F>
std::string to_text(F&& write) {
  std::ostringstream os;
  write(os);
  return os.str();
}

std::string records_digest(const std::vector<TransactionRecord>& recs) {
  return fnv1a_hex(to_text([&](std::ostream& os) { write_policies_csv(os, recs); }) +
                   to_text([&](std::ostream& os) { write_transactions_csv(os, recs); }));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_simulate(Context& c, const json& j) {
  check_keys(j, {"output_dir", "scenario", "emit_paths"}, "simulate config");
  auto sj = inline_or_file(c, get_req<json>(j, "scenario", "simulate config"));
  auto scenario = scenario_from_json(sj);
  if (c.seed) scenario.seed = *c.seed;
  c.manifest["seed"] = scenario.seed;
  c.manifest["parameter_digest"] = fnv1a_hex(model_parameters_to_json(scenario.params).dump());
  c.manifest["scenario_digest"] = fnv1a_hex(scenario_to_json(scenario).dump());

  const auto t0 = std::chrono::steady_clock::now();
  const auto p = simulate_portfolio(scenario, c.threads);
  spdlog::info("simulated {} policies in {:.2f} s", scenario.size, seconds_since(t0));

  c.emit("policies.csv", to_text([&](std::ostream& os) { write_policies_csv(os, p.records); }));
  c.emit("transactions.csv", to_text([&](std::ostream& os) { write_transactions_csv(os, p.records); }));
  c.emit("full_policies.csv", to_text([&](std::ostream& os) { write_policies_csv(os, p.full); }));
  c.emit("full_transactions.csv", to_text([&](std::ostream& os) { write_transactions_csv(os, p.full); }));
  if (get_or(j, "emit_paths", true))
    c.emit("paths.csv", to_text([&](std::ostream& os) { write_paths_csv(os, p.records, p.paths); }));
  c.emit("scenario.json", scenario_to_json(scenario).dump(2) + "\n");
  return kExitOk;
}

int cmd_estimate(Context& c, const json& j) {
  check_keys(j, {"output_dir", "data", "eta", "template", "estimation", "bootstrap"}, "estimate config");
  const double eta = get_req<double>(j, "eta", "estimate config");
  const auto tmpl = model_parameters_from_json(inline_or_file(c, get_req<json>(j, "template", "estimate config")));
  EstimationConfig cfg;
  if (j.contains("estimation")) cfg = estimation_config_from_json(j["estimation"]);
  cfg.threads = c.threads;
  const auto records = load_data(c, get_req<json>(j, "data", "estimate config"), eta);
  c.manifest["data_digest"] = records_digest(records);

  const auto t0 = std::chrono::steady_clock::now();
  const auto r = estimate(records, eta, tmpl, cfg);
  spdlog::info("estimated on {} policies in {:.2f} s", records.size(), seconds_since(t0));
  c.manifest["parameter_digest"] = fnv1a_hex(model_parameters_to_json(r.params).dump());
  c.emit("params.json", model_parameters_to_json(r.params).dump(2) + "\n");
  c.emit("fit_report.txt", fit_report(r));

  if (j.contains("bootstrap")) {
    const auto& b = j["bootstrap"];
    check_keys(b, {"replicates", "seed"}, "bootstrap");
    const std::uint64_t seed = c.seed ? *c.seed : get_or<std::uint64_t>(b, "seed", 1);
    c.manifest["seed"] = seed;
    const auto reps = bootstrap(records, eta, tmpl, cfg, get_req<int>(b, "replicates", "bootstrap"), seed);
    json arr = json::array();
    for (const auto& p : reps) arr.push_back(model_parameters_to_json(p));
    c.emit("bootstrap.json", arr.dump(2) + "\n");
  }
  return kExitOk;
}

struct ReservingModel {
  ModelParameters params;
  PaymentSpec product;
  InterestCurve curve;
  Numerics num;
};

ReservingModel reserving_model(const Context& c, const json& j, const ScenarioConfig* scenario) {
  ReservingModel m;
  if (scenario) m = {scenario->params, scenario->product, scenario->curve, scenario->num};
  if (j.contains("parameters")) m.params = model_parameters_from_json(inline_or_file(c, j["parameters"]));
  else if (!scenario) throw ConfigError("parameters missing");
  if (j.contains("product")) m.product = payment_spec_from_json(j["product"]);
  if (j.contains("interest")) m.curve = interest_from_json(j["interest"]);
  if (j.contains("numerics")) m.num = numerics_from_json(j["numerics"]);
  m.product.validate();
  return m;
}

int cmd_reserve(Context& c, const json& j, std::ostream& out) {
  check_keys(j,
             {"output_dir", "data", "valuation_date", "parameters", "product", "interest", "numerics",
              "sample_per_category", "seed"},
             "reserve config");
  const double t = get_req<double>(j, "valuation_date", "reserve config");
  const auto m = reserving_model(c, j, nullptr);
  const auto loaded = load_data(c, get_req<json>(j, "data", "reserve config"), t);
  // policies that left before the valuation date are no longer in force
  std::vector<TransactionRecord> records;
  for (const auto& r : loaded) {
    if (r.policy.C < t) continue;
    if (r.as_of < t) throw ConfigError("policy " + r.policy.id + " observed only to " + format_number(r.as_of));
    records.push_back(r);
  }
  if (records.size() < loaded.size())
    spdlog::info("{} policies censored before the valuation date skipped", loaded.size() - records.size());
  const std::uint64_t seed = c.seed ? *c.seed : get_or<std::uint64_t>(j, "seed", 1);
  const long per_category = get_or<long>(j, "sample_per_category", 0);
  ReserveEngine engine(m.params, m.product, m.curve, m.num);
  c.manifest["seed"] = seed;
  c.manifest["parameter_digest"] = engine.digest();
  c.manifest["data_digest"] = records_digest(records);

  const auto t0 = std::chrono::steady_clock::now();
  const auto report = engine.portfolio_reserve(records, t, c.threads);
  spdlog::info("reserved {} policies in {:.2f} s", records.size(), seconds_since(t0));
  const auto table = category_table(report, per_category, seed);
  const auto text = format_category_table(table);
  c.emit("reserves.csv", to_text([&](std::ostream& os) { write_reserves_csv(os, report); }));
  c.emit("categories.csv", to_text([&](std::ostream& os) { write_category_csv(os, table.bars); }));
  c.emit("summary.txt", text);
  out << text;
  return kExitOk;
}

int cmd_validate_runoff(Context& c, const json& j, std::ostream& out) {
  check_keys(j, {"output_dir", "data", "scenario", "parameters", "product", "interest", "numerics", "runoff"},
             "validate-runoff config");
  if (j.contains("data") == j.contains("scenario"))
    throw ConfigError("validate-runoff config: give exactly one of data and scenario");
  const auto rc = runoff_config_from_json(get_or(j, "runoff", json::object()));
  std::optional<ScenarioConfig> scenario;
  std::vector<TransactionRecord> full;
  if (j.contains("scenario")) {
    scenario = scenario_from_json(inline_or_file(c, j["scenario"]));
    if (c.seed) scenario->seed = *c.seed;
    c.manifest["seed"] = scenario->seed;
    const auto t0 = std::chrono::steady_clock::now();
    full = simulate_portfolio(*scenario, c.threads).full;
    spdlog::info("simulated {} policies in {:.2f} s", scenario->size, seconds_since(t0));
  } else {
    full = load_data(c, j["data"], kNaN);
    for (const auto& r : full)
      if (std::isnan(r.as_of)) throw ConfigError("validate-runoff: data must carry an as_of column");
  }
  const auto m = reserving_model(c, j, scenario ? &*scenario : nullptr);
  ReserveEngine engine(m.params, m.product, m.curve, m.num);
  c.manifest["parameter_digest"] = engine.digest();
  c.manifest["data_digest"] = records_digest(full);

  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = runoff_validate(full, engine, rc, c.threads);
  spdlog::info("run-off over {} policies in {:.2f} s", full.size(), seconds_since(t0));
  const std::string verdict = fmt::format("mean standardized increment {:.6f}\nstatistic {:.6f} (band {})\n{}\n",
                                          rep.mean_z, rep.statistic, format_number(rc.band),
                                          rep.flat ? "FLAT" : "DRIFT");
  c.emit("runoff.csv", to_text([&](std::ostream& os) { write_runoff_csv(os, rep); }));
  c.emit("verdict.txt", verdict);
  out << verdict;
  return rep.flat ? kExitOk : kExitVerdict;
}

}  // namespace

Command parse_command(const std::string& s) {
  if (s == "simulate") return Command::Simulate;
  if (s == "estimate") return Command::Estimate;
  if (s == "reserve") return Command::Reserve;
  if (s == "validate-runoff") return Command::ValidateRunoff;
  throw ConfigError("unknown command '" + s + "'");
}

int resolve_threads(std::optional<int> flag) {
  if (flag) {
    if (*flag < 0) throw ConfigError("--threads must be non-negative");
    return *flag;
  }
  if (const char* env = std::getenv("RESERVE_ENGINE_THREADS"); env && *env) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 0 || n > 4096) throw ConfigError(std::string("RESERVE_ENGINE_THREADS invalid: ") + env);
    return static_cast<int>(n);
  }
  return 0;
}

json runoff_config_to_json(const RunoffConfig& c) {
  return {{"start", c.start}, {"period", c.period}, {"periods", c.periods}, {"band", c.band}};
}

RunoffConfig runoff_config_from_json(const json& j) {
  check_keys(j, {"start", "period", "periods", "band"}, "runoff");
  RunoffConfig c;
  c.start = get_or(j, "start", c.start);
  c.period = get_or(j, "period", c.period);
  c.periods = get_or(j, "periods", c.periods);
  c.band = get_or(j, "band", c.band);
  if (!(c.period > 0.0) || c.periods < 1 || !(c.band > 0.0) || !std::isfinite(c.start))
    throw ConfigError("runoff: period, periods and band must be positive");
  return c;
}

CategoryTable category_table(const PortfolioReport& report, long per_category, std::uint64_t seed) {
  CategoryTable out;
  for (Category cat : kCategories) {
    std::vector<std::pair<double, size_t>> members;
    for (size_t k = 0; k < report.policies.size(); ++k)
      if (report.policies[k].category == cat) members.push_back({CounterRng(seed, k, kSamplePurpose).uniform(), k});
    const long count = static_cast<long>(members.size());
    if (per_category > 0 && count > per_category) {
      std::sort(members.begin(), members.end());
      members.resize(per_category);
      std::sort(members.begin(), members.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    }
    CategorySummary s;
    for (const auto& [key, k] : members) {
      ++s.count;
      s.proposed += report.policies[k].total;
      s.naive += report.naive[k];
    }
    out.sample[cat] = s;
    const double scale = s.count ? static_cast<double>(count) / s.count : 0.0;
    out.bars.push_back({"proposed", cat, count, s.count ? s.proposed / s.count : 0.0, s.proposed * scale});
    out.bars.push_back({"naive", cat, count, s.count ? s.naive / s.count : 0.0, s.naive * scale});
  }
  return out;
}

std::string format_category_table(const CategoryTable& t) {
  std::string s = fmt::format("{:<26}", "");
  for (Category c : kCategories) s += fmt::format("{:>16}", category_name(c));
  s += "\n";
  auto row = [&](const char* name, auto&& value) {
    s += fmt::format("{:<26}", name);
    for (Category c : kCategories) s += fmt::format("{:>16.2f}", value(t.sample.at(c)));
    s += "\n";
  };
  s += fmt::format("{:<26}", "Policies");
  for (Category c : kCategories) s += fmt::format("{:>16}", t.sample.at(c).count);
  s += "\n";
  row("Proposed method", [](const CategorySummary& x) { return x.proposed; });
  row("Naive method", [](const CategorySummary& x) { return x.naive; });
  row("Absolute difference", [](const CategorySummary& x) { return x.difference(); });
  row("Relative difference (%)", [](const CategorySummary& x) { return x.relative_difference(); });
  double proposed = 0.0, naive = 0.0;
  for (const auto& b : t.bars) (b.method == "proposed" ? proposed : naive) += b.portfolio;
  s += fmt::format("\nPortfolio reserve: proposed {:.2f}, naive {:.2f}, naive relative to proposed {:+.2f}%\n",
                   proposed, naive, proposed != 0.0 ? 100.0 * (naive - proposed) / proposed : 0.0);
  return s;
}

int run_command(const RunOptions& opt, std::ostream& out) {
  Context c;
  c.base = opt.config.has_parent_path() ? opt.config.parent_path() : fs::path(".");
  c.threads = opt.threads;
  c.seed = opt.seed;
  const json j = read_json_file(opt.config);
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  c.out = c.resolve(get_req<std::string>(j, "output_dir", "config"));
  const char* names[] = {"simulate", "estimate", "reserve", "validate-runoff"};
  c.manifest["command"] = names[static_cast<int>(opt.command)];
  c.manifest["config_digest"] = fnv1a_hex(j.dump());
  c.manifest["files"] = json::object();
  int code = kExitOk;
  switch (opt.command) {
    case Command::Simulate: code = cmd_simulate(c, j); break;
    case Command::Estimate: code = cmd_estimate(c, j); break;
    case Command::Reserve: code = cmd_reserve(c, j, out); break;
    case Command::ValidateRunoff: code = cmd_validate_runoff(c, j, out); break;
  }
  c.manifest["exit_code"] = code;
  write_file(c.out / "manifest.json", c.manifest.dump(2) + "\n");
  return code;
}

int cli_main(int argc, char** argv) {
  auto log = spdlog::get("reserve-engine");
  if (!log) {
    log = spdlog::stderr_logger_st("reserve-engine");
    log->set_pattern("[%l] %v");
  }
  spdlog::set_default_logger(log);

  CLI::App app{"Individual disability reserving engine"};
  app.set_version_flag("--version", "reserve-engine 1.0.0");
  std::string command, config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  app.add_option("command", command, "simulate | estimate | reserve | validate-runoff")
      ->required()
      ->check(CLI::IsMember({"simulate", "estimate", "reserve", "validate-runoff"}));
  app.add_option("--config", config, "JSON configuration file")->required();
  app.add_option("--seed", seed, "overrides the configured seed");
  app.add_option("--threads", threads, "worker threads (default: RESERVE_ENGINE_THREADS, else all cores)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  try {
    RunOptions opt;
    opt.command = parse_command(command);
    opt.config = config;
    opt.seed = seed;
    opt.threads = resolve_threads(threads);
    return run_command(opt, std::cout);
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return kExitConfig;
  } catch (const MalformedRecord& e) {
    spdlog::error("invalid data: {}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
}

}  // namespace reng
