#include "reng/io.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "reng/errors.hpp"

namespace reng {

namespace {

const char* const kPolicyColumns[] = {"policy_id", "age_at_origin", "gender", "V", "C", "as_of"};
const char* const kTransactionColumns[] = {"policy_id",     "time",          "event_type",  "claimed_onset",
                                           "adjud_from",    "adjud_to",      "eligible_from", "eligible_to"};
const char* const kReserveColumns[] = {"policy_id",   "t",         "category",    "total",
                                       "cbni_term",   "ibnr_term", "award_term",  "reject_term",
                                       "premium_adjustment",       "naive_total"};
const char* const kRunoffColumns[] = {"period",        "t",             "payments",      "payments_cum",
                                      "reserve_cbnr",  "reserve_rbnsi", "reserve_rbnsr", "increment",
                                      "se",            "discount",      "layer_cbnr",    "layer_rbns",
                                      "stacked"};
const char* const kCategoryColumns[] = {"method", "category", "count", "mean", "portfolio"};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  out.push_back(std::move(cell));
  return out;
}

// Header-indexed reader over a CSV stream.
class Table {
 public:
  Table(std::istream& is, std::string name) : is_(is), name_(std::move(name)) {
    std::string line;
    if (!std::getline(is_, line)) throw MalformedRecord(name_ + ": missing header row");
    header_ = split(line);
    for (size_t k = 0; k < header_.size(); ++k) {
      if (index_.count(header_[k])) throw MalformedRecord(name_ + ": duplicate column '" + header_[k] + "'");
      index_[header_[k]] = k;
    }
    line_ = 1;
  }

  const std::vector<std::string>& header() const { return header_; }
  bool has(const std::string& col) const { return index_.count(col) > 0; }
  void require(const std::string& col) const {
    if (!has(col)) throw MalformedRecord(name_ + ": missing column '" + col + "'");
  }

  bool next() {
    std::string line;
    while (std::getline(is_, line)) {
      ++line_;
      if (line.empty() || line == "\r") continue;
      row_ = split(line);
      if (row_.size() != header_.size())
        throw MalformedRecord(where() + ": expected " + std::to_string(header_.size()) + " fields, got " +
                              std::to_string(row_.size()));
      return true;
    }
    return false;
  }

  const std::string& str(const std::string& col) const { return row_[index_.at(col)]; }
  const std::string& at(size_t k) const { return row_[k]; }
  double num(const std::string& col) const { return parse_number(str(col), where() + " column " + col); }
  double opt(const std::string& col) const {
    if (!has(col) || str(col).empty()) return kNaN;
    return num(col);
  }
  int integer(const std::string& col) const {
    if (!has(col) || str(col).empty()) return 0;
    const double x = num(col);
    if (x != std::floor(x)) throw MalformedRecord(where() + ": column " + col + " must be an integer");
    return static_cast<int>(x);
  }
  std::string where() const { return name_ + " line " + std::to_string(line_); }

 private:
  std::istream& is_;
  std::string name_;
  std::vector<std::string> header_, row_;
  std::unordered_map<std::string, size_t> index_;
  long line_ = 0;
};

template <size_t N>
void header(std::ostream& os, const char* const (&cols)[N]) {
  for (size_t k = 0; k < N; ++k) os << (k ? "," : "") << cols[k];
}

std::string opt_number(double x) { return std::isnan(x) ? std::string() : format_number(x); }
std::string opt_number(const std::optional<double>& x) { return x ? format_number(*x) : std::string(); }

Category parse_category(const std::string& s, const std::string& where) {
  for (Category c : {Category::CBNR, Category::RBNSi, Category::RBNSr, Category::Settled})
    if (s == category_name(c)) return c;
  throw MalformedRecord(where + ": unknown category '" + s + "'");
}

void check_id(const std::string& id) {
  if (id.empty() || id.find_first_of(",\n\r\"") != std::string::npos)
    throw MalformedRecord("policy id '" + id + "' is empty or contains a separator");
}

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw ConfigError("cannot open " + p.string());
  return is;
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  return fmt::format("{}", x);
}

double parse_number(const std::string& s, const std::string& where) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return kNaN;
  double x = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, x);
  if (s.empty() || ec != std::errc() || ptr != end) throw MalformedRecord(where + ": not a number '" + s + "'");
  return x;
}

void write_policies_csv(std::ostream& os, const std::vector<TransactionRecord>& records) {
  std::vector<std::string> extras;
  for (const auto& r : records)
    for (const auto& [name, v] : r.policy.cov.extra)
      if (std::find(extras.begin(), extras.end(), name) == extras.end()) extras.push_back(name);
  std::sort(extras.begin(), extras.end());
  header(os, kPolicyColumns);
  for (const auto& e : extras) os << ',' << e;
  os << '\n';
  for (const auto& r : records) {
    check_id(r.policy.id);
    const auto& cov = r.policy.cov;
    os << r.policy.id << ',' << format_number(cov.age_at_origin) << ',' << gender_name(cov.gender) << ','
       << format_number(r.policy.V) << ',' << format_number(r.policy.C) << ',' << format_number(r.as_of);
    for (const auto& e : extras) os << ',' << format_number(cov.extra_value(e));
    os << '\n';
  }
}

void write_transactions_csv(std::ostream& os, const std::vector<TransactionRecord>& records) {
  header(os, kTransactionColumns);
  os << '\n';
  for (const auto& r : records) {
    check_id(r.policy.id);
    for (const auto& e : r.events) {
      const bool adj = e.type == EventType::AdjudicationMove || e.type == EventType::StopPayout;
      os << r.policy.id << ',' << format_number(e.time) << ',' << event_type_name(e.type) << ','
         << opt_number(e.claimed_onset) << ',' << (adj ? std::to_string(e.adj_from) : "") << ','
         << (adj ? std::to_string(e.adj_to) : "") << ',' << opt_number(e.eligible_from) << ','
         << opt_number(e.eligible_to) << '\n';
    }
  }
}

std::vector<TransactionRecord> read_portfolio_csv(std::istream& policies, std::istream& transactions,
                                                  double default_as_of) {
  std::vector<TransactionRecord> out;
  std::unordered_map<std::string, size_t> index;
  {
    Table t(policies, "policies.csv");
    for (const char* c : {"policy_id", "age_at_origin", "gender", "V", "C"}) t.require(c);
    std::vector<std::string> extras;
    for (const auto& h : t.header())
      if (std::find(std::begin(kPolicyColumns), std::end(kPolicyColumns), h) == std::end(kPolicyColumns))
        extras.push_back(h);
    while (t.next()) {
      TransactionRecord r;
      r.policy.id = t.str("policy_id");
      check_id(r.policy.id);
      if (!index.emplace(r.policy.id, out.size()).second)
        throw MalformedRecord(t.where() + ": duplicate policy_id " + r.policy.id);
      r.policy.cov.age_at_origin = t.num("age_at_origin");
      try {
        r.policy.cov.gender = parse_gender(t.str("gender"));
      } catch (const std::exception& e) {
        throw MalformedRecord(t.where() + ": " + e.what());
      }
      for (const auto& x : extras) r.policy.cov.set_extra(x, t.num(x));
      r.policy.V = t.num("V");
      r.policy.C = t.num("C");
      r.as_of = t.has("as_of") ? t.num("as_of") : default_as_of;
      out.push_back(std::move(r));
    }
  }
  {
    Table t(transactions, "transactions.csv");
    for (const auto& h : t.header())
      if (std::find(std::begin(kTransactionColumns), std::end(kTransactionColumns), h) ==
          std::end(kTransactionColumns))
        throw MalformedRecord("transactions.csv: unknown column '" + h + "'");
    for (const char* c : {"policy_id", "time", "event_type"}) t.require(c);
    while (t.next()) {
      auto it = index.find(t.str("policy_id"));
      if (it == index.end()) throw MalformedRecord(t.where() + ": unknown policy_id " + t.str("policy_id"));
      Event e;
      e.time = t.num("time");
      try {
        e.type = parse_event_type(t.str("event_type"));
      } catch (const std::exception& ex) {
        throw MalformedRecord(t.where() + ": " + ex.what());
      }
      e.claimed_onset = t.opt("claimed_onset");
      e.adj_from = t.integer("adjud_from");
      e.adj_to = t.integer("adjud_to");
      e.eligible_from = t.opt("eligible_from");
      e.eligible_to = t.opt("eligible_to");
      out[it->second].events.push_back(e);
    }
  }
  for (const auto& r : out) {
    try {
      validate_record(r);
    } catch (const std::exception& e) {
      throw MalformedRecord("policy " + r.policy.id + ": " + e.what());
    }
  }
  return out;
}

std::vector<TransactionRecord> load_portfolio(const std::filesystem::path& policies,
                                              const std::filesystem::path& transactions, double default_as_of) {
  auto p = open_in(policies);
  auto t = open_in(transactions);
  return read_portfolio_csv(p, t, default_as_of);
}

void write_paths_csv(std::ostream& os, const std::vector<TransactionRecord>& records,
                     const std::vector<JumpPath>& paths) {
  if (records.size() != paths.size()) throw InvalidArgument("write_paths_csv: size mismatch");
  os << "policy_id,time,to_state\n";
  for (size_t k = 0; k < paths.size(); ++k)
    for (const auto& j : paths[k].jumps)
      os << records[k].policy.id << ',' << format_number(j.time) << ',' << state_name(j.to) << '\n';
}

std::map<std::string, std::vector<Jump>> read_paths_csv(std::istream& is) {
  Table t(is, "paths.csv");
  for (const char* c : {"policy_id", "time", "to_state"}) t.require(c);
  std::map<std::string, std::vector<Jump>> out;
  while (t.next()) {
    Jump j;
    j.time = t.num("time");
    try {
      j.to = parse_state(t.str("to_state"));
    } catch (const std::exception& e) {
      throw MalformedRecord(t.where() + ": " + e.what());
    }
    out[t.str("policy_id")].push_back(j);
  }
  return out;
}

void write_reserves_csv(std::ostream& os, const PortfolioReport& report) {
  header(os, kReserveColumns);
  os << '\n';
  for (size_t k = 0; k < report.policies.size(); ++k) {
    const auto& b = report.policies[k];
    const auto& c = b.components;
    os << b.policy_id << ',' << format_number(b.t) << ',' << category_name(b.category) << ','
       << format_number(b.total) << ',' << opt_number(c.cbni_term) << ',' << opt_number(c.ibnr_term) << ','
       << opt_number(c.award_term) << ',' << opt_number(c.reject_term) << ',' << opt_number(c.premium_adjustment)
       << ',' << format_number(k < report.naive.size() ? report.naive[k] : kNaN) << '\n';
  }
}

std::vector<ReserveRow> read_reserves_csv(std::istream& is) {
  Table t(is, "reserves.csv");
  for (const char* c : kReserveColumns) t.require(c);
  auto opt = [&](const char* col) -> std::optional<double> {
    const double x = t.opt(col);
    return std::isnan(x) ? std::nullopt : std::optional<double>(x);
  };
  std::vector<ReserveRow> out;
  while (t.next()) {
    ReserveRow r;
    r.reserve.policy_id = t.str("policy_id");
    r.reserve.t = t.num("t");
    r.reserve.category = parse_category(t.str("category"), t.where());
    r.reserve.total = t.num("total");
    r.reserve.components.cbni_term = opt("cbni_term");
    r.reserve.components.ibnr_term = opt("ibnr_term");
    r.reserve.components.award_term = opt("award_term");
    r.reserve.components.reject_term = opt("reject_term");
    r.reserve.components.premium_adjustment = opt("premium_adjustment");
    r.naive = t.num("naive_total");
    out.push_back(std::move(r));
  }
  return out;
}

void write_runoff_csv(std::ostream& os, const RunoffReport& report) {
  header(os, kRunoffColumns);
  os << '\n';
  for (const auto& r : report.rows) {
    const double rbns = r.reserve_rbnsi + r.reserve_rbnsr;
    os << r.period << ',' << format_number(r.t) << ',' << format_number(r.payments) << ','
       << format_number(r.payments_cum) << ',' << format_number(r.reserve_cbnr) << ','
       << format_number(r.reserve_rbnsi) << ',' << format_number(r.reserve_rbnsr) << ','
       << format_number(r.increment) << ',' << format_number(r.se) << ',' << format_number(r.discount) << ','
       << format_number(r.discount * r.reserve_cbnr) << ',' << format_number(r.discount * rbns) << ','
       << format_number(r.payments_cum + r.discount * (rbns + r.reserve_cbnr)) << '\n';
  }
}

std::vector<RunoffPeriod> read_runoff_csv(std::istream& is) {
  Table t(is, "runoff.csv");
  for (const char* c : kRunoffColumns) t.require(c);
  std::vector<RunoffPeriod> out;
  while (t.next()) {
    RunoffPeriod r;
    r.period = t.integer("period");
    r.t = t.num("t");
    r.payments = t.num("payments");
    r.payments_cum = t.num("payments_cum");
    r.reserve_cbnr = t.num("reserve_cbnr");
    r.reserve_rbnsi = t.num("reserve_rbnsi");
    r.reserve_rbnsr = t.num("reserve_rbnsr");
    r.increment = t.num("increment");
    r.se = t.num("se");
    r.discount = t.num("discount");
    out.push_back(r);
  }
  return out;
}

void write_category_csv(std::ostream& os, const std::vector<CategoryBar>& bars) {
  header(os, kCategoryColumns);
  os << '\n';
  for (const auto& b : bars)
    os << b.method << ',' << category_name(b.category) << ',' << b.count << ',' << format_number(b.mean) << ','
       << format_number(b.portfolio) << '\n';
}

std::vector<CategoryBar> read_category_csv(std::istream& is) {
  Table t(is, "categories.csv");
  for (const char* c : kCategoryColumns) t.require(c);
  std::vector<CategoryBar> out;
  while (t.next()) {
    CategoryBar b;
    b.method = t.str("method");
    b.category = parse_category(t.str("category"), t.where());
    b.count = t.integer("count");
    b.mean = t.num("mean");
    b.portfolio = t.num("portfolio");
    out.push_back(b);
  }
  return out;
}

json read_json_file(const std::filesystem::path& p) {
  auto is = open_in(p);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << content;
  if (!os) throw std::runtime_error("write failed: " + p.string());
}

}  // namespace reng
