#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sdidkit/attention.hpp"
#include "sdidkit/date.hpp"
#include "sdidkit/error.hpp"
#include "sdidkit/panel.hpp"

namespace sdidkit::io {

/// Splits one CSV line. Double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// A parsed CSV table with header-indexed access and row/column diagnostics.
class CsvTable {
 public:
  static CsvTable read(std::istream& in, const std::string& source, const std::vector<std::string>& required) {
    CsvTable t;
    t.source_ = source;
    std::string line;
    if (!std::getline(in, line)) throw InputError(source + ": empty file, header required");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    auto header = split_csv_line(line);
    for (std::size_t c = 0; c < header.size(); ++c) t.columns_[trim(header[c])] = c;
    for (const auto& r : required)
      if (!t.columns_.contains(r)) throw InputError(source + ": missing required column '" + r + "'");
    std::size_t row = 1;
    while (std::getline(in, line)) {
      ++row;
      if (trim(line).empty()) continue;
      auto fields = split_csv_line(line);
      if (fields.size() != header.size())
        throw InputError(source + ": row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                         " fields, header has " + std::to_string(header.size()));
      t.rows_.push_back(std::move(fields));
      t.line_numbers_.push_back(row);
    }
    return t;
  }

  static CsvTable read_file(const std::string& path, const std::vector<std::string>& required) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    return read(in, path, required);
  }

  std::size_t size() const { return rows_.size(); }

  std::string text(std::size_t r, const std::string& col) const { return trim(rows_[r][columns_.at(col)]); }

  double number(std::size_t r, const std::string& col) const {
    const std::string s = text(r, col);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v))
      throw InputError(where(r, col) + ": '" + s + "' is not a number");
    return v;
  }

  Date date(std::size_t r, const std::string& col) const {
    try {
      return parse_date(text(r, col));
    } catch (const InputError& e) {
      throw InputError(where(r, col) + ": " + e.what());
    }
  }

  std::string where(std::size_t r, const std::string& col) const {
    return source_ + ": row " + std::to_string(line_numbers_[r]) + ", column '" + col + "'";
  }

 private:
  std::string source_;
  std::map<std::string, std::size_t> columns_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::size_t> line_numbers_;
};

/// `date,asset_id,price,volume,market_cap,group`
inline std::vector<RawRecord> read_price_csv(std::istream& in, const std::string& source = "prices") {
  const auto t = CsvTable::read(in, source, {"date", "asset_id", "price", "volume", "market_cap", "group"});
  std::vector<RawRecord> out;
  out.reserve(t.size());
  for (std::size_t r = 0; r < t.size(); ++r) {
    RawRecord rec;
    rec.date = t.date(r, "date");
    rec.asset_id = t.text(r, "asset_id");
    rec.price = t.number(r, "price");
    rec.volume = t.number(r, "volume");
    rec.market_cap = t.number(r, "market_cap");
    rec.group = t.text(r, "group");
    if (rec.asset_id.empty()) throw InputError(t.where(r, "asset_id") + ": empty asset id");
    if (!(rec.price > 0.0)) throw InputError(t.where(r, "price") + ": price must be positive");
    if (rec.volume < 0.0) throw InputError(t.where(r, "volume") + ": volume must be non-negative");
    if (rec.market_cap < 0.0) throw InputError(t.where(r, "market_cap") + ": market cap must be non-negative");
    out.push_back(std::move(rec));
  }
  return out;
}

inline std::vector<RawRecord> read_price_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open price file '" + path + "'");
  return read_price_csv(in, path);
}

/// `date,term,volume` with volume an integer in 0..100. Returns one series per term.
inline std::map<std::string, AttentionSeries> read_trends_csv(std::istream& in, const std::string& source = "trends") {
  const auto t = CsvTable::read(in, source, {"date", "term", "volume"});
  std::map<std::string, std::map<Date, double>> by_term;
  for (std::size_t r = 0; r < t.size(); ++r) {
    const double v = t.number(r, "volume");
    if (v < 0.0 || v > 100.0 || v != std::floor(v))
      throw InputError(t.where(r, "volume") + ": search volume must be an integer in 0..100");
    const Date d = t.date(r, "date");
    if (!by_term[t.text(r, "term")].emplace(d, v).second)
      throw InputError(t.where(r, "date") + ": duplicate date for term '" + t.text(r, "term") + "'");
  }
  std::map<std::string, AttentionSeries> out;
  for (auto& [term, series] : by_term) {
    AttentionSeries s;
    s.term = term;
    for (const auto& [d, v] : series) {
      s.dates.push_back(d);
      s.values.push_back(v);
    }
    out.emplace(term, std::move(s));
  }
  return out;
}

/// `date,topic,count,mean_sentiment`. Returns the records grouped by topic.
inline std::map<std::string, std::vector<NewsRecord>> read_news_csv(std::istream& in, const std::string& source = "news") {
  const auto t = CsvTable::read(in, source, {"date", "topic", "count", "mean_sentiment"});
  std::map<std::string, std::vector<NewsRecord>> out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    NewsRecord n;
    n.date = t.date(r, "date");
    n.topic = t.text(r, "topic");
    n.count = t.number(r, "count");
    n.mean_sentiment = t.number(r, "mean_sentiment");
    if (n.count < 0.0 || n.count != std::floor(n.count))
      throw InputError(t.where(r, "count") + ": count must be a non-negative integer");
    if (n.mean_sentiment < -1.0 || n.mean_sentiment > 1.0)
      throw InputError(t.where(r, "mean_sentiment") + ": sentiment must lie in [-1, 1]");
    out[n.topic].push_back(n);
  }
  return out;
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_number(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline void write_price_csv(std::ostream& out, const std::vector<RawRecord>& records) {
  out << "date,asset_id,price,volume,market_cap,group\n";
  for (const auto& r : records)
    out << format_date(r.date) << ',' << r.asset_id << ',' << format_number(r.price) << ','
        << format_number(r.volume) << ',' << format_number(r.market_cap) << ',' << r.group << '\n';
}

inline void write_trends_csv(std::ostream& out, const std::vector<AttentionSeries>& series) {
  out << "date,term,volume\n";
  for (const auto& s : series)
    for (std::size_t k = 0; k < s.dates.size(); ++k)
      out << format_date(s.dates[k]) << ',' << s.term << ',' << format_number(s.values[k]) << '\n';
}

}  // namespace sdidkit::io
