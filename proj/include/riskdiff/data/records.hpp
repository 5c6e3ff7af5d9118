// Copyright 2026 The riskdiff Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RISKDIFF__DATA__RECORDS_HPP_
#define RISKDIFF__DATA__RECORDS_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskdiff::data
{

/// One trajectory sample of one vehicle.
struct RawRecord
{
  std::int64_t vehicle_id = 0;
  double timestamp = 0.0;  // s
  double x = 0.0;          // m
  double y = 0.0;          // m
  double vx = 0.0;         // m/s
  double vy = 0.0;         // m/s
  double length = 4.5;     // m
  double width = 1.8;      // m
  int lane = 0;
};

inline constexpr const char * kCsvHeader = "vehicle_id,timestamp,x,y,vx,vy,length,width,lane";

class CsvError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

namespace detail
{

inline std::vector<std::string> split_csv_line(const std::string & line)
{
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string & s, const std::string & where)
{
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception &) {
    throw CsvError(where + ": cannot parse '" + s + "' as a number");
  }
  if (used != s.size()) {
    throw CsvError(where + ": trailing characters in '" + s + "'");
  }
  if (!std::isfinite(v)) {
    throw CsvError(where + ": non-finite value '" + s + "'");
  }
  return v;
}

inline std::int64_t parse_int(const std::string & s, const std::string & where)
{
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception &) {
    throw CsvError(where + ": cannot parse '" + s + "' as an integer");
  }
  if (used != s.size()) {
    throw CsvError(where + ": trailing characters in '" + s + "'");
  }
  return v;
}

}  // namespace detail

/// Parses records; row numbers in diagnostics count the header as row 1.
/// Timestamps must be strictly increasing per vehicle.
inline std::vector<RawRecord> parse_csv(std::istream & in, const std::string & source = "<csv>")
{
  std::string line;
  if (!std::getline(in, line)) {
    throw CsvError(source + ": empty file, expected header '" + std::string(kCsvHeader) + "'");
  }
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  const auto header = detail::split_csv_line(line);
  const auto expected = detail::split_csv_line(kCsvHeader);
  for (const auto & col : expected) {
    bool found = false;
    for (const auto & h : header) {
      found = found || h == col;
    }
    if (!found) {
      throw CsvError(source + ": missing column '" + col + "'");
    }
  }
  if (header != expected) {
    throw CsvError(source + ": header must be exactly '" + std::string(kCsvHeader) + "'");
  }

  std::vector<RawRecord> out;
  std::map<std::int64_t, double> last_time;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") {
      continue;
    }
    const std::string where = source + " row " + std::to_string(row);
    const auto f = detail::split_csv_line(line);
    if (f.size() != expected.size()) {
      throw CsvError(where + ": expected " + std::to_string(expected.size()) + " fields, got " +
                     std::to_string(f.size()));
    }
    RawRecord r;
    r.vehicle_id = detail::parse_int(f[0], where);
    r.timestamp = detail::parse_double(f[1], where);
    r.x = detail::parse_double(f[2], where);
    r.y = detail::parse_double(f[3], where);
    r.vx = detail::parse_double(f[4], where);
    r.vy = detail::parse_double(f[5], where);
    r.length = detail::parse_double(f[6], where);
    r.width = detail::parse_double(f[7], where);
    r.lane = static_cast<int>(detail::parse_int(f[8], where));
    if (!(r.length > 0.0) || !(r.width > 0.0)) {
      throw CsvError(where + ": length and width must be positive");
    }
    const auto it = last_time.find(r.vehicle_id);
    if (it != last_time.end() && !(r.timestamp > it->second)) {
      throw CsvError(where + ": timestamp " + f[1] + " of vehicle " + f[0] +
                     " is not after the previous one");
    }
    last_time[r.vehicle_id] = r.timestamp;
    out.push_back(r);
  }
  return out;
}

inline std::vector<RawRecord> load_csv(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw CsvError("cannot open " + path.string());
  }
  return parse_csv(in, path.string());
}

inline void write_csv(std::ostream & os, const std::vector<RawRecord> & records)
{
  os << kCsvHeader << '\n';
  std::ostringstream line;
  line << std::fixed;
  for (const auto & r : records) {
    line.str("");
    line << r.vehicle_id << ',' << std::setprecision(2) << r.timestamp << ','
         << std::setprecision(4) << r.x << ',' << r.y << ',' << r.vx << ',' << r.vy << ','
         << std::setprecision(2) << r.length << ',' << r.width << ',' << r.lane << '\n';
    os << line.str();
  }
}

inline void save_csv(const std::filesystem::path & path, const std::vector<RawRecord> & records)
{
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw CsvError("cannot open " + path.string() + " for writing");
  }
  write_csv(os, records);
  if (!os) {
    throw CsvError("write failed: " + path.string());
  }
}

}  // namespace riskdiff::data

#endif  // RISKDIFF__DATA__RECORDS_HPP_
