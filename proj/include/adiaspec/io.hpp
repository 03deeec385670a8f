#pragma once
// Emitters (CSV, JSON, SVG) and the flat key = value config format.

#include "spectrum.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace adiaspec::io {

using json = nlohmann::ordered_json;

// fixed formatting so repeated runs are byte-identical
inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline double log10_of_ln(double ln) { return ln / std::log(10.0); }

struct Column {
  std::string name, unit; // unit "" for labels/flags
  std::string header() const { return unit.empty() ? name : name + "[" + unit + "]"; }
};

using Cell = std::variant<double, long, bool, std::string>;

class Table {
public:
  explicit Table(std::vector<Column> cols) : cols_(std::move(cols)) {}

  void add(std::vector<Cell> row) {
    if (row.size() != cols_.size()) throw Error("table: row width does not match the header");
    rows_.push_back(std::move(row));
  }
  size_t size() const { return rows_.size(); }
  const std::vector<Column> &columns() const { return cols_; }

  void write_csv(std::ostream &os) const {
    for (size_t i = 0; i < cols_.size(); ++i) os << (i ? "," : "") << cols_[i].header();
    os << "\n";
    for (auto &r : rows_) {
      for (size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << text(r[i]);
      os << "\n";
    }
  }

  json to_json() const {
    json units = json::object(), rows = json::array();
    for (auto &c : cols_) units[c.name] = c.unit;
    for (auto &r : rows_) {
      json o = json::object();
      for (size_t i = 0; i < r.size(); ++i) o[cols_[i].name] = value(r[i]);
      rows.push_back(o);
    }
    return json{{"units", units}, {"rows", rows}};
  }

private:
  std::vector<Column> cols_;
  std::vector<std::vector<Cell>> rows_;

  static std::string text(const Cell &c) {
    if (auto d = std::get_if<double>(&c)) return num(*d);
    if (auto l = std::get_if<long>(&c)) return std::to_string(*l);
    if (auto b = std::get_if<bool>(&c)) return *b ? "1" : "0";
    auto &s = std::get<std::string>(c);
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }
  static json value(const Cell &c) {
    if (auto d = std::get_if<double>(&c)) {
      if (!std::isfinite(*d)) return num(*d); // JSON has no inf/nan
      return *d;
    }
    if (auto l = std::get_if<long>(&c)) return *l;
    if (auto b = std::get_if<bool>(&c)) return *b;
    return std::get<std::string>(c);
  }
};

// ---------------------------------------------------------------- SVG
inline const char *zone_color(ZoneLabel z) {
  switch (z) {
  case ZoneLabel::sv0_sh_svpi: return "#d95f02";
  case ZoneLabel::svpi_sh_sv0: return "#7570b3";
  case ZoneLabel::sh_above: return "#1b9e77";
  case ZoneLabel::sh_below: return "#e6ab02";
  case ZoneLabel::invalid: return "#000000";
  default: return "#f0f0f0";
  }
}

// E horizontal, alpha vertical (growing upward)
inline void write_region_svg(std::ostream &os, const RegionMap &r) {
  const double W = 640, H = 480, L = 70, B = 50, T = 20, R = 190;
  size_t na = r.alphas.size(), ne = r.energies.size();
  if (!na || !ne) throw Error("svg: empty region map");
  double cw = (W - L - R) / ne, ch = (H - T - B) / na;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (size_t ia = 0; ia < na; ++ia)
    for (size_t ie = 0; ie < ne; ++ie) {
      auto &c = r.at(ia, ie);
      double x = L + ie * cw, y = H - B - (ia + 1) * ch;
      os << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(cw + 0.05) << "\" height=\""
         << num(ch + 0.05) << "\" fill=\"" << zone_color(c.label) << "\"/>\n";
    }
  auto txt = [&](double x, double y, const std::string &s, const char *anchor = "middle") {
    os << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"12\" font-family=\"sans-serif\""
       << " text-anchor=\"" << anchor << "\">" << s << "</text>\n";
  };
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  txt(L, H - B + 16, num(r.energies.front()));
  txt(W - R, H - B + 16, num(r.energies.back()));
  txt(0.5 * (L + W - R), H - 12, "E");
  txt(L - 6, H - B, num(r.alphas.front()), "end");
  txt(L - 6, T + 10, num(r.alphas.back()), "end");
  txt(20, 0.5 * (H - B + T), "alpha");
  ZoneLabel all[] = {ZoneLabel::sv0_sh_svpi, ZoneLabel::svpi_sh_sv0, ZoneLabel::sh_above,
                     ZoneLabel::sh_below, ZoneLabel::outside, ZoneLabel::invalid};
  double ly = T + 10;
  for (auto z : all) {
    os << "<rect x=\"" << W - R + 15 << "\" y=\"" << num(ly - 10) << "\" width=\"12\" height=\"12\" fill=\""
       << zone_color(z) << "\" stroke=\"#888\"/>\n";
    std::string s = to_string(z);
    std::string esc;
    for (char ch : s) esc += ch == '<' ? "&lt;" : ch == '>' ? "&gt;" : std::string(1, ch);
    txt(W - R + 33, ly, esc, "start");
    ly += 20;
  }
  os << "</svg>\n";
}

// ------------------------------------------------------------- config
// key = value lines; '#' comments; [section] prefixes keys with "section.";
// values are JSON (numbers, "strings", [arrays], true/false) or bare words.
// Arrays may span lines.
class Config {
public:
  static Config parse(std::istream &in, const std::string &origin = "config") {
    Config c;
    std::string line, section;
    int no = 0;
    auto strip = [](std::string s) {
      bool q = false;
      for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') q = !q;
        if (s[i] == '#' && !q) {
          s.resize(i);
          break;
        }
      }
      size_t a = s.find_first_not_of(" \t\r"), b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    auto depth = [](const std::string &s) {
      int d = 0;
      bool q = false;
      for (char ch : s) {
        if (ch == '"') q = !q;
        if (!q && ch == '[') ++d;
        if (!q && ch == ']') --d;
      }
      return d;
    };
    while (std::getline(in, line)) {
      ++no;
      std::string s = strip(line);
      if (s.empty()) continue;
      auto where = origin + ":" + std::to_string(no);
      if (s.front() == '[' && s.find('=') == std::string::npos) {
        if (s.back() != ']') throw Error(where + ": malformed section header");
        section = strip(s.substr(1, s.size() - 2));
        continue;
      }
      auto eq = s.find('=');
      if (eq == std::string::npos) throw Error(where + ": expected key = value");
      std::string key = strip(s.substr(0, eq)), val = strip(s.substr(eq + 1));
      if (key.empty()) throw Error(where + ": empty key");
      while (depth(val) > 0 && std::getline(in, line)) {
        ++no;
        val += " " + strip(line);
      }
      if (depth(val) != 0) throw Error(where + ": unbalanced brackets");
      if (val.empty()) throw Error(where + ": empty value");
      json v;
      try {
        v = json::parse(val);
      } catch (const std::exception &) {
        if (val.front() == '[' || val.front() == '"') throw Error(where + ": malformed value '" + val + "'");
        v = val; // bare word
      }
      c.values_[section.empty() ? key : section + "." + key] = v;
    }
    return c;
  }

  static Config load(const std::string &path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open config file " + path);
    return parse(f, path);
  }

  bool has(const std::string &k) const { return values_.count(k) > 0; }
  const json &at(const std::string &k) const { return values_.at(k); }
  const std::map<std::string, json> &values() const { return values_; }

  // the value as a command-line argument string: flat arrays join with ',',
  // arrays of pairs become "a:b,c:d"
  std::string as_arg(const std::string &k) const {
    const json &v = at(k);
    return to_arg(v);
  }

  static std::string to_arg(const json &v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) return v.dump();
    if (v.is_array()) {
      std::string s;
      for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        if (v[i].is_array()) {
          for (size_t j = 0; j < v[i].size(); ++j) s += (j ? ":" : "") + to_arg(v[i][j]);
        } else {
          s += to_arg(v[i]);
        }
      }
      return s;
    }
    throw Error("config: unsupported value " + v.dump());
  }

private:
  std::map<std::string, json> values_;
};

// ---------------------------------------------------- argument parsing
inline std::vector<std::string> split(const std::string &s, const std::string &seps) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (seps.find(ch) != std::string::npos) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline double to_double(const std::string &s) {
  size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception &) {
    throw Error("not a number: '" + s + "'");
  }
  if (pos != s.size()) throw Error("not a number: '" + s + "'");
  return v;
}

inline std::vector<double> parse_list(const std::string &s) {
  std::vector<double> v;
  for (auto &t : split(s, ",")) v.push_back(to_double(t));
  return v;
}

struct Range {
  double lo = 0, hi = 0;
  int steps = 1;
  std::vector<double> values() const { return linspace(lo, hi, steps); }
};

// "a:b" or "a:b:steps" (',' accepted as separator too)
inline Range parse_range(const std::string &s, bool need_steps) {
  auto p = split(s, ":,");
  if (p.size() != (need_steps ? 3u : 2u))
    throw Error("range '" + s + (need_steps ? "': expected lo:hi:steps" : "': expected lo:hi"));
  Range r{to_double(p[0]), to_double(p[1]), 1};
  if (p.size() == 3) {
    double n = to_double(p[2]);
    if (n < 1 || n != std::floor(n)) throw Error("range '" + s + "': steps must be a positive integer");
    r.steps = (int)n;
  }
  if (!(r.hi >= r.lo)) throw Error("range '" + s + "' is not well-ordered");
  return r;
}

// "m:A,m:A" -> cosine series
inline std::vector<CosTerm> parse_potential(const std::string &s) {
  std::vector<CosTerm> V;
  for (auto &t : split(s, ",")) {
    auto p = split(t, ":");
    if (p.size() != 2) throw Error("potential term '" + t + "': expected m:A");
    double m = to_double(p[0]);
    if (m < 1 || m != std::floor(m)) throw Error("potential term '" + t + "': harmonic must be a positive integer");
    V.push_back({(int)m, to_double(p[1])});
  }
  return V;
}

// half a unit in the last printed digit of each edge; the first edge is the
// energy reference and stays put
inline std::vector<double> printed_resolution(const std::vector<std::string> &edges) {
  std::vector<double> r;
  for (size_t i = 0; i < edges.size(); ++i) {
    if (i == 0) {
      r.push_back(0);
      continue;
    }
    auto &s = edges[i];
    auto e = s.find_first_of("eE");
    std::string mant = s.substr(0, e);
    int exp10 = e == std::string::npos ? 0 : std::stoi(s.substr(e + 1));
    auto dot = mant.find('.');
    int dec = dot == std::string::npos ? 0 : (int)(mant.size() - dot - 1);
    r.push_back(0.5 * std::pow(10.0, exp10 - dec));
  }
  return r;
}

} // namespace adiaspec::io
