#include "isac/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace isac {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    size_t pos = 0;
    const double v = std::stod(text, &pos);
    require(pos == text.size(), "trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse '" + text +
                      "' as a number");
  }
}

// Tokens are separated by whitespace and/or commas.
std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : text) {
    if (c == ' ' || c == '\t' || c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string fmt_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_cplx(cplx v) {
  return "(" + fmt_exact(v.real()) + ", " + fmt_exact(v.imag()) + ")";
}

void write_cvec(std::ostream& out, const std::string& key, const CVec& v) {
  out << key << " =";
  for (Eigen::Index i = 0; i < v.size(); ++i) out << " " << fmt_cplx(v(i));
  out << "\n";
}

void write_rvec(std::ostream& out, const std::string& key, const RVec& v) {
  out << key << " =";
  for (Eigen::Index i = 0; i < v.size(); ++i) out << " " << fmt_exact(v(i));
  out << "\n";
}

void write_ivec(std::ostream& out, const std::string& key, const IVec& v) {
  out << key << " =";
  for (Eigen::Index i = 0; i < v.size(); ++i) out << " " << v(i);
  out << "\n";
}

// Complex lists look like "(re, im) (re, im) ...".
std::vector<cplx> parse_cplx_list(const std::string& key,
                                  const std::string& text) {
  std::vector<cplx> out;
  size_t pos = 0;
  while (true) {
    const size_t open = text.find('(', pos);
    if (open == std::string::npos) break;
    const size_t comma = text.find(',', open);
    const size_t close = text.find(')', open);
    if (comma == std::string::npos || close == std::string::npos ||
        comma > close)
      throw ConfigError("key '" + key + "': malformed complex pair");
    const double re =
        parse_double(key, trim(text.substr(open + 1, comma - open - 1)));
    const double im =
        parse_double(key, trim(text.substr(comma + 1, close - comma - 1)));
    out.emplace_back(re, im);
    pos = close + 1;
  }
  return out;
}

CVec get_cvec(const KvDoc& doc, const std::string& key) {
  require(doc.has(key), "missing key '" + key + "'");
  const std::vector<cplx> list = parse_cplx_list(key, doc.values.at(key));
  CVec v(static_cast<Eigen::Index>(list.size()));
  for (size_t i = 0; i < list.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = list[i];
  return v;
}

RVec get_rvec(const KvDoc& doc, const std::string& key) {
  const std::vector<double> list = doc.get_double_list(key, {});
  require(doc.has(key), "missing key '" + key + "'");
  RVec v(static_cast<Eigen::Index>(list.size()));
  for (size_t i = 0; i < list.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = list[i];
  return v;
}

IVec get_ivec(const KvDoc& doc, const std::string& key) {
  const RVec r = get_rvec(doc, key);
  IVec v(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    v(i) = static_cast<int>(r(i));
    require(static_cast<double>(v(i)) == r(i),
            "key '" + key + "': expected integers");
  }
  return v;
}

KvDoc parse_from(std::istream& in) {
  KvDoc doc;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    require(eq != std::string::npos, "config line " + std::to_string(line_no) +
                                         ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    require(!key.empty(), "config line " + std::to_string(line_no) +
                              ": empty key");
    doc.values[key] = trim(line.substr(eq + 1));
  }
  return doc;
}

}  // namespace

KvDoc KvDoc::parse_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config file '" + path + "'");
  return parse_from(in);
}

KvDoc KvDoc::parse_stream(std::istream& in) { return parse_from(in); }

bool KvDoc::has(const std::string& key) const { return values.count(key) > 0; }

std::string KvDoc::get_string(const std::string& key,
                              const std::string& fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

double KvDoc::get_double(const std::string& key, double fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : parse_double(key, it->second);
}

int KvDoc::get_int(const std::string& key, int fallback) const {
  const double v = get_double(key, static_cast<double>(fallback));
  const int i = static_cast<int>(v);
  require(static_cast<double>(i) == v, "key '" + key + "': expected integer");
  return i;
}

std::uint64_t KvDoc::get_uint64(const std::string& key,
                                std::uint64_t fallback) const {
  const auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    size_t pos = 0;
    const std::uint64_t v = std::stoull(it->second, &pos);
    require(pos == it->second.size(), "trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse '" + it->second +
                      "' as an unsigned integer");
  }
}

bool KvDoc::get_bool(const std::string& key, bool fallback) const {
  const auto it = values.find(key);
  if (it == values.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key '" + key + "': cannot parse '" + v + "' as a bool");
}

std::vector<double> KvDoc::get_double_list(
    const std::string& key, std::vector<double> fallback) const {
  const auto it = values.find(key);
  if (it == values.end()) return fallback;
  std::vector<double> out;
  for (const std::string& tok : split_tokens(it->second))
    out.push_back(parse_double(key, tok));
  return out;
}

std::vector<std::string> KvDoc::get_string_list(
    const std::string& key, std::vector<std::string> fallback) const {
  const auto it = values.find(key);
  if (it == values.end()) return fallback;
  return split_tokens(it->second);
}

std::string format_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.5e", v);
  return buf;
}

void write_scene(std::ostream& out, const SceneTruth& scene) {
  out << "m = " << scene.m << "\n";
  write_rvec(out, "theta", scene.theta);
  write_ivec(out, "s", scene.s);
  write_ivec(out, "s_r", scene.s_r);
  write_ivec(out, "s_c", scene.s_c);
  write_cvec(out, "x_r", scene.x_r);
  write_cvec(out, "x_c", scene.x_c);
}

SceneTruth read_scene(std::istream& in) {
  const KvDoc doc = parse_from(in);
  SceneTruth scene;
  scene.m = doc.get_int("m", -1);
  require(scene.m >= 1, "scene file: missing or bad 'm'");
  scene.theta = get_rvec(doc, "theta");
  scene.s = get_ivec(doc, "s");
  scene.s_r = get_ivec(doc, "s_r");
  scene.s_c = get_ivec(doc, "s_c");
  scene.x_r = get_cvec(doc, "x_r");
  scene.x_c = get_cvec(doc, "x_c");
  require(scene.theta.size() == scene.m && scene.s.size() == scene.m &&
              scene.s_r.size() == scene.m && scene.s_c.size() == scene.m &&
              scene.x_r.size() == scene.m && scene.x_c.size() == scene.m,
          "scene file: field lengths must equal m");
  return scene;
}

void write_pilots(std::ostream& out, const PilotSet& pilots) {
  out << "m = " << pilots.m() << "\n";
  out << "p1 = " << pilots.p1() << "\n";
  out << "p2 = " << pilots.p2() << "\n";
  out << "power_budget = " << fmt_exact(pilots.power_budget) << "\n";
  CVec flat1(pilots.dp1.size());
  for (Eigen::Index i = 0; i < flat1.size(); ++i)
    flat1(i) = pilots.dp1(i % pilots.m(), i / pilots.m());
  write_cvec(out, "dp1", flat1);
  CVec flat2(pilots.dp2.size());
  for (Eigen::Index i = 0; i < flat2.size(); ++i)
    flat2(i) = pilots.dp2(i % pilots.m(), i / pilots.m());
  write_cvec(out, "dp2", flat2);
  write_cvec(out, "up", pilots.up);
}

PilotSet read_pilots(std::istream& in) {
  const KvDoc doc = parse_from(in);
  PilotSet pilots;
  const int m = doc.get_int("m", -1);
  const int p1 = doc.get_int("p1", -1);
  const int p2 = doc.get_int("p2", -1);
  require(m >= 1 && p1 >= 0 && p2 >= 0, "pilot file: bad dimensions");
  pilots.power_budget = doc.get_double("power_budget", 1.0);
  const CVec flat1 = get_cvec(doc, "dp1");
  const CVec flat2 = get_cvec(doc, "dp2");
  require(flat1.size() == static_cast<Eigen::Index>(m) * p1 &&
              flat2.size() == static_cast<Eigen::Index>(m) * p2,
          "pilot file: dp lengths do not match dimensions");
  pilots.dp1.resize(m, p1);
  for (Eigen::Index i = 0; i < flat1.size(); ++i)
    pilots.dp1(i % m, i / m) = flat1(i);
  pilots.dp2.resize(m, p2);
  for (Eigen::Index i = 0; i < flat2.size(); ++i)
    pilots.dp2(i % m, i / m) = flat2(i);
  pilots.up = get_cvec(doc, "up");
  pilots.validate();
  return pilots;
}

void write_observation(std::ostream& out, const Observation& obs) {
  out << "noise_var_r = " << fmt_exact(obs.noise_var_r) << "\n";
  out << "noise_var_c = " << fmt_exact(obs.noise_var_c) << "\n";
  write_cvec(out, "y_r", obs.y_r);
  write_cvec(out, "y_c", obs.y_c);
}

Observation read_observation(std::istream& in) {
  const KvDoc doc = parse_from(in);
  Observation obs;
  obs.noise_var_r = doc.get_double("noise_var_r", -1.0);
  obs.noise_var_c = doc.get_double("noise_var_c", -1.0);
  require(obs.noise_var_r > 0.0 && obs.noise_var_c > 0.0,
          "observation file: noise variances must be positive");
  obs.y_r = get_cvec(doc, "y_r");
  obs.y_c = get_cvec(doc, "y_c");
  return obs;
}

}  // namespace isac
