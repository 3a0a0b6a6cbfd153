#pragma once

// JSON file formats: data counts keyed by pair ("12", "13", ..., "i,j" for
// n >= 10) and the solver result document.

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dppmle/analysis.hpp"
#include "dppmle/errors.hpp"
#include "dppmle/model.hpp"
#include "dppmle/monodromy.hpp"
#include "dppmle/pairs.hpp"

namespace dppmle {

using json = nlohmann::ordered_json;

namespace detail {

inline void dump_number(std::string& out, double v) {
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

inline void dump(const json& j, std::string& out, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + json(it.key()).dump() + ": ";
        dump(it.value(), out, indent, depth + 1);
      }
      out += "\n" + close + "}";
      return;
    }
    case json::value_t::array: {
      // Arrays of scalars stay on one line.
      const bool flat = std::none_of(j.begin(), j.end(), [](const json& e) { return e.is_structured(); });
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += flat ? "[" : "[\n";
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += flat ? ", " : ",\n";
        first = false;
        if (!flat) out += pad;
        dump(e, out, indent, depth + 1);
      }
      out += flat ? "]" : "\n" + close + "]";
      return;
    }
    case json::value_t::number_float:
      dump_number(out, j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + std::min(byte, text.size()), '\n'));
}

}  // namespace detail

/// Serializes with two-space indentation and doubles at 17 significant digits.
inline std::string to_json_text(const json& j) {
  std::string out;
  detail::dump(j, out, 2, 0);
  out += "\n";
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline json parse_json_text(const std::string& text, const std::string& origin = "<input>") {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(origin + ":" + std::to_string(detail::line_of(text, e.byte)) + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Counts

inline json counts_to_json(const DataCounts& u) {
  json j;
  j["n"] = u.n;
  json obj = json::object();
  for (const auto& [i, k] : pair_list(u.n)) obj[pair_key(i, k, u.n)] = u.at(i, k);
  j["u"] = std::move(obj);
  return j;
}

namespace detail {

inline std::int64_t read_count(const json& v, const std::string& field) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::floor(d) == d && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
  }
  throw SchemaError("field " + field + ": expected a nonnegative integer count");
}

}  // namespace detail

/// Accepts {"n": n, "u": {"12": c, ...}} with every pair present, or "u" as
/// an array in lexicographic pair order. n may be omitted for the array form.
inline DataCounts counts_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("counts: top level must be an object");
  if (!j.contains("u")) throw SchemaError("counts: missing field \"u\"");
  const json& u = j["u"];
  int n = 0;
  if (j.contains("n")) {
    if (!j["n"].is_number_integer()) throw SchemaError("field n: expected an integer");
    n = j["n"].get<int>();
    if (n < 3 || n > 34) throw SchemaError("field n: must lie in [3, 34]");
  }
  std::vector<std::int64_t> values;
  if (u.is_array()) {
    if (n == 0)
      for (int m = 3; m <= 34 && n == 0; ++m)
        if (num_pairs(m) == static_cast<int>(u.size())) n = m;
    if (n == 0 || num_pairs(n) != static_cast<int>(u.size()))
      throw SchemaError("field u: array length " + std::to_string(u.size()) + " is not C(n,2) for a valid n");
    for (std::size_t k = 0; k < u.size(); ++k) values.push_back(detail::read_count(u[k], "u[" + std::to_string(k) + "]"));
  } else if (u.is_object()) {
    if (n == 0) throw SchemaError("counts: field n is required when u is an object");
    for (const auto& [i, k] : pair_list(n)) {
      const auto key = pair_key(i, k, n);
      if (!u.contains(key)) throw SchemaError("field u.\"" + key + "\": missing");
      values.push_back(detail::read_count(u[key], "u.\"" + key + "\""));
    }
    if (static_cast<int>(u.size()) != num_pairs(n)) {
      for (auto it = u.begin(); it != u.end(); ++it) {
        bool known = false;
        for (const auto& [i, k] : pair_list(n)) known = known || it.key() == pair_key(i, k, n);
        if (!known) throw SchemaError("field u.\"" + it.key() + "\": not a pair key for n=" + std::to_string(n));
      }
    }
  } else {
    throw SchemaError("field u: expected an object or an array");
  }
  for (std::size_t k = 0; k < values.size(); ++k)
    if (values[k] < 0) throw SchemaError("field u: negative count at position " + std::to_string(k));
  return DataCounts(n, std::move(values));
}

inline DataCounts read_counts_file(const std::string& path) {
  return counts_from_json(parse_json_text(read_text_file(path), path));
}

inline void write_counts_file(const std::string& path, const DataCounts& u) {
  write_text_file(path, to_json_text(counts_to_json(u)));
}

/// Comma-separated counts in lexicographic pair order, e.g. "1,2,3".
inline DataCounts parse_inline_counts(const std::string& text) {
  std::vector<std::int64_t> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      throw SchemaError("inline counts: '" + item + "' is not an integer");
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used != item.size()) throw SchemaError("inline counts: '" + item + "' is not an integer");
    values.push_back(v);
  }
  json j;
  j["u"] = values;
  return counts_from_json(j);
}

// ---------------------------------------------------------------------------
// Results

struct Timings {
  double monodromy_ms = 0;
  double solve_ms = 0;
  double analysis_ms = 0;
  double total_ms = 0;
};

/// The result document. Timings are written as null when absent so that
/// deterministic runs compare byte for byte.
inline json result_to_json(const DataCounts& u, const SolutionSet& set, const std::optional<MleResult>& mle,
                           std::size_t implicit_count, const std::optional<Timings>& timings) {
  json j;
  j["n"] = u.n;
  j["u"] = counts_to_json(u)["u"];
  j["count"] = set.size();
  j["count_real"] = set.count_real();
  j["implicit_count"] = implicit_count;
  json sols = json::array();
  for (const auto& s : set.solutions) {
    json e;
    std::vector<double> re(s.point.size()), im(s.point.size());
    for (Eigen::Index k = 0; k < s.point.size(); ++k) {
      re[k] = s.point[k].real();
      im[k] = s.point[k].imag();
    }
    e["point_re"] = re;
    e["point_im"] = im;
    e["residual"] = s.residual;
    e["is_real"] = s.is_real;
    e["loglik"] = s.is_real ? json(s.loglik) : json(nullptr);
    e["hessian_class"] = to_string(s.hessian_class);
    json sv = nullptr;
    if (s.is_real) {
      try {
        sv = sign_vector(MatrixParam<double>::from_flat(s.point.real())).s;
      } catch (const DomainError&) {
      }
    }
    e["sign_vector"] = sv;
    sols.push_back(std::move(e));
  }
  j["solutions"] = std::move(sols);
  if (mle) {
    json m;
    m["q"] = mle->q.q;
    m["loglik"] = mle->loglik;
    if (mle->tie()) {
      json alts = json::array();
      for (const auto& p : mle->argmax_points) alts.push_back(p.q);
      m["tied_q"] = std::move(alts);
    }
    j["mle"] = std::move(m);
  } else {
    j["mle"] = nullptr;
  }
  if (timings) {
    json t;
    t["monodromy"] = timings->monodromy_ms;
    t["solve"] = timings->solve_ms;
    t["analysis"] = timings->analysis_ms;
    t["total"] = timings->total_ms;
    j["timings_ms"] = std::move(t);
  } else {
    j["timings_ms"] = nullptr;
  }
  return j;
}

}  // namespace dppmle
