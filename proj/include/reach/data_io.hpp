#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "reach/audit_items.hpp"
#include "reach/errors.hpp"
#include "reach/model.hpp"

namespace reach {

using Json = nlohmann::ordered_json;

// Shortest decimal that round-trips a double is not what we want for the
// on-disk factor format; 17 significant digits is, and it diffs cleanly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

enum class RatingsFormat { double_colon, tsv, csv };

inline RatingsFormat ratings_format_from_string(const std::string& s) {
  if (s == "mlens" || s == "double-colon") return RatingsFormat::double_colon;
  if (s == "tsv") return RatingsFormat::tsv;
  if (s == "csv") return RatingsFormat::csv;
  throw invalid_input_error("unknown ratings format: " + s);
}

// Ratings triples over dense user/item indices, remapped from external ids
// by first occurrence in the file.
struct RatingsTable {
  struct Entry {
    int user = 0;
    int item = 0;
    double rating = 0.0;
    long long timestamp = -1;
  };
  std::vector<Entry> entries;
  std::vector<long long> user_ids;  // dense -> external
  std::vector<long long> item_ids;

  int n_users() const { return static_cast<int>(user_ids.size()); }
  int m_items() const { return static_cast<int>(item_ids.size()); }
};

namespace detail {

inline long long parse_ll(std::string_view tok, long line, const char* what) {
  long long v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw parse_error(std::string("bad ") + what + " field '" + std::string(tok) + "'", line);
  return v;
}

inline double parse_double(std::string_view tok, long line, const char* what) {
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw parse_error(std::string("bad ") + what + " field '" + std::string(tok) + "'", line);
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = s.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(s.substr(pos));
      return out;
    }
    out.push_back(s.substr(pos, next - pos));
    pos = next + sep.size();
  }
}

}  // namespace detail

// Streaming parse with line-accurate errors. The declared rating range is
// enforced here; nothing is clipped silently.
inline RatingsTable parse_ratings(const std::string& path, RatingsFormat format,
                                  double range_lo = 0.0, double range_hi = 5.0) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open ratings file: " + path);
  RatingsTable table;
  std::unordered_map<long long, int> user_map, item_map;
  std::string raw;
  long line_no = 0;
  const std::string_view sep = format == RatingsFormat::double_colon ? "::"
                               : format == RatingsFormat::tsv        ? "\t"
                                                                     : ",";
  bool header_skipped = format != RatingsFormat::csv;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) continue;
    if (!header_skipped) {
      header_skipped = true;
      continue;
    }
    const auto fields = detail::split(raw, sep);
    if (fields.size() < 3 || fields.size() > 4)
      throw parse_error("expected 3 or 4 fields, got " + std::to_string(fields.size()), line_no);
    RatingsTable::Entry e;
    const long long ext_user = detail::parse_ll(fields[0], line_no, "user id");
    const long long ext_item = detail::parse_ll(fields[1], line_no, "item id");
    e.rating = detail::parse_double(fields[2], line_no, "rating");
    if (!std::isfinite(e.rating) || e.rating < range_lo || e.rating > range_hi)
      throw parse_error("rating " + std::string(fields[2]) + " outside declared range [" +
                            std::to_string(range_lo) + ", " + std::to_string(range_hi) + "]",
                        line_no);
    if (fields.size() == 4) e.timestamp = detail::parse_ll(fields[3], line_no, "timestamp");
    auto [uit, unew] = user_map.try_emplace(ext_user, table.n_users());
    if (unew) table.user_ids.push_back(ext_user);
    auto [iit, inew] = item_map.try_emplace(ext_item, table.m_items());
    if (inew) table.item_ids.push_back(ext_item);
    e.user = uit->second;
    e.item = iit->second;
    table.entries.push_back(e);
  }
  return table;
}

// Elementwise log(1 + x) for implicit-count data.
inline RatingsTable log1p_transform(const RatingsTable& table) {
  RatingsTable out = table;
  for (auto& e : out.entries) {
    if (e.rating < 0.0)
      throw invalid_input_error("log1p_transform: negative count " + std::to_string(e.rating));
    e.rating = std::log1p(e.rating);
  }
  return out;
}

// Keeps the k most-rated items (ties by lower external id) and rebuilds
// the dense index space in original file order.
inline RatingsTable filter_top_items(const RatingsTable& table, int k) {
  if (k < 1) throw invalid_input_error("filter_top_items: k must be >= 1");
  std::vector<long> counts(static_cast<std::size_t>(table.m_items()), 0);
  for (const auto& e : table.entries) ++counts[static_cast<std::size_t>(e.item)];
  std::vector<int> order(static_cast<std::size_t>(table.m_items()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (counts[static_cast<std::size_t>(a)] != counts[static_cast<std::size_t>(b)])
      return counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(b)];
    return table.item_ids[static_cast<std::size_t>(a)] < table.item_ids[static_cast<std::size_t>(b)];
  });
  std::vector<char> keep(static_cast<std::size_t>(table.m_items()), 0);
  for (int i = 0; i < std::min<int>(k, static_cast<int>(order.size())); ++i)
    keep[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;

  RatingsTable out;
  std::unordered_map<long long, int> user_map, item_map;
  for (const auto& e : table.entries) {
    if (!keep[static_cast<std::size_t>(e.item)]) continue;
    RatingsTable::Entry ne = e;
    const long long ext_user = table.user_ids[static_cast<std::size_t>(e.user)];
    const long long ext_item = table.item_ids[static_cast<std::size_t>(e.item)];
    auto [uit, unew] = user_map.try_emplace(ext_user, out.n_users());
    if (unew) out.user_ids.push_back(ext_user);
    auto [iit, inew] = item_map.try_emplace(ext_item, out.m_items());
    if (inew) out.item_ids.push_back(ext_item);
    ne.user = uit->second;
    ne.item = iit->second;
    out.entries.push_back(ne);
  }
  return out;
}

// A trained model plus the external ids its rows correspond to.
struct ModelBundle {
  int format_version = 1;
  FactorModel model;
  std::vector<long long> item_ids;
  std::vector<long long> user_ids;
};

inline void save_model(const ModelBundle& bundle, const std::string& dir) {
  namespace fs = std::filesystem;
  const FactorModel& m = bundle.model;
  if (static_cast<Index>(bundle.item_ids.size()) != m.m())
    throw invalid_input_error("save_model: item id table does not match m");
  if (static_cast<Index>(bundle.user_ids.size()) != m.n_users())
    throw invalid_input_error("save_model: user id table does not match n");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create model dir: " + dir);

  Json manifest;
  manifest["format_version"] = bundle.format_version;
  manifest["d"] = m.d();
  manifest["lambda"] = m.lambda;
  manifest["mu"] = m.mu;
  manifest["bias_sign"] = to_string(m.bias_sign);
  manifest["m"] = m.m();
  manifest["n"] = m.n_users();
  std::ofstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw io_error("cannot write manifest in " + dir);
  mf << manifest.dump(2) << "\n";

  std::ofstream items(fs::path(dir) / "items.csv");
  if (!items) throw io_error("cannot write items.csv in " + dir);
  items << "item_id,b";
  for (Index j = 0; j < m.d(); ++j) items << ",q" << (j + 1);
  items << "\n";
  for (Index i = 0; i < m.m(); ++i) {
    items << bundle.item_ids[static_cast<std::size_t>(i)] << "," << format_double(m.b(i));
    for (Index j = 0; j < m.d(); ++j) items << "," << format_double(m.Q(i, j));
    items << "\n";
  }

  if (m.n_users() > 0) {
    std::ofstream users(fs::path(dir) / "users.csv");
    if (!users) throw io_error("cannot write users.csv in " + dir);
    users << "user_id,c";
    for (Index j = 0; j < m.d(); ++j) users << ",p" << (j + 1);
    users << "\n";
    for (Index i = 0; i < m.n_users(); ++i) {
      users << bundle.user_ids[static_cast<std::size_t>(i)] << "," << format_double(m.c(i));
      for (Index j = 0; j < m.d(); ++j) users << "," << format_double(m.P(i, j));
      users << "\n";
    }
  }
}

namespace detail {

struct FactorTable {
  std::vector<long long> ids;
  Matrix factors;
  Vector bias;
};

inline FactorTable load_factor_csv(const std::string& path, Index d, Index expected_rows,
                                   const char* what) {
  std::ifstream in(path);
  if (!in) throw io_error(std::string("cannot open ") + path);
  std::string raw;
  long line_no = 0;
  if (!std::getline(in, raw)) throw parse_error(std::string(what) + ": missing header", 1);
  ++line_no;
  FactorTable t;
  std::vector<long long> ids;
  std::vector<double> bias;
  std::vector<double> factors;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) continue;
    const auto fields = split(raw, ",");
    if (static_cast<Index>(fields.size()) != d + 2)
      throw parse_error(std::string(what) + ": expected " + std::to_string(d + 2) + " fields",
                        line_no);
    ids.push_back(parse_ll(fields[0], line_no, "id"));
    bias.push_back(parse_double(fields[1], line_no, "bias"));
    for (Index j = 0; j < d; ++j)
      factors.push_back(parse_double(fields[static_cast<std::size_t>(j + 2)], line_no, "factor"));
  }
  if (expected_rows >= 0 && static_cast<Index>(ids.size()) != expected_rows)
    throw parse_error(std::string(what) + ": manifest expects " + std::to_string(expected_rows) +
                      " rows, file has " + std::to_string(ids.size()));
  t.ids = std::move(ids);
  t.bias = Eigen::Map<Vector>(bias.data(), static_cast<Index>(bias.size()));
  t.factors = Matrix(static_cast<Index>(t.ids.size()), d);
  for (Index i = 0; i < t.factors.rows(); ++i)
    for (Index j = 0; j < d; ++j)
      t.factors(i, j) = factors[static_cast<std::size_t>(i * d + j)];
  return t;
}

}  // namespace detail

inline ModelBundle load_model(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw io_error("cannot open manifest.json in " + dir);
  Json manifest;
  try {
    manifest = Json::parse(mf);
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("manifest.json: ") + e.what());
  }
  for (const char* key : {"format_version", "d", "lambda", "mu", "bias_sign", "m", "n"})
    if (!manifest.contains(key))
      throw parse_error(std::string("manifest.json: missing key ") + key);
  ModelBundle bundle;
  bundle.format_version = manifest["format_version"].get<int>();
  if (bundle.format_version != 1)
    throw parse_error("unsupported model format_version " +
                      std::to_string(bundle.format_version));
  const Index d = manifest["d"].get<Index>();
  const Index m = manifest["m"].get<Index>();
  const Index n = manifest["n"].get<Index>();
  if (d < 1 || m < 1 || n < 0) throw parse_error("manifest.json: bad dimensions");
  bundle.model.lambda = manifest["lambda"].get<double>();
  bundle.model.mu = manifest["mu"].get<double>();
  bundle.model.bias_sign = bias_sign_from_string(manifest["bias_sign"].get<std::string>());

  detail::FactorTable items =
      detail::load_factor_csv((fs::path(dir) / "items.csv").string(), d, m, "items.csv");
  bundle.item_ids = std::move(items.ids);
  bundle.model.Q = std::move(items.factors);
  bundle.model.b = std::move(items.bias);

  if (n > 0) {
    detail::FactorTable users =
        detail::load_factor_csv((fs::path(dir) / "users.csv").string(), d, n, "users.csv");
    bundle.user_ids = std::move(users.ids);
    bundle.model.P = std::move(users.factors);
    bundle.model.c = std::move(users.bias);
  } else {
    bundle.model.P = Matrix(0, d);
    bundle.model.c = Vector(0);
  }
  bundle.model.validate();
  return bundle;
}

// Ratings joined against a model bundle: histories in model item space,
// user biases attached when the bundle has a user table.
struct ModelJoin {
  std::vector<RatingHistory> histories;  // ordered by dense user index
  std::vector<long> item_counts;         // per model item
  std::vector<double> item_means;
  long dropped_unknown_items = 0;
  long dropped_duplicates = 0;
};

inline ModelJoin join_ratings(const ModelBundle& bundle, const RatingsTable& table) {
  std::unordered_map<long long, int> item_index;
  for (std::size_t i = 0; i < bundle.item_ids.size(); ++i)
    item_index.emplace(bundle.item_ids[i], static_cast<int>(i));
  std::unordered_map<long long, int> user_index;
  for (std::size_t i = 0; i < bundle.user_ids.size(); ++i)
    user_index.emplace(bundle.user_ids[i], static_cast<int>(i));

  const Index m = bundle.model.m();
  ModelJoin join;
  join.item_counts.assign(static_cast<std::size_t>(m), 0);
  join.item_means.assign(static_cast<std::size_t>(m), 0.0);

  std::vector<std::map<int, double>> per_user(static_cast<std::size_t>(table.n_users()));
  for (const auto& e : table.entries) {
    const auto it = item_index.find(table.item_ids[static_cast<std::size_t>(e.item)]);
    if (it == item_index.end()) {
      ++join.dropped_unknown_items;
      continue;
    }
    auto [uit, fresh] = per_user[static_cast<std::size_t>(e.user)].try_emplace(it->second, e.rating);
    (void)uit;
    if (!fresh) {
      ++join.dropped_duplicates;
      continue;
    }
    ++join.item_counts[static_cast<std::size_t>(it->second)];
    join.item_means[static_cast<std::size_t>(it->second)] += e.rating;
  }
  for (Index i = 0; i < m; ++i) {
    const long cnt = join.item_counts[static_cast<std::size_t>(i)];
    join.item_means[static_cast<std::size_t>(i)] =
        cnt ? join.item_means[static_cast<std::size_t>(i)] / static_cast<double>(cnt)
            : std::numeric_limits<double>::quiet_NaN();
  }
  for (int u = 0; u < table.n_users(); ++u) {
    RatingHistory hist;
    hist.user_id = table.user_ids[static_cast<std::size_t>(u)];
    const auto& ratings = per_user[static_cast<std::size_t>(u)];
    hist.omega.reserve(ratings.size());
    hist.ratings = Vector(static_cast<Index>(ratings.size()));
    Index k = 0;
    for (const auto& [item, r] : ratings) {
      hist.omega.push_back(item);
      hist.ratings(k++) = r;
    }
    const auto cit = user_index.find(hist.user_id);
    if (cit != user_index.end()) hist.c_u = bundle.model.c(cit->second);
    join.histories.push_back(std::move(hist));
  }
  return join;
}

// Structured report: { config, summary, records } as JSON, or the records
// alone as flat CSV. Writers are deterministic in their inputs.
enum class ReportFormat { structured_json, csv };

inline ReportFormat report_format_from_string(const std::string& s) {
  if (s == "json" || s == "structured-json") return ReportFormat::structured_json;
  if (s == "csv") return ReportFormat::csv;
  throw invalid_input_error("unknown report format: " + s);
}

namespace detail {

inline std::string csv_cell(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

}  // namespace detail

inline void write_report(const Json& config, const Json& summary, const Json& records,
                         const std::string& path, ReportFormat format) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write report: " + path);
  if (format == ReportFormat::structured_json) {
    Json doc;
    doc["config"] = config;
    doc["summary"] = summary;
    doc["records"] = records;
    out << doc.dump(2) << "\n";
    return;
  }
  if (!records.is_array()) throw invalid_input_error("csv report needs an array of records");
  if (records.empty()) {
    out << "\n";
    return;
  }
  const Json& first = records.front();
  bool lead = true;
  for (const auto& [key, value] : first.items()) {
    (void)value;
    out << (lead ? "" : ",") << key;
    lead = false;
  }
  out << "\n";
  for (const auto& rec : records) {
    lead = true;
    for (const auto& [key, value] : first.items()) {
      (void)value;
      out << (lead ? "" : ",") << detail::csv_cell(rec.contains(key) ? rec.at(key) : Json());
      lead = false;
    }
    out << "\n";
  }
}

// Long-format plot data: one (series, x, y) row per point.
struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

inline void emit_plotdata(const std::vector<PlotSeries>& curves, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write plot data: " + path);
  out << "series,x,y\n";
  for (const auto& s : curves) {
    if (s.x.size() != s.y.size())
      throw invalid_input_error("emit_plotdata: series '" + s.name + "' has ragged x/y");
    for (std::size_t i = 0; i < s.x.size(); ++i)
      out << s.name << "," << format_double(s.x[i]) << "," << format_double(s.y[i]) << "\n";
  }
}

inline PlotSeries series_from_cdf(const std::string& name, const Cdf& cdf) {
  for (std::size_t i = 1; i < cdf.y.size(); ++i)
    if (cdf.y[i] < cdf.y[i - 1])
      throw numerical_error("cdf series '" + name + "' is not nondecreasing");
  PlotSeries s;
  s.name = name;
  s.x = cdf.x;
  s.y = cdf.y;
  return s;
}

}  // namespace reach
