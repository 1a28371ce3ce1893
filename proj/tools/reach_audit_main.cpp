// reach-audit: reachability, recourse, and cold-start audits for top-N
// linear preference models. Subcommands map one-to-one onto the report
// pipelines; every run is deterministic given its flags.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reach/audit_items.hpp"
#include "reach/audit_users.hpp"
#include "reach/data_io.hpp"
#include "reach/fixtures.hpp"
#include "reach/model.hpp"
#include "reach/parallel.hpp"

namespace {

using reach::Json;
using reach::Vector;

struct CommonOpts {
  std::string model_dir;
  std::string ratings_path;
  std::string format = "mlens";
  std::vector<int> N{1};
  int nh = 0;
  std::string mode = "history";
  std::string policy = "top";
  int set_size = 5;
  std::string bounds = "0:5";
  int users = 100;
  std::uint64_t seed = 0;
  int top_items = 0;  // 0 = no filter
  std::string avg = "reachable";
  std::string out_path;
  std::string plot_path;
  std::string report_format = "json";
  double eps_scale = 1e-6;
  int iter_factor = 50;
  int jobs = reach::default_jobs();
  bool log1p = false;
  bool exact = false;
};

std::pair<double, double> parse_bounds(const std::string& s) {
  const auto pos = s.find(':');
  if (pos == std::string::npos)
    throw reach::invalid_input_error("--bounds expects LO:HI, got '" + s + "'");
  const auto side = [](const std::string& tok) {
    if (tok == "-inf") return -std::numeric_limits<double>::infinity();
    if (tok == "inf" || tok == "+inf") return std::numeric_limits<double>::infinity();
    try {
      return std::stod(tok);
    } catch (const std::exception&) {
      throw reach::invalid_input_error("--bounds: bad number '" + tok + "'");
    }
  };
  const double lo = side(s.substr(0, pos));
  const double hi = side(s.substr(pos + 1));
  if (!(lo <= hi)) throw reach::invalid_input_error("--bounds: LO must be <= HI");
  return {lo, hi};
}

reach::Tolerances tolerances_for(const CommonOpts& opt) {
  reach::Tolerances tol;
  tol.strict_eps_scale = opt.eps_scale;
  tol.iteration_factor = opt.iter_factor;
  return tol;
}

Json tolerance_echo(const reach::Tolerances& tol) {
  Json j;
  j["strict_eps_scale"] = tol.strict_eps_scale;
  j["pivot_tol"] = tol.pivot_tol;
  j["phase1_tol"] = tol.phase1_tol;
  j["decide_tol"] = tol.decide_tol;
  j["verify_tol"] = tol.verify_tol;
  j["iteration_factor"] = tol.iteration_factor;
  return j;
}

Json config_echo(const std::string& subcommand, const CommonOpts& opt,
                 const reach::ModelBundle* bundle) {
  Json j;
  j["subcommand"] = subcommand;
  j["model"] = opt.model_dir;
  j["ratings"] = opt.ratings_path;
  j["format"] = opt.format;
  j["N"] = opt.N;
  j["nh"] = opt.nh;
  j["mode"] = opt.mode;
  j["policy"] = opt.policy;
  j["set_size"] = opt.set_size;
  j["bounds"] = opt.bounds;
  j["users"] = opt.users;
  j["seed"] = opt.seed;
  j["top_items"] = opt.top_items;
  j["avg"] = opt.avg;
  j["log1p"] = opt.log1p;
  j["exact"] = opt.exact;
  j["jobs"] = opt.jobs;
  if (bundle) j["bias_sign"] = reach::to_string(bundle->model.bias_sign);
  j["tolerances"] = tolerance_echo(tolerances_for(opt));
  return j;
}

Json json_or_null(double v) {
  if (std::isnan(v) || std::isinf(v)) return Json();
  return v;
}

reach::RatingsTable load_ratings(const CommonOpts& opt) {
  if (opt.ratings_path.empty())
    throw reach::invalid_input_error("this subcommand requires --ratings");
  auto [lo, hi] = parse_bounds(opt.bounds);
  if (opt.log1p) hi = std::numeric_limits<double>::infinity();
  reach::RatingsTable table =
      reach::parse_ratings(opt.ratings_path, reach::ratings_format_from_string(opt.format),
                           opt.log1p ? 0.0 : lo, hi);
  if (opt.log1p) table = reach::log1p_transform(table);
  if (opt.top_items > 0) table = reach::filter_top_items(table, opt.top_items);
  return table;
}

// Restricts the model to the items that survive in the (filtered) table,
// keeping the bundle's item order.
reach::ModelBundle subset_bundle(const reach::ModelBundle& bundle,
                                 const reach::RatingsTable& table) {
  std::vector<char> keep(bundle.item_ids.size(), 0);
  {
    std::unordered_map<long long, std::size_t> index;
    for (std::size_t i = 0; i < bundle.item_ids.size(); ++i) index.emplace(bundle.item_ids[i], i);
    for (long long ext : table.item_ids) {
      const auto it = index.find(ext);
      if (it != index.end()) keep[it->second] = 1;
    }
  }
  reach::ModelBundle out;
  out.format_version = bundle.format_version;
  out.model = bundle.model;
  out.user_ids = bundle.user_ids;
  long kept = std::count(keep.begin(), keep.end(), 1);
  if (kept == 0) throw reach::invalid_input_error("no ratings match the model's items");
  out.model.Q = reach::Matrix(kept, bundle.model.d());
  out.model.b = Vector(kept);
  out.item_ids.clear();
  reach::Index row = 0;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (!keep[i]) continue;
    out.model.Q.row(row) = bundle.model.Q.row(static_cast<reach::Index>(i));
    out.model.b(row) = bundle.model.b(static_cast<reach::Index>(i));
    out.item_ids.push_back(bundle.item_ids[i]);
    ++row;
  }
  return out;
}

std::vector<int> sample_users(std::size_t available, int wanted, std::uint64_t seed) {
  std::vector<int> order(available);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  const std::size_t take = std::min<std::size_t>(available, static_cast<std::size_t>(wanted));
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<int> out(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_audit_items(const CommonOpts& opt) {
  if (opt.model_dir.empty()) throw reach::invalid_input_error("audit-items requires --model");
  const reach::ModelBundle bundle = reach::load_model(opt.model_dir);
  std::optional<reach::ModelJoin> join;
  if (!opt.ratings_path.empty()) join = reach::join_ratings(bundle, load_ratings(opt));

  reach::ItemAuditOptions audit_opts;
  audit_opts.jobs = opt.jobs;
  audit_opts.tol = tolerances_for(opt);
  audit_opts.exact_top1 = opt.exact;

  Json records = Json::array();
  Json summaries = Json::array();
  std::vector<double> xs, fraction, count;
  for (int N : opt.N) {
    const reach::ItemAuditSummary summary = reach::item_audit(bundle.model, N, opt.nh, audit_opts);
    Json s;
    s["N"] = N;
    s["N_h"] = opt.nh;
    s["availability_lower_bound"] = summary.availability_lower_bound;
    if (opt.exact) {
      long exact_avail = 0;
      for (const auto& rec : summary.per_item)
        if (rec.exact_top1.value_or(false)) ++exact_avail;
      s["exact_top1_fraction"] =
          static_cast<double>(exact_avail) / static_cast<double>(bundle.model.m());
    }
    summaries.push_back(s);
    xs.push_back(N);
    fraction.push_back(summary.availability_lower_bound);
    count.push_back(summary.availability_lower_bound * static_cast<double>(bundle.model.m()));
    for (const auto& rec : summary.per_item) {
      Json r;
      r["N"] = N;
      r["item_id"] = bundle.item_ids[static_cast<std::size_t>(rec.item_id)];
      r["delta"] = json_or_null(rec.delta);
      r["gram_slack"] = json_or_null(rec.gram_slack);
      r["aligned_reachable"] = rec.aligned_reachable;
      if (rec.exact_top1) r["exact_top1"] = *rec.exact_top1;
      if (join) {
        r["n_ratings"] = join->item_counts[static_cast<std::size_t>(rec.item_id)];
        r["mean_rating"] = json_or_null(join->item_means[static_cast<std::size_t>(rec.item_id)]);
      }
      records.push_back(r);
    }
  }
  Json summary;
  summary["per_N"] = summaries;
  if (join) {
    summary["dropped_unknown_items"] = join->dropped_unknown_items;
    summary["dropped_duplicates"] = join->dropped_duplicates;
  }
  if (!opt.out_path.empty())
    reach::write_report(config_echo("audit-items", opt, &bundle), summary, records, opt.out_path,
                        reach::report_format_from_string(opt.report_format));
  if (!opt.plot_path.empty()) {
    std::vector<reach::PlotSeries> curves;
    curves.push_back({"availability_fraction", xs, fraction});
    curves.push_back({"aligned_reachable_count", xs, count});
    reach::emit_plotdata(curves, opt.plot_path);
  }
  for (std::size_t i = 0; i < xs.size(); ++i)
    std::cout << "N=" << xs[i] << " availability_lower_bound=" << fraction[i] << "\n";
  return 0;
}

int cmd_popularity(const CommonOpts& opt) {
  if (opt.model_dir.empty() || opt.ratings_path.empty())
    throw reach::invalid_input_error("popularity requires --model and --ratings");
  const reach::ModelBundle bundle = reach::load_model(opt.model_dir);
  const reach::ModelJoin join = reach::join_ratings(bundle, load_ratings(opt));

  reach::ItemAuditOptions audit_opts;
  audit_opts.jobs = opt.jobs;
  audit_opts.tol = tolerances_for(opt);
  const int N = opt.N.front();
  const reach::ItemAuditSummary audit = reach::item_audit(bundle.model, N, opt.nh, audit_opts);
  std::vector<char> available(audit.per_item.size());
  for (std::size_t i = 0; i < audit.per_item.size(); ++i)
    available[i] = audit.per_item[i].aligned_reachable ? 1 : 0;
  const reach::PopularityStats stats =
      reach::popularity_stats(join.item_counts, join.item_means, available);

  Json records = Json::array();
  for (std::size_t i = 0; i < audit.per_item.size(); ++i) {
    Json r;
    r["item_id"] = bundle.item_ids[i];
    r["aligned_reachable"] = static_cast<bool>(available[i]);
    r["n_ratings"] = join.item_counts[i];
    r["mean_rating"] = json_or_null(join.item_means[i]);
    records.push_back(r);
  }
  Json summary;
  summary["N"] = N;
  summary["availability_lower_bound"] = audit.availability_lower_bound;
  summary["dropped_unknown_items"] = join.dropped_unknown_items;
  if (!opt.out_path.empty())
    reach::write_report(config_echo("popularity", opt, &bundle), summary, records, opt.out_path,
                        reach::report_format_from_string(opt.report_format));
  if (!opt.plot_path.empty()) {
    std::vector<reach::PlotSeries> curves;
    curves.push_back(reach::series_from_cdf("num_ratings/available", stats.count_available));
    curves.push_back(reach::series_from_cdf("num_ratings/unavailable", stats.count_unavailable));
    curves.push_back(reach::series_from_cdf("num_ratings/all", stats.count_all));
    curves.push_back(reach::series_from_cdf("mean_rating/available", stats.mean_available));
    curves.push_back(reach::series_from_cdf("mean_rating/unavailable", stats.mean_unavailable));
    curves.push_back(reach::series_from_cdf("mean_rating/all", stats.mean_all));
    reach::emit_plotdata(curves, opt.plot_path);
  }
  std::cout << "N=" << N << " availability_lower_bound=" << audit.availability_lower_bound
            << "\n";
  return 0;
}

std::vector<std::string> policies_for(const CommonOpts& opt) {
  if (opt.mode == "history") return {""};
  if (opt.policy == "both") return {"random", "top"};
  return {opt.policy};
}

int cmd_recourse(const CommonOpts& opt) {
  if (opt.model_dir.empty() || opt.ratings_path.empty())
    throw reach::invalid_input_error("recourse requires --model and --ratings");
  reach::ModelBundle bundle = reach::load_model(opt.model_dir);
  const reach::RatingsTable table = load_ratings(opt);
  if (opt.top_items > 0) bundle = subset_bundle(bundle, table);
  const reach::ModelJoin join = reach::join_ratings(bundle, table);
  const auto [lo, hi] = parse_bounds(opt.bounds);
  const int N = opt.N.front();
  const reach::RecourseMode mode = opt.mode == "history" ? reach::RecourseMode::history_edits
                                                         : reach::RecourseMode::reactions;

  const std::vector<int> picked = sample_users(join.histories.size(), opt.users, opt.seed);
  const std::vector<std::string> policies = policies_for(opt);

  struct Row {
    long long user_id;
    int history_len;
    std::string policy;
    double fraction;
    long unseen;
    long reachable;
  };
  std::vector<Row> rows(picked.size() * policies.size());
  reach::parallel_for(static_cast<long>(rows.size()), opt.jobs, [&](long idx) {
    const std::size_t ui = static_cast<std::size_t>(idx) / policies.size();
    const std::size_t pi = static_cast<std::size_t>(idx) % policies.size();
    const reach::RatingHistory& hist =
        join.histories[static_cast<std::size_t>(picked[ui])];
    reach::RecourseRecord rec;
    if (mode == reach::RecourseMode::history_edits) {
      rec = reach::user_recourse(bundle.model, hist, mode, N, nullptr, false, lo, hi);
    } else {
      const auto policy = policies[pi] == "random" ? reach::ReactionPolicy::random
                                                   : reach::ReactionPolicy::top;
      const std::vector<int> rset =
          reach::reaction_set(bundle.model, hist, policy, opt.set_size, opt.seed);
      rec = reach::user_recourse(bundle.model, hist, mode, N, &rset, false, lo, hi);
    }
    rows[static_cast<std::size_t>(idx)] =
        Row{hist.user_id, rec.history_len, policies[pi], rec.reachable_fraction,
            rec.unseen_count, rec.reachable_count};
  });

  Json records = Json::array();
  for (const auto& row : rows) {
    Json r;
    r["user_id"] = row.user_id;
    r["history_len"] = row.history_len;
    if (!row.policy.empty()) r["policy"] = row.policy;
    r["unseen_count"] = row.unseen;
    r["reachable_count"] = row.reachable;
    r["reachable_fraction"] = row.fraction;
    records.push_back(r);
  }
  Json summary;
  summary["mode"] = opt.mode;
  summary["N"] = N;
  summary["users_sampled"] = static_cast<long>(picked.size());
  summary["m_items"] = bundle.model.m();
  if (!opt.out_path.empty())
    reach::write_report(config_echo("recourse", opt, &bundle), summary, records, opt.out_path,
                        reach::report_format_from_string(opt.report_format));
  if (!opt.plot_path.empty()) {
    std::vector<reach::PlotSeries> curves;
    for (const auto& pol : policies) {
      reach::PlotSeries s;
      s.name = opt.mode + (pol.empty() ? "" : "/" + pol);
      for (const auto& row : rows) {
        if (row.policy != pol) continue;
        s.x.push_back(row.history_len);
        s.y.push_back(row.fraction);
      }
      curves.push_back(std::move(s));
    }
    reach::emit_plotdata(curves, opt.plot_path);
  }
  std::cout << "recourse mode=" << opt.mode << " users=" << picked.size() << "\n";
  return 0;
}

int cmd_difficulty(const CommonOpts& opt, long long target_ext) {
  if (opt.model_dir.empty() || opt.ratings_path.empty())
    throw reach::invalid_input_error("difficulty requires --model and --ratings");
  reach::ModelBundle bundle = reach::load_model(opt.model_dir);
  const reach::RatingsTable table = load_ratings(opt);
  if (opt.top_items > 0) bundle = subset_bundle(bundle, table);
  const reach::ModelJoin join = reach::join_ratings(bundle, table);
  const auto [lo, hi] = parse_bounds(opt.bounds);
  const reach::RecourseMode mode = opt.mode == "history" ? reach::RecourseMode::history_edits
                                                         : reach::RecourseMode::reactions;
  const reach::Tolerances tol = tolerances_for(opt);

  // Default target: the most-rated item, ties by lower external id.
  int target = -1;
  if (target_ext >= 0) {
    for (std::size_t i = 0; i < bundle.item_ids.size(); ++i)
      if (bundle.item_ids[i] == target_ext) target = static_cast<int>(i);
    if (target < 0)
      throw reach::invalid_input_error("--item " + std::to_string(target_ext) +
                                       " is not in the model");
  } else {
    long best = -1;
    for (std::size_t i = 0; i < join.item_counts.size(); ++i)
      if (join.item_counts[i] > best) {
        best = join.item_counts[i];
        target = static_cast<int>(i);
      }
  }

  const std::vector<int> picked = sample_users(join.histories.size(), opt.users, opt.seed);
  const std::vector<std::string> policies = policies_for(opt);

  const reach::AverageSet avg_set =
      opt.avg == "all" ? reach::AverageSet::all_unseen : reach::AverageSet::reachable;
  struct Row {
    long long user_id;
    int history_len;
    std::string policy;
    bool seen = false;
    std::optional<double> exact_cost;
    std::optional<double> feasible_point_cost;
    double bound = 0.0;
    bool alignment = false;
    double aggregate_bound = 0.0;
    double b_dagger_norm = 0.0;
  };
  std::vector<Row> rows(picked.size() * policies.size());
  reach::parallel_for(static_cast<long>(rows.size()), opt.jobs, [&](long idx) {
    const std::size_t ui = static_cast<std::size_t>(idx) / policies.size();
    const std::size_t pi = static_cast<std::size_t>(idx) % policies.size();
    const reach::RatingHistory& hist = join.histories[static_cast<std::size_t>(picked[ui])];
    Row row;
    row.user_id = hist.user_id;
    row.history_len = static_cast<int>(hist.omega.size());
    row.policy = policies[pi];
    std::vector<int> rset;
    const std::vector<int>* rset_ptr = nullptr;
    if (mode == reach::RecourseMode::reactions) {
      const auto policy = policies[pi] == "random" ? reach::ReactionPolicy::random
                                                   : reach::ReactionPolicy::top;
      rset = reach::reaction_set(bundle.model, hist, policy, opt.set_size, opt.seed);
      rset_ptr = &rset;
    }
    const bool in_hist = std::binary_search(hist.omega.begin(), hist.omega.end(), target);
    const bool in_rset = std::binary_search(rset.begin(), rset.end(), target);
    if (in_hist || in_rset) {
      row.seen = true;
    } else {
      const reach::DifficultyRecord rec =
          reach::difficulty_l1(bundle.model, hist, target, mode, lo, hi, rset_ptr, tol);
      row.exact_cost = rec.exact_cost;
      row.feasible_point_cost = rec.feasible_point_cost;
      row.bound = rec.bound;
      row.alignment = rec.alignment_holds;
    }
    const reach::DifficultyReport agg =
        reach::difficulty_bound(bundle.model, hist, mode, rset_ptr, avg_set);
    row.aggregate_bound = agg.aggregate_bound;
    row.b_dagger_norm = agg.b_dagger_norm;
    rows[static_cast<std::size_t>(idx)] = std::move(row);
  });

  Json records = Json::array();
  long infeasible = 0, seen = 0;
  double cost_sum = 0.0;
  long cost_n = 0;
  for (const auto& row : rows) {
    Json r;
    r["user_id"] = row.user_id;
    r["history_len"] = row.history_len;
    if (!row.policy.empty()) r["policy"] = row.policy;
    r["target_item"] = bundle.item_ids[static_cast<std::size_t>(target)];
    r["target_seen"] = row.seen;
    r["feasible"] = row.exact_cost.has_value();
    r["exact_cost"] = row.exact_cost ? Json(*row.exact_cost) : Json();
    r["feasible_point_cost"] =
        row.feasible_point_cost ? Json(*row.feasible_point_cost) : Json();
    r["bound"] = json_or_null(row.bound);
    r["alignment_holds"] = row.alignment;
    r["aggregate_bound"] = json_or_null(row.aggregate_bound);
    r["b_dagger_norm"] = json_or_null(row.b_dagger_norm);
    records.push_back(r);
    if (row.seen) {
      ++seen;
    } else if (!row.exact_cost) {
      ++infeasible;
    } else {
      cost_sum += *row.exact_cost;
      ++cost_n;
    }
  }
  Json summary;
  summary["target_item"] = bundle.item_ids[static_cast<std::size_t>(target)];
  summary["users_sampled"] = static_cast<long>(picked.size());
  summary["target_seen_count"] = seen;
  summary["infeasible_count"] = infeasible;
  summary["mean_exact_cost"] = cost_n ? Json(cost_sum / static_cast<double>(cost_n)) : Json();
  summary["avg_set"] = opt.avg;
  if (!opt.out_path.empty())
    reach::write_report(config_echo("difficulty", opt, &bundle), summary, records, opt.out_path,
                        reach::report_format_from_string(opt.report_format));
  if (!opt.plot_path.empty()) {
    std::vector<reach::PlotSeries> curves;
    for (const auto& pol : policies) {
      reach::PlotSeries s;
      s.name = "difficulty" + (pol.empty() ? std::string() : "/" + pol);
      for (const auto& row : rows) {
        if (row.policy != pol || !row.exact_cost) continue;
        s.x.push_back(row.history_len);
        s.y.push_back(*row.exact_cost);
      }
      curves.push_back(std::move(s));
    }
    reach::emit_plotdata(curves, opt.plot_path);
  }
  std::cout << "difficulty target=" << bundle.item_ids[static_cast<std::size_t>(target)]
            << " feasible=" << cost_n << " infeasible=" << infeasible << " seen=" << seen << "\n";
  return 0;
}

int cmd_coldstart(const CommonOpts& opt, const std::vector<long long>& candidate_ext) {
  if (opt.model_dir.empty()) throw reach::invalid_input_error("coldstart requires --model");
  if (candidate_ext.empty())
    throw reach::invalid_input_error("coldstart requires a nonempty --candidate list");
  const reach::ModelBundle bundle = reach::load_model(opt.model_dir);
  std::vector<int> candidate;
  for (long long ext : candidate_ext) {
    int idx = -1;
    for (std::size_t i = 0; i < bundle.item_ids.size(); ++i)
      if (bundle.item_ids[i] == ext) idx = static_cast<int>(i);
    if (idx < 0)
      throw reach::invalid_input_error("--candidate item " + std::to_string(ext) +
                                       " is not in the model");
    candidate.push_back(idx);
  }
  const int N = opt.N.front();
  const reach::ColdStartEval eval = reach::coldstart_eval(bundle.model, candidate, N);
  Json summary;
  Json cand = Json::array();
  for (int id : eval.candidate) cand.push_back(bundle.item_ids[static_cast<std::size_t>(id)]);
  summary["candidate"] = cand;
  summary["N"] = N;
  summary["recourse_count"] = eval.recourse_count;
  summary["unseen_count"] = bundle.model.m() - static_cast<long>(eval.candidate.size());
  summary["b_dagger_norm"] = json_or_null(eval.b_dagger_norm);
  if (!opt.out_path.empty())
    reach::write_report(config_echo("coldstart", opt, &bundle), summary, Json::array(),
                        opt.out_path, reach::report_format_from_string(opt.report_format));
  std::cout << "coldstart recourse_count=" << eval.recourse_count
            << " b_dagger_norm=" << eval.b_dagger_norm << "\n";
  return 0;
}

void write_ratings_tsv(const reach::RatingsTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw reach::io_error("cannot write ratings: " + path);
  for (const auto& e : table.entries) {
    out << table.user_ids[static_cast<std::size_t>(e.user)] << "\t"
        << table.item_ids[static_cast<std::size_t>(e.item)] << "\t"
        << reach::format_double(e.rating);
    if (e.timestamp >= 0) out << "\t" << e.timestamp;
    out << "\n";
  }
}

int cmd_synth(const reach::SynthSpec& spec, const std::string& ratings_out,
              const std::string& model_out) {
  if (ratings_out.empty()) throw reach::invalid_input_error("synth requires --out-ratings");
  const reach::SynthData data = reach::generate(spec);
  write_ratings_tsv(data.table, ratings_out);
  if (!model_out.empty()) {
    reach::ModelBundle bundle;
    bundle.model.Q = data.Q_star;
    bundle.model.b = Vector::Zero(spec.m_items);
    bundle.model.P = data.P_star;
    bundle.model.c = Vector::Zero(spec.n_users);
    bundle.model.mu = 0.0;
    bundle.model.lambda = 0.0;
    bundle.model.bias_sign = reach::BiasSign::residual;
    bundle.item_ids = data.table.item_ids;
    bundle.user_ids = data.table.user_ids;
    reach::save_model(bundle, model_out);
  }
  std::cout << "synth users=" << spec.n_users << " items=" << spec.m_items
            << " ratings=" << data.table.entries.size() << "\n";
  return 0;
}

int cmd_train(const CommonOpts& opt, const reach::TrainConfig& cfg) {
  const std::string& model_out = opt.out_path;
  if (model_out.empty()) throw reach::invalid_input_error("train requires --out (model dir)");
  const reach::RatingsTable table = load_ratings(opt);
  const reach::TrainResult result = reach::als_train(table, cfg);
  reach::ModelBundle bundle;
  bundle.model = result.model;
  bundle.item_ids = table.item_ids;
  bundle.user_ids = table.user_ids;
  reach::save_model(bundle, model_out);
  std::cout << "train d=" << cfg.d << " sweeps=" << result.objective.size()
            << " train_rmse=" << result.train_rmse << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reachability and recourse audits for top-N linear recommenders"};
  app.require_subcommand(1);

  CommonOpts opt;
  long long item_flag = -1;
  std::vector<long long> candidate;
  reach::SynthSpec synth_spec;
  std::string synth_ratings_out, synth_model_out;
  reach::TrainConfig train_cfg;
  std::string train_bias_sign = "residual";

  const auto add_common = [&](CLI::App* cmd, bool needs_model, bool needs_ratings) {
    if (needs_model) cmd->add_option("--model", opt.model_dir, "model bundle directory");
    if (needs_ratings) {
      cmd->add_option("--ratings", opt.ratings_path, "ratings file");
      cmd->add_option("--format", opt.format, "ratings format: mlens|tsv|csv")
          ->check(CLI::IsMember({"mlens", "tsv", "csv"}));
      cmd->add_flag("--log1p", opt.log1p, "apply log(1+x) to ratings (listen counts)");
      cmd->add_option("--top-items", opt.top_items, "keep only the k most-rated items");
    }
    cmd->add_option("-N", opt.N, "recommendation set size (repeatable)");
    cmd->add_option("--nh", opt.nh, "assumed history length N_h");
    cmd->add_option("--bounds", opt.bounds, "rating interval LO:HI (use -inf/inf)");
    cmd->add_option("--seed", opt.seed, "random seed");
    cmd->add_option("--out", opt.out_path, "report output path");
    cmd->add_option("--plot", opt.plot_path, "plot-data csv output path");
    cmd->add_option("--report-format", opt.report_format, "json|csv")
        ->check(CLI::IsMember({"json", "csv"}));
    cmd->add_option("--eps", opt.eps_scale, "strict-inequality epsilon scale");
    cmd->add_option("--iter-factor", opt.iter_factor, "simplex iteration cap factor");
    cmd->add_option("--jobs", opt.jobs, "worker threads");
  };

  CLI::App* items = app.add_subcommand("audit-items", "whole-model aligned-reachability audit");
  add_common(items, true, true);
  items->add_flag("--exact", opt.exact, "also decide exact top-1 availability per item");

  CLI::App* pop = app.add_subcommand("popularity", "popularity CDFs split by availability");
  add_common(pop, true, true);

  CLI::App* rec = app.add_subcommand("recourse", "per-user recourse amounts");
  add_common(rec, true, true);
  rec->add_option("--mode", opt.mode, "history|reaction")
      ->check(CLI::IsMember({"history", "reaction"}));
  rec->add_option("--policy", opt.policy, "random|top|both (reaction mode)")
      ->check(CLI::IsMember({"random", "top", "both"}));
  rec->add_option("--set-size", opt.set_size, "reaction set size");
  rec->add_option("--users", opt.users, "number of sampled users");

  CLI::App* diff = app.add_subcommand("difficulty", "l1 recourse difficulty for one item");
  add_common(diff, true, true);
  diff->add_option("--mode", opt.mode, "history|reaction")
      ->check(CLI::IsMember({"history", "reaction"}));
  diff->add_option("--policy", opt.policy, "random|top|both (reaction mode)")
      ->check(CLI::IsMember({"random", "top", "both"}));
  diff->add_option("--set-size", opt.set_size, "reaction set size");
  diff->add_option("--users", opt.users, "number of sampled users");
  diff->add_option("--item", item_flag, "target item external id (default: most rated)");
  diff->add_option("--avg", opt.avg, "bound averaging set: reachable|all")
      ->check(CLI::IsMember({"reachable", "all"}));

  CLI::App* cold = app.add_subcommand("coldstart", "onboarding-set evaluation");
  add_common(cold, true, false);
  cold->add_option("--candidate", candidate, "candidate item external ids")->delimiter(',');

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic ratings dataset");
  synth->add_option("--synth-users", synth_spec.n_users, "number of users");
  synth->add_option("--synth-items", synth_spec.m_items, "number of items");
  synth->add_option("--synth-d", synth_spec.d_star, "planted dimension");
  synth->add_option("--density", synth_spec.density, "observation density");
  synth->add_option("--noise", synth_spec.noise, "rating noise sigma");
  synth->add_option("--skew", synth_spec.skew, "popularity skew exponent");
  synth->add_option("--seed", synth_spec.seed, "random seed");
  synth->add_option("--out-ratings", synth_ratings_out, "ratings tsv output path");
  synth->add_option("--out-model", synth_model_out, "ground-truth factor bundle dir");

  CLI::App* train = app.add_subcommand("train", "ALS-train a factor model");
  add_common(train, false, true);
  train->add_option("-d", train_cfg.d, "latent dimension");
  train->add_option("--lambda", train_cfg.lambda, "regularization");
  train->add_option("--sweeps", train_cfg.sweeps, "ALS sweeps");
  train->add_option("--bias-sign", train_bias_sign, "paper-literal|residual")
      ->check(CLI::IsMember({"paper-literal", "residual"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (items->parsed()) return cmd_audit_items(opt);
    if (pop->parsed()) return cmd_popularity(opt);
    if (rec->parsed()) return cmd_recourse(opt);
    if (diff->parsed()) return cmd_difficulty(opt, item_flag);
    if (cold->parsed()) return cmd_coldstart(opt, candidate);
    if (synth->parsed()) return cmd_synth(synth_spec, synth_ratings_out, synth_model_out);
    if (train->parsed()) {
      train_cfg.seed = opt.seed;
      train_cfg.bias_sign = reach::bias_sign_from_string(train_bias_sign);
      return cmd_train(opt, train_cfg);
    }
  } catch (const reach::invalid_input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const reach::parse_error& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const reach::io_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const reach::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
