#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "cibhash/baselines.hpp"
#include "cibhash/cli.hpp"
#include "cibhash/parallel.hpp"
#include "cibhash/retrieval.hpp"

namespace cibhash::cli {

using nlohmann::json;

namespace {

struct Common {
  std::string report_path;
  bool record_time = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--report", c.report_path, "Also write the JSON report to this file");
  app->add_flag("--record-time", c.record_time, "Include wall time in the report (breaks bitwise reproducibility)");
}

/// Optional per-field overrides applied on top of the config file.
struct Overrides {
  std::string config_path;
  std::optional<std::size_t> code_bits, hidden, batch, epochs;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr, temperature, beta, mask_prob, noise_sigma, scale_lo, scale_hi;
};

void add_overrides(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_path, "Flat JSON config file");
  app->add_option("--code-bits", o.code_bits, "Code length D");
  app->add_option("--hidden", o.hidden, "Hidden width H");
  app->add_option("--batch", o.batch, "Batch size N");
  app->add_option("--epochs", o.epochs, "Training epochs");
  app->add_option("--seed", o.seed, "Random seed");
  app->add_option("--lr", o.lr, "Adam learning rate");
  app->add_option("--temperature,--tau", o.temperature, "NT-Xent temperature");
  app->add_option("--beta", o.beta, "KL weight");
  app->add_option("--mask-prob", o.mask_prob, "View masking probability");
  app->add_option("--noise-sigma", o.noise_sigma, "View noise, in units of per-dimension std");
  app->add_option("--scale-lo", o.scale_lo, "Lower bound of the view scale");
  app->add_option("--scale-hi", o.scale_hi, "Upper bound of the view scale");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::malformed, "'" + path + "' is not valid JSON: " + e.what());
  }
}

TrainConfig resolve(const Overrides& o) {
  TrainConfig cfg;
  if (!o.config_path.empty()) cfg = config_from_json(read_json_file(o.config_path));
  if (o.code_bits) cfg.code_bits = *o.code_bits;
  if (o.hidden) cfg.hidden = *o.hidden;
  if (o.batch) cfg.batch = *o.batch;
  if (o.epochs) cfg.epochs = *o.epochs;
  if (o.seed) cfg.seed = *o.seed;
  if (o.lr) cfg.lr = *o.lr;
  if (o.temperature) cfg.loss.temperature = *o.temperature;
  if (o.beta) cfg.loss.beta = *o.beta;
  if (o.mask_prob) cfg.views.mask_prob = *o.mask_prob;
  if (o.noise_sigma) cfg.views.noise_sigma = *o.noise_sigma;
  if (o.scale_lo) cfg.views.scale_lo = *o.scale_lo;
  if (o.scale_hi) cfg.views.scale_hi = *o.scale_hi;
  cfg.validate();
  return cfg;
}

FeatureDataset load_any(const std::string& features, const std::string& labels) {
  if (features.size() >= 4 && features.substr(features.size() - 4) == ".csv") {
    FeatureDataset ds = load_csv(features);
    if (!labels.empty()) {
      ds.labels = load_labels(labels);
      if (ds.labels.size() != ds.size()) fail(ErrorCode::malformed, "label count does not match '" + features + "'");
    }
    return ds;
  }
  return labels.empty() ? load_features(features) : load_dataset(features, labels);
}

json trace_json(const TrainReport& rep) {
  json t = json::array();
  for (std::size_t e = 0; e < rep.epochs.size(); ++e)
    t.push_back({{"epoch", e + 1},
                 {"contrastive", rep.epochs[e].contrastive},
                 {"kl", rep.epochs[e].kl},
                 {"total", rep.epochs[e].total}});
  return t;
}

void emit(json report, const Common& common, double wall, std::ostream& out) {
  if (common.record_time) report["wall_time_s"] = wall;
  const auto problems = validate_report(report);
  if (!problems.empty()) fail(ErrorCode::malformed, "internal: report violates schema: " + problems.front());
  const std::string text = report.dump(2) + "\n";
  out << text;
  if (!common.report_path.empty()) {
    std::ofstream f(common.report_path, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCode::io, "cannot write '" + common.report_path + "'");
    f << text;
  }
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double eval_map(const DeterministicCode& q, const DeterministicCode& db, const QuerySplit& split, std::size_t n,
                Relevance rel) {
  return map_at_n(pack(q), pack(db), split.queries.labels, split.database.labels, n, rel, thread_count());
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contrastive information-bottleneck hashing", args.empty() ? "cibhash" : args.front()};
  app.require_subcommand(1);
  Common common;
  std::function<int()> action;
  using clock = std::chrono::steady_clock;

  // synth -------------------------------------------------------------------
  SyntheticSpec synth_spec;
  std::string synth_out;
  std::size_t synth_split = 0;
  auto* synth = app.add_subcommand("synth", "Generate a Gaussian-cluster dataset");
  synth->add_option("--clusters", synth_spec.clusters, "Number of clusters")->capture_default_str();
  synth->add_option("--dim", synth_spec.dim, "Feature dimension")->capture_default_str();
  synth->add_option("--per-cluster", synth_spec.per_cluster, "Items per cluster")->capture_default_str();
  synth->add_option("--separation", synth_spec.separation, "Center distance from the origin")->capture_default_str();
  synth->add_option("--seed", synth_spec.seed, "Random seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Output prefix; writes PREFIX.cibf and PREFIX.cibl")->required();
  synth->add_option("--split-every", synth_split,
                    "Also write PREFIX.query.* (every k-th item) and PREFIX.db.* (the rest)");
  add_common(synth, common);
  synth->callback([&] {
    action = [&] {
      const auto t0 = clock::now();
      const FeatureDataset ds = generate_synthetic(synth_spec);
      save_features(ds, synth_out + ".cibf");
      save_labels(ds.labels, synth_out + ".cibl");
      json config = {{"clusters", synth_spec.clusters},   {"dim", synth_spec.dim},
                     {"per_cluster", synth_spec.per_cluster}, {"separation", synth_spec.separation},
                     {"seed", synth_spec.seed},           {"split_every", synth_split}};
      json report = make_report("synth", config);
      report["outputs"] = {{"features", synth_out + ".cibf"}, {"labels", synth_out + ".cibl"},
                           {"rows", ds.size()}, {"cols", ds.dim()}};
      if (synth_split > 0) {
        const QuerySplit s = split_every(ds, synth_split);
        save_features(s.queries, synth_out + ".query.cibf");
        save_labels(s.queries.labels, synth_out + ".query.cibl");
        save_features(s.database, synth_out + ".db.cibf");
        save_labels(s.database.labels, synth_out + ".db.cibl");
        report["outputs"]["query_rows"] = s.queries.size();
        report["outputs"]["db_rows"] = s.database.size();
      }
      emit(report, common, std::chrono::duration<double>(clock::now() - t0).count(), out);
      return kOk;
    };
  });

  // train -------------------------------------------------------------------
  Overrides train_o;
  std::string train_features, train_labels, train_out, train_mode;
  auto* train_cmd = app.add_subcommand("train", "Train an encoder and write a checkpoint");
  add_overrides(train_cmd, train_o);
  train_cmd->add_option("--features", train_features, "Training features (.cibf or .csv)")->required();
  train_cmd->add_option("--labels", train_labels, "Optional labels (not used for training)");
  train_cmd->add_option("--out", train_out, "Checkpoint path")->required();
  train_cmd->add_option("--mode", train_mode, "cibhash | clhash | naive-cl")
      ->check(CLI::IsMember({"cibhash", "clhash", "naive-cl"}));
  add_common(train_cmd, common);
  train_cmd->callback([&] {
    action = [&] {
      const auto t0 = clock::now();
      TrainConfig cfg = resolve(train_o);
      const bool naive = train_mode == "naive-cl";
      if (!train_mode.empty() && !naive) cfg.mode = parse_train_mode(train_mode);
      const FeatureDataset ds = load_any(train_features, train_labels);
      json config = config_to_json(cfg);
      TrainReport rep;
      if (naive) {
        config["mode"] = "naive-cl";
        config.erase("beta");
        const NaiveClModel model = naive_cl(ds, cfg);
        save_checkpoint(model.to_checkpoint(), train_out);
        rep = model.report;
      } else {
        const TrainResult r = train(ds, cfg);
        save_checkpoint({r.params, r.adam, std::nullopt}, train_out);
        rep = r.report;
      }
      json report = make_report("train", config);
      report["trace"] = trace_json(rep);
      report["steps"] = rep.steps;
      report["outputs"] = {{"checkpoint", train_out}};
      emit(report, common, std::chrono::duration<double>(clock::now() - t0).count(), out);
      return kOk;
    };
  });

  // encode ------------------------------------------------------------------
  std::string enc_ckpt, enc_features, enc_out;
  auto* encode = app.add_subcommand("encode", "Encode features with a checkpoint");
  encode->add_option("--checkpoint", enc_ckpt, "Checkpoint path")->required();
  encode->add_option("--features", enc_features, "Features (.cibf or .csv)")->required();
  encode->add_option("--out", enc_out, "Output code file (.cibc)")->required();
  add_common(encode, common);
  encode->callback([&] {
    action = [&] {
      const auto t0 = clock::now();
      const Checkpoint ckpt = load_checkpoint(enc_ckpt);
      const FeatureDataset ds = load_any(enc_features, "");
      const PackedCodes codes = pack(encode_checkpoint(ckpt, ds.features));
      save_codes(codes, enc_out);
      json report = make_report("encode", {{"checkpoint", enc_ckpt}, {"features", enc_features}});
      report["outputs"] = {{"codes", enc_out}, {"rows", codes.size()}, {"bits", codes.bits()}};
      emit(report, common, std::chrono::duration<double>(clock::now() - t0).count(), out);
      return kOk;
    };
  });

  // eval --------------------------------------------------------------------
  std::string ev_q, ev_db, ev_ql, ev_dbl, ev_rel = "single";
  std::vector<std::string> ev_metrics;
  std::size_t ev_n = 100;
  auto* eval = app.add_subcommand("eval", "Retrieval metrics for query codes against database codes");
  eval->add_option("--queries", ev_q, "Query codes (.cibc)")->required();
  eval->add_option("--db", ev_db, "Database codes (.cibc)")->required();
  eval->add_option("--query-labels", ev_ql, "Query labels (.cibl)")->required();
  eval->add_option("--db-labels", ev_dbl, "Database labels (.cibl)")->required();
  eval->add_option("--metric", ev_metrics, "map | precision | pr (repeatable)")
      ->check(CLI::IsMember({"map", "precision", "pr"}));
  eval->add_option("--n", ev_n, "Cut-off N for MAP@N and Precision@N")->capture_default_str();
  eval->add_option("--relevance", ev_rel, "single | multi")->check(CLI::IsMember({"single", "multi"}));
  add_common(eval, common);
  eval->callback([&] {
    action = [&] {
      const auto t0 = clock::now();
      if (ev_metrics.empty()) ev_metrics = {"map"};
      require(ev_n >= 1, "--n must be at least 1");
      const PackedCodes q = load_codes(ev_q), db = load_codes(ev_db);
      const LabelSet ql = load_labels(ev_ql), dbl = load_labels(ev_dbl);
      if (ql.size() != q.size() || dbl.size() != db.size())
        fail(ErrorCode::malformed, "label counts do not match code counts");
      if (q.bits() != db.bits()) fail(ErrorCode::malformed, "query and database code widths differ");
      const Relevance rel = parse_relevance(ev_rel);
      const std::size_t threads = thread_count();
      json config = {{"queries", ev_q}, {"db", ev_db}, {"query_labels", ev_ql}, {"db_labels", ev_dbl},
                     {"metric", ev_metrics}, {"n", ev_n}, {"relevance", ev_rel}};
      json report = make_report("eval", config);
      for (const auto& m : ev_metrics) {
        if (m == "map") {
          report["metrics"]["map_at_n"] = map_at_n(q, db, ql, dbl, ev_n, rel, threads);
        } else if (m == "precision") {
          report["metrics"]["precision_at_n"] = precision_at_n(q, db, ql, dbl, ev_n, rel, threads);
        } else {
          json pts = json::array();
          for (const auto& p : pr_curve(q, db, ql, dbl, rel, threads))
            pts.push_back({{"radius", p.radius}, {"recall", p.recall}, {"precision", p.precision}});
          report["metrics"]["pr_curve"] = pts;
        }
      }
      emit(report, common, std::chrono::duration<double>(clock::now() - t0).count(), out);
      return kOk;
    };
  });

  // sweep -------------------------------------------------------------------
  Overrides sw_o;
  std::string sw_features, sw_labels, sw_param, sw_rel = "single";
  std::vector<double> sw_values;
  std::size_t sw_seeds = 3, sw_every = 5, sw_n = 100;
  auto* sweep = app.add_subcommand("sweep", "Median MAP@N over seeds for each value of one parameter");
  add_overrides(sweep, sw_o);
  sweep->add_option("--features", sw_features, "Features (.cibf or .csv)")->required();
  sweep->add_option("--labels", sw_labels, "Labels (.cibl)")->required();
  sweep->add_option("--param", sw_param, "beta | tau | batch")
      ->required()
      ->check(CLI::IsMember({"beta", "tau", "batch"}));
  sweep->add_option("--values", sw_values, "Parameter values")->required();
  sweep->add_option("--seeds", sw_seeds, "Training seeds per value (seed, seed+1, ...)")->capture_default_str();
  sweep->add_option("--query-every", sw_every, "Every k-th item is a query")->capture_default_str();
  sweep->add_option("--n", sw_n, "Cut-off N for MAP@N")->capture_default_str();
  sweep->add_option("--relevance", sw_rel, "single | multi")->check(CLI::IsMember({"single", "multi"}));
  add_common(sweep, common);
  sweep->callback([&] {
    action = [&] {
      const auto t0 = clock::now();
      require(sw_seeds >= 1, "--seeds must be at least 1");
      const TrainConfig base = resolve(sw_o);
      const FeatureDataset ds = load_any(sw_features, sw_labels);
      const QuerySplit split = split_every(ds, sw_every);
      const Relevance rel = parse_relevance(sw_rel);

      std::vector<TrainConfig> cells;
      for (double v : sw_values) {
        for (std::size_t s = 0; s < sw_seeds; ++s) {
          TrainConfig c = base;
          if (sw_param == "beta") c.loss.beta = v;
          if (sw_param == "tau") c.loss.temperature = v;
          if (sw_param == "batch") {
            require(v >= 2 && v == std::floor(v), "batch values must be integers >= 2");
            c.batch = static_cast<std::size_t>(v);
          }
          c.seed = base.seed + s;
          c.validate();
          cells.push_back(c);
        }
      }
      std::vector<double> maps(cells.size());
      parallel_for(cells.size(), thread_count(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
          const TrainResult r = train(split.database, cells[i]);
          maps[i] = eval_map(encode_dataset(r.params, split.queries.features),
                             encode_dataset(r.params, split.database.features), split, sw_n, rel);
        }
      });

      json config = config_to_json(base);
      config["param"] = sw_param;
      config["values"] = sw_values;
      config["seeds"] = sw_seeds;
      config["query_every"] = sw_every;
      config["n"] = sw_n;
      config["relevance"] = sw_rel;
      json report = make_report("sweep", config);
      json rows = json::array();
      for (std::size_t v = 0; v < sw_values.size(); ++v) {
        std::vector<double> per(maps.begin() + v * sw_seeds, maps.begin() + (v + 1) * sw_seeds);
        rows.push_back({{"value", sw_values[v]}, {"map_at_n", per}, {"median_map_at_n", median(per)}});
      }
      report["sweep"] = rows;
      emit(report, common, std::chrono::duration<double>(clock::now() - t0).count(), out);
      return kOk;
    };
  });

  // gradcheck ---------------------------------------------------------------
  GradcheckConfig gc;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Analytic vs finite-difference gradients");
  gradcheck_cmd->add_option("--input-dim", gc.input_dim, "Input dimension d")->capture_default_str();
  gradcheck_cmd->add_option("--hidden", gc.hidden, "Hidden width H")->capture_default_str();
  gradcheck_cmd->add_option("--code-bits", gc.code_bits, "Code length D")->capture_default_str();
  gradcheck_cmd->add_option("--batch", gc.batch, "Batch size N")->capture_default_str();
  gradcheck_cmd->add_option("--temperature,--tau", gc.temperature, "NT-Xent temperature")->capture_default_str();
  gradcheck_cmd->add_option("--beta", gc.beta, "KL weight")->capture_default_str();
  gradcheck_cmd->add_option("--coordinates", gc.coordinates, "Coordinates per mode")->capture_default_str();
  gradcheck_cmd->add_option("--step", gc.step, "Finite-difference step")->capture_default_str();
  gradcheck_cmd->add_option("--tolerance", gc.tolerance, "Max relative error")->capture_default_str();
  gradcheck_cmd->add_option("--seed", gc.seed, "Random seed")->capture_default_str();
  gradcheck_cmd->add_flag("--inject-fault", gc.inject_fault, "Corrupt the analytic gradient (negative control)");
  add_common(gradcheck_cmd, common);
  gradcheck_cmd->callback([&] {
    action = [&] {
      const auto t0 = clock::now();
      const GradcheckReport r = gradcheck(gc);
      json config = {{"input_dim", gc.input_dim}, {"hidden", gc.hidden},   {"code_bits", gc.code_bits},
                     {"batch", gc.batch},         {"temperature", gc.temperature}, {"beta", gc.beta},
                     {"coordinates", gc.coordinates}, {"step", gc.step}, {"tolerance", gc.tolerance},
                     {"seed", gc.seed},           {"inject_fault", gc.inject_fault}};
      json report = make_report("gradcheck", config);
      report["gradcheck"] = {{"pass", r.pass},
                             {"soft_max_rel_error", r.soft_max_rel_error},
                             {"st_max_rel_error", r.st_max_rel_error},
                             {"checked", r.checked},
                             {"skipped_kinks", r.skipped_kinks},
                             {"worst",
                              {{"mode", r.worst.mode},
                               {"block", r.worst.block},
                               {"index", r.worst.index},
                               {"analytic", r.worst.analytic},
                               {"numeric", r.worst.numeric},
                               {"rel_error", r.worst.rel_error}}}};
      emit(report, common, std::chrono::duration<double>(clock::now() - t0).count(), out);
      if (!r.pass) {
        err << "gradcheck failed: worst " << r.worst.mode << " " << r.worst.block << "[" << r.worst.index
            << "] rel. error " << r.worst.rel_error << "\n";
        return kCheckFailure;
      }
      return kOk;
    };
  });

  // baseline ----------------------------------------------------------------
  Overrides bl_o;
  std::string bl_method, bl_fit, bl_features, bl_out, bl_ckpt_out;
  std::optional<std::size_t> bl_bits;
  auto* baseline = app.add_subcommand("baseline", "Non-learned (lsh) or ablation (naive-cl) codes");
  add_overrides(baseline, bl_o);
  baseline->add_option("--method", bl_method, "lsh | naive-cl")->required()->check(CLI::IsMember({"lsh", "naive-cl"}));
  baseline->add_option("--fit", bl_fit, "Features used to fit the baseline")->required();
  baseline->add_option("--features", bl_features, "Features to encode (default: the --fit set)");
  baseline->add_option("--bits", bl_bits, "Code length (overrides --code-bits)");
  baseline->add_option("--out", bl_out, "Output code file (.cibc)")->required();
  baseline->add_option("--checkpoint-out", bl_ckpt_out, "naive-cl only: also save the model checkpoint");
  add_common(baseline, common);
  baseline->callback([&] {
    action = [&] {
      const auto t0 = clock::now();
      TrainConfig cfg = resolve(bl_o);
      if (bl_bits) cfg.code_bits = *bl_bits;
      require(cfg.code_bits >= 1, "--bits must be at least 1");
      const FeatureDataset fit = load_any(bl_fit, "");
      const FeatureDataset target = bl_features.empty() ? fit : load_any(bl_features, "");
      json config;
      DeterministicCode codes;
      if (bl_method == "lsh") {
        config = {{"method", "lsh"}, {"bits", cfg.code_bits}, {"seed", cfg.seed}};
        codes = LshHasher::fit(fit.features, cfg.code_bits, cfg.seed).encode(target.features);
      } else {
        cfg.validate();
        config = config_to_json(cfg);
        config.erase("beta");
        config["mode"] = "naive-cl";
        config["method"] = "naive-cl";
        const NaiveClModel model = naive_cl(fit, cfg);
        codes = model.encode(target.features);
        if (!bl_ckpt_out.empty()) save_checkpoint(model.to_checkpoint(), bl_ckpt_out);
      }
      config["fit"] = bl_fit;
      config["features"] = bl_features.empty() ? bl_fit : bl_features;
      const PackedCodes packed = pack(codes);
      save_codes(packed, bl_out);
      json report = make_report("baseline", config);
      report["method"] = bl_method;
      report["outputs"] = {{"codes", bl_out}, {"rows", packed.size()}, {"bits", packed.bits()}};
      emit(report, common, std::chrono::duration<double>(clock::now() - t0).count(), out);
      return kOk;
    };
  });

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();  // program name
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    return action ? action() : kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::invalid_argument ? kUsage : kDataError;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
}

}  // namespace cibhash::cli
