// Command-line front end for the full workflow: prepare data, generate
// synthetic datasets, train and evaluate models, run comparisons and TSTR
// studies, and re-render existing reports.
//
// Every run is driven by one JSON manifest so results are reproducible
// from a single artifact. Paths inside the manifest resolve relative to
// the manifest's directory. Exit codes: 0 success, 1 usage error, 2 data
// or manifest error, 3 runtime error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "benchctr/data.hpp"
#include "benchctr/diffusion.hpp"
#include "benchctr/ingest.hpp"
#include "benchctr/models.hpp"
#include "benchctr/pipeline.hpp"
#include "benchctr/rulegen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
  std::string manifest_path;
  std::optional<std::int64_t> seed_override;
  std::optional<std::string> out_override;
  std::string format = "json";
  std::optional<int> workers_override;
};

struct RunContext {
  json manifest;
  fs::path base;     // manifest directory, for relative paths
  fs::path out_dir;
  std::uint64_t seed = 0;
  int workers = 1;
};

fs::path resolve(const RunContext& ctx, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : ctx.base / path;
}

int workers_default() {
  if (const char* env = std::getenv("BENCH_CTR_WORKERS")) {
    bool ok = true;
    const std::int64_t v = benchctr::parse_int(env, ok);
    if (ok && v >= 1) return static_cast<int>(v);
  }
  return 0;  // 0 = not set
}

RunContext make_context(const CommonArgs& args, bool manifest_required = true) {
  RunContext ctx;
  if (!args.manifest_path.empty()) {
    std::ifstream in(args.manifest_path);
    if (!in) throw benchctr::DataError("cannot open manifest: " + args.manifest_path);
    try {
      in >> ctx.manifest;
    } catch (const json::exception& e) {
      throw benchctr::DataError("malformed manifest " + args.manifest_path + ": " + e.what());
    }
    ctx.base = fs::absolute(fs::path(args.manifest_path)).parent_path();
  } else if (manifest_required) {
    throw benchctr::UsageError("--manifest is required for this command");
  } else {
    ctx.base = fs::current_path();
  }

  ctx.seed = static_cast<std::uint64_t>(
      args.seed_override ? *args.seed_override : ctx.manifest.value("seed", std::int64_t{42}));

  if (args.out_override) ctx.out_dir = fs::absolute(*args.out_override);
  else ctx.out_dir = resolve(ctx, ctx.manifest.value("out_dir", std::string("out")));
  fs::create_directories(ctx.out_dir);

  if (args.workers_override) ctx.workers = *args.workers_override;
  else if (int env = workers_default(); env > 0) ctx.workers = env;
  else ctx.workers = ctx.manifest.value("workers", 1);
  if (ctx.workers < 1) ctx.workers = 1;
  return ctx;
}

benchctr::Dataset load_manifest_dataset(const RunContext& ctx, const json& jd) {
  const std::string path = resolve(ctx, jd.at("path").get<std::string>()).string();
  if (!fs::exists(path)) throw benchctr::DataError("dataset file does not exist: " + path);
  std::string schema;
  if (jd.contains("schema")) schema = resolve(ctx, jd["schema"].get<std::string>()).string();
  const std::string delim = jd.value("delimiter", std::string(","));
  return benchctr::load_dataset_any(path, schema, delim.empty() ? ',' : delim[0]);
}

benchctr::PrepPolicy policy_from_manifest(const json& m) {
  benchctr::PrepPolicy policy;
  if (!m.contains("prep")) return policy;
  const json& jp = m["prep"];
  policy.numeric_missing_fill = jp.value("numeric_missing_fill", policy.numeric_missing_fill);
  policy.categorical_missing_token =
      jp.value("categorical_missing_token", policy.categorical_missing_token);
  policy.oov_min_freq = jp.value("oov_min_freq", policy.oov_min_freq);
  policy.bin_threshold = jp.value("bin_threshold", policy.bin_threshold);
  policy.validate();
  return policy;
}

benchctr::SplitSpec split_for(const RunContext& ctx, const benchctr::Dataset& ds) {
  if (ctx.manifest.contains("splits_file")) {
    std::ifstream in(resolve(ctx, ctx.manifest["splits_file"].get<std::string>()));
    if (!in) throw benchctr::DataError("cannot open splits file");
    json j;
    in >> j;
    return benchctr::split_from_json(j);
  }
  const json js = ctx.manifest.value("split", json::object());
  const std::string mode_s = js.value("mode", std::string("random"));
  std::vector<double> ratios = js.value("ratios", std::vector<double>{0.8, 0.1, 0.1});
  if (ratios.size() != 3) throw benchctr::DataError("manifest split.ratios must have 3 entries");
  const benchctr::SplitMode mode =
      mode_s == "chronological" ? benchctr::SplitMode::chronological : benchctr::SplitMode::random;
  return benchctr::split_holdout(ds, ratios[0], ratios[1], ratios[2], mode, ctx.seed,
                                 js.value("time_field", std::string()));
}

std::vector<benchctr::NamedModelSpec> models_from_manifest(const json& m) {
  if (!m.contains("models")) throw benchctr::DataError("manifest missing 'models'");
  std::vector<benchctr::NamedModelSpec> specs;
  for (const json& jm : m["models"]) {
    benchctr::NamedModelSpec named;
    named.spec.kind = benchctr::model_kind_from(jm.at("kind").get<std::string>());
    named.name = jm.value("name", std::string(benchctr::to_string(named.spec.kind)));
    named.spec.embedding_dim = jm.value("embedding_dim", named.spec.embedding_dim);
    named.spec.dropout = jm.value("dropout", named.spec.dropout);
    named.spec.pair_hash_buckets = jm.value("pair_hash_buckets", named.spec.pair_hash_buckets);
    named.spec.l2_embedding = jm.value("l2_embedding", named.spec.l2_embedding);
    if (jm.contains("hidden_layers"))
      named.spec.hidden_layers = jm["hidden_layers"].get<std::vector<int>>();
    named.spec.validate();
    specs.push_back(std::move(named));
  }
  if (specs.empty()) throw benchctr::DataError("manifest 'models' is empty");
  return specs;
}

benchctr::TrainConfig train_config_from_manifest(const json& m) {
  benchctr::TrainConfig cfg;
  if (!m.contains("train")) return cfg;
  const json& jt = m["train"];
  cfg.max_epochs = jt.value("max_epochs", cfg.max_epochs);
  cfg.early_stop_patience = jt.value("early_stop_patience", cfg.early_stop_patience);
  cfg.batch_size = jt.value("batch_size", cfg.batch_size);
  cfg.learning_rate = jt.value("learning_rate", cfg.learning_rate);
  if (jt.contains("seeds")) cfg.seeds = jt["seeds"].get<std::vector<std::int64_t>>();
  cfg.validate();
  return cfg;
}

void write_history_csv(const std::vector<benchctr::EpochRecord>& history, const fs::path& path) {
  std::string csv = "epoch,train_loss,validation_auc\n";
  for (const auto& rec : history)
    csv += std::to_string(rec.epoch) + "," + benchctr::format_double(rec.train_loss) + "," +
           benchctr::format_double(rec.validation_auc) + "\n";
  benchctr::detail::atomic_write(path.string(), csv);
}

void write_sidecar(const fs::path& path, const benchctr::Dataset& ds, std::uint64_t seed) {
  json j;
  j["provenance"] = ds.provenance;
  j["seed"] = seed;
  j["rows"] = ds.rows();
  j["fields"] = ds.schema.size();
  benchctr::detail::atomic_write(path.string(), j.dump(2) + "\n");
}

void emit_all_formats(const benchctr::ComparisonResult& res, const RunContext& ctx) {
  using benchctr::ReportFormat;
  for (ReportFormat f :
       {ReportFormat::json, ReportFormat::csv, ReportFormat::markdown, ReportFormat::radar_svg})
    benchctr::emit_report(res, f, ctx.out_dir.string());
  for (const auto& cell : res.cells)
    if (cell.error.empty())
      write_history_csv(cell.history,
                        ctx.out_dir / ("history_" + cell.model + "_" + std::to_string(cell.seed) + ".csv"));
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_prepare(const CommonArgs& args) {
  RunContext ctx = make_context(args);
  const benchctr::PrepPolicy policy = policy_from_manifest(ctx.manifest);
  benchctr::Dataset ds = load_manifest_dataset(ctx, ctx.manifest.at("dataset"));
  ds = benchctr::impute_missing(ds, policy);
  const json jp = ctx.manifest.value("prep", json::object());
  if (jp.value("expand_temporal", true)) ds = benchctr::expand_temporal(ds);
  if (jp.value("bin_numerics", true)) ds = benchctr::bin_numeric_fields(ds, policy.bin_threshold);
  const auto schema = benchctr::build_vocab(ds, policy.oov_min_freq);
  ds = benchctr::encode_with_vocab(ds, schema);

  const auto report = benchctr::validate_dataset(ds);
  if (!report.ok())
    throw benchctr::DataError("prepared dataset failed validation: " + report.violations[0].rule);

  benchctr::save_dataset_binary(ds, (ctx.out_dir / "prepared.bin").string());
  benchctr::detail::atomic_write((ctx.out_dir / "prepared_schema.json").string(),
                                 benchctr::schema_to_json(ds.schema).dump(2) + "\n");
  const benchctr::SplitSpec split = split_for(ctx, ds);
  benchctr::validate_split(split, ds.rows());
  benchctr::detail::atomic_write((ctx.out_dir / "splits.json").string(),
                                 benchctr::split_to_json(split).dump() + "\n");
  std::cout << "prepare: " << ds.rows() << " rows x " << ds.schema.size() << " fields -> "
            << (ctx.out_dir / "prepared.bin").string() << "\n";
  return 0;
}

int cmd_synth_rule(const CommonArgs& args) {
  RunContext ctx = make_context(args);
  const json jr = ctx.manifest.value("rulegen", json::object());
  benchctr::RuleGenConfig cfg;
  if (jr.contains("config") && jr["config"].is_string()) {
    std::ifstream in(resolve(ctx, jr["config"].get<std::string>()));
    if (!in) throw benchctr::DataError("cannot open rulegen config");
    json j;
    in >> j;
    cfg = j.get<benchctr::RuleGenConfig>();
  } else if (jr.contains("config")) {
    cfg = jr["config"].get<benchctr::RuleGenConfig>();
  } else {
    cfg = benchctr::RuleGenConfig::default_config();
  }
  const std::size_t rows = jr.value("rows", std::size_t{100000});
  benchctr::Dataset ds = benchctr::generate_rule_dataset(cfg, rows, ctx.seed, ctx.workers);

  benchctr::write_csv(ds, (ctx.out_dir / "rule_data.csv").string());
  benchctr::save_dataset_binary(ds, (ctx.out_dir / "rule_data.bin").string());
  benchctr::detail::atomic_write((ctx.out_dir / "rule_schema.json").string(),
                                 benchctr::schema_to_json(ds.schema).dump(2) + "\n");
  write_sidecar(ctx.out_dir / "rule_data.provenance.json", ds, ctx.seed);
  std::cout << "synth-rule: " << ds.rows() << " rows (positive rate "
            << benchctr::format_double(benchctr::positive_rate(ds)) << ") -> "
            << (ctx.out_dir / "rule_data.csv").string() << "\n";
  return 0;
}

int cmd_synth_diffusion(const CommonArgs& args) {
  RunContext ctx = make_context(args);
  const json jd = ctx.manifest.value("diffusion", json::object());
  if (!jd.contains("source")) throw benchctr::DataError("manifest diffusion.source is required");
  benchctr::Dataset real = load_manifest_dataset(ctx, jd["source"]);

  benchctr::DiffusionConfig cfg;
  if (jd.contains("config")) cfg = jd["config"].get<benchctr::DiffusionConfig>();

  std::vector<std::size_t> train_rows;
  if (jd.value("use_split_train", false)) {
    const benchctr::SplitSpec split = split_for(ctx, real);
    train_rows = split.train;
  } else {
    train_rows.resize(real.rows());
    for (std::size_t i = 0; i < train_rows.size(); ++i) train_rows[i] = i;
  }

  benchctr::Rng rng(ctx.seed);
  benchctr::DiffusionBundle bundle = benchctr::make_bundle(real, train_rows, cfg, rng);
  const auto history = benchctr::train_bundle(bundle, real, train_rows, rng);
  {
    std::string csv = "epoch,recon,kl,diff,ctr,total\n";
    for (std::size_t e = 0; e < history.size(); ++e)
      csv += std::to_string(e + 1) + "," + benchctr::format_double(history[e].recon) + "," +
             benchctr::format_double(history[e].kl) + "," + benchctr::format_double(history[e].diff) +
             "," + benchctr::format_double(history[e].ctr) + "," +
             benchctr::format_double(history[e].total) + "\n";
    benchctr::detail::atomic_write((ctx.out_dir / "diffusion_history.csv").string(), csv);
  }
  benchctr::save_bundle(bundle, (ctx.out_dir / "diffusion_bundle.ckpt").string());

  const std::size_t rows = jd.value("rows", real.rows());
  benchctr::Dataset synth = benchctr::generate_synthetic(bundle, rows, ctx.seed, ctx.workers);
  benchctr::write_csv(synth, (ctx.out_dir / "diffusion_data.csv").string());
  benchctr::save_dataset_binary(synth, (ctx.out_dir / "diffusion_data.bin").string());
  write_sidecar(ctx.out_dir / "diffusion_data.provenance.json", synth, ctx.seed);
  std::cout << "synth-diffusion: trained " << history.size() << " epochs, generated " << synth.rows()
            << " rows (positive rate " << benchctr::format_double(benchctr::positive_rate(synth))
            << ") -> " << (ctx.out_dir / "diffusion_data.csv").string() << "\n";
  return 0;
}

int cmd_train(const CommonArgs& args) {
  RunContext ctx = make_context(args);
  benchctr::Dataset ds = load_manifest_dataset(ctx, ctx.manifest.at("dataset"));
  const benchctr::SplitSpec split = split_for(ctx, ds);
  const auto specs = models_from_manifest(ctx.manifest);
  const benchctr::TrainConfig cfg = train_config_from_manifest(ctx.manifest);

  const auto& named = specs.front();
  const std::uint64_t seed = static_cast<std::uint64_t>(cfg.seeds.front());
  const benchctr::TrainedModel tm = benchctr::train_model(named.spec, ds, split, cfg, seed);
  const fs::path ckpt = ctx.out_dir / ("model_" + named.name + ".ckpt");
  benchctr::save_model(tm.model, ckpt.string());
  write_history_csv(tm.history, ctx.out_dir / ("history_" + named.name + ".csv"));
  std::cout << "train: " << named.name << " best epoch " << tm.best_epoch << " (val AUC "
            << benchctr::format_double(tm.history[static_cast<std::size_t>(tm.best_epoch - 1)].validation_auc)
            << ") -> " << ckpt.string() << "\n";
  return 0;
}

int cmd_evaluate(const CommonArgs& args) {
  RunContext ctx = make_context(args);
  benchctr::Dataset ds = load_manifest_dataset(ctx, ctx.manifest.at("dataset"));
  const benchctr::SplitSpec split = split_for(ctx, ds);
  if (!ctx.manifest.contains("checkpoint"))
    throw benchctr::DataError("manifest missing 'checkpoint'");
  const benchctr::CtrModel model =
      benchctr::load_model(resolve(ctx, ctx.manifest["checkpoint"].get<std::string>()).string());

  benchctr::PredictionSet preds = benchctr::predict(model, ds, split.test);
  const std::string segment = ctx.manifest.value("segment_field", std::string());
  if (!segment.empty()) benchctr::attach_segments(preds, ds, split.test, segment);
  benchctr::MetricReport report = benchctr::compute_report(preds);
  report.model = benchctr::to_string(model.spec.kind);
  report.dataset = ds.provenance;
  report.split = "test";

  nlohmann::ordered_json j;
  j["model"] = report.model;
  j["dataset"] = report.dataset;
  j["split"] = report.split;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.values) metrics[k] = v;
  j["metrics"] = std::move(metrics);
  benchctr::detail::atomic_write((ctx.out_dir / "evaluation.json").string(), j.dump(2) + "\n");
  std::cout << "evaluate: " << report.model << " on " << split.test.size() << " test rows -> "
            << (ctx.out_dir / "evaluation.json").string() << "\n";
  return 0;
}

int cmd_compare(const CommonArgs& args) {
  RunContext ctx = make_context(args);
  benchctr::Dataset ds = load_manifest_dataset(ctx, ctx.manifest.at("dataset"));
  const benchctr::SplitSpec split = split_for(ctx, ds);
  const auto specs = models_from_manifest(ctx.manifest);
  const benchctr::TrainConfig cfg = train_config_from_manifest(ctx.manifest);
  const std::string segment = ctx.manifest.value("segment_field", std::string());
  const std::string baseline = ctx.manifest.value("baseline", std::string());

  const benchctr::ComparisonResult res =
      benchctr::run_comparison(specs, ds, split, cfg, ctx.workers, segment, baseline);
  emit_all_formats(res, ctx);
  std::cout << "compare: " << specs.size() << " models x " << cfg.seeds.size() << " seeds -> "
            << (ctx.out_dir / "report.json").string() << "\n";
  return 0;
}

int cmd_tstr(const CommonArgs& args) {
  RunContext ctx = make_context(args);
  const json jt = ctx.manifest.value("tstr", json::object());
  if (!jt.contains("synthetic")) throw benchctr::DataError("manifest tstr.synthetic is required");
  benchctr::Dataset synth = load_manifest_dataset(ctx, jt["synthetic"]);
  benchctr::Dataset real = load_manifest_dataset(ctx, ctx.manifest.at("dataset"));
  const benchctr::SplitSpec split = split_for(ctx, real);
  const auto specs = models_from_manifest(ctx.manifest);
  const benchctr::TrainConfig cfg = train_config_from_manifest(ctx.manifest);
  const std::string segment = ctx.manifest.value("segment_field", std::string());
  const std::string baseline = ctx.manifest.value("baseline", std::string());

  const benchctr::ComparisonResult res =
      benchctr::run_tstr(synth, real, split, specs, cfg, ctx.workers, segment, baseline);
  emit_all_formats(res, ctx);
  std::cout << "tstr: " << specs.size() << " models trained on " << synth.rows()
            << " synthetic rows -> " << (ctx.out_dir / "report.json").string() << "\n";
  return 0;
}

int cmd_report(const CommonArgs& args, const std::string& report_path) {
  RunContext ctx = make_context(args, /*manifest_required=*/false);
  if (report_path.empty()) throw benchctr::UsageError("--report <report.json> is required");
  const benchctr::ComparisonResult res = benchctr::load_report(report_path);
  const auto written =
      benchctr::emit_report(res, benchctr::report_format_from(args.format), ctx.out_dir.string());
  for (const auto& w : written) std::cout << "report: wrote " << w << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CTR prediction benchmark harness"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string report_path;

  auto add_common = [&](CLI::App* sub, bool manifest_required) {
    auto* m = sub->add_option("--manifest", args.manifest_path, "run manifest (JSON)");
    if (manifest_required) m->required();
    sub->add_option("--seed", args.seed_override, "override the manifest seed");
    sub->add_option("--out", args.out_override, "override the output directory");
    sub->add_option("--workers", args.workers_override,
                    "worker limit (default: BENCH_CTR_WORKERS or manifest)");
    sub->add_option("--format", args.format, "report format: json|csv|markdown|radar_svg");
  };

  CLI::App* prepare = app.add_subcommand("prepare", "load, clean, encode and split a dataset");
  CLI::App* synth_rule = app.add_subcommand("synth-rule", "generate a rule-based synthetic dataset");
  CLI::App* synth_diff =
      app.add_subcommand("synth-diffusion", "train the latent-diffusion generator and sample data");
  CLI::App* train = app.add_subcommand("train", "train one model and write a checkpoint");
  CLI::App* evaluate = app.add_subcommand("evaluate", "score a checkpoint on the test split");
  CLI::App* compare = app.add_subcommand("compare", "multi-model multi-seed comparison run");
  CLI::App* tstr = app.add_subcommand("tstr", "train on synthetic, test on real");
  CLI::App* report = app.add_subcommand("report", "re-render an existing report.json");
  for (CLI::App* sub : {prepare, synth_rule, synth_diff, train, evaluate, compare, tstr})
    add_common(sub, true);
  add_common(report, false);
  report->add_option("--report", report_path, "path to an existing report.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }

  try {
    if (prepare->parsed()) return cmd_prepare(args);
    if (synth_rule->parsed()) return cmd_synth_rule(args);
    if (synth_diff->parsed()) return cmd_synth_diffusion(args);
    if (train->parsed()) return cmd_train(args);
    if (evaluate->parsed()) return cmd_evaluate(args);
    if (compare->parsed()) return cmd_compare(args);
    if (tstr->parsed()) return cmd_tstr(args);
    if (report->parsed()) return cmd_report(args, report_path);
  } catch (const benchctr::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const benchctr::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: malformed manifest: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
