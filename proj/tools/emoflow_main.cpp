// emoflow command-line interface: classify, workflow, ensemble, eval, knn,
// embed. One command = one process; exit 0 on success, 2 when the run
// completed but applied Neutral fallbacks, 1 on fatal errors.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "emoflow/emoflow.hpp"

namespace {

using namespace emoflow;

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitDegraded = 2;  // finished, but Neutral fallbacks occurred

struct CommonOpts {
  std::string cache_dir;
  std::string prompts_dir;
  std::string manifest_path;
  std::uint64_t seed = 0;
  std::string id_col = "ID";
  std::string text_col = "Texts";
  std::string label_col = "Labels";
  std::string lang_col;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--cache-dir", o.cache_dir, "Response cache directory");
  cmd->add_option("--prompts-dir", o.prompts_dir,
                  "Load prompt templates from this directory instead of the built-ins");
  cmd->add_option("--manifest-path", o.manifest_path,
                  "Write the run manifest to this exact path");
  cmd->add_option("--seed", o.seed, "Seed for every stochastic choice");
  cmd->add_option("--id-col", o.id_col, "Dataset id column name");
  cmd->add_option("--text-col", o.text_col, "Dataset text column name");
  cmd->add_option("--label-col", o.label_col,
                  "Dataset label column name (empty to skip gold labels)");
  cmd->add_option("--lang-col", o.lang_col, "Dataset language column name");
}

ColumnMap columns_of(const CommonOpts& o, bool with_labels) {
  ColumnMap m;
  m.id = o.id_col;
  m.text = o.text_col;
  m.label = with_labels ? o.label_col : "";
  m.language = o.lang_col;
  return m;
}

PromptCatalog load_prompts(const CommonOpts& o) {
  return o.prompts_dir.empty() ? PromptCatalog::builtin()
                               : PromptCatalog::load_dir(o.prompts_dir);
}

struct GatewayHandle {
  BackendConfig cfg;
  std::shared_ptr<ChatBackend> backend;
  std::unique_ptr<Gateway> gateway;
};

GatewayHandle open_gateway(const std::string& config_path,
                           const std::string& cache_dir) {
  GatewayHandle h;
  h.cfg = load_backend_config(config_path);
  h.backend = make_backend(h.cfg);
  h.gateway = std::make_unique<Gateway>(
      h.cfg, h.backend,
      cache_dir.empty() ? ResponseCache() : ResponseCache(cache_dir));
  return h;
}

/// Manifests are named by run id and land next to the output unless an exact
/// path was requested.
std::string persist_manifest(const RunManifest& m, const std::string& out_path,
                             const std::string& explicit_path) {
  std::string path = explicit_path;
  if (path.empty()) {
    const auto dir = std::filesystem::path(out_path).parent_path();
    path = (dir.empty() ? std::filesystem::path(".") : dir) /
           (m.run_id + ".json");
  }
  write_manifest(m, path);
  return path;
}

std::map<ModelId, double> load_score_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoFailure, "cannot open scores file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ConfigInvalid, path + ": " + e.what());
  }
  return j.get<std::map<ModelId, double>>();
}

int finish_run(const RunManifest& manifest, const std::string& out_path,
               const std::string& manifest_path) {
  const std::string where = persist_manifest(manifest, out_path, manifest_path);
  std::cout << "wrote " << out_path << "\n";
  std::cout << "manifest: " << where << "\n";
  if (manifest.counts.fallbacks > 0) {
    std::cout << manifest.counts.fallbacks
              << " prediction(s) degraded to the Neutral fallback\n";
    return kExitDegraded;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- classify

struct ClassifyArgs {
  CommonOpts common;
  std::string strategy;
  std::string input;
  std::string backend;
  std::string second_backend;
  std::string correction_scope = "neutral";
  std::string selector = "random";
  std::size_t examples = 6;
  std::string train;
  std::string embed_backend;
  std::size_t embed_dim = 0;
  std::string model_id;
  std::string out;
};

int run_classify(const ClassifyArgs& a) {
  StrategyConfig cfg;
  cfg.kind = parse_strategy(a.strategy);
  cfg.model_id = a.model_id;
  cfg.scope = parse_correction_scope(a.correction_scope);
  cfg.selector = a.selector == "knn" ? ExampleSelector::Knn
                                     : ExampleSelector::Random;
  if (a.selector != "knn" && a.selector != "random") {
    raise(ErrorCode::ConfigInvalid, "unknown selector: " + a.selector);
  }
  cfg.example_count = a.examples;
  cfg.seed = a.common.seed;
  if (a.embed_dim > 0) cfg.embed_dim = a.embed_dim;

  const PromptCatalog prompts = load_prompts(a.common);
  const Dataset data =
      load_dataset(a.input, columns_of(a.common, /*with_labels=*/false));

  GatewayHandle primary = open_gateway(a.backend, a.common.cache_dir);
  GatewayHandle second;
  StrategyResources res;
  if (!a.second_backend.empty()) {
    second = open_gateway(a.second_backend, a.common.cache_dir);
    res.second = second.gateway.get();
  }

  Dataset train;
  GatewayHandle embedder;
  if (cfg.kind == StrategyKind::FewShot) {
    if (a.train.empty()) {
      raise(ErrorCode::ConfigInvalid, "--strategy fewshot needs --train");
    }
    train = load_dataset(a.train, columns_of(a.common, /*with_labels=*/true));
    res.train = &train;
    if (cfg.selector == ExampleSelector::Knn) {
      if (a.embed_backend.empty()) {
        raise(ErrorCode::ConfigInvalid, "--selector knn needs --embed-backend");
      }
      embedder = open_gateway(a.embed_backend, a.common.cache_dir);
      res.embedder = embedder.gateway.get();
    }
  }

  StrategyRunResult run =
      run_strategy(data, cfg, *primary.gateway, prompts, res);
  write_predictions(run.file, a.out);
  run.manifest.extra["output"] = a.out;
  run.manifest.extra["input"] = a.input;
  return finish_run(run.manifest, a.out, a.common.manifest_path);
}

// ---------------------------------------------------------------- workflow

struct MiawfArgs {
  CommonOpts common;
  std::string a_file;
  std::string b_file;
  std::string input;
  std::string backend;
  std::string dev_scores;
  std::size_t iterations = 1;
  bool always_call = false;
  std::string model_id = "miawf";
  std::string out;
  std::string trace;
};

int run_miawf(const MiawfArgs& a) {
  const PromptCatalog prompts = load_prompts(a.common);
  const Dataset data =
      load_dataset(a.input, columns_of(a.common, /*with_labels=*/false));
  const PredictionFile pf_a = read_predictions(a.a_file);
  const PredictionFile pf_b = read_predictions(a.b_file);

  std::map<ModelId, double> scores;
  if (!a.dev_scores.empty()) scores = load_score_map(a.dev_scores);

  GatewayHandle gw = open_gateway(a.backend, a.common.cache_dir);

  MiawfOptions options;
  options.iterations = a.iterations;
  options.skip_identical = !a.always_call;
  options.output_model_id = a.model_id;

  MiawfResult run = miawf_run(data, pf_a, pf_b, *gw.gateway, prompts, scores,
                              options);
  write_predictions(run.file, a.out);
  if (!a.trace.empty()) write_traces(run.traces, a.trace);
  run.manifest.extra["output"] = a.out;
  return finish_run(run.manifest, a.out, a.common.manifest_path);
}

struct MbcawfArgs {
  CommonOpts common;
  std::string input;
  std::string backend;
  std::string model_id = "mbcawf";
  std::string out;
  std::string trace;
};

int run_mbcawf(const MbcawfArgs& a) {
  const PromptCatalog prompts = load_prompts(a.common);
  const Dataset data =
      load_dataset(a.input, columns_of(a.common, /*with_labels=*/false));
  GatewayHandle gw = open_gateway(a.backend, a.common.cache_dir);

  MbcawfRunResult run = mbcawf_run(data, *gw.gateway, prompts, a.model_id);
  write_predictions(run.file, a.out);
  if (!a.trace.empty()) write_traces(run.traces, a.trace);
  run.manifest.extra["output"] = a.out;
  return finish_run(run.manifest, a.out, a.common.manifest_path);
}

// ---------------------------------------------------------------- ensemble

struct EnsembleArgs {
  CommonOpts common;
  std::string mode = "unweighted";
  std::vector<std::string> members;
  std::string spec_file;
  std::string weights_file;
  std::string adjudicator;
  std::string input;
  std::string name = "ensemble";
  std::string out;
};

int run_ensemble(const EnsembleArgs& a) {
  const PromptCatalog prompts = load_prompts(a.common);

  Dataset data;
  GatewayHandle adjudicator;
  AdjudicatorContext ctx;
  const bool needs_adjudicator =
      !a.adjudicator.empty() || a.mode == "llm" || a.mode == "llm_adjudicated";
  if (needs_adjudicator) {
    if (a.adjudicator.empty() || a.input.empty()) {
      raise(ErrorCode::ConfigInvalid,
            "llm mode needs --adjudicator and --input");
    }
    data = load_dataset(a.input, columns_of(a.common, /*with_labels=*/false));
    adjudicator = open_gateway(a.adjudicator, a.common.cache_dir);
    ctx.data = &data;
    ctx.gateway = adjudicator.gateway.get();
    ctx.prompts = &prompts;
  }

  RunManifest manifest;
  manifest.kind = "ensemble";
  manifest.backend_model =
      needs_adjudicator ? adjudicator.cfg.model : "";
  manifest.seed = a.common.seed;
  manifest.prompt_checksum = prompts.checksum();
  manifest.started = utc_timestamp();
  manifest.assign_run_id();
  manifest.extra["tie_rule"] =
      "highest-weight member, then earliest member in spec order";

  PredictionFile result;
  if (!a.spec_file.empty()) {
    std::ifstream in(a.spec_file, std::ios::binary);
    if (!in) raise(ErrorCode::IoFailure, "cannot open spec: " + a.spec_file);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      raise(ErrorCode::ConfigInvalid, a.spec_file + ": " + e.what());
    }
    EnsembleComposer composer(ComposeSpec::from_json(j), ctx);
    result = composer.evaluate();
    manifest.counts.flagged = composer.context().off_menu_fallbacks;
  } else {
    EnsembleSpec spec;
    spec.name = a.name;
    spec.mode = parse_ensemble_mode(a.mode);
    spec.members = a.members;
    if (!a.weights_file.empty()) spec.weights = load_score_map(a.weights_file);
    if (spec.mode == EnsembleMode::Weighted && spec.weights.empty()) {
      raise(ErrorCode::ConfigInvalid, "weighted mode needs --weights");
    }
    std::vector<PredictionFile> files;
    files.reserve(spec.members.size());
    for (const std::string& m : spec.members) files.push_back(read_predictions(m));
    result = spec.mode == EnsembleMode::LlmAdjudicated
                 ? llm_adjudicated_vote(spec, files, ctx)
                 : vote(spec, files);
    manifest.counts.flagged = ctx.off_menu_fallbacks;
  }

  write_predictions(result, a.out);
  manifest.finished = utc_timestamp();
  manifest.counts.instances = result.size();
  if (ctx.gateway != nullptr) {
    const GatewayStats stats = ctx.gateway->stats();
    manifest.counts.backend_calls = stats.backend_calls;
    manifest.counts.cache_hits = stats.cache_hits;
  }
  manifest.extra["output"] = a.out;
  return finish_run(manifest, a.out, a.common.manifest_path);
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  CommonOpts common;
  std::string gold;
  std::vector<std::string> preds;
  std::string format = "text";
  std::string confusion_out;
  std::string out;
};

int run_eval(const EvalArgs& a) {
  const Dataset gold =
      load_dataset(a.gold, columns_of(a.common, /*with_labels=*/true));

  std::vector<std::pair<std::string, MetricsReport>> reports;
  reports.reserve(a.preds.size());
  for (const std::string& path : a.preds) {
    const PredictionFile pf = read_predictions(path);
    reports.emplace_back(pf.model_id, evaluate(gold, pf));
  }

  std::string rendered;
  if (reports.size() == 1) {
    rendered = a.format == "json"
                   ? metrics_to_json(reports[0].second).dump(2) + "\n"
                   : metrics_to_text(reports[0].second);
  } else if (a.format == "json") {
    nlohmann::json j;
    for (const auto& [name, r] : reports) j[name] = metrics_to_json(r);
    rendered = j.dump(2) + "\n";
  } else {
    rendered = comparison_table(reports);
  }

  if (!a.out.empty()) {
    std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::IoFailure, "cannot write report: " + a.out);
    out << rendered;
  } else {
    std::cout << rendered;
  }

  if (!a.confusion_out.empty()) {
    const PredictionFile pf = read_predictions(a.preds[0]);
    write_confusion_tsv(confusion(gold, pf), a.confusion_out);
  }
  return kExitOk;
}

// --------------------------------------------------------------------- knn

struct KnnArgs {
  CommonOpts common;
  std::string train;
  std::string index_file;
  std::string embed_backend;
  std::size_t dim = 0;
  std::string input;
  std::size_t k = 3;
  std::size_t k_min = 1;
  std::size_t k_max = 10;
  std::size_t folds = 5;
  std::string model_id = "knn";
  std::string out;
  std::string format = "text";
};

std::optional<std::size_t> dim_of(const KnnArgs& a) {
  return a.dim > 0 ? std::optional<std::size_t>(a.dim) : std::nullopt;
}

EmbeddingIndex obtain_index(const KnnArgs& a, GatewayHandle& embedder) {
  if (!a.index_file.empty()) return EmbeddingIndex::load_tsv(a.index_file);
  if (a.train.empty()) {
    raise(ErrorCode::ConfigInvalid, "need --train or --index");
  }
  if (embedder.gateway == nullptr) {
    raise(ErrorCode::ConfigInvalid, "building an index needs --embed-backend");
  }
  const Dataset train =
      load_dataset(a.train, columns_of(a.common, /*with_labels=*/true));
  std::vector<std::string> texts;
  texts.reserve(train.size());
  for (const Instance& inst : train.instances) texts.push_back(inst.text);
  return build_index(train, embed_texts(*embedder.gateway, texts, dim_of(a)));
}

int run_knn_index(const KnnArgs& a) {
  GatewayHandle embedder = open_gateway(a.embed_backend, a.common.cache_dir);
  const EmbeddingIndex index = obtain_index(a, embedder);
  index.save_tsv(a.out);
  std::cout << "wrote " << a.out << " (" << index.size() << " vectors, dim "
            << index.dim() << ")\n";
  return kExitOk;
}

int run_knn_classify(const KnnArgs& a) {
  GatewayHandle embedder = open_gateway(a.embed_backend, a.common.cache_dir);
  const EmbeddingIndex index = obtain_index(a, embedder);
  const Dataset data =
      load_dataset(a.input, columns_of(a.common, /*with_labels=*/false));

  std::vector<std::string> texts;
  texts.reserve(data.size());
  for (const Instance& inst : data.instances) texts.push_back(inst.text);
  const std::vector<EmbeddingVector> queries =
      embed_texts(*embedder.gateway, texts, dim_of(a));

  RunManifest manifest;
  manifest.kind = "knn-classify";
  manifest.backend_model = embedder.cfg.model;
  manifest.seed = a.common.seed;
  manifest.started = utc_timestamp();
  manifest.assign_run_id();
  manifest.extra["k"] = std::to_string(a.k);

  PredictionFile out;
  out.model_id = a.model_id;
  out.predictions.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    Prediction p;
    p.instance_id = data.instances[i].id;
    p.label = knn_classify(queries[i].values, index, a.k);
    p.model_id = a.model_id;
    out.predictions.push_back(std::move(p));
  }
  write_predictions(out, a.out);

  manifest.finished = utc_timestamp();
  manifest.counts.instances = data.size();
  const GatewayStats stats = embedder.gateway->stats();
  manifest.counts.backend_calls = stats.backend_calls;
  manifest.counts.cache_hits = stats.cache_hits;
  manifest.extra["output"] = a.out;
  return finish_run(manifest, a.out, a.common.manifest_path);
}

int run_knn_select_k(const KnnArgs& a) {
  GatewayHandle embedder;
  if (!a.embed_backend.empty()) {
    embedder = open_gateway(a.embed_backend, a.common.cache_dir);
  }
  const EmbeddingIndex index = obtain_index(a, embedder);
  const CrossValReport report =
      select_k(index, a.k_min, a.k_max, a.folds, a.common.seed);

  if (a.format == "json") {
    nlohmann::json j;
    j["chosen_k"] = report.chosen_k;
    j["folds"] = report.folds;
    j["seed"] = report.seed;
    nlohmann::json by_k;
    for (const auto& [k, f1] : report.mean_f1_by_k) {
      by_k[std::to_string(k)] = f1;
    }
    j["mean_f1_by_k"] = by_k;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "k selection over " << index.size() << " vectors, "
              << report.folds << " folds, seed " << report.seed << "\n";
    for (const auto& [k, f1] : report.mean_f1_by_k) {
      std::cout << "  k=" << k << "  mean-F1 " << f1
                << (k == report.chosen_k ? "  <- chosen" : "") << "\n";
    }
  }
  return kExitOk;
}

// ------------------------------------------------------------------- embed

struct EmbedArgs {
  CommonOpts common;
  std::string input;
  std::string backend;
  std::size_t dim = 0;
  std::string out;
};

int run_embed(const EmbedArgs& a) {
  const Dataset data =
      load_dataset(a.input, columns_of(a.common, /*with_labels=*/false));
  GatewayHandle gw = open_gateway(a.backend, a.common.cache_dir);

  std::vector<std::string> texts;
  texts.reserve(data.size());
  for (const Instance& inst : data.instances) texts.push_back(inst.text);
  const std::vector<EmbeddingVector> vectors = embed_texts(
      *gw.gateway, texts,
      a.dim > 0 ? std::optional<std::size_t>(a.dim) : std::nullopt);

  std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::IoFailure, "cannot write embeddings: " + a.out);
  out << "# emoflow-embeddings model=" << gw.cfg.model << " dim="
      << vectors[0].dim() << "\n";
  out << "ID\tEmbedding\n";
  char buf[64];
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.instances[i].id << '\t';
    const auto& values = vectors[i].values;
    for (std::size_t d = 0; d < values.size(); ++d) {
      if (d > 0) out << ',';
      const auto res = std::to_chars(buf, buf + sizeof(buf), values[d],
                                     std::chars_format::general, 17);
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
  std::cout << "wrote " << a.out << " (" << data.size() << " vectors)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-lingual emotion classification workflows over LLM backends"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(emoflow::kVersion));

  ClassifyArgs classify_args;
  CLI::App* classify = app.add_subcommand(
      "classify", "Run a prompting strategy over a dataset");
  classify->add_option("--strategy", classify_args.strategy,
                       "zeroshot | zse | zsec | fewshot | finetuned")
      ->required();
  classify->add_option("--input", classify_args.input, "Dataset TSV")->required();
  classify->add_option("--backend", classify_args.backend,
                       "Backend config JSON")->required();
  classify->add_option("--out", classify_args.out, "Output prediction TSV")
      ->required();
  classify->add_option("--second-backend", classify_args.second_backend,
                       "ZSEC stage-2 backend config (defaults to --backend)");
  classify->add_option("--correction-scope", classify_args.correction_scope,
                       "ZSEC recheck scope: neutral | all | none");
  classify->add_option("--selector", classify_args.selector,
                       "Few-shot example selector: random | knn");
  classify->add_option("--examples", classify_args.examples,
                       "Few-shot example count");
  classify->add_option("--train", classify_args.train,
                       "Few-shot training pool TSV");
  classify->add_option("--embed-backend", classify_args.embed_backend,
                       "Embedding backend config for the knn selector");
  classify->add_option("--embed-dim", classify_args.embed_dim,
                       "Truncate embeddings to this dimension");
  classify->add_option("--model-id", classify_args.model_id,
                       "Model id recorded in outputs");
  add_common(classify, classify_args.common);

  CLI::App* workflow = app.add_subcommand("workflow", "Run an agentic workflow");
  workflow->require_subcommand(1);

  MiawfArgs miawf_args;
  CLI::App* miawf = workflow->add_subcommand(
      "miawf", "Iterated adjudication between two prediction files");
  miawf->add_option("--a", miawf_args.a_file, "First source prediction TSV")
      ->required();
  miawf->add_option("--b", miawf_args.b_file, "Second source prediction TSV")
      ->required();
  miawf->add_option("--input", miawf_args.input, "Dataset TSV (tweet text)")
      ->required();
  miawf->add_option("--backend", miawf_args.backend, "Adjudicator backend config")
      ->required();
  miawf->add_option("--out", miawf_args.out, "Output prediction TSV")->required();
  miawf->add_option("--iterations", miawf_args.iterations, "Adjudication rounds");
  miawf->add_option("--dev-scores", miawf_args.dev_scores,
                    "JSON map model_id -> dev F1 (required for iterations >= 2)");
  miawf->add_flag("--always-call", miawf_args.always_call,
                  "Adjudicate even when both sources agree");
  miawf->add_option("--model-id", miawf_args.model_id, "Output model id");
  miawf->add_option("--trace", miawf_args.trace, "Write per-instance trace JSONL");
  add_common(miawf, miawf_args.common);

  MbcawfArgs mbcawf_args;
  CLI::App* mbcawf = workflow->add_subcommand(
      "mbcawf", "Per-emotion binary classifiers with adjudication and Neutral recheck");
  mbcawf->add_option("--input", mbcawf_args.input, "Dataset TSV")->required();
  mbcawf->add_option("--backend", mbcawf_args.backend, "Backend config")
      ->required();
  mbcawf->add_option("--out", mbcawf_args.out, "Output prediction TSV")
      ->required();
  mbcawf->add_option("--model-id", mbcawf_args.model_id, "Output model id");
  mbcawf->add_option("--trace", mbcawf_args.trace,
                     "Write per-instance trace JSONL");
  add_common(mbcawf, mbcawf_args.common);

  EnsembleArgs ensemble_args;
  CLI::App* ensemble = app.add_subcommand(
      "ensemble", "Aggregate prediction files by voting or LLM adjudication");
  ensemble->add_option("--mode", ensemble_args.mode,
                       "unweighted | weighted | llm");
  ensemble->add_option("members", ensemble_args.members,
                       "Member prediction TSVs (>= 2)");
  ensemble->add_option("--spec", ensemble_args.spec_file,
                       "Nested ensemble spec JSON (overrides --mode/members)");
  ensemble->add_option("--weights", ensemble_args.weights_file,
                       "JSON map model_id -> weight (weighted mode)");
  ensemble->add_option("--adjudicator", ensemble_args.adjudicator,
                       "Adjudicator backend config (llm mode)");
  ensemble->add_option("--input", ensemble_args.input,
                       "Dataset TSV with tweet text (llm mode)");
  ensemble->add_option("--name", ensemble_args.name, "Output model id");
  ensemble->add_option("--out", ensemble_args.out, "Output prediction TSV")
      ->required();
  add_common(ensemble, ensemble_args.common);

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand(
      "eval", "Score prediction files against gold labels");
  eval->add_option("--gold", eval_args.gold, "Gold dataset TSV")->required();
  eval->add_option("--pred", eval_args.preds,
                   "Prediction TSV (repeat to compare runs)")
      ->required();
  eval->add_option("--format", eval_args.format, "text | json");
  eval->add_option("--confusion", eval_args.confusion_out,
                   "Write the first prediction file's confusion matrix TSV");
  eval->add_option("--out", eval_args.out, "Write the report here instead of stdout");
  add_common(eval, eval_args.common);

  KnnArgs knn_args;
  CLI::App* knn = app.add_subcommand("knn", "Embedding nearest-neighbor tools");
  knn->require_subcommand(1);

  CLI::App* knn_index = knn->add_subcommand("index", "Build and save an index");
  knn_index->add_option("--train", knn_args.train, "Labeled dataset TSV")
      ->required();
  knn_index->add_option("--embed-backend", knn_args.embed_backend,
                        "Embedding backend config")->required();
  knn_index->add_option("--dim", knn_args.dim, "Truncate embeddings to this dim");
  knn_index->add_option("--out", knn_args.out, "Index TSV path")->required();
  add_common(knn_index, knn_args.common);

  CLI::App* knn_cls = knn->add_subcommand("classify", "Label a dataset by KNN vote");
  knn_cls->add_option("--train", knn_args.train, "Labeled dataset TSV");
  knn_cls->add_option("--index", knn_args.index_file, "Pre-built index TSV");
  knn_cls->add_option("--embed-backend", knn_args.embed_backend,
                      "Embedding backend config")->required();
  knn_cls->add_option("--dim", knn_args.dim, "Truncate embeddings to this dim");
  knn_cls->add_option("--input", knn_args.input, "Dataset TSV to classify")
      ->required();
  knn_cls->add_option("--k", knn_args.k, "Neighbor count");
  knn_cls->add_option("--model-id", knn_args.model_id, "Output model id");
  knn_cls->add_option("--out", knn_args.out, "Output prediction TSV")->required();
  add_common(knn_cls, knn_args.common);

  CLI::App* knn_sel = knn->add_subcommand(
      "select-k", "Pick k by seeded stratified cross-validation");
  knn_sel->add_option("--train", knn_args.train, "Labeled dataset TSV");
  knn_sel->add_option("--index", knn_args.index_file, "Pre-built index TSV");
  knn_sel->add_option("--embed-backend", knn_args.embed_backend,
                      "Embedding backend config (when building from --train)");
  knn_sel->add_option("--dim", knn_args.dim, "Truncate embeddings to this dim");
  knn_sel->add_option("--folds", knn_args.folds, "Fold count");
  knn_sel->add_option("--k-min", knn_args.k_min, "Smallest k to try");
  knn_sel->add_option("--k-max", knn_args.k_max, "Largest k to try");
  knn_sel->add_option("--format", knn_args.format, "text | json");
  add_common(knn_sel, knn_args.common);

  EmbedArgs embed_args;
  CLI::App* embed = app.add_subcommand("embed", "Fetch embeddings for a dataset");
  embed->add_option("--input", embed_args.input, "Dataset TSV")->required();
  embed->add_option("--backend", embed_args.backend, "Embedding backend config")
      ->required();
  embed->add_option("--dim", embed_args.dim, "Truncate embeddings to this dim");
  embed->add_option("--out", embed_args.out, "Output TSV")->required();
  add_common(embed, embed_args.common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints usage/help
    return code == 0 ? kExitOk : kExitFatal;
  }

  try {
    if (*classify) return run_classify(classify_args);
    if (*miawf) return run_miawf(miawf_args);
    if (*mbcawf) return run_mbcawf(mbcawf_args);
    if (*ensemble) return run_ensemble(ensemble_args);
    if (*eval) return run_eval(eval_args);
    if (*knn_index) return run_knn_index(knn_args);
    if (*knn_cls) return run_knn_classify(knn_args);
    if (*knn_sel) return run_knn_select_k(knn_args);
    if (*embed) return run_embed(embed_args);
  } catch (const EmoflowError& e) {
    std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what()
              << "\n";
    if (e.code() == ErrorCode::ConfigInvalid) {
      std::cerr << "run '" << argv[0] << " --help' for usage\n";
    }
    return kExitFatal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  return kExitFatal;
}
