// relcl command-line tool.
#include "relcl/pipeline.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace relcl;

namespace {

struct DataArgs {
  std::string data;
  std::string emb;
  std::string splits;
  int fold = 1;
};

void add_data_options(CLI::App* cmd, DataArgs& args, bool need_emb = true) {
  cmd->add_option("--data", args.data, "Directory of sentence records")->required()->check(CLI::ExistingDirectory);
  auto* emb = cmd->add_option("--emb", args.emb, "Directory of embedding sidecars")->check(CLI::ExistingDirectory);
  if (need_emb) emb->required();
  cmd->add_option("--splits", args.splits, "Directory of fold split files")->check(CLI::ExistingDirectory);
  cmd->add_option("--fold", args.fold, "Fold index (needs --splits)");
}

/// Records of one side of a fold, or the whole corpus without --splits.
std::vector<SentenceRecord> fold_records(const std::vector<SentenceRecord>& corpus, const DataArgs& args, bool test) {
  if (args.splits.empty()) return corpus;
  for (const auto& f : load_splits(args.splits)) {
    if (f.fold_index == args.fold) return select_records(corpus, test ? f.test_ids : f.train_ids);
  }
  throw ValidationError("no fold " + std::to_string(args.fold) + " in " + args.splits);
}

std::shared_ptr<const EmbeddingSource> load_base(const DataArgs& args) {
  return std::make_shared<const EmbeddingSource>(load_embedding_dir(args.emb));
}

std::string prf_json(const Counts& c, const Prf& p) {
  json j;
  j["precision"] = p.precision;
  j["recall"] = p.recall;
  j["f1"] = p.f1;
  j["tp"] = c.tp;
  j["fp"] = c.fp;
  j["fn"] = c.fn;
  j["degenerate"] = p.degenerate;
  return j.dump(2);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive relation and entity representation learning"};
  app.require_subcommand(1);

  // corpus
  auto* corpus_cmd = app.add_subcommand("corpus", "Validate, summarize or synthesize record corpora");
  corpus_cmd->require_subcommand(1);
  DataArgs corpus_args;
  auto* validate_cmd = corpus_cmd->add_subcommand("validate", "Check every record of a corpus");
  validate_cmd->add_option("--data", corpus_args.data)->required()->check(CLI::ExistingDirectory);
  auto* stats_cmd = corpus_cmd->add_subcommand("stats", "Sentence, relation and entity counts");
  stats_cmd->add_option("--data", corpus_args.data)->required()->check(CLI::ExistingDirectory);
  stats_cmd->add_option("--splits", corpus_args.splits, "Also report each fold")->check(CLI::ExistingDirectory);

  auto* synth_cmd = corpus_cmd->add_subcommand("synth", "Write a seeded synthetic corpus");
  SynthConfig synth;
  std::string synth_out;
  std::string synth_emb;
  std::string synth_splits;
  Index synth_dim = 64;
  int synth_folds = 10;
  synth_cmd->add_option("--out", synth_out, "Record directory")->required();
  synth_cmd->add_option("--sentences", synth.sentences);
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--emb-out", synth_emb, "Also write synthetic embedding sidecars here");
  synth_cmd->add_option("--dim", synth_dim, "Embedding dimension for --emb-out");
  synth_cmd->add_option("--splits-out", synth_splits, "Also write seeded fold files here");
  synth_cmd->add_option("--folds", synth_folds);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one model on a fold");
  DataArgs train_args;
  std::string model_name;
  std::string config_path;
  std::string train_out;
  std::optional<std::uint64_t> train_seed;
  add_data_options(train_cmd, train_args);
  train_cmd->add_option("--model", model_name, "clgs, cldr or clner")->required();
  train_cmd->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_out, "Checkpoint directory")->required();
  train_cmd->add_option("--seed", train_seed);

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "Classify with a trained space");
  infer_cmd->require_subcommand(1);
  auto* knn_cmd = infer_cmd->add_subcommand("knn", "Label query vectors by their nearest neighbors");
  std::string space_path;
  std::string queries_path;
  std::size_t k = 1;
  std::string metric = "cosine";
  knn_cmd->add_option("--space", space_path)->required()->check(CLI::ExistingFile);
  knn_cmd->add_option("--queries", queries_path, "Space file; labels may be '?'")->required()->check(CLI::ExistingFile);
  knn_cmd->add_option("--k", k)->check(CLI::PositiveNumber);
  knn_cmd->add_option("--metric", metric);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Intermediate evaluation protocols");
  eval_cmd->require_subcommand(1);
  DataArgs eval_args;
  std::string eval_model;
  std::size_t negatives = 7;
  std::uint64_t eval_seed = 1;
  auto* simcheck_cmd = eval_cmd->add_subcommand("simcheck", "Positive-graph retrieval accuracy of a CLGS model");
  add_data_options(simcheck_cmd, eval_args);
  simcheck_cmd->add_option("--model", eval_model, "Trained CLGS directory")->required()->check(CLI::ExistingDirectory);
  simcheck_cmd->add_option("--negatives", negatives);
  simcheck_cmd->add_option("--seed", eval_seed);
  auto* probe_cmd = eval_cmd->add_subcommand("probe", "Linear relation probe on a frozen encoder");
  add_data_options(probe_cmd, eval_args);
  probe_cmd->add_option("--model", eval_model, "Trained model directory; omit for the raw embeddings")
      ->check(CLI::ExistingDirectory);
  probe_cmd->add_option("--seed", eval_seed);

  // export
  auto* export_cmd = app.add_subcommand("export", "Write representations for external projection");
  export_cmd->require_subcommand(1);
  auto* reps_cmd = export_cmd->add_subcommand("reps", "Relation or entity representations as a space file");
  DataArgs export_args;
  std::string export_mode;
  std::string export_model;
  std::string export_out;
  std::string pairs = "gold";
  add_data_options(reps_cmd, export_args);
  reps_cmd->add_option("--mode", export_mode, "relation or entity")->required();
  reps_cmd->add_option("--model", export_model, "Trained model directory; omit for the raw embeddings")
      ->check(CLI::ExistingDirectory);
  reps_cmd->add_option("--pairs", pairs, "gold or all (relation mode)");
  reps_cmd->add_option("--out", export_out)->required();
  bool export_test = false;
  reps_cmd->add_flag("--test-side", export_test, "Use the test side of the fold");

  // score
  auto* score_cmd = app.add_subcommand("score", "Strict scoring of predictions against gold");
  std::string gold_path;
  std::string pred_path;
  std::string score_mode = "re";
  score_cmd->add_option("--gold", gold_path)->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--pred", pred_path)->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--mode", score_mode, "ner, re or re-minus");

  // run
  auto* run_cmd = app.add_subcommand("run", "End-to-end pipeline");
  PipelineManifest manifest;
  std::string stages = "all";
  run_cmd->add_option("--data", manifest.data_dir);
  run_cmd->add_option("--emb", manifest.embedding_dir);
  run_cmd->add_option("--splits", manifest.split_dir);
  run_cmd->add_option("--config", manifest.config_path)->check(CLI::ExistingFile);
  run_cmd->add_option("--out", manifest.out_dir)->required();
  run_cmd->add_option("--seed", manifest.seed);
  run_cmd->add_option("--stages", stages, "Comma-separated subset of prep,train-cldr,train-clner,extract,knn,score");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate_cmd->parsed()) {
      const auto corpus = load_corpus(corpus_args.data);
      std::cout << "ok: " << corpus.size() << " records\n";
    } else if (stats_cmd->parsed()) {
      const auto corpus = load_corpus(corpus_args.data);
      json out;
      out["corpus"] = json::parse(stats_json(corpus_stats(corpus)));
      if (!corpus_args.splits.empty()) {
        json folds = json::array();
        for (const auto& f : load_splits(corpus_args.splits)) {
          json fold;
          fold["fold"] = f.fold_index;
          fold["train"] = json::parse(stats_json(corpus_stats(select_records(corpus, f.train_ids))));
          fold["test"] = json::parse(stats_json(corpus_stats(select_records(corpus, f.test_ids))));
          folds.push_back(std::move(fold));
        }
        out["folds"] = std::move(folds);
      }
      std::cout << out.dump(2) << '\n';
    } else if (synth_cmd->parsed()) {
      const auto corpus = synth_corpus(synth);
      write_corpus(corpus, synth_out);
      if (!synth_emb.empty()) write_embedding_dir(synth_embeddings(corpus, synth_dim, mix_seed(synth.seed, 0xe3b)), corpus, synth_emb);
      if (!synth_splits.empty()) write_splits(make_folds(corpus, synth_folds, synth.seed), synth_splits);
      std::cout << "wrote " << corpus.size() << " records to " << synth_out << '\n';
    } else if (train_cmd->parsed()) {
      const auto kind = parse_model_kind(model_name);
      std::map<std::string, std::string> pairs;
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        pairs = read_config_pairs(in);
      }
      pairs["model"] = std::string(to_string(kind));
      auto config = train_config_from_pairs(pairs, kind);
      if (train_seed) config.seed = *train_seed;
      const auto corpus = load_corpus(train_args.data);
      const auto result = train(config, fold_records(corpus, train_args, false), load_base(train_args), fs::path(train_out));
      std::cout << "trained " << to_string(kind) << " for " << result.history.epoch_loss.size()
                << " epochs; kept epoch " << result.history.best_epoch << "; final loss "
                << format_double(result.history.epoch_loss.back()) << '\n';
    } else if (knn_cmd->parsed()) {
      const auto space = read_space(space_path);
      const auto queries = read_space(queries_path, true);
      for (const auto& label : knn_classify(space, queries.vectors, {k, parse_metric(metric)})) std::cout << label << '\n';
    } else if (simcheck_cmd->parsed()) {
      const auto base = load_base(eval_args);
      auto loaded = load_model(eval_model, base);
      const auto* clgs = std::get_if<ClgsModel>(&loaded.model);
      if (!clgs) throw ValidationError("simcheck needs a CLGS model");
      const auto corpus = load_corpus(eval_args.data);
      const auto r = similarity_check(*clgs, fold_records(corpus, eval_args, true), negatives, eval_seed);
      json out;
      out["accuracy"] = r.accuracy;
      out["evaluated"] = r.evaluated;
      out["candidates"] = negatives + 1;
      std::cout << out.dump(2) << '\n';
    } else if (probe_cmd->parsed()) {
      const auto base = load_base(eval_args);
      const auto corpus = load_corpus(eval_args.data);
      const auto train_side = fold_records(corpus, eval_args, false);
      const auto test_side = fold_records(corpus, eval_args, true);
      ProbeResult r;
      if (eval_model.empty()) {
        r = linear_probe(EncoderStack(base, EncoderConfig{0}, 0), train_side, test_side, eval_seed);
      } else {
        auto loaded = load_model(eval_model, base);
        r = linear_probe(encoder_of(loaded.model), train_side, test_side, eval_seed);
      }
      std::cout << prf_json(r.counts, r.score) << '\n';
    } else if (reps_cmd->parsed()) {
      const auto base = load_base(export_args);
      const auto corpus = load_corpus(export_args.data);
      const auto records = fold_records(corpus, export_args, export_test);
      std::optional<LoadedModel> loaded;
      if (!export_model.empty()) loaded = load_model(export_model, base);
      const EncoderStack raw(base, EncoderConfig{0}, 0);
      const EncoderStack& encoder = loaded ? encoder_of(loaded->model) : raw;
      TrainedSpace space;
      if (parse_space_kind(export_mode) == SpaceKind::relation) {
        if (pairs != "gold" && pairs != "all") throw ParseError("--pairs must be gold or all");
        space = extract_relation_reps(encoder, records, pairs == "gold" ? PairMode::gold : PairMode::all_candidates).space;
      } else {
        space = extract_entity_reps(encoder, records).space;
      }
      write_space(space, export_out);
      std::cout << "wrote " << space.size() << " vectors to " << export_out << '\n';
    } else if (score_cmd->parsed()) {
      const auto report = score(read_annotations(gold_path), read_annotations(pred_path), parse_score_mode(score_mode));
      std::cout << report_json(report) << '\n';
    } else if (run_cmd->parsed()) {
      run_pipeline(manifest, parse_stages(stages));
      std::cout << "pipeline finished; outputs in " << manifest.out_dir.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "relcl: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
