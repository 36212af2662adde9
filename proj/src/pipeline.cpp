#include "relcl/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace relcl {

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::prep: return "prep";
    case Stage::train_cldr: return "train-cldr";
    case Stage::train_clner: return "train-clner";
    case Stage::extract: return "extract";
    case Stage::knn: return "knn";
    case Stage::score: return "score";
  }
  return "?";
}

Stage parse_stage(std::string_view text) {
  for (auto s : kAllStages) {
    if (to_string(s) == text) return s;
  }
  throw ParseError("unknown stage '" + std::string(text) + "'");
}

std::vector<Stage> parse_stages(std::string_view text) {
  if (text == "all") return kAllStages;
  std::set<Stage> picked;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto word = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (!word.empty()) picked.insert(parse_stage(word));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (picked.empty()) throw ParseError("no stages given");
  return {picked.begin(), picked.end()};
}

PipelineSettings load_pipeline_settings(const fs::path& config_path, std::uint64_t seed) {
  PipelineSettings s;
  std::map<std::string, std::string> pairs;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ParseError("cannot open config file " + config_path.string());
    pairs = read_config_pairs(in);
  }
  std::map<std::string, std::string> cldr{{"model", "cldr"}};
  std::map<std::string, std::string> clner{{"model", "clner"}};
  for (const auto& [key, value] : pairs) {
    if (key.rfind("pipeline.", 0) == 0) {
      const auto name = key.substr(9);
      try {
        if (name == "folds") s.folds = std::stoi(value);
        else if (name == "run_folds") s.run_folds = std::stoi(value);
        else if (name == "embedding_dim") s.embedding_dim = std::stol(value);
        else if (name == "space_negatives") s.space_negatives = std::stoul(value);
        else if (name == "metric") s.metric = parse_metric(value);
        else if (name == "k_grid") {
          s.k_grid.clear();
          std::istringstream list(value);
          std::string k;
          while (std::getline(list, k, ',')) s.k_grid.push_back(std::stoul(k));
        } else {
          throw ParseError("unknown config key '" + key + "'");
        }
      } catch (const std::logic_error&) {
        throw ParseError("bad value '" + value + "' for config key '" + key + "'");
      }
    } else if (key.rfind("cldr.", 0) == 0) {
      cldr[key.substr(5)] = value;
    } else if (key.rfind("clner.", 0) == 0) {
      clner[key.substr(6)] = value;
    } else if (key == "model") {
      throw ParseError("the pipeline trains both models; drop the 'model' key");
    } else {
      cldr.emplace(key, value);
      clner.emplace(key, value);
    }
  }
  s.cldr = train_config_from_pairs(cldr);
  s.clner = train_config_from_pairs(clner);
  s.cldr.seed = seed;
  s.clner.seed = seed;
  if (s.k_grid.empty()) throw ValidationError("pipeline.k_grid is empty");
  return s;
}

Annotation combine_predictions(const SentenceRecord& record, const std::vector<BioTag>& token_tags,
                               const std::vector<RelationPair>& related_pairs) {
  Annotation out{record.id, decode_bio(token_tags), {}};
  std::map<std::size_t, Span> drug_ending;
  std::map<std::size_t, Span> ae_ending;
  for (const auto& s : out.entities) (s.type == EntityType::drug ? drug_ending : ae_ending).emplace(s.end, s);
  std::set<EntityRelation> kept;
  for (const auto& p : related_pairs) {
    const auto d = drug_ending.find(p.drug);
    const auto a = ae_ending.find(p.ae);
    if (d != drug_ending.end() && a != ae_ending.end()) kept.insert({d->second, a->second});
  }
  out.relations.assign(kept.begin(), kept.end());
  return out;
}

namespace {

struct Layout {
  fs::path root;

  fs::path prep() const { return root / "prep"; }
  fs::path corpus() const { return prep() / "corpus"; }
  fs::path embeddings() const { return prep() / "embeddings"; }
  fs::path splits() const { return prep() / "splits"; }
  fs::path fold(int k) const { return root / ("fold" + std::to_string(k)); }
  fs::path model(int k, ModelKind kind) const { return fold(k) / std::string(to_string(kind)); }
};

void require(const fs::path& path, Stage stage, Stage producer) {
  if (!fs::exists(path)) {
    throw ValidationError("stage '" + std::string(to_string(stage)) + "' needs " + path.string() +
                          " (produced by stage '" + std::string(to_string(producer)) + "')");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string format_manifest(const PipelineManifest& m, const PipelineSettings& s) {
  std::ostringstream out;
  out << "# relcl pipeline manifest\n"
      << "data = " << m.data_dir.string() << '\n'
      << "emb = " << m.embedding_dir.string() << '\n'
      << "splits = " << m.split_dir.string() << '\n'
      << "config = " << m.config_path.string() << '\n'
      << "out = " << m.out_dir.string() << '\n'
      << "seed = " << m.seed << '\n'
      << "pipeline.folds = " << s.folds << '\n'
      << "pipeline.run_folds = " << s.run_folds << '\n'
      << "pipeline.embedding_dim = " << s.embedding_dim << '\n'
      << "pipeline.space_negatives = " << s.space_negatives << '\n'
      << "pipeline.metric = " << to_string(s.metric) << '\n'
      << "pipeline.k_grid =";
  for (std::size_t i = 0; i < s.k_grid.size(); ++i) out << (i ? "," : " ") << s.k_grid[i];
  out << "\n# cldr\n" << format_train_config(s.cldr) << "# clner\n" << format_train_config(s.clner);
  return out.str();
}

class Runner {
 public:
  Runner(const PipelineManifest& manifest, PipelineSettings settings)
      : m_(manifest), s_(std::move(settings)), at_{manifest.out_dir} {}

  void run(Stage stage) {
    switch (stage) {
      case Stage::prep: prep(); break;
      case Stage::train_cldr: train_model(Stage::train_cldr, s_.cldr); break;
      case Stage::train_clner: train_model(Stage::train_clner, s_.clner); break;
      case Stage::extract: extract(); break;
      case Stage::knn: knn(); break;
      case Stage::score: score_folds(); break;
    }
  }

 private:
  void prep() {
    if (m_.data_dir.empty()) throw ValidationError("stage 'prep' needs --data");
    auto corpus = load_corpus(m_.data_dir);
    if (corpus.empty()) throw ValidationError("no records in " + m_.data_dir.string());
    const auto folds = m_.split_dir.empty() ? make_folds(corpus, s_.folds, m_.seed) : load_splits(m_.split_dir);
    for (const auto& f : folds) {
      select_records(corpus, f.train_ids);
      select_records(corpus, f.test_ids);
    }
    const EmbeddingSource source = m_.embedding_dir.empty()
                                       ? synth_embeddings(corpus, s_.embedding_dim, mix_seed(m_.seed, 0xe3b))
                                       : load_embedding_dir(m_.embedding_dir);
    for (const auto& r : corpus) source.rows(r);

    fs::remove_all(at_.prep());
    write_corpus(corpus, at_.corpus());
    write_embedding_dir(source, corpus, at_.embeddings());
    write_splits(folds, at_.splits());
    write_text(at_.prep() / "stats.json", stats_json(corpus_stats(corpus)) + "\n");
    log(LogLevel::info, "prep: " + std::to_string(corpus.size()) + " records, " + std::to_string(folds.size()) + " folds");
  }

  struct Inputs {
    std::vector<SentenceRecord> corpus;
    std::vector<FoldSplit> folds;
    std::shared_ptr<const EmbeddingSource> base;
  };

  const Inputs& inputs(Stage stage) {
    if (!inputs_) {
      for (const auto& p : {at_.corpus(), at_.embeddings(), at_.splits()}) require(p, stage, Stage::prep);
      Inputs in;
      in.corpus = load_corpus(at_.corpus());
      in.folds = load_splits(at_.splits());
      in.base = std::make_shared<const EmbeddingSource>(load_embedding_dir(at_.embeddings()));
      const auto wanted = s_.run_folds > 0 ? static_cast<std::size_t>(s_.run_folds) : in.folds.size();
      if (wanted < in.folds.size()) in.folds.resize(wanted);
      inputs_ = std::move(in);
    }
    return *inputs_;
  }

  void train_model(Stage stage, TrainConfig config) {
    const auto& in = inputs(stage);
    for (const auto& fold : in.folds) {
      config.seed = mix_seed(m_.seed, static_cast<std::uint64_t>(fold.fold_index));
      const auto dir = at_.model(fold.fold_index, config.model);
      fs::remove_all(dir);
      train(config, select_records(in.corpus, fold.train_ids), in.base, dir);
    }
  }

  std::pair<std::vector<SentenceRecord>, std::vector<SentenceRecord>> knn_split(const Inputs& in,
                                                                              const FoldSplit& fold) const {
    return split_validation(select_records(in.corpus, fold.train_ids), 0.10,
                            mix_seed(m_.seed, 0x4b00 + static_cast<std::uint64_t>(fold.fold_index)));
  }

  void extract() {
    const auto& in = inputs(Stage::extract);
    for (const auto& fold : in.folds) {
      const auto cldr_dir = at_.model(fold.fold_index, ModelKind::cldr);
      const auto clner_dir = at_.model(fold.fold_index, ModelKind::clner);
      require(cldr_dir / "model.ckpt", Stage::extract, Stage::train_cldr);
      require(clner_dir / "model.ckpt", Stage::extract, Stage::train_clner);
      auto cldr = load_model(cldr_dir, in.base);
      auto clner = load_model(clner_dir, in.base);
      const auto [fit, validation] = knn_split(in, fold);
      const auto producer = [](const fs::path& dir) {
        std::ifstream f(dir / "manifest.txt", std::ios::binary);
        std::stringstream text;
        text << f.rdbuf();
        return hex64(fnv1a(text.str()));
      };
      const auto seed = mix_seed(m_.seed, 0x5ace + static_cast<std::uint64_t>(fold.fold_index));
      auto relation = extract_relation_reps(encoder_of(cldr.model), fit, PairMode::gold, s_.space_negatives, seed);
      auto relation_val =
          extract_relation_reps(encoder_of(cldr.model), validation, PairMode::gold, s_.space_negatives, seed + 1);
      auto entity = extract_entity_reps(encoder_of(clner.model), fit);
      auto entity_val = extract_entity_reps(encoder_of(clner.model), validation);
      for (auto* space : {&relation.space, &relation_val.space}) space->produced_by = producer(cldr_dir);
      for (auto* space : {&entity.space, &entity_val.space}) space->produced_by = producer(clner_dir);
      const auto dir = at_.fold(fold.fold_index);
      write_space(relation.space, dir / "relation_space.txt");
      write_space(relation_val.space, dir / "relation_validation.txt");
      write_space(entity.space, dir / "entity_space.txt");
      write_space(entity_val.space, dir / "entity_validation.txt");
    }
  }

  void knn() {
    const auto& in = inputs(Stage::knn);
    for (const auto& fold : in.folds) {
      const auto dir = at_.fold(fold.fold_index);
      for (const auto* name : {"relation_space.txt", "relation_validation.txt", "entity_space.txt", "entity_validation.txt"}) {
        require(dir / name, Stage::knn, Stage::extract);
      }
      const auto relation = read_space(dir / "relation_space.txt");
      const auto relation_val = read_space(dir / "relation_validation.txt");
      const auto entity = read_space(dir / "entity_space.txt");
      const auto entity_val = read_space(dir / "entity_validation.txt");
      const auto grid_for = [&](const TrainedSpace& space) {
        std::vector<std::size_t> grid;
        for (auto k : s_.k_grid) {
          if (k <= space.size()) grid.push_back(k);
        }
        if (grid.empty()) throw ValidationError("every k in the grid exceeds the space size");
        return grid;
      };
      const auto k_relation = select_k(relation, relation_val.vectors, relation_val.labels, grid_for(relation), s_.metric);
      const auto k_entity = select_k(entity, entity_val.vectors, entity_val.labels, grid_for(entity), s_.metric);

      auto cldr = load_model(at_.model(fold.fold_index, ModelKind::cldr), in.base);
      auto clner = load_model(at_.model(fold.fold_index, ModelKind::clner), in.base);
      const auto test = select_records(in.corpus, fold.test_ids);
      const auto candidates = extract_relation_reps(encoder_of(cldr.model), test, PairMode::all_candidates);
      const auto tokens = extract_entity_reps(encoder_of(clner.model), test);
      const auto relation_labels = knn_classify(relation, candidates.space.vectors, {k_relation, s_.metric});
      const auto token_labels = knn_classify(entity, tokens.space.vectors, {k_entity, s_.metric});

      std::vector<std::vector<BioTag>> tags(test.size());
      for (std::size_t r = 0; r < test.size(); ++r) tags[r].assign(test[r].size(), BioTag::O);
      for (std::size_t i = 0; i < token_labels.size(); ++i) {
        tags[tokens.origins[i].record][tokens.origins[i].token] = parse_bio_tag(token_labels[i]);
      }
      std::vector<std::vector<RelationPair>> related(test.size());
      for (std::size_t i = 0; i < relation_labels.size(); ++i) {
        if (relation_labels[i] == kRelationLabel) related[candidates.origins[i].record].push_back(candidates.origins[i].pair);
      }
      std::vector<Annotation> predicted;
      std::vector<Annotation> gold;
      for (std::size_t r = 0; r < test.size(); ++r) {
        predicted.push_back(combine_predictions(test[r], tags[r], related[r]));
        gold.push_back(annotation_of(test[r]));
      }
      write_annotations(predicted, dir / "predictions.jsonl");
      write_annotations(gold, dir / "gold.jsonl");
      json choice;
      choice["k_relation"] = k_relation;
      choice["k_entity"] = k_entity;
      choice["metric"] = std::string(to_string(s_.metric));
      choice["relation_candidates"] = candidates.space.size();
      write_text(dir / "knn.json", choice.dump(2) + "\n");
    }
  }

  void score_folds() {
    const auto& in = inputs(Stage::score);
    json report;
    json per_fold = json::array();
    std::map<ScoreMode, std::vector<Prf>> scores;
    for (const auto& fold : in.folds) {
      const auto dir = at_.fold(fold.fold_index);
      require(dir / "predictions.jsonl", Stage::score, Stage::knn);
      require(dir / "gold.jsonl", Stage::score, Stage::knn);
      const auto predicted = read_annotations(dir / "predictions.jsonl");
      const auto gold = read_annotations(dir / "gold.jsonl");
      json entry;
      entry["fold"] = fold.fold_index;
      for (auto mode : {ScoreMode::ner, ScoreMode::re, ScoreMode::re_minus}) {
        const auto r = score(gold, predicted, mode);
        scores[mode].push_back(r.score);
        entry[std::string(to_string(mode))] = json::parse(report_json(r));
      }
      per_fold.push_back(std::move(entry));
    }
    report["folds"] = std::move(per_fold);
    json mean;
    for (const auto& [mode, list] : scores) {
      const auto agg = cross_fold_aggregate(list);
      mean[std::string(to_string(mode))] = {{"precision", agg.mean.precision}, {"recall", agg.mean.recall}, {"f1", agg.mean.f1}};
    }
    report["mean"] = std::move(mean);
    write_text(at_.root / "report.json", report.dump(2) + "\n");
  }

  const PipelineManifest& m_;
  PipelineSettings s_;
  Layout at_;
  std::optional<Inputs> inputs_;
};

}  // namespace

void run_pipeline(const PipelineManifest& manifest, const std::vector<Stage>& stages) {
  if (manifest.out_dir.empty()) throw ValidationError("pipeline needs an output directory");
  fs::create_directories(manifest.out_dir);
  const auto failed = manifest.out_dir / "FAILED";
  fs::remove(failed);
  Stage current = Stage::prep;
  try {
    auto settings = load_pipeline_settings(manifest.config_path, manifest.seed);
    write_text(manifest.out_dir / "manifest.txt", format_manifest(manifest, settings));
    Runner runner(manifest, std::move(settings));
    const std::set<Stage> wanted(stages.begin(), stages.end());
    for (auto stage : kAllStages) {
      if (!wanted.count(stage)) continue;
      current = stage;
      log(LogLevel::info, "stage " + std::string(to_string(stage)));
      runner.run(stage);
    }
  } catch (const std::exception& e) {
    write_text(failed, "stage " + std::string(to_string(current)) + ": " + e.what() + "\n");
    throw;
  }
}

}  // namespace relcl
