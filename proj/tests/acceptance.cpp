// Acceptance checks. Prints one line per criterion and exits nonzero if any
// criterion fails. Pass criterion numbers as arguments to run a subset.

#include "relcl/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>

using namespace relcl;
namespace fs = std::filesystem;

namespace {

enum class Verdict { pass, fail, skip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

Outcome check(bool ok, std::string detail) { return {ok ? Verdict::pass : Verdict::fail, std::move(detail)}; }

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------- 1

/// Builds D^-1/2 and multiplies explicitly, in long double.
Matrix adjacency_oracle(const Matrix& a) {
  const Index n = a.rows();
  std::vector<std::vector<long double>> hat(n, std::vector<long double>(n));
  std::vector<long double> inv_sqrt(n);
  for (Index i = 0; i < n; ++i) {
    long double d = 0;
    for (Index j = 0; j < n; ++j) {
      hat[i][j] = a(i, j) + (i == j ? 1.0L : 0.0L);
      d += hat[i][j];
    }
    inv_sqrt[i] = 1.0L / std::sqrt(d);
  }
  Matrix out(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      long double acc = 0;
      for (Index k = 0; k < n; ++k) {
        const long double left = (i == k ? inv_sqrt[i] : 0.0L) * hat[k][j];
        acc += left;
      }
      out(i, j) = static_cast<double>(acc * inv_sqrt[j]);
    }
  }
  return out;
}

Outcome criterion1() {
  Rng rng(2024);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Index n = 1 + static_cast<Index>(rng.uniform_index(8));
    Matrix a = Matrix::Zero(n, n);
    const double density = rng.uniform();
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) a(i, j) = a(j, i) = rng.uniform() < density ? 1.0 : 0.0;
    }
    worst = std::max(worst, (normalize_adjacency(a) - adjacency_oracle(a)).cwiseAbs().maxCoeff());
  }
  Matrix pair(2, 2);
  pair << 0, 1, 1, 0;
  const bool exact = (normalize_adjacency(pair).array() == 0.5).all();
  return check(worst <= 1e-12 && exact, "max |diff| " + fmt(worst) + ", 2-node exact " + (exact ? "yes" : "no"));
}

// ---------------------------------------------------------------- 2

/// Up to 6 tokens: [CLS], one or two drugs, one or two AEs, fillers.
SentenceRecord random_instance(Rng& rng, const std::string& id) {
  for (;;) {
    const std::size_t n = 5 + rng.uniform_index(2);
    std::vector<BioTag> tags(n, BioTag::O);
    std::vector<Span> drugs, aes;
    for (std::size_t t = 1; t < n; ++t) {
      const double u = rng.uniform();
      if (u < 0.3) {
        tags[t] = BioTag::B_DRUG;
        drugs.push_back({t, t, EntityType::drug});
      } else if (u < 0.6) {
        tags[t] = BioTag::B_AE;
        aes.push_back({t, t, EntityType::ae});
      }
    }
    if (drugs.empty() || aes.empty()) continue;
    SentenceRecord r;
    r.id = id;
    r.tokens.emplace_back(kStartToken);
    for (std::size_t t = 1; t < n; ++t) r.tokens.push_back("w" + std::to_string(rng.uniform_index(20)));
    r.tags = tags;
    for (const auto& d : drugs) {
      for (const auto& a : aes) {
        if (rng.uniform() < 0.6) r.relations.push_back(relation_heads(d, a));
      }
    }
    if (r.relations.empty()) r.relations.push_back(relation_heads(drugs[0], aes[0]));
    std::sort(r.relations.begin(), r.relations.end());
    if (eligible_records({r}, ModelKind::cldr).size() == 1) return r;
  }
}

std::shared_ptr<EmbeddingSource> random_base(const std::vector<SentenceRecord>& records, Index dim, Rng& rng) {
  auto base = std::make_shared<EmbeddingSource>(EmbeddingMode::file, dim);
  for (const auto& r : records) {
    Matrix m(static_cast<Index>(r.size()), dim);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    base->insert(r.id, m);
  }
  return base;
}

Outcome criterion2() {
  Rng rng(77);
  double worst[3] = {0, 0, 0};
  for (int trial = 0; trial < 6; ++trial) {
    const Index dim = 3 + static_cast<Index>(rng.uniform_index(6));
    const std::size_t z = 2 + rng.uniform_index(3);
    const std::vector<SentenceRecord> records{random_instance(rng, "a"), random_instance(rng, "b")};
    const auto base = random_base(records, dim, rng);
    const std::vector<const SentenceRecord*> batch{&records[0], &records[1]};
    const auto act = trial % 2 ? Activation::tanh : Activation::relu;

    ClgsConfig gs;
    gs.encoder = EncoderConfig{2, 0, act, trial % 3 == 0};
    gs.projection = trial % 2 == 0;
    gs.symmetric = true;
    gs.graph_pool = trial % 2 ? PoolingMode::max : PoolingMode::mean;
    ClgsModel clgs(base, gs, 10 + trial);
    std::vector<ClgsSamples> gs_samples;
    for (const auto* r : batch) {
      gs_samples.push_back(sample_negatives_clgs(*r, base->rows(*r), build_subgraph(*r, base->rows(*r)), z - 1, trial));
    }
    worst[0] = std::max(worst[0], check_gradients(clgs.parameters(), [&](Tape& t) {
                                    return clgs_batch_loss(t, clgs, batch, gs_samples);
                                  }).max_relative_error);

    CldrModel cldr(base, CldrConfig{EncoderConfig{2, 0, act, trial % 3 == 1}, 0.8, 0.1}, 20 + trial);
    std::vector<CldrSamples> dr_samples;
    for (const auto* r : batch) {
      dr_samples.push_back(
          sample_negatives_cldr(*r, base->rows(*r), build_disjoint_graphs(*r, base->rows(*r), 0.8), z - 1, trial));
    }
    worst[1] = std::max(worst[1], check_gradients(cldr.parameters(), [&](Tape& t) {
                                    return add(cldr_loss(t, cldr, records[0], dr_samples[0]),
                                               cldr_loss(t, cldr, records[1], dr_samples[1]));
                                  }).max_relative_error);

    ClnerModel clner(base, ClnerConfig{}, 30 + trial);
    const auto sample = sample_balanced_entities(batch, z, trial);
    worst[2] = std::max(worst[2], check_gradients(clner.parameters(), [&](Tape& t) {
                                    return clner_loss(t, clner, batch, sample);
                                  }).max_relative_error);
  }
  const double top = std::max({worst[0], worst[1], worst[2]});
  return check(top < 1e-4, "max rel err CLGS " + fmt(worst[0]) + ", CLDR " + fmt(worst[1]) + ", CLNER " + fmt(worst[2]));
}

// ---------------------------------------------------------------- 3

Outcome criterion3() {
  double worst = 0;
  auto note = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };

  for (Index z : {1, 2, 5, 8, 16}) {
    note(contrastive_nll_from_similarities(RowVector::Constant(z, 0.37), {0}, 0.1), std::log(double(z)));
    std::vector<Index> all(z);
    for (Index i = 0; i < z; ++i) all[i] = i;
    note(contrastive_nll_from_similarities(RowVector::LinSpaced(z, -1, 1), all, 0.1), 0.0);
    for (Index p = 1; p <= z; ++p) {
      std::vector<Index> pos(all.begin(), all.begin() + p);
      note(contrastive_nll_from_similarities(RowVector::Constant(z, -0.2), pos, 0.05), std::log(double(z) / p));
    }
  }

  // Constant base embeddings make every representation identical.
  Rng rng(5);
  const auto r = random_instance(rng, "c");
  auto base = std::make_shared<EmbeddingSource>(EmbeddingMode::file, 4);
  base->insert(r.id, Matrix::Constant(static_cast<Index>(r.size()), 4, 0.3));
  const Matrix& x = base->rows(r);
  const double relations = static_cast<double>(r.relations.size());
  // Corrupted subgraphs differ in degree structure, so constant features do
  // not give equal graph vectors there. Zero features do: every graph vector
  // is zero and every cosine is 0.
  auto zeros = std::make_shared<EmbeddingSource>(EmbeddingMode::file, 4);
  zeros->insert(r.id, Matrix::Zero(static_cast<Index>(r.size()), 4));
  const Matrix& x0 = zeros->rows(r);
  for (std::size_t z : {1, 4, 8}) {
    Tape t;
    ClgsModel clgs(zeros, ClgsConfig{}, 1);
    note(clgs_loss(t, clgs, r, sample_negatives_clgs(r, x0, build_subgraph(r, x0), z - 1, 3)).scalar(),
         std::log(double(z)));
    CldrModel cldr(base, CldrConfig{}, 1);
    note(cldr_loss(t, cldr, r, sample_negatives_cldr(r, x, build_disjoint_graphs(r, x, 0.8), z - 1, 3)).scalar(),
         relations * std::log(double(z)));
  }

  ClnerModel clner(base, ClnerConfig{}, 1);
  const std::vector<const SentenceRecord*> batch{&r};
  const auto sample = sample_balanced_entities(batch, 8, 2);
  std::map<BioTag, double> per_tag;
  for (const auto& item : sample.items) per_tag[item.tag] += 1;
  const double n = static_cast<double>(sample.items.size());
  double expected = 0;
  for (const auto& item : sample.items) expected += std::log((n - 1) / (per_tag[item.tag] - 1));
  Tape t;
  note(clner_loss(t, clner, batch, sample).scalar(), expected);

  // A single tag class leaves no negatives at all.
  SentenceRecord plain = r;
  plain.id = "plain";
  std::fill(plain.tags.begin(), plain.tags.end(), BioTag::O);
  plain.relations.clear();
  base->insert(plain.id, random_base({plain}, 4, rng)->rows(plain));
  const std::vector<const SentenceRecord*> lone{&plain};
  note(clner_loss(t, clner, lone, sample_balanced_entities(lone, 4, 1)).scalar(), 0.0);

  return check(worst <= 1e-9, "max |loss - closed form| " + fmt(worst));
}

// ---------------------------------------------------------------- 4-6 shared setup

struct Desk {
  std::vector<SentenceRecord> train;
  std::vector<SentenceRecord> test;
  std::shared_ptr<EmbeddingSource> base;
};

Desk desk(std::uint64_t seed) {
  const auto corpus = synth_corpus(SynthConfig{.sentences = 400, .seed = seed});
  auto base = std::make_shared<EmbeddingSource>(synth_embeddings(corpus, 64, seed + 1));
  const auto folds = make_folds(corpus, 5, seed);
  return {select_records(corpus, folds[0].train_ids), select_records(corpus, folds[0].test_ids), base};
}

TrainConfig desk_config(ModelKind kind, std::uint64_t seed) {
  auto c = TrainConfig::defaults(kind);
  c.learning_rate = 1e-3;
  c.seed = seed;
  return c;
}

/// KNN F1 on held-out gold-mode candidates, k picked on a validation slice
/// of the training side.
double relation_knn_f1(const EncoderStack& enc, const Desk& d, std::uint64_t seed) {
  const auto [fit, val] = split_validation(d.train, 0.10, seed);
  const auto fit_space = extract_relation_reps(enc, fit, PairMode::gold, 7, 3);
  const auto val_q = extract_relation_reps(enc, val, PairMode::gold, 7, 5);
  const std::size_t k = select_k(fit_space.space, val_q.space.vectors, val_q.space.labels);
  const auto space = extract_relation_reps(enc, d.train, PairMode::gold, 7, 3);
  const auto queries = extract_relation_reps(enc, d.test, PairMode::gold, 7, 99);
  const auto predicted = knn_classify(space.space, queries.space.vectors, {k, Metric::cosine});
  return prf(label_counts(predicted, queries.space.labels, kRelationLabel)).f1;
}

Outcome criterion4() {
  const std::uint64_t seed = 1;
  const auto d = desk(seed);
  auto result = train(desk_config(ModelKind::cldr, seed), d.train, d.base);
  const auto& loss = result.history.epoch_loss;
  const double drop = 1.0 - loss.back() / loss.front();
  const double tuned = relation_knn_f1(encoder_of(result.model), d, seed);
  const EncoderStack frozen(d.base, EncoderConfig{0, 0, Activation::relu, false}, seed);
  const double baseline = relation_knn_f1(frozen, d, seed);
  return check(loss.size() == 30 && drop >= 0.5 && tuned >= 0.85 && tuned - baseline >= 0.10,
               "loss drop " + fmt(100 * drop) + "%, tuned F1 " + fmt(tuned) + ", frozen F1 " + fmt(baseline));
}

Outcome criterion5() {
  const std::uint64_t seed = 1;
  const auto d = desk(seed);
  const auto config = desk_config(ModelKind::clgs, seed);
  const auto untrained = std::get<ClgsModel>(make_model(config, d.base));
  const auto before = similarity_check(untrained, d.test, 7, 5);
  auto result = train(config, d.train, d.base);
  const auto after = similarity_check(std::get<ClgsModel>(result.model), d.test, 7, 5);
  return check(after.accuracy >= 0.8 && std::abs(before.accuracy - 0.125) <= 0.10,
               "trained " + fmt(after.accuracy) + ", untrained " + fmt(before.accuracy) + " over " +
                   std::to_string(after.evaluated) + " sentences");
}

Outcome criterion6() {
  const std::uint64_t seed = 1;
  const auto d = desk(seed);
  auto result = train(desk_config(ModelKind::clner, seed), d.train, d.base);
  const auto& enc = encoder_of(result.model);

  const auto held = extract_entity_reps(enc, d.test);
  Matrix unit = held.space.vectors;
  for (Index i = 0; i < unit.rows(); ++i) unit.row(i).normalize();
  const Matrix sims = unit * unit.transpose();
  double same = 0, cross = 0;
  std::size_t n_same = 0, n_cross = 0;
  for (Index i = 0; i < sims.rows(); ++i) {
    for (Index j = i + 1; j < sims.cols(); ++j) {
      if (held.space.labels[i] == held.space.labels[j]) {
        same += sims(i, j);
        ++n_same;
      } else {
        cross += sims(i, j);
        ++n_cross;
      }
    }
  }
  const double gap = same / n_same - cross / n_cross;

  const auto [fit, val] = split_validation(d.train, 0.10, seed);
  const auto val_q = extract_entity_reps(enc, val);
  const std::size_t k = select_k(extract_entity_reps(enc, fit).space, val_q.space.vectors, val_q.space.labels);
  const auto predicted = knn_classify(extract_entity_reps(enc, d.train).space, held.space.vectors, {k});
  std::size_t right = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) right += predicted[i] == held.space.labels[i];
  const double accuracy = double(right) / double(predicted.size());
  return check(gap >= 0.2 && accuracy >= 0.9,
               "cosine gap " + fmt(gap) + ", token accuracy " + fmt(accuracy) + " (k=" + std::to_string(k) + ")");
}

// ---------------------------------------------------------------- 7

template <typename T>
Counts set_oracle(const std::vector<T>& predicted, const std::vector<T>& gold) {
  const std::set<T> p(predicted.begin(), predicted.end());
  const std::set<T> g(gold.begin(), gold.end());
  std::vector<T> both;
  std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(both));
  return {both.size(), p.size() - both.size(), g.size() - both.size()};
}

Span any_span(Rng& rng, EntityType type) {
  const auto s = rng.uniform_index(5);
  return {s, s + rng.uniform_index(3), type};
}

/// A sentence's entities and relations as BIO decoding would produce them:
/// entity spans never overlap.
struct Sentence {
  std::vector<Span> entities;
  std::vector<EntityRelation> relations;
};

std::vector<EntityRelation> random_relations(Rng& rng, const std::vector<Span>& entities) {
  std::vector<EntityRelation> out;
  for (const auto& d : entities) {
    for (const auto& a : entities) {
      if (d.type == EntityType::drug && a.type == EntityType::ae && rng.uniform() < 0.5) out.push_back({d, a});
    }
  }
  return out;
}

/// Gold from random tags; the prediction perturbs a few gold tags and keeps
/// gold relations whose spans survive, plus random extras.
std::pair<Sentence, Sentence> random_sentence_pair(Rng& rng) {
  const std::size_t n = 4 + rng.uniform_index(8);
  std::vector<BioTag> tags(n);
  for (auto& t : tags) t = static_cast<BioTag>(rng.uniform_index(kBioTagCount));
  Sentence gold{decode_bio(tags), {}};
  gold.relations = random_relations(rng, gold.entities);
  for (auto& t : tags) {
    if (rng.uniform() < 0.15) t = static_cast<BioTag>(rng.uniform_index(kBioTagCount));
  }
  Sentence pred{decode_bio(tags), {}};
  const std::set<Span> kept(pred.entities.begin(), pred.entities.end());
  for (const auto& r : gold.relations) {
    if (kept.count(r.drug) && kept.count(r.ae) && rng.uniform() < 0.7) pred.relations.push_back(r);
  }
  for (const auto& r : random_relations(rng, pred.entities)) {
    if (rng.uniform() < 0.3) pred.relations.push_back(r);
  }
  return {gold, pred};
}

Outcome criterion7() {
  Rng rng(700);
  std::size_t disagreements = 0, order_violations = 0;
  for (int trial = 0; trial < 500; ++trial) {
    // Arbitrary sets, overlaps and duplicates included.
    auto type = [&] { return rng.uniform() < 0.5 ? EntityType::drug : EntityType::ae; };
    std::vector<Span> pe, ge;
    for (std::size_t i = 0, n = rng.uniform_index(7); i < n; ++i) pe.push_back(any_span(rng, type()));
    for (std::size_t i = 0, n = rng.uniform_index(7); i < n; ++i) ge.push_back(any_span(rng, type()));
    std::vector<EntityRelation> pr, gr;
    for (std::size_t i = 0, n = rng.uniform_index(6); i < n; ++i) {
      pr.push_back({any_span(rng, EntityType::drug), any_span(rng, EntityType::ae)});
    }
    for (std::size_t i = 0, n = rng.uniform_index(6); i < n; ++i) {
      // Reuse predicted relations some of the time so hits actually happen.
      gr.push_back(!pr.empty() && rng.uniform() < 0.4 ? pr[rng.uniform_index(pr.size())]
                                                       : EntityRelation{any_span(rng, EntityType::drug),
                                                                        any_span(rng, EntityType::ae)});
    }
    disagreements += !(strict_entity_match(pe, ge) == set_oracle(pe, ge));
    disagreements += !(strict_relation_match(pr, gr) == set_oracle(pr, gr));
    disagreements += !(re_minus(heads_of(pr), heads_of(gr)) == set_oracle(heads_of(pr), heads_of(gr)));

    // Well-formed sentences, where the strict/relaxed ordering is claimed.
    const auto [gold, pred] = random_sentence_pair(rng);
    std::vector<RelationPair> ph, gh;
    for (const auto& x : pred.relations) ph.push_back({x.drug.end, x.ae.end});
    for (const auto& x : gold.relations) gh.push_back({x.drug.end, x.ae.end});
    const auto strict = strict_relation_match(pred.relations, gold.relations);
    const auto relaxed = re_minus(ph, gh);
    disagreements += !(strict_entity_match(pred.entities, gold.entities) == set_oracle(pred.entities, gold.entities));
    disagreements += !(strict == set_oracle(pred.relations, gold.relations));
    disagreements += !(relaxed == set_oracle(ph, gh));
    order_violations += strict.tp > relaxed.tp;
  }
  return check(disagreements == 0 && order_violations == 0,
               std::to_string(disagreements) + " oracle disagreements, " + std::to_string(order_violations) +
                   " RE TP > RE- TP");
}

// ---------------------------------------------------------------- 8

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Relative path -> content, manifest.txt excluded (it records the output dir).
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root).generic_string();
    if (rel == "manifest.txt") continue;
    out[rel] = slurp(e.path());
  }
  return out;
}

Outcome criterion8() {
  const auto root = fs::temp_directory_path() / "relcl_acceptance_determinism";
  fs::remove_all(root);
  write_corpus(synth_corpus(SynthConfig{.sentences = 150, .seed = 8}), root / "data");
  {
    std::ofstream(root / "run.conf") << "learning_rate = 0.001\nepochs = 4\npipeline.folds = 5\n"
                                        "pipeline.run_folds = 1\npipeline.embedding_dim = 32\n";
  }
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* name : {"a", "b"}) {
    PipelineManifest m;
    m.data_dir = root / "data";
    m.config_path = root / "run.conf";
    m.out_dir = root / name;
    m.seed = 3;
    run_pipeline(m, kAllStages);
    runs.push_back(tree(m.out_dir));
  }
  std::size_t differing = 0, checkpoints = 0, spaces = 0;
  for (const auto& [path, content] : runs[0]) {
    const auto other = runs[1].find(path);
    differing += other == runs[1].end() || other->second != content;
    checkpoints += path.size() > 5 && path.substr(path.size() - 5) == ".ckpt";
    spaces += path.find("_space.txt") != std::string::npos;
  }
  differing += runs[1].size() != runs[0].size();
  const bool report = runs[0].count("report.json") == 1;
  return check(differing == 0 && checkpoints > 0 && spaces > 0 && report,
               std::to_string(runs[0].size()) + " files compared (" + std::to_string(checkpoints) + " checkpoints, " +
                   std::to_string(spaces) + " spaces), " + std::to_string(differing) + " differ");
}

// ---------------------------------------------------------------- 9

struct SplitRow {
  std::size_t train_relations, train_entities, test_relations, test_entities;
};

const SplitRow kPublishedSplits[10] = {
    {6155, 9769, 666, 1070}, {6097, 9713, 724, 1126}, {6133, 9748, 688, 1091}, {6164, 9771, 657, 1068},
    {6173, 9785, 648, 1054}, {6089, 9713, 732, 1126}, {6155, 9768, 666, 1071}, {6117, 9754, 704, 1085},
    {6133, 9760, 688, 1079}, {6173, 9770, 648, 1069},
};

Outcome criterion9() {
  const char* data = std::getenv("RELCL_ADE_DATA");
  const char* splits = std::getenv("RELCL_ADE_SPLITS");
  if (!data || !splits) return {Verdict::skip, "set RELCL_ADE_DATA and RELCL_ADE_SPLITS to check the ADE statistics"};
  const auto corpus = load_corpus(data);
  const auto folds = load_splits(splits);
  const auto total = corpus_stats(corpus);
  bool ok = total.sentence_count == 4272 && total.relation_count == 6821;
  std::string detail = std::to_string(total.sentence_count) + " sentences, " + std::to_string(total.relation_count) +
                       " relations";
  std::size_t rows_off = 0;
  for (const auto& f : folds) {
    if (f.fold_index < 1 || f.fold_index > 10) continue;
    const auto& want = kPublishedSplits[f.fold_index - 1];
    const auto tr = corpus_stats(select_records(corpus, f.train_ids));
    const auto te = corpus_stats(select_records(corpus, f.test_ids));
    if (f.fold_index == 1) {
      ok = ok && tr.relation_count == want.train_relations && te.relation_count == want.test_relations;
      detail += "; split 1 " + std::to_string(tr.relation_count) + "/" + std::to_string(te.relation_count);
    }
    rows_off += tr.relation_count != want.train_relations || te.relation_count != want.test_relations ||
                tr.entity_count != want.train_entities || te.entity_count != want.test_entities;
  }
  detail += "; " + std::to_string(rows_off) + " split rows differ from the published table";
  return check(ok, detail);
}

}  // namespace

int main(int argc, char** argv) {
  setenv("RELCL_LOG", "error", 0);
  const std::vector<std::tuple<int, std::string, double, std::function<Outcome()>>> criteria{
      {1, "adjacency normalization matches the dense oracle", 5, criterion1},
      {2, "analytic gradients match finite differences", 30, criterion2},
      {3, "loss closed forms", 0, criterion3},
      {4, "CLDR learning signal and KNN relation F1", 300, criterion4},
      {5, "CLGS similarity check", 300, criterion5},
      {6, "CLNER tag separation", 0, criterion6},
      {7, "strict evaluation oracle equivalence", 0, criterion7},
      {8, "pipeline determinism", 0, criterion8},
      {9, "ADE corpus statistics", 10, criterion9},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& [id, name, budget, run] : criteria) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {Verdict::fail, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (budget > 0 && secs > budget && o.verdict == Verdict::pass) {
      o = {Verdict::fail, o.detail + "; over the " + fmt(budget) + " s budget"};
    }
    const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "SKIP";
    std::cout << tag << " criterion " << id << ": " << name << " (" << o.detail << ") [" << fmt(secs) << " s]"
              << std::endl;
    failures += o.verdict == Verdict::fail;
  }
  return failures == 0 ? 0 : 1;
}
