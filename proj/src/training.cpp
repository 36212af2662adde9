#include "relcl/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace relcl {

TrainConfig TrainConfig::defaults(ModelKind kind) {
  TrainConfig c;
  c.model = kind;
  if (kind == ModelKind::clner) {
    c.batch_size = 16;
    c.head_layers = 1;
    c.activation = Activation::identity;
  }
  return c;
}

void validate(const TrainConfig& c) {
  if (c.batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (!(c.tau > 0.0)) throw ValidationError("tau must be positive");
  if (!(c.learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(c.validation_fraction > 0.0 && c.validation_fraction < 1.0)) {
    throw ValidationError("validation_fraction must lie in (0, 1)");
  }
  if (c.z < 1) throw ValidationError("z must be at least 1");
  if (c.epochs < 1) throw ValidationError("epochs must be at least 1");
  if (c.model == ModelKind::cldr) lambda_adjacency(c.lambda);
  if (c.model == ModelKind::clner && c.head_layers != 1) {
    throw ValidationError("the entity model takes exactly one dense layer");
  }
  if (c.model == ModelKind::clgs && c.graph_pool == PoolingMode::first_token) {
    throw ValidationError("graph_pool must be mean or max");
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ParseError("expected a boolean, got '" + v + "'");
}

}  // namespace

std::map<std::string, std::string> read_config_pairs(std::istream& in) {
  std::map<std::string, std::string> pairs;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("line " + std::to_string(number) + ": expected key = value");
    pairs[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return pairs;
}

TrainConfig parse_train_config(std::istream& in, ModelKind fallback) {
  return train_config_from_pairs(read_config_pairs(in), fallback);
}

TrainConfig train_config_from_pairs(const std::map<std::string, std::string>& pairs, ModelKind fallback) {
  ModelKind kind = fallback;
  if (const auto it = pairs.find("model"); it != pairs.end()) kind = parse_model_kind(it->second);
  TrainConfig c = TrainConfig::defaults(kind);
  for (const auto& [key, value] : pairs) {
    try {
      if (key == "model") continue;
      if (key == "batch_size") c.batch_size = std::stoul(value);
      else if (key == "learning_rate") c.learning_rate = std::stod(value);
      else if (key == "epochs") c.epochs = std::stoul(value);
      else if (key == "tau") c.tau = std::stod(value);
      else if (key == "lambda") c.lambda = std::stod(value);
      else if (key == "z") c.z = std::stoul(value);
      else if (key == "seed") c.seed = std::stoull(value);
      else if (key == "graph_pool") c.graph_pool = parse_pooling(value);
      else if (key == "text_pool") c.text_pool = parse_pooling(value);
      else if (key == "projection") c.projection = parse_bool(value);
      else if (key == "symmetric") c.symmetric = parse_bool(value);
      else if (key == "validation_fraction") c.validation_fraction = std::stod(value);
      else if (key == "head_layers") c.head_layers = std::stoul(value);
      else if (key == "hidden") c.hidden = std::stol(value);
      else if (key == "activation") c.activation = parse_activation(value);
      else if (key == "context_mixer") c.context_mixer = parse_bool(value);
      else if (key == "residual") c.residual = parse_bool(value);
      else if (key == "ner_quota") c.ner_quota = std::stoul(value);
      else throw ParseError("unknown config key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw ParseError("bad value '" + value + "' for config key '" + key + "'");
    } catch (const std::out_of_range&) {
      throw ParseError("value '" + value + "' out of range for config key '" + key + "'");
    }
  }
  validate(c);
  return c;
}

TrainConfig load_train_config(const fs::path& path, ModelKind fallback) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path.string());
  return parse_train_config(in, fallback);
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream out;
  out << "model = " << to_string(c.model) << '\n'
      << "batch_size = " << c.batch_size << '\n'
      << "learning_rate = " << format_double(c.learning_rate) << '\n'
      << "epochs = " << c.epochs << '\n'
      << "tau = " << format_double(c.tau) << '\n'
      << "lambda = " << format_double(c.lambda) << '\n'
      << "z = " << c.z << '\n'
      << "seed = " << c.seed << '\n'
      << "graph_pool = " << to_string(c.graph_pool) << '\n'
      << "text_pool = " << to_string(c.text_pool) << '\n'
      << "projection = " << (c.projection ? "true" : "false") << '\n'
      << "symmetric = " << (c.symmetric ? "true" : "false") << '\n'
      << "validation_fraction = " << format_double(c.validation_fraction) << '\n'
      << "head_layers = " << c.head_layers << '\n'
      << "hidden = " << c.hidden << '\n'
      << "activation = " << to_string(c.activation) << '\n'
      << "context_mixer = " << (c.context_mixer ? "true" : "false") << '\n'
      << "residual = " << (c.residual ? "true" : "false") << '\n'
      << "ner_quota = " << c.ner_quota << '\n';
  return out.str();
}

AnyModel make_model(const TrainConfig& c, std::shared_ptr<const EmbeddingSource> base) {
  validate(c);
  const EncoderConfig encoder{c.head_layers, c.hidden, c.activation, c.context_mixer, c.residual};
  switch (c.model) {
    case ModelKind::clgs:
      return ClgsModel(std::move(base), ClgsConfig{encoder, c.graph_pool, c.text_pool, c.projection, c.symmetric, c.tau},
                       c.seed);
    case ModelKind::cldr: return CldrModel(std::move(base), CldrConfig{encoder, c.lambda, c.tau}, c.seed);
    case ModelKind::clner: break;
  }
  return ClnerModel(std::move(base), ClnerConfig{encoder, c.tau, c.ner_quota}, c.seed);
}

std::vector<Parameter*> parameters_of(AnyModel& model) {
  return std::visit([](auto& m) { return m.parameters(); }, model);
}

EncoderStack& encoder_of(AnyModel& model) {
  return std::visit([](auto& m) -> EncoderStack& { return m.encoder; }, model);
}

std::pair<std::vector<SentenceRecord>, std::vector<SentenceRecord>> split_validation(
    const std::vector<SentenceRecord>& records, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ValidationError("validation fraction must lie in (0, 1)");
  const auto n_val = static_cast<std::size_t>(std::round(fraction * static_cast<double>(records.size())));
  if (n_val == 0 || n_val >= records.size()) {
    throw ValidationError("validation split of " + std::to_string(records.size()) + " records at fraction " +
                          format_double(fraction) + " leaves an empty side");
  }
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<bool> in_validation(records.size(), false);
  for (std::size_t i = 0; i < n_val; ++i) in_validation[order[i]] = true;
  std::pair<std::vector<SentenceRecord>, std::vector<SentenceRecord>> out;
  for (std::size_t i = 0; i < records.size(); ++i) (in_validation[i] ? out.second : out.first).push_back(records[i]);
  return out;
}

std::vector<SentenceRecord> eligible_records(const std::vector<SentenceRecord>& records, ModelKind kind) {
  if (kind == ModelKind::clner) return records;
  std::vector<SentenceRecord> out;
  for (const auto& r : records) {
    if (r.relations.empty()) continue;
    const auto pool = CorruptionPool::of(r);
    bool ok = true;
    for (const auto& rel : r.relations) {
      const auto usable = [&](const std::vector<std::size_t>& v, std::size_t excluded) {
        return std::any_of(v.begin(), v.end(), [&](std::size_t i) { return i != excluded; });
      };
      ok = ok && (usable(pool.drug_replacements, rel.ae) || usable(pool.ae_replacements, rel.drug));
    }
    if (ok) {
      out.push_back(r);
    } else {
      log(LogLevel::info, "record '" + r.id + "' has an uncorruptible relation; excluded from training");
    }
  }
  return out;
}

namespace {

constexpr std::uint64_t kValidationStream = 0x5eed5eedULL;

/// Differentiable mean loss of one batch, or nullopt when the batch offers
/// nothing to contrast (entity batches with fewer than two sampled tokens).
std::optional<Var> batch_loss(Tape& tape, AnyModel& model, const TrainConfig& c,
                              const std::vector<const SentenceRecord*>& batch,
                              const std::vector<std::uint64_t>& seeds) {
  const std::size_t negatives = c.z - 1;
  if (auto* clgs = std::get_if<ClgsModel>(&model)) {
    std::vector<ClgsSamples> samples;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& rows = clgs->encoder.base().rows(*batch[i]);
      samples.push_back(sample_negatives_clgs(*batch[i], rows, build_subgraph(*batch[i], rows), negatives, seeds[i]));
    }
    return clgs_batch_loss(tape, *clgs, batch, samples);
  }
  if (auto* cldr = std::get_if<CldrModel>(&model)) {
    std::vector<Var> losses;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& rows = cldr->encoder.base().rows(*batch[i]);
      const auto positive = build_disjoint_graphs(*batch[i], rows, c.lambda);
      losses.push_back(cldr_loss(tape, *cldr, *batch[i], sample_negatives_cldr(*batch[i], rows, positive, negatives, seeds[i])));
    }
    return scale(sum(hconcat(losses)), 1.0 / static_cast<double>(batch.size()));
  }
  auto& clner = std::get<ClnerModel>(model);
  const auto sample = sample_balanced_entities(batch, c.ner_quota, seeds.front());
  if (sample.items.size() < 2) return std::nullopt;
  return clner_loss(tape, clner, batch, sample);
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, std::size_t size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + size)));
  }
  return batches;
}

std::string epoch_name(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%03zu.ckpt", epoch);
  return buf;
}

}  // namespace

double evaluate_loss(AnyModel& model, const TrainConfig& c, const std::vector<SentenceRecord>& records,
                     std::uint64_t seed) {
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  double total = 0.0;
  std::size_t weight = 0;
  for (const auto& batch_idx : make_batches(order, c.batch_size)) {
    std::vector<const SentenceRecord*> batch;
    std::vector<std::uint64_t> seeds;
    for (auto i : batch_idx) {
      batch.push_back(&records[i]);
      seeds.push_back(mix_seed(seed, i));
    }
    Tape tape;
    const auto loss = batch_loss(tape, model, c, batch, seeds);
    if (!loss) continue;
    total += loss->scalar() * static_cast<double>(batch.size());
    weight += batch.size();
  }
  return weight == 0 ? 0.0 : total / static_cast<double>(weight);
}

TrainResult train(const TrainConfig& c, const std::vector<SentenceRecord>& records,
                  std::shared_ptr<const EmbeddingSource> base, const std::optional<fs::path>& out_dir) {
  validate(c);
  const auto eligible = eligible_records(records, c.model);
  if (eligible.empty()) throw ValidationError("no eligible training records");

  std::vector<SentenceRecord> train_set;
  std::vector<SentenceRecord> validation_set;
  try {
    std::tie(train_set, validation_set) = split_validation(eligible, c.validation_fraction, mix_seed(c.seed, 7));
  } catch (const ValidationError&) {
    log(LogLevel::warn, "training set too small for a validation split; keeping the last epoch");
    train_set = eligible;
  }

  TrainResult result{make_model(c, base), {}};
  auto params = parameters_of(result.model);
  Adam adam(params, AdamConfig{c.learning_rate});
  if (out_dir) fs::create_directories(*out_dir);

  std::vector<NamedMatrix> best;
  double best_validation = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= c.epochs; ++epoch) {
    const std::uint64_t epoch_seed = mix_seed(c.seed, 1000 + epoch);
    Rng shuffler(epoch_seed);
    shuffler.shuffle(order);
    double total = 0.0;
    std::size_t batches = 0;
    for (const auto& batch_idx : make_batches(order, c.batch_size)) {
      std::vector<const SentenceRecord*> batch;
      std::vector<std::uint64_t> seeds;
      for (auto i : batch_idx) {
        batch.push_back(&train_set[i]);
        seeds.push_back(mix_seed(epoch_seed, i));
      }
      Tape tape;
      const auto loss = batch_loss(tape, result.model, c, batch, seeds);
      if (!loss) continue;
      tape.backward(*loss);
      adam.step();
      total += loss->scalar();
      ++batches;
    }
    const double epoch_loss = batches == 0 ? 0.0 : total / static_cast<double>(batches);
    result.history.epoch_loss.push_back(epoch_loss);

    if (!validation_set.empty()) {
      const double v = evaluate_loss(result.model, c, validation_set, mix_seed(c.seed, kValidationStream));
      result.history.validation_loss.push_back(v);
      if (v < best_validation) {
        best_validation = v;
        best = snapshot(params);
        result.history.best_epoch = epoch;
      }
    }
    log(LogLevel::info, std::string(to_string(c.model)) + " epoch " + std::to_string(epoch) + " loss " +
                            format_double(epoch_loss) +
                            (validation_set.empty() ? "" : " validation " + format_double(result.history.validation_loss.back())));
    if (out_dir) write_checkpoint(*out_dir / epoch_name(epoch), snapshot(params));
  }
  if (best.empty()) {
    result.history.best_epoch = c.epochs;
  } else {
    restore(params, best);
  }

  if (out_dir) {
    save_model(result.model, c, *base, *out_dir);
    std::ofstream history(*out_dir / "history.tsv");
    history << "epoch\tloss\tvalidation_loss\n";
    for (std::size_t e = 0; e < result.history.epoch_loss.size(); ++e) {
      history << e + 1 << '\t' << format_double(result.history.epoch_loss[e]) << '\t'
              << (e < result.history.validation_loss.size() ? format_double(result.history.validation_loss[e]) : "-")
              << '\n';
    }
    history << "# best_epoch " << result.history.best_epoch << '\n';
  }
  return result;
}

void save_model(AnyModel& model, const TrainConfig& config, const EmbeddingSource& base, const fs::path& dir) {
  fs::create_directories(dir);
  write_checkpoint(dir / "model.ckpt", snapshot(parameters_of(model)));
  std::ofstream manifest(dir / "manifest.txt");
  manifest << "# relcl model manifest v1\n"
           << "# embedding_fingerprint = " << hex64(base.fingerprint()) << '\n'
           << "# embedding_dimension = " << base.dimension() << '\n'
           << format_train_config(config);
}

LoadedModel load_model(const fs::path& dir, std::shared_ptr<const EmbeddingSource> base) {
  const auto manifest_path = dir / "manifest.txt";
  std::ifstream in(manifest_path);
  if (!in) throw ParseError("cannot open model manifest " + manifest_path.string());
  std::string expected_fingerprint;
  std::string text;
  std::string line;
  while (std::getline(in, line)) {
    const std::string key = "# embedding_fingerprint = ";
    if (line.rfind(key, 0) == 0) expected_fingerprint = line.substr(key.size());
    text += line + '\n';
  }
  if (!expected_fingerprint.empty() && expected_fingerprint != hex64(base->fingerprint())) {
    throw ValidationError("model in " + dir.string() + " was trained on a different embedding source (" +
                          expected_fingerprint + " vs " + hex64(base->fingerprint()) + ")");
  }
  std::istringstream config_text(text);
  const TrainConfig config = parse_train_config(config_text);
  LoadedModel out{config, make_model(config, std::move(base))};
  restore(parameters_of(out.model), read_checkpoint(dir / "model.ckpt"));
  return out;
}

}  // namespace relcl
