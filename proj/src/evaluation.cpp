#include "relcl/evaluation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <set>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace relcl {

Counts& Counts::operator+=(const Counts& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  return *this;
}

Prf prf(const Counts& c) {
  Prf out;
  if (c.tp + c.fp == 0) {
    out.degenerate = true;
  } else {
    out.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  }
  if (c.tp + c.fn == 0) {
    out.degenerate = true;
  } else {
    out.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  }
  if (out.precision + out.recall == 0.0) {
    out.degenerate = true;
  } else {
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  }
  return out;
}

namespace {

template <typename T>
Counts match_sets(std::vector<T> predicted, std::vector<T> gold) {
  const std::set<T> p(predicted.begin(), predicted.end());
  const std::set<T> g(gold.begin(), gold.end());
  Counts c;
  for (const auto& x : p) (g.count(x) ? c.tp : c.fp) += 1;
  c.fn = g.size() - c.tp;
  return c;
}

}  // namespace

Counts strict_entity_match(std::vector<Span> predicted, std::vector<Span> gold) {
  return match_sets(std::move(predicted), std::move(gold));
}

Counts strict_relation_match(std::vector<EntityRelation> predicted, std::vector<EntityRelation> gold) {
  return match_sets(std::move(predicted), std::move(gold));
}

Counts re_minus(std::vector<RelationPair> predicted, std::vector<RelationPair> gold) {
  return match_sets(std::move(predicted), std::move(gold));
}

std::vector<RelationPair> heads_of(const std::vector<EntityRelation>& relations) {
  std::vector<RelationPair> out;
  out.reserve(relations.size());
  for (const auto& r : relations) out.push_back(relation_heads(r.drug, r.ae));
  return out;
}

Prf macro_average(const std::vector<Prf>& per_class) {
  Prf out;
  if (per_class.empty()) {
    out.degenerate = true;
    return out;
  }
  for (const auto& p : per_class) {
    out.precision += p.precision;
    out.recall += p.recall;
    out.f1 += p.f1;
    out.degenerate = out.degenerate || p.degenerate;
  }
  const auto n = static_cast<double>(per_class.size());
  out.precision /= n;
  out.recall /= n;
  out.f1 /= n;
  return out;
}

FoldAggregate cross_fold_aggregate(const std::vector<Prf>& per_fold) {
  if (per_fold.empty()) throw ValidationError("no folds to aggregate");
  return {per_fold, macro_average(per_fold)};
}

Annotation annotation_of(const SentenceRecord& record) {
  Annotation out{record.id, decode_bio(record.tags), {}};
  for (const auto& rel : record.relations) {
    const auto ending_at = [&](std::size_t head, EntityType type) {
      for (const auto& s : out.entities) {
        if (s.end == head && s.type == type) return s;
      }
      throw ValidationError("record '" + record.id + "': relation head " + std::to_string(head) +
                            " does not end an entity");
    };
    out.relations.push_back({ending_at(rel.drug, EntityType::drug), ending_at(rel.ae, EntityType::ae)});
  }
  return out;
}

std::string format_annotation(const Annotation& a) {
  json entities = json::array();
  std::vector<Span> order = a.entities;
  for (const auto& s : order) entities.push_back(json::array({s.start, s.end, std::string(to_string(s.type))}));
  json relations = json::array();
  const auto index_of = [&](const Span& s) {
    const auto it = std::find(order.begin(), order.end(), s);
    if (it == order.end()) throw ValidationError("annotation '" + a.id + "': relation refers to an unlisted entity");
    return static_cast<std::size_t>(it - order.begin());
  };
  for (const auto& r : a.relations) relations.push_back(json::array({index_of(r.drug), index_of(r.ae)}));
  json line;
  line["id"] = a.id;
  line["entities"] = std::move(entities);
  line["relations"] = std::move(relations);
  return line.dump();
}

void write_annotations(const std::vector<Annotation>& annotations, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& a : annotations) out << format_annotation(a) << '\n';
}

std::vector<Annotation> read_annotations(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<Annotation> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(number);
    try {
      const auto j = json::parse(line);
      Annotation a;
      a.id = j.at("id").get<std::string>();
      for (const auto& e : j.at("entities")) {
        Span s{e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>(), parse_entity_type(e.at(2).get<std::string>())};
        if (s.end < s.start) throw ParseError(where + ": entity ends before it starts");
        a.entities.push_back(s);
      }
      for (const auto& r : j.value("relations", json::array())) {
        const auto i = r.at(0).get<std::size_t>();
        const auto k = r.at(1).get<std::size_t>();
        if (i >= a.entities.size() || k >= a.entities.size()) throw ParseError(where + ": relation index out of range");
        if (a.entities[i].type != EntityType::drug || a.entities[k].type != EntityType::ae) {
          throw ParseError(where + ": relation must link a DRUG to an AE");
        }
        a.relations.push_back({a.entities[i], a.entities[k]});
      }
      out.push_back(std::move(a));
    } catch (const json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return out;
}

std::string_view to_string(ScoreMode mode) {
  switch (mode) {
    case ScoreMode::ner: return "ner";
    case ScoreMode::re: return "re";
    case ScoreMode::re_minus: return "re-minus";
  }
  return "?";
}

ScoreMode parse_score_mode(std::string_view text) {
  if (text == "ner") return ScoreMode::ner;
  if (text == "re") return ScoreMode::re;
  if (text == "re-minus" || text == "re_minus") return ScoreMode::re_minus;
  throw ParseError("unknown score mode '" + std::string(text) + "'");
}

ScoreReport score(const std::vector<Annotation>& gold, const std::vector<Annotation>& predicted, ScoreMode mode) {
  std::map<std::string, const Annotation*> by_id;
  for (const auto& g : gold) {
    if (!by_id.emplace(g.id, &g).second) throw ValidationError("duplicate gold id '" + g.id + "'");
  }
  std::map<std::string, const Annotation*> pred_by_id;
  for (const auto& p : predicted) {
    if (!by_id.count(p.id)) throw ValidationError("prediction for unknown sentence '" + p.id + "'");
    if (!pred_by_id.emplace(p.id, &p).second) throw ValidationError("duplicate prediction id '" + p.id + "'");
  }

  ScoreReport report;
  report.mode = mode;
  Counts drug;
  Counts ae;
  const Annotation empty;
  for (const auto& [id, g] : by_id) {
    const auto it = pred_by_id.find(id);
    const Annotation& p = it == pred_by_id.end() ? empty : *it->second;
    switch (mode) {
      case ScoreMode::ner: {
        const auto of_type = [](const std::vector<Span>& spans, EntityType t) {
          std::vector<Span> out;
          std::copy_if(spans.begin(), spans.end(), std::back_inserter(out), [t](const Span& s) { return s.type == t; });
          return out;
        };
        drug += strict_entity_match(of_type(p.entities, EntityType::drug), of_type(g->entities, EntityType::drug));
        ae += strict_entity_match(of_type(p.entities, EntityType::ae), of_type(g->entities, EntityType::ae));
        break;
      }
      case ScoreMode::re: report.counts += strict_relation_match(p.relations, g->relations); break;
      case ScoreMode::re_minus: report.counts += re_minus(heads_of(p.relations), heads_of(g->relations)); break;
    }
  }
  if (mode == ScoreMode::ner) {
    report.per_class["DRUG"] = {drug, prf(drug)};
    report.per_class["AE"] = {ae, prf(ae)};
    report.counts = drug;
    report.counts += ae;
    report.score = macro_average({prf(drug), prf(ae)});
  } else {
    report.score = prf(report.counts);
  }
  return report;
}

namespace {

json to_json(const Counts& c, const Prf& p) {
  json j;
  j["precision"] = p.precision;
  j["recall"] = p.recall;
  j["f1"] = p.f1;
  j["tp"] = c.tp;
  j["fp"] = c.fp;
  j["fn"] = c.fn;
  j["degenerate"] = p.degenerate;
  return j;
}

}  // namespace

std::string report_json(const ScoreReport& report) {
  json j = to_json(report.counts, report.score);
  j["mode"] = std::string(to_string(report.mode));
  if (!report.per_class.empty()) {
    json per = json::object();
    for (const auto& [name, cp] : report.per_class) per[name] = to_json(cp.first, cp.second);
    j["per_class"] = std::move(per);
  }
  return j.dump(2);
}

}  // namespace relcl
