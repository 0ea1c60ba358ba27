#include "deepvar/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <tuple>

#include "deepvar/errors.hpp"

#include <nlohmann/json.hpp>

namespace deepvar {

double TypeCounts::precision() const {
  const std::size_t denom = tp + fp;
  return denom == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(denom);
}

double TypeCounts::recall() const {
  const std::size_t denom = tp + fn;
  return denom == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(denom);
}

double TypeCounts::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

EvalReport exact_match_score(const std::vector<std::vector<EntitySpan>>& gold,
                             const std::vector<std::vector<EntitySpan>>& predicted) {
  check_data(gold.size() == predicted.size(),
             "exact_match_score: sentence count mismatch, gold " +
                 std::to_string(gold.size()) + " vs predicted " +
                 std::to_string(predicted.size()));

  EvalReport report;
  using Key = std::tuple<int, std::size_t, std::size_t>;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    std::map<Key, std::pair<std::size_t, std::size_t>> counts;  // key -> (gold, pred)
    for (const EntitySpan& span : gold[s]) {
      ++counts[{static_cast<int>(span.type), span.token_start, span.token_end}].first;
    }
    for (const EntitySpan& span : predicted[s]) {
      ++counts[{static_cast<int>(span.type), span.token_start, span.token_end}].second;
    }
    for (const auto& [key, gp] : counts) {
      const auto type = static_cast<EntityType>(std::get<0>(key));
      const std::size_t matched = std::min(gp.first, gp.second);
      TypeCounts& tc = report.per_type[type];
      tc.tp += matched;
      tc.fn += gp.first - matched;
      tc.fp += gp.second - matched;
    }
  }

  double f1_sum = 0.0;
  std::size_t present = 0;
  for (const auto& [type, tc] : report.per_type) {
    (void)type;
    report.micro.tp += tc.tp;
    report.micro.fp += tc.fp;
    report.micro.fn += tc.fn;
    f1_sum += tc.f1();
    ++present;
  }
  report.macro_f1 = present == 0 ? 1.0 : f1_sum / static_cast<double>(present);
  return report;
}

EvalReport score_tag_output(const std::vector<std::vector<int>>& gold_tags,
                            const std::vector<std::vector<int>>& predicted_tags) {
  check_data(gold_tags.size() == predicted_tags.size(),
             "score_tag_output: sentence count mismatch");
  std::vector<std::vector<EntitySpan>> gold, pred;
  gold.reserve(gold_tags.size());
  pred.reserve(predicted_tags.size());
  for (std::size_t i = 0; i < gold_tags.size(); ++i) {
    check_data(gold_tags[i].size() == predicted_tags[i].size(),
               "score_tag_output: tag length mismatch in sentence " + std::to_string(i));
    gold.push_back(bio_to_spans(gold_tags[i]));
    pred.push_back(bio_to_spans(predicted_tags[i]));
  }
  return exact_match_score(gold, pred);
}

std::string EvalReport::to_text() const {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-18s %6s %6s %6s %9s %9s %9s\n", "type", "tp", "fp",
                "fn", "prec", "recall", "f1");
  out += buf;
  const auto row = [&](const std::string& name, const TypeCounts& tc) {
    std::snprintf(buf, sizeof(buf), "%-18s %6zu %6zu %6zu %9.4f %9.4f %9.4f\n",
                  name.c_str(), tc.tp, tc.fp, tc.fn, tc.precision(), tc.recall(), tc.f1());
    out += buf;
  };
  for (const auto& [type, tc] : per_type) row(std::string(entity_type_name(type)), tc);
  row("micro", micro);
  std::snprintf(buf, sizeof(buf), "macro_f1 %.4f\n", macro_f1);
  out += buf;
  return out;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  for (const auto& [type, tc] : per_type) {
    j["per_type"][std::string(entity_type_name(type))] = {
        {"tp", tc.tp},           {"fp", tc.fp},       {"fn", tc.fn},
        {"precision", tc.precision()}, {"recall", tc.recall()}, {"f1", tc.f1()}};
  }
  j["micro"] = {{"tp", micro.tp},
                {"fp", micro.fp},
                {"fn", micro.fn},
                {"precision", micro.precision()},
                {"recall", micro.recall()},
                {"f1", micro.f1()}};
  j["macro_f1"] = macro_f1;
  return j.dump(2) + "\n";
}

EvalReport parse_eval_report(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("eval report is not valid JSON: ") + e.what());
  }
  EvalReport r;
  try {
    if (j.contains("per_type")) {
      for (const auto& [name, counts] : j.at("per_type").items()) {
        const auto type = entity_type_from_name(name);
        check_data(type.has_value(), "eval report: unknown entity type " + name);
        TypeCounts tc;
        tc.tp = counts.at("tp").get<std::size_t>();
        tc.fp = counts.at("fp").get<std::size_t>();
        tc.fn = counts.at("fn").get<std::size_t>();
        r.per_type.emplace(*type, tc);
      }
    }
    r.micro.tp = j.at("micro").at("tp").get<std::size_t>();
    r.micro.fp = j.at("micro").at("fp").get<std::size_t>();
    r.micro.fn = j.at("micro").at("fn").get<std::size_t>();
    r.macro_f1 = j.at("macro_f1").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("eval report field error: ") + e.what());
  }
  return r;
}

}  // namespace deepvar
