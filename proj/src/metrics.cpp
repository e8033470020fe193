#include "ccdf/metrics.hpp"

#include <cmath>

#include <json.hpp>

#include "ccdf/errors.hpp"

namespace ccdf {

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

ConfusionMatrix accumulate_confusion(const BinaryMap& prediction, const ReferenceMap& reference) {
  if (prediction.width() != reference.width() || prediction.height() != reference.height()) {
    throw ShapeError("prediction " + std::to_string(prediction.width()) + "x" +
                     std::to_string(prediction.height()) + " vs reference " +
                     std::to_string(reference.width()) + "x" + std::to_string(reference.height()));
  }
  ConfusionMatrix cm;
  const auto pred = prediction.values();
  const auto ref = reference.labels();
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (ref[i] == Label::Undefined) continue;
    const bool p = pred[i] != 0;
    if (ref[i] == Label::Changed) {
      p ? ++cm.tp : ++cm.fn;
    } else {
      p ? ++cm.fp : ++cm.tn;
    }
  }
  if (cm.total() == 0) throw DegenerateInputError("reference map has no defined pixels");
  return cm;
}

Metrics compute_metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw DegenerateInputError("confusion matrix is empty");
  Metrics m;
  auto ratio = [&m](double num, double den, const char* name) {
    if (den == 0.0) {
      m.degenerate.emplace_back(name);
      return 0.0;
    }
    return num / den;
  };
  const double tp = static_cast<double>(cm.tp);
  const double fp = static_cast<double>(cm.fp);
  const double tn = static_cast<double>(cm.tn);
  const double fn = static_cast<double>(cm.fn);
  const double n = static_cast<double>(cm.total());

  m.oa = (tp + tn) / n;
  m.precision = ratio(tp, tp + fp, "precision");
  m.recall = ratio(tp, tp + fn, "recall");
  if (tp + fp == 0.0 || tp + fn == 0.0) {
    m.degenerate.emplace_back("f1");
  } else {
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall, "f1");
  }
  m.ciou = ratio(tp, tp + fp + fn, "ciou");
  const double uiou = ratio(tn, tn + fp + fn, "uiou");
  m.miou = 0.5 * (m.ciou + uiou);
  const double pe = ((tp + fp) * (tp + fn) + (tn + fn) * (tn + fp)) / (n * n);
  m.kc = ratio(m.oa - pe, 1.0 - pe, "kc");
  return m;
}

double to_percent(double fraction) { return std::round(fraction * 10000.0) / 100.0; }

std::string metrics_report_json(const ConfusionMatrix& cm, const Metrics& m) {
  nlohmann::ordered_json j;
  j["oa"] = to_percent(m.oa);
  j["kc"] = to_percent(m.kc);
  j["precision"] = to_percent(m.precision);
  j["recall"] = to_percent(m.recall);
  j["f1"] = to_percent(m.f1);
  j["miou"] = to_percent(m.miou);
  j["ciou"] = to_percent(m.ciou);
  j["counts"] = {{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn}, {"defined", cm.total()}};
  j["degenerate"] = m.degenerate;
  return j.dump(2);
}

}  // namespace ccdf
