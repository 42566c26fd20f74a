#include "msfin/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "msfin/errors.hpp"

namespace msfin::metrics {

std::size_t decision_horizon(const VideoPrediction& v) {
  if (v.label == 1) {
    if (!v.t_ao) fail(ErrorKind::Contract, "positive video '" + v.id + "' without t_ao");
    return std::min<std::size_t>(v.probs.size(), static_cast<std::size_t>(std::max(0, *v.t_ao)));
  }
  return v.probs.size();
}

double video_score(const VideoPrediction& v) {
  const std::size_t h = decision_horizon(v);
  double best = 0;
  for (std::size_t t = 0; t < h; ++t) best = std::max(best, v.probs[t]);
  return best;
}

bool video_score_at_threshold(const VideoPrediction& v, double tau) {
  const std::size_t h = decision_horizon(v);
  for (std::size_t t = 0; t < h; ++t) {
    if (v.probs[t] >= tau) return true;
  }
  return false;
}

namespace {

struct Scored {
  double score;
  int label;
};

std::vector<Scored> scored_items(const std::vector<VideoPrediction>& videos, ApGranularity g) {
  std::vector<Scored> items;
  for (const auto& v : videos) {
    if (g == ApGranularity::video) {
      items.push_back({video_score(v), v.label});
    } else {
      const std::size_t h = decision_horizon(v);
      for (std::size_t t = 0; t < h; ++t) items.push_back({v.probs[t], v.label});
    }
  }
  return items;
}

std::size_t count_positives(const std::vector<VideoPrediction>& videos) {
  return static_cast<std::size_t>(
      std::count_if(videos.begin(), videos.end(), [](const auto& v) { return v.label == 1; }));
}

// Distinct scores, high to low.
std::vector<double> distinct_desc(std::vector<double> scores) {
  std::sort(scores.begin(), scores.end(), std::greater<>());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
  return scores;
}

std::optional<double> mean_tta_at(const std::vector<VideoPrediction>& videos, double tau) {
  double total = 0;
  std::size_t hits = 0;
  for (const auto& v : videos) {
    if (v.label != 1) continue;
    if (auto s = tta(v, tau)) {
      total += *s;
      ++hits;
    }
  }
  if (hits == 0) return std::nullopt;
  return total / static_cast<double>(hits);
}

}  // namespace

double average_precision(const std::vector<VideoPrediction>& videos, ApGranularity granularity) {
  auto items = scored_items(videos, granularity);
  const auto positives = static_cast<double>(
      std::count_if(items.begin(), items.end(), [](const auto& s) { return s.label == 1; }));
  if (positives == 0) fail(ErrorKind::UndefinedMetric, "average precision needs at least one positive");
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  double ap = 0, prev_recall = 0, tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < items.size()) {
    // Absorb every item tied at this threshold.
    const double tau = items[i].score;
    while (i < items.size() && items[i].score == tau) {
      (items[i].label == 1 ? tp : fp) += 1;
      ++i;
    }
    const double recall = tp / positives;
    const double precision = tp / (tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

std::optional<double> tta(const VideoPrediction& v, double tau) {
  if (v.label != 1 || !v.t_ao) fail(ErrorKind::Contract, "tta requires a positive video with t_ao");
  const std::size_t h = decision_horizon(v);
  for (std::size_t t = 0; t < h; ++t) {
    if (v.probs[t] >= tau) return static_cast<double>(*v.t_ao - static_cast<int>(t + 1)) / v.fps;
  }
  return std::nullopt;
}

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 1; i <= 99; ++i) t.push_back(i / 100.0);
  return t;
}

double mtta(const std::vector<VideoPrediction>& videos, const std::vector<double>& thresholds,
            EmptyThresholdPolicy policy) {
  if (count_positives(videos) == 0) fail(ErrorKind::UndefinedMetric, "mTTA needs at least one positive");
  double total = 0;
  std::size_t used = 0;
  for (double tau : thresholds) {
    const auto m = mean_tta_at(videos, tau);
    if (m) {
      total += *m;
      ++used;
    } else if (policy == EmptyThresholdPolicy::zero) {
      ++used;
    }
  }
  if (used == 0) fail(ErrorKind::UndefinedMetric, "no positive is detected at any threshold");
  return total / static_cast<double>(used);
}

CurveRow operating_point(const std::vector<VideoPrediction>& videos, double tau) {
  const auto positives = static_cast<double>(count_positives(videos));
  if (positives == 0) fail(ErrorKind::UndefinedMetric, "operating point needs at least one positive");
  double tp = 0, fp = 0;
  for (const auto& v : videos) {
    if (!video_score_at_threshold(v, tau)) continue;
    (v.label == 1 ? tp : fp) += 1;
  }
  return {tau, tp + fp > 0 ? tp / (tp + fp) : 1.0, tp / positives, mean_tta_at(videos, tau)};
}

OperatingPoint at_recall(const std::vector<VideoPrediction>& videos, double target_recall) {
  if (count_positives(videos) == 0) fail(ErrorKind::UndefinedMetric, "at_recall needs at least one positive");
  std::vector<double> scores;
  for (const auto& v : videos) scores.push_back(video_score(v));
  const auto thresholds = distinct_desc(std::move(scores));
  CurveRow row{};
  for (double tau : thresholds) {
    row = operating_point(videos, tau);
    if (row.recall >= target_recall) {
      return {row.threshold, row.precision, row.recall, row.mean_tta_seconds, false};
    }
  }
  return {row.threshold, row.precision, row.recall, row.mean_tta_seconds, true};
}

std::vector<CurveRow> mtta_ap_curve(const std::vector<VideoPrediction>& videos,
                                    const std::vector<double>& thresholds) {
  std::vector<double> sorted = thresholds;
  std::sort(sorted.begin(), sorted.end());
  std::vector<CurveRow> rows;
  for (double tau : sorted) rows.push_back(operating_point(videos, tau));
  return rows;
}

EvalReport evaluate(const std::vector<VideoPrediction>& videos, const EvalOptions& options) {
  EvalReport r;
  r.positives = count_positives(videos);
  r.negatives = videos.size() - r.positives;
  r.ap = average_precision(videos, options.granularity);
  const OperatingPoint op = at_recall(videos, 0.8);
  r.ap_at_80r = op.precision;
  r.tta_at_80r_seconds = op.mean_tta_seconds;
  r.mtta_seconds = mtta(videos, options.thresholds, options.empty_policy);
  r.curve = mtta_ap_curve(videos, options.thresholds);
  return r;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& row : report.curve) {
    curve.push_back({{"threshold", row.threshold},
                     {"precision", row.precision},
                     {"recall", row.recall},
                     {"mean_tta_s", row.mean_tta_seconds ? nlohmann::json(*row.mean_tta_seconds)
                                                         : nlohmann::json(nullptr)}});
  }
  return {{"ap", report.ap},
          {"ap_at_80r", report.ap_at_80r},
          {"mtta_s", report.mtta_seconds},
          {"tta_at_80r_s", report.tta_at_80r_seconds ? nlohmann::json(*report.tta_at_80r_seconds)
                                                     : nlohmann::json(nullptr)},
          {"positives", report.positives},
          {"negatives", report.negatives},
          {"curve", curve}};
}

std::string curve_csv(const std::vector<CurveRow>& curve) {
  std::ostringstream os;
  os.precision(17);
  os << "threshold,precision,recall,mean_tta_s\n";
  for (const auto& row : curve) {
    os << row.threshold << ',' << row.precision << ',' << row.recall << ',';
    if (row.mean_tta_seconds) os << *row.mean_tta_seconds;
    os << '\n';
  }
  return os.str();
}

}  // namespace msfin::metrics
