#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace msfin::metrics {

struct VideoPrediction {
  std::vector<double> probs;
  int label = 0;
  std::optional<int> t_ao;  // 1-based, positives only
  double fps = 20;
  std::string id;
};

/// Frames a video's decision may use: up to t_ao for positives, all for negatives.
std::size_t decision_horizon(const VideoPrediction& v);
/// Max probability within the decision horizon.
double video_score(const VideoPrediction& v);
/// True iff some frame within the decision horizon has p_t >= tau.
bool video_score_at_threshold(const VideoPrediction& v, double tau);

enum class ApGranularity { video, frame };

/// AP = sum_n (R_n - R_{n-1}) P_n over thresholds at the distinct scores,
/// swept high to low. Throws UndefinedMetric without positives.
double average_precision(const std::vector<VideoPrediction>& videos,
                         ApGranularity granularity = ApGranularity::video);

/// Seconds between the earliest frame <= t_ao with p_t >= tau and t_ao;
/// nullopt when no frame qualifies.
std::optional<double> tta(const VideoPrediction& v, double tau);

/// 0.01, 0.02, ..., 0.99.
std::vector<double> default_thresholds();

enum class EmptyThresholdPolicy { skip, zero };

/// Mean over thresholds of the mean TTA of detected positives. Thresholds with
/// no detected positive are skipped (or count as 0 s under `zero`).
double mtta(const std::vector<VideoPrediction>& videos,
            const std::vector<double>& thresholds = default_thresholds(),
            EmptyThresholdPolicy policy = EmptyThresholdPolicy::skip);

struct OperatingPoint {
  double threshold = 0;
  double precision = 0;
  double recall = 0;
  std::optional<double> mean_tta_seconds;
  bool below_target = false;
};

/// Operating point at the largest distinct-score threshold whose recall reaches
/// `target_recall` (falls back to the lowest threshold with below_target set).
OperatingPoint at_recall(const std::vector<VideoPrediction>& videos, double target_recall = 0.8);

struct CurveRow {
  double threshold;
  double precision;  // 1 when nothing is predicted positive
  double recall;
  std::optional<double> mean_tta_seconds;
};

/// Operating point at one threshold.
CurveRow operating_point(const std::vector<VideoPrediction>& videos, double tau);
/// Rows sorted by ascending threshold.
std::vector<CurveRow> mtta_ap_curve(const std::vector<VideoPrediction>& videos,
                                    const std::vector<double>& thresholds = default_thresholds());

struct EvalReport {
  double ap = 0;
  double ap_at_80r = 0;
  double mtta_seconds = 0;
  std::optional<double> tta_at_80r_seconds;
  std::size_t positives = 0, negatives = 0;
  std::vector<CurveRow> curve;
};

struct EvalOptions {
  std::vector<double> thresholds = default_thresholds();
  EmptyThresholdPolicy empty_policy = EmptyThresholdPolicy::skip;
  ApGranularity granularity = ApGranularity::video;
};

EvalReport evaluate(const std::vector<VideoPrediction>& videos, const EvalOptions& options = {});

nlohmann::json to_json(const EvalReport& report);
/// "threshold,precision,recall,mean_tta_s" plus one line per row; an undefined
/// mean TTA is left empty.
std::string curve_csv(const std::vector<CurveRow>& curve);

}  // namespace msfin::metrics
