#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "msfin/metrics.hpp"
#include "msfin/model.hpp"
#include "msfin/training.hpp"

// Text artifacts written by the command-line tool.
namespace msfin::artifacts {

void write_text(const std::filesystem::path& path, const std::string& text);

/// "video_id,frame,z,warning": one row per frame of every video; frame is
/// 1-based and warning is 1 when z >= threshold.
std::string probabilities_csv(const std::vector<metrics::VideoPrediction>& videos, double threshold = 0.5);

/// "frame,obj_1,...,obj_N": head-averaged post-fusion weights; padded slots are 0.
std::string attention_csv(const model::ScaleAttention& attention);

struct Curve {
  std::string name;
  std::vector<double> values;
};

/// Standalone SVG: one polyline per curve over frames 1..T on a [0, 1] axis,
/// plus a dashed horizontal line at `threshold`.
std::string probability_svg(const std::vector<Curve>& curves, double threshold = 0.5,
                            const std::string& title = "");

/// "experiment,AP,mTTA".
std::string ablation_csv(const std::vector<train::AblationRow>& rows);

/// "epoch,train_loss,val_ap,val_mtta_s,seconds".
std::string training_log_csv(const train::TrainingLog& log);

}  // namespace msfin::artifacts
