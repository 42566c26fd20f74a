#include "msfin/artifacts.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "msfin/errors.hpp"

namespace msfin::artifacts {

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

std::string probabilities_csv(const std::vector<metrics::VideoPrediction>& videos, double threshold) {
  std::ostringstream os;
  os.precision(17);
  os << "video_id,frame,z,warning\n";
  for (const auto& v : videos) {
    for (std::size_t t = 0; t < v.probs.size(); ++t) {
      os << csv_field(v.id) << ',' << t + 1 << ',' << v.probs[t] << ',' << (v.probs[t] >= threshold ? 1 : 0) << '\n';
    }
  }
  return os.str();
}

std::string attention_csv(const model::ScaleAttention& a) {
  std::ostringstream os;
  os.precision(17);
  os << "frame";
  for (std::size_t n = 0; n < a.objects; ++n) os << ",obj_" << n + 1;
  os << '\n';
  for (std::size_t t = 0; t < a.frames; ++t) {
    os << t + 1;
    for (std::size_t n = 0; n < a.objects; ++n) os << ',' << a.mean_at(t, n);
    os << '\n';
  }
  return os.str();
}

std::string probability_svg(const std::vector<Curve>& curves, double threshold, const std::string& title) {
  constexpr double width = 640, height = 320, left = 48, right = 16, top = 28, bottom = 36;
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};
  std::size_t frames = 1;
  for (const auto& c : curves) frames = std::max(frames, c.values.size());
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  auto x_of = [&](std::size_t i) {
    return left + (frames > 1 ? plot_w * static_cast<double>(i) / static_cast<double>(frames - 1) : 0.0);
  };
  auto y_of = [&](double v) { return top + plot_h * (1.0 - std::clamp(v, 0.0, 1.0)); };

  std::ostringstream os;
  os.precision(6);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
     << "  <rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  if (!title.empty()) {
    os << "  <text x=\"" << left << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">" << xml_escape(title)
       << "</text>\n";
  }
  os << "  <line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
     << top + plot_h << "\" stroke=\"black\"/>\n"
     << "  <line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
     << "\" stroke=\"black\"/>\n"
     << "  <text x=\"" << left - 8 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
     << "font-size=\"11\">1</text>\n"
     << "  <text x=\"" << left - 8 << "\" y=\"" << top + plot_h + 4 << "\" text-anchor=\"end\" "
     << "font-family=\"sans-serif\" font-size=\"11\">0</text>\n"
     << "  <text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 8 << "\" text-anchor=\"middle\" "
     << "font-family=\"sans-serif\" font-size=\"11\">frame</text>\n"
     << "  <line class=\"threshold\" x1=\"" << left << "\" y1=\"" << y_of(threshold) << "\" x2=\"" << left + plot_w
     << "\" y2=\"" << y_of(threshold) << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
  for (std::size_t c = 0; c < curves.size(); ++c) {
    os << "  <polyline fill=\"none\" stroke=\"" << palette[c % 6] << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < curves[c].values.size(); ++i) {
      os << (i ? " " : "") << x_of(i) << ',' << y_of(curves[c].values[i]);
    }
    os << "\"><title>" << xml_escape(curves[c].name) << "</title></polyline>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string ablation_csv(const std::vector<train::AblationRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "experiment,AP,mTTA\n";
  for (const auto& r : rows) os << csv_field(r.experiment) << ',' << r.report.ap << ',' << r.report.mtta_seconds << '\n';
  return os.str();
}

std::string training_log_csv(const train::TrainingLog& log) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,val_ap,val_mtta_s,seconds\n";
  for (const auto& r : log.rows) {
    os << r.epoch << ',' << r.train_loss << ',';
    if (r.val_ap) os << *r.val_ap;
    os << ',';
    if (r.val_mtta) os << *r.val_mtta;
    os << ',' << r.seconds << '\n';
  }
  return os.str();
}

}  // namespace msfin::artifacts
