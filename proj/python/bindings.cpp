// Python bindings: records, synthetic data, the model, losses, metrics and
// training. JSON-shaped values cross the boundary as strings and are decoded
// on the Python side.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "msfin/checkpoint.hpp"
#include "msfin/errors.hpp"
#include "msfin/feature_io.hpp"
#include "msfin/losses.hpp"
#include "msfin/metrics.hpp"
#include "msfin/model.hpp"
#include "msfin/multiscale.hpp"
#include "msfin/synthetic.hpp"
#include "msfin/training.hpp"

namespace py = pybind11;
using namespace msfin;
using nlohmann::json;

namespace {

template <typename T>
py::array_t<T> to_array(const std::vector<T>& v, std::vector<py::ssize_t> shape) {
  py::array_t<T> out(shape);
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

template <typename T>
std::vector<T> from_array(const py::array_t<T, py::array::c_style | py::array::forcecast>& a, std::size_t expect,
                          const char* what) {
  if (static_cast<std::size_t>(a.size()) != expect) {
    throw Error(ErrorKind::ShapeInconsistency, std::string(what) + " has " + std::to_string(a.size()) +
                                                   " elements, expected " + std::to_string(expect));
  }
  return {a.data(), a.data() + a.size()};
}

std::vector<metrics::VideoPrediction> predictions(const py::list& items) {
  std::vector<metrics::VideoPrediction> out;
  for (const auto& item : items) {
    const auto d = item.cast<py::dict>();
    metrics::VideoPrediction v;
    v.probs = d["probs"].cast<std::vector<double>>();
    v.label = d["label"].cast<int>();
    if (d.contains("t_ao") && !d["t_ao"].is_none()) v.t_ao = d["t_ao"].cast<int>();
    if (d.contains("fps")) v.fps = d["fps"].cast<double>();
    if (d.contains("id")) v.id = d["id"].cast<std::string>();
    out.push_back(std::move(v));
  }
  return out;
}

loss::LossConfig loss_config(double alpha, double gamma, double fps) {
  loss::LossConfig c;
  c.alpha = alpha;
  c.gamma = gamma;
  c.fps = fps;
  return c;
}

Tensor prob_tensor(const std::vector<double>& probs) { return Tensor::from({probs.size()}, probs); }

}  // namespace

PYBIND11_MODULE(_msfin, m) {
  m.doc() = "Multi-scale feature interaction network for traffic accident anticipation";

  static py::exception<Error> error_type(m, "MsfinError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string msg = "[" + std::string(to_string(e.kind())) + "] " + e.what();
      error_type(msg.c_str());
    }
  });

  py::class_<SequenceRecord>(m, "Record")
      .def(py::init<>())
      .def_readwrite("id", &SequenceRecord::id)
      .def_readonly("frames", &SequenceRecord::frames)
      .def_readonly("objects", &SequenceRecord::objects)
      .def_readonly("feature_dim", &SequenceRecord::feature_dim)
      .def_readwrite("label", &SequenceRecord::label)
      .def_readwrite("t_ao", &SequenceRecord::t_ao)
      .def_readwrite("fps", &SequenceRecord::fps)
      .def_readwrite("split", &SequenceRecord::split)
      .def_property_readonly("frame_features",
                             [](const SequenceRecord& r) {
                               return to_array(r.frame_features, {static_cast<py::ssize_t>(r.frames),
                                                                  static_cast<py::ssize_t>(r.feature_dim)});
                             })
      .def_property_readonly("object_features",
                             [](const SequenceRecord& r) {
                               return to_array(r.object_features, {static_cast<py::ssize_t>(r.frames),
                                                                   static_cast<py::ssize_t>(r.objects),
                                                                   static_cast<py::ssize_t>(r.feature_dim)});
                             })
      .def_property_readonly("object_mask",
                             [](const SequenceRecord& r) {
                               return to_array(r.object_mask, {static_cast<py::ssize_t>(r.frames),
                                                               static_cast<py::ssize_t>(r.objects)});
                             })
      .def("set_features",
           [](SequenceRecord& r, py::array_t<float, py::array::c_style | py::array::forcecast> frames,
              py::array_t<float, py::array::c_style | py::array::forcecast> objects,
              py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> mask) {
             if (frames.ndim() != 2 || objects.ndim() != 3) {
               throw Error(ErrorKind::ShapeInconsistency, "frames must be [T, d_in] and objects [T, N, d_in]");
             }
             const auto steps = static_cast<std::size_t>(frames.shape(0));
             const auto d_in = static_cast<std::size_t>(frames.shape(1));
             const auto n = static_cast<std::size_t>(objects.shape(1));
             r.frame_features = from_array(frames, steps * d_in, "frames");
             r.object_features = from_array(objects, steps * n * d_in, "objects");
             r.object_mask = from_array(mask, steps * n, "mask");
             r.frames = steps;
             r.objects = n;
             r.feature_dim = d_in;
           },
           py::arg("frames"), py::arg("objects"), py::arg("mask"))
      .def("prefix", &SequenceRecord::prefix)
      .def("validate", &SequenceRecord::validate)
      .def("__repr__", [](const SequenceRecord& r) {
        return "<Record " + r.id + " T=" + std::to_string(r.frames) + " N=" + std::to_string(r.objects) +
               " label=" + std::to_string(r.label) + ">";
      });

  m.def(
      "generate_dataset",
      [](std::size_t n_per_archetype, std::uint64_t seed, const std::string& base_json) {
        return synth::generate_dataset(n_per_archetype, synth::spec_from_json(json::parse(base_json)), seed).records;
      },
      py::arg("n_per_archetype"), py::arg("seed"), py::arg("base_json"));
  m.def(
      "generate_scenario",
      [](const std::string& spec_json, const std::string& id) {
        return synth::generate_scenario(synth::spec_from_json(json::parse(spec_json)), id);
      },
      py::arg("spec_json"), py::arg("id") = "");
  m.def(
      "matched_filter",
      [](const SequenceRecord& r, const std::string& spec_json) {
        return synth::matched_filter(r, synth::spec_from_json(json::parse(spec_json)));
      },
      py::arg("record"), py::arg("spec_json"));

  m.def("read_dataset", [](const std::filesystem::path& p) { return io::read_dataset(p); }, py::arg("path"));
  m.def(
      "write_dataset",
      [](const std::vector<SequenceRecord>& records, const std::filesystem::path& p) {
        return io::to_json(io::write_dataset(records, p)).dump();
      },
      py::arg("records"), py::arg("path"));

  py::class_<model::MsFIN>(m, "Model")
      .def(py::init([](const std::string& config_json, std::uint64_t seed) {
             return model::MsFIN(model::config_from_json(json::parse(config_json)), seed);
           }),
           py::arg("config_json"), py::arg("seed") = 0)
      .def_property_readonly("config_json", [](const model::MsFIN& n) { return model::to_json(n.config()).dump(); })
      .def_property_readonly("parameter_count", [](const model::MsFIN& n) { return n.params().parameter_count(); })
      .def("parameter_names",
           [](const model::MsFIN& n) {
             std::vector<std::string> names;
             for (const auto& e : n.params().entries()) names.push_back(e.name);
             return names;
           })
      .def(
          "forward",
          [](const model::MsFIN& n, const SequenceRecord& r) {
            const auto out = n.forward(r);
            py::dict attention;
            for (const auto& a : out.attention) {
              std::vector<double> mean(a.frames * a.objects);
              for (std::size_t t = 0; t < a.frames; ++t) {
                for (std::size_t k = 0; k < a.objects; ++k) mean[t * a.objects + k] = a.mean_at(t, k);
              }
              attention[py::str(msm::to_string(a.scale))] =
                  to_array(mean, {static_cast<py::ssize_t>(a.frames), static_cast<py::ssize_t>(a.objects)});
            }
            py::dict d;
            d["probs"] = to_array(out.probs, {static_cast<py::ssize_t>(out.probs.size())});
            d["attention"] = attention;
            return d;
          },
          py::arg("record"))
      .def(
          "save", [](const model::MsFIN& n, const std::filesystem::path& p) { save_checkpoint(n, p); }, py::arg("path"));
  m.def("load_checkpoint", [](const std::filesystem::path& p) { return load_checkpoint(p); }, py::arg("path"));

  m.def("decay_weight", &loss::decay_weight, py::arg("t"), py::arg("t_ao"), py::arg("r"));
  m.def(
      "exponential_loss",
      [](const std::vector<double>& probs, int label, std::optional<int> t_ao, double fps) {
        return loss::exponential_loss(prob_tensor(probs), {label, t_ao}, loss_config(0.25, 2.0, fps)).item();
      },
      py::arg("probs"), py::arg("label"), py::arg("t_ao") = py::none(), py::arg("fps") = 20.0);
  m.def(
      "focal_exponential_loss",
      [](const std::vector<double>& probs, int label, std::optional<int> t_ao, double fps, double alpha,
         double gamma) {
        return loss::focal_exponential_loss(prob_tensor(probs), {label, t_ao}, loss_config(alpha, gamma, fps))
            .item();
      },
      py::arg("probs"), py::arg("label"), py::arg("t_ao") = py::none(), py::arg("fps") = 20.0,
      py::arg("alpha") = 0.25, py::arg("gamma") = 2.0);

  m.def(
      "average_precision", [](const py::list& videos) { return metrics::average_precision(predictions(videos)); },
      py::arg("videos"));
  m.def(
      "mtta", [](const py::list& videos) { return metrics::mtta(predictions(videos)); }, py::arg("videos"));
  m.def(
      "evaluate_json", [](const py::list& videos) { return metrics::to_json(metrics::evaluate(predictions(videos))).dump(); },
      py::arg("videos"));
  m.def(
      "window_sizes",
      [](int fps) {
        const auto w = msm::window_sizes_from_fps(fps);
        return std::make_pair(w.short_window, w.mid_window);
      },
      py::arg("fps"));

  m.def(
      "train_json",
      [](const std::string& config_json) {
        auto cfg = train::run_config_from_json(json::parse(config_json));
        train::apply_env_overrides(cfg);
        const auto data = train::load_data(cfg);
        py::gil_scoped_release release;
        auto result = train::train(cfg, data.train, data.eval);
        json report = nullptr;
        if (!data.eval.empty()) {
          try {
            report = metrics::to_json(metrics::evaluate(train::predict(result.model, data.eval)));
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::UndefinedMetric) throw;
          }
        }
        const json out = {{"log", result.log.to_json()}, {"report", report}, {"best_epoch", result.best_epoch}};
        return std::make_pair(std::move(result.model), out.dump());
      },
      py::arg("config_json"));
}
