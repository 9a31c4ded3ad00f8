// Python bindings: simulator, quantum layer, metrics, synthetic data,
// training from a config and inference from a checkpoint.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "qcseis/config.hpp"
#include "qcseis/qlayer.hpp"
#include "qcseis/qsim.hpp"
#include "qcseis/trainer.hpp"

namespace py = pybind11;
using namespace qcseis;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<real> to_real(const FloatArray& a) { return {a.data(), a.data() + a.size()}; }

Shape shape_of(const py::array& a) {
  Shape s;
  for (py::ssize_t i = 0; i < a.ndim(); ++i) s.push_back(static_cast<std::size_t>(a.shape(i)));
  return s;
}

FloatArray to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  FloatArray out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

FloatArray patch_to_numpy(const SeismicPatch& p) {
  FloatArray out({static_cast<py::ssize_t>(p.t), static_cast<py::ssize_t>(p.s)});
  std::copy(p.data.begin(), p.data.end(), out.mutable_data());
  return out;
}

py::dict dataset_to_dict(const SeismicDataset& ds) {
  const auto n = static_cast<py::ssize_t>(ds.entries.size());
  const auto t = static_cast<py::ssize_t>(ds.t), s = static_cast<py::ssize_t>(ds.s);
  FloatArray degraded({n, t, s}), target({n, t, s});
  py::array_t<std::uint8_t> mask({n, s});
  for (py::ssize_t i = 0; i < n; ++i) {
    const auto& e = ds.entries[static_cast<std::size_t>(i)];
    std::copy(e.degraded.data.begin(), e.degraded.data.end(), degraded.mutable_data() + i * t * s);
    std::copy(e.target.data.begin(), e.target.data.end(), target.mutable_data() + i * t * s);
    std::copy(e.mask.begin(), e.mask.end(), mask.mutable_data() + i * s);
  }
  py::dict d;
  d["task"] = to_string(ds.task);
  d["dt"] = ds.dt;
  d["dx"] = ds.dx;
  d["degraded"] = degraded;
  d["target"] = target;
  d["mask"] = mask;
  return d;
}

json json_from_py(const py::object& obj) {
  const auto dumps = py::module_::import("json").attr("dumps");
  return json::parse(dumps(obj).cast<std::string>());
}

py::object py_from_json(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

// Eval-mode wrapper around the main network of a checkpoint.
class Model {
 public:
  explicit Model(const std::filesystem::path& checkpoint) {
    const Checkpoint ck = read_checkpoint(checkpoint);
    family_ = ck.meta.at("family").get<std::string>();
    const std::string prefix = family_ == "gan" ? "generator" : "unet";
    net_ = make_network(net_config_from_json(ck.meta.at("models").at(prefix)));
    import_network(*net_, prefix, ck);
  }

  FloatArray predict(const FloatArray& x, int workers) {
    if (x.ndim() != 3) throw ShapeError("predict expects [batch, time, traces]");
    if (workers > 0) net_->set_workers(workers);
    const Shape s{static_cast<std::size_t>(x.shape(0)), 1, static_cast<std::size_t>(x.shape(1)),
                  static_cast<std::size_t>(x.shape(2))};
    Tensor y;
    {
      py::gil_scoped_release release;
      NoGradGuard ng;
      y = net_->forward(Tensor(s, to_real(x)), Mode::Eval);
    }
    return to_numpy(y.reshape({s[0], s[2], s[3]}));
  }

  std::string family() const { return family_; }
  py::object config() const { return py_from_json(net_config_to_json(net_->config())); }
  std::size_t parameter_count() const { return net_->trainable_parameter_count(); }

 private:
  std::string family_;
  std::unique_ptr<Network> net_;
};

py::dict train(const py::object& config, const std::string& resume, int workers) {
  RunConfig cfg = run_config_from_json(json_from_py(config));
  apply_seed_override(cfg);
  if (workers > 0) cfg.train.workers = workers;
  const std::filesystem::path dir = cfg.data.dir;
  const SeismicDataset tr = read_seis(dir / "train.seis");
  const SeismicDataset val = read_seis(dir / "val.seis");
  std::unique_ptr<Trainer> trainer;
  {
    py::gil_scoped_release release;
    TrainerOptions opts{cfg.out_dir};
    if (resume.empty()) {
      trainer = std::make_unique<Trainer>(cfg.family(), cfg.model, cfg.train, opts);
    } else {
      trainer = Trainer::resume(resume, opts);
      trainer->set_epochs(cfg.train.epochs);
      trainer->set_workers(cfg.train.workers);
    }
    trainer->fit(tr, &val);
  }
  py::list history;
  for (const auto& r : trainer->history()) {
    py::dict row;
    row["epoch"] = r.epoch;
    row["split"] = r.split;
    row["mae"] = r.mae;
    row["rmse"] = r.rmse;
    row["loss_g"] = r.loss_g;
    row["loss_d"] = r.loss_d;
    row["loss_com"] = r.loss_com;
    history.append(row);
  }
  py::dict out;
  out["family"] = to_string(trainer->family());
  out["steps"] = trainer->global_step();
  out["best_val_mae"] = trainer->best_val_mae();
  out["history"] = history;
  return out;
}

}  // namespace

PYBIND11_MODULE(_qcseis, m) {
  m.doc() = "Quantum-classical networks for seismic restoration";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<ArchitectureMismatch>(m, "ArchitectureMismatch", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);

  py::class_<qsim::RandomCircuit>(m, "RandomCircuit")
      .def(py::init<int, int, int, std::uint64_t>(), py::arg("index"), py::arg("depth"), py::arg("n_qubits"),
           py::arg("seed"))
      .def_property_readonly("depth", &qsim::RandomCircuit::depth)
      .def_property_readonly("n_qubits", &qsim::RandomCircuit::n_qubits)
      .def_property_readonly("angles", [](const qsim::RandomCircuit& c) {
        DoubleArray a({c.depth(), c.n_qubits()});
        std::copy(c.angles().begin(), c.angles().end(), a.mutable_data());
        return a;
      });

  m.def(
      "expectation",
      [](const DoubleArray& x, const qsim::RandomCircuit& c, int qubit) {
        return qsim::expectation({x.data(), static_cast<std::size_t>(x.size())}, c, qsim::Observable::pauli_z(qubit));
      },
      py::arg("x"), py::arg("circuit"), py::arg("qubit") = 0, "<Z_qubit> of the circuit applied to the encoded x");
  m.def(
      "expectation_grad",
      [](const DoubleArray& x, const qsim::RandomCircuit& c, int qubit) {
        return qsim::grad_expect_wrt_encoding({x.data(), static_cast<std::size_t>(x.size())}, c,
                                              qsim::Observable::pauli_z(qubit));
      },
      py::arg("x"), py::arg("circuit"), py::arg("qubit") = 0, "Parameter-shift gradient with respect to x");

  m.def(
      "quantum_forward",
      [](const FloatArray& x, std::uint64_t seed, int depth, int workers) {
        if (x.ndim() != 4) throw ShapeError("quantum_forward expects [batch, channels, time, traces]");
        QuantumLayerConfig cfg;
        cfg.seed = seed;
        cfg.depth = depth;
        const Tensor in(shape_of(x), to_real(x));
        Tensor y;
        {
          py::gil_scoped_release release;
          y = quantum_forward(in, make_circuits(cfg), cfg, workers);
        }
        return to_numpy(y);
      },
      py::arg("x"), py::arg("seed") = 0, py::arg("depth") = 2, py::arg("workers") = 1);

  auto pair = [](const FloatArray& a, const FloatArray& b) {
    return std::pair{std::vector<real>(to_real(a)), std::vector<real>(to_real(b))};
  };
  m.def("mae", [=](const FloatArray& y, const FloatArray& p) { auto [a, b] = pair(y, p); return mae(a, b); });
  m.def("rmse", [=](const FloatArray& y, const FloatArray& p) { auto [a, b] = pair(y, p); return rmse(a, b); });
  m.def("psnr", [=](const FloatArray& y, const FloatArray& p) { auto [a, b] = pair(y, p); return psnr(a, b); });
  m.def("ssim", [=](const FloatArray& y, const FloatArray& p) { auto [a, b] = pair(y, p); return ssim(a, b); });
  m.def(
      "amplitude_spectrum",
      [](const DoubleArray& trace, double dt) {
        const auto s = amplitude_spectrum({trace.data(), static_cast<std::size_t>(trace.size())}, dt);
        return std::pair{s.frequency_hz, s.magnitude};
      },
      py::arg("trace"), py::arg("dt"), "(frequencies in Hz, |DFT|) at non-negative frequencies");

  m.def(
      "synth_gather",
      [](std::size_t t, std::size_t s, std::uint64_t seed, const std::string& task) {
        return patch_to_numpy(synth_gather(default_gather_params(task_from_string(task), t, s), seed));
      },
      py::arg("t"), py::arg("s"), py::arg("seed") = 0, py::arg("task") = "interpolation_random");
  m.def(
      "build_dataset",
      [](const std::string& task, const std::filesystem::path& out, std::size_t n, std::size_t t, std::size_t s,
         std::uint64_t seed) {
        DegradationSpec spec;
        spec.task = task_from_string(task);
        spec.seed = seed;
        const auto r = build_dataset(spec, default_gather_params(spec.task, t, s), n, out);
        return py::make_tuple(r.split.train, r.split.val, r.split.test);
      },
      py::arg("task"), py::arg("out"), py::arg("n") = 100, py::arg("height") = 64, py::arg("width") = 64,
      py::arg("seed") = 0, "Writes train/val/test SEIS files; returns the split counts");
  m.def("read_seis", [](const std::filesystem::path& p) { return dataset_to_dict(read_seis(p)); });

  m.def("resolve_config", [](const py::object& cfg) { return py_from_json(run_config_to_json(run_config_from_json(json_from_py(cfg)))); },
        "Validates a run config and fills in every default");
  m.def("train", &train, py::arg("config"), py::arg("resume") = "", py::arg("workers") = 0);

  py::class_<Model>(m, "Model")
      .def(py::init<const std::filesystem::path&>(), py::arg("checkpoint"))
      .def("predict", &Model::predict, py::arg("x"), py::arg("workers") = 0)
      .def_property_readonly("family", &Model::family)
      .def_property_readonly("config", &Model::config)
      .def_property_readonly("parameter_count", &Model::parameter_count);
}
