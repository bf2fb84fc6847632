#include "sdnv/data.hpp"
#include "sdnv/rgrv.hpp"
#include "sdnv/rulemap.hpp"
#include "sdnv/sdn.hpp"
#include "sdnv/serialize.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace sdnv;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Python passes one sample per row; the library stores one per column.
Dataset make_dataset(const RowMatrix& x, const std::vector<int>& y, int classes, const Box& bounds) {
    Dataset d;
    d.inputs = x.transpose();
    d.labels = y;
    d.classes = classes;
    d.input_bounds = bounds;
    d.validate();
    return d;
}

Box bounds_for(Eigen::Index dim, double lo, double hi) { return Box::uniform(dim, lo, hi); }

py::tuple pattern_tuple(const ActivationPattern& p) {
    py::list layers;
    for (const auto& d : p) {
        layers.append(py::make_tuple(d.active ? py::cast(*d.active) : py::none(),
                                     d.inactive ? py::cast(*d.inactive) : py::none()));
    }
    return py::tuple(layers);
}

}  // namespace

PYBIND11_MODULE(_sdnv, m) {
    m.doc() = "Sliding door networks: training, rule mapping and global robustness verification";
    m.attr("__version__") = kToolVersion;

    py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);
    py::register_exception<TrainingDivergence>(m, "TrainingDivergence", PyExc_ArithmeticError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

    py::class_<SDNetwork>(m, "Network")
        .def_readonly("alpha", &SDNetwork::alpha)
        .def_readonly("classes", &SDNetwork::classes)
        .def_readonly("group_size", &SDNetwork::group_size)
        .def_readonly("group_count", &SDNetwork::group_count)
        .def_property_readonly("input_dim", &SDNetwork::input_dim)
        .def_property_readonly("architecture",
                               [](const SDNetwork& n) { return format_architecture(n.architecture()); })
        .def("weights", [](const SDNetwork& n, std::size_t l) { return n.layers.at(l).weights; })
        .def("biases", [](const SDNetwork& n, std::size_t l) { return n.layers.at(l).biases; })
        .def("forward",
             [](const SDNetwork& n, const Vector& x) {
                 const auto f = forward(n, x);
                 return py::make_tuple(f.logits, pattern_tuple(f.pattern), f.predicted());
             },
             py::arg("x"), "Logits, activation pattern and predicted class of one input.")
        .def("predict",
             [](const SDNetwork& n, const RowMatrix& x) {
                 std::vector<int> out;
                 out.reserve(std::size_t(x.rows()));
                 for (Eigen::Index i = 0; i < x.rows(); ++i) out.push_back(forward(n, x.row(i).transpose()).predicted());
                 return out;
             },
             py::arg("X"))
        .def("to_json", [](const SDNetwork& n) { return to_json(n).dump(); })
        .def("save", [](const SDNetwork& n, const std::string& path) { save_model(path, n); });

    m.def("load_model", [](const std::string& path) { return load_model(path); }, py::arg("path"));
    m.def("model_from_json", [](const std::string& text) { return network_from_json(json::parse(text)); });

    m.def("initialize",
          [](Eigen::Index input_dim, const std::string& arch, int classes, double alpha, double lo, double hi,
             std::uint64_t seed) {
              return SDNetwork::initialize(input_dim, parse_architecture(arch), classes, alpha,
                                           bounds_for(input_dim, lo, hi), seed);
          },
          py::arg("input_dim"), py::arg("arch"), py::arg("classes"), py::arg("alpha") = 2.0, py::arg("lo") = 0.0,
          py::arg("hi") = 1.0, py::arg("seed") = 0);

    m.def("train",
          [](const std::string& arch, const RowMatrix& x, const std::vector<int>& y, int classes, double alpha,
             int epochs, int batch_size, double learning_rate, double lam, const std::string& loss,
             std::uint64_t seed, double lo, double hi, const std::function<void(int, double, double, double)>& cb) {
              TrainConfig cfg;
              cfg.epochs = epochs;
              cfg.batch_size = batch_size;
              cfg.learning_rate = learning_rate;
              cfg.lambda = lam;
              cfg.loss_kind = parse_loss_kind(loss);
              cfg.seed = seed;
              const Dataset data = make_dataset(x, y, classes, bounds_for(x.cols(), lo, hi));
              EpochCallback on_epoch;
              if (cb) on_epoch = [&](const EpochStats& s) { cb(s.epoch, s.loss, s.accuracy, s.sat_rate); };
              py::gil_scoped_release release;
              return train(parse_architecture(arch), alpha, data, cfg, on_epoch);
          },
          py::arg("arch"), py::arg("X"), py::arg("y"), py::arg("classes"), py::arg("alpha") = 2.0,
          py::arg("epochs") = 1500, py::arg("batch_size") = 256, py::arg("learning_rate") = 1e-3,
          py::arg("lam") = 0.01, py::arg("loss") = "cross_entropy", py::arg("seed") = 0, py::arg("lo") = 0.0,
          py::arg("hi") = 1.0, py::arg("on_epoch") = nullptr);

    m.def("accuracy",
          [](const SDNetwork& n, const RowMatrix& x, const std::vector<int>& y) {
              return accuracy(n, make_dataset(x, y, n.classes, n.input_bounds));
          });
    m.def("sat_rate",
          [](const SDNetwork& n, const RowMatrix& x, const std::vector<int>& y) {
              return sat_rate(n, make_dataset(x, y, n.classes, n.input_bounds));
          });

    m.def("assign_doors",
          [](const Vector& pre, int group_size) {
              const auto d = assign_doors(pre, group_size);
              return py::make_tuple(d.active ? py::cast(*d.active) : py::none(),
                                    d.inactive ? py::cast(*d.inactive) : py::none());
          },
          py::arg("preactivations"), py::arg("group_size"));

    m.def("layer_pattern_count", &layer_pattern_count);
    m.def("pattern_number",
          [](const SDNetwork& n, const std::string& pattern) {
              return pattern_number(parse_pattern(pattern), n.group_count).number;
          });
    m.def("region_rules",
          [](const SDNetwork& n, int k, const std::string& pattern) {
              return to_json(region_rules(n, k, parse_pattern(pattern))).dump();
          },
          py::arg("net"), py::arg("k"), py::arg("pattern"), "Region as JSON text.");

    m.def("gen_synth2d",
          [](std::uint64_t seed, bool blob, int points, int blob_points) {
              Synth2DConfig cfg;
              cfg.seed = seed;
              cfg.plant_blob = blob;
              cfg.uniform_points = points;
              cfg.blob_points = blob_points;
              const Dataset d = gen_synth2d(cfg);
              return py::make_tuple(RowMatrix(d.inputs.transpose()), d.labels);
          },
          py::arg("seed") = 0, py::arg("blob") = true, py::arg("points") = 2000, py::arg("blob_points") = 150);

    m.def("verify",
          [](const SDNetwork& n, std::optional<RowMatrix> x, std::optional<std::vector<int>> y, double R, double r,
             std::uint64_t seed, std::size_t discover, std::size_t region, std::size_t probes, std::size_t ball,
             std::size_t max_vertices, unsigned threads) {
              VerifyParams p;
              p.R = R;
              p.r = r;
              p.seed = seed;
              p.threads = threads;
              p.budgets = {discover, region, probes, ball, max_vertices};
              std::optional<Dataset> data;
              if (x && y) data = make_dataset(*x, *y, n.classes, n.input_bounds);
              py::gil_scoped_release release;
              return to_json(verify_global(n, data ? &*data : nullptr, p)).dump();
          },
          py::arg("net"), py::arg("X") = py::none(), py::arg("y") = py::none(), py::arg("R") = 0.04,
          py::arg("r") = 0.2, py::arg("seed") = 0, py::arg("budget_discover") = 4096,
          py::arg("budget_region") = 4096, py::arg("budget_probes") = 64, py::arg("budget_ball") = 4096,
          py::arg("budget_vertices") = 200000, py::arg("threads") = 1, "Verification report as JSON text.");

    m.def("extract_adversarial_examples",
          [](const SDNetwork& n, int k, const std::string& pattern, std::size_t count, std::uint64_t seed) {
              const Region region = region_rules(n, k, parse_pattern(pattern));
              const auto pts = extract_adversarial_examples(n, region, count, seed);
              RowMatrix out(Eigen::Index(pts.size()), n.input_dim());
              for (std::size_t i = 0; i < pts.size(); ++i) out.row(Eigen::Index(i)) = pts[i].transpose();
              return out;
          },
          py::arg("net"), py::arg("k"), py::arg("pattern"), py::arg("count"), py::arg("seed") = 0);
}
