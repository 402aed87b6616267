#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ecgnn/checkpoint.hpp"
#include "ecgnn/errors.hpp"
#include "ecgnn/datagen.hpp"
#include "ecgnn/gradcheck_suite.hpp"
#include "ecgnn/model.hpp"
#include "ecgnn/tensor_io.hpp"
#include "ecgnn/train.hpp"

namespace py = pybind11;
using namespace ecgnn;

namespace {

Tensor tensor_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw ShapeError("expected a 2-D array");
    Shape shape{static_cast<std::size_t>(arr.shape(0)), static_cast<std::size_t>(arr.shape(1))};
    std::vector<double> data(arr.data(), arr.data() + arr.size());
    return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> tensor_to_numpy(const Tensor& t) {
    if (t.rank() != 2) {
        py::array_t<double> flat(static_cast<py::ssize_t>(t.size()));
        std::copy(t.data(), t.data() + t.size(), flat.mutable_data());
        return flat;
    }
    py::array_t<double> out({static_cast<py::ssize_t>(t.rows()), static_cast<py::ssize_t>(t.cols())});
    std::copy(t.data(), t.data() + t.size(), out.mutable_data());
    return out;
}

GenOptions make_gen_options(std::uint64_t seed, std::size_t n_samples, std::size_t dim, std::size_t n_classes,
                            std::size_t n_candidates, double noise, bool shuffle_labels) {
    GenOptions opt;
    opt.seed = seed;
    opt.n_samples = n_samples;
    opt.sizes.d = dim;
    opt.n_classes = n_classes;
    opt.n_candidates = n_candidates;
    opt.noise = noise;
    opt.shuffle_labels = shuffle_labels;
    return opt;
}

py::dict trace_to_dict(const FusionTrace& trace) {
    py::dict d;
    py::list steps;
    for (const FusionStepTrace& st : trace.steps) {
        py::dict step;
        for (std::size_t m = 0; m < trace.modality_names.size(); ++m) {
            step[("att_" + trace.modality_names[m]).c_str()] = tensor_to_numpy(st.att[m]);
        }
        step["alpha"] = tensor_to_numpy(st.alpha);
        step["h"] = tensor_to_numpy(st.h);
        steps.append(std::move(step));
    }
    d["steps"] = std::move(steps);
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "EC-GNN core: tensors, model, training, synthetic data";

    py::register_exception<Error>(m, "EcgnnError", PyExc_RuntimeError);

    py::enum_<Task>(m, "Task")
        .value("word", Task::word)
        .value("number", Task::number)
        .value("choice", Task::choice);

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("d_c", &ModelConfig::d_c)
        .def_readwrite("d_v", &ModelConfig::d_v)
        .def_readwrite("d_q", &ModelConfig::d_q)
        .def_readwrite("d_a", &ModelConfig::d_a)
        .def_readwrite("d_m", &ModelConfig::d_m)
        .def_readwrite("d", &ModelConfig::d)
        .def_readwrite("layers", &ModelConfig::layers)
        .def_readwrite("n_r", &ModelConfig::n_r)
        .def_readwrite("task", &ModelConfig::task)
        .def_readwrite("n_classes", &ModelConfig::n_classes)
        .def_readwrite("n_candidates", &ModelConfig::n_candidates)
        .def_readwrite("use_caption", &ModelConfig::use_caption)
        .def_readwrite("use_video", &ModelConfig::use_video)
        .def_readwrite("use_cmr", &ModelConfig::use_cmr)
        .def_readwrite("use_qmmf", &ModelConfig::use_qmmf)
        .def_readwrite("question_guided", &ModelConfig::question_guided)
        .def_readwrite("seed", &ModelConfig::seed)
        .def("s_a_width", &ModelConfig::s_a_width);

    py::class_<Sample>(m, "Sample")
        .def(py::init<>())
        .def_property(
            "f_c", [](const Sample& s) { return tensor_to_numpy(s.f_c); },
            [](Sample& s, const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
                s.f_c = tensor_from_numpy(a);
            })
        .def_property(
            "f_v", [](const Sample& s) { return tensor_to_numpy(s.f_v); },
            [](Sample& s, const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
                s.f_v = tensor_from_numpy(a);
            })
        .def_property(
            "f_q", [](const Sample& s) { return tensor_to_numpy(s.f_q); },
            [](Sample& s, const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
                s.f_q = tensor_from_numpy(a);
            })
        .def_property(
            "candidates", [](const Sample& s) { return tensor_to_numpy(s.candidates); },
            [](Sample& s, const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
                s.candidates = tensor_from_numpy(a);
            })
        .def_readwrite("answer", &Sample::answer)
        .def_readwrite("planted_row", &Sample::planted_row);

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("task", &Dataset::task)
        .def_readonly("n_classes", &Dataset::n_classes)
        .def_readonly("n_candidates", &Dataset::n_candidates)
        .def_readonly("seed", &Dataset::seed)
        .def("__len__", [](const Dataset& d) { return d.samples.size(); })
        .def(
            "sample", [](Dataset& d, std::size_t i) -> Sample& { return d.samples.at(i); },
            py::return_value_policy::reference_internal);

    py::class_<Metrics>(m, "Metrics")
        .def_readonly("value", &Metrics::value)
        .def_readonly("is_accuracy", &Metrics::is_accuracy)
        .def_readonly("n", &Metrics::n);

    py::class_<Model>(m, "Model")
        .def(py::init<ModelConfig>())
        .def_property_readonly("config", &Model::config)
        .def("param_count", &Model::param_count)
        .def("reset_grads", &Model::reset_grads)
        .def("loss",
             [](Model& model, const Sample& s) {
                 Tape tape;
                 return model.forward(tape, s).loss_value;
             })
        .def("predict",
             [](Model& model, const Sample& s) {
                 Tape tape;
                 ForwardOutput out = model.forward(tape, s);
                 py::dict d;
                 d["loss"] = out.loss_value;
                 if (model.config().task == Task::number) {
                     d["prediction"] = out.int_prediction;
                 } else {
                     d["prediction"] = out.prediction;
                 }
                 if (model.config().task == Task::word) d["probs"] = tensor_to_numpy(out.probs);
                 if (model.config().task == Task::choice) d["scores"] = out.scores;
                 return d;
             })
        .def("forward_diag", [](Model& model, const Sample& s) {
            ForwardDiag diag;
            Tape tape;
            ForwardOutput out = model.forward(tape, s, &diag);
            py::dict d;
            d["loss"] = out.loss_value;
            d["s_a_width"] = out.s_a.val().cols();
            py::list adjacencies, cam_weights, fusion;
            for (const Tensor& a : diag.adjacencies) adjacencies.append(tensor_to_numpy(a));
            for (const Tensor& w : diag.cam_weights) cam_weights.append(tensor_to_numpy(w));
            for (const FusionTrace& tr : diag.fusion) fusion.append(trace_to_dict(tr));
            d["adjacencies"] = std::move(adjacencies);
            d["cam_weights"] = std::move(cam_weights);
            d["fusion"] = std::move(fusion);
            py::list final_att;
            for (const auto& [name, w] : diag.final_att) {
                final_att.append(py::make_tuple(name, tensor_to_numpy(w)));
            }
            d["final_att"] = std::move(final_att);
            return d;
        });

    m.def(
        "generate",
        [](Task task, std::uint64_t seed, std::size_t n_samples, const std::string& split, std::size_t dim,
           std::size_t n_classes, std::size_t n_candidates, double noise, bool shuffle_labels) {
            return generate(task, make_gen_options(seed, n_samples, dim, n_classes, n_candidates, noise, shuffle_labels),
                            split);
        },
        py::arg("task"), py::arg("seed"), py::arg("n_samples"), py::arg("split") = "train", py::arg("dim") = 32,
        py::arg("n_classes") = 4, py::arg("n_candidates") = 5, py::arg("noise") = 0.1,
        py::arg("shuffle_labels") = false);

    m.def("write_dataset", [](const std::string& dir, const Dataset& data) {
        GenOptions opt;
        opt.seed = data.seed;
        write_dataset(dir, data, opt);
    });
    m.def("load_dataset", &load_dataset);

    m.def(
        "train",
        [](Model& model, const Dataset& data, std::size_t epochs, double lr, std::size_t batch_size,
           std::size_t threads) {
            Adam::Options aopt;
            aopt.lr = lr;
            Adam adam(model, aopt);
            TrainOptions topt;
            topt.batch_size = batch_size;
            topt.threads = threads;
            topt.shuffle_seed = model.config().seed;
            std::vector<double> losses;
            for (std::size_t e = 1; e <= epochs; ++e) {
                losses.push_back(train_epoch(model, data, adam, topt, e).mean_loss);
            }
            return losses;
        },
        py::arg("model"), py::arg("data"), py::arg("epochs") = 1, py::arg("lr") = 1e-4, py::arg("batch_size") = 64,
        py::arg("threads") = 1);

    m.def("evaluate", [](Model& model, const Dataset& data) { return evaluate(model, data); });

    m.def("save_checkpoint", &save_checkpoint);
    m.def("load_checkpoint", [](const std::string& path) { return load_checkpoint(path); });

    m.def("write_tensor", [](const std::string& path,
                             const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
        write_tensor(path, tensor_from_numpy(arr), 1);
    });
    m.def("read_tensor", [](const std::string& path) { return tensor_to_numpy(read_tensor(path)); });

    m.def(
        "gradcheck",
        [](std::uint64_t seed, std::size_t points, bool full) {
            SuiteResult suite = run_primitive_suite(seed, points);
            bool ok = suite.ok(1e-6);
            double worst = suite.worst() ? suite.worst()->report.worst_rel_err : 0.0;
            if (full) {
                GradCheckReport rep = run_model_check(seed, 20);
                ok = ok && rep.within(1e-3);
                worst = std::max(worst, rep.worst_rel_err);
            }
            py::dict d;
            d["ok"] = ok;
            d["worst_rel_err"] = worst;
            return d;
        },
        py::arg("seed") = 0, py::arg("points") = 100, py::arg("full") = false);

    m.def("word_oracle_accuracy", [](const Dataset& data, std::uint64_t seed, std::size_t dim,
                                     std::size_t n_classes) {
        GenOptions opt;
        opt.seed = seed;
        opt.sizes.d = dim;
        opt.n_classes = n_classes;
        return word_oracle_accuracy(data, opt);
    });
}
