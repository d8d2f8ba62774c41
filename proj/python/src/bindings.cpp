#include <optional>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lowlat/archgraph.hpp"
#include "lowlat/bench.hpp"
#include "lowlat/error.hpp"
#include "lowlat/pqmf.hpp"
#include "lowlat/probes.hpp"
#include "lowlat/protocol.hpp"
#include "lowlat/streamkernel.hpp"
#include "lowlat/timbreval.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace lowlat;

namespace {

py::object to_py(const json& j)
{
    return py::module_::import("json").attr("loads")(j.dump());
}

json from_py(const py::handle& obj)
{
    return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

// A spec is a path to a JSON file or an already parsed dict.
ArchitectureSpec spec_arg(const py::object& obj)
{
    if (py::isinstance<py::str>(obj) || py::hasattr(obj, "__fspath__"))
        return load_spec(py::str(obj).cast<std::string>());
    return spec_from_json(from_py(obj));
}

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<float> audio_arg(const FloatArray& a)
{
    if (a.ndim() != 1)
        throw ShapeError("audio must be one dimensional");
    return {a.data(), a.data() + a.size()};
}

FloatArray audio_out(const std::vector<float>& v)
{
    FloatArray out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

FeatureRows rows_arg(const DoubleArray& a)
{
    if (a.ndim() != 2)
        throw ShapeError("features must be a 2-d array (rows x dims)");
    FeatureRows rows(a.shape(0));
    for (py::ssize_t i = 0; i < a.shape(0); ++i)
        rows[i].assign(a.data(i, 0), a.data(i, 0) + a.shape(1));
    return rows;
}

DoubleArray rows_out(const FeatureRows& rows)
{
    const py::ssize_t d = rows.empty() ? 0 : static_cast<py::ssize_t>(rows.front().size());
    DoubleArray out({static_cast<py::ssize_t>(rows.size()), d});
    for (size_t i = 0; i < rows.size(); ++i)
        std::copy(rows[i].begin(), rows[i].end(), out.mutable_data(i, 0));
    return out;
}

constexpr uint64_t kDefaultSeed = 20240917;

// Same rule as the CLI: fixtures keep their fixed weights unless a seed is given.
WeightSource source_arg(const ArchitectureSpec& spec, std::optional<uint64_t> seed,
                        std::optional<std::string> weights, bool zero_bias)
{
    if (weights)
        return WeightSource::file(*weights);
    if (!spec.fixture.empty() && !seed)
        return WeightSource::fixture();
    return WeightSource::seeded(seed.value_or(kDefaultSeed), zero_bias);
}

OnsetDetector detector_arg(const std::string& name)
{
    if (name == "first")
        return OnsetDetector::First;
    if (name == "ampgate")
        return OnsetDetector::AmpGate;
    if (name == "flux")
        return OnsetDetector::Flux;
    throw ValidationError("unknown detector: " + name);
}

// Non-causal models are measured through their reconfigured form.
ModelInstance streamable(const ModelInstance& m)
{
    return m.streamable() ? ModelInstance(m) : reconfigure_noncausal(m);
}

} // namespace

PYBIND11_MODULE(_lowlat, m)
{
    auto validation = py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<ComparisonError>(m, "ComparisonError", validation);
    py::register_exception<MeasurementError>(m, "MeasurementError", PyExc_RuntimeError);

    m.def("load_spec", [](const std::string& path) { return to_py(spec_to_json(load_spec(path))); },
          py::arg("path"));
    m.def("validate", [](const py::object& spec) { validate(spec_arg(spec)); }, py::arg("spec"));
    m.def(
        "analyze",
        [](const py::object& spec, int64_t block) { return to_py(to_json(analyze(spec_arg(spec), block))); },
        py::arg("spec"), py::arg("block") = 0);
    m.def(
        "latency_budget",
        [](const py::object& spec, int64_t block) { return to_py(to_json(latency_budget(spec_arg(spec), block))); },
        py::arg("spec"), py::arg("block"));

    m.def(
        "design_bank",
        [](int bands, double atten) { return to_py(bank_to_json(design({bands, atten}))); },
        py::arg("bands"), py::arg("attenuation_db") = 100.0);
    m.def(
        "bank_prototype",
        [](int bands, double atten) {
            const auto b = design({bands, atten});
            DoubleArray out(static_cast<py::ssize_t>(b.prototype.size()));
            std::copy(b.prototype.begin(), b.prototype.end(), out.mutable_data());
            return out;
        },
        py::arg("bands"), py::arg("attenuation_db") = 100.0);
    m.def(
        "measure_bank",
        [](int bands, double atten) {
            const auto r = measure_bank(design({bands, atten}));
            return to_py({{"stopband_db", r.stopband_db},
                          {"roundtrip_snr_db", r.roundtrip_snr_db},
                          {"roundtrip_delay_samples", r.roundtrip_delay_samples},
                          {"energy_ratio_db", r.energy_ratio_db}});
        },
        py::arg("bands"), py::arg("attenuation_db") = 100.0);

    py::class_<ModelInstance>(m, "Model")
        .def(py::init([](const py::object& obj, std::optional<uint64_t> seed, std::optional<std::string> weights,
                         bool zero_bias) {
                 const auto spec = spec_arg(obj);
                 return instantiate(spec, source_arg(spec, seed, weights, zero_bias));
             }),
             py::arg("spec"), py::kw_only(), py::arg("seed") = py::none(), py::arg("weights") = py::none(),
             py::arg("zero_bias") = false)
        .def(
            "process",
            [](ModelInstance& self, const FloatArray& block) {
                const auto in = audio_arg(block);
                std::vector<float> out;
                {
                    py::gil_scoped_release nogil;
                    out = self.process(in);
                }
                return audio_out(out);
            },
            py::arg("block"))
        .def("reset", &ModelInstance::reset)
        .def("reconfigured", [](const ModelInstance& self) { return reconfigure_noncausal(self); })
        .def("save_weights", [](const ModelInstance& self, const std::string& path) { save_weights(self.weights(), path); })
        .def_property_readonly("spec", [](const ModelInstance& self) { return to_py(spec_to_json(self.spec())); })
        .def_property_readonly("compression_ratio", &ModelInstance::compression_ratio)
        .def_property_readonly("parameter_count", &ModelInstance::parameter_count)
        .def_property_readonly("streamable", &ModelInstance::streamable)
        .def_property_readonly("is_reconfigured", &ModelInstance::reconfigured)
        .def_property_readonly("stream_delay", &ModelInstance::stream_delay);

    m.def(
        "process_offline",
        [](const ModelInstance& model, const DoubleArray& signal) {
            if (signal.ndim() != 1)
                throw ShapeError("signal must be one dimensional");
            const std::vector<double> in(signal.data(), signal.data() + signal.size());
            std::vector<double> out;
            {
                py::gil_scoped_release nogil;
                out = process_offline(model.spec(), model.weights(), in);
            }
            DoubleArray res(static_cast<py::ssize_t>(out.size()));
            std::copy(out.begin(), out.end(), res.mutable_data());
            return res;
        },
        py::arg("model"), py::arg("signal"));
    m.def(
        "measure_receptive_field",
        [](const ModelInstance& model) {
            RfMeasurement r;
            {
                py::gil_scoped_release nogil;
                r = measure_receptive_field(model);
            }
            return to_py(to_json(r));
        },
        py::arg("model"));

    m.def(
        "measure_latency",
        [](const ModelInstance& model, int64_t block, int trials, uint64_t seed, const std::string& detector,
           int threads, bool keep_trials) {
            LatencyOptions o;
            o.trials_per_spec = trials;
            o.master_seed = seed;
            o.detector = detector_arg(detector);
            o.threads = threads;
            o.keep_trials = keep_trials;
            json j;
            {
                py::gil_scoped_release nogil;
                j = to_json(measure_latency(streamable(model), excitation_grid(seed), o, block));
            }
            return to_py(j);
        },
        py::arg("model"), py::arg("block") = 0, py::arg("trials") = 500, py::arg("seed") = 0,
        py::arg("detector") = "first", py::arg("threads") = 1, py::arg("keep_trials") = false);
    m.def(
        "measure_rtf",
        [](const ModelInstance& model, std::vector<int64_t> blocks, int runs, int warmup, uint64_t seed, bool pin) {
            RtfOptions o;
            o.blocks = std::move(blocks);
            o.runs = runs;
            o.warmup = warmup;
            o.seed = seed;
            o.pin_cpu = pin;
            json j;
            {
                py::gil_scoped_release nogil;
                j = to_json(measure_rtf(streamable(model), o));
            }
            return to_py(j);
        },
        py::arg("model"), py::arg("blocks") = std::vector<int64_t>{128, 256, 512, 2048}, py::arg("runs") = 1100,
        py::arg("warmup") = 100, py::arg("seed") = 0, py::arg("pin_cpu") = true);
    m.def(
        "run_protocol",
        [](const ModelInstance& model, int trials, uint64_t seed, int64_t block, int threads, int rtf_runs,
           int rtf_warmup) {
            ProtocolOptions o;
            o.trials_per_spec = trials;
            o.seed = seed;
            o.block_samples = block;
            o.threads = threads;
            o.rtf.runs = rtf_runs;
            o.rtf.warmup = rtf_warmup;
            o.rtf.seed = seed;
            json j;
            {
                py::gil_scoped_release nogil;
                j = run_protocol(model, o);
            }
            return to_py(j);
        },
        py::arg("model"), py::arg("trials") = 500, py::arg("seed") = 0, py::arg("block") = 0, py::arg("threads") = 1,
        py::arg("rtf_runs") = 1100, py::arg("rtf_warmup") = 100);
    m.def(
        "strip_timing", [](const py::object& bundle) { return to_py(strip_timing(from_py(bundle))); },
        py::arg("bundle"));
    m.def(
        "compare_reports",
        [](const py::object& a, const py::object& b) { return to_py(compare_reports(from_py(a), from_py(b))); },
        py::arg("a"), py::arg("b"));

    m.def(
        "excitation",
        [](const std::string& kind, int length, double amplitude_db, uint64_t seed) {
            ExcitationSpec s;
            s.kind = excitation_kind_from(kind);
            s.length_samples = length;
            s.amplitude_db = amplitude_db;
            s.seed = seed;
            return audio_out(generate(s).samples);
        },
        py::arg("kind"), py::arg("length") = 44100, py::arg("amplitude_db") = 0.0, py::arg("seed") = 0);
    m.def(
        "onset",
        [](const FloatArray& x, const std::string& detector, int64_t from) -> std::optional<int64_t> {
            const auto v = audio_arg(x);
            OnsetParams p;
            switch (detector_arg(detector)) {
            case OnsetDetector::AmpGate:
                return ampgate_onset(v, p.ampgate, from);
            case OnsetDetector::Flux:
                return flux_onset(v, p.flux, from);
            default:
                return first_onset(v, p, from);
            }
        },
        py::arg("x"), py::arg("detector") = "first", py::arg("from_sample") = 0);

    m.def(
        "mfcc_textures", [](const FloatArray& audio) { return rows_out(mfcc_textures(audio_arg(audio)).windows); },
        py::arg("audio"));
    m.def(
        "mmd",
        [](const DoubleArray& x, const DoubleArray& y, std::optional<double> sigma) {
            return to_py(to_json(mmd_squared(rows_arg(x), rows_arg(y), sigma)));
        },
        py::arg("x"), py::arg("y"), py::arg("sigma") = py::none());
    m.def(
        "similarity",
        [](const DoubleArray& test, const DoubleArray& ref, const DoubleArray& transferred, uint64_t seed) {
            return to_py(to_json(similarity_protocol(rows_arg(test), rows_arg(ref), rows_arg(transferred), seed)));
        },
        py::arg("test"), py::arg("reference"), py::arg("transferred"), py::arg("seed") = 0);
    m.def(
        "loudness_report",
        [](const FloatArray& a, const FloatArray& b, double sr) {
            return to_py(loudness_report(audio_arg(a), audio_arg(b), sr));
        },
        py::arg("a"), py::arg("b"), py::arg("sample_rate") = 44100.0);
    m.def(
        "pitch_report",
        [](const FloatArray& a, const FloatArray& b, double conf, double tol) {
            return to_py(pitch_report(yin_f0(audio_arg(a)), yin_f0(audio_arg(b)), conf, tol));
        },
        py::arg("a"), py::arg("b"), py::arg("conf_threshold") = 0.85, py::arg("tol_semitones") = 0.5);
    m.def(
        "pitch_track",
        [](const FloatArray& audio) { return to_py(to_json(yin_f0(audio_arg(audio)))); }, py::arg("audio"));
    m.def(
        "integrated_lufs", [](const FloatArray& audio, double sr) { return integrated_lufs(audio_arg(audio), sr); },
        py::arg("audio"), py::arg("sample_rate") = 44100.0);
    m.def(
        "normalize_to_lufs",
        [](const FloatArray& audio, double target, double sr) {
            return audio_out(normalize_to_lufs(audio_arg(audio), target, sr));
        },
        py::arg("audio"), py::arg("target_lufs"), py::arg("sample_rate") = 44100.0);
}
