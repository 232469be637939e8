#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "hetcache/dit.hpp"
#include "hetcache/metrics.hpp"
#include "hetcache/partition.hpp"
#include "hetcache/report.hpp"
#include "hetcache/scene.hpp"
#include "hetcache/scheduler.hpp"
#include "hetcache/select.hpp"

namespace py = pybind11;
using namespace hetcache;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

TokenGrid grid_from_array(const FloatArray& arr) {
    if (arr.ndim() != 4) {
        throw std::invalid_argument("expected a (frames, height, width, channels) float array");
    }
    TokenGrid grid(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
                   static_cast<int>(arr.shape(2)), static_cast<int>(arr.shape(3)));
    std::memcpy(grid.data.data(), arr.data(), grid.data.size() * sizeof(float));
    return grid;
}

py::array_t<float> grid_to_array(const TokenGrid& grid) {
    py::array_t<float> arr({grid.frames, grid.height, grid.width, grid.channels});
    std::memcpy(arr.mutable_data(), grid.data.data(), grid.data.size() * sizeof(float));
    return arr;
}

EditMask mask_from_array(const ByteArray& arr) {
    if (arr.ndim() != 3) {
        throw std::invalid_argument("expected a (frames, height, width) mask array");
    }
    EditMask mask(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
                  static_cast<int>(arr.shape(2)));
    const std::uint8_t* src = arr.data();
    for (std::size_t i = 0; i < mask.flags.size(); ++i) mask.flags[i] = src[i] ? 1 : 0;
    return mask;
}

TokenMatrix matrix_from_array(const FloatArray& arr) {
    if (arr.ndim() != 2) throw std::invalid_argument("expected a 2-d float array");
    TokenMatrix m(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
    std::memcpy(m.data.data(), arr.data(), m.data.size() * sizeof(float));
    return m;
}

py::array_t<float> matrix_to_array(const TokenMatrix& m) {
    py::array_t<float> arr({m.rows, m.cols});
    std::memcpy(arr.mutable_data(), m.data.data(), m.data.size() * sizeof(float));
    return arr;
}

py::array_t<double> capture_to_array(const AttentionCapture& cap) {
    py::array_t<double> arr({cap.context_count, cap.generative_count});
    std::memcpy(arr.mutable_data(), cap.weights.data(), cap.weights.size() * sizeof(double));
    return arr;
}

AttentionCapture capture_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw std::invalid_argument("expected a (context, generative) array");
    AttentionCapture cap;
    cap.context_count = static_cast<int>(arr.shape(0));
    cap.generative_count = static_cast<int>(arr.shape(1));
    cap.weights.assign(arr.data(), arr.data() + arr.size());
    return cap;
}

py::object report_to_py(const RunReport& report) {
    return py::module_::import("json").attr("loads")(report_to_json(report).dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "heterogeneous caching for masked video diffusion editing";

    py::enum_<Regime>(m, "Regime")
        .value("FULL", Regime::FullCompute)
        .value("PARTIAL", Regime::PartialCompute)
        .value("REUSE", Regime::Reuse);

    py::enum_<AttnAggregate>(m, "AttnAggregate")
        .value("MEAN_ALL_BLOCKS", AttnAggregate::MeanAllBlocks)
        .value("LAST_BLOCK", AttnAggregate::LastBlock);

    py::class_<DitConfig>(m, "DitConfig")
        .def(py::init([](int channels, int heads, int blocks, int mlp_hidden, std::uint64_t seed,
                         bool capture_attention, AttnAggregate aggregate) {
                 DitConfig cfg;
                 cfg.channels = channels;
                 cfg.heads = heads;
                 cfg.blocks = blocks;
                 cfg.mlp_hidden = mlp_hidden;
                 cfg.seed = seed;
                 cfg.capture_attention = capture_attention;
                 cfg.aggregate = aggregate;
                 cfg.validate();
                 return cfg;
             }),
             py::arg("channels") = 32, py::arg("heads") = 4, py::arg("blocks") = 4,
             py::arg("mlp_hidden") = 64, py::arg("seed") = 7,
             py::arg("capture_attention") = true,
             py::arg("aggregate") = AttnAggregate::MeanAllBlocks)
        .def_readonly("channels", &DitConfig::channels)
        .def_readonly("heads", &DitConfig::heads)
        .def_readonly("blocks", &DitConfig::blocks)
        .def_readonly("mlp_hidden", &DitConfig::mlp_hidden)
        .def_readonly("seed", &DitConfig::seed)
        .def_readonly("capture_attention", &DitConfig::capture_attention);

    py::class_<SchedulerConfig>(m, "SchedulerConfig")
        .def(py::init([](int steps, double delta, double full_multiplier, double ema_gamma,
                         double r_ctx, int k_clusters, int kmeans_max_iter, int margin_radius,
                         std::uint64_t seed) {
                 SchedulerConfig cfg;
                 cfg.steps = steps;
                 cfg.delta = delta;
                 cfg.full_multiplier = full_multiplier;
                 cfg.ema_gamma = ema_gamma;
                 cfg.r_ctx = r_ctx;
                 cfg.k_clusters = k_clusters;
                 cfg.kmeans_max_iter = kmeans_max_iter;
                 cfg.margin_radius = margin_radius;
                 cfg.seed = seed;
                 cfg.validate();
                 return cfg;
             }),
             py::arg("steps") = 50, py::arg("delta") = 0.05, py::arg("full_multiplier") = 1.5,
             py::arg("ema_gamma") = 0.5, py::arg("r_ctx") = 0.7, py::arg("k_clusters") = 16,
             py::arg("kmeans_max_iter") = 10, py::arg("margin_radius") = 1, py::arg("seed") = 0)
        .def_readonly("steps", &SchedulerConfig::steps)
        .def_readonly("delta", &SchedulerConfig::delta)
        .def_readonly("r_ctx", &SchedulerConfig::r_ctx)
        .def_readonly("k_clusters", &SchedulerConfig::k_clusters);

    py::class_<TokenPartition>(m, "TokenPartition")
        .def_readonly("context", &TokenPartition::context)
        .def_readonly("margin", &TokenPartition::margin)
        .def_readonly("generative", &TokenPartition::generative)
        .def_readonly("total_tokens", &TokenPartition::total_tokens);

    py::class_<TimestepEmbedding>(m, "TimestepEmbedding")
        .def_readonly("steps", &TimestepEmbedding::steps)
        .def_readonly("channels", &TimestepEmbedding::channels);

    py::class_<ClusterResult>(m, "ClusterResult")
        .def_readonly("assignments", &ClusterResult::assignments)
        .def_readonly("clusters", &ClusterResult::clusters)
        .def_readonly("iterations_used", &ClusterResult::iterations_used)
        .def_readonly("inertia", &ClusterResult::inertia)
        .def_readonly("converged", &ClusterResult::converged)
        .def_property_readonly("centroids", [](const ClusterResult& r) {
            py::array_t<double> arr({r.clusters, r.dims});
            std::memcpy(arr.mutable_data(), r.centroids.data(), r.centroids.size() * sizeof(double));
            return arr;
        });

    py::class_<DitModel>(m, "DitModel")
        .def(py::init<const DitConfig&>(), py::arg("config"))
        .def_property_readonly("config", &DitModel::config)
        .def("timestep_table", &DitModel::make_timestep_table, py::arg("steps"))
        .def(
            "forward_full",
            [](const DitModel& model, const FloatArray& x, const TimestepEmbedding& emb, int t,
               const TokenPartition& part, bool capture) {
                const ForwardResult res = model.forward_full(grid_from_array(x), emb, t, part, capture);
                py::object attn = py::none();
                if (res.attention.has_value()) attn = capture_to_array(*res.attention);
                return py::make_tuple(grid_to_array(res.output), attn);
            },
            py::arg("x"), py::arg("embedding"), py::arg("t"), py::arg("partition"),
            py::arg("capture") = false)
        .def(
            "forward_subset",
            [](const DitModel& model, const FloatArray& x, const TimestepEmbedding& emb, int t,
               const std::vector<int>& active) {
                return matrix_to_array(model.forward_subset(grid_from_array(x), emb, t, active));
            },
            py::arg("x"), py::arg("embedding"), py::arg("t"), py::arg("active"))
        .def_property_readonly("forward_calls", &DitModel::forward_calls);

    m.def(
        "partition_tokens",
        [](const ByteArray& mask, int margin_radius) {
            return partition_tokens(mask_from_array(mask), margin_radius);
        },
        py::arg("mask"), py::arg("margin_radius") = 1);

    m.def(
        "modulated_input",
        [](const FloatArray& x, const TimestepEmbedding& emb, int t) {
            return grid_to_array(modulated_input(grid_from_array(x), emb, t));
        },
        py::arg("x"), py::arg("embedding"), py::arg("t"));

    m.def("attention_cost", &attention_cost, py::arg("context"), py::arg("margin"),
          py::arg("generative"), py::arg("keep_ratio"));

    m.def(
        "kmeans",
        [](const FloatArray& points, int clusters, std::uint64_t seed, int max_iter) {
            return kmeans(matrix_from_array(points), clusters, seed, max_iter);
        },
        py::arg("points"), py::arg("clusters"), py::arg("seed") = 0, py::arg("max_iter") = 10);

    m.def(
        "importance_scores",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& attn) {
            return importance_scores(capture_from_array(attn));
        },
        py::arg("attention"));

    m.def(
        "select_representatives",
        [](const std::vector<int>& assignments, int clusters, const std::vector<double>& scores,
           double keep_ratio, const std::vector<int>& context_indices) {
            ClusterResult res;
            res.assignments = assignments;
            res.clusters = clusters;
            res.dims = 1;
            res.centroids.assign(static_cast<std::size_t>(clusters), 0.0);
            return select_representatives(res, scores, keep_ratio, context_indices);
        },
        py::arg("assignments"), py::arg("clusters"), py::arg("scores"), py::arg("keep_ratio"),
        py::arg("context_indices"));

    m.def(
        "rel_l1_distance",
        [](const FloatArray& a, const FloatArray& b) {
            return rel_l1_distance(grid_from_array(a), grid_from_array(b));
        },
        py::arg("current"), py::arg("reference"));

    m.def(
        "decide_regime",
        [](double drift, double delta, double full_multiplier, bool cache_present) {
            SchedulerConfig cfg;
            cfg.delta = delta;
            cfg.full_multiplier = full_multiplier;
            return decide_regime(drift, cfg, cache_present);
        },
        py::arg("drift"), py::arg("delta") = 0.05, py::arg("full_multiplier") = 1.5,
        py::arg("cache_present") = true);

    m.def(
        "ema_update",
        [](const FloatArray& cache, const FloatArray& fresh, double gamma) {
            return grid_to_array(ema_update(grid_from_array(cache), grid_from_array(fresh), gamma));
        },
        py::arg("cache"), py::arg("fresh"), py::arg("gamma"));

    m.def(
        "run_denoise",
        [](const DitModel& model, const FloatArray& x, const ByteArray& mask,
           const SchedulerConfig& cfg) {
            const DenoiseResult res =
                run_denoise(model, grid_from_array(x), mask_from_array(mask), cfg);
            return py::make_tuple(grid_to_array(res.latent), report_to_py(res.report));
        },
        py::arg("model"), py::arg("x"), py::arg("mask"), py::arg("config"));

    m.def(
        "run_baseline",
        [](const DitModel& model, const FloatArray& x, const ByteArray& mask, int steps) {
            const DenoiseResult res =
                run_baseline(model, grid_from_array(x), mask_from_array(mask), steps);
            return py::make_tuple(grid_to_array(res.latent), report_to_py(res.report));
        },
        py::arg("model"), py::arg("x"), py::arg("mask"), py::arg("steps"));

    m.def(
        "gaussian_latents",
        [](int frames, int height, int width, int channels, std::uint64_t seed) {
            return grid_to_array(gaussian_latents(frames, height, width, channels, seed));
        },
        py::arg("frames"), py::arg("height"), py::arg("width"), py::arg("channels"),
        py::arg("seed"));

    m.def(
        "l2_distance",
        [](const FloatArray& a, const FloatArray& b) {
            return l2_distance(grid_from_array(a), grid_from_array(b));
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "psnr",
        [](const FloatArray& a, const FloatArray& b, double peak) {
            return psnr(grid_from_array(a), grid_from_array(b), peak);
        },
        py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);
    m.def(
        "ssim",
        [](const FloatArray& a, const FloatArray& b, double dynamic_range) {
            return ssim(grid_from_array(a), grid_from_array(b), dynamic_range);
        },
        py::arg("a"), py::arg("b"), py::arg("dynamic_range") = 1.0);

    m.attr("__version__") = "0.1.0";
}
