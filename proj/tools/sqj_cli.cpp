// Command-line front end: model generation, quantization, inference, tensor
// comparison, shape validation and performance reports over SQJM/SQJT files.
//
// Exit codes: 0 success, 1 usage, 2 I/O or format error, 3 verification
// mismatch.
#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "sqj/netgraph.hpp"
#include "sqj/perf.hpp"
#include "sqj/quantize.hpp"
#include "sqj/serialize.hpp"

using nlohmann::json;
using namespace sqj;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitMismatch = 3;

FixedFormat parse_format(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos)
        throw CLI::ValidationError("format must look like total:frac, e.g. 8:7");
    FixedFormat fmt;
    try {
        fmt.total_bits = std::stoi(s.substr(0, colon));
        fmt.frac_bits = std::stoi(s.substr(colon + 1));
    } catch (const std::exception&) {
        throw CLI::ValidationError("format must look like total:frac, e.g. 8:7");
    }
    if (!fmt.valid()) throw CLI::ValidationError("invalid fixed-point format " + s);
    return fmt;
}

std::size_t arg_top1(const std::vector<double>& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::string sanitize(std::string name) {
    for (char& c : name)
        if (c == '/' || c == ':') c = '_';
    return name;
}

void emit(bool as_json, const json& j, const std::string& text) {
    if (as_json) std::cout << j.dump() << "\n";
    else std::cout << text << "\n";
}

// ------------------------------------------------------------- init-model --
struct InitModelArgs {
    std::string out;
    unsigned seed = 1;
    bool zero = false;
};

int run_init_model(const InitModelArgs& a) {
    FloatModel fm;
    fm.net = squeezenet_v11();
    resolve_shapes(fm.net);
    std::mt19937 rng(a.seed);
    std::normal_distribution<double> wdist(0.0, 0.05);
    for (const auto& n : fm.net.nodes) {
        std::vector<LayerParams> convs;
        if (n.kind == LayerKind::conv) convs.push_back(n.conv);
        if (n.kind == LayerKind::fire) {
            convs.push_back(fire_squeeze_params(n));
            convs.push_back(fire_expand1_params(n));
            convs.push_back(fire_expand3_params(n));
        }
        for (const auto& p : convs) {
            FloatConvParams fp;
            fp.weights.resize(static_cast<std::size_t>(p.c_out) * p.kernel * p.kernel * p.c_in);
            fp.bias.resize(static_cast<std::size_t>(p.c_out));
            if (!a.zero) {
                for (auto& w : fp.weights) w = wdist(rng);
                for (auto& b : fp.bias) b = wdist(rng);
            }
            fm.params.push_back(std::move(fp));
        }
    }
    save_float_model(fm, a.out);
    std::cout << "wrote float v1.1 model (" << fm.params.size() << " conv slots) to " << a.out
              << "\n";
    return kExitOk;
}

// ---------------------------------------------------------- random-tensor --
struct RandomTensorArgs {
    std::string out;
    int y = 227, x = 227, c = 3;
    unsigned seed = 1;
    double lo = -1.0, hi = 1.0;
};

int run_random_tensor(const RandomTensorArgs& a) {
    std::mt19937 rng(a.seed);
    std::uniform_real_distribution<double> dist(a.lo, a.hi);
    FmapTensor t = FmapTensor::real(a.y, a.x, a.c);
    for (auto& v : t.real_data) v = dist(rng);
    save_tensor(t, a.out);
    std::cout << "wrote " << a.y << "x" << a.x << "x" << a.c << " real tensor to " << a.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- quantize --
struct QuantizeArgs {
    std::string in, out;
    std::string wfmt = "8:7", afmt = "16:3";
    bool as_json = false;
};

int run_quantize(const QuantizeArgs& a) {
    LoadedModel lm = load_model_any(a.in);
    if (!lm.is_float) {
        std::cerr << "input model already holds quantized parameters\n";
        return kExitIo;
    }
    QuantizeStats stats;
    Model m = quantize_model(lm.floating, parse_format(a.wfmt), parse_format(a.afmt), &stats);
    save_model(m, a.out);
    for (const auto& s : stats.slots) {
        emit(a.as_json,
             json{{"record", "saturation"},
                  {"layer", s.name},
                  {"weights_saturated", s.weight_saturated},
                  {"weights_total", s.weight_count},
                  {"bias_saturated", s.bias_saturated},
                  {"bias_total", s.bias_count}},
             s.name + ": " + std::to_string(s.weight_saturated) + "/" +
                 std::to_string(s.weight_count) + " weights saturated, " +
                 std::to_string(s.bias_saturated) + "/" + std::to_string(s.bias_count) +
                 " biases saturated");
    }
    emit(a.as_json, json{{"record", "quantized"}, {"out", a.out}}, "wrote quantized model to " + a.out);
    return kExitOk;
}

// ------------------------------------------------------------------- infer --
struct InferArgs {
    std::string model, input, out, dump_dir;
    int parallel = 3;
    bool float_ref = false;
    bool as_json = false;
};

int run_infer(const InferArgs& a) {
    Model m = load_model(a.model);
    FmapTensor in = load_tensor(a.input);
    if (in.kind == ElemKind::fixed) in = fixed2float(in);

    RunOptions opt;
    opt.parallel_n = a.parallel;
    InferenceTrace trace;
    trace.keep_fmaps = !a.dump_dir.empty();
    const std::vector<double> probs = run_inference(m, in, opt, &trace);

    FmapTensor out = FmapTensor::real(1, 1, static_cast<int>(probs.size()));
    out.real_data = probs;
    save_tensor(out, a.out);

    const std::size_t top1 = arg_top1(probs);
    emit(a.as_json,
         json{{"record", "inference"},
              {"classes", probs.size()},
              {"top1", top1},
              {"top1_prob", probs[top1]},
              {"out", a.out}},
         "top-1 class " + std::to_string(top1) + " (p=" + std::to_string(probs[top1]) +
             "), wrote probabilities to " + a.out);

    if (a.float_ref) {
        const std::vector<double> fprobs = run_inference_float(m, in);
        const std::size_t ftop1 = arg_top1(fprobs);
        double max_diff = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i)
            max_diff = std::max(max_diff, std::abs(probs[i] - fprobs[i]));
        emit(a.as_json,
             json{{"record", "float_ref"},
                  {"top1_fixed", top1},
                  {"top1_float", ftop1},
                  {"top1_agree", top1 == ftop1},
                  {"max_prob_diff", max_diff}},
             std::string("float reference top-1 class ") + std::to_string(ftop1) +
                 (top1 == ftop1 ? " (agrees with fixed engine)" : " (DISAGREES with fixed engine)") +
                 ", max probability difference " + std::to_string(max_diff));
    }

    if (!a.dump_dir.empty()) {
        std::filesystem::create_directories(a.dump_dir);
        for (std::size_t i = 0; i < trace.fmaps.size(); ++i) {
            char prefix[8];
            std::snprintf(prefix, sizeof prefix, "%02zu_", i);
            const std::string path =
                a.dump_dir + "/" + prefix + sanitize(trace.fmap_names[i]) + ".sqjt";
            save_tensor(trace.fmaps[i], path);
        }
        emit(a.as_json,
             json{{"record", "fmap_dump"}, {"dir", a.dump_dir}, {"count", trace.fmaps.size()}},
             "dumped " + std::to_string(trace.fmaps.size()) + " intermediate fmaps to " + a.dump_dir);
    }
    return kExitOk;
}

// ----------------------------------------------------------------- compare --
struct CompareArgs {
    std::string a, b;
    bool as_json = false;
};

int run_compare(const CompareArgs& args) {
    const FmapTensor a = load_tensor(args.a);
    const FmapTensor b = load_tensor(args.b);
    if (!a.same_dims(b)) {
        std::cerr << "tensor dims differ: " << a.y << "x" << a.x << "x" << a.c << " vs " << b.y
                  << "x" << b.x << "x" << b.c << "\n";
        return kExitIo;
    }
    auto value = [](const FmapTensor& t, std::size_t i) {
        return t.kind == ElemKind::real64 ? t.real_data[i]
                                          : raw_to_real(t.raw_data[i], t.fmt.frac_bits);
    };
    double max_abs = 0.0, sum_abs = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = std::abs(value(a, i) - value(b, i));
        max_abs = std::max(max_abs, d);
        sum_abs += d;
    }
    const double mean_abs = a.size() ? sum_abs / static_cast<double>(a.size()) : 0.0;
    auto reals_bitwise_equal = [](const std::vector<double>& x, const std::vector<double>& y) {
        return std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0;
    };
    const bool bit_exact = a.kind == b.kind &&
                           (a.kind == ElemKind::real64
                                ? reals_bitwise_equal(a.real_data, b.real_data)
                                : (a.fmt == b.fmt && a.raw_data == b.raw_data));
    emit(args.as_json,
         json{{"record", "compare"},
              {"bit_exact", bit_exact},
              {"max_abs_diff", max_abs},
              {"mean_abs_diff", mean_abs}},
         std::string(bit_exact ? "bit-exact" : "NOT bit-exact") +
             ", max abs diff " + std::to_string(max_abs) + ", mean abs diff " +
             std::to_string(mean_abs));
    return bit_exact ? kExitOk : kExitMismatch;
}

// ------------------------------------------------------------------ shapes --
struct ShapesArgs {
    std::string model;
    bool as_json = false;
};

int run_shapes(const ShapesArgs& a) {
    LoadedModel lm = load_model_any(a.model);
    NetworkSpec& net = lm.is_float ? lm.floating.net : lm.fixed.net;
    ShapeChain chain;
    try {
        chain = resolve_shapes(net);
    } catch (const std::invalid_argument& e) {
        std::cerr << "shape chain violation: " << e.what() << "\n";
        return kExitMismatch;
    }
    for (std::size_t i = 0; i < net.nodes.size(); ++i) {
        const auto& n = net.nodes[i];
        const auto in_d = chain.dims[i];
        const auto out_d = chain.dims[i + 1];
        emit(a.as_json,
             json{{"record", "shape"},
                  {"index", i},
                  {"kind", kind_name(n.kind)},
                  {"in", {in_d.y, in_d.x, chain.channels[i]}},
                  {"out", {out_d.y, out_d.x, chain.channels[i + 1]}}},
             std::to_string(i) + ":" + kind_name(n.kind) + "  " + std::to_string(in_d.y) + "x" +
                 std::to_string(in_d.x) + "x" + std::to_string(chain.channels[i]) + " -> " +
                 std::to_string(out_d.y) + "x" + std::to_string(out_d.x) + "x" +
                 std::to_string(chain.channels[i + 1]));
    }
    emit(a.as_json, json{{"record", "shape_ok"}, {"stages", net.nodes.size()}},
         "shape chain valid through " + std::to_string(net.nodes.size()) + " stages");
    return kExitOk;
}

// -------------------------------------------------------------------- perf --
struct PerfArgs {
    std::string model;
    int units = 8;
    int ci_min = 16;
    double clock = 100.0;
    std::int64_t fill = 0, row_overhead = 0, pixel_overhead = 0;
    double bram_kbits = 0.0;
    bool as_json = false;
};

int run_perf(const PerfArgs& a) {
    LoadedModel lm = load_model_any(a.model);
    const NetworkSpec& net = lm.is_float ? lm.floating.net : lm.fixed.net;
    int act_bits = 16, w_bits = 8, b_bits = 8;
    if (!lm.is_float) {
        act_bits = lm.fixed.act_fmt.total_bits;
        w_bits = lm.fixed.params.front().weight_fmt.total_bits;
        b_bits = lm.fixed.params.front().bias_fmt.total_bits;
    }
    HwConfig cfg;
    cfg.units = a.units;
    cfg.ci_min = a.ci_min;
    cfg.clock_mhz = a.clock;
    cfg.pipeline_fill = a.fill;
    cfg.row_overhead = a.row_overhead;
    cfg.per_pixel_overhead = a.pixel_overhead;
    cfg.bram_bits = static_cast<std::int64_t>(a.bram_kbits * 1000.0);
    const PerfReport r = estimate_network(net, cfg, act_bits, w_bits, b_bits);

    if (!a.as_json)
        std::printf("%-22s %14s %14s %10s %12s %6s\n", "layer", "cycles", "ideal", "ms",
                    "weight bits", "bram");
    for (std::size_t i = 0; i < r.layers.size(); ++i) {
        const auto& lc = r.layers[i];
        const auto& f = r.footprints[i];
        if (a.as_json) {
            std::cout << json{{"record", "layer"},
                              {"name", lc.name},
                              {"macs", lc.macs},
                              {"cycles", lc.cycles},
                              {"ideal_cycles", lc.ideal_cycles},
                              {"ms", static_cast<double>(lc.cycles) / (cfg.clock_mhz * 1e3)},
                              {"itb_bits", f.itb_bits},
                              {"itwb_bits_per_unit", f.itwb_bits_per_unit},
                              {"weight_bits_total", f.weight_bits_total},
                              {"bias_bits", f.bias_bits},
                              {"out_pixel_bits", f.out_pixel_bits},
                              {"exceeds_bram", f.exceeds_bram}}
                             .dump()
                      << "\n";
        } else {
            std::printf("%-22s %14lld %14lld %10.3f %12lld %6s\n", lc.name.c_str(),
                        static_cast<long long>(lc.cycles), static_cast<long long>(lc.ideal_cycles),
                        static_cast<double>(lc.cycles) / (cfg.clock_mhz * 1e3),
                        static_cast<long long>(f.weight_bits_total),
                        f.exceeds_bram ? "OVER" : "ok");
        }
    }
    emit(a.as_json,
         json{{"record", "totals"},
              {"units", a.units},
              {"ci_min", a.ci_min},
              {"clock_mhz", a.clock},
              {"total_cycles", r.total_cycles},
              {"total_ms", r.total_ms},
              {"ideal_ms", r.ideal_ms},
              {"modeled_gops", r.modeled_gops},
              {"ideal_gops", r.ideal_gops},
              {"workload_gops", r.workload_gops}},
         "totals: " + std::to_string(r.total_cycles) + " cycles = " + std::to_string(r.total_ms) +
             " ms at " + std::to_string(a.clock) + " MHz (ideal " + std::to_string(r.ideal_ms) +
             " ms); modeled throughput " + std::to_string(r.modeled_gops) + " GOPs on a " +
             std::to_string(r.workload_gops) + " GOPs workload");
    emit(a.as_json,
         json{{"record", "reference"},
              {"note", "hardware reference point, not asserted"},
              {"conv_latency_ms", 175.0},
              {"throughput_gops", 4.43},
              {"config", "units=8 ci_min=16 clock=100MHz"}},
         "hardware reference point (units=8, ci_min=16, 100 MHz): 175 ms conv latency / 4.43 GOPs "
         "-- modeled numbers above exclude memory stalls and are a lower bound, not a prediction");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"streaming fixed-point convolution engine and v1.1 pipeline tools"};
    app.require_subcommand(1);

    InitModelArgs init_args;
    auto* init = app.add_subcommand("init-model", "write the built-in v1.1 graph as a float model");
    init->add_option("--out", init_args.out, "output SQJM path")->required();
    init->add_option("--seed", init_args.seed, "RNG seed for the random parameters");
    init->add_flag("--zero", init_args.zero, "write all-zero parameters instead of random ones");

    RandomTensorArgs rt_args;
    auto* rt = app.add_subcommand("random-tensor", "write a random real-valued SQJT tensor");
    rt->add_option("--out", rt_args.out, "output SQJT path")->required();
    rt->add_option("--y", rt_args.y, "rows");
    rt->add_option("--x", rt_args.x, "columns");
    rt->add_option("--c", rt_args.c, "channels");
    rt->add_option("--seed", rt_args.seed, "RNG seed");
    rt->add_option("--lo", rt_args.lo, "minimum value");
    rt->add_option("--hi", rt_args.hi, "maximum value");

    QuantizeArgs q_args;
    auto* q = app.add_subcommand("quantize", "quantize a float model to fixed point");
    q->add_option("--in", q_args.in, "input float SQJM")->required();
    q->add_option("--out", q_args.out, "output quantized SQJM")->required();
    q->add_option("--wfmt", q_args.wfmt, "weight/bias format total:frac (default 8:7)");
    q->add_option("--afmt", q_args.afmt, "activation format total:frac (default 16:3)");
    q->add_flag("--json", q_args.as_json, "machine-readable output");

    InferArgs i_args;
    auto* inf = app.add_subcommand("infer", "run the fixed-point pipeline on an input tensor");
    inf->add_option("--model", i_args.model, "quantized SQJM")->required();
    inf->add_option("--input", i_args.input, "input SQJT (real, or fixed to be dequantized)")
        ->required();
    inf->add_option("--out", i_args.out, "output SQJT with class probabilities")->required();
    inf->add_option("--parallel", i_args.parallel, "parallelism exponent n (2^n units)")
        ->check(CLI::Range(0, 8));
    inf->add_flag("--float-ref", i_args.float_ref, "also run the float reference pipeline");
    inf->add_option("--dump-fmaps", i_args.dump_dir, "directory for intermediate fmaps");
    inf->add_flag("--json", i_args.as_json, "machine-readable output");

    CompareArgs c_args;
    auto* cmp = app.add_subcommand("compare", "compare two SQJT tensors");
    cmp->add_option("--a", c_args.a, "first tensor")->required();
    cmp->add_option("--b", c_args.b, "second tensor")->required();
    cmp->add_flag("--json", c_args.as_json, "machine-readable output");

    ShapesArgs s_args;
    auto* sh = app.add_subcommand("shapes", "validate and print the model's shape chain");
    sh->add_option("--model", s_args.model, "SQJM model")->required();
    sh->add_flag("--json", s_args.as_json, "machine-readable output");

    PerfArgs p_args;
    auto* pf = app.add_subcommand("perf", "cycle and buffer-footprint report");
    pf->add_option("--model", p_args.model, "SQJM model")->required();
    pf->add_option("--units", p_args.units, "MAC groups (power of two, default 8)");
    pf->add_option("--ci-min", p_args.ci_min, "lanes per MAC group (default 16)");
    pf->add_option("--clock", p_args.clock, "clock in MHz (default 100)");
    pf->add_option("--fill", p_args.fill, "pipeline fill cycles per layer");
    pf->add_option("--row-overhead", p_args.row_overhead, "extra cycles per output row");
    pf->add_option("--pixel-overhead", p_args.pixel_overhead, "extra cycles per output pixel");
    pf->add_option("--bram-kbits", p_args.bram_kbits, "on-chip budget for the OVER flag");
    pf->add_flag("--json", p_args.as_json, "machine-readable output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (init->parsed()) return run_init_model(init_args);
        if (rt->parsed()) return run_random_tensor(rt_args);
        if (q->parsed()) return run_quantize(q_args);
        if (inf->parsed()) return run_infer(i_args);
        if (cmp->parsed()) return run_compare(c_args);
        if (sh->parsed()) return run_shapes(s_args);
        if (pf->parsed()) return run_perf(p_args);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const StreamUnderrun& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitUsage;
}
