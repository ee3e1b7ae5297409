#include "pansharp_cli/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "pansharp/baselines.hpp"
#include "pansharp/gp_classic.hpp"
#include "pansharp/gradcheck.hpp"
#include "pansharp/metrics.hpp"

namespace pansharp::cli {

namespace fs = std::filesystem;

RunConfig default_run_config() {
    RunConfig c;
    c.network.layers = DeskDefaults::layers;
    c.network.width = DeskDefaults::width;
    c.network.ratio = DeskDefaults::ratio;
    c.network.bands = DeskDefaults::bands;
    c.train.epochs = DeskDefaults::epochs;
    return c;
}

nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j = {{"command", c.command},
            {"data", c.data},
            {"network", c.network},
            {"train",
             {{"epochs", c.train.epochs},
              {"lr", c.train.lr},
              {"batch", c.train.batch},
              {"patch", c.train.patch},
              {"seed", c.train.seed}}},
            {"normalization", kNormalizationMode},
            {"version", "0.1.0"}};
    if (c.spec) j["spec"] = spec_to_json(*c.spec);
    return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c = default_run_config();
    try {
        c.command = j.value("command", c.command);
        c.data = j.value("data", c.data);
        if (j.contains("spec")) c.spec = spec_from_json(j.at("spec"));
        if (j.contains("network")) c.network = j.at("network").get<NetworkConfig>();
        if (j.contains("train")) {
            const auto& t = j.at("train");
            c.train.epochs = t.value("epochs", c.train.epochs);
            c.train.lr = t.value("lr", c.train.lr);
            c.train.batch = t.value("batch", c.train.batch);
            c.train.patch = t.value("patch", c.train.patch);
            c.train.seed = t.value("seed", c.train.seed);
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("run config: ") + e.what());
    }
    return c;
}

RunConfig read_run_config(const fs::path& file) {
    std::ifstream f(file);
    if (!f) throw IoError("cannot open run config " + file.string());
    try {
        return run_config_from_json(nlohmann::json::parse(f));
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(file.string() + ": " + e.what());
    }
}

void write_run_config(const fs::path& file, const RunConfig& c) {
    std::ofstream f(file);
    if (!f) throw IoError("cannot write " + file.string());
    f << to_json(c).dump(2) << '\n';
}

void write_history(const fs::path& file, const std::vector<EpochReport>& history) {
    std::ofstream f(file);
    if (!f) throw IoError("cannot write " + file.string());
    f << "epoch,train_loss,val_psnr\n" << std::setprecision(17);
    for (const auto& r : history) f << r.epoch << ',' << r.train_loss << ',' << r.val_psnr << '\n';
}

void write_ppm(const fs::path& file, const Tensor<float>& image) {
    if (image.rank() != 3) throw ShapeError("write_ppm: expected [C,H,W], got " + shape_str(image.shape()));
    const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2), P = H * W;
    std::ofstream f(file, std::ios::binary);
    if (!f) throw IoError("cannot write " + file.string());
    f << "P6\n" << W << ' ' << H << "\n255\n";
    std::vector<unsigned char> px(3 * P);
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t c = 0; c < 3; ++c) {
            const float v = image[std::min(c, C - 1) * P + p];
            px[3 * p + c] = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
        }
    f.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

namespace {

const std::vector<std::string> kBaselines = {"bicubic", "ihs", "brovey", "hpf", "sfim"};

std::vector<Tensor<double>> gt_of(const std::vector<Sample>& split) {
    std::vector<Tensor<double>> out;
    for (const auto& s : split) out.push_back(s.gt.cast<double>());
    return out;
}

const std::vector<Sample>& pick_split(const Dataset& d, const std::string& name) {
    if (name == "train") return d.train;
    if (name == "val") return d.val;
    if (name == "test") return d.test;
    throw std::invalid_argument("unknown split '" + name + "' (expected train, val or test)");
}

MetricsReport evaluate_fused(const std::vector<Sample>& split, const std::vector<Tensor<double>>& fused,
                             std::size_t ratio) {
    if (split.empty()) throw std::invalid_argument("cannot evaluate an empty split");
    return evaluate_set(gt_of(split), fused, static_cast<double>(ratio));
}

MetricsReport evaluate_network(const NetworkWeights<float>& w, const std::vector<Sample>& split) {
    std::vector<Tensor<double>> fused;
    for (const auto& s : split) fused.push_back(fuse_network(w, s.lrms, s.pan).cast<double>());
    return evaluate_fused(split, fused, w.config.ratio);
}

MetricsReport evaluate_baseline(const std::string& method, const Dataset& d, const std::vector<Sample>& split) {
    std::vector<Tensor<double>> fused;
    for (const auto& s : split) fused.push_back(run_baseline(method, s.lrms, s.pan, d.spec.ratio).image.cast<double>());
    return evaluate_fused(split, fused, d.spec.ratio);
}

void print_metrics_header(std::ostream& out) {
    out << std::left << std::setw(20) << "method" << std::setw(10) << "PSNR" << std::setw(10) << "SSIM"
        << std::setw(10) << "SAM" << "ERGAS\n";
}

void print_metrics_row(std::ostream& out, const std::string& name, const MetricsReport& m) {
    out << std::left << std::setw(20) << name << std::setw(10) << format_metric(m.psnr) << std::setw(10)
        << format_metric(m.ssim) << std::setw(10) << format_metric(m.sam) << format_metric(m.ergas) << '\n';
}

std::string metrics_csv(const MetricsReport& m) {
    return format_metric(m.psnr) + ',' + format_metric(m.ssim) + ',' + format_metric(m.sam) + ',' +
           format_metric(m.ergas);
}

std::vector<std::size_t> parse_list(const std::string& s, const char* what) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const unsigned long v = std::stoul(item, &used);
            if (used != item.size() || v == 0) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw std::invalid_argument(std::string(what) + ": '" + item + "' is not a positive integer");
        }
    }
    if (out.empty()) throw std::invalid_argument(std::string(what) + " list is empty");
    return out;
}

// Flags shared by train, ablate and sweep. Values land in `cfg`; a --config
// file is applied first and explicitly given flags override it.
struct TrainFlags {
    RunConfig cfg = default_run_config();
    std::string config_file;
    std::string ablation = "none";
    CLI::Option* layers = nullptr;
    CLI::Option* width = nullptr;
    CLI::Option* k_lr = nullptr;
    CLI::Option* epochs = nullptr;
    CLI::Option* lr = nullptr;
    CLI::Option* batch = nullptr;
    CLI::Option* patch = nullptr;
    CLI::Option* seed = nullptr;
    CLI::Option* shuffle_seed = nullptr;
    CLI::Option* data = nullptr;
    CLI::Option* ablation_opt = nullptr;

    void add(CLI::App* app, bool with_structure) {
        data = app->add_option("--data", cfg.data, "Dataset directory written by synth");
        app->add_option("--config", config_file, "Rerun from a run.json; explicit flags override it");
        if (with_structure) {
            layers = app->add_option("--layers,-K", cfg.network.layers, "Unrolled layers K")->capture_default_str();
            width = app->add_option("--width,-C", cfg.network.width, "Hidden channels C")->capture_default_str();
        }
        k_lr = app->add_option("--k-lr", cfg.network.k_lr, "Kernel size of the MS-block and prox convs")
                   ->capture_default_str();
        epochs = app->add_option("--epochs", cfg.train.epochs, "Training epochs")->capture_default_str();
        lr = app->add_option("--lr", cfg.train.lr, "Adam learning rate")->capture_default_str();
        batch = app->add_option("--batch", cfg.train.batch, "Minibatch size")->capture_default_str();
        patch = app->add_option("--patch", cfg.train.patch, "Ground-truth patch side")->capture_default_str();
        seed = app->add_option("--seed", cfg.network.seed, "Weight initialization seed")->capture_default_str();
        shuffle_seed = app->add_option("--shuffle-seed", cfg.train.seed, "Minibatch shuffling seed")
                           ->capture_default_str();
    }

    void add_ablation(CLI::App* app) {
        ablation_opt = app->add_option("--ablation", ablation, "none, no_prox, shared_weights, fused_block, "
                                                               "transposed_kernels")
                           ->capture_default_str();
    }

    RunConfig resolve() const {
        RunConfig r = cfg;
        if (!config_file.empty()) {
            r = read_run_config(config_file);
            auto take = [](CLI::Option* o, auto& dst, const auto& src) {
                if (o && o->count() > 0) dst = src;
            };
            take(data, r.data, cfg.data);
            take(layers, r.network.layers, cfg.network.layers);
            take(width, r.network.width, cfg.network.width);
            take(k_lr, r.network.k_lr, cfg.network.k_lr);
            take(epochs, r.train.epochs, cfg.train.epochs);
            take(lr, r.train.lr, cfg.train.lr);
            take(batch, r.train.batch, cfg.train.batch);
            take(patch, r.train.patch, cfg.train.patch);
            take(seed, r.network.seed, cfg.network.seed);
            take(shuffle_seed, r.train.seed, cfg.train.seed);
            if (ablation_opt && ablation_opt->count() > 0) r.network.ablation = ablation_from_string(ablation);
        } else if (ablation_opt) {
            r.network.ablation = ablation_from_string(ablation);
        }
        if (r.data.empty()) throw std::invalid_argument("--data is required (directly or through --config)");
        return r;
    }
};

Dataset load_for(RunConfig& cfg) {
    Dataset d = read_dataset(cfg.data);
    if (cfg.spec && (spec_to_json(*cfg.spec) != spec_to_json(d.spec)))
        throw std::invalid_argument("dataset " + cfg.data + " was generated with a different degradation than the run config");
    cfg.spec = d.spec;
    cfg.network.ratio = d.spec.ratio;
    cfg.network.bands = d.spec.bands();
    cfg.network.validate();
    return d;
}

TrainResult train_and_save(const Dataset& d, const RunConfig& cfg, const fs::path& out_dir, std::ostream& out) {
    fs::create_directories(out_dir);
    write_run_config(out_dir / "run.json", cfg);
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult res = train(d, cfg.network, cfg.train, [&](const EpochReport& r) {
        const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out << "epoch " << std::setw(3) << r.epoch << "  loss " << std::fixed << std::setprecision(5) << r.train_loss
            << "  val PSNR " << format_metric(r.val_psnr) << "  (" << std::setprecision(1) << t << " s)\n"
            << std::defaultfloat << std::flush;
    });
    write_history(out_dir / "history.csv", res.history);
    save_checkpoint((out_dir / "checkpoint").string(), res.best);
    out << "best epoch " << res.best_epoch << "; checkpoint in " << (out_dir / "checkpoint").string() << '\n';
    return res;
}

// ---- commands --------------------------------------------------------------

struct SynthArgs {
    std::string out;
    std::size_t n_train = DeskDefaults::n_train, n_val = DeskDefaults::n_val, n_test = DeskDefaults::n_test;
    std::size_t size = DeskDefaults::size, ratio = DeskDefaults::ratio, bands = DeskDefaults::bands;
    std::uint64_t seed = DeskDefaults::data_seed;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    const auto spec = default_spec(a.bands, a.ratio);
    const auto t0 = std::chrono::steady_clock::now();
    const Dataset d = synthesize_dataset(a.n_train, a.n_val, a.n_test, a.size, spec, a.seed);
    write_dataset(a.out, d);
    out << "wrote " << a.n_train << '/' << a.n_val << '/' << a.n_test << " scenes of " << a.size << 'x' << a.size
        << " (ratio " << a.ratio << ", " << a.bands << " bands) to " << a.out << " in " << std::fixed
        << std::setprecision(1) << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
        << " s\n"
        << std::defaultfloat;
    return kOk;
}

int cmd_train(const TrainFlags& f, const std::string& out_dir, std::ostream& out) {
    RunConfig cfg = f.resolve();
    cfg.command = "train";
    const Dataset d = load_for(cfg);
    const TrainResult res = train_and_save(d, cfg, out_dir, out);
    if (!d.test.empty()) {
        print_metrics_header(out);
        print_metrics_row(out, "gppnn (test)", evaluate_network(res.best, d.test));
    }
    return kOk;
}

struct EvalArgs {
    std::string data, checkpoint, method, split = "test", csv;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    const Dataset d = read_dataset(a.data);
    const auto& split = pick_split(d, a.split);
    std::vector<std::pair<std::string, MetricsReport>> rows;
    if (!a.checkpoint.empty()) {
        const auto w = load_checkpoint(a.checkpoint);
        if (w.config.ratio != d.spec.ratio || w.config.bands != d.spec.bands())
            throw std::invalid_argument("checkpoint ratio/bands do not match the dataset");
        rows.emplace_back("gppnn", evaluate_network(w, split));
    }
    if (!a.method.empty()) {
        if (a.method == "all")
            for (const auto& m : kBaselines) rows.emplace_back(m, evaluate_baseline(m, d, split));
        else if (a.method == "gt")
            rows.emplace_back("gt", evaluate_fused(split, gt_of(split), d.spec.ratio));
        else
            rows.emplace_back(a.method, evaluate_baseline(a.method, d, split));
    }
    if (rows.empty()) throw std::invalid_argument("give --checkpoint and/or --method");
    print_metrics_header(out);
    for (const auto& [name, m] : rows) print_metrics_row(out, name, m);
    if (!a.csv.empty()) {
        std::ofstream f(a.csv);
        if (!f) throw IoError("cannot write " + a.csv);
        f << "method,psnr,ssim,sam,ergas\n";
        for (const auto& [name, m] : rows) f << name << ',' << metrics_csv(m) << '\n';
    }
    return kOk;
}

struct FuseArgs {
    std::string lrms, pan, method, checkpoint, spec, out, preview, trace, gt;
    std::size_t ratio = 0;
    double rho = 0.5;
    std::size_t iterations = 50;
    std::string prox = "identity";
};

int cmd_fuse(const FuseArgs& a, std::ostream& out) {
    const Tensor<float> lrms = load_ten(a.lrms), pan = load_ten(a.pan);
    if (lrms.rank() != 3 || pan.rank() != 3 || pan.dim(0) != 1 || lrms.dim(1) == 0 || pan.dim(1) % lrms.dim(1) != 0)
        throw ShapeError("fuse: LRMS " + shape_str(lrms.shape()) + " and PAN " + shape_str(pan.shape()) +
                         " are not an MS/PAN pair");
    const std::size_t ratio = a.ratio ? a.ratio : pan.dim(1) / lrms.dim(1);
    const auto t0 = std::chrono::steady_clock::now();
    Tensor<float> fused;
    if (a.method == "gppnn") {
        if (a.checkpoint.empty()) throw std::invalid_argument("--method gppnn needs --checkpoint");
        fused = fuse_network(load_checkpoint(a.checkpoint), lrms, pan);
    } else if (a.method == "gp") {
        GPConfig cfg;
        cfg.rho = a.rho;
        cfg.iterations = a.iterations;
        if (a.prox == "identity")
            cfg.prox = Prox::identity;
        else if (a.prox == "nonneg")
            cfg.prox = Prox::nonneg_clip;
        else
            throw std::invalid_argument("--prox must be identity or nonneg");
        if (!a.spec.empty()) {
            std::ifstream f(a.spec);
            if (!f) throw IoError("cannot open " + a.spec);
            try {
                cfg.spec = spec_from_json(nlohmann::json::parse(f));
            } catch (const nlohmann::json::parse_error& e) {
                throw IoError(a.spec + ": " + e.what());
            }
        } else {
            cfg.spec = default_spec(lrms.dim(0), ratio);
        }
        const auto res = solve(lrms.cast<double>(), pan.cast<double>(), cfg);
        fused = res.image.cast<float>();
        for (float& v : fused.data()) v = std::clamp(v, 0.0f, 1.0f);
        if (!a.trace.empty()) {
            std::ofstream f(a.trace);
            if (!f) throw IoError("cannot write " + a.trace);
            f << "iteration,f,g\n" << std::setprecision(17);
            for (std::size_t i = 0; i < res.f_trace.size(); ++i)
                f << i << ',' << res.f_trace[i] << ',' << res.g_trace[i] << '\n';
        }
    } else {
        fused = run_baseline(a.method, lrms, pan, ratio).image;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    save_ten(a.out, fused);
    if (!a.preview.empty()) write_ppm(a.preview, fused);
    out << a.method << ": " << shape_str(fused.shape()) << " -> " << a.out << " (" << std::fixed
        << std::setprecision(3) << secs << " s)\n"
        << std::defaultfloat;
    if (!a.gt.empty()) {
        const auto m = evaluate(fused.cast<double>(), load_ten(a.gt).cast<double>(), static_cast<double>(ratio));
        print_metrics_header(out);
        print_metrics_row(out, a.method, m);
    }
    return kOk;
}

// Row names of the ablation table: the full model, then configurations I-IV.
std::string ablation_row_label(Ablation a) {
    switch (a) {
        case Ablation::none: return "full";
        case Ablation::no_prox: return "I";
        case Ablation::shared_weights: return "II";
        case Ablation::fused_block: return "III";
        case Ablation::transposed_kernels: return "IV";
    }
    return "?";
}

int cmd_ablate(const TrainFlags& f, const std::string& out_dir, const std::string& variants, std::ostream& out) {
    RunConfig base = f.resolve();
    base.command = "ablate";
    const Dataset d = load_for(base);
    std::vector<Ablation> list;
    if (variants == "all") {
        list = {Ablation::none, Ablation::no_prox, Ablation::shared_weights, Ablation::fused_block,
                Ablation::transposed_kernels};
    } else {
        std::stringstream ss(variants);
        std::string item;
        while (std::getline(ss, item, ',')) list.push_back(ablation_from_string(item));
    }
    fs::create_directories(out_dir);
    std::ofstream csv(fs::path(out_dir) / "ablation.csv");
    if (!csv) throw IoError("cannot write " + (fs::path(out_dir) / "ablation.csv").string());
    csv << "row,variant,parameters,best_epoch,val_psnr,test_psnr,test_ssim,test_sam,test_ergas\n";
    std::vector<std::pair<std::string, MetricsReport>> rows;
    for (Ablation a : list) {
        RunConfig cfg = base;
        cfg.network.ablation = a;
        out << "== " << to_string(a) << " ==\n";
        const TrainResult res = train_and_save(d, cfg, fs::path(out_dir) / to_string(a), out);
        const MetricsReport m = d.test.empty() ? MetricsReport{} : evaluate_network(res.best, d.test);
        csv << ablation_row_label(a) << ',' << to_string(a) << ',' << res.best.parameter_count() << ',' << res.best_epoch << ','
            << format_metric(res.history[res.best_epoch - 1].val_psnr) << ',' << metrics_csv(m) << '\n';
        rows.emplace_back(ablation_row_label(a) + " " + to_string(a), m);
    }
    print_metrics_header(out);
    for (const auto& [name, m] : rows) print_metrics_row(out, name, m);
    return kOk;
}

int cmd_sweep(const TrainFlags& f, const std::string& out_dir, const std::string& layers, const std::string& widths,
              std::ostream& out) {
    RunConfig base = f.resolve();
    base.command = "sweep";
    const Dataset d = load_for(base);
    const auto ks = parse_list(layers, "--layers");
    const auto cs = parse_list(widths, "--width");
    fs::create_directories(out_dir);
    std::ofstream csv(fs::path(out_dir) / "sweep.csv");
    if (!csv) throw IoError("cannot write " + (fs::path(out_dir) / "sweep.csv").string());
    csv << "layers,width,parameters,best_epoch,val_psnr,test_psnr\n";
    double best_val = -std::numeric_limits<double>::infinity();
    std::string best_name;
    for (std::size_t k : ks)
        for (std::size_t c : cs) {
            RunConfig cfg = base;
            cfg.network.layers = k;
            cfg.network.width = c;
            const std::string name = "K" + std::to_string(k) + "_C" + std::to_string(c);
            out << "== " << name << " ==\n";
            const TrainResult res = train_and_save(d, cfg, fs::path(out_dir) / name, out);
            const double test = d.test.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_psnr(res.best, d.test);
            const double val = res.history[res.best_epoch - 1].val_psnr;
            csv << k << ',' << c << ',' << res.best.parameter_count() << ',' << res.best_epoch << ','
                << format_metric(val) << ',' << format_metric(test) << '\n';
            if (val > best_val) {
                best_val = val;
                best_name = name;
            }
        }
    out << "best validation PSNR " << format_metric(best_val) << " at " << best_name << "\n";
    out << "results in " << (fs::path(out_dir) / "sweep.csv").string() << '\n';
    return kOk;
}

int cmd_gradcheck(std::uint64_t seed, std::ostream& out) {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    out << std::left << std::setw(28) << "check" << std::setw(14) << "max rel err" << std::setw(10) << "tol"
        << "result\n";
    for (const auto& r : gradcheck_suite(seed)) {
        char err[32], tol[32];
        std::snprintf(err, sizeof err, "%.3e", r.max_rel_error);
        std::snprintf(tol, sizeof tol, "%.0e", r.tolerance);
        out << std::left << std::setw(28) << r.name << std::setw(14) << err << std::setw(10) << tol
            << (r.passed ? "pass" : "FAIL") << '\n';
        ok = ok && r.passed;
    }
    out << "runtime " << std::fixed << std::setprecision(2)
        << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n"
        << std::defaultfloat;
    return ok ? kOk : kNumeric;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Pan-sharpening with classical baselines, gradient projection and the unrolled GPPNN network"};
    app.name("pansharp");
    app.require_subcommand(1);
    app.set_version_flag("--version", "0.1.0");

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic Wald-protocol dataset");
    s->add_option("--out,-o", synth.out, "Output directory")->required();
    s->add_option("--train", synth.n_train, "Training scenes")->capture_default_str();
    s->add_option("--val", synth.n_val, "Validation scenes")->capture_default_str();
    s->add_option("--test", synth.n_test, "Test scenes")->capture_default_str();
    s->add_option("--size", synth.size, "Ground-truth side in pixels")->capture_default_str();
    s->add_option("--ratio,-r", synth.ratio, "Resolution ratio")->capture_default_str();
    s->add_option("--bands,-B", synth.bands, "Multispectral bands")->capture_default_str();
    s->add_option("--seed", synth.seed, "Scene seed")->capture_default_str();

    TrainFlags train_flags;
    std::string train_out;
    auto* t = app.add_subcommand("train", "Train GPPNN; writes run.json, history.csv and checkpoint/");
    train_flags.add(t, true);
    train_flags.add_ablation(t);
    t->add_option("--out,-o", train_out, "Output directory")->required();

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "PSNR/SSIM/SAM/ERGAS of a checkpoint or baseline on a split");
    e->add_option("--data", ev.data, "Dataset directory")->required();
    e->add_option("--checkpoint", ev.checkpoint, "GPPNN checkpoint directory");
    e->add_option("--method", ev.method, "bicubic, ihs, brovey, hpf, sfim, all, or gt (reference against itself)");
    e->add_option("--split", ev.split, "train, val or test")->capture_default_str();
    e->add_option("--csv", ev.csv, "Also write the table as CSV");

    FuseArgs fu;
    auto* f = app.add_subcommand("fuse", "Fuse one LRMS/PAN pair of .ten files");
    f->add_option("--lrms", fu.lrms, "LRMS [B,m,n]")->required();
    f->add_option("--pan", fu.pan, "PAN [1,M,N]")->required();
    f->add_option("--method", fu.method, "bicubic, ihs, brovey, hpf, sfim, gp or gppnn")->required();
    f->add_option("--out,-o", fu.out, "Fused image (.ten)")->required();
    f->add_option("--checkpoint", fu.checkpoint, "Checkpoint for gppnn");
    f->add_option("--spec", fu.spec, "spec.json with the degradation for gp (default Gaussian blur, uniform S)");
    f->add_option("--ratio,-r", fu.ratio, "Resolution ratio (default PAN/LRMS size)");
    f->add_option("--rho", fu.rho, "gp step size")->capture_default_str();
    f->add_option("--iterations", fu.iterations, "gp rounds")->capture_default_str();
    f->add_option("--prox", fu.prox, "gp prox: identity or nonneg")->capture_default_str();
    f->add_option("--trace", fu.trace, "gp fidelity trace CSV");
    f->add_option("--preview", fu.preview, "PPM preview of the first three bands");
    f->add_option("--gt", fu.gt, "Ground truth (.ten) to score against");

    TrainFlags ablate_flags;
    std::string ablate_out, variants = "all";
    auto* a = app.add_subcommand("ablate", "Train ablation variants under one budget");
    ablate_flags.add(a, true);
    a->add_option("--out,-o", ablate_out, "Output directory")->required();
    a->add_option("--variants", variants, "Comma-separated ablations or all")->capture_default_str();

    TrainFlags sweep_flags;
    std::string sweep_out, sweep_layers = "2,4,8", sweep_widths = "8,16,32";
    auto* w = app.add_subcommand("sweep", "Train every (K, C) combination and compare validation PSNR");
    sweep_flags.add(w, false);
    sweep_flags.add_ablation(w);
    w->add_option("--out,-o", sweep_out, "Output directory")->required();
    w->add_option("--layers,-K", sweep_layers, "Comma-separated K values")->capture_default_str();
    w->add_option("--width,-C", sweep_widths, "Comma-separated C values")->capture_default_str();

    std::uint64_t gc_seed = 7;
    auto* g = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
    g->add_option("--seed", gc_seed, "Seed for the random evaluation points")->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? kOk : kIoOrConfig;
    }

    try {
        if (s->parsed()) return cmd_synth(synth, out);
        if (t->parsed()) return cmd_train(train_flags, train_out, out);
        if (e->parsed()) return cmd_eval(ev, out);
        if (f->parsed()) return cmd_fuse(fu, out);
        if (a->parsed()) return cmd_ablate(ablate_flags, ablate_out, variants, out);
        if (w->parsed()) return cmd_sweep(sweep_flags, sweep_out, sweep_layers, sweep_widths, out);
        if (g->parsed()) return cmd_gradcheck(gc_seed, out);
    } catch (const NumericError& ex) {
        err << "numeric error: " << ex.what() << '\n';
        return kNumeric;
    } catch (const IoError& ex) {
        err << "i/o error: " << ex.what() << '\n';
        return kIoOrConfig;
    } catch (const fs::filesystem_error& ex) {
        err << "i/o error: " << ex.what() << '\n';
        return kIoOrConfig;
    } catch (const std::invalid_argument& ex) {
        err << "configuration error: " << ex.what() << '\n';
        return kIoOrConfig;
    }
    return kIoOrConfig;
}

}  // namespace pansharp::cli
