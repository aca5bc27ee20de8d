#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lpfno/model.hpp"
#include "lpfno/oracle.hpp"
#include "lpfno/service.hpp"
#include "lpfno/train.hpp"

using namespace lpfno;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

bool g_json = false;

// Prints `j` on stdout in --json mode, otherwise the human-readable text.
void emit(const json& j, const std::string& text) {
    if (g_json)
        std::cout << j.dump(2) << "\n";
    else
        std::cout << text;
}

std::string strf(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct Range {
    Real lo = 0, hi = 0;
    std::size_t n = 2;
};

// "lo:hi:n" or "lo:hi" (n fixed at 2).
Range parse_range(const std::string& s) {
    Range r;
    char c1 = 0, c2 = 0;
    std::istringstream in(s);
    in >> r.lo >> c1 >> r.hi;
    if (!in || c1 != ':') fail(Errc::invalid_argument, "range '" + s + "' must be lo:hi[:n]");
    if (in >> c2) {
        if (c2 != ':' || !(in >> r.n)) fail(Errc::invalid_argument, "range '" + s + "' must be lo:hi[:n]");
    }
    return r;
}

struct GridOptions {
    std::vector<long> shape;
    Real dx = 0;

    void add(CLI::App* app, const std::string& what) {
        app->add_option("--grid", shape, what + " cell counts nx ny nz")->expected(3);
        app->add_option("--dx", dx, what + " spacing in meters");
    }
    Grid3 resolve(const Grid3& fallback) const {
        const Real d = dx > 0 ? dx : fallback.dx;
        if (shape.empty()) return make_grid(long(fallback.nx()), long(fallback.ny()), long(fallback.nz()), d);
        return make_grid(shape[0], shape[1], shape[2], d);
    }
};

struct ModelOptions {
    std::vector<int> modes;
    std::size_t width = 0;
    std::size_t padding = 0;
    bool padding_set = false;
    std::uint64_t seed = 0;

    void add(CLI::App* app) {
        app->add_option("--modes", modes, "retained Fourier modes per axis")->expected(3);
        app->add_option("--width", width, "latent channel width");
        app->add_option("--padding", padding, "zero padding in training-grid cells")
            ->each([this](const std::string&) { padding_set = true; });
        app->add_option("--model-seed", seed, "parameter initialization seed");
    }
    ModelConfig resolve(const Grid3& train_grid) const {
        ModelConfig c;
        c.train_grid = train_grid;
        if (!modes.empty()) c.modes = {modes[0], modes[1], modes[2]};
        if (width > 0) c.latent_width = width;
        if (padding_set) c.padding = padding;
        return c;
    }
};

struct RunOptions {
    std::size_t steps = 0;
    std::uint64_t seed = 0;
    Real lr = 0;
    std::size_t validation_interval = 0;
    bool interval_set = false;

    void add(CLI::App* app) {
        app->add_option("--steps", steps, "optimizer steps");
        app->add_option("--seed", seed, "sampling and weighting seed");
        app->add_option("--lr", lr, "base learning rate");
        app->add_option("--validation-interval", validation_interval, "steps between validation passes (0 disables)")
            ->each([this](const std::string&) { interval_set = true; });
    }
    RunConfig resolve() const {
        RunConfig r;
        if (steps > 0) r.steps = steps;
        r.seed = seed;
        if (lr > 0) r.optim.lr = lr;
        if (interval_set) r.validation_interval = validation_interval;
        return r;
    }
};

std::vector<std::string> ids_for(const DatasetManifest& m, const std::string& split) {
    if (split == "all") {
        std::vector<std::string> ids;
        for (const auto& s : m.samples) ids.push_back(s.id);
        return ids;
    }
    return m.ids(split_from_string(split));
}

std::string metrics_text(const BundleMetrics& m) {
    std::string s;
    for (const auto& [name, v] : flatten(m)) s += strf("  %-14s %.6g\n", name.c_str(), v);
    return s;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    out << text;
    require(bool(out), Errc::io, "cannot write " + path.string());
}

template <class F>
std::vector<double> timed(F&& f, int reps) {
    std::vector<double> t;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = Clock::now();
        f();
        t.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
    }
    std::sort(t.begin(), t.end());
    return t;
}

// ---------------------------------------------------------------------------

struct PlanCmd {
    std::string p = "40:190:6", h = "2:9:8", v = "0.1:2";
    std::uint64_t seed = 0;
    std::string out;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("plan", "build a (P, H*) sampling plan");
        c->set_help_flag("--help", "print this help message and exit");
        c->add_option("--p", p, "power lattice lo:hi:n in W");
        c->add_option("--h", h, "normalized enthalpy lattice lo:hi:n");
        c->add_option("--v", v, "admissible scan speed lo:hi in m/s");
        c->add_option("--seed", seed, "tie-break seed for validation picks");
        c->add_option("-o,--out", out, "write the plan JSON here");
        c->callback([this] { run(); });
    }
    void run() const {
        const Range pr = parse_range(p), hr = parse_range(h), vr = parse_range(v);
        const SamplingPlan plan =
            build_plan({pr.lo, pr.hi}, {hr.lo, hr.hi}, pr.n, hr.n, {vr.lo, vr.hi}, SplitRule{seed});
        const json j = to_json(plan);
        if (!out.empty()) write_text(out, j.dump(2));
        std::size_t counts[3] = {0, 0, 0};
        for (const auto& pt : plan.points) ++counts[int(pt.split)];
        if (g_json || out.empty())
            std::cout << j.dump(2) << "\n";
        else
            std::cout << strf("%zu points (%zu train, %zu validation, %zu test), %zu excluded -> %s\n",
                              plan.points.size(), counts[0], counts[1], counts[2],
                              plan.excluded.size(), out.c_str());
    }
};

struct GenCmd {
    std::string plan_path, out;
    GridOptions grid;
    bool sequences = false;
    Real duration = 0;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("gen", "generate an oracle dataset from a plan");
        c->add_option("--plan", plan_path, "plan JSON from `lpfno plan`")->required();
        c->add_option("-o,--out", out, "dataset directory")->required();
        grid.add(c, "dataset grid");
        c->add_flag("--sequences", sequences, "write lab-frame transient sweeps for `lpfno prep` instead");
        c->add_option("--duration", duration, "sweep duration in s (default: travel of half the domain)");
        c->callback([this] { run(); });
    }
    void run() const {
        std::ifstream in(plan_path);
        require(bool(in), Errc::io, "cannot read " + plan_path);
        const SamplingPlan plan = plan_from_json(json::parse(in));
        OracleConfig oc;
        oc.material = plan.material;
        oc.grid = grid.resolve(oc.grid);
        const auto t0 = Clock::now();
        if (sequences) {
            for (const auto& pt : plan.points) {
                SweepConfig sw;
                sw.cadence_s = oc.grid.dx / pt.params.v_scan_m_s / 2;
                sw.duration_s = duration > 0 ? duration
                                             : 0.5 * oc.grid.extents()[0] / pt.params.v_scan_m_s;
                write_sequence(transient_sweep(pt.params, oc, sw), pt.params, oc.material,
                               fs::path(out) / pt.id);
            }
            const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
            emit({{"sequences", out}, {"count", plan.points.size()}, {"seconds", secs}},
                 strf("%zu sequences -> %s (%.1f s)\n", plan.points.size(), out.c_str(), secs));
            return;
        }
        const DatasetManifest m = generate_dataset(plan, oc, out);
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        emit({{"dataset", out}, {"samples", m.samples.size()}, {"grid", to_json(m.grid)}, {"seconds", secs}},
             strf("%zu samples on %zux%zux%zu @ %.3g m -> %s (%.1f s)\n", m.samples.size(),
                  m.grid.nx(), m.grid.ny(), m.grid.nz(), m.grid.dx, out.c_str(), secs));
    }
};

struct PrepCmd {
    std::vector<std::string> inputs;
    std::vector<std::string> validation, test;
    std::string out;
    std::size_t window = kDefaultWindow;
    Real threshold = 1.0;
    bool require_steady = false;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("prep", "reduce transient sequences to a quasi-steady dataset");
        c->add_option("inputs", inputs, "sequence directories (manifest.json + .f32 frames)")->required();
        c->add_option("-o,--out", out, "dataset directory")->required();
        c->add_option("--window", window, "frames averaged in the laser frame");
        c->add_option("--threshold", threshold, "steadiness threshold in K");
        c->add_option("--validation", validation, "ids assigned to the validation split");
        c->add_option("--test", test, "ids assigned to the test split");
        c->add_flag("--require-steady", require_steady, "fail if a sequence has not settled");
        c->callback([this] { run(); });
    }
    void run() const {
        const fs::path dest(out);
        const fs::path partial = dest.string() + ".partial";
        fs::remove_all(partial);
        fs::create_directories(partial);
        DatasetManifest m;
        m.provenance = "prep";
        json report = json::array();
        std::string text;
        try {
            for (const auto& in : inputs) {
                const StoredSequence s = read_sequence(in);
                const auto q = reduce_quasi_steady(s.sequence, s.params.v_scan_m_s, window, threshold);
                const std::string id = fs::path(in).filename().string();
                require(!require_steady || q.steady, Errc::invalid_argument,
                        "sequence " + id + " has not reached a quasi-steady state");
                if (m.samples.empty()) {
                    m.grid = q.bundle.T.grid();
                    m.material = s.material;
                } else {
                    require(m.grid == q.bundle.T.grid(), Errc::invalid_argument,
                            "sequence " + id + " uses a different grid");
                }
                Split split = Split::train;
                if (std::ranges::find(validation, id) != validation.end()) split = Split::validation;
                if (std::ranges::find(test, id) != test.end()) split = Split::test;
                SampleEntry e = write_bundle(q.bundle, partial, id, s.params, split);
                const Real last = q.averaged_curve.empty()
                                      ? (q.raw_curve.empty() ? 0 : q.raw_curve.back().second)
                                      : q.averaged_curve.back().second;
                report.push_back({{"id", id}, {"split", to_string(e.split)}, {"steady", q.steady},
                                  {"last_change_K", last}});
                text += strf("%-24s %-10s steady=%s last change %.3g K\n", id.c_str(),
                             to_string(e.split).c_str(), q.steady ? "yes" : "no", last);
                m.samples.push_back(std::move(e));
            }
            require(!m.samples.empty(), Errc::invalid_argument, "no sequences given");
            save_manifest(m, partial);
            fs::remove_all(dest);
            fs::rename(partial, dest);
        } catch (...) {
            fs::remove_all(partial);
            throw;
        }
        emit({{"dataset", out}, {"samples", report}}, text);
    }
};

struct TrainCmd {
    std::string data, out, history;
    std::string init;
    ModelOptions model;
    RunOptions run_opts;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("train", "train a model on a dataset");
        c->add_option("--data", data, "dataset directory")->required();
        c->add_option("-o,--out", out, "checkpoint directory")->required();
        c->add_option("--init", init, "start from this checkpoint instead of a fresh model");
        c->add_option("--history", history, "write per-step history as JSON lines");
        model.add(c);
        run_opts.add(c);
        c->callback([this] { run(); });
    }
    void run() const {
        const Dataset ds(data);
        const FnoModel initial =
            init.empty() ? build_model(model.resolve(ds.manifest().grid), model.seed) : load_checkpoint(init);
        const RunConfig rc = run_opts.resolve();
        const auto t0 = Clock::now();
        const TrainResult r = train(initial, ds, rc, std::nullopt, std::nullopt, [&](const StepRecord& s) {
            if (s.step % 100 == 0 || s.step + 1 == rc.steps)
                std::cerr << strf("step %5zu  total %.4e  T %.3e  alpha %.3e  fl %.3e  lr %.3e\n",
                                  s.step, s.total, s.loss_T, s.loss_alpha, s.loss_fl, s.lr);
        });
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        save_checkpoint(r.model, out);
        if (!history.empty()) write_text(history, r.history.to_jsonl());
        json j{{"checkpoint", out}, {"steps", rc.steps}, {"seconds", secs},
               {"parameters", r.model.parameter_count()}};
        std::string text = strf("trained %zu steps in %.1f s -> %s\n", rc.steps, secs, out.c_str());
        if (!r.history.validation.empty()) {
            j["validation"] = to_json(r.history.validation.back().metrics);
            text += "final validation:\n" + metrics_text(r.history.validation.back().metrics);
        }
        emit(j, text);
    }
};

struct KfoldCmd {
    std::string data, out;
    std::size_t k = 8, threads = 1;
    ModelOptions model;
    RunOptions run_opts;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("kfold", "k-fold cross-validation on a dataset");
        c->add_option("--data", data, "dataset directory")->required();
        c->add_option("--k", k, "number of folds");
        c->add_option("--threads", threads, "folds trained concurrently");
        c->add_option("-o,--out", out, "write the report JSON here");
        model.add(c);
        run_opts.add(c);
        c->callback([this] { run(); });
    }
    void run() const {
        const Dataset ds(data);
        const FnoModel initial = build_model(model.resolve(ds.manifest().grid), model.seed);
        const KFoldReport rep = kfold(initial, ds, k, run_opts.resolve(), threads);
        const json j = rep.to_json();
        if (!out.empty()) write_text(out, j.dump(2));
        std::string text;
        for (std::size_t f = 0; f < rep.folds.size(); ++f)
            text += strf("fold %zu (%zu test): T rel RMSE %.4f  fl IoU %.4f  alpha IoU %.4f\n", f,
                         rep.plan.test[f].size(), rep.folds[f].T.rel_rmse, rep.folds[f].fl.iou,
                         rep.folds[f].alpha.iou);
        text += "aggregate (mean [min, max]):\n";
        for (const auto& [name, r] : rep.aggregate)
            text += strf("  %-14s %.6g [%.6g, %.6g]\n", name.c_str(), r.mean, r.min, r.max);
        emit(j, text);
    }
};

struct EvalCmd {
    std::string model_dir, data, split = "test", csv;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("eval", "metrics and process map for a checkpoint");
        c->add_option("--model", model_dir, "checkpoint directory")->required();
        c->add_option("--data", data, "dataset directory")->required();
        c->add_option("--split", split, "train, validation, test or all");
        c->add_option("--csv", csv, "write the per-sample process map CSV here");
        c->callback([this] { run(); });
    }
    void run() const {
        const FnoModel model = load_checkpoint(model_dir);
        const Dataset ds(data);
        const auto ids = ids_for(ds.manifest(), split);
        const auto samples = evaluate_samples(model, ds, ids);
        const auto rows = process_map(samples);
        if (!csv.empty()) write_text(csv, process_map_csv(rows));
        const BundleMetrics m = evaluate(model, ds, ids);
        emit({{"split", split}, {"samples", ids.size()}, {"metrics", to_json(m)}, {"process_map", to_json(rows)}},
             strf("%zu %s samples\n", ids.size(), split.c_str()) + metrics_text(m));
    }
};

struct SuperresCmd {
    std::string model_dir, reference, split = "all";

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("superres", "evaluate on a finer reference dataset");
        c->add_option("--model", model_dir, "checkpoint directory")->required();
        c->add_option("--reference", reference, "dataset on the target grid")->required();
        c->add_option("--split", split, "train, validation, test or all");
        c->callback([this] { run(); });
    }
    void run() const {
        const FnoModel model = load_checkpoint(model_dir);
        const Dataset ds(reference);
        const Grid3 grid = ds.manifest().grid;
        std::vector<FieldBundle> preds, truth;
        for (const auto& id : ids_for(ds.manifest(), split)) {
            preds.push_back(infer_superresolved(model, ds.manifest().find(id).params, grid));
            truth.push_back(ds.load(id));
        }
        require(!preds.empty(), Errc::invalid_argument, "no samples in split " + split);
        const BundleMetrics m = evaluate_bundles(preds, truth);
        emit({{"grid", to_json(grid)}, {"samples", preds.size()}, {"metrics", to_json(m)}},
             strf("%zu samples on %zux%zux%zu @ %.3g m\n", preds.size(), grid.nx(), grid.ny(),
                  grid.nz(), grid.dx) +
                 metrics_text(m));
    }
};

struct InferCmd {
    std::string model_dir, out;
    Real power = 0, speed = 0;
    GridOptions grid;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("infer", "predict fields for one process point");
        c->add_option("--model", model_dir, "checkpoint directory")->required();
        c->add_option("--p", power, "laser power in W")->required();
        c->add_option("--v", speed, "scan speed in m/s")->required();
        c->add_option("-o,--out", out, "write T, alpha and fl as .f32 arrays here");
        grid.add(c, "output grid");
        c->callback([this] { run(); });
    }
    void run() const {
        const FnoModel model = load_checkpoint(model_dir);
        const ProcessParams p = make_process_params(power, speed, model.config.material);
        const Grid3 g = grid.resolve(model.config.train_grid);
        const auto t0 = Clock::now();
        const FieldBundle b = infer(model, p, g);
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        if (!out.empty()) {
            fs::create_directories(out);
            write_f32(fs::path(out) / "T.f32", b.T.values());
            write_f32(fs::path(out) / "alpha.f32", b.alpha.values());
            write_f32(fs::path(out) / "fl.f32", b.fl.values());
            write_text(fs::path(out) / "grid.json", to_json(g).dump(2));
        }
        const MeltPoolSummary s = summarize_meltpool(b);
        const bool extrapolation = !model.window.contains(p);
        emit({{"power_w", power}, {"v_scan_m_s", speed}, {"h_star", p.h_star}, {"grid", to_json(g)},
              {"extrapolation", extrapolation}, {"meltpool", to_json(s)}, {"seconds", secs}},
             strf("H* %.3f%s\nmelt pool: %zu cells, length %.1f um, width %.1f um, depth %.1f um, max T %.0f K\n"
                  "inference %.3f s\n",
                  p.h_star, extrapolation ? " (outside the trained window)" : "", s.cells,
                  1e6 * s.extent_m[0], 1e6 * s.extent_m[1], 1e6 * s.extent_m[2], s.max_T, secs));
    }
};

struct ServeCmd {
    std::string model_dir, process_map_csv_path, bind;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("serve", "serve /v1 over HTTP");
        c->add_option("--model", model_dir, "checkpoint directory")->required();
        c->add_option("--process-map", process_map_csv_path, "CSV from `lpfno eval --csv`");
        c->add_option("--bind", bind, "host:port (default from LPFNO_BIND or 127.0.0.1:8080)");
        c->callback([this] { run(); });
    }
    void run() const {
        std::optional<fs::path> map;
        if (!process_map_csv_path.empty()) map = process_map_csv_path;
        SurrogateService service(model_dir, map);
        auto [host, port] = bind_address_from_env();
        if (!bind.empty()) {
            const auto colon = bind.rfind(':');
            require(colon != std::string::npos, Errc::invalid_argument, "--bind must be host:port");
            host = bind.substr(0, colon);
            port = std::stoi(bind.substr(colon + 1));
        }
        std::cerr << "serving /v1 on " << host << ":" << port << "\n";
        serve(service, host, port);
    }
};

struct BenchCmd {
    std::string model_dir;
    ModelOptions model;
    int reps = 5;
    Real power = 150, speed = 0.542;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("bench", "coarse and fine inference wall-clock");
        c->add_option("--model", model_dir, "checkpoint directory (default: untrained model)");
        c->add_option("--reps", reps, "timed repetitions per entry");
        c->add_option("--p", power, "laser power in W");
        c->add_option("--v", speed, "scan speed in m/s");
        model.add(c);
        c->callback([this] { run(); });
    }
    void run() const {
        require(reps > 0, Errc::invalid_argument, "--reps must be positive");
        const FnoModel m = model_dir.empty() ? build_model(model.resolve(ModelConfig{}.train_grid), model.seed)
                                             : load_checkpoint(model_dir);
        const Grid3 coarse = m.config.train_grid;
        const Grid3 fine = make_grid(long(2 * coarse.nx()), long(2 * coarse.ny()), long(2 * coarse.nz()),
                                     coarse.dx / 2);
        const ProcessParams p = make_process_params(power, speed, m.config.material);
        OracleConfig oc;
        oc.material = m.config.material;
        oc.grid = coarse;
        infer(m, p, coarse);
        const auto tc = timed([&] { infer(m, p, coarse); }, reps);
        const auto tf = timed([&] { infer(m, p, fine); }, reps);
        const auto to = timed([&] { generate_sample(p, oc); }, reps);
        const double c = tc[tc.size() / 2], f = tf[tf.size() / 2], o = to[to.size() / 2];
        const json j{{"coarse", {{"grid", to_json(coarse)}, {"median_s", c}}},
                     {"fine", {{"grid", to_json(fine)}, {"median_s", f}}},
                     {"fine_over_coarse", f / c},
                     {"oracle", {{"median_s", o}}},
                     {"oracle_over_coarse", o / c},
                     {"parameters", m.parameter_count()},
                     {"reps", reps}};
        emit(j, strf("%-8s %-16s %12s\n", "entry", "grid", "median s") +
                    strf("%-8s %-16s %12.4f\n", "coarse",
                         strf("%zux%zux%zu", coarse.nx(), coarse.ny(), coarse.nz()).c_str(), c) +
                    strf("%-8s %-16s %12.4f\n", "fine", strf("%zux%zux%zu", fine.nx(), fine.ny(), fine.nz()).c_str(), f) +
                    strf("%-8s %-16s %12.4f\n", "oracle", "coarse", o) +
                    strf("fine/coarse %.2fx, oracle/coarse %.3gx\n", f / c, o / c));
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LP-FNO melt-pool surrogate"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_flag("--json", g_json, "machine-readable JSON on stdout");

    PlanCmd plan;
    GenCmd gen;
    PrepCmd prep;
    TrainCmd train_cmd;
    KfoldCmd kfold_cmd;
    EvalCmd eval;
    SuperresCmd superres;
    InferCmd infer_cmd;
    ServeCmd serve_cmd;
    BenchCmd bench;
    plan.add(app);
    gen.add(app);
    prep.add(app);
    train_cmd.add(app);
    kfold_cmd.add(app);
    eval.add(app);
    superres.add(app);
    infer_cmd.add(app);
    serve_cmd.add(app);
    bench.add(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "lpfno: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
