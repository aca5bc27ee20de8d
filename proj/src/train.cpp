#include "lpfno/train.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace lpfno {

using nlohmann::json;

namespace {

Real uniform01(std::mt19937_64& rng) { return static_cast<Real>(rng() >> 11) * 0x1.0p-53; }

// Fisher-Yates with an explicit index draw so the order does not depend on
// the standard library's distribution implementation.
template <class T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<Real>(i));
        std::swap(v[i - 1], v[std::min(j, i - 1)]);
    }
}

std::vector<Real> balance(std::span<const Real> now, std::span<const Real> ref, Real tau, Real eps) {
    const std::size_t n = now.size();
    std::vector<Real> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = now[i] / (tau * ref[i] + eps);
    const Real zmax = *std::max_element(z.begin(), z.end());
    Real sum = 0;
    for (Real& v : z) sum += (v = std::exp(v - zmax));
    for (Real& v : z) v *= static_cast<Real>(n) / sum;
    return z;
}

}  // namespace

LossState make_loss_state(const RelobraloConfig& cfg, std::uint64_t seed) {
    LossState s;
    s.cfg = cfg;
    s.rng.seed(seed);
    return s;
}

Real relobralo_init(LossState& state, std::span<const Real> losses) {
    require(!losses.empty(), Errc::invalid_argument, "no objectives");
    state.initial.assign(losses.begin(), losses.end());
    state.previous = state.initial;
    state.lambda.assign(losses.size(), Real{1});
    state.initialized = true;
    return std::accumulate(losses.begin(), losses.end(), Real{0});
}

Aggregate relobralo_aggregate(LossState& state, std::span<const Real> losses,
                              std::optional<bool> rho) {
    require(state.initialized, Errc::uninitialized, "loss balancer used before initialization");
    require(losses.size() == state.lambda.size(), Errc::length_mismatch,
            "objective count changed");
    const auto& c = state.cfg;
    const auto from_start = balance(losses, state.initial, c.tau, c.eps);
    const auto from_prev = balance(losses, state.previous, c.tau, c.eps);
    const bool lookback = rho.value_or(uniform01(state.rng) < c.beta);
    const Real r = lookback ? 1 : 0;
    Aggregate out;
    out.weights.resize(losses.size());
    for (std::size_t i = 0; i < losses.size(); ++i) {
        const Real lam = c.alpha * (r * state.lambda[i] + (1 - r) * from_start[i]) +
                         (1 - c.alpha) * from_prev[i];
        out.weights[i] = lam;
        out.total += lam * losses[i];
    }
    state.lambda = out.weights;
    state.previous.assign(losses.begin(), losses.end());
    return out;
}

OptimState make_optim_state(const OptimConfig& cfg, std::size_t n_params) {
    return OptimState{cfg, std::vector<Real>(n_params, Real{0}), 0};
}

Real scheduled_lr(const OptimConfig& cfg, std::size_t k) {
    return cfg.lr * std::pow(cfg.decay_rate, static_cast<Real>(k / cfg.decay_steps));
}

Real clip_global_norm(std::span<Real> g, Real max_norm) {
    Real n2 = 0;
    for (Real v : g) n2 += v * v;
    const Real norm = std::sqrt(n2);
    if (norm > max_norm) {
        const Real s = max_norm / norm;
        for (Real& v : g) v *= s;
    }
    return norm;
}

void lion_step(std::span<Real> params, std::span<const Real> grads, OptimState& state) {
    require(params.size() == grads.size() && state.momentum.size() == params.size(),
            Errc::shape_mismatch, "optimizer state does not match parameters");
    const auto& c = state.cfg;
    const Real lr = scheduled_lr(c, state.step);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Real u = c.beta1 * state.momentum[i] + (1 - c.beta1) * grads[i];
        const Real sign = u > 0 ? 1 : (u < 0 ? -1 : 0);
        params[i] -= lr * (sign + c.weight_decay * params[i]);
        state.momentum[i] = c.beta2 * state.momentum[i] + (1 - c.beta2) * grads[i];
    }
    ++state.step;
}

json to_json(const RunConfig& r) {
    return {{"steps", r.steps},
            {"seed", r.seed},
            {"optim",
             {{"lr", r.optim.lr},
              {"beta1", r.optim.beta1},
              {"beta2", r.optim.beta2},
              {"weight_decay", r.optim.weight_decay},
              {"clip_norm", r.optim.clip_norm},
              {"decay_rate", r.optim.decay_rate},
              {"decay_steps", r.optim.decay_steps}}},
            {"relobralo",
             {{"alpha", r.relobralo.alpha},
              {"beta", r.relobralo.beta},
              {"tau", r.relobralo.tau},
              {"eps", r.relobralo.eps}}},
            {"validation_interval", r.validation_interval},
            {"validation_batch", r.validation_batch}};
}

RunConfig run_config_from_json(const json& j) {
    RunConfig r;
    try {
        r.steps = j.value("steps", r.steps);
        r.seed = j.value("seed", r.seed);
        if (j.contains("optim")) {
            const auto& o = j.at("optim");
            r.optim.lr = o.value("lr", r.optim.lr);
            r.optim.beta1 = o.value("beta1", r.optim.beta1);
            r.optim.beta2 = o.value("beta2", r.optim.beta2);
            r.optim.weight_decay = o.value("weight_decay", r.optim.weight_decay);
            r.optim.clip_norm = o.value("clip_norm", r.optim.clip_norm);
            r.optim.decay_rate = o.value("decay_rate", r.optim.decay_rate);
            r.optim.decay_steps = o.value("decay_steps", r.optim.decay_steps);
        }
        if (j.contains("relobralo")) {
            const auto& b = j.at("relobralo");
            r.relobralo.alpha = b.value("alpha", r.relobralo.alpha);
            r.relobralo.beta = b.value("beta", r.relobralo.beta);
            r.relobralo.tau = b.value("tau", r.relobralo.tau);
            r.relobralo.eps = b.value("eps", r.relobralo.eps);
        }
        r.validation_interval = j.value("validation_interval", r.validation_interval);
        r.validation_batch = j.value("validation_batch", r.validation_batch);
    } catch (const json::exception& e) {
        fail(Errc::invalid_argument, std::string("run config: ") + e.what());
    }
    require(r.optim.decay_steps > 0 && r.optim.clip_norm > 0 && r.optim.lr > 0,
            Errc::invalid_argument, "invalid optimizer settings");
    return r;
}

std::string TrainHistory::to_jsonl() const {
    std::ostringstream out;
    for (const auto& s : steps)
        out << json{{"step", s.step},
                    {"sample", s.sample},
                    {"loss_T", s.loss_T},
                    {"loss_alpha", s.loss_alpha},
                    {"loss_fl", s.loss_fl},
                    {"total", s.total},
                    {"weights", s.weights},
                    {"lr", s.lr},
                    {"grad_norm", s.grad_norm}}
                   .dump()
            << '\n';
    for (const auto& v : validation)
        out << json{{"step", v.step}, {"validation", to_json(v.metrics)}}.dump() << '\n';
    return out.str();
}

SampleLoss sample_losses(const ModelConfig& cfg, const LatentField& raw, const FieldBundle& truth) {
    require(raw.shape == truth.grid().shape && raw.channels == 2, Errc::shape_mismatch,
            "network output does not match ground truth");
    const std::size_t n = raw.points();
    const Real inv_n = 1 / static_cast<Real>(n);
    const Real t_ref = cfg.scales.T_ref;
    SampleLoss s;
    s.grad_T = LatentField(raw.shape, 2);
    s.grad_alpha = LatentField(raw.shape, 2);
    s.grad_fl = LatentField(raw.shape, 2);
    auto t_hat = raw.channel(0);
    auto a_hat = raw.channel(1);
    auto gT = s.grad_T.channel(0);
    auto gA = s.grad_alpha.channel(1);
    auto gF = s.grad_fl.channel(0);
    for (std::size_t i = 0; i < n; ++i) {
        const Real dT = t_hat[i] - truth.T[i] / t_ref;
        s.loss_T += dT * dT;
        gT[i] = 2 * dT * inv_n;

        const Real dA = a_hat[i] - truth.alpha[i];
        s.loss_alpha += dA * dA;
        gA[i] = 2 * dA * inv_n;

        const Real metal = is_metal(truth.alpha[i]) ? 1 : 0;
        const Real T = t_hat[i] * t_ref;
        const Real dF = liquid_fraction(T, cfg.material) * metal - truth.fl[i];
        s.loss_fl += dF * dF;
        gF[i] = 2 * dF * inv_n * liquid_fraction_slope(T, cfg.material) * t_ref * metal;
    }
    s.loss_T *= inv_n;
    s.loss_alpha *= inv_n;
    s.loss_fl *= inv_n;
    return s;
}

namespace {

TrainedWindow window_of(const DatasetManifest& m, const std::vector<std::string>& ids) {
    TrainedWindow w;
    w.known = true;
    w.power_w = {std::numeric_limits<Real>::max(), std::numeric_limits<Real>::lowest()};
    w.v_scan_m_s = w.power_w;
    w.h_star = w.power_w;
    for (const auto& id : ids) {
        const auto& p = m.find(id).params;
        w.power_w = {std::min(w.power_w[0], p.power_w), std::max(w.power_w[1], p.power_w)};
        w.v_scan_m_s = {std::min(w.v_scan_m_s[0], p.v_scan_m_s),
                        std::max(w.v_scan_m_s[1], p.v_scan_m_s)};
        w.h_star = {std::min(w.h_star[0], p.h_star), std::max(w.h_star[1], p.h_star)};
    }
    return w;
}

}  // namespace

TrainResult train(const FnoModel& initial, const Dataset& data, const RunConfig& run,
                  std::optional<std::vector<std::string>> train_ids,
                  std::optional<std::vector<std::string>> validation_ids,
                  const StepCallback& on_step) {
    const auto& manifest = data.manifest();
    std::vector<std::string> ids = train_ids ? *train_ids : manifest.ids(Split::train);
    const std::vector<std::string> val_ids =
        validation_ids ? *validation_ids : manifest.ids(Split::validation);
    require(!ids.empty(), Errc::invalid_argument, "training split is empty");
    require(manifest.grid.shape == initial.config.train_grid.shape, Errc::shape_mismatch,
            "dataset grid does not match the model's training grid");
    std::sort(ids.begin(), ids.end());

    TrainResult result{initial, {}};
    FnoModel& model = result.model;
    model.window = window_of(manifest, ids);
    model.provenance = fingerprint(to_json(manifest).dump() + to_json(run).dump() +
                                   to_json(initial.config).dump());
    if (run.steps == 0) return result;

    struct Prepared {
        std::string id;
        LatentField inputs;
        FieldBundle truth;
    };
    std::vector<Prepared> samples;
    samples.reserve(ids.size());
    for (const auto& id : ids)
        samples.push_back({id, assemble_inputs(model.config, manifest.find(id).params, manifest.grid),
                           data.load(id)});

    std::mt19937_64 order_rng(run.seed);
    std::vector<std::size_t> order(samples.size());
    LossState balance = make_loss_state(run.relobralo, run.seed ^ 0x9e3779b97f4a7c15ULL);
    OptimState optim = make_optim_state(run.optim, model.params.size());
    ParamGrads grads(model.params);

    for (std::size_t k = 0; k < run.steps; ++k) {
        if (k % samples.size() == 0) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            seeded_shuffle(order, order_rng);
        }
        const Prepared& s = samples[order[k % samples.size()]];
        grads.zero();
        GradTape tape(model.params, &grads);
        Var out = forward(tape, model, s.inputs, model.config.padding);
        SampleLoss sl = sample_losses(model.config, out->value, s.truth);
        const std::array<Real, 3> losses{sl.loss_T, sl.loss_alpha, sl.loss_fl};

        StepRecord rec;
        rec.step = k;
        rec.sample = s.id;
        rec.loss_T = sl.loss_T;
        rec.loss_alpha = sl.loss_alpha;
        rec.loss_fl = sl.loss_fl;
        if (!balance.initialized) {
            rec.total = relobralo_init(balance, losses);
            rec.weights = balance.lambda;
        } else {
            auto agg = relobralo_aggregate(balance, losses);
            rec.total = agg.total;
            rec.weights = agg.weights;
        }
        if (!std::isfinite(rec.total))
            fail(Errc::divergence, "training diverged at step " + std::to_string(k) +
                                       " on sample " + s.id + ": L_T=" +
                                       std::to_string(sl.loss_T) + " L_alpha=" +
                                       std::to_string(sl.loss_alpha) + " L_fl=" +
                                       std::to_string(sl.loss_fl));

        LatentField seed(out->value.shape, 2);
        for (std::size_t i = 0; i < seed.values.size(); ++i)
            seed.values[i] = rec.weights[0] * sl.grad_T.values[i] +
                             rec.weights[1] * sl.grad_alpha.values[i] +
                             rec.weights[2] * sl.grad_fl.values[i];
        tape.backward(out, std::move(seed));

        rec.grad_norm = clip_global_norm(grads.flat, run.optim.clip_norm);
        rec.lr = scheduled_lr(run.optim, optim.step);
        lion_step(model.params.flat(), grads.flat, optim);
        if (on_step) on_step(rec);
        result.history.steps.push_back(std::move(rec));

        const bool last = k + 1 == run.steps;
        if (!val_ids.empty() && run.validation_interval > 0 &&
            ((k + 1) % run.validation_interval == 0 || last))
            result.history.validation.push_back(
                {k + 1, evaluate(model, data, val_ids, run.validation_batch)});
    }
    return result;
}

std::vector<SampleMetrics> evaluate_samples(const FnoModel& model, const Dataset& data,
                                            const std::vector<std::string>& ids,
                                            std::size_t batch) {
    require(batch >= 1, Errc::invalid_argument, "batch size must be positive");
    std::vector<SampleMetrics> out;
    out.reserve(ids.size());
    const Grid3& grid = data.manifest().grid;
    for (std::size_t first = 0; first < ids.size(); first += batch) {
        const std::size_t last = std::min(ids.size(), first + batch);
        for (std::size_t i = first; i < last; ++i) {
            const auto& entry = data.manifest().find(ids[i]);
            FieldBundle pred = infer(model, entry.params, grid);
            FieldBundle truth = data.load(ids[i]);
            out.push_back({ids[i], entry.params, evaluate_bundles({pred}, {truth})});
        }
    }
    return out;
}

BundleMetrics evaluate(const FnoModel& model, const Dataset& data,
                       const std::vector<std::string>& ids, std::size_t batch) {
    require(!ids.empty(), Errc::invalid_argument, "evaluation over an empty sample set");
    std::vector<FieldBundle> preds, truths;
    const Grid3& grid = data.manifest().grid;
    for (std::size_t first = 0; first < ids.size(); first += batch) {
        const std::size_t last = std::min(ids.size(), first + batch);
        for (std::size_t i = first; i < last; ++i) {
            preds.push_back(infer(model, data.manifest().find(ids[i]).params, grid));
            truths.push_back(data.load(ids[i]));
        }
    }
    return evaluate_bundles(preds, truths);
}

FoldPlan make_fold_plan(const DatasetManifest& manifest, std::size_t k, std::uint64_t seed) {
    require(k >= 2, Errc::invalid_argument, "k-fold needs k >= 2");
    std::vector<std::string> ids;
    FoldPlan plan;
    plan.k = k;
    for (const auto& s : manifest.samples)
        (s.split == Split::validation ? plan.excluded : ids).push_back(s.id);
    require(ids.size() >= k, Errc::invalid_argument,
            "k-fold needs at least " + std::to_string(k) + " non-validation samples, have " +
                std::to_string(ids.size()));
    std::sort(ids.begin(), ids.end());
    std::sort(plan.excluded.begin(), plan.excluded.end());
    std::mt19937_64 rng(seed);
    seeded_shuffle(ids, rng);
    plan.test.assign(k, {});
    for (std::size_t i = 0; i < ids.size(); ++i) plan.test[i % k].push_back(ids[i]);
    plan.train.assign(k, {});
    for (std::size_t f = 0; f < k; ++f) {
        std::sort(plan.test[f].begin(), plan.test[f].end());
        for (std::size_t g = 0; g < k; ++g)
            if (g != f) plan.train[f].insert(plan.train[f].end(), plan.test[g].begin(),
                                             plan.test[g].end());
        std::sort(plan.train[f].begin(), plan.train[f].end());
    }
    return plan;
}

std::vector<std::pair<std::string, MetricRange>> aggregate_folds(
    const std::vector<BundleMetrics>& folds) {
    require(!folds.empty(), Errc::invalid_argument, "no folds to aggregate");
    std::vector<std::pair<std::string, MetricRange>> out;
    for (const auto& [name, v0] : flatten(folds.front())) {
        (void)v0;
        MetricRange r{0, std::numeric_limits<Real>::max(), std::numeric_limits<Real>::lowest()};
        for (const auto& f : folds)
            for (const auto& [n, v] : flatten(f))
                if (n == name) {
                    r.mean += v;
                    r.min = std::min(r.min, v);
                    r.max = std::max(r.max, v);
                }
        r.mean /= static_cast<Real>(folds.size());
        out.emplace_back(name, r);
    }
    return out;
}

KFoldReport kfold(const FnoModel& initial, const Dataset& data, std::size_t k,
                  const RunConfig& run, std::size_t threads) {
    KFoldReport report;
    report.plan = make_fold_plan(data.manifest(), k, run.seed);
    report.folds.resize(k);
    std::vector<std::vector<SampleMetrics>> per_fold(k);
    std::vector<std::exception_ptr> errors(k);
    std::mutex mu;
    std::size_t next = 0;
    auto worker = [&] {
        for (;;) {
            std::size_t f;
            {
                std::lock_guard lock(mu);
                if (next >= k) return;
                f = next++;
            }
            try {
                auto trained = train(initial, data, run, report.plan.train[f],
                                     std::vector<std::string>{});
                per_fold[f] = evaluate_samples(trained.model, data, report.plan.test[f],
                                               run.validation_batch);
                report.folds[f] = evaluate(trained.model, data, report.plan.test[f],
                                           run.validation_batch);
            } catch (...) {
                errors[f] = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(threads, k));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    for (auto& v : per_fold) report.samples.insert(report.samples.end(), v.begin(), v.end());
    report.aggregate = aggregate_folds(report.folds);
    return report;
}

json KFoldReport::to_json() const {
    json folds_j = json::array();
    for (std::size_t f = 0; f < folds.size(); ++f)
        folds_j.push_back({{"fold", f},
                           {"test_ids", plan.test[f]},
                           {"train_size", plan.train[f].size()},
                           {"metrics", lpfno::to_json(folds[f])}});
    json agg = json::object();
    for (const auto& [name, r] : aggregate)
        agg[name] = {{"mean", r.mean}, {"min", r.min}, {"max", r.max}};
    return {{"k", plan.k}, {"excluded", plan.excluded}, {"folds", folds_j}, {"aggregate", agg}};
}

}  // namespace lpfno
