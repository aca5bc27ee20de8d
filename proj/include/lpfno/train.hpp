#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lpfno/dataset.hpp"
#include "lpfno/metrics.hpp"
#include "lpfno/model.hpp"

namespace lpfno {

struct RelobraloConfig {
    Real alpha = 0.95;
    Real beta = 0.99;
    Real tau = 3.0;
    Real eps = 1e-8;
};

struct LossState {
    RelobraloConfig cfg;
    bool initialized = false;
    std::vector<Real> initial;
    std::vector<Real> previous;
    std::vector<Real> lambda;
    std::mt19937_64 rng;
};

LossState make_loss_state(const RelobraloConfig& cfg, std::uint64_t seed);
/// Step 0: records L_i(0) = L_i(t-1) = losses and sets every weight to 1.
/// Returns the plain sum.
Real relobralo_init(LossState& state, std::span<const Real> losses);

struct Aggregate {
    Real total = 0;
    std::vector<Real> weights;
};

/// One rebalance. `rho` overrides the Bernoulli(beta) lookback draw.
Aggregate relobralo_aggregate(LossState& state, std::span<const Real> losses,
                              std::optional<bool> rho = std::nullopt);

struct OptimConfig {
    Real lr = 6e-5;
    Real beta1 = 0.9;
    Real beta2 = 0.99;
    Real weight_decay = 0;
    Real clip_norm = 0.5;
    Real decay_rate = 0.98;
    std::size_t decay_steps = 100;
};

struct OptimState {
    OptimConfig cfg;
    std::vector<Real> momentum;
    std::size_t step = 0;
};

OptimState make_optim_state(const OptimConfig& cfg, std::size_t n_params);

/// lr * decay^floor(k / decay_steps).
Real scheduled_lr(const OptimConfig& cfg, std::size_t k);

/// Rescales g in place so its global norm is at most max_norm; returns the
/// norm before clipping.
Real clip_global_norm(std::span<Real> g, Real max_norm);

/// One Lion update at the scheduled learning rate for state.step, then
/// advances the step counter. sign(0) = 0.
void lion_step(std::span<Real> params, std::span<const Real> grads, OptimState& state);

struct RunConfig {
    std::size_t steps = 6000;
    std::uint64_t seed = 0;
    OptimConfig optim;
    RelobraloConfig relobralo;
    std::size_t validation_interval = 500;
    std::size_t validation_batch = 5;
};

nlohmann::json to_json(const RunConfig& r);
RunConfig run_config_from_json(const nlohmann::json& j);

struct StepRecord {
    std::size_t step = 0;
    Real loss_T = 0, loss_alpha = 0, loss_fl = 0;
    Real total = 0;
    std::vector<Real> weights;
    Real lr = 0;
    Real grad_norm = 0;
    std::string sample;
};

struct ValidationRecord {
    std::size_t step = 0;
    BundleMetrics metrics;
};

struct TrainHistory {
    std::vector<StepRecord> steps;
    std::vector<ValidationRecord> validation;

    /// One JSON object per line.
    std::string to_jsonl() const;
};

struct TrainResult {
    FnoModel model;
    TrainHistory history;
};

/// Loss of one sample with its gradient wrt the raw outputs.
struct SampleLoss {
    Real loss_T = 0, loss_alpha = 0, loss_fl = 0;
    LatentField grad_T, grad_alpha, grad_fl;  // d L_i / d raw, each (2 channels)
};

/// Training targets for a masked ground-truth bundle: normalized T, alpha, fl.
SampleLoss sample_losses(const ModelConfig& cfg, const LatentField& raw, const FieldBundle& truth);

using StepCallback = std::function<void(const StepRecord&)>;

/// Supervised loop on the given sample ids (training ids default to the
/// manifest's train split, validation ids to its validation split).
TrainResult train(const FnoModel& initial, const Dataset& data, const RunConfig& run,
                  std::optional<std::vector<std::string>> train_ids = std::nullopt,
                  std::optional<std::vector<std::string>> validation_ids = std::nullopt,
                  const StepCallback& on_step = nullptr);

/// Predictions for the given ids on the dataset grid, compared with ground truth.
std::vector<SampleMetrics> evaluate_samples(const FnoModel& model, const Dataset& data,
                                            const std::vector<std::string>& ids,
                                            std::size_t batch = 5);
BundleMetrics evaluate(const FnoModel& model, const Dataset& data,
                       const std::vector<std::string>& ids, std::size_t batch = 5);

struct FoldPlan {
    std::size_t k = 8;
    std::vector<std::vector<std::string>> test;   // per fold
    std::vector<std::vector<std::string>> train;  // per fold, complement of test
    std::vector<std::string> excluded;            // validation ids
};

/// Sorted ids, seeded shuffle, round-robin assignment. Validation samples are
/// excluded from every fold.
FoldPlan make_fold_plan(const DatasetManifest& manifest, std::size_t k, std::uint64_t seed);

struct MetricRange {
    Real mean = 0, min = 0, max = 0;
};

struct KFoldReport {
    FoldPlan plan;
    std::vector<BundleMetrics> folds;
    std::vector<SampleMetrics> samples;  // every test sample, each from its own fold
    std::vector<std::pair<std::string, MetricRange>> aggregate;

    nlohmann::json to_json() const;
};

std::vector<std::pair<std::string, MetricRange>> aggregate_folds(
    const std::vector<BundleMetrics>& folds);

/// Trains one model per fold from the same initial parameters. Folds run on
/// up to `threads` worker threads.
KFoldReport kfold(const FnoModel& initial, const Dataset& data, std::size_t k,
                  const RunConfig& run, std::size_t threads = 1);

}  // namespace lpfno
