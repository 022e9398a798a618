#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "graphmdn/data.hpp"
#include "graphmdn/mdn.hpp"
#include "graphmdn/model.hpp"

namespace graphmdn {

struct AdamState {
    std::vector<double> m, v;
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void init(std::size_t n);
};

/// Bias-corrected Adam update. Verifies the gradient is finite before
/// touching any state; a non-finite entry aborts the step with its index.
void adam_step(AdamState& state, std::vector<double>& params, std::span<const double> grads,
               double lr);

/// Rescales the gradient to `max_norm` when it exceeds it (direction is
/// preserved). Returns the pre-clip norm. max_norm <= 0 disables clipping.
double clip_gradient_norm(std::vector<double>& grads, double max_norm);

struct LrSchedule {
    enum class Kind { kOneCycle, kExponential };
    Kind kind = Kind::kOneCycle;
    std::uint64_t total_steps = 1;

    // one-cycle: cosine ramp from peak/div_factor to peak over pct_up of the
    // run, cosine anneal down to peak/final_div
    double peak_lr = 6e-3;
    double pct_up = 0.3;
    double div_factor = 25.0;
    double final_div = 1e4;

    // exponential: initial_lr * decay^epoch
    double initial_lr = 1e-3;
    double decay = 0.96;
    std::uint64_t steps_per_epoch = 1;

    std::uint64_t peak_step() const;
};

/// Learning rate at a step. Throws std::domain_error outside [0, total_steps).
double lr_at(const LrSchedule& schedule, std::uint64_t step);

struct TrainConfig {
    std::uint64_t seed = 42;
    std::size_t batch_size = 256;
    std::size_t epochs = 2;
    std::size_t kernels = 5;
    double dropout = 0.1;
    LossMode loss_mode = LossMode::kPose;
    std::size_t blocks = 4;
    std::size_t hidden_dim = 128;
    double grad_clip = 0.0; // 0 disables clipping
    // gradient responsibilities blend linearly from uniform to exact over
    // this many steps; 0 trains on exact responsibilities from the start
    std::size_t mixture_warmup_steps = 0;

    LrSchedule::Kind schedule_kind = LrSchedule::Kind::kOneCycle;
    double peak_lr = 6e-3;
    double pct_up = 0.3;
    double div_factor = 25.0;
    double final_div = 1e4;
    double initial_lr = 1e-3;
    double decay = 0.96;

    bool operator==(const TrainConfig&) const = default;

    void validate() const;
    BackboneConfig backbone() const;
    LrSchedule schedule(std::size_t train_samples) const;

    /// Strict JSON parse: unknown keys (top level or inside "schedule") are
    /// rejected, known keys override the defaults above.
    static TrainConfig from_json_text(const std::string& text, const std::string& origin);
    static TrainConfig from_json_file(const std::string& path);
    std::string to_json_text() const;
};

struct TrainLogRow {
    std::uint64_t step = 0;
    std::size_t epoch = 0;
    double lr = 0.0;
    double loss = 0.0;
};

struct TrainerState {
    AdamState adam;
    std::uint64_t global_step = 0;
    std::size_t epochs_done = 0;
};

struct FitResult {
    std::vector<TrainLogRow> log;
    std::vector<double> epoch_mean_loss;
};

/// The training loop: seeded shuffling, forward/loss/backward/Adam with the
/// configured schedule, per-epoch checkpoints. Bitwise reproducible for a
/// given (seed, config, data); all randomness is derived from the seed by
/// counter-based streams, so a resumed run replays exactly.
/// `stop_after_epoch` interrupts early (the per-epoch checkpoint still
/// reflects a valid resume point).
FitResult fit(GraphMdnModel& model, TrainerState& state, const TrainConfig& config,
              std::span<const SampleRecord> train, const std::string& checkpoint_path = "",
              const std::string& skeleton_hash = "",
              std::size_t stop_after_epoch = static_cast<std::size_t>(-1));

void write_train_log_csv(std::ostream& out, std::span<const TrainLogRow> rows);

// ---------------------------------------------------------------------------
// Checkpoints: versioned binary container with a JSON header followed by the
// raw little-endian double arrays (params, batch-norm running stats, Adam
// moments). The RNG state is the (seed, epoch, step) triple in the header;
// streams are derived from it, so nothing else is needed for exact replay.

struct Checkpoint {
    TrainConfig config;
    std::string skeleton_hash;
    std::vector<double> params;
    std::vector<double> aux;
    std::vector<double> adam_m;
    std::vector<double> adam_v;
    std::uint64_t adam_step = 0;
    std::uint64_t global_step = 0;
    std::size_t epochs_done = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint make_checkpoint(const GraphMdnModel& model, const TrainerState& state,
                           const TrainConfig& config, const std::string& skeleton_hash);

/// Builds the model for a checkpoint and restores parameters and statistics.
/// Throws DataError when the graph hash does not match.
GraphMdnModel model_from_checkpoint(const Checkpoint& ckpt, const SkeletonGraph& graph);

void restore_trainer_state(const Checkpoint& ckpt, TrainerState& state);

} // namespace graphmdn
