// Acceptance suite: every release gate runs here, one PASS/FAIL line per
// criterion, pinned tolerances. Heavy criteria print their wall time.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "graphmdn/data.hpp"
#include "graphmdn/evaluation.hpp"
#include "graphmdn/gradcheck.hpp"
#include "graphmdn/mdn.hpp"
#include "graphmdn/model.hpp"
#include "graphmdn/training.hpp"
#include "oracle_helpers.hpp"

using namespace graphmdn;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

const SkeletonGraph& toy_graph() {
    static const SkeletonGraph g(4, {{0, 1}, {1, 2}, {1, 3}});
    return g;
}

// ---------------------------------------------------------------------------
// 1. Gradient fidelity: end-to-end finite differences on the toy graph,
//    both loss modes, ten seeds, eps = 1e-5, max relative error < 1e-4.

void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::string worst_where;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        for (const LossMode mode : {LossMode::kNode, LossMode::kPose}) {
            BackboneConfig config{2, 8, 2, 0.0};
            GraphMdnModel model(toy_graph(), config);
            model.init_params(Rng(seed).stream(rng_streams::kWeightInit));

            const int n = 3;
            Rng data_rng = Rng(seed).stream(99);
            Matrix x(n * 4, 2), y(n, 12);
            for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = data_rng.uniform(-1, 1);
            for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] = data_rng.uniform(-1, 1);

            Matrix dlogits;
            const Matrix logits = model.forward(x, n, true);
            mixture_batch_nll(logits, n, 4, 2, y, mode, &dlogits);
            const std::vector<double> analytic = model.backward(dlogits);

            auto loss_fn = [&](std::span<const double> params) {
                model.param_values().assign(params.begin(), params.end());
                const Matrix lg = model.forward(x, n, true);
                return mixture_batch_nll(lg, n, 4, 2, y, mode, nullptr);
            };
            const std::vector<double> params = model.param_values();
            const GradCheckReport rep = grad_check(loss_fn, params, analytic, 1e-5);
            if (rep.max_rel_error > worst) {
                worst = rep.max_rel_error;
                worst_where = fmt("seed %llu, %s loss", (unsigned long long)seed,
                                  mode == LossMode::kNode ? "node" : "pose");
            }
        }
    }
    const double secs = seconds_since(t0);
    report(1, worst < 1e-4 && secs < 60.0,
           fmt("gradient fidelity: max relative error %.3g (< 1e-4) across 10 seeds x 2 "
               "losses, worst at %s, %.1fs (< 60s)",
               worst, worst_where.c_str(), secs));
}

// ---------------------------------------------------------------------------
// 2. Loss-oracle equivalence: log-space losses against direct long-double
//    density evaluation, 1000 random instances per mode, 1e-8 relative.

void criterion_2() {
    Rng rng(202);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 1 + rng.uniform_int(8);
        const std::size_t m = 1 + rng.uniform_int(5);
        Matrix logits(k, 5 * m);
        for (std::size_t i = 0; i < logits.size(); ++i) logits.data()[i] = rng.uniform(-1.5, 1.5);
        std::vector<double> y(3 * k);
        for (double& v : y) v = rng.uniform(-1, 1);

        const NodeMixture nmix = node_mixture_from_logits(logits, m);
        const PoseMixture pmix = pose_mixture_from_logits(logits, m);
        const double node_ref = static_cast<double>(gmdn_test::ref_node_nll(nmix, y));
        const double pose_ref = static_cast<double>(gmdn_test::ref_pose_nll(pmix, y));
        const double node_act = node_nll(logits, y, m);
        const double pose_act = pose_nll(logits, y, m);
        worst = std::max(worst, std::abs(node_act - node_ref) / std::max(1.0, std::abs(node_ref)));
        worst = std::max(worst, std::abs(pose_act - pose_ref) / std::max(1.0, std::abs(pose_ref)));
    }
    report(2, worst < 1e-8,
           fmt("loss-oracle equivalence: max relative deviation %.3g (< 1e-8) on 1000 "
               "random instances, both losses",
               worst));
}

// ---------------------------------------------------------------------------
// 3. Degenerate closed form: one kernel, unit scale, target at the mean,
//    K = 16 gives 24 ln(2 pi) for both losses within 1e-9.

void criterion_3() {
    const double expected = 24.0 * std::log(2.0 * M_PI);
    Matrix logits(16, 5); // all zero: mu = 0, pi = 1, sigma = 1
    const std::vector<double> y(48, 0.0);
    const double node = node_nll(logits, y, 1);
    const double pose = pose_nll(logits, y, 1);
    const double dev = std::max(std::abs(node - expected), std::abs(pose - expected));
    report(3, dev < 1e-9,
           fmt("degenerate closed form: node %.10f, pose %.10f vs 24 ln(2 pi) = %.10f "
               "(deviation %.2g < 1e-9)",
               node, pose, expected, dev));
}

// ---------------------------------------------------------------------------
// 4. Selection dominance: oracle <= highest with zero violations over 1000
//    random hypothesis sets; p-mpjpe <= mpjpe within 1e-9 per sample.

void criterion_4() {
    Rng rng(404);
    int oracle_violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t m = 1 + rng.uniform_int(8);
        HypothesisSet h;
        h.id = "t";
        h.mu = Matrix(m, 48);
        for (std::size_t i = 0; i < h.mu.size(); ++i) h.mu.data()[i] = rng.uniform(-1, 1);
        h.pi.resize(m);
        double total = 0.0;
        for (double& p : h.pi) total += (p = rng.uniform(0.01, 1.0));
        for (double& p : h.pi) p /= total;
        std::vector<double> gt(48);
        for (double& v : gt) v = rng.uniform(-1, 1);
        if (mpjpe(select_oracle(h, gt), gt) > mpjpe(select_highest(h), gt)) ++oracle_violations;
    }

    int align_violations = 0;
    double worst_gap = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> pred(48), gt(48);
        for (double& v : pred) v = rng.uniform(-1, 1);
        for (double& v : gt) v = rng.uniform(-1, 1);
        const double p1 = mpjpe(pred, gt);
        const double p2 = p_mpjpe(pred, gt);
        worst_gap = std::max(worst_gap, p2 - p1);
        if (p2 > p1 + 1e-9) ++align_violations;
    }
    report(4, oracle_violations == 0 && align_violations == 0,
           fmt("selection dominance: oracle <= highest with %d violations, p-mpjpe <= mpjpe "
               "with %d violations (worst gap %.2g) over 1000 samples each",
               oracle_violations, align_violations, worst_gap));
}

// ---------------------------------------------------------------------------
// 5 & 6. Multimodality on the mirror corpus. One training recipe shared by
//    every kernel count; criteria read different slices of the results.

struct MirrorRun {
    double oracle_mm = 0.0;
    double depth_ratio = 0.0; // mean |z_pred| / mean |z_true| on ambiguous joints
};

MirrorRun train_mirror(const Dataset& data, std::size_t kernels) {
    const std::vector<SampleRecord> train = data.train_split();
    const std::vector<SampleRecord> test = data.test_split();

    TrainConfig cfg;
    cfg.seed = 1;
    cfg.batch_size = 64;
    cfg.epochs = 15;
    cfg.kernels = kernels;
    cfg.dropout = 0.25;
    cfg.blocks = 1;
    cfg.hidden_dim = 32;
    cfg.mixture_warmup_steps = 320;

    GraphMdnModel model(data.graph, cfg.backbone());
    model.init_params(Rng(cfg.seed).stream(rng_streams::kWeightInit));
    TrainerState state;
    state.adam.init(model.param_values().size());
    fit(model, state, cfg, train);

    MirrorRun run;
    const std::size_t k = data.graph.node_count();
    const auto& limbs = mirror_limbs();
    const std::size_t ambiguous = data.manifest.generator->ambiguous_limbs;
    double zpred = 0.0, ztrue = 0.0;
    Matrix x(k, 2);
    for (const SampleRecord& rec : test) {
        for (std::size_t i = 0; i < k; ++i) {
            x(i, 0) = rec.input2d[2 * i];
            x(i, 1) = rec.input2d[2 * i + 1];
        }
        const PoseMixture mix = pose_mixture_from_logits(model.infer(x, 1), kernels);
        const HypothesisSet hyp = hypotheses_from_mixture(rec.id, mix);
        run.oracle_mm += mpjpe(denormalize_target(select_oracle(hyp, rec.target3d), data.manifest),
                               denormalize_target(rec.target3d, data.manifest));
        const std::vector<double> highest = select_highest(hyp);
        for (std::size_t l = 0; l < ambiguous; ++l) {
            for (std::size_t joint : limbs[l]) {
                zpred += std::abs(highest[3 * joint + 2]);
                ztrue += std::abs(rec.target3d[3 * joint + 2]);
            }
        }
    }
    run.oracle_mm /= static_cast<double>(test.size());
    run.depth_ratio = zpred / ztrue;
    return run;
}

void criteria_5_and_6() {
    SynthSpec spec;
    spec.kind = SynthSpec::Kind::kMirrorSkeleton;
    spec.count = 11000; // 10k train / 1k test under the subject interleave
    spec.noise = 0.01;
    spec.ambiguous_limbs = 2;
    spec.seed = 9;
    const Dataset data = synth_dataset(spec);

    const auto t5 = std::chrono::steady_clock::now();
    const MirrorRun m1 = train_mirror(data, 1);
    const MirrorRun m4 = train_mirror(data, 4);
    const double secs5 = seconds_since(t5);

    const bool oracle_halved = m4.oracle_mm < 0.5 * m1.oracle_mm;
    const bool depth_collapsed = m1.depth_ratio < 0.1;
    report(5, oracle_halved && depth_collapsed && secs5 < 600.0,
           fmt("multimodality: oracle M=4 %.1f mm < 0.5 x M=1 %.1f mm (ratio %.2f); "
               "M=1 ambiguous-depth ratio %.3f (< 0.1); %.0fs (< 600s)",
               m4.oracle_mm, m1.oracle_mm, m4.oracle_mm / m1.oracle_mm, m1.depth_ratio, secs5));

    const MirrorRun m2 = train_mirror(data, 2);
    const MirrorRun m8 = train_mirror(data, 8);
    const bool chain = m2.oracle_mm <= m1.oracle_mm * 1.02 &&
                       m4.oracle_mm <= m2.oracle_mm * 1.02 &&
                       m8.oracle_mm <= m4.oracle_mm * 1.02;
    report(6, chain,
           fmt("kernel scaling: oracle non-increasing within 2%%: M=1 %.1f -> M=2 %.1f -> "
               "M=4 %.1f -> M=8 %.1f mm",
               m1.oracle_mm, m2.oracle_mm, m4.oracle_mm, m8.oracle_mm));
}

// ---------------------------------------------------------------------------
// 7. Training determinism: identical seeds give bitwise-identical
//    checkpoints; interrupt + resume equals the uninterrupted run bitwise.

void criterion_7() {
    SynthSpec spec;
    spec.kind = SynthSpec::Kind::kMirrorSkeleton;
    spec.count = 66;
    spec.noise = 0.01;
    spec.ambiguous_limbs = 1;
    spec.seed = 7;
    const Dataset data = synth_dataset(spec);
    const std::vector<SampleRecord> train = data.train_split();

    TrainConfig cfg;
    cfg.seed = 21;
    cfg.batch_size = 16;
    cfg.epochs = 4;
    cfg.kernels = 2;
    cfg.dropout = 0.1;
    cfg.blocks = 1;
    cfg.hidden_dim = 8;

    const std::string dir = (std::filesystem::temp_directory_path() / "gmdn_accept7").string();
    std::filesystem::create_directories(dir);

    auto run = [&](const std::string& name, std::size_t stop_after) {
        GraphMdnModel model(data.graph, cfg.backbone());
        model.init_params(Rng(cfg.seed).stream(rng_streams::kWeightInit));
        TrainerState state;
        state.adam.init(model.param_values().size());
        fit(model, state, cfg, train, dir + "/" + name, data.graph.hash(), stop_after);
        return std::pair<std::vector<double>, TrainerState>(model.param_values(),
                                                            std::move(state));
    };

    const auto a = run("a.ckpt", static_cast<std::size_t>(-1));
    const auto b = run("b.ckpt", static_cast<std::size_t>(-1));
    std::ifstream fa(dir + "/a.ckpt", std::ios::binary), fb(dir + "/b.ckpt", std::ios::binary);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    const bool same_seed_identical = a.first == b.first && sa.str() == sb.str();

    run("part.ckpt", 2); // interrupted after epoch 2 of 4
    const Checkpoint part = load_checkpoint(dir + "/part.ckpt");
    GraphMdnModel resumed = model_from_checkpoint(part, data.graph);
    TrainerState rstate;
    restore_trainer_state(part, rstate);
    fit(resumed, rstate, cfg, train, dir + "/resumed.ckpt", data.graph.hash());
    std::ifstream fr(dir + "/resumed.ckpt", std::ios::binary);
    std::stringstream sr;
    sr << fr.rdbuf();
    const bool resume_identical =
        resumed.param_values() == a.first && rstate.adam.m == a.second.adam.m &&
        rstate.adam.v == a.second.adam.v && sr.str() == sa.str();

    report(7, same_seed_identical && resume_identical,
           fmt("training determinism: same-seed checkpoints bitwise identical (%s); "
               "interrupt+resume bitwise identical (%s)",
               same_seed_identical ? "yes" : "no", resume_identical ? "yes" : "no"));
}

// ---------------------------------------------------------------------------
// 8. Procrustes oracle: synthesize and recover 1000 random similarity
//    transforms with aligned error < 1e-9.

void criterion_8() {
    Rng rng(808);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        Matrix gt(16, 3);
        for (std::size_t i = 0; i < gt.size(); ++i) gt.data()[i] = rng.uniform(-1, 1);

        double qw = rng.normal(), qx = rng.normal(), qy = rng.normal(), qz = rng.normal();
        const double qn = std::sqrt(qw * qw + qx * qx + qy * qy + qz * qz);
        qw /= qn; qx /= qn; qy /= qn; qz /= qn;
        const double r[9] = {1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qw * qz),
                             2 * (qx * qz + qw * qy),     2 * (qx * qy + qw * qz),
                             1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qw * qx),
                             2 * (qx * qz - qw * qy),     2 * (qy * qz + qw * qx),
                             1 - 2 * (qx * qx + qy * qy)};
        const double s = rng.uniform(0.5, 2.0);
        const double t[3] = {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};

        Matrix pred(16, 3);
        for (std::size_t i = 0; i < 16; ++i) {
            for (int a = 0; a < 3; ++a) {
                double acc = 0.0;
                for (int b = 0; b < 3; ++b) acc += r[3 * a + b] * gt(i, b);
                pred(i, a) = s * acc + t[a];
            }
        }
        const Matrix aligned = procrustes_align(pred, gt);
        worst = std::max(worst, mpjpe(flatten_pose(aligned), flatten_pose(gt)));
    }
    report(8, worst < 1e-9,
           fmt("procrustes oracle: 1000 random similarity transforms recovered, worst "
               "aligned error %.2g (< 1e-9)",
               worst));
}

// ---------------------------------------------------------------------------
// 9. Schedule contract: the one-cycle peak is exactly 6e-3 and the
//    exponential mode starts at exactly 1e-3.

void criterion_9() {
    LrSchedule one_cycle;
    one_cycle.kind = LrSchedule::Kind::kOneCycle;
    one_cycle.total_steps = 7817; // deliberately not round
    one_cycle.peak_lr = 6e-3;
    const double peak = lr_at(one_cycle, one_cycle.peak_step());

    LrSchedule expo;
    expo.kind = LrSchedule::Kind::kExponential;
    expo.total_steps = 100;
    expo.steps_per_epoch = 10;
    expo.initial_lr = 1e-3;
    const double start = lr_at(expo, 0);

    report(9, peak == 6e-3 && start == 1e-3,
           fmt("schedule contract: one-cycle peak %.10g == 6e-3 exactly; exponential "
               "start %.10g == 1e-3 exactly",
               peak, start));
}

// ---------------------------------------------------------------------------
// 10. Smoke scale: two epochs at the published defaults (batch 256, five
//     kernels, dropout 0.1, 4 blocks x 128 hidden) on the 10k corpus,
//     under 15 minutes with decreasing epoch losses.

void criterion_10() {
    SynthSpec spec;
    spec.kind = SynthSpec::Kind::kMirrorSkeleton;
    spec.count = 11000;
    spec.noise = 0.01;
    spec.ambiguous_limbs = 2;
    spec.seed = 9;
    const Dataset data = synth_dataset(spec);
    const std::vector<SampleRecord> train = data.train_split();

    TrainConfig cfg; // the published defaults
    cfg.seed = 3;
    const auto t0 = std::chrono::steady_clock::now();
    GraphMdnModel model(data.graph, cfg.backbone());
    model.init_params(Rng(cfg.seed).stream(rng_streams::kWeightInit));
    TrainerState state;
    state.adam.init(model.param_values().size());
    const FitResult result = fit(model, state, cfg, train);
    const double secs = seconds_since(t0);

    const bool decreasing = result.epoch_mean_loss.size() == 2 &&
                            result.epoch_mean_loss[1] < result.epoch_mean_loss[0];
    report(10, decreasing && secs < 900.0,
           fmt("smoke scale: 2 epochs, batch 256, M=5, dropout 0.1 on 10k samples in %.0fs "
               "(< 900s); epoch losses %.2f -> %.2f (decreasing)",
               secs, result.epoch_mean_loss[0],
               result.epoch_mean_loss.size() == 2 ? result.epoch_mean_loss[1] : 0.0));
}

} // namespace

int main() {
    std::printf("acceptance suite\n");
    const auto t0 = std::chrono::steady_clock::now();
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criteria_5_and_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    std::printf("%d criterion(s) failed; total %.0fs\n", g_failures, seconds_since(t0));
    return g_failures == 0 ? 0 : 1;
}
