// Command-line surface for the graph mixture density network library:
// dataset synthesis, training, evaluation, gradient auditing, prediction
// dumps and figure emission.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "graphmdn/data.hpp"
#include "graphmdn/errors.hpp"
#include "graphmdn/evaluation.hpp"
#include "graphmdn/gradcheck.hpp"
#include "graphmdn/mdn.hpp"
#include "graphmdn/model.hpp"
#include "graphmdn/svgplot.hpp"
#include "graphmdn/training.hpp"

namespace {

using namespace graphmdn;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::size_t worker_threads() {
    if (const char* env = std::getenv("GRAPHMDN_THREADS")) {
        const long n = std::atol(env);
        if (n >= 1) return static_cast<std::size_t>(n);
    }
    return 1;
}

std::vector<PredictionRecord> predict_records(const GraphMdnModel& model,
                                              std::span<const SampleRecord> records) {
    const std::size_t k = model.node_count();
    const std::size_t m = model.config().kernels;
    std::vector<PredictionRecord> out(records.size());

    const std::size_t threads = std::min(worker_threads(), std::max<std::size_t>(records.size(), 1));
    const std::size_t chunk = (records.size() + threads - 1) / threads;

    auto run_chunk = [&](std::size_t lo, std::size_t hi) {
        constexpr std::size_t kInferBatch = 256;
        Matrix x(std::min(kInferBatch, hi - lo) * k, 2);
        for (std::size_t start = lo; start < hi; start += kInferBatch) {
            const std::size_t n = std::min(kInferBatch, hi - start);
            if (x.rows() != n * k) x = Matrix(n * k, 2);
            for (std::size_t s = 0; s < n; ++s) {
                const SampleRecord& rec = records[start + s];
                if (rec.input2d.size() != 2 * k) {
                    throw DataError("record '" + rec.id + "' does not match the model graph");
                }
                for (std::size_t i = 0; i < k; ++i) {
                    x(s * k + i, 0) = rec.input2d[2 * i];
                    x(s * k + i, 1) = rec.input2d[2 * i + 1];
                }
            }
            const Matrix logits = model.infer(x, static_cast<int>(n));
            Matrix sample_logits(k, logits.cols());
            for (std::size_t s = 0; s < n; ++s) {
                for (std::size_t i = 0; i < k; ++i) {
                    std::copy(logits.row(s * k + i), logits.row(s * k + i) + logits.cols(),
                              sample_logits.row(i));
                }
                out[start + s].id = records[start + s].id;
                out[start + s].mixture = pose_mixture_from_logits(sample_logits, m);
            }
        }
    };

    if (threads <= 1) {
        run_chunk(0, records.size());
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(threads);
        for (std::size_t t = 0; t < threads; ++t) {
            const std::size_t lo = t * chunk;
            const std::size_t hi = std::min(records.size(), lo + chunk);
            pool.emplace_back([&, t, lo, hi] {
                try {
                    if (lo < hi) run_chunk(lo, hi);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (std::thread& th : pool) th.join();
        for (const std::exception_ptr& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }
    return out;
}

std::vector<SampleRecord> pick_split(const Dataset& dataset, const std::string& split) {
    if (split == "train") return dataset.train_split();
    if (split == "test") return dataset.test_split();
    if (split == "all") return dataset.records;
    throw ConfigError("split must be train, test or all");
}

SkeletonGraph graph_for(const Dataset& dataset, const std::string& graph_file) {
    if (graph_file.empty()) return dataset.graph;
    SkeletonGraph g = parse_graph_file(graph_file);
    if (g.hash() != dataset.graph.hash()) {
        throw DataError("graph file " + graph_file + " (hash " + g.hash() +
                        ") does not match dataset graph (hash " + dataset.graph.hash() + ")");
    }
    return g;
}

void echo_config(const TrainConfig& config) {
    std::cout << "config: " << config.to_json_text() << "\n";
}

int cmd_synth(const std::string& spec_path, const std::string& out_path) {
    const SynthSpec spec = SynthSpec::from_json_file(spec_path);
    std::cout << "config: " << spec.to_json_text() << "\n";
    const Dataset dataset = synth_dataset(spec);
    save_dataset(out_path, dataset);
    std::cout << "wrote " << dataset.records.size() << " samples to " << out_path << "\n";
    return kExitOk;
}

int cmd_train(TrainConfig config, const std::string& data_path, const std::string& out_path,
              const std::string& log_path, const std::string& resume_path,
              const std::string& graph_file) {
    const Dataset dataset = load_dataset(data_path);
    const SkeletonGraph graph = graph_for(dataset, graph_file);
    const std::vector<SampleRecord> train = dataset.train_split();

    TrainerState state;
    std::unique_ptr<GraphMdnModel> model;
    if (!resume_path.empty()) {
        const Checkpoint ckpt = load_checkpoint(resume_path);
        config = ckpt.config; // a resumed run replays its original config
        model = std::make_unique<GraphMdnModel>(model_from_checkpoint(ckpt, graph));
        restore_trainer_state(ckpt, state);
        std::cout << "resumed at epoch " << state.epochs_done << ", step " << state.global_step
                  << "\n";
    } else {
        model = std::make_unique<GraphMdnModel>(graph, config.backbone());
        model->init_params(Rng(config.seed).stream(rng_streams::kWeightInit));
        state.adam.init(model->param_values().size());
    }
    echo_config(config);

    const FitResult result = fit(*model, state, config, train, out_path, graph.hash());
    for (std::size_t e = 0; e < result.epoch_mean_loss.size(); ++e) {
        std::cout << "epoch " << (config.epochs - result.epoch_mean_loss.size() + e)
                  << " mean loss " << result.epoch_mean_loss[e] << "\n";
    }
    if (out_path.empty()) {
        std::cout << "no checkpoint path given; model discarded\n";
    } else if (state.epochs_done > 0 && result.epoch_mean_loss.empty()) {
        // resume with nothing left to do still leaves a valid checkpoint behind
        save_checkpoint(out_path, make_checkpoint(*model, state, config, graph.hash()));
    }
    if (!log_path.empty()) {
        std::ofstream log(log_path);
        if (!log) throw DataError("cannot open log for writing: " + log_path);
        write_train_log_csv(log, result.log);
    }
    return kExitOk;
}

int cmd_predict(const std::string& ckpt_path, const std::string& data_path,
                const std::string& out_path, const std::string& split) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    echo_config(ckpt.config);
    const Dataset dataset = load_dataset(data_path);
    const GraphMdnModel model = model_from_checkpoint(ckpt, dataset.graph);
    const std::vector<SampleRecord> records = pick_split(dataset, split);
    if (records.empty()) throw DataError("split '" + split + "' is empty");
    const std::vector<PredictionRecord> predictions = predict_records(model, records);
    write_predictions_file(out_path, predictions);
    std::cout << "wrote " << predictions.size() << " predictions to " << out_path << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& predictions_path,
             const std::string& data_path, const std::string& out_csv,
             const std::string& out_json, const std::string& split, bool no_scale) {
    const Dataset dataset = load_dataset(data_path);
    const std::vector<SampleRecord> records = pick_split(dataset, split);
    if (records.empty()) throw DataError("split '" + split + "' is empty");

    std::vector<PredictionRecord> predictions;
    if (!predictions_path.empty()) {
        predictions = read_predictions_file(predictions_path);
    } else {
        const Checkpoint ckpt = load_checkpoint(ckpt_path);
        echo_config(ckpt.config);
        const GraphMdnModel model = model_from_checkpoint(ckpt, dataset.graph);
        predictions = predict_records(model, records);
    }

    const EvalReport report = evaluate(predictions, records, dataset.manifest, !no_scale);
    write_eval_csv(std::cout, report);
    if (!out_csv.empty()) {
        std::ofstream out(out_csv);
        if (!out) throw DataError("cannot open for writing: " + out_csv);
        write_eval_csv(out, report);
    }
    if (!out_json.empty()) {
        std::ofstream out(out_json);
        if (!out) throw DataError("cannot open for writing: " + out_json);
        write_eval_json(out, report);
    }
    return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t kernels, std::size_t blocks,
                  std::size_t hidden, double epsilon, bool corrupt) {
    // 4-node toy tree keeps the finite-difference sweep fast
    const SkeletonGraph graph(4, {{0, 1}, {1, 2}, {1, 3}});
    BackboneConfig config{blocks, hidden, kernels, 0.0};

    std::cout << "config: {\"seed\":" << seed << ",\"kernels\":" << kernels
              << ",\"blocks\":" << blocks << ",\"hidden_dim\":" << hidden
              << ",\"epsilon\":" << epsilon << ",\"corrupt\":" << (corrupt ? "true" : "false")
              << "}\n";

    bool all_ok = true;
    for (const LossMode mode : {LossMode::kNode, LossMode::kPose}) {
        GraphMdnModel model(graph, config);
        model.init_params(Rng(seed).stream(rng_streams::kWeightInit));

        const int n = 3;
        Rng data_rng = Rng(seed).stream(99);
        Matrix x(n * graph.node_count(), 2);
        Matrix y(n, 3 * graph.node_count());
        for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = data_rng.uniform(-1.0, 1.0);
        for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] = data_rng.uniform(-1.0, 1.0);

        Matrix dlogits;
        Matrix logits = model.forward(x, n, true);
        mixture_batch_nll(logits, n, graph.node_count(), kernels, y, mode, &dlogits);
        std::vector<double> analytic = model.backward(dlogits);
        if (corrupt && !analytic.empty()) {
            // relative corruption so the check trips regardless of the
            // parameter's gradient magnitude
            double& target = analytic[analytic.size() / 2];
            target = target * 1.01 + 1e-2;
        }

        auto loss_fn = [&](std::span<const double> params) {
            model.param_values().assign(params.begin(), params.end());
            const Matrix lg = model.forward(x, n, true);
            return mixture_batch_nll(lg, n, graph.node_count(), kernels, y, mode, nullptr);
        };
        const std::vector<double> params = model.param_values();
        const GradCheckReport report = grad_check(loss_fn, params, analytic, epsilon);
        model.param_values() = params;

        const char* name = mode == LossMode::kNode ? "node" : "pose";
        std::cout << name << " loss: max relative error " << report.max_rel_error
                  << " at " << model.param_name(report.argmax_index) << " (analytic "
                  << report.analytic[report.argmax_index] << ", numeric "
                  << report.numeric[report.argmax_index] << ")\n";
        if (!report.passes(1e-4)) all_ok = false;
    }
    if (!all_ok) {
        std::cerr << "gradient check FAILED (tolerance 1e-4)\n";
        return kExitNumeric;
    }
    std::cout << "gradient check passed (tolerance 1e-4)\n";
    return kExitOk;
}

int cmd_plot(const std::string& ckpt_path, const std::string& data_path,
             const std::vector<std::string>& ids, const std::string& out_dir) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    echo_config(ckpt.config);
    const Dataset dataset = load_dataset(data_path);
    const GraphMdnModel model = model_from_checkpoint(ckpt, dataset.graph);

    std::vector<SampleRecord> selected;
    for (const std::string& id : ids) {
        const auto it = std::find_if(dataset.records.begin(), dataset.records.end(),
                                     [&id](const SampleRecord& r) { return r.id == id; });
        if (it == dataset.records.end()) throw DataError("unknown sample id '" + id + "'");
        selected.push_back(*it);
    }
    if (selected.empty()) throw ConfigError("no sample ids given");

    std::filesystem::create_directories(out_dir);
    const std::vector<PredictionRecord> predictions = predict_records(model, selected);
    const std::vector<double> azimuths = {0.0, 60.0, 90.0};
    for (std::size_t i = 0; i < selected.size(); ++i) {
        const std::string svg = render_sample_svg(dataset.graph, selected[i].input2d,
                                                  predictions[i].mixture, azimuths);
        const std::string path = out_dir + "/" + selected[i].id + ".svg";
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("cannot open for writing: " + path);
        out << svg;
        std::cout << "wrote " << path << "\n";
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph mixture density networks for 2D-to-3D pose lifting"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset from a spec");
    std::string synth_spec, synth_out;
    synth->add_option("--spec", synth_spec, "Generator spec (JSON)")->required();
    synth->add_option("--out", synth_out, "Output dataset path")->required();

    // train
    auto* train = app.add_subcommand("train", "Train a model");
    std::string train_config, train_data, train_out, train_log, train_resume, train_graph;
    bool train_wide = false;
    std::optional<std::uint64_t> ov_seed;
    std::optional<std::size_t> ov_epochs, ov_batch, ov_kernels;
    std::optional<double> ov_dropout;
    std::optional<std::string> ov_loss;
    train->add_option("--config", train_config, "Training config (JSON)");
    train->add_option("--data", train_data, "Dataset path")->required();
    train->add_option("--out", train_out, "Checkpoint output path");
    train->add_option("--log", train_log, "Training log CSV path");
    train->add_option("--resume", train_resume, "Resume from checkpoint");
    train->add_option("--graph", train_graph, "Graph override file (must match dataset)");
    train->add_flag("--wide", train_wide, "Wide preset: 3 blocks, hidden dimension 512");
    train->add_option("--seed", ov_seed, "Override seed");
    train->add_option("--epochs", ov_epochs, "Override epochs");
    train->add_option("--batch-size", ov_batch, "Override batch size");
    train->add_option("--kernels", ov_kernels, "Override mixture kernel count");
    train->add_option("--dropout", ov_dropout, "Override dropout rate");
    train->add_option("--loss", ov_loss, "Override loss mode: node|pose");

    // predict
    auto* predict = app.add_subcommand("predict", "Dump pose mixtures for a split");
    std::string pred_ckpt, pred_data, pred_out, pred_split = "test";
    predict->add_option("--checkpoint", pred_ckpt, "Checkpoint path")->required();
    predict->add_option("--data", pred_data, "Dataset path")->required();
    predict->add_option("--out", pred_out, "Predictions output (JSON lines)")->required();
    predict->add_option("--split", pred_split, "train|test|all (default test)");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint or a prediction dump");
    std::string eval_ckpt, eval_pred, eval_data, eval_csv, eval_json, eval_split = "test";
    bool eval_no_scale = false;
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint path");
    eval->add_option("--predictions", eval_pred, "Prediction dump instead of a checkpoint");
    eval->add_option("--data", eval_data, "Dataset path")->required();
    eval->add_option("--out-csv", eval_csv, "Report CSV path");
    eval->add_option("--out-json", eval_json, "Report JSON path");
    eval->add_option("--split", eval_split, "train|test|all (default test)");
    eval->add_flag("--no-scale", eval_no_scale,
                   "Strictly rigid alignment (no scale) for protocol #2");

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference audit of the backward pass");
    std::uint64_t gc_seed = 7;
    std::size_t gc_kernels = 2, gc_blocks = 2, gc_hidden = 8;
    double gc_eps = 1e-5;
    bool gc_corrupt = false;
    gradcheck->add_option("--seed", gc_seed, "Seed");
    gradcheck->add_option("--kernels", gc_kernels, "Mixture kernels");
    gradcheck->add_option("--blocks", gc_blocks, "Residual blocks");
    gradcheck->add_option("--hidden", gc_hidden, "Hidden width");
    gradcheck->add_option("--epsilon", gc_eps, "Finite-difference step");
    gradcheck->add_flag("--corrupt", gc_corrupt,
                        "Test hook: corrupt the analytic gradient (must fail)");

    // plot
    auto* plot = app.add_subcommand("plot", "Render hypothesis figures as SVG");
    std::string plot_ckpt, plot_data, plot_out;
    std::vector<std::string> plot_ids;
    plot->add_option("--checkpoint", plot_ckpt, "Checkpoint path")->required();
    plot->add_option("--data", plot_data, "Dataset path")->required();
    plot->add_option("--ids", plot_ids, "Sample ids")->required()->delimiter(',');
    plot->add_option("--out", plot_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*synth) return cmd_synth(synth_spec, synth_out);
        if (*predict) return cmd_predict(pred_ckpt, pred_data, pred_out, pred_split);
        if (*gradcheck) {
            return cmd_gradcheck(gc_seed, gc_kernels, gc_blocks, gc_hidden, gc_eps, gc_corrupt);
        }
        if (*plot) return cmd_plot(plot_ckpt, plot_data, plot_ids, plot_out);
        if (*eval) {
            if (eval_ckpt.empty() == eval_pred.empty()) {
                throw ConfigError("eval needs exactly one of --checkpoint or --predictions");
            }
            return cmd_eval(eval_ckpt, eval_pred, eval_data, eval_csv, eval_json, eval_split,
                            eval_no_scale);
        }
        if (*train) {
            TrainConfig config;
            if (!train_config.empty()) config = TrainConfig::from_json_file(train_config);
            if (train_wide) {
                config.blocks = 3;
                config.hidden_dim = 512;
            }
            if (ov_seed) config.seed = *ov_seed;
            if (ov_epochs) config.epochs = *ov_epochs;
            if (ov_batch) config.batch_size = *ov_batch;
            if (ov_kernels) config.kernels = *ov_kernels;
            if (ov_dropout) config.dropout = *ov_dropout;
            if (ov_loss) {
                if (*ov_loss == "node") {
                    config.loss_mode = LossMode::kNode;
                } else if (*ov_loss == "pose") {
                    config.loss_mode = LossMode::kPose;
                } else {
                    throw ConfigError("--loss must be node or pose");
                }
            }
            config.validate();
            return cmd_train(config, train_data, train_out, train_log, train_resume, train_graph);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitUsage;
}
