#include "graphmdn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include <json.hpp>

#include "graphmdn/errors.hpp"

namespace graphmdn {

HypothesisSet hypotheses_from_mixture(const std::string& id, const PoseMixture& mixture) {
    return HypothesisSet{id, mixture.mu, mixture.pi};
}

namespace {

void check_hypotheses(const HypothesisSet& h) {
    if (h.pi.empty() || h.mu.rows() != h.pi.size()) {
        throw ShapeError("hypothesis set '" + h.id + "': kernel count mismatch");
    }
}

std::vector<double> kernel_row(const HypothesisSet& h, std::size_t j) {
    return std::vector<double>(h.mu.row(j), h.mu.row(j) + h.mu.cols());
}

} // namespace

std::vector<double> select_highest(const HypothesisSet& h) {
    check_hypotheses(h);
    std::size_t best = 0;
    for (std::size_t j = 1; j < h.pi.size(); ++j) {
        if (h.pi[j] > h.pi[best]) best = j;
    }
    return kernel_row(h, best);
}

std::vector<double> select_mean(const HypothesisSet& h) {
    check_hypotheses(h);
    std::vector<double> out(h.mu.cols(), 0.0);
    for (std::size_t j = 0; j < h.pi.size(); ++j) {
        const double* mj = h.mu.row(j);
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += h.pi[j] * mj[c];
    }
    return out;
}

std::vector<double> select_oracle(const HypothesisSet& h, std::span<const double> gt) {
    check_hypotheses(h);
    std::size_t best = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < h.pi.size(); ++j) {
        const double err = mpjpe(std::span<const double>(h.mu.row(j), h.mu.cols()), gt);
        if (err < best_err) {
            best_err = err;
            best = j;
        }
    }
    return kernel_row(h, best);
}

double mpjpe(std::span<const double> pred, std::span<const double> gt) {
    if (pred.size() != gt.size() || pred.size() % 3 != 0 || pred.empty()) {
        throw ShapeError("mpjpe: inputs must be equal-length 3K vectors");
    }
    const std::size_t k = pred.size() / 3;
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        double sq = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            const double d = pred[3 * i + c] - gt[3 * i + c];
            sq += d * d;
        }
        total += std::sqrt(sq);
    }
    return total / static_cast<double>(k);
}

// ---------------------------------------------------------------------------
// Procrustes

namespace {

// One-sided Jacobi SVD of a 3x3 row-major matrix: a = u * diag(s) * v^T,
// singular values sorted descending.
void svd3(const double a[9], double u[9], double s[3], double v[9]) {
    double b[9];
    std::copy(a, a + 9, b);
    double vv[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};

    auto col_dot = [](const double* m, int p, int q) {
        return m[p] * m[q] + m[3 + p] * m[3 + q] + m[6 + p] * m[6 + q];
    };
    auto rotate_cols = [](double* m, int p, int q, double c, double sn) {
        for (int r = 0; r < 3; ++r) {
            const double mp = m[3 * r + p], mq = m[3 * r + q];
            m[3 * r + p] = c * mp - sn * mq;
            m[3 * r + q] = sn * mp + c * mq;
        }
    };

    for (int sweep = 0; sweep < 60; ++sweep) {
        bool converged = true;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                const double alpha = col_dot(b, p, p);
                const double beta = col_dot(b, q, q);
                const double gamma = col_dot(b, p, q);
                if (std::abs(gamma) <= 1e-30 ||
                    std::abs(gamma) <= 1e-16 * std::sqrt(alpha * beta)) {
                    continue;
                }
                converged = false;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = c * t;
                rotate_cols(b, p, q, c, sn);
                rotate_cols(vv, p, q, c, sn);
            }
        }
        if (converged) break;
    }

    double sv[3];
    for (int j = 0; j < 3; ++j) {
        sv[j] = std::sqrt(col_dot(b, j, j));
    }
    // sort columns by singular value, descending
    int order[3] = {0, 1, 2};
    std::sort(order, order + 3, [&sv](int x, int y) { return sv[x] > sv[y]; });

    double bs[9], vs[9];
    for (int r = 0; r < 3; ++r) {
        for (int j = 0; j < 3; ++j) {
            bs[3 * r + j] = b[3 * r + order[j]];
            vs[3 * r + j] = vv[3 * r + order[j]];
        }
    }
    for (int j = 0; j < 3; ++j) s[j] = sv[order[j]];
    std::copy(vs, vs + 9, v);

    // left vectors: normalized columns; complete the third via cross product
    // when its singular value underflows
    const double tol = 1e-14 * std::max(s[0], 1e-300);
    for (int j = 0; j < 3; ++j) {
        if (s[j] > tol) {
            for (int r = 0; r < 3; ++r) u[3 * r + j] = bs[3 * r + j] / s[j];
        } else {
            const int j1 = (j + 1) % 3, j2 = (j + 2) % 3;
            const double c0[3] = {u[j1], u[3 + j1], u[6 + j1]};
            const double c1[3] = {u[j2], u[3 + j2], u[6 + j2]};
            double cx[3] = {c0[1] * c1[2] - c0[2] * c1[1], c0[2] * c1[0] - c0[0] * c1[2],
                            c0[0] * c1[1] - c0[1] * c1[0]};
            const double norm = std::sqrt(cx[0] * cx[0] + cx[1] * cx[1] + cx[2] * cx[2]);
            if (norm > 0.0) {
                for (int r = 0; r < 3; ++r) u[3 * r + j] = cx[r] / norm;
            } else {
                for (int r = 0; r < 3; ++r) u[3 * r + j] = (r == j) ? 1.0 : 0.0;
            }
        }
    }
}

double det3(const double m[9]) {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

} // namespace

Matrix procrustes_align(const Matrix& pred, const Matrix& gt, bool with_scale) {
    if (pred.rows() != gt.rows() || pred.cols() != 3 || gt.cols() != 3) {
        throw ShapeError("procrustes_align: expected matching K x 3 point sets");
    }
    const std::size_t k = pred.rows();
    if (k < 3) throw AlignmentError("procrustes_align: need at least 3 points");

    double mx[3] = {0, 0, 0}, my[3] = {0, 0, 0};
    for (std::size_t i = 0; i < k; ++i) {
        for (int c = 0; c < 3; ++c) {
            mx[c] += pred(i, c);
            my[c] += gt(i, c);
        }
    }
    for (int c = 0; c < 3; ++c) {
        mx[c] /= static_cast<double>(k);
        my[c] /= static_cast<double>(k);
    }

    double var_x = 0.0;
    double cov[9] = {0};
    for (std::size_t i = 0; i < k; ++i) {
        double xc[3], yc[3];
        for (int c = 0; c < 3; ++c) {
            xc[c] = pred(i, c) - mx[c];
            yc[c] = gt(i, c) - my[c];
            var_x += xc[c] * xc[c];
        }
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) cov[3 * r + c] += yc[r] * xc[c];
        }
    }
    var_x /= static_cast<double>(k);
    for (double& c : cov) c /= static_cast<double>(k);

    if (!(var_x > 0.0)) {
        throw AlignmentError("procrustes_align: prediction has zero spatial extent");
    }

    double u[9], sv[3], v[9];
    svd3(cov, u, sv, v);
    if (!(sv[1] > 1e-12 * sv[0]) || !(sv[0] > 0.0)) {
        throw AlignmentError("procrustes_align: rank-deficient cross-covariance");
    }

    // reflection guard: flip the smallest singular axis if needed
    const double sign = (det3(u) * det3(v) < 0.0) ? -1.0 : 1.0;

    double r[9];
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int p = 0; p < 3; ++p) {
                const double d = (p == 2) ? sign : 1.0;
                acc += u[3 * i + p] * d * v[3 * j + p];
            }
            r[3 * i + j] = acc;
        }
    }

    const double scale = with_scale ? (sv[0] + sv[1] + sign * sv[2]) / var_x : 1.0;

    double t[3];
    for (int i = 0; i < 3; ++i) {
        double acc = 0.0;
        for (int j = 0; j < 3; ++j) acc += r[3 * i + j] * mx[j];
        t[i] = my[i] - scale * acc;
    }

    Matrix aligned(k, 3);
    for (std::size_t i = 0; i < k; ++i) {
        for (int rr = 0; rr < 3; ++rr) {
            double acc = 0.0;
            for (int c = 0; c < 3; ++c) acc += r[3 * rr + c] * pred(i, c);
            aligned(i, rr) = scale * acc + t[rr];
        }
    }
    return aligned;
}

double p_mpjpe(std::span<const double> pred, std::span<const double> gt, bool with_scale) {
    if (pred.size() != gt.size() || pred.size() % 3 != 0 || pred.empty()) {
        throw ShapeError("p_mpjpe: inputs must be equal-length 3K vectors");
    }
    const std::size_t k = pred.size() / 3;
    const Matrix pred_m = unflatten_pose(pred, k, 3);
    const Matrix gt_m = unflatten_pose(gt, k, 3);
    const Matrix aligned = procrustes_align(pred_m, gt_m, with_scale);
    return mpjpe(std::span<const double>(aligned.data(), aligned.size()), gt);
}

// ---------------------------------------------------------------------------
// Report

EvalReport evaluate(std::span<const PredictionRecord> predictions,
                    std::span<const SampleRecord> ground_truth,
                    const DatasetManifest& manifest, bool p2_with_scale) {
    std::map<std::string, const SampleRecord*> gt_by_id;
    for (const SampleRecord& rec : ground_truth) gt_by_id[rec.id] = &rec;
    if (gt_by_id.size() != ground_truth.size()) {
        throw DataError("evaluate: duplicate ids in ground truth");
    }

    std::map<std::string, const PredictionRecord*> pred_by_id;
    for (const PredictionRecord& rec : predictions) pred_by_id[rec.id] = &rec;
    if (pred_by_id.size() != predictions.size()) {
        throw DataError("evaluate: duplicate ids in predictions");
    }

    std::string missing;
    std::size_t missing_count = 0;
    auto note_missing = [&](const std::string& id, const char* side) {
        ++missing_count;
        if (missing.size() < 256) {
            missing += (missing.empty() ? "" : ", ");
            missing += id + " (" + side + ")";
        }
    };
    for (const auto& [id, rec] : pred_by_id) {
        if (!gt_by_id.count(id)) note_missing(id, "no ground truth");
    }
    for (const auto& [id, rec] : gt_by_id) {
        if (!pred_by_id.count(id)) note_missing(id, "no prediction");
    }
    if (missing_count > 0) {
        throw DataError("evaluate: " + std::to_string(missing_count) +
                        " unmatched ids: " + missing);
    }
    if (pred_by_id.empty()) throw DataError("evaluate: nothing to evaluate");

    // map iteration is id-sorted, so accumulation order is input-order
    // independent
    std::map<std::string, std::array<std::array<double, 2>, 3>> action_sums;
    std::map<std::string, std::size_t> action_counts;

    for (const auto& [id, pred] : pred_by_id) {
        const SampleRecord& gt = *gt_by_id.at(id);
        if (pred->mixture.mu.cols() != gt.target3d.size()) {
            throw DataError("evaluate: prediction '" + id + "' width " +
                            std::to_string(pred->mixture.mu.cols()) + " != target " +
                            std::to_string(gt.target3d.size()));
        }
        const HypothesisSet hyp = hypotheses_from_mixture(id, pred->mixture);
        const std::vector<double> gt_mm = denormalize_target(gt.target3d, manifest);

        auto& sums = action_sums[gt.action];
        for (int s = 0; s < 3; ++s) {
            std::vector<double> chosen;
            switch (static_cast<Strategy>(s)) {
                case Strategy::kHighest: chosen = select_highest(hyp); break;
                case Strategy::kMean: chosen = select_mean(hyp); break;
                case Strategy::kOracle: chosen = select_oracle(hyp, gt.target3d); break;
            }
            const std::vector<double> chosen_mm = denormalize_target(chosen, manifest);
            sums[s][0] += mpjpe(chosen_mm, gt_mm);
            sums[s][1] += p_mpjpe(chosen_mm, gt_mm, p2_with_scale);
        }
        action_counts[gt.action] += 1;
    }

    EvalReport report;
    for (const auto& [action, count] : action_counts) {
        report.actions.push_back(action);
        report.action_counts.push_back(count);
        report.total_samples += count;
    }
    for (int s = 0; s < 3; ++s) {
        for (int p = 0; p < 2; ++p) {
            double weighted = 0.0;
            for (std::size_t a = 0; a < report.actions.size(); ++a) {
                const double mean =
                    action_sums[report.actions[a]][s][p] /
                    static_cast<double>(report.action_counts[a]);
                report.per_action[s][p].push_back(mean);
                weighted += action_sums[report.actions[a]][s][p];
            }
            report.average[s][p] = weighted / static_cast<double>(report.total_samples);
        }
    }
    return report;
}

void write_eval_csv(std::ostream& out, const EvalReport& report) {
    out << "strategy,protocol";
    for (const std::string& a : report.actions) out << "," << a;
    out << ",Avg\n";
    char buf[64];
    for (int s = 0; s < 3; ++s) {
        for (int p = 0; p < 2; ++p) {
            out << kStrategyNames[s] << "," << kProtocolNames[p];
            for (std::size_t a = 0; a < report.actions.size(); ++a) {
                std::snprintf(buf, sizeof(buf), ",%.17g",
                              report.value(static_cast<Strategy>(s), static_cast<Protocol>(p), a));
                out << buf;
            }
            std::snprintf(buf, sizeof(buf), ",%.17g\n",
                          report.avg(static_cast<Strategy>(s), static_cast<Protocol>(p)));
            out << buf;
        }
    }
}

void write_eval_json(std::ostream& out, const EvalReport& report) {
    nlohmann::ordered_json j;
    j["actions"] = report.actions;
    j["action_counts"] = report.action_counts;
    j["total_samples"] = report.total_samples;
    for (int s = 0; s < 3; ++s) {
        for (int p = 0; p < 2; ++p) {
            nlohmann::ordered_json entry;
            entry["per_action"] = report.per_action[s][p];
            entry["avg"] = report.average[s][p];
            j["errors_mm"][kStrategyNames[s]][kProtocolNames[p]] = std::move(entry);
        }
    }
    out << j.dump(2) << "\n";
}

} // namespace graphmdn
