#include "graphmdn/mdn.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "graphmdn/errors.hpp"
#include "graphmdn/numeric.hpp"

namespace graphmdn {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

void check_logits(const Matrix& logits, std::size_t kernels, const char* who) {
    if (kernels == 0) throw ConfigError(std::string(who) + ": kernels must be >= 1");
    if (logits.cols() != 5 * kernels) {
        throw ShapeError(std::string(who) + ": logit width " + std::to_string(logits.cols()) +
                         " != 5*" + std::to_string(kernels));
    }
    if (logits.rows() == 0) throw ShapeError(std::string(who) + ": empty logits");
}

} // namespace

NodeMixture node_mixture_from_logits(const Matrix& logits, std::size_t kernels) {
    check_logits(logits, kernels, "node_mixture_from_logits");
    const std::size_t k = logits.rows(), m = kernels;
    NodeMixture mix;
    mix.node_count = k;
    mix.kernels = m;
    mix.mu.resize(k * m * 3);
    mix.sigma.resize(k * m);
    mix.pi.resize(k * m);
    for (std::size_t i = 0; i < k; ++i) {
        const double* row = logits.row(i);
        for (std::size_t j = 0; j < 3 * m; ++j) mix.mu[i * 3 * m + j] = std::tanh(row[j]);
        std::vector<double> pi(row + 3 * m, row + 4 * m);
        softmax_inplace(pi.data(), m);
        for (std::size_t j = 0; j < m; ++j) {
            mix.pi[i * m + j] = pi[j];
            mix.sigma[i * m + j] = elu_plus_one(row[4 * m + j], kSigmaFloor);
        }
    }
    return mix;
}

PoseMixture pose_mixture_from_logits(const Matrix& logits, std::size_t kernels) {
    check_logits(logits, kernels, "pose_mixture_from_logits");
    const std::size_t k = logits.rows(), m = kernels;
    PoseMixture mix;
    mix.node_count = k;
    mix.kernels = m;
    mix.mu = Matrix(m, 3 * k);
    mix.sigma.resize(m);
    mix.pi.resize(m);

    std::vector<double> mean_pi(m, 0.0), mean_sigma(m, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        const double* row = logits.row(i);
        for (std::size_t j = 0; j < m; ++j) {
            mean_pi[j] += row[3 * m + j];
            mean_sigma[j] += row[4 * m + j];
            for (std::size_t c = 0; c < 3; ++c) {
                mix.mu(j, 3 * i + c) = std::tanh(row[3 * j + c]);
            }
        }
    }
    const double inv_k = 1.0 / static_cast<double>(k);
    for (std::size_t j = 0; j < m; ++j) {
        mean_pi[j] *= inv_k;
        mix.sigma[j] = elu_plus_one(mean_sigma[j] * inv_k, kSigmaFloor);
    }
    softmax_inplace(mean_pi.data(), m);
    mix.pi = std::move(mean_pi);
    return mix;
}

double gaussian_logpdf_iso(std::span<const double> y, std::span<const double> mu, double sigma,
                           std::size_t d) {
    if (!(sigma > 0.0)) throw std::domain_error("gaussian_logpdf_iso: sigma must be positive");
    if (y.size() != d || mu.size() != d) {
        throw ShapeError("gaussian_logpdf_iso: vector length != d");
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double diff = y[i] - mu[i];
        sq += diff * diff;
    }
    const double dd = static_cast<double>(d);
    return -0.5 * dd * kLogTwoPi - dd * std::log(sigma) - sq / (2.0 * sigma * sigma);
}

double node_nll(const Matrix& logits, std::span<const double> y, std::size_t kernels,
                Matrix* dlogits, double resp_blend) {
    check_logits(logits, kernels, "node_nll");
    const std::size_t k = logits.rows(), m = kernels;
    if (y.size() != 3 * k) {
        throw ShapeError("node_nll: target length " + std::to_string(y.size()) + " != 3*" +
                         std::to_string(k));
    }
    if (dlogits) *dlogits = Matrix(k, 5 * m);

    double total = 0.0;
    std::vector<double> logpi(m), a(m), mu(3), sq(m);
    for (std::size_t i = 0; i < k; ++i) {
        const double* row = logits.row(i);
        const double* yi = y.data() + 3 * i;

        const double pi_lse = log_sum_exp(std::span<const double>(row + 3 * m, m));
        for (std::size_t j = 0; j < m; ++j) {
            logpi[j] = row[3 * m + j] - pi_lse;
            const double sigma = elu_plus_one(row[4 * m + j], kSigmaFloor);
            double s = 0.0;
            for (std::size_t c = 0; c < 3; ++c) {
                const double diff = yi[c] - std::tanh(row[3 * j + c]);
                s += diff * diff;
            }
            sq[j] = s;
            a[j] = logpi[j] - 1.5 * kLogTwoPi - 3.0 * std::log(sigma) -
                   s / (2.0 * sigma * sigma);
        }
        const double lse = log_sum_exp(a);
        if (!std::isfinite(lse)) {
            throw NumericError("node_nll: non-finite log-likelihood at node " +
                               std::to_string(i));
        }
        total -= lse;

        if (dlogits) {
            double* drow = dlogits->row(i);
            for (std::size_t j = 0; j < m; ++j) {
                const double r = (1.0 - resp_blend) * std::exp(a[j] - lse) +
                                 resp_blend / static_cast<double>(m); // responsibility
                const double pi_j = std::exp(logpi[j]);
                drow[3 * m + j] = pi_j - r;
                const double sigma = elu_plus_one(row[4 * m + j], kSigmaFloor);
                const double dsigma = r * (3.0 / sigma - sq[j] / (sigma * sigma * sigma));
                drow[4 * m + j] = dsigma * elu_plus_one_grad(row[4 * m + j], kSigmaFloor);
                const double inv_var = 1.0 / (sigma * sigma);
                for (std::size_t c = 0; c < 3; ++c) {
                    const double mu_jc = std::tanh(row[3 * j + c]);
                    const double dmu = -r * (yi[c] - mu_jc) * inv_var;
                    drow[3 * j + c] = dmu * (1.0 - mu_jc * mu_jc);
                }
            }
        }
    }
    return total;
}

double pose_nll(const Matrix& logits, std::span<const double> y, std::size_t kernels,
                Matrix* dlogits, double resp_blend) {
    check_logits(logits, kernels, "pose_nll");
    const std::size_t k = logits.rows(), m = kernels;
    if (y.size() != 3 * k) {
        throw ShapeError("pose_nll: target length " + std::to_string(y.size()) + " != 3*" +
                         std::to_string(k));
    }
    const double dd = 3.0 * static_cast<double>(k);
    const double inv_k = 1.0 / static_cast<double>(k);

    std::vector<double> mean_pi(m, 0.0), mean_sigma(m, 0.0);
    Matrix mu(m, 3 * k);
    for (std::size_t i = 0; i < k; ++i) {
        const double* row = logits.row(i);
        for (std::size_t j = 0; j < m; ++j) {
            mean_pi[j] += row[3 * m + j];
            mean_sigma[j] += row[4 * m + j];
            for (std::size_t c = 0; c < 3; ++c) mu(j, 3 * i + c) = std::tanh(row[3 * j + c]);
        }
    }
    std::vector<double> logpi(m), sigma(m), sq(m), a(m);
    const double pi_lse = [&] {
        std::vector<double> scaled(m);
        for (std::size_t j = 0; j < m; ++j) scaled[j] = mean_pi[j] * inv_k;
        for (std::size_t j = 0; j < m; ++j) logpi[j] = scaled[j];
        return log_sum_exp(scaled);
    }();
    for (std::size_t j = 0; j < m; ++j) {
        logpi[j] -= pi_lse;
        sigma[j] = elu_plus_one(mean_sigma[j] * inv_k, kSigmaFloor);
        double s = 0.0;
        const double* mj = mu.row(j);
        for (std::size_t t = 0; t < 3 * k; ++t) {
            const double diff = y[t] - mj[t];
            s += diff * diff;
        }
        sq[j] = s;
        a[j] = logpi[j] - 0.5 * dd * kLogTwoPi - dd * std::log(sigma[j]) -
               s / (2.0 * sigma[j] * sigma[j]);
    }
    const double lse = log_sum_exp(a);
    if (!std::isfinite(lse)) {
        throw NumericError("pose_nll: non-finite log-likelihood");
    }

    if (dlogits) {
        *dlogits = Matrix(k, 5 * m);
        for (std::size_t j = 0; j < m; ++j) {
            const double r = (1.0 - resp_blend) * std::exp(a[j] - lse) +
                             resp_blend / static_cast<double>(m);
            const double pi_j = std::exp(logpi[j]);
            const double dmean_pi = (pi_j - r) * inv_k;
            const double dsigma = r * (dd / sigma[j] - sq[j] / (sigma[j] * sigma[j] * sigma[j]));
            const double dmean_sigma =
                dsigma * elu_plus_one_grad(mean_sigma[j] * inv_k, kSigmaFloor) * inv_k;
            const double inv_var = 1.0 / (sigma[j] * sigma[j]);
            const double* mj = mu.row(j);
            for (std::size_t i = 0; i < k; ++i) {
                double* drow = dlogits->row(i);
                drow[3 * m + j] = dmean_pi;
                drow[4 * m + j] = dmean_sigma;
                for (std::size_t c = 0; c < 3; ++c) {
                    const double mu_t = mj[3 * i + c];
                    const double dmu = -r * (y[3 * i + c] - mu_t) * inv_var;
                    drow[3 * j + c] = dmu * (1.0 - mu_t * mu_t);
                }
            }
        }
    }
    return -lse;
}

double mixture_batch_nll(const Matrix& logits, int n, std::size_t node_count,
                         std::size_t kernels, const Matrix& targets, LossMode mode,
                         Matrix* dlogits, double resp_blend) {
    if (n <= 0 || logits.rows() != static_cast<std::size_t>(n) * node_count) {
        throw ShapeError("mixture_batch_nll: logits rows do not match batch");
    }
    if (targets.rows() != static_cast<std::size_t>(n) || targets.cols() != 3 * node_count) {
        throw ShapeError("mixture_batch_nll: target shape mismatch");
    }
    if (dlogits) *dlogits = Matrix(logits.rows(), logits.cols());

    const double inv_n = 1.0 / static_cast<double>(n);
    double total = 0.0;
    Matrix sample_logits(node_count, logits.cols());
    Matrix sample_grad;
    for (int s = 0; s < n; ++s) {
        const std::size_t off = static_cast<std::size_t>(s) * node_count;
        for (std::size_t i = 0; i < node_count; ++i) {
            std::copy(logits.row(off + i), logits.row(off + i) + logits.cols(),
                      sample_logits.row(i));
        }
        std::span<const double> y(targets.row(s), 3 * node_count);
        double loss;
        try {
            loss = mode == LossMode::kNode
                       ? node_nll(sample_logits, y, kernels, dlogits ? &sample_grad : nullptr,
                                  resp_blend)
                       : pose_nll(sample_logits, y, kernels, dlogits ? &sample_grad : nullptr,
                                  resp_blend);
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " (batch sample " + std::to_string(s) +
                               ")");
        }
        total += loss;
        if (dlogits) {
            for (std::size_t i = 0; i < node_count; ++i) {
                double* drow = dlogits->row(off + i);
                const double* srow = sample_grad.row(i);
                for (std::size_t c = 0; c < logits.cols(); ++c) drow[c] = srow[c] * inv_n;
            }
        }
    }
    return total * inv_n;
}

// ---------------------------------------------------------------------------
// Prediction dump

void write_predictions(std::ostream& out, std::span<const PredictionRecord> records) {
    for (const PredictionRecord& rec : records) {
        nlohmann::ordered_json j;
        j["id"] = rec.id;
        j["pi"] = rec.mixture.pi;
        j["sigma"] = rec.mixture.sigma;
        nlohmann::ordered_json mu = nlohmann::ordered_json::array();
        for (std::size_t r = 0; r < rec.mixture.mu.rows(); ++r) {
            mu.push_back(std::vector<double>(rec.mixture.mu.row(r),
                                             rec.mixture.mu.row(r) + rec.mixture.mu.cols()));
        }
        j["mu"] = std::move(mu);
        out << j.dump() << "\n";
    }
}

void write_predictions_file(const std::string& path, std::span<const PredictionRecord> records) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    write_predictions(out, records);
}

std::vector<PredictionRecord> read_predictions_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open predictions: " + path);
    std::vector<PredictionRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        try {
            PredictionRecord rec;
            rec.id = j.at("id").get<std::string>();
            rec.mixture.pi = j.at("pi").get<std::vector<double>>();
            rec.mixture.sigma = j.at("sigma").get<std::vector<double>>();
            const auto& mu = j.at("mu");
            const std::size_t m = rec.mixture.pi.size();
            if (mu.size() != m || m == 0 || rec.mixture.sigma.size() != m) {
                throw DataError("inconsistent kernel counts");
            }
            const std::size_t width = mu.at(0).size();
            if (width % 3 != 0 || width == 0) throw DataError("mu width not a multiple of 3");
            rec.mixture.kernels = m;
            rec.mixture.node_count = width / 3;
            rec.mixture.mu = Matrix(m, width);
            for (std::size_t r = 0; r < m; ++r) {
                const auto row = mu.at(r).get<std::vector<double>>();
                if (row.size() != width) throw DataError("ragged mu rows");
                std::copy(row.begin(), row.end(), rec.mixture.mu.row(r));
            }
            records.push_back(std::move(rec));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

} // namespace graphmdn
