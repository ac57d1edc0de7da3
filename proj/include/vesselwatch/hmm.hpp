#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vesselwatch/error.hpp"

namespace vesselwatch::hmm {

using Matrix = std::vector<std::vector<double>>;

// Discrete-emission left-to-right HMM. A[i][j] may be non-zero only for i <= j <= i + max_jump.
struct Hmm {
    std::size_t num_states = 1;
    std::size_t num_symbols = 1;
    std::size_t max_jump = 1;
    std::vector<double> pi;
    Matrix A;
    Matrix B;

    bool in_band(std::size_t i, std::size_t j) const { return j >= i && j <= i + max_jump; }

    friend bool operator==(const Hmm&, const Hmm&) = default;
};

struct TrainConfig {
    std::size_t max_iterations = 100;
    double ll_tolerance = 1e-4;
    double emission_floor = 1e-6;
    std::uint64_t seed = 1;
};

struct TrainResult {
    Hmm model;
    std::vector<double> ll_trace; // total log-likelihood of each successive model
};

inline double forward_log_likelihood(const Hmm& model, std::span<const std::size_t> obs) {
    if (obs.empty()) throw InputError("observation sequence is empty");
    for (std::size_t o : obs) {
        if (o >= model.num_symbols) {
            throw InputError("symbol " + std::to_string(o) + " out of range for K=" + std::to_string(model.num_symbols));
        }
    }
    const std::size_t N = model.num_states;
    std::vector<double> alpha(N), next(N);
    double ll = 0.0;
    double c = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        alpha[i] = model.pi[i] * model.B[i][obs[0]];
        c += alpha[i];
    }
    if (!(c > 0.0)) return -std::numeric_limits<double>::infinity();
    for (double& a : alpha) a /= c;
    ll += std::log(c);
    for (std::size_t t = 1; t < obs.size(); ++t) {
        c = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < N; ++i) s += alpha[i] * model.A[i][j];
            next[j] = s * model.B[j][obs[t]];
            c += next[j];
        }
        if (!(c > 0.0)) return -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < N; ++j) alpha[j] = next[j] / c;
        ll += std::log(c);
    }
    return ll;
}

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

// Raises entries below `floor` to `floor` and rescales the rest so the row sums to 1.
inline void floor_row(std::vector<double>& row, double floor) {
    for (int pass = 0; pass < 64; ++pass) {
        double low_mass = 0.0, high_mass = 0.0;
        bool changed = false;
        for (double& v : row) {
            if (v < floor) {
                v = floor;
                changed = true;
            }
        }
        for (double v : row) {
            if (v <= floor) low_mass += v;
            else high_mass += v;
        }
        if (!changed && std::abs(low_mass + high_mass - 1.0) < 1e-15) return;
        if (!(high_mass > 0.0)) {
            for (double& v : row) v = 1.0 / static_cast<double>(row.size());
            return;
        }
        const double scale = (1.0 - low_mass) / high_mass;
        for (double& v : row) {
            if (v > floor) v *= scale;
        }
        if (!changed) return;
    }
}

} // namespace detail

// First violated invariant, or nullopt if the model is well-formed.
inline std::optional<std::string> validate(const Hmm& m, double tol = 1e-9) {
    const std::size_t N = m.num_states, K = m.num_symbols;
    if (N < 1) return "num_states must be >= 1";
    if (K < 1) return "num_symbols must be >= 1";
    if (m.max_jump < 1) return "max_jump must be >= 1";
    if (m.pi.size() != N || m.A.size() != N || m.B.size() != N) return "parameter shapes do not match num_states";
    for (std::size_t i = 0; i < N; ++i) {
        if (m.A[i].size() != N) return "A row " + std::to_string(i) + " has wrong length";
        if (m.B[i].size() != K) return "B row " + std::to_string(i) + " has wrong length";
    }
    for (std::size_t i = 0; i < N; ++i) {
        if (m.pi[i] != (i == 0 ? 1.0 : 0.0)) return "pi must be (1, 0, ..., 0); pi[" + std::to_string(i) + "] = " + detail::fmt(m.pi[i]);
    }
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
            const double v = m.A[i][j];
            if (!std::isfinite(v) || v < 0.0) return "A[" + std::to_string(i) + "][" + std::to_string(j) + "] is negative or not finite";
            if (v != 0.0 && j < i) return "backward transition A[" + std::to_string(i) + "][" + std::to_string(j) + "]";
            if (v != 0.0 && !m.in_band(i, j)) return "transition beyond band A[" + std::to_string(i) + "][" + std::to_string(j) + "]";
        }
        double s = 0.0;
        for (double v : m.A[i]) s += v;
        if (std::abs(s - 1.0) > tol) return "A row " + std::to_string(i) + " sums to " + detail::fmt(s);
    }
    for (std::size_t i = 0; i < N; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double v = m.B[i][k];
            if (!std::isfinite(v) || v < 0.0) return "B[" + std::to_string(i) + "][" + std::to_string(k) + "] is negative or not finite";
            s += v;
        }
        if (std::abs(s - 1.0) > tol) return "B row " + std::to_string(i) + " sums to " + detail::fmt(s);
    }
    return std::nullopt;
}

// Uniform transitions over the band; emissions uniform with a zero-mean perturbation of at most 1%.
inline Hmm initial_model(std::size_t N, std::size_t K, std::size_t J, std::uint64_t seed) {
    if (N < 1 || K < 1 || J < 1) throw InputError("HMM sizes must be >= 1");
    Hmm m{N, K, J, std::vector<double>(N, 0.0), Matrix(N, std::vector<double>(N, 0.0)), Matrix(N, std::vector<double>(K))};
    m.pi[0] = 1.0;
    for (std::size_t i = 0; i < N; ++i) {
        const std::size_t last = std::min(N - 1, i + J);
        const double p = 1.0 / static_cast<double>(last - i + 1);
        for (std::size_t j = i; j <= last; ++j) m.A[i][j] = p;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-0.01, 0.01);
    for (auto& row : m.B) {
        double s = 0.0;
        for (double& v : row) {
            v = (1.0 + jitter(rng)) / static_cast<double>(K);
            s += v;
        }
        for (double& v : row) v /= s;
    }
    return m;
}

namespace detail {

struct Accumulator {
    Matrix xi;              // expected transition counts
    std::vector<double> gamma_from; // expected visits excluding the last step
    Matrix emit;            // expected emission counts
    std::vector<double> gamma_all;

    Accumulator(std::size_t N, std::size_t K)
        : xi(N, std::vector<double>(N, 0.0)), gamma_from(N, 0.0), emit(N, std::vector<double>(K, 0.0)),
          gamma_all(N, 0.0) {}
};

// Scaled forward-backward for one sequence; adds expected counts and returns log P(O | model).
inline double accumulate(const Hmm& m, std::span<const std::size_t> obs, Accumulator& acc) {
    const std::size_t N = m.num_states, T = obs.size();
    Matrix alpha(T, std::vector<double>(N, 0.0)), beta(T, std::vector<double>(N, 0.0));
    std::vector<double> c(T, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        alpha[0][i] = m.pi[i] * m.B[i][obs[0]];
        c[0] += alpha[0][i];
    }
    if (!(c[0] > 0.0)) return -std::numeric_limits<double>::infinity();
    for (double& a : alpha[0]) a /= c[0];
    for (std::size_t t = 1; t < T; ++t) {
        for (std::size_t j = 0; j < N; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < N; ++i) s += alpha[t - 1][i] * m.A[i][j];
            alpha[t][j] = s * m.B[j][obs[t]];
            c[t] += alpha[t][j];
        }
        if (!(c[t] > 0.0)) return -std::numeric_limits<double>::infinity();
        for (double& a : alpha[t]) a /= c[t];
    }
    for (std::size_t i = 0; i < N; ++i) beta[T - 1][i] = 1.0;
    for (std::size_t t = T - 1; t-- > 0;) {
        for (std::size_t i = 0; i < N; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < N; ++j) s += m.A[i][j] * m.B[j][obs[t + 1]] * beta[t + 1][j];
            beta[t][i] = s / c[t + 1];
        }
    }
    double ll = 0.0;
    for (double ct : c) ll += std::log(ct);

    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < N; ++i) {
            const double g = alpha[t][i] * beta[t][i];
            acc.emit[i][obs[t]] += g;
            acc.gamma_all[i] += g;
            if (t + 1 < T) acc.gamma_from[i] += g;
        }
        if (t + 1 == T) break;
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t j = i; j < N && m.in_band(i, j); ++j) {
                acc.xi[i][j] += alpha[t][i] * m.A[i][j] * m.B[j][obs[t + 1]] * beta[t + 1][j] / c[t + 1];
            }
        }
    }
    return ll;
}

} // namespace detail

inline double total_log_likelihood(const Hmm& m, const std::vector<std::vector<std::size_t>>& seqs) {
    double ll = 0.0;
    for (const auto& s : seqs) ll += forward_log_likelihood(m, s);
    return ll;
}

// Multi-sequence Baum-Welch. pi stays (1, 0, ..., 0); transitions outside the band stay exactly zero.
inline TrainResult baum_welch(const std::vector<std::vector<std::size_t>>& sequences, std::size_t N, std::size_t K,
                              std::size_t J, const TrainConfig& cfg = {}) {
    if (sequences.empty()) throw InputError("baum_welch: empty training set");
    if (!(cfg.emission_floor > 0.0) || !(cfg.emission_floor < 1.0 / static_cast<double>(K))) {
        throw InputError("baum_welch: emission_floor must be in (0, 1/K)");
    }
    if (cfg.max_iterations == 0 || !(cfg.ll_tolerance > 0.0)) throw InputError("baum_welch: iteration limits must be positive");
    for (const auto& s : sequences) {
        if (s.size() < 2) throw InputError("baum_welch: every sequence needs length >= 2");
        for (std::size_t o : s) {
            if (o >= K) throw InputError("baum_welch: symbol out of range");
        }
    }

    TrainResult result{initial_model(N, K, J, cfg.seed), {}};
    Hmm& m = result.model;
    for (std::size_t iter = 0;; ++iter) {
        detail::Accumulator acc(N, K);
        double ll = 0.0;
        for (const auto& s : sequences) ll += detail::accumulate(m, s, acc);
        const bool converged = !result.ll_trace.empty() && ll - result.ll_trace.back() < cfg.ll_tolerance;
        result.ll_trace.push_back(ll);
        if (converged || iter == cfg.max_iterations) break;

        for (std::size_t i = 0; i < N; ++i) {
            if (acc.gamma_from[i] > 0.0) {
                double s = 0.0;
                for (std::size_t j = i; j < N && m.in_band(i, j); ++j) s += acc.xi[i][j];
                if (s > 0.0) {
                    for (std::size_t j = i; j < N && m.in_band(i, j); ++j) m.A[i][j] = acc.xi[i][j] / s;
                }
            }
            if (acc.gamma_all[i] > 0.0) {
                for (std::size_t k = 0; k < K; ++k) m.B[i][k] = acc.emit[i][k] / acc.gamma_all[i];
                detail::floor_row(m.B[i], cfg.emission_floor);
            }
        }
    }
    return result;
}

} // namespace vesselwatch::hmm
