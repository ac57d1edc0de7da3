#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vesselwatch/error.hpp"

namespace vesselwatch::svm {

struct LabeledVector {
    std::vector<double> x;
    std::size_t y = 0;
};

enum class KernelType { linear, rbf };

struct Kernel {
    KernelType type = KernelType::rbf;
    double gamma = 0.0; // rbf only; 0 selects 1/d at training time

    double operator()(std::span<const double> a, std::span<const double> b) const {
        if (type == KernelType::linear) {
            double s = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
            return s;
        }
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double e = a[i] - b[i];
            s += e * e;
        }
        return std::exp(-gamma * s);
    }

    friend bool operator==(const Kernel&, const Kernel&) = default;
};

struct SvmConfig {
    double C = 1.0;
    Kernel kernel;
    double kkt_tolerance = 1e-3;
    std::size_t max_passes = 200;          // iteration cap is max_passes * n (at least 100000)
    std::vector<double> class_weight;      // optional per-class multiplier on C

    double c_for(std::size_t cls) const { return cls < class_weight.size() ? C * class_weight[cls] : C; }
};

// Per-dimension affine map of the training range onto [-1, 1].
struct ScaleParams {
    std::vector<double> lo;
    std::vector<double> hi;

    friend bool operator==(const ScaleParams&, const ScaleParams&) = default;
};

inline ScaleParams scale_fit(const std::vector<std::vector<double>>& training) {
    if (training.empty()) throw InputError("scale_fit: empty training set");
    const std::size_t d = training.front().size();
    ScaleParams p{std::vector<double>(d, std::numeric_limits<double>::infinity()),
                  std::vector<double>(d, -std::numeric_limits<double>::infinity())};
    for (const auto& x : training) {
        if (x.size() != d) throw InputError("scale_fit: inconsistent dimensions");
        for (std::size_t i = 0; i < d; ++i) {
            p.lo[i] = std::min(p.lo[i], x[i]);
            p.hi[i] = std::max(p.hi[i], x[i]);
        }
    }
    return p;
}

inline std::vector<double> scale_apply(const ScaleParams& p, std::span<const double> x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double range = p.hi[i] - p.lo[i];
        out[i] = range > 0.0 ? -1.0 + 2.0 * (x[i] - p.lo[i]) / range : 0.0;
    }
    return out;
}

// Dual solution of a two-class soft-margin problem; labels are +1 / -1.
struct BinarySolution {
    std::vector<double> alpha;
    double b = 0.0;
    std::size_t iterations = 0;
};

// SMO with maximal-violating-pair selection. Stops once the KKT gap is below cfg.kkt_tolerance.
inline BinarySolution solve_smo(const std::vector<std::vector<double>>& X, std::span<const int> y, const Kernel& kernel,
                                double C_pos, double C_neg, const SvmConfig& cfg) {
    const std::size_t n = X.size();
    if (n != y.size()) throw InputError("smo: label count mismatch");
    bool has_pos = false, has_neg = false;
    for (int v : y) {
        if (v == 1) has_pos = true;
        else if (v == -1) has_neg = true;
        else throw InputError("smo: labels must be +1 or -1");
    }
    if (!has_pos || !has_neg) throw InputError("train_binary: both classes must be present");

    std::vector<double> Kmat(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) Kmat[i * n + j] = Kmat[j * n + i] = kernel(X[i], X[j]);
    }
    auto Q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * Kmat[i * n + j]; };
    auto Cof = [&](std::size_t i) { return y[i] > 0 ? C_pos : C_neg; };
    auto up = [&](std::size_t t, const std::vector<double>& a) { return (y[t] > 0 && a[t] < Cof(t)) || (y[t] < 0 && a[t] > 0.0); };
    auto low = [&](std::size_t t, const std::vector<double>& a) { return (y[t] > 0 && a[t] > 0.0) || (y[t] < 0 && a[t] < Cof(t)); };

    constexpr double kTau = 1e-12;
    BinarySolution sol{std::vector<double>(n, 0.0), 0.0, 0};
    auto& alpha = sol.alpha;
    std::vector<double> G(n, -1.0);
    const std::size_t cap = std::max<std::size_t>(100000, cfg.max_passes * n);

    while (sol.iterations < cap) {
        std::size_t i = n, j = n;
        double gmax = -std::numeric_limits<double>::infinity();
        double gmax2 = -std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < n; ++t) {
            if (up(t, alpha) && -y[t] * G[t] > gmax) { gmax = -y[t] * G[t]; i = t; }
            if (low(t, alpha) && y[t] * G[t] > gmax2) { gmax2 = y[t] * G[t]; j = t; }
        }
        if (i == n || j == n || gmax + gmax2 < cfg.kkt_tolerance) break;
        ++sol.iterations;

        const double Ci = Cof(i), Cj = Cof(j);
        const double old_i = alpha[i], old_j = alpha[j];
        if (y[i] != y[j]) {
            double quad = Q(i, i) + Q(j, j) + 2.0 * Q(i, j);
            if (quad <= 0.0) quad = kTau;
            const double delta = (-G[i] - G[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0) {
                if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
            } else {
                if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = -diff; }
            }
            if (diff > Ci - Cj) {
                if (alpha[i] > Ci) { alpha[i] = Ci; alpha[j] = Ci - diff; }
            } else {
                if (alpha[j] > Cj) { alpha[j] = Cj; alpha[i] = Cj + diff; }
            }
        } else {
            double quad = Q(i, i) + Q(j, j) - 2.0 * Q(i, j);
            if (quad <= 0.0) quad = kTau;
            const double delta = (G[i] - G[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > Ci) {
                if (alpha[i] > Ci) { alpha[i] = Ci; alpha[j] = sum - Ci; }
            } else {
                if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = sum; }
            }
            if (sum > Cj) {
                if (alpha[j] > Cj) { alpha[j] = Cj; alpha[i] = sum - Cj; }
            } else {
                if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = sum; }
            }
        }
        const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
        for (std::size_t t = 0; t < n; ++t) G[t] += Q(i, t) * di + Q(j, t) * dj;
    }

    // Offset: average over free multipliers, else midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yG = y[t] * G[t];
        if (alpha[t] >= Cof(t)) {
            if (y[t] < 0) ub = std::min(ub, yG);
            else lb = std::max(lb, yG);
        } else if (alpha[t] <= 0.0) {
            if (y[t] > 0) ub = std::min(ub, yG);
            else lb = std::max(lb, yG);
        } else {
            ++n_free;
            sum_free += yG;
        }
    }
    const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
    sol.b = -rho;
    return sol;
}

// Dual objective sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij.
inline double dual_objective(const std::vector<std::vector<double>>& X, std::span<const int> y, const Kernel& kernel,
                             std::span<const double> alpha) {
    double lin = 0.0, quad = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        lin += alpha[i];
        for (std::size_t j = 0; j < X.size(); ++j) quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel(X[i], X[j]);
    }
    return lin - 0.5 * quad;
}

// Largest violation of the soft-margin complementary-slackness conditions.
inline double kkt_violation(const std::vector<std::vector<double>>& X, std::span<const int> y, const Kernel& kernel,
                            std::span<const double> alpha, double b, double C_pos, double C_neg) {
    double worst = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        double f = b;
        for (std::size_t j = 0; j < X.size(); ++j) {
            if (alpha[j] != 0.0) f += alpha[j] * y[j] * kernel(X[j], X[i]);
        }
        const double margin = y[i] * f - 1.0;
        const double C = y[i] > 0 ? C_pos : C_neg;
        double v = 0.0;
        if (alpha[i] <= 0.0) v = std::max(0.0, -margin);
        else if (alpha[i] >= C) v = std::max(0.0, margin);
        else v = std::abs(margin);
        worst = std::max(worst, v);
    }
    return worst;
}

// One-vs-one member: decision > 0 votes for `positive`, otherwise `negative`.
struct BinaryModel {
    std::size_t positive = 0;
    std::size_t negative = 1;
    std::vector<std::vector<double>> support_vectors;
    std::vector<double> coef; // alpha_i * y_i
    double b = 0.0;

    double decision(const Kernel& k, std::span<const double> x) const {
        double f = b;
        for (std::size_t i = 0; i < support_vectors.size(); ++i) f += coef[i] * k(support_vectors[i], x);
        return f;
    }

    friend bool operator==(const BinaryModel&, const BinaryModel&) = default;
};

struct BinaryTraining {
    BinaryModel model;
    BinarySolution solution;
    std::vector<std::vector<double>> X; // scaled training inputs, in solver order
    std::vector<int> y;
    double C_pos = 0.0;
    double C_neg = 0.0;
};

// Trains the (positive, negative) classifier on already-scaled data.
inline BinaryTraining train_binary(const std::vector<LabeledVector>& data, std::size_t positive, std::size_t negative,
                                   const Kernel& kernel, const SvmConfig& cfg) {
    BinaryTraining out;
    for (const auto& v : data) {
        if (v.y == positive) { out.X.push_back(v.x); out.y.push_back(1); }
        else if (v.y == negative) { out.X.push_back(v.x); out.y.push_back(-1); }
    }
    out.C_pos = cfg.c_for(positive);
    out.C_neg = cfg.c_for(negative);
    if (!(out.C_pos > 0.0) || !(out.C_neg > 0.0)) throw InputError("svm: C must be positive");
    out.solution = solve_smo(out.X, out.y, kernel, out.C_pos, out.C_neg, cfg);
    out.model.positive = positive;
    out.model.negative = negative;
    out.model.b = out.solution.b;
    for (std::size_t i = 0; i < out.X.size(); ++i) {
        if (out.solution.alpha[i] > 0.0) {
            out.model.support_vectors.push_back(out.X[i]);
            out.model.coef.push_back(out.solution.alpha[i] * out.y[i]);
        }
    }
    return out;
}

struct SvmModel {
    std::size_t num_classes = 0;
    std::size_t dim = 0;
    Kernel kernel;
    ScaleParams scale;
    std::vector<BinaryModel> pairs; // (0,1), (0,2), ..., (m-2,m-1)

    friend bool operator==(const SvmModel&, const SvmModel&) = default;
};

struct MulticlassTraining {
    SvmModel model;
    std::vector<BinaryTraining> binaries;
};

// `num_classes` of 0 infers the class count from the largest label.
inline MulticlassTraining train_multiclass_detailed(const std::vector<LabeledVector>& data, const SvmConfig& cfg,
                                                    std::size_t num_classes = 0) {
    if (data.empty()) throw InputError("svm: empty training set");
    std::size_t m = num_classes;
    for (const auto& v : data) m = std::max(m, v.y + 1);
    std::vector<bool> present(m, false);
    for (const auto& v : data) present[v.y] = true;
    if (std::count(present.begin(), present.end(), true) < 2) throw InputError("svm: need at least 2 classes");

    std::vector<std::vector<double>> xs;
    xs.reserve(data.size());
    for (const auto& v : data) xs.push_back(v.x);
    MulticlassTraining out;
    out.model.num_classes = m;
    out.model.dim = xs.front().size();
    out.model.scale = scale_fit(xs);
    out.model.kernel = cfg.kernel;
    if (out.model.kernel.type == KernelType::rbf && out.model.kernel.gamma <= 0.0) {
        out.model.kernel.gamma = 1.0 / static_cast<double>(out.model.dim);
    }
    std::vector<LabeledVector> scaled;
    scaled.reserve(data.size());
    for (const auto& v : data) scaled.push_back({scale_apply(out.model.scale, v.x), v.y});

    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
            if (!present[a] || !present[b]) {
                // Absent class: a constant vote for the present one keeps the pair grid complete.
                BinaryModel constant{a, b, {}, {}, present[a] ? 1.0 : -1.0};
                out.model.pairs.push_back(constant);
                out.binaries.push_back({constant, {}, {}, {}, 0.0, 0.0});
                continue;
            }
            out.binaries.push_back(train_binary(scaled, a, b, out.model.kernel, cfg));
            out.model.pairs.push_back(out.binaries.back().model);
        }
    }
    return out;
}

inline SvmModel train_multiclass(const std::vector<LabeledVector>& data, const SvmConfig& cfg,
                                 std::size_t num_classes = 0) {
    return train_multiclass_detailed(data, cfg, num_classes).model;
}

struct Prediction {
    std::size_t label = 0;
    std::vector<std::size_t> votes;
};

inline Prediction predict(const SvmModel& model, std::span<const double> x) {
    if (x.size() != model.dim) {
        throw InputError("svm: expected dimension " + std::to_string(model.dim) + ", got " + std::to_string(x.size()));
    }
    const auto z = scale_apply(model.scale, x);
    Prediction p{0, std::vector<std::size_t>(model.num_classes, 0)};
    for (const auto& bm : model.pairs) {
        ++p.votes[bm.decision(model.kernel, z) > 0.0 ? bm.positive : bm.negative];
    }
    for (std::size_t c = 1; c < model.num_classes; ++c) {
        if (p.votes[c] > p.votes[p.label]) p.label = c;
    }
    return p;
}

} // namespace vesselwatch::svm
