#pragma once

// Learned guided sampling: a per-match MLP scores normalized correspondences,
// RANSAC draws minimal sets proportionally to exp(logit), and the network is
// trained with the score-function (REINFORCE) gradient of the expected
// hypothesis pose error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcd/core.hpp"
#include "mcd/diffusion.hpp"
#include "mcd/geometry.hpp"
#include "mcd/parallel.hpp"
#include "mcd/ransac.hpp"
#include "mcd/rng.hpp"

namespace mcd {

inline constexpr int kModelFormatVersion = 1;
inline constexpr double kDefaultLogitBound = 2.0;

struct DenseLayer {
    Eigen::MatrixXd W;  // out x in
    Eigen::VectorXd b;
};

/// Pointwise MLP: tanh on hidden layers, linear scalar output.
struct SamplerModel {
    std::vector<int> layer_dims{4, 64, 64, 1};
    std::string activation = "tanh";
    int version = kModelFormatVersion;
    // > 0: logits are squashed to bound * tanh(z / bound), which caps the
    // largest-to-smallest sampling weight ratio at exp(2 * bound).
    double logit_bound = kDefaultLogitBound;
    std::vector<DenseLayer> layers;

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
            n += static_cast<std::size_t>(layer_dims[l + 1]) * (static_cast<std::size_t>(layer_dims[l]) + 1);
        }
        return n;
    }

    void validate() const {
        if (layer_dims.size() < 2 || layer_dims.front() != 4 || layer_dims.back() != 1) {
            throw Error(ErrorKind::Data, "sampler layer_dims must start at 4 and end at 1");
        }
        if (activation != "tanh") throw Error(ErrorKind::Data, "unsupported activation '" + activation + "'");
        if (!(logit_bound >= 0.0) || !std::isfinite(logit_bound)) throw Error(ErrorKind::Data, "logit_bound must be finite and >= 0");
        if (layers.size() + 1 != layer_dims.size()) throw Error(ErrorKind::Data, "layer count disagrees with layer_dims");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            if (layers[l].W.rows() != layer_dims[l + 1] || layers[l].W.cols() != layer_dims[l] ||
                layers[l].b.size() != layer_dims[l + 1]) {
                throw Error(ErrorKind::Data, "layer " + std::to_string(l) + " shape disagrees with layer_dims");
            }
            if (!layers[l].W.allFinite() || !layers[l].b.allFinite()) throw Error(ErrorKind::Numeric, "non-finite parameter");
        }
    }

    /// Row-major weights then biases, layer by layer.
    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(parameter_count());
        for (const auto& L : layers) {
            for (Eigen::Index r = 0; r < L.W.rows(); ++r) {
                for (Eigen::Index c = 0; c < L.W.cols(); ++c) out.push_back(L.W(r, c));
            }
            for (Eigen::Index r = 0; r < L.b.size(); ++r) out.push_back(L.b(r));
        }
        return out;
    }

    void unflatten(std::span<const double> p) {
        if (p.size() != parameter_count()) throw Error(ErrorKind::Data, "parameter count disagrees with layer_dims");
        layers.resize(layer_dims.size() - 1);
        std::size_t k = 0;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            auto& L = layers[l];
            L.W.resize(layer_dims[l + 1], layer_dims[l]);
            L.b.resize(layer_dims[l + 1]);
            for (Eigen::Index r = 0; r < L.W.rows(); ++r) {
                for (Eigen::Index c = 0; c < L.W.cols(); ++c) L.W(r, c) = p[k++];
            }
            for (Eigen::Index r = 0; r < L.b.size(); ++r) L.b(r) = p[k++];
        }
    }

    static SamplerModel zeros(std::vector<int> dims, double logit_bound = kDefaultLogitBound) {
        SamplerModel m;
        m.layer_dims = std::move(dims);
        m.logit_bound = logit_bound;
        m.unflatten(std::vector<double>(m.parameter_count(), 0.0));
        return m;
    }

    /// Hidden weights ~ N(0, 1/fan_in), zero biases, zero output layer:
    /// the initial sampling distribution is uniform.
    static SamplerModel initialize(std::vector<int> dims, std::uint64_t seed, double logit_bound = kDefaultLogitBound) {
        SamplerModel m = zeros(std::move(dims), logit_bound);
        Rng rng(seed);
        for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) {
            auto& W = m.layers[l].W;
            const double sd = 1.0 / std::sqrt(static_cast<double>(W.cols()));
            for (Eigen::Index r = 0; r < W.rows(); ++r) {
                for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = sd * rng.normal();
            }
        }
        m.validate();
        return m;
    }
};

/// 4 x N feature matrix of normalized correspondences.
inline Eigen::MatrixXd features(std::span<const Correspondence> normalized) {
    Eigen::MatrixXd X(4, static_cast<Eigen::Index>(normalized.size()));
    for (std::size_t i = 0; i < normalized.size(); ++i) {
        for (int k = 0; k < 4; ++k) X(k, static_cast<Eigen::Index>(i)) = normalized[i][k];
    }
    return X;
}

struct ForwardCache {
    std::vector<Eigen::MatrixXd> activations;  // input plus every hidden output
    Eigen::VectorXd squash;                    // tanh(z / bound) when the logits are bounded
    Eigen::VectorXd logits;
};

inline ForwardCache forward_cached(const SamplerModel& model, const Eigen::MatrixXd& X) {
    ForwardCache cache;
    cache.activations.reserve(model.layers.size());
    cache.activations.push_back(X);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& L = model.layers[l];
        Eigen::MatrixXd Z = L.W * cache.activations.back();
        Z.colwise() += L.b;
        if (l + 1 == model.layers.size()) {
            cache.logits = Z.row(0).transpose();
            if (model.logit_bound > 0.0) {
                cache.squash = (cache.logits.array() / model.logit_bound).tanh().matrix();
                cache.logits = model.logit_bound * cache.squash;
            }
        } else {
            cache.activations.push_back(Z.array().tanh().matrix());
        }
    }
    if (!cache.logits.allFinite()) throw Error(ErrorKind::Numeric, "non-finite sampler activation");
    return cache;
}

/// One logit per match.
inline Eigen::VectorXd forward(const SamplerModel& model, std::span<const Correspondence> normalized) {
    return forward_cached(model, features(normalized)).logits;
}

/// exp(logit - max logit): positive, shift-invariant sampling weights.
inline std::vector<double> sampling_weights(const Eigen::VectorXd& logits) {
    std::vector<double> w(static_cast<std::size_t>(logits.size()));
    if (logits.size() == 0) return w;
    const double mx = logits.maxCoeff();
    for (Eigen::Index i = 0; i < logits.size(); ++i) w[static_cast<std::size_t>(i)] = std::exp(logits(i) - mx);
    return w;
}

/// Gradient of the loss w.r.t. every parameter given dLoss/dlogit per match.
inline SamplerModel backward(const SamplerModel& model, const ForwardCache& cache, const Eigen::VectorXd& dlogits) {
    SamplerModel grad = SamplerModel::zeros(model.layer_dims, model.logit_bound);
    Eigen::MatrixXd delta = dlogits.transpose();  // 1 x N
    if (model.logit_bound > 0.0) delta.array() *= (1.0 - cache.squash.array().square()).transpose();
    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const Eigen::MatrixXd& input = cache.activations[l];
        grad.layers[l].W = delta * input.transpose();
        grad.layers[l].b = delta.rowwise().sum();
        if (l == 0) break;
        Eigen::MatrixXd back = model.layers[l].W.transpose() * delta;
        // tanh' = 1 - tanh^2, with the tanh output stored as this layer's input
        delta = back.array() * (1.0 - input.array().square());
    }
    return grad;
}

/// sum_j log(w_{i_j} / sum of weights not yet drawn), in draw order.
inline double subset_logprob(std::span<const double> weights, std::span<const std::size_t> indices) {
    std::vector<bool> taken(weights.size(), false);
    double lp = 0.0;
    for (const std::size_t i : indices) {
        if (i >= weights.size() || taken[i]) throw Error(ErrorKind::Domain, "subset indices must be distinct and in range");
        double remaining = 0.0;
        for (std::size_t n = 0; n < weights.size(); ++n) {
            if (!taken[n]) remaining += weights[n];
        }
        if (!(remaining > 0.0) || !(weights[i] > 0.0)) throw Error(ErrorKind::Numeric, "zero remaining probability mass");
        lp += std::log(weights[i] / remaining);
        taken[i] = true;
    }
    return lp;
}

/// d subset_logprob / d logit_n with weights = exp(logits - max); accumulated
/// into `out` with the given coefficient.
inline void accumulate_logprob_gradient(std::span<const double> weights, std::span<const std::size_t> indices,
                                        double coeff, Eigen::VectorXd& out) {
    const std::size_t n = weights.size();
    std::vector<int> draw_pos(n, -1);
    for (std::size_t j = 0; j < indices.size(); ++j) draw_pos[indices[j]] = static_cast<int>(j);
    // prefix[j] = sum_{q <= j} 1 / remaining_q
    std::vector<double> prefix(indices.size());
    std::vector<bool> taken(n, false);
    double acc = 0.0;
    for (std::size_t j = 0; j < indices.size(); ++j) {
        double remaining = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!taken[i]) remaining += weights[i];
        }
        acc += 1.0 / remaining;
        prefix[j] = acc;
        taken[indices[j]] = true;
    }
    const double total_inv = indices.empty() ? 0.0 : prefix.back();
    for (std::size_t i = 0; i < n; ++i) {
        const int q = draw_pos[i];
        const double g = q < 0 ? -weights[i] * total_inv : 1.0 - weights[i] * prefix[static_cast<std::size_t>(q)];
        out(static_cast<Eigen::Index>(i)) += coeff * g;
    }
}

enum class Baseline { Mean, None };

inline Baseline baseline_from_string(const std::string& s) {
    if (s == "mean") return Baseline::Mean;
    if (s == "none") return Baseline::None;
    throw Error(ErrorKind::Config, "train.baseline must be 'mean' or 'none'");
}

inline const char* to_string(Baseline b) { return b == Baseline::Mean ? "mean" : "none"; }

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t scenes_per_epoch = 0;  // 0 = every available scene
    std::size_t K = 8;
    std::size_t H = 4;
    double learning_rate = 0.01;
    double lr_decay = 0.97;
    Baseline baseline = Baseline::Mean;
    std::uint64_t seed = 3;
    std::size_t min_set = kMinimalSetSize;
    // Hypothesis losses are clipped at the largest AUC threshold, so subsets
    // that fail outright all cost the same and contribute no gradient noise.
    double loss_cap = 20.0;
    double refit_threshold = 1e-3;  // 0 = score the raw minimal-set hypothesis

    void validate() const {
        if (K < 2) throw Error(ErrorKind::Config, "train.K must be >= 2");
        if (H < 1) throw Error(ErrorKind::Config, "train.H must be >= 1");
        if (!(learning_rate > 0.0)) throw Error(ErrorKind::Config, "train.learning_rate must be > 0");
        if (!(lr_decay > 0.0)) throw Error(ErrorKind::Config, "train.lr_decay must be > 0");
        if (!(loss_cap > 0.0 && loss_cap <= kFailedPoseError)) throw Error(ErrorKind::Config, "train.loss_cap must lie in (0, 180]");
        if (!(refit_threshold >= 0.0)) throw Error(ErrorKind::Config, "train.refit_threshold must be >= 0");
    }
};

/// One term of the Monte Carlo objective: a scene and K sampled minimal sets.
struct Episode {
    Eigen::MatrixXd features;  // 4 x N normalized coordinates
    std::vector<std::vector<std::size_t>> subset_samples;
    std::vector<double> losses;
    std::vector<double> logprobs;
};

/// Per-sample advantages L_k - b_k. With the mean baseline each sample is
/// compared against the mean of the other K-1 losses, which keeps the
/// estimator unbiased; identical losses give exact zeros.
inline std::vector<double> advantages(std::span<const double> losses, Baseline baseline) {
    std::vector<double> adv(losses.begin(), losses.end());
    if (baseline == Baseline::None || losses.size() < 2) return adv;
    const double ref = losses[0];
    double sum = 0.0;
    for (const double l : losses) sum += l - ref;
    const double k = static_cast<double>(losses.size());
    for (std::size_t i = 0; i < losses.size(); ++i) {
        const double d = losses[i] - ref;
        adv[i] = d - (sum - d) / (k - 1.0);
    }
    return adv;
}

struct StepDiagnostics {
    double grad_norm = 0.0;
    double mean_loss = 0.0;
    bool applied = false;
};

/// Score-function gradient estimate over a batch of episodes,
/// g = 1/(H K) sum_i sum_k (L_ik - b_ik) grad log p(subset_ik).
inline SamplerModel reinforce_gradient(const SamplerModel& model, std::span<const Episode> episodes, Baseline baseline,
                                       double* mean_loss = nullptr) {
    SamplerModel total = SamplerModel::zeros(model.layer_dims, model.logit_bound);
    std::vector<double> flat(total.parameter_count(), 0.0);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (const Episode& ep : episodes) {
        if (ep.subset_samples.size() != ep.losses.size() || ep.losses.size() < 2) {
            throw Error(ErrorKind::Domain, "episode needs K >= 2 samples with one loss each");
        }
        const double norm = 1.0 / static_cast<double>(episodes.size() * ep.losses.size());
        const ForwardCache cache = forward_cached(model, ep.features);
        const std::vector<double> w = sampling_weights(cache.logits);
        const std::vector<double> adv = advantages(ep.losses, baseline);
        Eigen::VectorXd dlogits = Eigen::VectorXd::Zero(cache.logits.size());
        for (std::size_t k = 0; k < ep.subset_samples.size(); ++k) {
            if (adv[k] != 0.0) accumulate_logprob_gradient(w, ep.subset_samples[k], adv[k] * norm, dlogits);
            loss_sum += ep.losses[k];
            ++loss_count;
        }
        const std::vector<double> g = backward(model, cache, dlogits).flatten();
        for (std::size_t i = 0; i < flat.size(); ++i) flat[i] += g[i];
    }
    total.unflatten(flat);
    if (mean_loss) *mean_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    return total;
}

/// Gradient descent step along -g. A non-finite gradient leaves the model untouched.
inline StepDiagnostics reinforce_step(SamplerModel& model, std::span<const Episode> episodes, double learning_rate,
                                      Baseline baseline) {
    StepDiagnostics diag;
    const std::vector<double> g = reinforce_gradient(model, episodes, baseline, &diag.mean_loss).flatten();
    double sq = 0.0;
    for (const double v : g) sq += v * v;
    diag.grad_norm = std::sqrt(sq);
    if (!std::isfinite(diag.grad_norm)) return diag;
    std::vector<double> p = model.flatten();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= learning_rate * g[i];
    model.unflatten(p);
    diag.applied = true;
    return diag;
}

/// A scene the sampler can learn from: pixel matches plus what the loss needs.
struct TrainingScene {
    Camera cam1, cam2;
    RelativePose pose;
    MatchSet matches;
};

/// How a sampled minimal set is turned into a training loss.
struct LossOptions {
    double cap = kFailedPoseError;  // losses are clipped to this many degrees
    double refit_threshold = 0.0;   // > 0: refit on the hypothesis' consensus set first
};

/// Pose error of the hypothesis induced by one minimal set (180 on failure).
/// With a refit threshold the minimal-set E is refit once on its own
/// consensus set, the same single refinement the estimator applies.
inline double hypothesis_loss(std::span<const Correspondence> normalized, std::span<const std::size_t> subset,
                              const RelativePose& gt, const LossOptions& opt = {}) {
    const auto sample = detail::gather(normalized, subset);
    double err = kFailedPoseError;
    try {
        Eigen::Matrix3d E = eight_point(sample);
        std::vector<Correspondence> support = sample;
        if (opt.refit_threshold > 0.0) {
            const InlierCount ic = count_inliers(E, normalized, opt.refit_threshold);
            if (ic.score >= kMinimalSetSize) {
                try {
                    auto consensus = detail::gather_mask(normalized, ic.mask);
                    const Eigen::Matrix3d refit = eight_point(consensus);
                    if (count_inliers(refit, normalized, opt.refit_threshold).score >= ic.score) {
                        E = refit;
                        support = std::move(consensus);
                    }
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::SolverDegenerate && e.kind() != ErrorKind::Numeric) throw;
                }
            }
        }
        err = pose_error(decompose_essential(E, support), gt);
    } catch (const Error&) {
        err = kFailedPoseError;
    }
    return std::min(opt.cap, err);
}

/// Draws K minimal sets from the model's distribution and scores each.
inline Episode make_episode(const SamplerModel& model, const TrainingScene& scene, std::size_t K, std::size_t m,
                            Rng& rng, const LossOptions& loss = {}) {
    const auto normalized = normalize_matches(scene.matches.matches, scene.cam1, scene.cam2);
    Episode ep;
    ep.features = features(normalized);
    const std::vector<double> w = sampling_weights(forward_cached(model, ep.features).logits);
    for (std::size_t k = 0; k < K; ++k) {
        auto subset = sample_minimal_set(w, m, rng);
        ep.losses.push_back(hypothesis_loss(normalized, subset, scene.pose, loss));
        ep.logprobs.push_back(subset_logprob(w, subset));
        ep.subset_samples.push_back(std::move(subset));
    }
    return ep;
}

struct EpochLog {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    double grad_norm = 0.0;
    double lr = 0.0;
    std::size_t scenes = 0;
    bool truncated = false;
};

/// Scene provider for training. `count()` scenes are available; `get(epoch, i)`
/// may return a fresh Monte Carlo draw per epoch or a fixed scene.
struct TrainingSource {
    std::function<std::size_t()> count;
    std::function<TrainingScene(std::size_t epoch, std::size_t index)> get;
};

inline TrainingSource fixed_source(const std::vector<TrainingScene>& scenes) {
    return {[&scenes] { return scenes.size(); },
            [&scenes](std::size_t, std::size_t i) { return scenes[i]; }};
}

/// Re-diffuses every ground-truth scene each epoch.
inline TrainingSource mcd_source(const std::vector<ScenePair>& gt, McdConfig cfg, std::uint64_t master_seed) {
    return {[&gt] { return gt.size(); },
            [&gt, cfg, master_seed](std::size_t epoch, std::size_t i) {
                Rng rng(derive_seed(derive_seed(master_seed, epoch), i));
                DiffusedSet d = mcd_sample(gt[i], cfg, rng);
                return TrainingScene{gt[i].cam1, gt[i].cam2, gt[i].pose, std::move(d.matches)};
            }};
}

struct TrainResult {
    SamplerModel model;
    std::vector<EpochLog> log;
    std::vector<std::string> warnings;
};

inline TrainResult train(SamplerModel model, const TrainingSource& source, const TrainConfig& cfg) {
    cfg.validate();
    model.validate();
    TrainResult result;
    const std::size_t available = source.count();
    if (available == 0) throw Error(ErrorKind::InsufficientData, "training stream is empty");
    std::size_t per_epoch = cfg.scenes_per_epoch == 0 ? available : cfg.scenes_per_epoch;
    bool truncated = false;
    if (per_epoch > available) {
        result.warnings.push_back("stream exhausted: epoch truncated to " + std::to_string(available) + " of " +
                                  std::to_string(per_epoch) + " scenes");
        per_epoch = available;
        truncated = true;
    }

    const LossOptions loss{cfg.loss_cap, cfg.refit_threshold};
    double lr = cfg.learning_rate;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::uint64_t epoch_seed = derive_seed(cfg.seed, epoch);
        Rng order_rng(epoch_seed);
        const std::vector<std::size_t> order = [&] {
            std::vector<std::size_t> idx(available);
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            for (std::size_t i = 0; i + 1 < available; ++i) {
                std::swap(idx[i], idx[i + static_cast<std::size_t>(order_rng.index(available - i))]);
            }
            idx.resize(per_epoch);
            return idx;
        }();

        EpochLog entry{epoch, 0.0, 0.0, lr, per_epoch, truncated};
        double loss_sum = 0.0, grad_sum = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < per_epoch; start += cfg.H) {
            // Episodes are generated in parallel from the current model; the
            // update below happens only after every worker has finished.
            const std::size_t stop = std::min(per_epoch, start + cfg.H);
            std::vector<std::optional<Episode>> slots(stop - start);
            parallel_for(slots.size(), [&](std::size_t k) {
                const std::size_t j = start + k;
                const TrainingScene scene = source.get(epoch, order[j]);
                if (scene.matches.size() < cfg.min_set) return;
                Rng rng(derive_seed(epoch_seed, 1 + j));
                try {
                    slots[k] = make_episode(model, scene, cfg.K, cfg.min_set, rng, loss);
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::SamplingInfeasible && e.kind() != ErrorKind::Numeric) throw;
                }
            });
            std::vector<Episode> batch;
            for (auto& e : slots) {
                if (e) batch.push_back(std::move(*e));
            }
            if (batch.empty()) continue;
            const StepDiagnostics d = reinforce_step(model, batch, lr, cfg.baseline);
            if (!d.applied) {
                result.warnings.push_back("epoch " + std::to_string(epoch) + ": non-finite gradient, step skipped");
            }
            loss_sum += d.mean_loss;
            grad_sum += std::isfinite(d.grad_norm) ? d.grad_norm : 0.0;
            ++steps;
        }
        entry.mean_loss = steps ? loss_sum / static_cast<double>(steps) : 0.0;
        entry.grad_norm = steps ? grad_sum / static_cast<double>(steps) : 0.0;
        result.log.push_back(entry);
        lr *= cfg.lr_decay;
    }
    result.model = std::move(model);
    return result;
}

}  // namespace mcd
