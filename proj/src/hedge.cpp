#include "fedpoe/hedge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace fedpoe {

namespace {

void check_loss(double loss, const char* who) {
    if (!(loss >= 0.0 && loss <= 1.0)) {
        throw std::invalid_argument(std::string(who) + ": loss " + std::to_string(loss) + " outside [0, 1]");
    }
}

void check_rate(double rate, const char* who) {
    if (!(rate > 0.0) || !std::isfinite(rate)) {
        throw std::invalid_argument(std::string(who) + ": rate must be positive and finite");
    }
}

// Convex combination; the clamp absorbs last-ulp overshoot.
double convex_mix(double share_a, double a, double b) {
    const double v = share_a * a + (1.0 - share_a) * b;
    return std::clamp(v, std::min(a, b), std::max(a, b));
}

// Normalized weights from log-weights; max-shifted so nothing overflows.
std::vector<double> normalized(std::span<const double> log_w) {
    const double top = *std::max_element(log_w.begin(), log_w.end());
    std::vector<double> p(log_w.size());
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(log_w[i] - top);
        total += p[i];
    }
    for (double& v : p) v /= total;
    return p;
}

double weighted_mean(std::span<const double> log_w, std::span<const double> preds) {
    const auto p = normalized(log_w);
    double s = 0.0;
    double lo = preds[0];
    double hi = preds[0];
    for (std::size_t i = 0; i < p.size(); ++i) {
        s += p[i] * preds[i];
        lo = std::min(lo, preds[i]);
        hi = std::max(hi, preds[i]);
    }
    return std::clamp(s, lo, hi);
}

}  // namespace

HedgePair::HedgePair(double eta_c, double log_first, double log_second)
    : eta_c_(eta_c), log_first_(log_first), log_second_(log_second) {
    check_rate(eta_c, "HedgePair");
    if (!std::isfinite(log_first) || !std::isfinite(log_second)) {
        throw std::invalid_argument("HedgePair: non-finite weight");
    }
}

double HedgePair::w_first() const { return std::exp(log_first_); }
double HedgePair::w_second() const { return std::exp(log_second_); }

double HedgePair::share_first() const { return 1.0 / (1.0 + std::exp(log_second_ - log_first_)); }

double hedge_combine(const HedgePair& pair, double pred_first, double pred_second) {
    return convex_mix(pair.share_first(), pred_first, pred_second);
}

HedgePair hedge_update(const HedgePair& pair, double loss_first, double loss_second) {
    check_loss(loss_first, "hedge_update");
    check_loss(loss_second, "hedge_update");
    return HedgePair(pair.eta_c(), pair.log_first() - pair.eta_c() * loss_first,
                     pair.log_second() - pair.eta_c() * loss_second);
}

SnapshotWeights::SnapshotWeights(double eta_c, std::vector<double> log_w) : eta_c_(eta_c), log_w_(std::move(log_w)) {
    for (double v : log_w_) {
        if (!std::isfinite(v)) throw std::invalid_argument("SnapshotWeights: non-finite log-weight");
    }
}

double snapshot_ensemble(const SnapshotWeights& weights, std::span<const std::size_t> chosen,
                         std::span<const double> preds) {
    if (chosen.empty()) throw std::invalid_argument("snapshot_ensemble: empty chosen set");
    if (preds.size() != chosen.size()) {
        throw std::invalid_argument("snapshot_ensemble: predictions do not cover the chosen set");
    }
    std::vector<double> log_w(chosen.size());
    for (std::size_t k = 0; k < chosen.size(); ++k) {
        if (chosen[k] >= weights.size()) throw std::out_of_range("snapshot_ensemble: index out of range");
        log_w[k] = weights.log_w(chosen[k]);
    }
    return weighted_mean(log_w, preds);
}

double inclusion_probability(double p, std::size_t M) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("inclusion_probability: p outside [0, 1]");
    if (M == 0) throw std::invalid_argument("inclusion_probability: M must be positive");
    if (p == 1.0) return 1.0;
    // 1 - (1 - p)^M without cancellation for small p.
    return -std::expm1(static_cast<double>(M) * std::log1p(-p));
}

SnapshotWeights importance_weight_update(const SnapshotWeights& weights, std::size_t j, double clipped_loss,
                                         double q, bool selected) {
    if (!(q > 0.0)) throw std::invalid_argument("importance_weight_update: q must be positive");
    check_loss(clipped_loss, "importance_weight_update");
    if (j >= weights.size()) throw std::out_of_range("importance_weight_update: index out of range");
    SnapshotWeights out = weights;
    if (selected) out.set_log_w(j, weights.log_w(j) - weights.eta_c() * clipped_loss / q);
    return out;
}

KernelWeights::KernelWeights(std::size_t num_kernels, double rate) : log_w_(num_kernels, 0.0), rate_(rate) {
    if (num_kernels == 0) throw std::invalid_argument("KernelWeights: need at least one kernel");
    check_rate(rate, "KernelWeights");
}

std::vector<double> KernelWeights::weights() const {
    std::vector<double> w(log_w_.size());
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::exp(log_w_[k]);
    return w;
}

std::vector<double> KernelWeights::shares() const { return normalized(log_w_); }

double KernelWeights::combine(std::span<const double> kernel_preds) const {
    if (kernel_preds.size() != log_w_.size()) throw std::invalid_argument("KernelWeights: length mismatch");
    return weighted_mean(log_w_, kernel_preds);
}

void KernelWeights::update(std::span<const double> clipped_losses) {
    if (clipped_losses.size() != log_w_.size()) throw std::invalid_argument("KernelWeights: length mismatch");
    for (std::size_t k = 0; k < log_w_.size(); ++k) {
        check_loss(clipped_losses[k], "KernelWeights::update");
        log_w_[k] -= rate_ * clipped_losses[k];
    }
}

double multikernel_combine(std::span<const double> kernel_weights, std::span<const double> kernel_preds) {
    if (kernel_weights.size() != kernel_preds.size() || kernel_weights.empty()) {
        throw std::invalid_argument("multikernel_combine: length mismatch");
    }
    std::vector<double> log_w(kernel_weights.size());
    for (std::size_t k = 0; k < log_w.size(); ++k) {
        if (!(kernel_weights[k] > 0.0) || !std::isfinite(kernel_weights[k])) {
            throw std::invalid_argument("multikernel_combine: weights must be positive");
        }
        log_w[k] = std::log(kernel_weights[k]);
    }
    return weighted_mean(log_w, kernel_preds);
}

}  // namespace fedpoe
