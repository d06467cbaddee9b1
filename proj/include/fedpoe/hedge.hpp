#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fedpoe {

/// Two-expert multiplicative weights, stored as log-weights. Used for the
/// local/federated pair and for the pair/snapshot top-level ensemble.
class HedgePair {
public:
    explicit HedgePair(double eta_c, double log_first = 0.0, double log_second = 0.0);

    double eta_c() const { return eta_c_; }
    double log_first() const { return log_first_; }
    double log_second() const { return log_second_; }
    double w_first() const;
    double w_second() const;
    /// w_first / (w_first + w_second), computed without exponentiating the
    /// log-weights directly.
    double share_first() const;

private:
    double eta_c_;
    double log_first_;
    double log_second_;
};

double hedge_combine(const HedgePair& pair, double pred_first, double pred_second);

/// Multiplies each weight by exp(-eta_c * loss). Losses must lie in [0, 1].
HedgePair hedge_update(const HedgePair& pair, double loss_first, double loss_second);

/// Per-snapshot log-weights. New snapshots enter at log-weight 0.
class SnapshotWeights {
public:
    explicit SnapshotWeights(double eta_c) : eta_c_(eta_c) {}
    SnapshotWeights(double eta_c, std::vector<double> log_w);

    void append() { log_w_.push_back(0.0); }

    double eta_c() const { return eta_c_; }
    std::size_t size() const { return log_w_.size(); }
    bool empty() const { return log_w_.empty(); }
    std::span<const double> log_w() const { return log_w_; }
    double log_w(std::size_t j) const { return log_w_.at(j); }

    void set_log_w(std::size_t j, double value) { log_w_.at(j) = value; }

private:
    double eta_c_;
    std::vector<double> log_w_;
};

/// Weighted mean of the chosen snapshots' predictions, normalized over the
/// chosen subset only. preds[k] is the prediction of snapshot chosen[k].
double snapshot_ensemble(const SnapshotWeights& weights, std::span<const std::size_t> chosen,
                         std::span<const double> preds);

/// Probability that an index with per-draw probability p appears at least
/// once in M draws with replacement: 1 - (1 - p)^M.
double inclusion_probability(double p, std::size_t M);

/// Importance-weighted update of snapshot j: when selected, its log-weight
/// drops by eta_c * loss / q; unselected snapshots are left unchanged.
SnapshotWeights importance_weight_update(const SnapshotWeights& weights, std::size_t j, double clipped_loss,
                                         double q, bool selected);

/// Hedge over kernels: predictions combined with normalized weights, each
/// weight decayed by its own kernel's clipped loss.
class KernelWeights {
public:
    KernelWeights(std::size_t num_kernels, double rate);

    std::size_t size() const { return log_w_.size(); }
    double rate() const { return rate_; }
    std::span<const double> log_w() const { return log_w_; }
    std::vector<double> weights() const;
    /// Normalized weights (sum to one).
    std::vector<double> shares() const;

    double combine(std::span<const double> kernel_preds) const;
    void update(std::span<const double> clipped_losses);

private:
    std::vector<double> log_w_;
    double rate_;
};

double multikernel_combine(std::span<const double> kernel_weights, std::span<const double> kernel_preds);

}  // namespace fedpoe
