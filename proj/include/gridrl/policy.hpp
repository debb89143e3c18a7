#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gridrl/grid_model.hpp"
#include "gridrl/linalg.hpp"
#include "gridrl/rng.hpp"
#include "gridrl/tensor.hpp"

namespace gridrl {

struct GcapcnConfig {
    int layers = 2;         // L_e
    int hidden = 32;        // h_l for every layer; also h_Le
    int moment_order = 2;   // p
    int filter_degree = 2;  // K
    enum class Activation { Tanh, Relu } activation = Activation::Tanh;
};

// Logits at masked slots are pinned here; sigmoid underflows to exactly 0.
inline constexpr double kMaskLogit = -1e9;

// Named parameter tensors with deterministic iteration order.
class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor t);
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
    std::vector<std::pair<std::string, Tensor>>& items() { return items_; }
    void zero_grad();

private:
    std::vector<std::pair<std::string, Tensor>> items_;
};

struct PolicyOutput {
    std::vector<double> logits;  // post-mask
    std::vector<double> probs;   // sigmoid of masked logits; exactly 0 on masked slots
    double value = 0.0;
};

struct PolicySizes {
    int n_nodes = 0;
    int n_lines = 0;
    int n_switch_slots = 0;
    int n_load_slots = 0;

    int action_size() const { return n_switch_slots + n_load_slots; }
    int context_size() const { return 2 + n_lines; }
};

// The PH-GCAPCN policy: capsule graph convolutions over a fixed Laplacian,
// graph-level pooling, a context feedforward branch, an action decoder with
// an independent-Bernoulli head, and a scalar value head. The W_g1 width
// binds one instance to one network size.
class GcapcnPolicy {
public:
    GcapcnPolicy(PolicySizes sizes, GcapcnConfig cfg, std::uint64_t seed);
    GcapcnPolicy(const NetworkGraph& g, GcapcnConfig cfg, std::uint64_t seed);

    const PolicySizes& sizes() const { return sizes_; }
    const GcapcnConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    // Constant L^0..L^K for a fixed topology; reused across forward passes.
    std::vector<Matrix> laplacian_powers(const Matrix& laplacian) const;

    Tensor embed_inputs(const Tensor& v) const;
    Tensor capsule_layer(const Tensor& f_prev, const std::vector<Tensor>& l_powers, int layer) const;
    Tensor node_embeddings(const Tensor& f_last) const;
    Tensor graph_embedding(const Tensor& f_nodes) const;
    Tensor context_encode(const Tensor& context_vec) const;
    Tensor action_logits(const Tensor& f_graph, const Tensor& f_context) const;
    Tensor value_estimate(const Tensor& f_graph, const Tensor& f_context) const;

    struct Forward {
        Tensor logits;         // pre-mask
        Tensor masked_logits;  // masked slots pinned to kMaskLogit
        Tensor probs;          // sigmoid(masked_logits)
        Tensor value;
    };
    // mask has action_size entries; only switch slots are ever masked.
    Forward forward(const Matrix& voltages, double e_supp, double v_viol,
                    const std::vector<double>& branch_flows, const std::vector<std::uint8_t>& mask,
                    const std::vector<Matrix>& l_powers) const;

    // Per-slot Bernoulli log-probability of `action`, masked slots excluded.
    Tensor log_prob(const Forward& fw, const std::vector<std::uint8_t>& action,
                    const std::vector<std::uint8_t>& mask) const;
    // Sum of per-slot binary entropies over unmasked slots.
    Tensor entropy(const Forward& fw, const std::vector<std::uint8_t>& mask) const;

    static PolicyOutput mask_and_distribution(const std::vector<double>& logits,
                                              const std::vector<std::uint8_t>& mask, double value);
    static std::vector<std::uint8_t> greedy_action(const std::vector<double>& probs);
    // Independent Bernoulli draws; returns the action and its log-probability
    // with probabilities clamped to [1e-7, 1-1e-7] and masked slots forced
    // OFF, contributing zero.
    static std::pair<std::vector<std::uint8_t>, double> sample_action(
        const std::vector<double>& probs, const std::vector<std::uint8_t>& mask, Rng& rng);

private:
    PolicySizes sizes_;
    GcapcnConfig cfg_;
    ParamStore params_;

    Tensor activate(const Tensor& t) const;
    void init_params(std::uint64_t seed);
};

inline constexpr double kProbClamp = 1e-7;

}  // namespace gridrl
