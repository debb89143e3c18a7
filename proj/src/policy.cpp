#include "gridrl/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace gridrl {

Tensor& ParamStore::add(const std::string& name, Tensor t) {
    for (auto& [n, _] : items_)
        if (n == name) throw std::invalid_argument("duplicate parameter name: " + name);
    items_.emplace_back(name, std::move(t));
    return items_.back().second;
}

Tensor& ParamStore::get(const std::string& name) {
    for (auto& [n, t] : items_)
        if (n == name) return t;
    throw std::out_of_range("unknown parameter: " + name);
}

const Tensor& ParamStore::get(const std::string& name) const {
    for (const auto& [n, t] : items_)
        if (n == name) return t;
    throw std::out_of_range("unknown parameter: " + name);
}

void ParamStore::zero_grad() {
    for (auto& [_, t] : items_) t.zero_grad();
}

GcapcnPolicy::GcapcnPolicy(PolicySizes sizes, GcapcnConfig cfg, std::uint64_t seed)
    : sizes_(sizes), cfg_(cfg) {
    if (cfg_.layers < 1 || cfg_.hidden < 1 || cfg_.moment_order < 1 || cfg_.filter_degree < 0)
        throw std::invalid_argument("invalid gcapcn config");
    init_params(seed);
}

GcapcnPolicy::GcapcnPolicy(const NetworkGraph& g, GcapcnConfig cfg, std::uint64_t seed)
    : GcapcnPolicy(PolicySizes{g.n(), static_cast<int>(g.lines().size()),
                               static_cast<int>(g.switches().size()),
                               static_cast<int>(g.sheddable_loads().size())},
                   cfg, seed) {}

void GcapcnPolicy::init_params(std::uint64_t seed) {
    Rng rng = make_stream(seed, "init");
    int h = cfg_.hidden;
    int p = cfg_.moment_order;
    int k_deg = cfg_.filter_degree;
    int n = sizes_.n_nodes;
    int slots = sizes_.action_size();

    auto weight = [&](const std::string& name, int rows, int cols, int fan_in, int fan_out) {
        double bound = std::sqrt(6.0 / (fan_in + fan_out));
        Tensor t(rows, cols, 0.0, true);
        for (double& v : t.values_mut()) v = uniform_real(rng, -bound, bound);
        params_.add(name, std::move(t));
    };
    auto bias = [&](const std::string& name, int rows) { params_.add(name, Tensor(rows, 1, 0.0, true)); };

    weight("embed.W", 3, h, 3, h);
    for (int layer = 1; layer <= cfg_.layers; ++layer) {
        int d_in = (layer == 1) ? h : h * p;
        for (int i = 1; i <= p; ++i)
            for (int k = 0; k <= k_deg; ++k)
                weight("gcapcn.l" + std::to_string(layer) + ".W" + std::to_string(i) + "_" + std::to_string(k),
                       d_in, h, d_in, h);
    }
    weight("node_proj.W", h * p, h, h * p, h);
    weight("graph.Wg1", h, n, n, h);
    weight("graph.Wg2", h, h, h, h);
    int ctx_in = sizes_.context_size();
    weight("context.W1", h, ctx_in, ctx_in, h);
    bias("context.b1", h);
    weight("context.W2", h, h, h, h);
    bias("context.b2", h);
    weight("decoder.mlp.W", h, h, h, h);
    bias("decoder.mlp.b", h);
    weight("decoder.ff.W1", h, h, h, h);
    bias("decoder.ff.b1", h);
    weight("decoder.ff.W2", slots, h, h, slots);
    bias("decoder.ff.b2", slots);
    weight("value.W1", h, h, h, h);
    bias("value.b1", h);
    weight("value.W2", 1, h, h, 1);
    bias("value.b2", 1);
}

Tensor GcapcnPolicy::activate(const Tensor& t) const {
    return cfg_.activation == GcapcnConfig::Activation::Tanh ? tanh_t(t) : relu_t(t);
}

std::vector<Matrix> GcapcnPolicy::laplacian_powers(const Matrix& laplacian) const {
    std::vector<Matrix> pows;
    pows.reserve(cfg_.filter_degree + 1);
    pows.push_back(Matrix::identity(laplacian.rows()));
    for (int k = 1; k <= cfg_.filter_degree; ++k) pows.push_back(matmul(laplacian, pows.back()));
    return pows;
}

Tensor GcapcnPolicy::embed_inputs(const Tensor& v) const {
    for (double x : v.values())
        if (!std::isfinite(x)) throw std::invalid_argument("embed_inputs: non-finite voltages");
    return matmul(v, params_.get("embed.W"));
}

Tensor GcapcnPolicy::capsule_layer(const Tensor& f_prev, const std::vector<Tensor>& l_powers,
                                   int layer) const {
    int p = cfg_.moment_order;
    std::vector<Tensor> capsules;
    capsules.reserve(p);
    for (int i = 1; i <= p; ++i) {
        Tensor moment = (i == 1) ? f_prev : pow_int(f_prev, i);
        Tensor acc;
        for (int k = 0; k <= cfg_.filter_degree; ++k) {
            const Tensor& w = params_.get("gcapcn.l" + std::to_string(layer) + ".W" +
                                          std::to_string(i) + "_" + std::to_string(k));
            // L^0 is the identity: skip the graph mixing for k=0.
            Tensor mixed = (k == 0) ? moment : matmul(l_powers[k], moment);
            Tensor term = matmul(mixed, w);
            acc = acc.defined() ? add(acc, term) : term;
        }
        Tensor f_i = activate(acc);
        for (double x : f_i.values())
            if (!std::isfinite(x)) throw std::runtime_error("capsule_layer: non-finite capsule output");
        capsules.push_back(std::move(f_i));
    }
    return concat_cols(capsules);  // flatten the capsule axis into features
}

Tensor GcapcnPolicy::node_embeddings(const Tensor& f_last) const {
    return matmul(f_last, params_.get("node_proj.W"));
}

Tensor GcapcnPolicy::graph_embedding(const Tensor& f_nodes) const {
    if (f_nodes.rows() != sizes_.n_nodes)
        throw std::invalid_argument("graph_embedding: node count does not match trained W_g1 width");
    Tensor pooled = matmul(params_.get("graph.Wg1"), f_nodes);
    Tensor mixed = matmul(params_.get("graph.Wg2"), pooled);
    return mean_last_axis(mixed);
}

Tensor GcapcnPolicy::context_encode(const Tensor& context_vec) const {
    if (context_vec.rows() != sizes_.context_size() || context_vec.cols() != 1)
        throw std::invalid_argument("context_encode: context length mismatch");
    Tensor h1 = activate(add(matmul(params_.get("context.W1"), context_vec), params_.get("context.b1")));
    return activate(add(matmul(params_.get("context.W2"), h1), params_.get("context.b2")));
}

Tensor GcapcnPolicy::action_logits(const Tensor& f_graph, const Tensor& f_context) const {
    Tensor combined = add(f_graph, f_context);
    Tensor m = activate(add(matmul(params_.get("decoder.mlp.W"), combined), params_.get("decoder.mlp.b")));
    Tensor z = activate(add(matmul(params_.get("decoder.ff.W1"), m), params_.get("decoder.ff.b1")));
    return add(matmul(params_.get("decoder.ff.W2"), z), params_.get("decoder.ff.b2"));
}

Tensor GcapcnPolicy::value_estimate(const Tensor& f_graph, const Tensor& f_context) const {
    Tensor combined = add(f_graph, f_context);
    Tensor h1 = activate(add(matmul(params_.get("value.W1"), combined), params_.get("value.b1")));
    return add(matmul(params_.get("value.W2"), h1), params_.get("value.b2"));
}

GcapcnPolicy::Forward GcapcnPolicy::forward(const Matrix& voltages, double e_supp, double v_viol,
                                            const std::vector<double>& branch_flows,
                                            const std::vector<std::uint8_t>& mask,
                                            const std::vector<Matrix>& l_powers) const {
    if (static_cast<int>(branch_flows.size()) != sizes_.n_lines)
        throw std::invalid_argument("forward: branch flow vector length mismatch");
    if (static_cast<int>(mask.size()) != sizes_.action_size())
        throw std::invalid_argument("forward: mask length mismatch");

    std::vector<Tensor> l_pow_tensors;
    l_pow_tensors.reserve(l_powers.size());
    for (const Matrix& m : l_powers) l_pow_tensors.push_back(Tensor::from_matrix(m));

    Tensor f = embed_inputs(Tensor::from_matrix(voltages));
    for (int layer = 1; layer <= cfg_.layers; ++layer) f = capsule_layer(f, l_pow_tensors, layer);
    Tensor f_nodes = node_embeddings(f);
    Tensor f_graph = graph_embedding(f_nodes);

    std::vector<double> ctx_vals;
    ctx_vals.reserve(sizes_.context_size());
    ctx_vals.push_back(e_supp);
    ctx_vals.push_back(v_viol);
    ctx_vals.insert(ctx_vals.end(), branch_flows.begin(), branch_flows.end());
    Tensor f_context = context_encode(Tensor::from_values(sizes_.context_size(), 1, std::move(ctx_vals)));

    Forward fw;
    fw.logits = action_logits(f_graph, f_context);
    int slots = sizes_.action_size();
    std::vector<double> keep(slots), sentinel(slots);
    for (int i = 0; i < slots; ++i) {
        keep[i] = mask[i] ? 0.0 : 1.0;
        sentinel[i] = mask[i] ? kMaskLogit : 0.0;
    }
    fw.masked_logits = add(mul(fw.logits, Tensor::from_values(slots, 1, keep)),
                           Tensor::from_values(slots, 1, sentinel));
    fw.probs = sigmoid_t(fw.masked_logits);
    fw.value = value_estimate(f_graph, f_context);
    return fw;
}

Tensor GcapcnPolicy::log_prob(const Forward& fw, const std::vector<std::uint8_t>& action,
                              const std::vector<std::uint8_t>& mask) const {
    int slots = sizes_.action_size();
    std::vector<double> act(slots), not_act(slots), keep(slots);
    for (int i = 0; i < slots; ++i) {
        act[i] = action[i] ? 1.0 : 0.0;
        not_act[i] = action[i] ? 0.0 : 1.0;
        keep[i] = mask[i] ? 0.0 : 1.0;
    }
    Tensor pc = clamp_t(fw.probs, kProbClamp, 1.0 - kProbClamp);
    Tensor per_slot = add(mul(log_t(pc), Tensor::from_values(slots, 1, act)),
                          mul(log_t(sub(Tensor(slots, 1, 1.0), pc)), Tensor::from_values(slots, 1, not_act)));
    return sum_all(mul(per_slot, Tensor::from_values(slots, 1, keep)));
}

Tensor GcapcnPolicy::entropy(const Forward& fw, const std::vector<std::uint8_t>& mask) const {
    int slots = sizes_.action_size();
    std::vector<double> keep(slots);
    for (int i = 0; i < slots; ++i) keep[i] = mask[i] ? 0.0 : 1.0;
    Tensor pc = clamp_t(fw.probs, kProbClamp, 1.0 - kProbClamp);
    Tensor one_minus = sub(Tensor(slots, 1, 1.0), pc);
    Tensor h = sub(Tensor(slots, 1, 0.0),
                   add(mul(pc, log_t(pc)), mul(one_minus, log_t(one_minus))));
    return sum_all(mul(h, Tensor::from_values(slots, 1, keep)));
}

PolicyOutput GcapcnPolicy::mask_and_distribution(const std::vector<double>& logits,
                                                 const std::vector<std::uint8_t>& mask, double value) {
    if (logits.size() != mask.size()) throw std::invalid_argument("mask length mismatch");
    PolicyOutput out;
    out.logits.resize(logits.size());
    out.probs.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out.logits[i] = mask[i] ? kMaskLogit : logits[i];
        out.probs[i] = 1.0 / (1.0 + std::exp(-out.logits[i]));
    }
    out.value = value;
    return out;
}

std::vector<std::uint8_t> GcapcnPolicy::greedy_action(const std::vector<double>& probs) {
    std::vector<std::uint8_t> action(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) action[i] = probs[i] > 0.5 ? 1 : 0;
    return action;
}

std::pair<std::vector<std::uint8_t>, double> GcapcnPolicy::sample_action(
    const std::vector<double>& probs, const std::vector<std::uint8_t>& mask, Rng& rng) {
    if (probs.size() != mask.size()) throw std::invalid_argument("mask length mismatch");
    std::vector<std::uint8_t> action(probs.size(), 0);
    double logp = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (mask[i]) continue;  // forced OFF, excluded from the sum
        action[i] = bernoulli(rng, probs[i]) ? 1 : 0;
        double p = std::min(std::max(probs[i], kProbClamp), 1.0 - kProbClamp);
        logp += action[i] ? std::log(p) : std::log(1.0 - p);
    }
    return {std::move(action), logp};
}

}  // namespace gridrl
