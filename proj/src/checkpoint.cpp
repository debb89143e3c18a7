#include "gridrl/checkpoint.hpp"

#include <fstream>

namespace gridrl {

namespace {

constexpr char kMagic[] = "GRLCKPT";
constexpr std::uint32_t kVersion = 1;

}  // namespace

PolicyCheckpoint snapshot_policy(const GcapcnPolicy& policy, std::uint64_t network_hash,
                                 WeightsMode variant, const EnvConfig& env_cfg,
                                 const SolverConfig& solver_cfg) {
    PolicyCheckpoint ck;
    ck.network_hash = network_hash;
    ck.variant = variant;
    ck.gcapcn = policy.config();
    ck.env_cfg = env_cfg;
    ck.solver_cfg = solver_cfg;
    ck.sizes = policy.sizes();
    for (const auto& [name, t] : policy.params().items())
        ck.tensors.push_back({name, t.rows(), t.cols(), t.values()});
    return ck;
}

void restore_params(GcapcnPolicy& policy, const PolicyCheckpoint& ckpt) {
    auto& items = policy.params().items();
    if (items.size() != ckpt.tensors.size())
        throw CheckpointError("checkpoint parameter count does not match the policy");
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& blob = ckpt.tensors[i];
        Tensor& t = items[i].second;
        if (items[i].first != blob.name || t.rows() != blob.rows || t.cols() != blob.cols)
            throw CheckpointError("checkpoint tensor mismatch at '" + blob.name + "'");
        t.values_mut() = blob.values;
    }
}

GcapcnPolicy instantiate_policy(const PolicyCheckpoint& ckpt) {
    GcapcnPolicy policy(ckpt.sizes, ckpt.gcapcn, 0);
    restore_params(policy, ckpt);
    return policy;
}

namespace {

void write_policy_section(BinWriter& w, const PolicyCheckpoint& ck) {
    w.u64(ck.network_hash);
    w.u8(ck.variant == WeightsMode::Ph ? 0 : 1);
    w.u32(ck.gcapcn.layers);
    w.u32(ck.gcapcn.hidden);
    w.u32(ck.gcapcn.moment_order);
    w.u32(ck.gcapcn.filter_degree);
    w.u8(ck.gcapcn.activation == GcapcnConfig::Activation::Tanh ? 0 : 1);
    w.u32(ck.env_cfg.horizon);
    w.f64(ck.env_cfg.v_min);
    w.f64(ck.env_cfg.v_max);
    w.u8(ck.env_cfg.ph_refresh == EnvConfig::Refresh::PerEpisode ? 0 : 1);
    w.u32(ck.env_cfg.k);
    w.f64(ck.solver_cfg.base_kw);
    w.f64(ck.solver_cfg.v_slack);
    w.u32(ck.sizes.n_nodes);
    w.u32(ck.sizes.n_lines);
    w.u32(ck.sizes.n_switch_slots);
    w.u32(ck.sizes.n_load_slots);
    w.u32(static_cast<std::uint32_t>(ck.tensors.size()));
    for (const auto& t : ck.tensors) {
        w.str(t.name);
        w.u32(t.rows);
        w.u32(t.cols);
        w.doubles(t.values);
    }
}

PolicyCheckpoint read_policy_section(BinReader& r) {
    PolicyCheckpoint ck;
    ck.network_hash = r.u64();
    ck.variant = r.u8() == 0 ? WeightsMode::Ph : WeightsMode::Plain;
    ck.gcapcn.layers = static_cast<int>(r.u32());
    ck.gcapcn.hidden = static_cast<int>(r.u32());
    ck.gcapcn.moment_order = static_cast<int>(r.u32());
    ck.gcapcn.filter_degree = static_cast<int>(r.u32());
    ck.gcapcn.activation = r.u8() == 0 ? GcapcnConfig::Activation::Tanh : GcapcnConfig::Activation::Relu;
    ck.env_cfg.horizon = static_cast<int>(r.u32());
    ck.env_cfg.v_min = r.f64();
    ck.env_cfg.v_max = r.f64();
    ck.env_cfg.ph_refresh = r.u8() == 0 ? EnvConfig::Refresh::PerEpisode : EnvConfig::Refresh::PerStep;
    ck.env_cfg.k = static_cast<int>(r.u32());
    ck.solver_cfg.base_kw = r.f64();
    ck.solver_cfg.v_slack = r.f64();
    ck.sizes.n_nodes = static_cast<int>(r.u32());
    ck.sizes.n_lines = static_cast<int>(r.u32());
    ck.sizes.n_switch_slots = static_cast<int>(r.u32());
    ck.sizes.n_load_slots = static_cast<int>(r.u32());
    std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        PolicyCheckpoint::TensorBlob t;
        t.name = r.str();
        t.rows = static_cast<int>(r.u32());
        t.cols = static_cast<int>(r.u32());
        t.values = r.doubles();
        ck.tensors.push_back(std::move(t));
    }
    return ck;
}

}  // namespace

void save_checkpoint_file(const std::string& path, const PolicyCheckpoint& policy,
                          const std::string* trainer_blob) {
    BinWriter w;
    for (const char* p = kMagic; *p; ++p) w.u8(static_cast<std::uint8_t>(*p));
    w.u32(kVersion);
    write_policy_section(w, policy);
    w.u8(trainer_blob ? 1 : 0);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << w.buffer();
    if (trainer_blob) {
        BinWriter bw;
        bw.str(*trainer_blob);
        out << bw.buffer();
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

PolicyCheckpoint load_checkpoint_file(const std::string& path,
                                      std::optional<std::string>* trainer_blob) {
    BinReader r(read_text_file(path));
    for (const char* p = kMagic; *p; ++p)
        if (r.u8() != static_cast<std::uint8_t>(*p)) throw CheckpointError("not a checkpoint file");
    std::uint32_t version = r.u32();
    if (version != kVersion)
        throw CheckpointError("checkpoint version " + std::to_string(version) + " unsupported");
    PolicyCheckpoint ck = read_policy_section(r);
    std::uint8_t has_trainer = r.u8();
    if (trainer_blob) {
        if (has_trainer)
            *trainer_blob = r.str();
        else
            trainer_blob->reset();
    }
    return ck;
}

}  // namespace gridrl
