#pragma once

#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "gridrl/env.hpp"
#include "gridrl/policy.hpp"

namespace gridrl {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Little-endian binary buffer; identical inputs produce identical bytes.
class BinWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.append(s);
    }
    void doubles(const std::vector<double>& v) {
        u32(static_cast<std::uint32_t>(v.size()));
        for (double x : v) f64(x);
    }
    const std::string& buffer() const { return buf_; }

private:
    std::string buf_;
};

class BinReader {
public:
    explicit BinReader(std::string data) : data_(std::move(data)) {}
    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint32_t u32() {
        const char* p = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        const char* p = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
        return v;
    }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64() {
        std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        std::uint32_t n = u32();
        return std::string(take(n), n);
    }
    std::vector<double> doubles() {
        std::uint32_t n = u32();
        std::vector<double> v(n);
        for (auto& x : v) x = f64();
        return v;
    }
    bool exhausted() const { return pos_ == data_.size(); }

private:
    const char* take(std::size_t n) {
        if (pos_ + n > data_.size()) throw CheckpointError("truncated checkpoint");
        const char* p = data_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::string data_;
    std::size_t pos_ = 0;
};

struct PolicyCheckpoint {
    std::uint64_t network_hash = 0;
    WeightsMode variant = WeightsMode::Ph;
    GcapcnConfig gcapcn;
    EnvConfig env_cfg;
    SolverConfig solver_cfg;
    PolicySizes sizes;
    // (name, rows, cols, values) in ParamStore order
    struct TensorBlob {
        std::string name;
        int rows = 0, cols = 0;
        std::vector<double> values;
    };
    std::vector<TensorBlob> tensors;
};

PolicyCheckpoint snapshot_policy(const GcapcnPolicy& policy, std::uint64_t network_hash,
                                 WeightsMode variant, const EnvConfig& env_cfg,
                                 const SolverConfig& solver_cfg);

// Overwrites the policy's parameters; names and shapes must match exactly.
void restore_params(GcapcnPolicy& policy, const PolicyCheckpoint& ckpt);

GcapcnPolicy instantiate_policy(const PolicyCheckpoint& ckpt);

// File layout: magic+version, policy section, then an optional opaque trainer
// blob owned by the trainer.
void save_checkpoint_file(const std::string& path, const PolicyCheckpoint& policy,
                          const std::string* trainer_blob = nullptr);
PolicyCheckpoint load_checkpoint_file(const std::string& path,
                                      std::optional<std::string>* trainer_blob = nullptr);

}  // namespace gridrl
