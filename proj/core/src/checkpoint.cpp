#include <bit>
#include <map>

#include "decennt/error.hpp"
#include "decennt/io_util.hpp"
#include "decennt/model.hpp"

namespace decennt {

namespace {

constexpr char kMagic[4] = {'D', 'C', 'N', 'T'};
constexpr std::uint16_t kCheckpointVersion = 1;

void put_blob(std::vector<std::uint8_t>& out, const std::string& name,
              const std::vector<std::size_t>& shape, const std::vector<double>& values) {
    if (name.size() > 0xffff) throw Error::usage("checkpoint: blob name too long");
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<std::uint8_t>(shape.size()));
    std::size_t count = 1;
    for (std::size_t d : shape) {
        put_u32(out, static_cast<std::uint32_t>(d));
        count *= d;
    }
    if (values.size() != count) throw Error::usage("checkpoint: blob value count does not match shape");
    for (double v : values) put_f64(out, v);
}

void put_tensor(std::vector<std::uint8_t>& out, const std::string& name, const TensorPtr& t) {
    put_blob(out, name, t->shape, t->values);
}

void put_meta(std::vector<std::uint8_t>& out, const std::string& name, double v) {
    put_blob(out, name, {1}, {v});
}

struct Blob {
    std::vector<std::size_t> shape;
    std::vector<double> values;
};

using BlobMap = std::map<std::string, Blob>;

const Blob& need(const BlobMap& blobs, const std::string& name) {
    auto it = blobs.find(name);
    if (it == blobs.end()) throw Error::format("checkpoint: missing blob '" + name + "'");
    return it->second;
}

double need_scalar(const BlobMap& blobs, const std::string& name) {
    const Blob& b = need(blobs, name);
    if (b.values.size() != 1) throw Error::format("checkpoint: blob '" + name + "' is not scalar");
    return b.values[0];
}

TensorPtr need_tensor(const BlobMap& blobs, const std::string& name, std::vector<std::size_t> shape,
                      bool requires_grad = true) {
    const Blob& b = need(blobs, name);
    if (b.shape != shape) throw Error::format("checkpoint: blob '" + name + "' has unexpected shape");
    return make_tensor(std::move(shape), b.values, requires_grad);
}

const char* kLstmNames[16] = {"w_xi", "w_xf", "w_xg", "w_xo", "w_hi", "w_hf", "w_hg", "w_ho",
                              "b_xi", "b_xf", "b_xg", "b_xo", "b_hi", "b_hf", "b_hg", "b_ho"};

void put_lstm(std::vector<std::uint8_t>& out, const std::string& prefix, const LstmParams& p) {
    const TensorPtr tensors[16] = {p.w_xi, p.w_xf, p.w_xg, p.w_xo, p.w_hi, p.w_hf, p.w_hg, p.w_ho,
                                   p.b_xi, p.b_xf, p.b_xg, p.b_xo, p.b_hi, p.b_hf, p.b_hg, p.b_ho};
    for (int i = 0; i < 16; ++i) put_tensor(out, prefix + kLstmNames[i], tensors[i]);
}

LstmParams read_lstm(const BlobMap& blobs, const std::string& prefix, std::size_t hidden) {
    LstmParams p;
    TensorPtr* tensors[16] = {&p.w_xi, &p.w_xf, &p.w_xg, &p.w_xo, &p.w_hi, &p.w_hf, &p.w_hg, &p.w_ho,
                              &p.b_xi, &p.b_xf, &p.b_xg, &p.b_xo, &p.b_hi, &p.b_hf, &p.b_hg, &p.b_ho};
    for (int i = 0; i < 16; ++i) {
        std::vector<std::size_t> shape;
        if (i < 4) {
            shape = {1, hidden};
        } else if (i < 8) {
            shape = {hidden, hidden};
        } else {
            shape = {hidden};
        }
        *tensors[i] = need_tensor(blobs, prefix + kLstmNames[i], shape);
    }
    return p;
}

}  // namespace

void save_checkpoint(const std::string& path, const DecenntModel& model, std::uint64_t config_hash,
                     std::uint64_t seed) {
    const ModelConfig& cfg = model.config();
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u16(out, kCheckpointVersion);

    put_meta(out, "meta.components", static_cast<double>(cfg.components));
    put_meta(out, "meta.timepoints", static_cast<double>(cfg.timepoints));
    put_meta(out, "meta.lstm_hidden", static_cast<double>(cfg.lstm_hidden));
    put_meta(out, "meta.attn_dim", static_cast<double>(cfg.attn_dim));
    put_meta(out, "meta.classifier_hidden", static_cast<double>(cfg.classifier_hidden));
    put_meta(out, "meta.gamma", cfg.gamma_ratio);
    put_meta(out, "meta.alpha_mode", cfg.alpha_mode == AlphaMode::Softmax ? 0.0 : 1.0);
    put_meta(out, "meta.scale_scores", cfg.scale_scores ? 1.0 : 0.0);
    // exact u64 round-trip through the f64 payload slot
    put_meta(out, "meta.config_hash", std::bit_cast<double>(config_hash));
    put_meta(out, "meta.seed", std::bit_cast<double>(seed));

    const ModelParams& p = model.params();
    put_lstm(out, "encoder.fwd.", p.encoder.forward_cell);
    put_lstm(out, "encoder.bwd.", p.encoder.backward_cell);
    put_tensor(out, "attn.w_key", p.attention.w_key);
    put_tensor(out, "attn.w_value", p.attention.w_value);
    put_tensor(out, "attn.w_query", p.attention.w_query);
    put_tensor(out, "gta.w_hidden", p.gta.w_hidden);
    put_tensor(out, "gta.w_score", p.gta.w_score);
    put_tensor(out, "gta.bn.scale", p.gta.bn.scale);
    put_tensor(out, "gta.bn.shift", p.gta.bn.shift);
    put_blob(out, "gta.bn.running_mean", {p.gta.bn.running_mean.size()}, p.gta.bn.running_mean);
    put_blob(out, "gta.bn.running_var", {p.gta.bn.running_var.size()}, p.gta.bn.running_var);
    put_tensor(out, "head.w1", p.classifier.w1);
    put_tensor(out, "head.b1", p.classifier.b1);
    put_tensor(out, "head.w2", p.classifier.w2);
    put_tensor(out, "head.b2", p.classifier.b2);

    atomic_write_bytes(path, out);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() < 6) throw Error::format("checkpoint file too short: " + path);
    ByteReader r(bytes.data(), bytes.size());
    std::uint8_t magic[4];
    r.bytes(magic, 4);
    if (!std::equal(magic, magic + 4, kMagic)) throw Error::format("bad magic, not a DCNT checkpoint: " + path);
    if (r.u16() != kCheckpointVersion) throw Error::format("unsupported checkpoint version");

    BlobMap blobs;
    while (!r.exhausted()) {
        const std::uint16_t name_len = r.u16();
        std::string name(name_len, '\0');
        r.bytes(reinterpret_cast<std::uint8_t*>(name.data()), name_len);
        const std::uint8_t rank = r.u8();
        Blob b;
        std::size_t count = 1;
        for (std::uint8_t d = 0; d < rank; ++d) {
            const std::uint32_t dim = r.u32();
            if (dim == 0) throw Error::format("checkpoint: zero dimension in blob '" + name + "'");
            b.shape.push_back(dim);
            count *= dim;
        }
        if (count > (1u << 28)) throw Error::format("checkpoint: blob '" + name + "' implausibly large");
        b.values.resize(count);
        for (auto& v : b.values) v = r.f64();
        if (!blobs.emplace(std::move(name), std::move(b)).second) {
            throw Error::format("checkpoint: duplicate blob name");
        }
    }

    ModelConfig cfg;
    cfg.components = static_cast<std::size_t>(need_scalar(blobs, "meta.components"));
    cfg.timepoints = static_cast<std::size_t>(need_scalar(blobs, "meta.timepoints"));
    cfg.lstm_hidden = static_cast<std::size_t>(need_scalar(blobs, "meta.lstm_hidden"));
    cfg.attn_dim = static_cast<std::size_t>(need_scalar(blobs, "meta.attn_dim"));
    cfg.classifier_hidden = static_cast<std::size_t>(need_scalar(blobs, "meta.classifier_hidden"));
    cfg.gamma_ratio = need_scalar(blobs, "meta.gamma");
    cfg.alpha_mode = need_scalar(blobs, "meta.alpha_mode") == 0.0 ? AlphaMode::Softmax : AlphaMode::ReluRaw;
    cfg.scale_scores = need_scalar(blobs, "meta.scale_scores") != 0.0;
    if (cfg.components == 0 || cfg.timepoints == 0 || cfg.lstm_hidden == 0) {
        throw Error::format("checkpoint: invalid model dimensions");
    }

    const std::size_t hidden = cfg.lstm_hidden;
    const std::size_t width = 2 * hidden;
    const std::size_t n2 = cfg.components * cfg.components;
    const std::size_t m = GtaParams::hidden_width(cfg.components, cfg.gamma_ratio);

    ModelParams p;
    p.encoder.forward_cell = read_lstm(blobs, "encoder.fwd.", hidden);
    p.encoder.backward_cell = read_lstm(blobs, "encoder.bwd.", hidden);
    p.attention.w_key = need_tensor(blobs, "attn.w_key", {width, cfg.attn_dim});
    p.attention.w_value = need_tensor(blobs, "attn.w_value", {width, cfg.attn_dim});
    p.attention.w_query = need_tensor(blobs, "attn.w_query", {width, cfg.attn_dim});
    p.gta.w_hidden = need_tensor(blobs, "gta.w_hidden", {n2, m});
    p.gta.w_score = need_tensor(blobs, "gta.w_score", {m, 1});
    p.gta.gamma_ratio = cfg.gamma_ratio;
    p.gta.bn.scale = need_tensor(blobs, "gta.bn.scale", {m});
    p.gta.bn.shift = need_tensor(blobs, "gta.bn.shift", {m});
    p.gta.bn.running_mean = need(blobs, "gta.bn.running_mean").values;
    p.gta.bn.running_var = need(blobs, "gta.bn.running_var").values;
    if (p.gta.bn.running_mean.size() != m || p.gta.bn.running_var.size() != m) {
        throw Error::format("checkpoint: batch-norm state has wrong width");
    }
    p.classifier.w1 = need_tensor(blobs, "head.w1", {n2, cfg.classifier_hidden});
    p.classifier.b1 = need_tensor(blobs, "head.b1", {cfg.classifier_hidden});
    p.classifier.w2 = need_tensor(blobs, "head.w2", {cfg.classifier_hidden, 2});
    p.classifier.b2 = need_tensor(blobs, "head.b2", {2});

    LoadedCheckpoint out;
    out.model = DecenntModel::from_parts(cfg, std::move(p));
    out.config_hash = std::bit_cast<std::uint64_t>(need_scalar(blobs, "meta.config_hash"));
    out.seed = std::bit_cast<std::uint64_t>(need_scalar(blobs, "meta.seed"));
    return out;
}

}  // namespace decennt
