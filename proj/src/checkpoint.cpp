#include "sfnet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace sfnet {

namespace {

constexpr char kMagic[8] = {'S', 'F', 'N', 'E', 'T', 'C', 'K', 'P'};

struct Writer {
    std::ofstream f;
    explicit Writer(const std::string& path)
        : f(path, std::ios::binary | std::ios::trunc) {
        if (!f) throw std::runtime_error("checkpoint: cannot write " + path);
    }
    void bytes(const void* p, std::size_t n) {
        f.write(static_cast<const char*>(p),
                static_cast<std::streamsize>(n));
    }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void floats(const float* p, std::size_t n) { bytes(p, n * 4); }
};

struct Reader {
    std::ifstream f;
    explicit Reader(const std::string& path) : f(path, std::ios::binary) {
        if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    }
    void bytes(void* p, std::size_t n) {
        f.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (f.gcount() != static_cast<std::streamsize>(n))
            throw std::runtime_error("checkpoint: truncated file");
    }
    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        bytes(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        bytes(&v, 8);
        return v;
    }
    std::string str(std::uint32_t max_len) {
        const std::uint32_t n = u32();
        if (n > max_len)
            throw std::runtime_error("checkpoint: corrupt string length");
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    bool at_end() {
        f.peek();
        return f.eof();
    }
};

}  // namespace

void save_checkpoint(const std::string& path, SFNet& model, int epoch,
                     std::uint64_t seed, const OptimState* optim) {
    Writer w(path);
    w.bytes(kMagic, 8);
    w.u32(kCheckpointVersion);
    w.str(model.config().to_json_string());

    const ParamSet& ps = model.params();
    w.u32(static_cast<std::uint32_t>(ps.entries.size()));
    for (const auto& [name, t] : ps.entries) {
        w.str(name);
        w.u32(static_cast<std::uint32_t>(t.rank()));
        for (int d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
        w.floats(t.data(), static_cast<std::size_t>(t.numel()));
    }

    w.u8(optim ? 1 : 0);
    if (optim) {
        w.u64(static_cast<std::uint64_t>(optim->t));
        w.floats(&optim->beta1, 1);
        w.floats(&optim->beta2, 1);
        w.floats(&optim->eps, 1);
        w.u32(static_cast<std::uint32_t>(optim->m.size()));
        for (std::size_t i = 0; i < optim->m.size(); ++i) {
            w.u32(static_cast<std::uint32_t>(optim->m[i].size()));
            w.floats(optim->m[i].data(), optim->m[i].size());
            w.floats(optim->v[i].data(), optim->v[i].size());
        }
    }

    w.u32(static_cast<std::uint32_t>(epoch));
    w.u64(seed);
    w.f.flush();
    if (!w.f) throw std::runtime_error("checkpoint: short write to " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[8];
    r.bytes(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error(
            "checkpoint: bad magic (not a checkpoint file)");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " +
                                 std::to_string(version));

    LoadedCheckpoint out;
    out.config = SFNetConfig::from_json_string(r.str(1 << 20));

    const std::uint32_t nparams = r.u32();
    struct Record {
        std::string name;
        Shape shape;
        std::vector<float> values;
    };
    std::vector<Record> records;
    records.reserve(nparams);
    for (std::uint32_t i = 0; i < nparams; ++i) {
        Record rec;
        rec.name = r.str(4096);
        const std::uint32_t rank = r.u32();
        if (rank > 8)
            throw std::runtime_error("checkpoint: corrupt rank for " +
                                     rec.name);
        std::int64_t numel = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            const std::uint32_t dim = r.u32();
            if (dim == 0 || dim > (1u << 24))
                throw std::runtime_error("checkpoint: corrupt shape for " +
                                         rec.name);
            rec.shape.push_back(static_cast<int>(dim));
            numel *= dim;
        }
        rec.values.resize(static_cast<std::size_t>(numel));
        r.bytes(rec.values.data(), rec.values.size() * 4);
        records.push_back(std::move(rec));
    }

    if (r.u8() != 0) {
        out.has_optim = true;
        out.optim.t = static_cast<std::int64_t>(r.u64());
        r.bytes(&out.optim.beta1, 4);
        r.bytes(&out.optim.beta2, 4);
        r.bytes(&out.optim.eps, 4);
        const std::uint32_t n = r.u32();
        out.optim.m.resize(n);
        out.optim.v.resize(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            const std::uint32_t len = r.u32();
            if (len > (1u << 28))
                throw std::runtime_error(
                    "checkpoint: corrupt optimizer record");
            out.optim.m[i].resize(len);
            out.optim.v[i].resize(len);
            r.bytes(out.optim.m[i].data(), static_cast<std::size_t>(len) * 4);
            r.bytes(out.optim.v[i].data(), static_cast<std::size_t>(len) * 4);
        }
    }

    out.epoch = static_cast<int>(r.u32());
    out.seed = r.u64();
    if (!r.at_end())
        throw std::runtime_error("checkpoint: trailing bytes after payload");

    out.model = std::make_unique<SFNet>(out.config, out.seed);
    ParamSet& ps = out.model->params();
    if (records.size() != ps.entries.size())
        throw std::runtime_error(
            "checkpoint: parameter count does not match the stored config");
    for (const Record& rec : records) {
        const Tensor* p = ps.find(rec.name);
        if (!p)
            throw std::runtime_error("checkpoint: unexpected param " +
                                     rec.name);
        if (p->shape() != rec.shape)
            throw std::runtime_error("checkpoint: shape mismatch for " +
                                     rec.name);
        Tensor t = *p;
        std::memcpy(t.mutable_data(), rec.values.data(),
                    rec.values.size() * 4);
    }
    return out;
}

}  // namespace sfnet
