// SPDX-License-Identifier: Apache-2.0

#include "toxpipe/pipeline/bundle.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

#include "toxpipe/error.hpp"

namespace toxpipe::pipeline {

static_assert(std::endian::native == std::endian::little, "bundle I/O assumes a little-endian host");

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t b : bytes) {
        h = (h ^ b) * 0x100000001b3ULL;
    }
    return h;
}

namespace {

constexpr std::uint32_t tag(const char (&s)[5]) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(s[0])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(s[1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(s[2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(s[3])) << 24;
}

constexpr std::uint32_t kConfig = tag("CONF");
constexpr std::uint32_t kTensors = tag("NETP");
constexpr std::uint32_t kScaler = tag("SCAL");
constexpr std::uint32_t kEnsemble = tag("ENSM");
constexpr std::uint32_t kMeta = tag("META");
constexpr char kMagic[4] = {'T', 'O', 'X', 'B'};

class Writer {
public:
    template <typename T>
    void put(T v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        bytes.insert(bytes.end(), p, p + sizeof(T));
    }
    void put_size(std::size_t v) { put<std::uint64_t>(v); }
    void put_string(const std::string& s) {
        put_size(s.size());
        bytes.insert(bytes.end(), s.begin(), s.end());
    }
    template <typename T>
    void put_array(std::span<const T> values) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
        bytes.insert(bytes.end(), p, p + values.size_bytes());
    }

    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::size_t get_size(std::size_t limit = std::size_t{1} << 40) {
        const auto v = get<std::uint64_t>();
        if (v > limit) {
            raise(ErrorCode::BundleCorrupt, "implausible length " + std::to_string(v));
        }
        return static_cast<std::size_t>(v);
    }
    std::string get_string() {
        const std::size_t n = get_size(remaining());
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    template <typename T>
    void get_array(std::span<T> out) {
        need(out.size_bytes());
        std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
        pos_ += out.size_bytes();
    }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    bool done() const noexcept { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (remaining() < n) {
            raise(ErrorCode::BundleCorrupt, "section ends early");
        }
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

void write_tree(Writer& w, const ensemble::DecisionTree& t) {
    w.put_size(t.max_depth);
    w.put_size(t.nodes.size());
    for (const auto& n : t.nodes) {
        w.put<std::int32_t>(n.feature);
        w.put<double>(n.threshold);
        w.put<std::int32_t>(n.left);
        w.put<std::int32_t>(n.right);
        w.put<double>(n.value);
    }
}

ensemble::DecisionTree read_tree(Reader& r, std::size_t dim) {
    ensemble::DecisionTree t;
    t.max_depth = r.get_size();
    const std::size_t count = r.get_size(r.remaining() / 28);
    if (count == 0) {
        raise(ErrorCode::BundleCorrupt, "empty tree");
    }
    t.nodes.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto& n = t.nodes[i];
        n.feature = r.get<std::int32_t>();
        n.threshold = r.get<double>();
        n.left = r.get<std::int32_t>();
        n.right = r.get<std::int32_t>();
        n.value = r.get<double>();
        if (!n.is_leaf()) {
            // children strictly after the parent rules out cycles
            const auto in_range = [&](std::int32_t c) {
                return c > static_cast<std::int32_t>(i) && static_cast<std::size_t>(c) < count;
            };
            if (static_cast<std::size_t>(n.feature) >= dim || !in_range(n.left) || !in_range(n.right)) {
                raise(ErrorCode::BundleCorrupt, "tree node " + std::to_string(i) + " is inconsistent");
            }
        }
    }
    return t;
}

void write_trees(Writer& w, const std::vector<ensemble::DecisionTree>& trees) {
    w.put_size(trees.size());
    for (const auto& t : trees) {
        write_tree(w, t);
    }
}

std::vector<ensemble::DecisionTree> read_trees(Reader& r, std::size_t dim) {
    const std::size_t n = r.get_size(r.remaining() / 16);
    std::vector<ensemble::DecisionTree> trees;
    trees.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        trees.push_back(read_tree(r, dim));
    }
    return trees;
}

std::vector<std::uint8_t> section_config(const nn::NetworkConfig& c) {
    Writer w;
    w.put_size(c.block_layers.size());
    for (auto l : c.block_layers) {
        w.put_size(l);
    }
    w.put_size(c.growth_rate);
    w.put_size(c.stem_channels);
    w.put<double>(c.compression);
    w.put_size(c.bottleneck_factor);
    w.put_size(c.num_outputs);
    w.put_size(c.input_size);
    return std::move(w.bytes);
}

nn::NetworkConfig read_config(Reader& r) {
    nn::NetworkConfig c;
    c.block_layers.resize(r.get_size(64));
    for (auto& l : c.block_layers) {
        l = r.get_size(4096);
    }
    c.growth_rate = r.get_size(4096);
    c.stem_channels = r.get_size(4096);
    c.compression = r.get<double>();
    c.bottleneck_factor = r.get_size(64);
    c.num_outputs = r.get_size(4096);
    c.input_size = r.get_size(8192);
    if (c.block_layers.empty() || !(c.compression > 0.0 && c.compression <= 1.0) || c.growth_rate == 0 ||
        c.stem_channels == 0 || c.num_outputs == 0 || c.input_size == 0) {
        raise(ErrorCode::BundleCorrupt, "network configuration out of range");
    }
    return c;
}

void write_tensor(Writer& w, const nn::Tensor<float>& t) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) {
        w.put_size(d);
    }
    w.put_array<float>(t.values());
}

void read_tensor_into(Reader& r, nn::Tensor<float>& t) {
    const auto rank = r.get<std::uint32_t>();
    nn::Shape shape(rank);
    for (auto& d : shape) {
        d = r.get_size();
    }
    if (shape != t.shape()) {
        raise(ErrorCode::BundleCorrupt, "tensor " + nn::shape_string(shape) + " where the configuration implies " +
                                            nn::shape_string(t.shape()));
    }
    r.get_array<float>(t.values());
}

std::vector<std::uint8_t> section_tensors(const nn::DenseNet<float>& net) {
    Writer w;
    auto& mut = const_cast<nn::DenseNet<float>&>(net);
    const auto params = mut.parameters();
    const auto buffers = net.buffers();
    w.put<std::uint8_t>(net.has_head() ? 1 : 0);
    w.put_size(params.size() + buffers.size());
    for (auto* p : params) {
        write_tensor(w, p->value());
    }
    for (const auto* b : buffers) {
        write_tensor(w, *b);
    }
    return std::move(w.bytes);
}

void read_tensors(Reader& r, nn::DenseNet<float>& net) {
    const bool head = r.get<std::uint8_t>() != 0;
    if (!head) {
        net.drop_head();
    }
    auto params = net.parameters();
    auto buffers = net.buffers();
    const std::size_t count = r.get_size();
    if (count != params.size() + buffers.size()) {
        raise(ErrorCode::BundleCorrupt, "tensor count does not match the configuration");
    }
    for (auto* p : params) {
        read_tensor_into(r, p->mutable_value());
    }
    for (auto* b : buffers) {
        read_tensor_into(r, *b);
    }
}

std::vector<std::uint8_t> section_scaler(const ensemble::Standardizer& s) {
    Writer w;
    w.put_size(s.mean.size());
    w.put_array<double>(s.mean);
    w.put_array<double>(s.scale);
    return std::move(w.bytes);
}

ensemble::Standardizer read_scaler(Reader& r) {
    ensemble::Standardizer s;
    const std::size_t d = r.get_size(r.remaining() / 16);
    s.mean.resize(d);
    s.scale.resize(d);
    r.get_array<double>(s.mean);
    r.get_array<double>(s.scale);
    return s;
}

std::vector<std::uint8_t> section_ensemble(const ensemble::EnsembleModel& m) {
    Writer w;
    for (double a : m.alpha) {
        w.put<double>(a);
    }
    w.put_size(m.labels.size());
    for (const auto& l : m.labels) {
        w.put_string(l.skip_reason);
        const std::uint8_t flags = (l.svm ? 1 : 0) | (l.forest ? 2 : 0) | (l.gbm ? 4 : 0);
        w.put<std::uint8_t>(flags);
        if (l.svm) {
            w.put_size(l.svm->weights.size());
            w.put_array<double>(l.svm->weights);
            w.put<double>(l.svm->bias);
            w.put<double>(l.svm->platt.a);
            w.put<double>(l.svm->platt.b);
        }
        if (l.forest) {
            write_trees(w, l.forest->trees);
        }
        if (l.gbm) {
            w.put<double>(l.gbm->learning_rate);
            w.put<double>(l.gbm->base_score);
            write_trees(w, l.gbm->trees);
        }
    }
    return std::move(w.bytes);
}

ensemble::EnsembleModel read_ensemble(Reader& r, std::size_t dim) {
    ensemble::EnsembleModel m;
    for (double& a : m.alpha) {
        a = r.get<double>();
    }
    m.labels.resize(r.get_size(4096));
    for (auto& l : m.labels) {
        l.skip_reason = r.get_string();
        const auto flags = r.get<std::uint8_t>();
        if (flags & 1) {
            ensemble::LinearSvm svm;
            svm.weights.resize(r.get_size(r.remaining() / 8));
            if (svm.weights.size() != dim) {
                raise(ErrorCode::BundleCorrupt, "svm weight length does not match the feature dimension");
            }
            r.get_array<double>(svm.weights);
            svm.bias = r.get<double>();
            svm.platt.a = r.get<double>();
            svm.platt.b = r.get<double>();
            l.svm = std::move(svm);
        }
        if (flags & 2) {
            l.forest = ensemble::RandomForest{read_trees(r, dim)};
        }
        if (flags & 4) {
            ensemble::GradientBoosting g;
            g.learning_rate = r.get<double>();
            g.base_score = r.get<double>();
            g.trees = read_trees(r, dim);
            l.gbm = std::move(g);
        }
    }
    return m;
}

std::vector<std::uint8_t> section_meta(const TrainingMetadata& m) {
    Writer w;
    w.put<std::uint64_t>(m.seed);
    w.put_size(m.epochs);
    w.put<std::uint64_t>(m.dataset_hash);
    w.put_size(m.train_records);
    w.put_size(m.excluded_records);
    w.put_size(m.loss_history.size());
    w.put_array<double>(m.loss_history);
    w.put<double>(m.fractions.train);
    w.put<double>(m.fractions.validation);
    w.put<double>(m.fractions.test);
    w.put_size(m.augment_runs);
    w.put<double>(m.confidence_weight);
    return std::move(w.bytes);
}

TrainingMetadata read_meta(Reader& r) {
    TrainingMetadata m;
    m.seed = r.get<std::uint64_t>();
    m.epochs = r.get_size();
    m.dataset_hash = r.get<std::uint64_t>();
    m.train_records = r.get_size();
    m.excluded_records = r.get_size();
    m.loss_history.resize(r.get_size(r.remaining() / 8));
    r.get_array<double>(m.loss_history);
    m.fractions.train = r.get<double>();
    m.fractions.validation = r.get<double>();
    m.fractions.test = r.get<double>();
    m.augment_runs = r.get_size(1u << 20);
    m.confidence_weight = r.get<double>();
    return m;
}

}  // namespace

std::vector<std::uint8_t> serialize_bundle(const ModelBundle& bundle) {
    Writer w;
    w.bytes.insert(w.bytes.end(), std::begin(kMagic), std::end(kMagic));
    w.put<std::uint32_t>(bundle.format_version);
    auto section = [&w](std::uint32_t id, const std::vector<std::uint8_t>& payload) {
        w.put<std::uint32_t>(id);
        w.put_size(payload.size());
        w.bytes.insert(w.bytes.end(), payload.begin(), payload.end());
    };
    section(kConfig, section_config(bundle.network.config()));
    section(kTensors, section_tensors(bundle.network));
    section(kScaler, section_scaler(bundle.ensemble.scaler));
    section(kEnsemble, section_ensemble(bundle.ensemble));
    section(kMeta, section_meta(bundle.meta));
    w.put<std::uint64_t>(fnv1a64(w.bytes));
    return std::move(w.bytes);
}

ModelBundle deserialize_bundle(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) {
        raise(ErrorCode::TruncatedFile, "no header");
    }
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        raise(ErrorCode::VersionUnsupported, "not a model bundle (bad magic)");
    }
    if (bytes.size() < 8) {
        raise(ErrorCode::TruncatedFile, "no version");
    }
    std::uint32_t version;
    std::memcpy(&version, bytes.data() + 4, 4);
    if (version != kBundleVersion) {
        raise(ErrorCode::VersionUnsupported, "bundle version " + std::to_string(version));
    }

    // walk the section table before trusting any content
    std::map<std::uint32_t, std::span<const std::uint8_t>> sections;
    std::size_t pos = 8;
    while (true) {
        if (bytes.size() - pos == 8) {
            break;
        }
        if (bytes.size() - pos < 12 + 8) {
            raise(ErrorCode::TruncatedFile, "section header cut off at byte " + std::to_string(pos));
        }
        std::uint32_t id;
        std::uint64_t len;
        std::memcpy(&id, bytes.data() + pos, 4);
        std::memcpy(&len, bytes.data() + pos + 4, 8);
        pos += 12;
        if (len > bytes.size() - pos - 8) {
            raise(ErrorCode::TruncatedFile, "section payload cut off at byte " + std::to_string(pos));
        }
        sections[id] = bytes.subspan(pos, static_cast<std::size_t>(len));
        pos += static_cast<std::size_t>(len);
    }
    std::uint64_t stored;
    std::memcpy(&stored, bytes.data() + pos, 8);
    if (stored != fnv1a64(bytes.first(pos))) {
        raise(ErrorCode::ChecksumMismatch, "bundle checksum does not match its contents");
    }
    for (std::uint32_t id : {kConfig, kTensors, kScaler, kEnsemble, kMeta}) {
        if (!sections.contains(id)) {
            raise(ErrorCode::BundleCorrupt, "missing section");
        }
    }

    ModelBundle b;
    b.format_version = version;
    auto parse = [&](std::uint32_t id, auto&& fn) {
        Reader r(sections[id]);
        fn(r);
        if (!r.done()) {
            raise(ErrorCode::BundleCorrupt, "trailing bytes in a section");
        }
    };
    nn::NetworkConfig config;
    parse(kConfig, [&](Reader& r) { config = read_config(r); });
    b.network = nn::DenseNet<float>::initialize(config, 0);
    parse(kTensors, [&](Reader& r) { read_tensors(r, b.network); });
    const std::size_t dim = config.feature_dim();
    parse(kScaler, [&](Reader& r) { b.ensemble.scaler = read_scaler(r); });
    if (b.ensemble.scaler.mean.size() != dim) {
        raise(ErrorCode::BundleCorrupt, "scaler dimension does not match the network features");
    }
    parse(kEnsemble, [&](Reader& r) {
        auto scaler = std::move(b.ensemble.scaler);
        b.ensemble = read_ensemble(r, dim);
        b.ensemble.scaler = std::move(scaler);
    });
    parse(kMeta, [&](Reader& r) { b.meta = read_meta(r); });
    return b;
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
    const auto bytes = serialize_bundle(bundle);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        raise(ErrorCode::Io, "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        raise(ErrorCode::Io, "write failed for " + path.string());
    }
}

ModelBundle load_bundle(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        raise(ErrorCode::Io, "cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_bundle(bytes);
}

std::uint64_t bundle_checksum(const ModelBundle& bundle) {
    const auto bytes = serialize_bundle(bundle);
    std::uint64_t v;
    std::memcpy(&v, bytes.data() + bytes.size() - 8, 8);
    return v;
}

}  // namespace toxpipe::pipeline
