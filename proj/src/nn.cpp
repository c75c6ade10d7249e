#include "voxshape/nn.hpp"

#include <atomic>

#include <cstring>
#include <fstream>
#include <sstream>

namespace voxshape::nn {

namespace {
std::atomic<int> g_compute_threads{1};
}

void set_compute_threads(int threads) {
    g_compute_threads.store(std::max(1, threads));
}

int compute_threads() { return g_compute_threads.load(); }


std::vector<std::array<int, 3>> ArchConfig::stage_windows() const {
    std::vector<std::array<int, 3>> windows;
    int ext[3] = {dims.h, dims.w, dims.d};
    for (std::size_t s = 0; s < stage_channels.size(); ++s) {
        std::array<int, 3> win{1, 1, 1};
        for (int a = 0; a < 3; ++a) {
            if (ext[a] % 2 == 0 && ext[a] / 2 >= 1) {
                win[a] = 2;
            } else if (ext[a] % 3 == 0 && ext[a] / 3 >= 1) {
                win[a] = 3;
            }
            ext[a] /= win[a];
        }
        if (win == std::array<int, 3>{1, 1, 1}) {
            throw ConfigError("arch: dims admit no further pooling stage");
        }
        windows.push_back(win);
    }
    return windows;
}

std::array<int, 3> ArchConfig::bottleneck_spatial() const {
    int ext[3] = {dims.h, dims.w, dims.d};
    for (const auto& win : stage_windows()) {
        for (int a = 0; a < 3; ++a) ext[a] /= win[a];
    }
    return {ext[0], ext[1], ext[2]};
}

std::string ArchConfig::serialize() const {
    std::ostringstream os;
    os << dims.h << " " << dims.w << " " << dims.d << " " << in_channels << " " << latent
       << " " << bn_momentum << " " << stage_channels.size();
    for (int c : stage_channels) os << " " << c;
    return os.str();
}

ArchConfig ArchConfig::deserialize(const std::string& line) {
    std::istringstream is(line);
    ArchConfig arch;
    int h = 0, w = 0, d = 0;
    std::size_t stages = 0;
    if (!(is >> h >> w >> d >> arch.in_channels >> arch.latent >> arch.bn_momentum >>
          stages)) {
        throw InputError("bad architecture line in checkpoint");
    }
    arch.dims = GridDims(h, w, d);
    arch.stage_channels.assign(stages, 0);
    for (auto& c : arch.stage_channels) {
        if (!(is >> c)) throw InputError("bad architecture line in checkpoint");
    }
    return arch;
}

namespace {

std::string idx_name(const std::string& prefix, int i) {
    return prefix + "." + std::to_string(i);
}

}  // namespace

template <class T>
Encoder<T> make_encoder(const ArchConfig& arch, const std::string& prefix) {
    Encoder<T> enc;
    const auto windows = arch.stage_windows();
    int c_prev = arch.in_channels;
    int li = 0;
    for (std::size_t s = 0; s < arch.stage_channels.size(); ++s) {
        const int c = arch.stage_channels[s];
        for (int rep = 0; rep < 2; ++rep) {
            enc.trunk.add(std::make_unique<Conv3d<T>>(rep == 0 ? c_prev : c, c,
                                                      idx_name(prefix, li++)));
            enc.trunk.add(std::make_unique<Relu<T>>());
            ++li;
            enc.trunk.add(
                std::make_unique<BatchNorm<T>>(c, idx_name(prefix, li++), arch.bn_momentum));
        }
        enc.trunk.add(std::make_unique<MaxPool3d<T>>(windows[s]));
        ++li;
        c_prev = c;
    }
    const auto spatial = arch.bottleneck_spatial();
    const int flat = c_prev * spatial[0] * spatial[1] * spatial[2];
    enc.trunk.add(std::make_unique<Reshape<T>>(std::vector<int>{flat}));
    enc.head_mu = std::make_unique<Dense<T>>(flat, arch.latent, prefix + ".mu");
    enc.head_logvar = std::make_unique<Dense<T>>(flat, arch.latent, prefix + ".logvar");
    return enc;
}

template <class T>
Decoder<T> make_decoder(const ArchConfig& arch, const std::string& prefix) {
    Decoder<T> dec;
    const auto windows = arch.stage_windows();
    const auto spatial = arch.bottleneck_spatial();
    const int c_last = arch.stage_channels.back();
    const int flat = c_last * spatial[0] * spatial[1] * spatial[2];
    int li = 0;
    dec.trunk.add(std::make_unique<Dense<T>>(arch.latent, flat, idx_name(prefix, li++)));
    dec.trunk.add(std::make_unique<Relu<T>>());
    ++li;
    dec.trunk.add(std::make_unique<Reshape<T>>(
        std::vector<int>{c_last, spatial[0], spatial[1], spatial[2]}));
    ++li;
    int c_prev = c_last;
    for (int s = int(arch.stage_channels.size()) - 1; s >= 0; --s) {
        const int c = s > 0 ? arch.stage_channels[s - 1] : arch.stage_channels[0];
        dec.trunk.add(std::make_unique<UpsampleNearest<T>>(windows[s]));
        ++li;
        dec.trunk.add(std::make_unique<Conv3d<T>>(c_prev, c, idx_name(prefix, li++)));
        dec.trunk.add(std::make_unique<Relu<T>>());
        ++li;
        dec.trunk.add(
            std::make_unique<BatchNorm<T>>(c, idx_name(prefix, li++), arch.bn_momentum));
        dec.trunk.add(std::make_unique<Conv3d<T>>(c, c, idx_name(prefix, li++)));
        dec.trunk.add(std::make_unique<Relu<T>>());
        ++li;
        dec.trunk.add(
            std::make_unique<BatchNorm<T>>(c, idx_name(prefix, li++), arch.bn_momentum));
        c_prev = c;
    }
    dec.head_occ.add(std::make_unique<Conv3d<T>>(c_prev, 1, prefix + ".occ"));
    dec.head_occ.add(std::make_unique<Sigmoid<T>>());
    dec.head_sdf.add(std::make_unique<Conv3d<T>>(c_prev, 1, prefix + ".sdf"));
    return dec;
}

template <class T>
void glorot_init(const std::vector<Param<T>*>& params, std::uint64_t seed) {
    Rng rng(seed);
    for (auto* p : params) {
        const auto& shape = p->value.shape;
        const bool is_weight = p->name.size() > 7 &&
                               p->name.compare(p->name.size() - 7, 7, ".weight") == 0;
        if (!is_weight) continue;  // biases stay zero, batchnorm keeps 1/0
        std::int64_t fan_in = 1, fan_out = 1;
        if (shape.size() == 2) {
            fan_out = shape[0];
            fan_in = shape[1];
        } else if (shape.size() == 5) {
            const std::int64_t k = std::int64_t(shape[2]) * shape[3] * shape[4];
            fan_out = shape[0] * k;
            fan_in = shape[1] * k;
        } else {
            throw DegenerateInputError("glorot_init: unexpected weight rank");
        }
        const double a = std::sqrt(6.0 / double(fan_in + fan_out));
        for (auto& v : p->value.values) v = T(rng.uniform(-a, a));
    }
}

template <class T>
double grad_check(const std::vector<Param<T>*>& params,
                  const std::function<double()>& loss, double eps) {
    if (!(eps > 0.0)) throw DegenerateInputError("grad_check: eps must be positive");
    double worst = 0.0;
    for (auto* p : params) {
        if (!p->trainable) continue;
        for (std::size_t i = 0; i < p->value.values.size(); ++i) {
            const T saved = p->value.values[i];
            p->value.values[i] = saved + T(eps);
            const double lp = loss();
            p->value.values[i] = saved - T(eps);
            const double lm = loss();
            p->value.values[i] = saved;
            const double fd = (lp - lm) / (2.0 * eps);
            const double g = double(p->grad.values[i]);
            const double err = std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1.0});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

const Tensor<float>* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return &t;
    }
    return nullptr;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "VSCKPT1\n";
    for (const auto& [k, v] : ckpt.meta) {
        os << "meta " << k << " " << v << "\n";
    }
    os << "tensors " << ckpt.tensors.size() << "\n";
    for (const auto& [name, t] : ckpt.tensors) {
        os << "tensor " << name << " " << t.shape.size();
        for (int e : t.shape) os << " " << e;
        os << "\n";
    }
    os << "blobs\n";
    for (const auto& [name, t] : ckpt.tensors) {
        for (float v : t.values) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            const char b[4] = {char(bits & 0xff), char((bits >> 8) & 0xff),
                               char((bits >> 16) & 0xff), char((bits >> 24) & 0xff)};
            os.write(b, 4);
        }
    }
    if (!os) throw IoError("write failed: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open: " + path);
    std::string line;
    if (!std::getline(is, line) || line != "VSCKPT1") {
        throw InputError("bad checkpoint magic in " + path);
    }
    Checkpoint ckpt;
    std::size_t n_tensors = 0;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "meta") {
            std::string key;
            ls >> key;
            std::string value;
            std::getline(ls, value);
            if (!value.empty() && value.front() == ' ') value.erase(0, 1);
            ckpt.meta[key] = value;
        } else if (tag == "tensors") {
            ls >> n_tensors;
        } else if (tag == "tensor") {
            std::string name;
            std::size_t rank = 0;
            ls >> name >> rank;
            std::vector<int> shape(rank);
            for (auto& e : shape) ls >> e;
            Tensor<float> t;
            t.shape = shape;
            ckpt.tensors.emplace_back(name, std::move(t));
        } else if (tag == "blobs") {
            break;
        } else {
            throw InputError("unexpected checkpoint line: " + line);
        }
    }
    if (ckpt.tensors.size() != n_tensors) {
        throw InputError("tensor count mismatch in " + path);
    }
    for (auto& [name, t] : ckpt.tensors) {
        t.values.resize(std::size_t(Tensor<float>::size_of(t.shape)));
        for (auto& v : t.values) {
            unsigned char b[4];
            is.read(reinterpret_cast<char*>(b), 4);
            const std::uint32_t bits = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
                                       (std::uint32_t(b[2]) << 16) |
                                       (std::uint32_t(b[3]) << 24);
            std::memcpy(&v, &bits, 4);
        }
    }
    if (!is) throw InputError("truncated checkpoint: " + path);
    return ckpt;
}

template <class T>
void export_params(const std::vector<Param<T>*>& params, Checkpoint& ckpt) {
    for (const auto* p : params) {
        ckpt.tensors.emplace_back(p->name, p->value.template cast<float>());
    }
}

template <class T>
void import_params(const Checkpoint& ckpt, const std::vector<Param<T>*>& params) {
    for (auto* p : params) {
        const Tensor<float>* t = ckpt.find(p->name);
        if (!t) throw InputError("checkpoint missing tensor: " + p->name);
        if (t->shape != p->value.shape) {
            throw InputError("checkpoint tensor shape mismatch: " + p->name);
        }
        p->value = t->template cast<T>();
    }
}

template Encoder<float> make_encoder<float>(const ArchConfig&, const std::string&);
template Encoder<double> make_encoder<double>(const ArchConfig&, const std::string&);
template Decoder<float> make_decoder<float>(const ArchConfig&, const std::string&);
template Decoder<double> make_decoder<double>(const ArchConfig&, const std::string&);
template void glorot_init<float>(const std::vector<Param<float>*>&, std::uint64_t);
template void glorot_init<double>(const std::vector<Param<double>*>&, std::uint64_t);
template double grad_check<float>(const std::vector<Param<float>*>&,
                                  const std::function<double()>&, double);
template double grad_check<double>(const std::vector<Param<double>*>&,
                                   const std::function<double()>&, double);
template void export_params<float>(const std::vector<Param<float>*>&, Checkpoint&);
template void export_params<double>(const std::vector<Param<double>*>&, Checkpoint&);
template void import_params<float>(const Checkpoint&, const std::vector<Param<float>*>&);
template void import_params<double>(const Checkpoint&, const std::vector<Param<double>*>&);

}  // namespace voxshape::nn
