#include "popsan/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace popsan {

void to_json(nlohmann::json& j, const StageConfig& s) {
    j = nlohmann::json{{"T", s.timesteps}, {"hidden", s.hidden}, {"lambda", s.loss_weight}};
}

void from_json(const nlohmann::json& j, StageConfig& s) {
    s.timesteps = j.at("T").get<int>();
    s.hidden = j.at("hidden").get<std::vector<int>>();
    s.loss_weight = j.at("lambda").get<double>();
}

void to_json(nlohmann::json& j, const NetworkSpec& s) {
    j = nlohmann::json{{"obs_dim", s.obs_dim},
                       {"act_dim", s.act_dim},
                       {"pop_in", s.pop_in},
                       {"pop_out", s.pop_out},
                       {"obs_low", s.obs_low},
                       {"obs_high", s.obs_high},
                       {"stages", s.stages},
                       {"d_c", s.d_c},
                       {"d_v", s.d_v},
                       {"v_th", s.v_th},
                       {"surrogate_width", s.surrogate_width},
                       {"shrink_grad_through_mean", s.shrink_grad_through_mean},
                       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, NetworkSpec& s) {
    s = NetworkSpec::defaults();
    s.obs_dim = j.value("obs_dim", s.obs_dim);
    s.act_dim = j.value("act_dim", s.act_dim);
    s.pop_in = j.value("pop_in", s.pop_in);
    s.pop_out = j.value("pop_out", s.pop_out);
    s.obs_low = j.value("obs_low", s.obs_low);
    s.obs_high = j.value("obs_high", s.obs_high);
    if (j.contains("stages")) s.stages = j.at("stages").get<std::vector<StageConfig>>();
    s.d_c = j.value("d_c", s.d_c);
    s.d_v = j.value("d_v", s.d_v);
    s.v_th = j.value("v_th", s.v_th);
    s.surrogate_width = j.value("surrogate_width", s.surrogate_width);
    s.shrink_grad_through_mean = j.value("shrink_grad_through_mean", s.shrink_grad_through_mean);
    s.seed = j.value("seed", s.seed);
}

namespace ckpt {

namespace {

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v, const std::string& what) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("corrupt checkpoint: truncated " + what);
}

}  // namespace

void write_container(const std::string& path, const nlohmann::json& header,
                     const std::vector<NamedArray>& arrays) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);

    const std::string header_str = header.dump();
    write_pod(out, static_cast<uint32_t>(header_str.size()));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));

    write_pod(out, static_cast<uint32_t>(arrays.size()));
    for (const NamedArray& arr : arrays) {
        write_pod(out, static_cast<uint16_t>(arr.name.size()));
        out.write(arr.name.data(), static_cast<std::streamsize>(arr.name.size()));
        write_pod(out, static_cast<uint8_t>(0));  // dtype 0 = f64
        write_pod(out, static_cast<uint8_t>(arr.dims.size()));
        size_t expect = 1;
        for (uint32_t d : arr.dims) {
            write_pod(out, d);
            expect *= d;
        }
        if (expect != arr.data.size())
            throw std::runtime_error("array payload does not match dims: " + arr.name);
        out.write(reinterpret_cast<const char*>(arr.data.data()),
                  static_cast<std::streamsize>(arr.data.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

std::pair<nlohmann::json, std::vector<NamedArray>> read_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("corrupt checkpoint: bad magic in " + path);
    uint32_t version = 0;
    read_pod(in, version, "version");
    if (version != kVersion)
        throw std::runtime_error("checkpoint format version mismatch: got " +
                                 std::to_string(version) + ", expected " +
                                 std::to_string(kVersion));

    uint32_t header_len = 0;
    read_pod(in, header_len, "header length");
    std::string header_str(header_len, '\0');
    in.read(header_str.data(), header_len);
    if (!in) throw std::runtime_error("corrupt checkpoint: truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_str);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("corrupt checkpoint: bad header JSON: ") + e.what());
    }

    uint32_t count = 0;
    read_pod(in, count, "array count");
    std::vector<NamedArray> arrays;
    arrays.reserve(count);
    for (uint32_t k = 0; k < count; ++k) {
        NamedArray arr;
        uint16_t name_len = 0;
        read_pod(in, name_len, "array name length");
        arr.name.assign(name_len, '\0');
        in.read(arr.name.data(), name_len);
        if (!in) throw std::runtime_error("corrupt checkpoint: truncated array name");
        uint8_t dtype = 0, ndim = 0;
        read_pod(in, dtype, "dtype");
        if (dtype != 0) throw std::runtime_error("unsupported dtype in array " + arr.name);
        read_pod(in, ndim, "rank");
        size_t total = 1;
        for (uint8_t d = 0; d < ndim; ++d) {
            uint32_t dim = 0;
            read_pod(in, dim, "dim of " + arr.name);
            arr.dims.push_back(dim);
            total *= dim;
        }
        arr.data.resize(total);
        in.read(reinterpret_cast<char*>(arr.data.data()),
                static_cast<std::streamsize>(total * sizeof(double)));
        if (!in)
            throw std::runtime_error("corrupt checkpoint: truncated payload of " + arr.name);
        arrays.push_back(std::move(arr));
    }
    return {std::move(header), std::move(arrays)};
}

}  // namespace ckpt

void save_checkpoint(const PopSanActor& actor, const std::string& path) {
    nlohmann::json header;
    header["kind"] = "snn";
    header["spec"] = actor.spec;

    std::vector<ckpt::NamedArray> arrays;
    PopSanActor& mut = const_cast<PopSanActor&>(actor);
    for (const TensorRef& ref : mut.param_refs()) {
        ckpt::NamedArray arr;
        arr.name = ref.name;
        arr.dims = {static_cast<uint32_t>(ref.n)};
        arr.data.assign(ref.data, ref.data + ref.n);
        arrays.push_back(std::move(arr));
    }
    ckpt::write_container(path, header, arrays);
}

PopSanActor load_checkpoint(const std::string& path) {
    auto [header, arrays] = ckpt::read_container(path);
    if (header.value("kind", "") != "snn")
        throw std::runtime_error("checkpoint kind mismatch: expected snn actor in " + path);
    NetworkSpec spec = header.at("spec").get<NetworkSpec>();
    PopSanActor actor(spec);

    std::vector<TensorRef> refs = actor.param_refs();
    if (refs.size() != arrays.size())
        throw std::runtime_error("checkpoint tensor count mismatch: file has " +
                                 std::to_string(arrays.size()) + ", spec defines " +
                                 std::to_string(refs.size()));
    for (size_t k = 0; k < refs.size(); ++k) {
        const ckpt::NamedArray& arr = arrays[k];
        if (arr.name != refs[k].name)
            throw std::runtime_error("checkpoint tensor name mismatch: expected " +
                                     refs[k].name + ", found " + arr.name);
        if (arr.data.size() != refs[k].n)
            throw std::runtime_error(
                "checkpoint shape mismatch for tensor " + arr.name + ": file has " +
                std::to_string(arr.data.size()) + " values, spec requires " +
                std::to_string(refs[k].n));
        std::memcpy(refs[k].data, arr.data.data(), arr.data.size() * sizeof(double));
    }
    return actor;
}

std::string checkpoint_kind(const std::string& path) {
    auto [header, arrays] = ckpt::read_container(path);
    (void)arrays;
    return header.value("kind", "");
}

}  // namespace popsan
