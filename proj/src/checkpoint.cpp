#include "ctsac/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "ctsac/common.hpp"

namespace ctsac::ckpt {
namespace {

constexpr const char* kMagic = "ctsac-ckpt/1\n";

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char raw[8];
    for (int i = 0; i < 8; ++i) raw[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(raw), 8);
}

std::uint64_t read_u64(std::istream& is, const std::string& path) {
    unsigned char raw[8];
    is.read(reinterpret_cast<char*>(raw), 8);
    if (!is) throw IoError(path + ": truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(raw[i]) << (8 * i);
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is, const std::string& path) {
    const std::uint64_t n = read_u64(is, path);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw IoError(path + ": truncated checkpoint");
    return s;
}

void write_f64_array(std::ostream& os, const std::string& name,
                     const std::vector<std::size_t>& shape,
                     const std::vector<double>& data) {
    write_string(os, name);
    write_string(os, "f64");
    write_u64(os, shape.size());
    for (std::size_t d : shape) write_u64(os, d);
    for (double v : data) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        write_u64(os, bits);
    }
}

struct RawArray {
    std::vector<std::size_t> shape;
    std::vector<double> data;
};

RawArray read_f64_array(std::istream& is, const std::string& path, std::string& name) {
    name = read_string(is, path);
    const std::string dtype = read_string(is, path);
    if (dtype != "f64") {
        throw IoError(path + ": array '" + name + "' has unsupported dtype '" +
                      dtype + "'");
    }
    RawArray arr;
    const std::uint64_t rank = read_u64(is, path);
    std::size_t numel = 1;
    for (std::uint64_t i = 0; i < rank; ++i) {
        arr.shape.push_back(static_cast<std::size_t>(read_u64(is, path)));
        numel *= arr.shape.back();
    }
    arr.data.resize(numel);
    for (std::size_t i = 0; i < numel; ++i) {
        const std::uint64_t bits = read_u64(is, path);
        std::memcpy(&arr.data[i], &bits, 8);
    }
    return arr;
}

std::string meta_text(sac::SacEngine& engine, const TrainState& state) {
    std::ostringstream os;
    os << "iteration = " << state.iteration << '\n';
    os << "episodes = " << state.episodes << '\n';
    os << "stage = " << state.stage << '\n';
    os << "n_e = " << state.n_e << '\n';
    os << "window =";
    for (bool b : state.window) os << ' ' << (b ? 1 : 0);
    os << '\n';
    for (const auto& store : engine.stores()) {
        if (store.opt) {
            os << "adam_steps." << store.name << " = " << store.opt->step_count() << '\n';
        }
    }
    return os.str();
}

std::map<std::string, std::string> parse_meta(const std::string& text,
                                              const std::string& path) {
    std::map<std::string, std::string> out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (!line.empty()) throw IoError(path + ": malformed meta line '" + line + "'");
            continue;
        }
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
            while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
        };
        trim(key);
        trim(value);
        out[key] = value;
    }
    return out;
}

}  // namespace

void save(const std::string& path, sac::SacEngine& engine,
          const std::string& config_text, const TrainState& state) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os.write(kMagic, static_cast<std::streamsize>(std::strlen(kMagic)));
    write_string(os, config_text);
    write_string(os, meta_text(engine, state));

    std::uint64_t count = 0;
    for (const auto& store : engine.stores()) {
        count += store.params->entries().size();
        if (store.opt) count += 2 * store.params->entries().size();
    }
    write_u64(os, count);
    for (const auto& store : engine.stores()) {
        auto& entries = store.params->entries();
        for (std::size_t i = 0; i < entries.size(); ++i) {
            write_f64_array(os, entries[i].name, entries[i].tensor.shape(),
                            entries[i].tensor.values());
            if (store.opt) {
                write_f64_array(os, "adam.m." + entries[i].name,
                                entries[i].tensor.shape(), store.opt->first_moments()[i]);
                write_f64_array(os, "adam.v." + entries[i].name,
                                entries[i].tensor.shape(), store.opt->second_moments()[i]);
            }
        }
    }
    os.flush();
    if (!os) throw IoError("failed while writing '" + path + "'");
}

namespace {

std::ifstream open_checked(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "'");
    std::string magic(std::strlen(kMagic), '\0');
    is.read(magic.data(), static_cast<std::streamsize>(magic.size()));
    if (!is || magic != kMagic) {
        throw IoError(path + ": not a ctsac-ckpt/1 file");
    }
    return is;
}

}  // namespace

std::string read_config_text(const std::string& path) {
    std::ifstream is = open_checked(path);
    return read_string(is, path);
}

TrainState load_into(const std::string& path, sac::SacEngine& engine) {
    std::ifstream is = open_checked(path);
    (void)read_string(is, path);  // config text, already consumed by the caller
    const auto meta = parse_meta(read_string(is, path), path);

    std::map<std::string, RawArray> arrays;
    const std::uint64_t count = read_u64(is, path);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string name;
        RawArray arr = read_f64_array(is, path, name);
        arrays.emplace(std::move(name), std::move(arr));
    }

    auto take = [&](const std::string& name, const std::vector<std::size_t>& shape)
        -> std::vector<double> {
        auto it = arrays.find(name);
        if (it == arrays.end()) {
            throw IoError(path + ": missing array '" + name + "'");
        }
        if (it->second.shape != shape) {
            throw IoError(path + ": array '" + name + "' has shape " +
                          grad::shape_str(it->second.shape) + ", expected " +
                          grad::shape_str(shape));
        }
        return std::move(it->second.data);
    };

    for (const auto& store : engine.stores()) {
        auto& entries = store.params->entries();
        for (std::size_t i = 0; i < entries.size(); ++i) {
            entries[i].tensor.values() = take(entries[i].name, entries[i].tensor.shape());
            if (store.opt) {
                store.opt->first_moments()[i] =
                    take("adam.m." + entries[i].name, entries[i].tensor.shape());
                store.opt->second_moments()[i] =
                    take("adam.v." + entries[i].name, entries[i].tensor.shape());
            }
        }
        if (store.opt) {
            auto it = meta.find("adam_steps." + store.name);
            if (it == meta.end()) {
                throw IoError(path + ": missing meta key 'adam_steps." + store.name + "'");
            }
            store.opt->set_step_count(std::stoull(it->second));
        }
    }

    TrainState state;
    auto meta_u64 = [&](const char* key) -> std::uint64_t {
        auto it = meta.find(key);
        if (it == meta.end()) throw IoError(path + ": missing meta key '" + std::string(key) + "'");
        return std::stoull(it->second);
    };
    state.iteration = meta_u64("iteration");
    state.episodes = meta_u64("episodes");
    state.stage = static_cast<std::size_t>(meta_u64("stage"));
    state.n_e = static_cast<std::size_t>(meta_u64("n_e"));
    if (auto it = meta.find("window"); it != meta.end() && !it->second.empty()) {
        std::istringstream ws(it->second);
        int bit;
        while (ws >> bit) state.window.push_back(bit != 0);
    }
    return state;
}

}  // namespace ctsac::ckpt
