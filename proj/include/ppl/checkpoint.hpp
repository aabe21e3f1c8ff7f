#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppl/network.hpp"

namespace ppl {

// Checkpoint file: one JSON header line describing the config and parameter
// offsets, then the flat parameter vector as little-endian 64-bit floats.

namespace detail {
inline bool is_little_endian() {
    const std::uint16_t x = 1;
    return *reinterpret_cast<const std::uint8_t*>(&x) == 1;
}

inline void write_f64_le(std::ostream& os, const double* data, std::size_t n) {
    if (is_little_endian()) {
        os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 8));
        return;
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &data[i], 8);
        char buf[8];
        for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
        os.write(buf, 8);
    }
}

inline void read_f64_le(std::istream& is, double* data, std::size_t n) {
    if (is_little_endian()) {
        is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 8));
        return;
    }
    for (std::size_t i = 0; i < n; ++i) {
        char buf[8];
        is.read(buf, 8);
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b)
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[b])) << (8 * b);
        std::memcpy(&data[i], &bits, 8);
    }
}
}  // namespace detail

inline void save_network(const Network& net, const std::string& path) {
    nlohmann::json hdr;
    hdr["type"] = "ppl-checkpoint";
    hdr["version"] = 1;
    hdr["input_dim"] = net.cfg.input_dim;
    hdr["hidden"] = net.cfg.hidden;
    hdr["output_dim"] = net.cfg.output_dim;
    hdr["head"] = head_name(net.cfg.head);
    if (net.cfg.head == Head::PolicyTanh) {
        hdr["action_low"] = net.action_low.values;
        hdr["action_high"] = net.action_high.values;
    }
    nlohmann::json offsets = nlohmann::json::array();
    std::size_t off = 0;
    for (const auto& p : net.params) {
        offsets.push_back({{"shape", p.shape}, {"offset", off}});
        off += p.size();
    }
    hdr["params"] = offsets;
    hdr["param_count"] = off;

    std::ofstream os(path, std::ios::binary);
    if (!os) throw tensor_error("cannot open checkpoint for writing: " + path);
    os << hdr.dump() << "\n";
    for (const auto& p : net.params) detail::write_f64_le(os, p.values.data(), p.size());
    if (!os) throw tensor_error("checkpoint write failed: " + path);
}

inline Network load_network(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw tensor_error("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(is, line)) throw tensor_error("checkpoint missing header: " + path);
    nlohmann::json hdr;
    try {
        hdr = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw tensor_error("checkpoint header parse error: " + std::string(e.what()));
    }
    if (hdr.value("type", "") != "ppl-checkpoint")
        throw tensor_error("not a checkpoint file: " + path);

    Network net;
    net.cfg.input_dim = hdr.at("input_dim").get<std::size_t>();
    net.cfg.hidden = hdr.at("hidden").get<std::vector<std::size_t>>();
    net.cfg.output_dim = hdr.at("output_dim").get<std::size_t>();
    net.cfg.head = head_from_name(hdr.at("head").get<std::string>());
    if (net.cfg.head == Head::PolicyTanh) {
        net.action_low = Tensor::row(hdr.at("action_low").get<std::vector<double>>());
        net.action_high = Tensor::row(hdr.at("action_high").get<std::vector<double>>());
    }
    for (const auto& p : hdr.at("params")) {
        auto shape = p.at("shape").get<std::vector<std::size_t>>();
        net.params.push_back(Tensor::zeros(shape));
    }
    for (auto& p : net.params) {
        detail::read_f64_le(is, p.values.data(), p.size());
        if (!is) throw tensor_error("checkpoint truncated: " + path);
    }
    return net;
}

}  // namespace ppl
