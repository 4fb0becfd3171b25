// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0

#include "clgt/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace clgt {

namespace {

template <typename T>
void put(std::vector<unsigned char>& buf, T v) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    buf.insert(buf.end(), bytes, bytes + sizeof(T));  // little-endian host
}

template <typename T>
T take(const std::vector<unsigned char>& buf, size_t& off) {
    if (off + sizeof(T) > buf.size()) throw ValueError("checkpoint: truncated file");
    T v;
    std::memcpy(&v, buf.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

}  // namespace

CheckpointTensor CheckpointTensor::from_f32(const std::string& name, const Tensor<float>& t) {
    CheckpointTensor c;
    c.name = name;
    c.dtype = DType::F32;
    c.shape = t.shape;
    c.raw.resize(t.data.size() * sizeof(float));
    std::memcpy(c.raw.data(), t.data.data(), c.raw.size());
    return c;
}

CheckpointTensor CheckpointTensor::from_f64(const std::string& name, const Tensor<double>& t) {
    CheckpointTensor c;
    c.name = name;
    c.dtype = DType::F64;
    c.shape = t.shape;
    c.raw.resize(t.data.size() * sizeof(double));
    std::memcpy(c.raw.data(), t.data.data(), c.raw.size());
    return c;
}

Tensor<float> CheckpointTensor::to_f32() const {
    if (dtype != DType::F32) throw ValueError("checkpoint tensor " + name + ": expected f32");
    Tensor<float> t(shape);
    std::memcpy(t.data.data(), raw.data(), raw.size());
    return t;
}

Tensor<double> CheckpointTensor::to_f64() const {
    if (dtype != DType::F64) throw ValueError("checkpoint tensor " + name + ": expected f64");
    Tensor<double> t(shape);
    std::memcpy(t.data.data(), raw.data(), raw.size());
    return t;
}

void write_checkpoint(const std::string& path, const std::vector<CheckpointTensor>& tensors,
                      uint32_t version) {
    std::vector<unsigned char> buf;
    buf.insert(buf.end(), {'C', 'L', 'G', 'T'});
    put<uint32_t>(buf, version);
    put<uint32_t>(buf, static_cast<uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        if (t.name.size() > 0xFFFF) throw ValueError("checkpoint: tensor name too long");
        put<uint16_t>(buf, static_cast<uint16_t>(t.name.size()));
        buf.insert(buf.end(), t.name.begin(), t.name.end());
        put<uint8_t>(buf, static_cast<uint8_t>(t.dtype));
        put<uint8_t>(buf, static_cast<uint8_t>(t.shape.size()));
        for (int d : t.shape) put<uint32_t>(buf, static_cast<uint32_t>(d));
        buf.insert(buf.end(), t.raw.begin(), t.raw.end());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValueError("checkpoint: cannot write " + path);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

std::vector<CheckpointTensor> read_checkpoint(const std::string& path, uint32_t* version) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValueError("checkpoint: cannot read " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    size_t off = 0;
    if (buf.size() < 12 || buf[0] != 'C' || buf[1] != 'L' || buf[2] != 'G' || buf[3] != 'T')
        throw ValueError("checkpoint: bad magic in " + path);
    off = 4;
    const uint32_t ver = take<uint32_t>(buf, off);
    if (version) *version = ver;
    const uint32_t count = take<uint32_t>(buf, off);
    std::vector<CheckpointTensor> out;
    out.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        CheckpointTensor t;
        const uint16_t nlen = take<uint16_t>(buf, off);
        if (off + nlen > buf.size()) throw ValueError("checkpoint: truncated name");
        t.name.assign(reinterpret_cast<const char*>(buf.data() + off), nlen);
        off += nlen;
        const uint8_t dtype = take<uint8_t>(buf, off);
        if (dtype > 1) throw ValueError("checkpoint: bad dtype code");
        t.dtype = static_cast<DType>(dtype);
        const uint8_t rank = take<uint8_t>(buf, off);
        int64_t numel = 1;
        for (uint8_t r = 0; r < rank; ++r) {
            const auto d = static_cast<int>(take<uint32_t>(buf, off));
            t.shape.push_back(d);
            numel *= d;
        }
        const size_t bytes = static_cast<size_t>(numel) * (t.dtype == DType::F32 ? 4 : 8);
        if (off + bytes > buf.size()) throw ValueError("checkpoint: truncated payload");
        t.raw.assign(buf.begin() + static_cast<std::ptrdiff_t>(off),
                     buf.begin() + static_cast<std::ptrdiff_t>(off + bytes));
        off += bytes;
        out.push_back(std::move(t));
    }
    return out;
}

void save_model(const std::string& path, const Model& model) {
    std::vector<CheckpointTensor> tensors;
    for (const auto& [name, p] : model.named_params())
        tensors.push_back(CheckpointTensor::from_f32(name, p->value));
    tensors.push_back(
        CheckpointTensor::from_f64("meta.step", Tensor<double>::scalar(static_cast<double>(model.trained_steps))));
    const ConfigMap cfg_map = model_config_to_map(model.cfg);
    for (const auto& [key, value] : cfg_map) {
        // numeric keys as scalars, the rest byte-encoded
        try {
            size_t pos = 0;
            const double d = std::stod(value, &pos);
            if (pos == value.size()) {
                tensors.push_back(CheckpointTensor::from_f64("cfg." + key, Tensor<double>::scalar(d)));
                continue;
            }
        } catch (const std::exception&) {
        }
        Tensor<double> enc({static_cast<int>(value.size())});
        for (size_t i = 0; i < value.size(); ++i) enc.at(static_cast<int64_t>(i)) = value[i];
        tensors.push_back(CheckpointTensor::from_f64("cfgs." + key, enc));
    }
    write_checkpoint(path, tensors);
}

Model load_model(const std::string& path) {
    const auto tensors = read_checkpoint(path);
    ConfigMap cfg_map;
    double step = 0;
    for (const auto& t : tensors) {
        if (t.name.rfind("cfg.", 0) == 0) {
            const auto v = t.to_f64();
            std::ostringstream os;
            os.precision(17);
            os << v.at(0);
            cfg_map[t.name.substr(4)] = os.str();
        } else if (t.name.rfind("cfgs.", 0) == 0) {
            const auto v = t.to_f64();
            std::string s;
            for (double d : v.data) s.push_back(static_cast<char>(d));
            cfg_map[t.name.substr(5)] = s;
        } else if (t.name == "meta.step") {
            step = t.to_f64().at(0);
        }
    }
    Model model = build_model(model_config_from_map(cfg_map));
    model.trained_steps = static_cast<int64_t>(step);
    auto params = model.named_params();
    for (auto& [name, p] : params) {
        bool found = false;
        for (const auto& t : tensors) {
            if (t.name != name) continue;
            if (t.shape != p->value.shape)
                throw_shape_mismatch(("checkpoint " + name).c_str(), t.shape, p->value.shape);
            p->value = t.to_f32();
            found = true;
            break;
        }
        if (!found) throw ValueError("checkpoint: missing parameter " + name);
    }
    return model;
}

}  // namespace clgt
