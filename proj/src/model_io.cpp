// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitprune/model_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "json.hpp"
#include "vitprune/error.hpp"

namespace vitprune {

namespace {

constexpr char kWeightMagic[4] = {'V', 'P', 'K', 'W'};
constexpr char kTensorMagic[4] = {'V', 'P', 'K', 'T'};
constexpr std::uint32_t kTensorVersion = 1;

class Writer {
public:
    void bytes(const char* p, std::size_t n) { m_out.insert(m_out.end(), p, p + n); }
    void u8(std::uint8_t v) { m_out.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) {
            m_out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            m_out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void str16(const std::string& s) {
        if (s.size() > 0xFFFF) {
            throw InvalidInput("string too long for u16 length prefix");
        }
        u16(static_cast<std::uint16_t>(s.size()));
        bytes(s.data(), s.size());
    }
    std::vector<std::uint8_t> take() { return std::move(m_out); }

private:
    std::vector<std::uint8_t> m_out;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : m_in(in) {}

    std::span<const std::uint8_t> take(std::size_t n) {
        if (m_in.size() - m_pos < n) {
            throw FormatError("truncated payload: need " + std::to_string(n) + " bytes at offset " +
                              std::to_string(m_pos) + ", have " + std::to_string(m_in.size() - m_pos));
        }
        auto s = m_in.subspan(m_pos, n);
        m_pos += n;
        return s;
    }
    std::uint8_t u8() { return take(1)[0]; }
    std::uint16_t u16() {
        auto b = take(2);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }
    std::uint32_t u32() {
        auto b = take(4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str16() {
        auto n = u16();
        auto b = take(n);
        return std::string(b.begin(), b.end());
    }
    void magic(const char (&expect)[4]) {
        auto b = take(4);
        if (std::memcmp(b.data(), expect, 4) != 0) {
            throw FormatError("bad magic: expected '" + std::string(expect, 4) + "', got '" +
                              std::string(b.begin(), b.end()) + "'");
        }
    }
    bool done() const { return m_pos == m_in.size(); }
    std::size_t remaining() const { return m_in.size() - m_pos; }

private:
    std::span<const std::uint8_t> m_in;
    std::size_t m_pos = 0;
};

void write_shape_and_payload(Writer& w, const Tensor& t) {
    if (t.shape.size() > 0xFF) {
        throw InvalidInput("tensor rank exceeds 255");
    }
    if (t.data.size() != t.numel()) {
        throw ShapeError("tensor data length does not match its shape");
    }
    w.u8(static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) {
        if (d > 0xFFFFFFFFu) {
            throw InvalidInput("tensor dimension exceeds u32");
        }
        w.u32(static_cast<std::uint32_t>(d));
    }
    for (double v : t.data) {
        w.f32(static_cast<float>(v));
    }
}

Tensor read_shape_and_payload(Reader& r) {
    Tensor t;
    const auto ndim = r.u8();
    t.shape.resize(ndim);
    for (auto& d : t.shape) {
        d = r.u32();
    }
    const std::size_t n = t.numel();
    if (r.remaining() / 4 < n) {
        throw FormatError("truncated payload: declared " + std::to_string(n) + " values, " +
                          std::to_string(r.remaining() / 4) + " present");
    }
    t.data.resize(n);
    for (auto& v : t.data) {
        v = static_cast<double>(r.f32());
    }
    return t;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open file: " + path.string());
    }
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write file: " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("write failed: " + path.string());
    }
}

std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += (i ? "," : "") + std::to_string(s[i]);
    }
    return out + "]";
}

}  // namespace

std::size_t Tensor::numel() const {
    std::size_t n = 1;
    for (auto d : shape) {
        n *= d;
    }
    return n;
}

Matrix Tensor::as_matrix() const {
    if (shape.empty()) {
        return Matrix(1, 1, data);
    }
    const std::size_t cols = shape.back();
    const std::size_t rows = cols == 0 ? 0 : numel() / cols;
    return Matrix(rows, cols, data);
}

const Tensor& WeightStore::get(const std::string& name) const {
    auto it = m_entries.find(name);
    if (it == m_entries.end()) {
        throw TensorNotFound(name);
    }
    return it->second;
}

void WeightStore::put(const std::string& name, Tensor t) {
    if (t.data.size() != t.numel()) {
        throw ShapeError("tensor '" + name + "' data length does not match shape " + shape_str(t.shape));
    }
    m_entries[name] = std::move(t);
}

void WeightStore::validate() const {
    VitConfig cfg;
    try {
        cfg = VitConfig::from_tag(m_model_tag);
    } catch (const InvalidInput& e) {
        throw FormatError(std::string("unusable model tag: ") + e.what());
    }
    std::set<std::string> known;
    for (const auto& spec : canonical_tensors(cfg)) {
        known.insert(spec.name);
        auto it = m_entries.find(spec.name);
        if (it == m_entries.end()) {
            throw IncompleteCheckpoint(spec.name);
        }
        if (it->second.shape != spec.shape) {
            throw ShapeError("tensor '" + spec.name + "' has shape " + shape_str(it->second.shape) +
                             ", expected " + shape_str(spec.shape));
        }
    }
    for (const auto& [name, t] : m_entries) {
        if (!known.count(name)) {
            throw FormatError("unexpected tensor '" + name + "' for model tag " + m_model_tag);
        }
        for (double v : t.data) {
            if (!std::isfinite(v)) {
                throw FormatError("tensor '" + name + "' contains a non-finite value");
            }
        }
    }
}

std::vector<std::uint8_t> encode_weights(const WeightStore& store) {
    Writer w;
    w.bytes(kWeightMagic, 4);
    w.u32(store.format_version());
    w.str16(store.model_tag());
    w.u32(static_cast<std::uint32_t>(store.entries().size()));
    for (const auto& [name, t] : store.entries()) {
        w.str16(name);
        write_shape_and_payload(w, t);
    }
    return w.take();
}

WeightStore decode_weights(std::span<const std::uint8_t> bytes, bool validate) {
    Reader r(bytes);
    r.magic(kWeightMagic);
    const auto version = r.u32();
    if (version != WeightStore::kFormatVersion) {
        throw FormatError("unsupported weight format version " + std::to_string(version));
    }
    WeightStore store(r.str16(), version);
    const auto count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        auto name = r.str16();
        if (store.contains(name)) {
            throw FormatError("duplicate tensor '" + name + "'");
        }
        store.put(name, read_shape_and_payload(r));
    }
    if (!r.done()) {
        throw FormatError("trailing bytes after last tensor");
    }
    if (validate) {
        store.validate();
    }
    return store;
}

void write_weights(const WeightStore& store, const std::filesystem::path& path) {
    write_file(path, encode_weights(store));
}

WeightStore load_weights(const std::filesystem::path& path) {
    return decode_weights(read_file(path));
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
    Writer w;
    w.bytes(kTensorMagic, 4);
    w.u32(kTensorVersion);
    write_shape_and_payload(w, t);
    return w.take();
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    r.magic(kTensorMagic);
    const auto version = r.u32();
    if (version != kTensorVersion) {
        throw FormatError("unsupported tensor format version " + std::to_string(version));
    }
    Tensor t = read_shape_and_payload(r);
    if (!r.done()) {
        throw FormatError("declared length " + std::to_string(t.numel()) + " does not match payload length");
    }
    return t;
}

void write_tensor(const Tensor& t, const std::filesystem::path& path) {
    write_file(path, encode_tensor(t));
}

Tensor load_tensor(const std::filesystem::path& path) {
    return decode_tensor(read_file(path));
}

std::filesystem::path Manifest::resolve(const std::string& p) const {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
}

Manifest load_manifest(const std::filesystem::path& path, std::size_t num_classes) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open manifest: " + path.string());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
    }
    Manifest m;
    m.base_dir = path.parent_path();
    try {
        for (const auto& rec : doc.at("records")) {
            ManifestRecord r;
            r.tensor_path = rec.at("tensor_path").get<std::string>();
            const auto label = rec.at("label").get<long long>();
            if (label < 0 || static_cast<unsigned long long>(label) >= num_classes) {
                throw InvalidInput("label " + std::to_string(label) + " outside [0, " +
                                   std::to_string(num_classes) + ") for " + r.tensor_path);
            }
            r.label = static_cast<std::size_t>(label);
            if (rec.contains("reference_top1") && !rec["reference_top1"].is_null()) {
                const auto ref = rec["reference_top1"].get<long long>();
                if (ref < 0 || static_cast<unsigned long long>(ref) >= num_classes) {
                    throw InvalidInput("reference_top1 " + std::to_string(ref) + " out of range");
                }
                r.reference_top1 = static_cast<std::size_t>(ref);
            }
            if (rec.contains("reference_logits_path") && !rec["reference_logits_path"].is_null()) {
                r.reference_logits_path = rec["reference_logits_path"].get<std::string>();
            }
            m.records.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : manifest.records) {
        nlohmann::json j = {{"tensor_path", r.tensor_path}, {"label", r.label}};
        if (r.reference_top1) {
            j["reference_top1"] = *r.reference_top1;
        }
        if (r.reference_logits_path) {
            j["reference_logits_path"] = *r.reference_logits_path;
        }
        records.push_back(std::move(j));
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error("cannot write manifest: " + path.string());
    }
    out << nlohmann::json{{"records", records}}.dump(2) << "\n";
}

}  // namespace vitprune
