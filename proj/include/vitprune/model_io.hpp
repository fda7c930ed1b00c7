// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vitprune/config.hpp"
#include "vitprune/linalg.hpp"

namespace vitprune {

/// Shape-tagged tensor in computation precision. A 0-d tensor holds one value.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    std::size_t numel() const;
    /// 2-d view collapsing all leading dims into rows (1-d becomes a single row).
    Matrix as_matrix() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Named tensors for one checkpoint. Immutable once loaded.
class WeightStore {
public:
    static constexpr std::uint32_t kFormatVersion = 1;

    WeightStore() = default;
    explicit WeightStore(std::string model_tag, std::uint32_t format_version = kFormatVersion)
        : m_model_tag(std::move(model_tag)), m_format_version(format_version) {}

    const std::string& model_tag() const { return m_model_tag; }
    std::uint32_t format_version() const { return m_format_version; }
    const std::map<std::string, Tensor>& entries() const { return m_entries; }

    bool contains(const std::string& name) const { return m_entries.count(name) != 0; }
    /// Throws TensorNotFound.
    const Tensor& get(const std::string& name) const;
    void put(const std::string& name, Tensor t);
    void erase(const std::string& name) { m_entries.erase(name); }

    /// Checks the entry set against canonical_tensors() for the model tag:
    /// IncompleteCheckpoint on a missing name, ShapeError on a wrong shape,
    /// FormatError on an unknown name or a non-finite value.
    void validate() const;

    friend bool operator==(const WeightStore&, const WeightStore&) = default;

private:
    std::string m_model_tag;
    std::uint32_t m_format_version = kFormatVersion;
    std::map<std::string, Tensor> m_entries;
};

// Weight file, little-endian:
//   "VPKW" | u32 version | u16 len + tag bytes | u32 count |
//   count x (u16 len + name bytes | u8 ndim | ndim x u32 dim | f32 payload)
std::vector<std::uint8_t> encode_weights(const WeightStore& store);
WeightStore decode_weights(std::span<const std::uint8_t> bytes, bool validate = true);
void write_weights(const WeightStore& store, const std::filesystem::path& path);
WeightStore load_weights(const std::filesystem::path& path);

// Tensor file: "VPKT" | u32 version | u8 ndim | ndim x u32 dim | f32 payload
std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);
void write_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

struct ManifestRecord {
    std::string tensor_path;
    std::size_t label = 0;
    std::optional<std::size_t> reference_top1;
    std::optional<std::string> reference_logits_path;

    friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct Manifest {
    std::vector<ManifestRecord> records;
    /// Directory relative paths in records are resolved against.
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const std::string& p) const;
};

/// JSON: {"records": [{"tensor_path": ..., "label": ..., "reference_top1": ...,
/// "reference_logits_path": ...}, ...]}. Labels must lie in [0, num_classes).
Manifest load_manifest(const std::filesystem::path& path, std::size_t num_classes);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

}  // namespace vitprune
