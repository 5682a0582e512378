// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mmseg::nn {

namespace {

constexpr char kMagic[8] = {'M', 'M', 'T', 'E', 'N', 'S', '1', '\n'};

template <typename V>
void put(std::ostream& os, V v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::istream& is, const std::filesystem::path& file) {
    V v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!is) throw std::runtime_error("truncated tensor archive " + file.string());
    return v;
}

}  // namespace

template <typename T>
void save_archive(const std::filesystem::path& file, const ParamList<T>& params) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    const auto tmp = file.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + tmp);
        os.write(kMagic, sizeof(kMagic));
        put<std::uint64_t>(os, params.size());
        for (const auto* p : params) {
            put<std::uint32_t>(os, static_cast<std::uint32_t>(p->name.size()));
            os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
            put<std::uint8_t>(os, sizeof(T));
            put<std::uint32_t>(os, static_cast<std::uint32_t>(p->value.rank()));
            for (auto d : p->value.shape()) put<std::int64_t>(os, d);
            os.write(reinterpret_cast<const char*>(p->value.data()),
                     static_cast<std::streamsize>(p->value.numel() * static_cast<std::int64_t>(sizeof(T))));
        }
        if (!os) throw std::runtime_error("failed writing " + tmp);
    }
    std::filesystem::rename(tmp, file);
}

TensorArchive load_archive(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open tensor archive " + file.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("not a tensor archive: " + file.string());
    TensorArchive out;
    const auto count = get<std::uint64_t>(is, file);
    for (std::uint64_t e = 0; e < count; ++e) {
        const auto len = get<std::uint32_t>(is, file);
        std::string name(len, '\0');
        is.read(name.data(), len);
        const auto esize = get<std::uint8_t>(is, file);
        const auto rank = get<std::uint32_t>(is, file);
        Shape shape;
        for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(get<std::int64_t>(is, file));
        Tensor<double> t(shape);
        for (std::int64_t i = 0; i < t.numel(); ++i) {
            if (esize == 4)
                t[i] = get<float>(is, file);
            else if (esize == 8)
                t[i] = get<double>(is, file);
            else
                throw std::runtime_error("unsupported element size in " + file.string());
        }
        out.emplace(std::move(name), std::move(t));
    }
    return out;
}

template <typename T>
int assign_from_archive(const TensorArchive& archive, const ParamList<T>& params, bool strict) {
    int n = 0;
    for (auto* p : params) {
        auto it = archive.find(p->name);
        if (it == archive.end() || it->second.shape() != p->value.shape()) {
            if (strict)
                throw std::runtime_error("checkpoint missing or mismatched parameter '" + p->name + "' (expected " +
                                         shape_str(p->value.shape()) + ")");
            continue;
        }
        p->value = it->second.template cast<T>();
        ++n;
    }
    return n;
}

template void save_archive<float>(const std::filesystem::path&, const ParamList<float>&);
template void save_archive<double>(const std::filesystem::path&, const ParamList<double>&);
template int assign_from_archive<float>(const TensorArchive&, const ParamList<float>&, bool);
template int assign_from_archive<double>(const TensorArchive&, const ParamList<double>&, bool);

}  // namespace mmseg::nn
