// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/data/io.hpp"

#include <nlohmann/json.hpp>
#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mmseg::data {

namespace {

using i64 = std::int64_t;

static_assert(sizeof(float) == 4);

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// Read a whole file, transparently gunzipping.
std::string read_all(const fs::path& path) {
    gzFile f = gzopen(path.string().c_str(), "rb");
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::string out;
    char buf[1 << 16];
    int n;
    while ((n = gzread(f, buf, sizeof(buf))) > 0) out.append(buf, static_cast<std::size_t>(n));
    const bool err = n < 0;
    gzclose(f);
    if (err) throw std::runtime_error("read error in " + path.string());
    return out;
}

void write_all(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    if (ends_with(path.string(), ".gz")) {
        gzFile f = gzopen(path.string().c_str(), "wb6");
        if (!f) throw std::runtime_error("cannot write " + path.string());
        const int n = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
        gzclose(f);
        if (n != static_cast<int>(bytes.size())) throw std::runtime_error("write error in " + path.string());
        return;
    }
    std::ofstream os(path, std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw std::runtime_error("write error in " + path.string());
}

// NIfTI-1 header field offsets.
constexpr int kSizeofHdr = 0, kDim = 40, kDatatype = 70, kBitpix = 72, kPixdim = 76, kVoxOffset = 108,
              kSclSlope = 112, kSclInter = 116, kMagic = 344;

template <typename V>
V rd(const std::string& b, std::size_t off) {
    V v;
    std::memcpy(&v, b.data() + off, sizeof(V));
    return v;
}

template <typename V>
void wr(std::string& b, std::size_t off, V v) {
    std::memcpy(b.data() + off, &v, sizeof(V));
}

}  // namespace

// ---------------------------------------------------------------------------

void save_raw(const fs::path& path, const Tensor<float>& voxels) {
    const auto e = voxels.extent();
    std::ostringstream os;
    os << "MMVOL1 " << voxels.channels() << ' ' << e.d << ' ' << e.h << ' ' << e.w << '\n';
    std::string bytes = os.str();
    bytes.append(reinterpret_cast<const char*>(voxels.data()), static_cast<std::size_t>(voxels.numel()) * 4);
    write_all(path, bytes);
}

Tensor<float> load_raw(const fs::path& path) {
    const std::string bytes = read_all(path);
    const auto nl = bytes.find('\n');
    if (nl == std::string::npos || bytes.compare(0, 7, "MMVOL1 ") != 0)
        throw std::runtime_error(path.string() + ": missing MMVOL1 header");
    std::istringstream hs(bytes.substr(7, nl - 7));
    i64 m = 0, d = 0, h = 0, w = 0;
    if (!(hs >> m >> d >> h >> w) || m <= 0 || d <= 0 || h <= 0 || w <= 0)
        throw std::runtime_error(path.string() + ": malformed MMVOL1 header");
    Tensor<float> t({m, d, h, w});
    const auto need = static_cast<std::size_t>(t.numel()) * 4;
    if (bytes.size() - nl - 1 != need)
        throw std::runtime_error(path.string() + ": payload size does not match header");
    std::memcpy(t.data(), bytes.data() + nl + 1, need);
    return t;
}

// ---------------------------------------------------------------------------

bool is_nifti(const fs::path& path) {
    const auto s = path.string();
    return ends_with(s, ".nii") || ends_with(s, ".nii.gz");
}

NiftiImage read_nifti(const fs::path& path) {
    const std::string b = read_all(path);
    if (b.size() < 352 || rd<std::int32_t>(b, kSizeofHdr) != 348)
        throw std::runtime_error(path.string() + ": not a little-endian NIfTI-1 file");
    if (std::memcmp(b.data() + kMagic, "n+1", 3) != 0)
        throw std::runtime_error(path.string() + ": only single-file NIfTI-1 (n+1) is supported");
    const int ndim = rd<std::int16_t>(b, kDim);
    if (ndim < 3 || ndim > 4) throw std::runtime_error(path.string() + ": expected a 3D or 4D image");
    const i64 w = rd<std::int16_t>(b, kDim + 2), h = rd<std::int16_t>(b, kDim + 4), d = rd<std::int16_t>(b, kDim + 6);
    const i64 c = ndim == 4 ? std::max<i64>(1, rd<std::int16_t>(b, kDim + 8)) : 1;
    const auto dtype = rd<std::int16_t>(b, kDatatype);
    const auto off = static_cast<std::size_t>(rd<float>(b, kVoxOffset));
    float slope = rd<float>(b, kSclSlope), inter = rd<float>(b, kSclInter);
    if (slope == 0.0f || !std::isfinite(slope)) {
        slope = 1.0f;
        inter = 0.0f;
    }

    NiftiImage img;
    img.spacing = {std::abs(rd<float>(b, kPixdim + 12)), std::abs(rd<float>(b, kPixdim + 8)),
                   std::abs(rd<float>(b, kPixdim + 4))};
    for (auto& s : img.spacing)
        if (s == 0.0) s = 1.0;
    img.voxels = Tensor<float>({c, d, h, w});
    const i64 n = img.voxels.numel();
    std::size_t esize = 0;
    switch (dtype) {
        case 2: esize = 1; break;
        case 4: esize = 2; break;
        case 8: esize = 4; break;
        case 16: esize = 4; break;
        case 64: esize = 8; break;
        default: throw std::runtime_error(path.string() + ": unsupported NIfTI datatype " + std::to_string(dtype));
    }
    if (b.size() < off + static_cast<std::size_t>(n) * esize)
        throw std::runtime_error(path.string() + ": truncated voxel data");
    for (i64 i = 0; i < n; ++i) {
        const std::size_t p = off + static_cast<std::size_t>(i) * esize;
        double v = 0;
        switch (dtype) {
            case 2: v = static_cast<unsigned char>(b[p]); break;
            case 4: v = rd<std::int16_t>(b, p); break;
            case 8: v = rd<std::int32_t>(b, p); break;
            case 16: v = rd<float>(b, p); break;
            case 64: v = rd<double>(b, p); break;
        }
        img.voxels[i] = static_cast<float>(v * slope + inter);
    }
    return img;
}

void write_nifti(const fs::path& path, const Tensor<float>& voxels, const std::array<double, 3>& spacing,
                 NiftiType type) {
    const auto e = voxels.extent();
    const i64 c = voxels.channels();
    std::int16_t dtype = 16, bitpix = 32;
    std::size_t esize = 4;
    switch (type) {
        case NiftiType::UInt8: dtype = 2; bitpix = 8; esize = 1; break;
        case NiftiType::Int16: dtype = 4; bitpix = 16; esize = 2; break;
        case NiftiType::Int32: dtype = 8; bitpix = 32; esize = 4; break;
        case NiftiType::Float32: break;
        case NiftiType::Float64: dtype = 64; bitpix = 64; esize = 8; break;
    }
    std::string b(352 + static_cast<std::size_t>(voxels.numel()) * esize, '\0');
    wr<std::int32_t>(b, kSizeofHdr, 348);
    wr<std::int16_t>(b, kDim, c > 1 ? 4 : 3);
    wr<std::int16_t>(b, kDim + 2, static_cast<std::int16_t>(e.w));
    wr<std::int16_t>(b, kDim + 4, static_cast<std::int16_t>(e.h));
    wr<std::int16_t>(b, kDim + 6, static_cast<std::int16_t>(e.d));
    wr<std::int16_t>(b, kDim + 8, static_cast<std::int16_t>(c));
    for (int i = 5; i < 8; ++i) wr<std::int16_t>(b, kDim + 2 * static_cast<std::size_t>(i), 1);
    wr<std::int16_t>(b, kDatatype, dtype);
    wr<std::int16_t>(b, kBitpix, bitpix);
    wr<float>(b, kPixdim, 1.0f);
    wr<float>(b, kPixdim + 4, static_cast<float>(spacing[2]));
    wr<float>(b, kPixdim + 8, static_cast<float>(spacing[1]));
    wr<float>(b, kPixdim + 12, static_cast<float>(spacing[0]));
    wr<float>(b, kVoxOffset, 352.0f);
    wr<float>(b, kSclSlope, 1.0f);
    std::memcpy(b.data() + kMagic, "n+1\0", 4);
    for (i64 i = 0; i < voxels.numel(); ++i) {
        const std::size_t p = 352 + static_cast<std::size_t>(i) * esize;
        const float v = voxels[i];
        switch (type) {
            case NiftiType::UInt8: b[p] = static_cast<char>(static_cast<unsigned char>(std::lround(v))); break;
            case NiftiType::Int16: wr<std::int16_t>(b, p, static_cast<std::int16_t>(std::lround(v))); break;
            case NiftiType::Int32: wr<std::int32_t>(b, p, static_cast<std::int32_t>(std::lround(v))); break;
            case NiftiType::Float32: wr<float>(b, p, v); break;
            case NiftiType::Float64: wr<double>(b, p, v); break;
        }
    }
    write_all(path, b);
}

// ---------------------------------------------------------------------------

MultimodalVolume load_volume(const fs::path& path) {
    MultimodalVolume v;
    if (is_nifti(path)) {
        auto img = read_nifti(path);
        v.voxels = std::move(img.voxels);
        v.spacing = img.spacing;
    } else {
        v.voxels = load_raw(path);
    }
    v.subject_id = path.stem().string();
    return v;
}

RegionMasks load_labels(const fs::path& path) {
    Tensor<float> raw = is_nifti(path) ? read_nifti(path).voxels : load_raw(path);
    if (raw.channels() != 1) throw std::runtime_error(path.string() + ": label file must have a single channel");
    Tensor<std::uint8_t> labels(raw.shape());
    for (i64 i = 0; i < raw.numel(); ++i) {
        const float v = raw[i];
        if (v != std::round(v) || v < 0 || v > 255)
            throw std::invalid_argument("unknown label value " + std::to_string(v) + " in " + path.string());
        labels[i] = static_cast<std::uint8_t>(v);
    }
    return masks_from_labels(labels);
}

void save_labels(const fs::path& path, const Tensor<std::uint8_t>& labels, const std::array<double, 3>& spacing) {
    auto f = labels.cast<float>();
    if (is_nifti(path))
        write_nifti(path, f, spacing, NiftiType::UInt8);
    else
        save_raw(path, f);
}

// ---------------------------------------------------------------------------

std::vector<std::string> Manifest::ids() const {
    std::vector<std::string> out;
    for (const auto& s : subjects) out.push_back(s.id);
    return out;
}

const SubjectRecord& Manifest::find(const std::string& id) const {
    for (const auto& s : subjects)
        if (s.id == id) return s;
    throw std::out_of_range("subject '" + id + "' not in manifest");
}

Manifest load_manifest(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open manifest " + path.string());
    const auto j = nlohmann::json::parse(is);
    Manifest m;
    m.root = path.parent_path();
    m.modalities = j.at("modalities").get<std::vector<std::string>>();
    for (const auto& s : j.at("subjects")) {
        SubjectRecord r;
        r.id = s.at("id").get<std::string>();
        for (const auto& name : m.modalities) {
            const auto& im = s.at("images");
            if (!im.contains(name) || im.at(name).is_null())
                r.images[name] = std::nullopt;
            else
                r.images[name] = fs::path(im.at(name).get<std::string>());
        }
        r.label = s.at("label").get<std::string>();
        m.subjects.push_back(std::move(r));
    }
    return m;
}

void save_manifest(const fs::path& path, const Manifest& m) {
    nlohmann::json j;
    j["version"] = 1;
    j["modalities"] = m.modalities;
    j["subjects"] = nlohmann::json::array();
    for (const auto& r : m.subjects) {
        nlohmann::json images = nlohmann::json::object();
        for (const auto& name : m.modalities) {
            auto it = r.images.find(name);
            images[name] = (it == r.images.end() || !it->second) ? nlohmann::json(nullptr)
                                                                 : nlohmann::json(it->second->generic_string());
        }
        j["subjects"].push_back({{"id", r.id}, {"images", images}, {"label", r.label.generic_string()}});
    }
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path);
    os << j.dump(2) << '\n';
}

Subject load_subject(const Manifest& m, const SubjectRecord& rec) {
    auto resolve = [&](const fs::path& p) { return p.is_absolute() ? p : m.root / p; };
    Subject s;
    s.masks = load_labels(resolve(rec.label));
    const auto e = s.masks.extent();
    const i64 nm = static_cast<i64>(m.modalities.size());
    s.volume.voxels = Tensor<float>({nm, e.d, e.h, e.w});
    s.volume.subject_id = rec.id;
    for (i64 c = 0; c < nm; ++c) {
        const auto& name = m.modalities[static_cast<std::size_t>(c)];
        auto it = rec.images.find(name);
        if (it == rec.images.end() || !it->second) continue;
        const auto v = load_volume(resolve(*it->second));
        if (v.voxels.channels() != 1 || v.extent() != e)
            throw std::runtime_error("subject " + rec.id + ": modality " + name + " has shape " +
                                     shape_str(v.voxels.shape()) + ", expected [1," + std::to_string(e.d) + "," +
                                     std::to_string(e.h) + "," + std::to_string(e.w) + "]");
        std::copy(v.voxels.data(), v.voxels.data() + e.voxels(), s.volume.voxels.channel(c));
        s.volume.spacing = v.spacing;
    }
    return s;
}

}  // namespace mmseg::data
