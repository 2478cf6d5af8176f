#include "kvtrim/kv_cache.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "kvtrim/fp16.hpp"

namespace kvtrim {

namespace {
constexpr char kMagic[4] = {'K', 'V', 'T', 'R'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t& off) {
    if (off + 2 > b.size()) throw std::runtime_error("snapshot truncated");
    std::uint16_t v = static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
    off += 2;
    return v;
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t& off) {
    if (off + 4 > b.size()) throw std::runtime_error("snapshot truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[off + i]) << (8 * i);
    off += 4;
    return v;
}

void put_matrix_f16(std::vector<std::uint8_t>& out, const Matrix& m) {
    for (double v : m.data()) {
        const std::uint16_t h = f64_to_f16(v);
        put_u16(out, h);
    }
}

Matrix get_matrix_f16(std::span<const std::uint8_t> b, std::size_t& off, std::size_t rows,
                      std::size_t cols) {
    std::vector<double> data(rows * cols);
    for (auto& v : data) {
        v = f16_to_f64(get_u16(b, off));
    }
    return Matrix(rows, cols, std::move(data));
}
}  // namespace

void CacheConfig::validate() const {
    if (seq_len == 0 || head_dim == 0 || layers == 0 || heads == 0 || batch == 0) {
        throw std::invalid_argument("cache geometry fields must be positive");
    }
    if (dtype_bits == 0 || dtype_bits % 8 != 0) {
        throw std::invalid_argument("dtype_bits must be a positive multiple of 8");
    }
    if (key_prune_ratio < 0.0 || key_prune_ratio >= 1.0 || value_prune_ratio < 0.0 ||
        value_prune_ratio >= 1.0) {
        throw std::invalid_argument("prune ratios must lie in [0, 1)");
    }
    if (kept_channels(key_prune_ratio, head_dim) < 1 ||
        kept_channels(value_prune_ratio, head_dim) < 1) {
        throw std::invalid_argument("pruning would keep fewer than one channel");
    }
    if (obs_window == 0 || obs_window > seq_len) {
        throw std::invalid_argument("obs_window must lie in [1, seq_len]");
    }
    if (residual_len == 0) {
        throw std::invalid_argument("residual_len must be at least 1");
    }
    if (kv_budget > seq_len) {
        throw std::invalid_argument("kv_budget cannot exceed seq_len");
    }
}

std::size_t kept_channels(double prune_ratio, std::size_t head_dim) {
    return static_cast<std::size_t>(
        std::floor((1.0 - prune_ratio) * static_cast<double>(head_dim)));
}

SegmentedCache::SegmentedCache(std::size_t dim)
    : dim_(dim), pruned_(0, 0), recent_(0, dim) {}

void SegmentedCache::append(std::span<const double> row) {
    if (row.size() != dim_) {
        throw std::invalid_argument("appended key row has length " + std::to_string(row.size()) +
                                    ", cache dim is " + std::to_string(dim_));
    }
    recent_.append_row(row);
}

void SegmentedCache::freeze_recent(const ChannelMask& mask) {
    freeze_recent(mask, nullptr);
}

void SegmentedCache::freeze_recent(const ChannelMask& mask,
                                   const std::function<Matrix(const Matrix&)>& transform) {
    if (mask.dim() != dim_) {
        throw std::invalid_argument("mask dim does not match cache dim");
    }
    if (mask_.has_value()) {
        if (!(*mask_ == mask)) {
            throw std::runtime_error("freeze mask conflicts with the stored channel mask");
        }
    } else {
        mask_ = mask;
    }
    const auto kept = mask.kept_indices();
    Matrix chunk = gather_cols(recent_, kept);
    if (transform) {
        Matrix transformed = transform(chunk);
        if (transformed.rows() != chunk.rows() || transformed.cols() != chunk.cols()) {
            throw std::runtime_error("freeze transform changed the chunk shape");
        }
        chunk = std::move(transformed);
    }
    if (pruned_.rows() == 0) {
        pruned_ = std::move(chunk);
    } else {
        if (pruned_.cols() != chunk.cols()) {
            throw std::runtime_error("pruned segment width changed between freezes");
        }
        for (std::size_t r = 0; r < chunk.rows(); ++r) {
            pruned_.append_row(chunk.row(r));
        }
    }
    recent_ = Matrix(0, dim_);
}

std::uint64_t SegmentedCache::head_bytes(std::uint32_t dtype_bits) const {
    const std::uint64_t elems =
        static_cast<std::uint64_t>(pruned_.rows()) * pruned_.cols() +
        static_cast<std::uint64_t>(recent_.rows()) * recent_.cols();
    std::uint64_t bytes = (elems * dtype_bits + 7) / 8;
    if (mask_.has_value() && !mask_->is_full()) {
        bytes += mask_->serialized_size();
    }
    return bytes;
}

std::uint64_t cache_bytes(const SegmentedCache& cache, const CacheConfig& cfg) {
    const std::uint64_t replicas =
        static_cast<std::uint64_t>(cfg.batch) * cfg.layers * cfg.heads;
    return replicas * cache.head_bytes(cfg.dtype_bits);
}

std::vector<std::uint8_t> serialize_cache(const SegmentedCache& cache, const CacheConfig& cfg) {
    const ChannelMask mask =
        cache.mask().has_value() ? *cache.mask() : ChannelMask::full(cache.dim());
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u16(out, kVersion);
    put_u32(out, cfg.batch);
    put_u32(out, cfg.seq_len);
    put_u32(out, cfg.layers);
    put_u32(out, cfg.heads);
    put_u32(out, static_cast<std::uint32_t>(cache.dim()));
    put_u32(out, static_cast<std::uint32_t>(mask.kept_count()));
    put_u32(out, static_cast<std::uint32_t>(cache.pruned().rows()));
    put_u32(out, static_cast<std::uint32_t>(cache.recent().rows()));
    out.insert(out.end(), mask.bytes().begin(), mask.bytes().end());
    put_matrix_f16(out, cache.pruned());
    put_matrix_f16(out, cache.recent());
    return out;
}

SegmentedCache deserialize_cache(std::span<const std::uint8_t> bytes, const CacheConfig& cfg,
                                 std::size_t& offset) {
    if (offset + 4 > bytes.size() || std::memcmp(bytes.data() + offset, kMagic, 4) != 0) {
        throw std::runtime_error("bad snapshot magic");
    }
    offset += 4;
    const std::uint16_t version = get_u16(bytes, offset);
    if (version != kVersion) {
        throw std::runtime_error("unsupported snapshot version " + std::to_string(version));
    }
    const std::uint32_t batch = get_u32(bytes, offset);
    const std::uint32_t seq_len = get_u32(bytes, offset);
    const std::uint32_t layers = get_u32(bytes, offset);
    const std::uint32_t heads = get_u32(bytes, offset);
    const std::uint32_t dim = get_u32(bytes, offset);
    const std::uint32_t kept = get_u32(bytes, offset);
    const std::uint32_t pruned_rows = get_u32(bytes, offset);
    const std::uint32_t recent_rows = get_u32(bytes, offset);
    if (batch != cfg.batch || seq_len != cfg.seq_len || layers != cfg.layers ||
        heads != cfg.heads || dim != cfg.head_dim) {
        throw std::runtime_error("snapshot geometry does not match the config");
    }

    const std::size_t mask_len = (dim + 7) / 8;
    if (offset + mask_len > bytes.size()) throw std::runtime_error("snapshot truncated");
    ChannelMask mask = ChannelMask::deserialize(dim, bytes.subspan(offset, mask_len));
    offset += mask_len;
    if (mask.kept_count() != kept) {
        throw std::runtime_error("snapshot mask popcount does not match header");
    }

    SegmentedCache cache(dim);
    Matrix pruned = get_matrix_f16(bytes, offset, pruned_rows, kept);
    Matrix recent = get_matrix_f16(bytes, offset, recent_rows, dim);

    // Rebuild through the public surface so segment invariants hold.
    if (pruned_rows > 0 || !mask.is_full()) {
        // Temporarily append the pruned rows scattered to full width, freeze
        // them with the mask, then append the recent rows.
        for (std::size_t r = 0; r < pruned.rows(); ++r) {
            std::vector<double> wide(dim, 0.0);
            const auto idx = mask.kept_indices();
            for (std::size_t j = 0; j < idx.size(); ++j) wide[idx[j]] = pruned.at(r, j);
            cache.append(wide);
        }
        cache.freeze_recent(mask);
    }
    for (std::size_t r = 0; r < recent.rows(); ++r) {
        cache.append(recent.row(r));
    }
    return cache;
}

}  // namespace kvtrim
