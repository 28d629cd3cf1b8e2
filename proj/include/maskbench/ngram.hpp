#pragma once

// Interpolated n-gram language model over token streams, with greedy
// chained completion, per-origin cache blending and a portable binary
// model format.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "maskbench/parallel.hpp"

namespace maskbench::ngram {

inline constexpr std::string_view kBeginSentinel = "<s>";
inline constexpr std::size_t kMaxOrder = 15;

class EmptyTrainingData : public std::runtime_error {
public:
    EmptyTrainingData() : std::runtime_error("no tokens to train on") {}
};

class EmptyCacheCorpus : public std::runtime_error {
public:
    EmptyCacheCorpus() : std::runtime_error("cache corpus is empty") {}
};

class CorruptModelFile : public std::runtime_error {
public:
    explicit CorruptModelFile(const std::string& what) : std::runtime_error(what) {}
};

class VersionMismatch : public std::runtime_error {
public:
    explicit VersionMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct Completion {
    std::vector<std::string> tokens;
    double log_likelihood = 0.0;
};

namespace detail {

struct CtxKey {
    std::uint16_t len = 0;
    std::array<std::uint32_t, kMaxOrder - 1> ids{};

    bool operator==(const CtxKey& o) const {
        if (len != o.len) return false;
        for (std::uint16_t i = 0; i < len; ++i)
            if (ids[i] != o.ids[i]) return false;
        return true;
    }
    bool operator<(const CtxKey& o) const {
        if (len != o.len) return len < o.len;
        for (std::uint16_t i = 0; i < len; ++i)
            if (ids[i] != o.ids[i]) return ids[i] < o.ids[i];
        return false;
    }
};

struct CtxKeyHash {
    std::size_t operator()(const CtxKey& k) const {
        std::uint64_t h = 0xcbf29ce484222325ULL ^ k.len;
        for (std::uint16_t i = 0; i < k.len; ++i) {
            h ^= k.ids[i];
            h *= 0x100000001b3ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

inline std::uint32_t crc32(const unsigned char* data, std::size_t n) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = 0xffffffffu;
    for (std::size_t i = 0; i < n; ++i)
        c = table[(c ^ data[i]) & 0xffu] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

}  // namespace detail

class NGramModel {
public:
    // Counts all 1..order grams over the streams, with order-1 begin
    // sentinels of left padding per stream. lambdas holds one interpolation
    // weight per order (lowest first); empty means 0.5 everywhere.
    static NGramModel train(const std::vector<std::vector<std::string>>& streams,
                            std::size_t order, std::vector<double> lambdas = {},
                            std::size_t threads = 1) {
        if (order < 2 || order > kMaxOrder)
            throw std::invalid_argument("order must be in [2, " +
                                        std::to_string(kMaxOrder) + "]");
        if (lambdas.empty()) lambdas.assign(order, 0.5);
        if (lambdas.size() != order)
            throw std::invalid_argument("need one lambda per order");
        for (double l : lambdas)
            if (l < 0.0 || l > 1.0) throw std::invalid_argument("lambda outside [0, 1]");

        NGramModel m;
        m.order_ = order;
        m.lambdas_ = std::move(lambdas);
        m.id_to_token_.emplace_back(kBeginSentinel);
        m.token_to_id_.emplace(std::string(kBeginSentinel), 0);

        std::vector<std::vector<std::uint32_t>> id_streams;
        id_streams.reserve(streams.size());
        for (const auto& s : streams) {
            std::vector<std::uint32_t> ids;
            ids.reserve(s.size());
            for (const auto& tok : s) ids.push_back(m.intern(tok));
            id_streams.push_back(std::move(ids));
        }
        if (m.id_to_token_.size() <= 1) throw EmptyTrainingData();

        using CountMap =
            std::unordered_map<detail::CtxKey, std::unordered_map<std::uint32_t, std::uint64_t>,
                               detail::CtxKeyHash>;
        std::size_t n_threads = par::resolve_threads(threads);
        if (n_threads > id_streams.size()) n_threads = id_streams.size() ? id_streams.size() : 1;
        std::vector<CountMap> shards(n_threads);
        par::parallel_for(n_threads, n_threads, [&](std::size_t t) {
            CountMap& local = shards[t];
            for (std::size_t s = t; s < id_streams.size(); s += n_threads) {
                const auto& ids = id_streams[s];
                for (std::size_t j = 0; j < ids.size(); ++j) {
                    // ids[c] holds the token c+1 positions back from the
                    // target, begin sentinel when that underflows the stream.
                    detail::CtxKey key;
                    for (std::size_t k = 1; k <= order; ++k) {
                        key.len = static_cast<std::uint16_t>(k - 1);
                        if (k >= 2) key.ids[k - 2] = j >= k - 1 ? ids[j - (k - 1)] : 0;
                        local[key][ids[j]] += 1;
                    }
                }
            }
        });

        CountMap merged = std::move(shards[0]);
        for (std::size_t t = 1; t < shards.size(); ++t) {
            for (auto& [key, counts] : shards[t]) {
                auto& cell = merged[key];
                for (auto& [tid, c] : counts) cell[tid] += c;
            }
            shards[t].clear();
        }

        m.cells_.reserve(merged.size());
        for (auto& [key, counts] : merged) {
            Cell cell;
            cell.entries.reserve(counts.size());
            for (auto& [tid, c] : counts) {
                cell.entries.emplace_back(tid, c);
                cell.total += c;
            }
            std::sort(cell.entries.begin(), cell.entries.end());
            m.cells_.emplace(key, std::move(cell));
        }
        m.freeze();
        return m;
    }

    std::size_t order() const { return order_; }
    const std::vector<double>& lambdas() const { return lambdas_; }

    // Real tokens only; the begin sentinel is excluded.
    std::size_t vocab_size() const { return id_to_token_.size() - 1; }
    const std::vector<std::string>& token_table() const { return id_to_token_; }

    bool contains(const std::string& token) const {
        auto it = token_to_id_.find(token);
        return it != token_to_id_.end() && it->second != 0;
    }

    // Cells for the longest usable context suffix down to the unigram cell;
    // slot k-1 holds the order-k cell or nullptr when that context is unseen.
    struct Resolved {
        std::array<const void*, kMaxOrder> cells{};
        std::size_t levels = 0;
    };

    Resolved resolve(std::span<const std::string> context) const {
        Resolved r;
        std::size_t usable = std::min(context.size(), order_ - 1);
        r.levels = usable + 1;
        detail::CtxKey key;
        bool all_known = true;
        for (std::size_t k = 1; k <= usable + 1; ++k) {
            key.len = static_cast<std::uint16_t>(k - 1);
            if (k >= 2) {
                // Slot k-2 is the token k-1 positions back, matching training.
                const std::string& tok = context[context.size() - (k - 1)];
                auto it = token_to_id_.find(tok);
                if (it == token_to_id_.end()) all_known = false;
                else key.ids[k - 2] = it->second;
            }
            if (!all_known) {
                r.cells[k - 1] = nullptr;
                continue;
            }
            auto it = cells_.find(key);
            r.cells[k - 1] = it == cells_.end() ? nullptr : &it->second;
        }
        return r;
    }

    double prob_resolved(const Resolved& r, const std::string& token) const {
        auto it = token_to_id_.find(token);
        std::uint32_t tid = it == token_to_id_.end() ? 0 : it->second;
        return prob_id(r, tid);
    }

    // Interpolated probability of token following context. Unseen context
    // suffixes pass through to the next lower order; the base case is
    // uniform over the vocabulary.
    double prob(std::span<const std::string> context, const std::string& token) const {
        return prob_resolved(resolve(context), token);
    }

    // Greedy chained completion: n tokens, each the argmax continuation of
    // the context extended with what was already produced. Probability ties
    // go to the lexicographically smallest token. Contexts shorter than
    // order-1 are padded with begin sentinels.
    Completion complete(std::span<const std::string> context, std::size_t n) const {
        std::vector<std::string> ctx = padded_context(context);
        Completion out;
        out.tokens.reserve(n);
        for (std::size_t step = 0; step < n; ++step) {
            Resolved r = resolve(ctx);
            auto [tid, p] = argmax(r);
            out.tokens.push_back(id_to_token_[tid]);
            out.log_likelihood += safe_log(p);
            ctx.push_back(id_to_token_[tid]);
        }
        return out;
    }

    std::vector<std::string> padded_context(std::span<const std::string> context) const {
        std::vector<std::string> ctx;
        std::size_t want = order_ - 1;
        ctx.reserve(std::max(context.size(), want) + 8);
        for (std::size_t i = context.size(); i < want; ++i)
            ctx.emplace_back(kBeginSentinel);
        ctx.insert(ctx.end(), context.begin(), context.end());
        return ctx;
    }

    // (token id, probability) of the best continuation.
    std::pair<std::uint32_t, double> argmax(const Resolved& r) const {
        std::uint32_t best = 0;
        double best_p = -1.0;
        auto consider = [&](std::uint32_t tid) {
            double p = prob_id(r, tid);
            if (p > best_p ||
                (p == best_p && best != 0 && id_to_token_[tid] < id_to_token_[best])) {
                best = tid;
                best_p = p;
            }
        };
        if (lambdas_[0] <= 0.0) {
            // Degenerate config: unigram weight zero, every token can tie.
            for (std::uint32_t tid : unigram_by_count_) consider(tid);
            return {best, best_p};
        }
        std::vector<std::uint32_t> candidates;
        for (std::size_t k = 2; k <= r.levels; ++k) {
            const Cell* cell = static_cast<const Cell*>(r.cells[k - 1]);
            if (!cell) continue;
            for (const auto& [tid, c] : cell->entries)
                if (tid != 0) candidates.push_back(tid);
        }
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()),
                         candidates.end());
        for (std::uint32_t tid : candidates) consider(tid);
        // Tokens outside every matched cell differ only in their unigram
        // term, so the best of them is the first absentee in count order.
        for (std::uint32_t tid : unigram_by_count_) {
            if (std::binary_search(candidates.begin(), candidates.end(), tid)) continue;
            consider(tid);
            break;
        }
        return {best, best_p};
    }

    void save(const std::string& path) const {
        std::vector<unsigned char> buf;
        auto put_bytes = [&](const void* p, std::size_t n) {
            const auto* b = static_cast<const unsigned char*>(p);
            buf.insert(buf.end(), b, b + n);
        };
        auto put_u16 = [&](std::uint16_t v) {
            unsigned char b[2] = {static_cast<unsigned char>(v),
                                  static_cast<unsigned char>(v >> 8)};
            put_bytes(b, 2);
        };
        auto put_u32 = [&](std::uint32_t v) {
            unsigned char b[4];
            for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
            put_bytes(b, 4);
        };
        auto put_u64 = [&](std::uint64_t v) {
            unsigned char b[8];
            for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
            put_bytes(b, 8);
        };
        put_bytes("NGRM", 4);
        put_u16(kFormatVersion);
        put_u16(static_cast<std::uint16_t>(order_));
        put_u32(static_cast<std::uint32_t>(lambdas_.size()));
        for (double l : lambdas_) put_u64(std::bit_cast<std::uint64_t>(l));
        put_u32(static_cast<std::uint32_t>(id_to_token_.size()));
        for (const auto& t : id_to_token_) {
            put_u32(static_cast<std::uint32_t>(t.size()));
            put_bytes(t.data(), t.size());
        }
        std::vector<const detail::CtxKey*> keys;
        keys.reserve(cells_.size());
        for (const auto& [key, cell] : cells_) keys.push_back(&key);
        std::sort(keys.begin(), keys.end(),
                  [](const detail::CtxKey* a, const detail::CtxKey* b) { return *a < *b; });
        put_u64(keys.size());
        for (const auto* key : keys) {
            const Cell& cell = cells_.at(*key);
            put_u16(key->len);
            for (std::uint16_t i = 0; i < key->len; ++i) put_u32(key->ids[i]);
            put_u64(cell.total);
            put_u32(static_cast<std::uint32_t>(cell.entries.size()));
            for (const auto& [tid, c] : cell.entries) {
                put_u32(tid);
                put_u64(c);
            }
        }
        put_u32(detail::crc32(buf.data(), buf.size()));
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + path);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size()));
        if (!out) throw std::runtime_error("failed writing " + path);
    }

    static NGramModel load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw CorruptModelFile("cannot open " + path);
        std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                       std::istreambuf_iterator<char>());
        if (buf.size() < 8) throw CorruptModelFile("file too short");
        std::size_t pos = 0;
        auto need = [&](std::size_t n) {
            if (pos + n > buf.size()) throw CorruptModelFile("truncated model file");
        };
        auto get_u16 = [&]() -> std::uint16_t {
            need(2);
            std::uint16_t v = static_cast<std::uint16_t>(buf[pos] | (buf[pos + 1] << 8));
            pos += 2;
            return v;
        };
        auto get_u32 = [&]() -> std::uint32_t {
            need(4);
            std::uint32_t v = 0;
            for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + i]) << (8 * i);
            pos += 4;
            return v;
        };
        auto get_u64 = [&]() -> std::uint64_t {
            need(8);
            std::uint64_t v = 0;
            for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos + i]) << (8 * i);
            pos += 8;
            return v;
        };
        if (buf.size() < 4 || std::memcmp(buf.data(), "NGRM", 4) != 0)
            throw CorruptModelFile("bad magic");
        std::uint32_t stored_crc = 0;
        for (int i = 0; i < 4; ++i)
            stored_crc |= static_cast<std::uint32_t>(buf[buf.size() - 4 + i]) << (8 * i);
        if (detail::crc32(buf.data(), buf.size() - 4) != stored_crc)
            throw CorruptModelFile("checksum mismatch");
        pos = 4;
        std::uint16_t version = get_u16();
        if (version != kFormatVersion)
            throw VersionMismatch("model format version " + std::to_string(version) +
                                  ", expected " + std::to_string(kFormatVersion));
        NGramModel m;
        m.order_ = get_u16();
        if (m.order_ < 2 || m.order_ > kMaxOrder)
            throw CorruptModelFile("implausible order");
        std::uint32_t n_lambdas = get_u32();
        if (n_lambdas != m.order_) throw CorruptModelFile("lambda table size mismatch");
        for (std::uint32_t i = 0; i < n_lambdas; ++i)
            m.lambdas_.push_back(std::bit_cast<double>(get_u64()));
        std::uint32_t n_tokens = get_u32();
        m.id_to_token_.reserve(n_tokens);
        for (std::uint32_t i = 0; i < n_tokens; ++i) {
            std::uint32_t len = get_u32();
            need(len);
            m.id_to_token_.emplace_back(reinterpret_cast<const char*>(buf.data()) + pos, len);
            pos += len;
        }
        if (m.id_to_token_.empty() || m.id_to_token_[0] != kBeginSentinel)
            throw CorruptModelFile("token table missing begin sentinel");
        for (std::uint32_t i = 0; i < n_tokens; ++i)
            m.token_to_id_.emplace(m.id_to_token_[i], i);
        std::uint64_t n_cells = get_u64();
        m.cells_.reserve(static_cast<std::size_t>(n_cells));
        for (std::uint64_t c = 0; c < n_cells; ++c) {
            detail::CtxKey key;
            key.len = get_u16();
            if (key.len >= kMaxOrder) throw CorruptModelFile("context too long");
            for (std::uint16_t i = 0; i < key.len; ++i) {
                key.ids[i] = get_u32();
                if (key.ids[i] >= n_tokens) throw CorruptModelFile("token id out of range");
            }
            Cell cell;
            cell.total = get_u64();
            std::uint32_t n_entries = get_u32();
            cell.entries.reserve(n_entries);
            std::uint64_t check_total = 0;
            for (std::uint32_t e = 0; e < n_entries; ++e) {
                std::uint32_t tid = get_u32();
                std::uint64_t count = get_u64();
                if (tid >= n_tokens) throw CorruptModelFile("token id out of range");
                cell.entries.emplace_back(tid, count);
                check_total += count;
            }
            if (check_total != cell.total) throw CorruptModelFile("count total mismatch");
            m.cells_.emplace(key, std::move(cell));
        }
        if (pos != buf.size() - 4) throw CorruptModelFile("trailing bytes");
        m.freeze();
        return m;
    }

    // Counts in a readable form, contexts sorted; for the debug export.
    struct CountView {
        std::vector<std::string> context;
        std::uint64_t total = 0;
        std::vector<std::pair<std::string, std::uint64_t>> entries;
    };

    std::vector<CountView> export_counts() const {
        std::vector<const detail::CtxKey*> keys;
        keys.reserve(cells_.size());
        for (const auto& [key, cell] : cells_) keys.push_back(&key);
        std::sort(keys.begin(), keys.end(),
                  [](const detail::CtxKey* a, const detail::CtxKey* b) { return *a < *b; });
        std::vector<CountView> out;
        out.reserve(keys.size());
        for (const auto* key : keys) {
            const Cell& cell = cells_.at(*key);
            CountView v;
            for (std::uint16_t i = 0; i < key->len; ++i)
                v.context.push_back(id_to_token_[key->ids[i]]);
            std::reverse(v.context.begin(), v.context.end());
            v.total = cell.total;
            for (const auto& [tid, c] : cell.entries)
                v.entries.emplace_back(id_to_token_[tid], c);
            out.push_back(std::move(v));
        }
        return out;
    }

    static double safe_log(double p) {
        return std::log(std::max(p, std::numeric_limits<double>::min()));
    }

private:
    friend class CacheBlend;
    static constexpr std::uint16_t kFormatVersion = 1;

    struct Cell {
        std::vector<std::pair<std::uint32_t, std::uint64_t>> entries;  // sorted by id
        std::uint64_t total = 0;
    };

    std::uint32_t intern(const std::string& token) {
        auto [it, added] =
            token_to_id_.emplace(token, static_cast<std::uint32_t>(id_to_token_.size()));
        if (added) id_to_token_.push_back(token);
        return it->second;
    }

    double prob_id(const Resolved& r, std::uint32_t tid) const {
        double p = 1.0 / static_cast<double>(vocab_size());
        for (std::size_t k = 1; k <= r.levels; ++k) {
            const Cell* cell = static_cast<const Cell*>(r.cells[k - 1]);
            if (!cell) continue;
            double mle = 0.0;
            if (tid != 0) {
                auto it = std::lower_bound(
                    cell->entries.begin(), cell->entries.end(), tid,
                    [](const auto& e, std::uint32_t v) { return e.first < v; });
                if (it != cell->entries.end() && it->first == tid)
                    mle = static_cast<double>(it->second) / static_cast<double>(cell->total);
            }
            p = lambdas_[k - 1] * mle + (1.0 - lambdas_[k - 1]) * p;
        }
        return p;
    }

    void freeze() {
        detail::CtxKey empty;
        auto it = cells_.find(empty);
        unigram_ = it == cells_.end() ? nullptr : &it->second;
        unigram_by_count_.clear();
        if (!unigram_) return;
        for (const auto& [tid, c] : unigram_->entries)
            if (tid != 0) unigram_by_count_.push_back(tid);
        std::sort(unigram_by_count_.begin(), unigram_by_count_.end(),
                  [&](std::uint32_t a, std::uint32_t b) {
                      std::uint64_t ca = unigram_count(a), cb = unigram_count(b);
                      if (ca != cb) return ca > cb;
                      return id_to_token_[a] < id_to_token_[b];
                  });
    }

    std::uint64_t unigram_count(std::uint32_t tid) const {
        auto it = std::lower_bound(
            unigram_->entries.begin(), unigram_->entries.end(), tid,
            [](const auto& e, std::uint32_t v) { return e.first < v; });
        return it != unigram_->entries.end() && it->first == tid ? it->second : 0;
    }

    std::size_t order_ = 0;
    std::vector<double> lambdas_;
    std::vector<std::string> id_to_token_;  // [0] is the begin sentinel
    std::unordered_map<std::string, std::uint32_t> token_to_id_;
    std::unordered_map<detail::CtxKey, Cell, detail::CtxKeyHash> cells_;
    const Cell* unigram_ = nullptr;
    std::vector<std::uint32_t> unigram_by_count_;
};

// Two-component mixture of a per-origin cache model and the global model.
// Completion follows the same greedy protocol with ties broken the same way.
class CacheBlend {
public:
    CacheBlend(const NGramModel& global, NGramModel local, double mix)
        : global_(global), local_(std::move(local)), mix_(mix) {
        if (mix < 0.0 || mix > 1.0)
            throw std::invalid_argument("cache weight outside [0, 1]");
    }

    const NGramModel& local() const { return local_; }
    double mix() const { return mix_; }

    double prob(std::span<const std::string> context, const std::string& token) const {
        return mix_ * local_.prob(context, token) +
               (1.0 - mix_) * global_.prob(context, token);
    }

    Completion complete(std::span<const std::string> context, std::size_t n) const {
        std::vector<std::string> ctx = global_.padded_context(context);
        Completion out;
        out.tokens.reserve(n);
        for (std::size_t step = 0; step < n; ++step) {
            NGramModel::Resolved rg = global_.resolve(ctx);
            NGramModel::Resolved rl = local_.resolve(ctx);
            const std::string* best = nullptr;
            double best_p = -1.0;
            auto consider = [&](const std::string& tok) {
                double p = mix_ * local_.prob_resolved(rl, tok) +
                           (1.0 - mix_) * global_.prob_resolved(rg, tok);
                if (p > best_p || (p == best_p && best && tok < *best)) {
                    best = &tok;
                    best_p = p;
                }
            };
            const auto& gt = global_.token_table();
            for (std::size_t i = 1; i < gt.size(); ++i) consider(gt[i]);
            const auto& lt = local_.token_table();
            for (std::size_t i = 1; i < lt.size(); ++i)
                if (!global_.contains(lt[i])) consider(lt[i]);
            out.tokens.push_back(*best);
            out.log_likelihood += NGramModel::safe_log(best_p);
            ctx.push_back(*best);
        }
        return out;
    }

private:
    const NGramModel& global_;
    NGramModel local_;
    double mix_;
};

// Trains the per-origin cache model with the host model's configuration.
inline CacheBlend blend_cache(const NGramModel& global,
                              const std::vector<std::vector<std::string>>& cache_streams,
                              double lambda_cache, std::size_t threads = 1) {
    bool any = false;
    for (const auto& s : cache_streams)
        if (!s.empty()) any = true;
    if (!any) throw EmptyCacheCorpus();
    NGramModel local = NGramModel::train(cache_streams, global.order(),
                                         global.lambdas(), threads);
    return CacheBlend(global, std::move(local), lambda_cache);
}

}  // namespace maskbench::ngram
