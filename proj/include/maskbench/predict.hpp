#pragma once

// Drives chained n-gram completion over masked instances. Single-sentinel
// levels complete the whole hidden span after the context prefix; the random
// level fills each indexed sentinel left to right, feeding every prediction
// back into the running context.

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "maskbench/masker.hpp"
#include "maskbench/metrics.hpp"
#include "maskbench/ngram.hpp"
#include "maskbench/parallel.hpp"

namespace maskbench::predict {

class MissingSentinel : public std::runtime_error {
public:
    explicit MissingSentinel(const std::string& instance_id)
        : std::runtime_error("instance " + instance_id + " has no mask sentinel") {}
};

// Model must expose complete(span<const string>, n) -> ngram::Completion.
template <class Model>
metrics::Prediction predict_instance(const Model& model, const mask::MaskedInstance& inst) {
    metrics::Prediction out;
    out.instance_id = inst.id;
    if (inst.meta.n_masked == 0) {
        out.score = 0.0;
        return out;
    }
    if (inst.level != mask::Level::random) {
        std::size_t at = inst.context.size();
        for (std::size_t i = 0; i < inst.context.size(); ++i)
            if (inst.context[i] == mask::kSentinel) {
                at = i;
                break;
            }
        if (at == inst.context.size()) throw MissingSentinel(inst.id);
        auto got = model.complete(std::span<const std::string>(inst.context.data(), at),
                                  inst.meta.n_masked);
        out.tokens = std::move(got.tokens);
        out.score = got.log_likelihood;
        return out;
    }
    // Random level: indexed sentinels, one hidden token each, in order.
    std::vector<std::string> running;
    running.reserve(inst.context.size());
    double score = 0.0;
    std::size_t next_index = 0;
    for (const auto& tok : inst.context) {
        if (tok == mask::indexed_sentinel(next_index)) {
            auto got = model.complete(
                std::span<const std::string>(running.data(), running.size()), 1);
            score += got.log_likelihood;
            out.tokens.push_back(got.tokens.front());
            running.push_back(got.tokens.front());
            ++next_index;
        } else {
            running.push_back(tok);
        }
    }
    if (next_index != inst.meta.n_masked) throw MissingSentinel(inst.id);
    out.score = score;
    return out;
}

template <class Model>
std::vector<metrics::Prediction> predict_dataset(const Model& model,
                                                 const mask::Dataset& dataset,
                                                 std::size_t threads = 1) {
    return par::parallel_map<metrics::Prediction>(
        dataset.instances.size(), threads,
        [&](std::size_t i) { return predict_instance(model, dataset.instances[i]); });
}

}  // namespace maskbench::predict
