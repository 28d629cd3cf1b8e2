// Compilation smoke: every public header in one translation unit, plus a
// minimal end-to-end exercise of the core types.

#include <catch2/catch_amalgamated.hpp>

#include "maskbench/confidence.hpp"
#include "maskbench/corpus.hpp"
#include "maskbench/jsonl.hpp"
#include "maskbench/lexer.hpp"
#include "maskbench/masker.hpp"
#include "maskbench/metrics.hpp"
#include "maskbench/ngram.hpp"
#include "maskbench/parallel.hpp"
#include "maskbench/predict.hpp"
#include "maskbench/rng.hpp"
#include "maskbench/stats.hpp"

#include "support/fixture.hpp"
#include "support/oracles.hpp"

using namespace maskbench;

TEST_CASE("headers compose into a minimal pipeline") {
    fixture::CorpusOptions opt;
    opt.n_methods = 20;
    auto methods = fixture::analyzed_corpus(opt);
    REQUIRE(methods.size() == 20);

    auto split = corpus::split(methods, {0.8, 0.1, 0.1}, 7);
    auto datasets = mask::assemble(methods, mask::Level::token, split, {}, "smoke");
    std::size_t total = 0;
    for (const auto& ds : datasets) total += ds.instances.size();
    REQUIRE(total > 0);

    std::vector<std::vector<std::string>> streams;
    for (const auto& m : methods) {
        std::vector<std::string> s;
        for (const auto& t : m.tokens) s.push_back(t.text);
        streams.push_back(std::move(s));
    }
    auto model = ngram::NGramModel::train(streams, 3);
    auto predictions = predict::predict_dataset(model, datasets[2]);
    auto report = metrics::evaluate(datasets[2], predictions);
    REQUIRE(report.rows.size() == datasets[2].instances.size());
}
