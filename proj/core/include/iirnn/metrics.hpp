#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iirnn/corpus.hpp"
#include "iirnn/recommender.hpp"

namespace iirnn {

// 1 iff the target appears in the list.
double recall_at_k(const std::vector<ItemId>& recs, ItemId target);
// 1/rank when the target is at position rank, else 0.
double mrr_at_k(const std::vector<ItemId>& recs, ItemId target);

struct EvalOptions {
    std::vector<int> ks{5, 10, 20};
    std::vector<int> positions{1, 2, 3, 4, 5, 20};  // prediction steps <= n
    bool per_session_average = false;  // default: average per prediction
    unsigned threads = 0;
};

struct EvalCell {
    double recall = 0.0;
    double mrr = 0.0;
    std::uint64_t count = 0;
};

struct ModelReport {
    std::string model;
    std::vector<int> ks;
    std::vector<int> positions;
    // cells[ki][pi]: aggregated over prediction steps j <= positions[pi]
    std::vector<std::vector<EvalCell>> cells;
    std::vector<EvalCell> overall;  // per k, all steps
};

// Teacher-forced evaluation over every test session: for each step
// j = 1..l-1 the model sees items 1..j and is scored on item j+1. A single
// top-max(K) request per step feeds every K and position cell. Users run in
// parallel (clone per worker) and are reduced in user order.
ModelReport evaluate(const Recommender& model, const Corpus& corpus, const EvalOptions& opts);

// CSV: model,k,position,recall,mrr,count with an `all` row per k equal to
// the full-session aggregate; 6 decimals, LF endings.
void emit_report(const std::vector<ModelReport>& reports, const std::string& path);

// Companion cold-start curve: model,n,recall_at_5.
void emit_coldstart(const std::vector<ModelReport>& reports, const std::string& path);

std::string render_report_table(const ModelReport& report);

}  // namespace iirnn
