#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iirnn/corpus.hpp"

namespace iirnn {

// Seeded synthetic interaction log with controllable inter-session structure.
// Each user gets a private item permutation pi. The first item of session
// k+1 is pi(last item of session k) with probability chain_strength, else a
// fresh draw; within a session the next item stays in the pi-neighborhood
// (distance <= 2) of the previous item with probability coherence, else it
// is a fresh draw. Neither branch repeats the previous item, so the corpus
// pipeline keeps every generated session intact.
struct SynthSpec {
    int num_users = 200;
    int sessions_per_user = 20;
    int min_session_len = 4;
    int max_session_len = 16;
    int num_items = 50;
    double chain_strength = 0.9;  // rho
    double coherence = 0.7;       // kappa
    double zipf_exponent = 0.0;   // 0 = uniform fresh draws
    std::uint64_t seed = 1;
    std::int64_t within_gap = 10;     // seconds between events in a session
    std::int64_t between_gap = 7200;  // seconds between sessions (> corpus gap)

    void validate() const;
};

std::vector<Interaction> generate(const SynthSpec& spec);

// Canonical ingestion TSV: user<TAB>item<TAB>timestamp.
void write_interactions_tsv(const std::vector<Interaction>& interactions,
                            const std::string& path);

}  // namespace iirnn
