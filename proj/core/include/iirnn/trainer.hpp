#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iirnn/corpus.hpp"
#include "iirnn/nets.hpp"
#include "iirnn/optim.hpp"
#include "iirnn/rand.hpp"

namespace iirnn {

// Flat key=value configuration; every key has a CLI flag of the same name.
struct TrainConfig {
    std::string variant = "intra";   // intra | ii-ap | ii-lhs
    int d = 50;                      // embedding width
    int h = 100;                     // hidden width
    int g = 15;                      // recent session representations
    float lr = 0.001f;
    float keep_prob = 1.0f;
    int batch_size = 15;
    int max_epochs = 20;
    std::uint64_t seed = 42;
    int L = 20;                      // maximum session length
    std::vector<int> ks{5, 10, 20};
    std::vector<int> positions{1, 2, 3, 4, 5, 20};
    std::string corpus;              // preprocessed corpus path
    std::string out;                 // checkpoint path
    float clip_norm = 0.0f;          // 0 = off
    double val_fraction = 0.05;      // held-out tail of each user's training sessions

    void validate() const;
    std::string serialize() const;
    static TrainConfig parse(const std::string& text);
    static TrainConfig load(const std::string& path);
};

std::string join_ints(const std::vector<int>& v);
std::vector<int> split_ints(const std::string& csv);

// ---- mini-batch plan ----

struct BatchEntry {
    int user = 0;
    int session = 0;  // index into the user's training sessions
};
using MiniBatch = std::vector<BatchEntry>;
using BatchPlan = std::vector<MiniBatch>;

// Users are dealt to batch slots in seeded-shuffle order; each slot consumes
// its user's sessions oldest to newest and is refilled with the next user
// when exhausted. Every mini-batch holds at most one session per user.
BatchPlan make_batch_plan(const std::vector<int>& sessions_per_user, int batch_size, Rng& rng);

// ---- checkpoint ----

struct Checkpoint {
    TrainConfig config;
    std::uint64_t vocab_hash = 0;
    int epoch = 0;
    std::uint64_t adam_t = 0;
    ModelParams params;
    std::vector<DenseArray> adam_m, adam_v;  // parallel to named_arrays(params)
};

// Binary format: magic IIRNN1, length-prefixed config text, array count,
// then per array a length-prefixed name, rank, u64 dims and f32 data (all
// little-endian), closed by a 64-bit FNV-1a checksum of the preceding bytes.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
void verify_checkpoint_vocab(const Checkpoint& ckpt, const ItemVocabulary& vocab);

// ---- training ----

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<std::string> log_lines;  // one per epoch
    int best_epoch = 0;
    bool aborted = false;
    std::string abort_reason;
};

TrainResult train(const TrainConfig& cfg, const Corpus& corpus);

}  // namespace iirnn
