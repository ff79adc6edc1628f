#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "iirnn/error.hpp"

namespace iirnn {

// Item ids are dense integers 1..|N|; 0 is reserved for padding.
using ItemId = std::int32_t;

struct Interaction {
    std::string user;
    std::string item;
    std::int64_t timestamp = 0;  // seconds since epoch
};

// Session before vocabulary mapping. event_times parallels items when the
// session came out of segmentation; hand-built fixtures may leave it empty.
struct RawSession {
    std::vector<std::string> items;
    std::int64_t start_time = 0;
    std::vector<std::int64_t> event_times;
};

struct Session {
    std::vector<ItemId> items;
    std::int64_t start_time = 0;
};

struct UserHistory {
    std::string user;
    std::vector<Session> train_sessions;
    std::vector<Session> test_sessions;
};

struct ItemVocabulary {
    std::vector<std::string> names;  // names[0] = "" (padding slot)
    std::unordered_map<std::string, ItemId> ids;

    ItemVocabulary() : names(1) {}

    std::size_t size() const { return names.size() - 1; }  // |N|

    ItemId lookup(const std::string& item) const {
        auto it = ids.find(item);
        return it == ids.end() ? 0 : it->second;
    }

    ItemId add(const std::string& item) {
        auto it = ids.find(item);
        if (it != ids.end()) return it->second;
        const ItemId id = static_cast<ItemId>(names.size());
        names.push_back(item);
        ids.emplace(item, id);
        return id;
    }

    std::uint64_t hash() const;
};

struct Corpus {
    std::vector<UserHistory> users;
    ItemVocabulary vocab;
};

struct CorpusStats {
    std::uint64_t num_users = 0;
    std::uint64_t num_sessions = 0;
    std::uint64_t num_events = 0;
    std::uint64_t num_items = 0;
    double sessions_per_user = 0.0;
    double avg_session_length = 0.0;
};

// ---- pipeline stages ----

// Events must belong to one user and be time-sorted ascending; consecutive
// events with gap <= gap_limit share a session (a strictly greater gap
// starts a new one).
std::vector<RawSession> split_into_sessions(const std::string& user,
                                            const std::vector<Interaction>& events,
                                            std::int64_t gap_limit);

// Keeps the first instance of each run of consecutive equal items.
void collapse_repeats(RawSession& session);

// l <= L: kept; L < l < 2L: split into [first L | rest]; l >= 2L: dropped.
std::vector<RawSession> enforce_length(const RawSession& session, std::size_t max_len);

struct PreprocessConfig {
    std::int64_t gap = 3600;
    std::size_t max_len = 20;  // L
    double train_fraction = 0.8;
};

// Short sessions (l < 2) and users with < 3 sessions removed; per user the
// first min(ceil(train_fraction*c), c-1) sessions go to train; vocabulary is
// frozen on training items and test events with unseen items are dropped.
Corpus filter_and_split(std::map<std::string, std::vector<RawSession>> users,
                        double train_fraction);

// All sessions but the last -> train, last -> test (for the BPR-MF protocol).
Corpus hold_one_out_split(const Corpus& corpus);

CorpusStats corpus_stats(const Corpus& corpus);

struct PreprocessResult {
    Corpus corpus;
    // Measured after the session filters but before the train/test split and
    // vocabulary freeze, which is where dataset tables are usually quoted.
    CorpusStats pre_split_stats;
};

PreprocessResult preprocess(std::vector<Interaction> interactions,
                            const PreprocessConfig& cfg);

// ---- ingestion ----

enum class InputFormat { CanonicalTsv, RedditCsv, LastfmTsv };

InputFormat parse_input_format(const std::string& name);

// Canonical format: UTF-8 TSV of user<TAB>item<TAB>timestamp. The adapters
// map the public Reddit CSV (user,subreddit,timestamp) and the Last.fm TSV
// (user, ISO timestamp, artist id, artist name, ...) onto it; Last.fm uses
// the artist as the item.
std::vector<Interaction> read_interactions(const std::string& path, InputFormat format);

// ---- preprocessed corpus file ----
// A vocabulary block (#VOCAB<TAB>id<TAB>item) followed by per-user blocks of
// session lines user<TAB>start_time<TAB>id,id,...; a #TEST line separates the
// train from the test sessions inside each user block.
void write_corpus(const Corpus& corpus, const std::string& path);
Corpus read_corpus(const std::string& path);

std::string format_stats(const CorpusStats& stats);

}  // namespace iirnn
