#include "iirnn/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "iirnn/log.hpp"

namespace iirnn {

namespace {

std::uint64_t fnv1a64(const void* bytes, std::size_t n, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

std::uint64_t ItemVocabulary::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& name : names) {
        h = fnv1a64(name.data(), name.size(), h);
        const char sep = '\0';
        h = fnv1a64(&sep, 1, h);
    }
    return h;
}

std::vector<RawSession> split_into_sessions(const std::string& user,
                                            const std::vector<Interaction>& events,
                                            std::int64_t gap_limit) {
    std::vector<RawSession> sessions;
    std::int64_t prev_ts = 0;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        if (i > 0 && e.timestamp < prev_ts)
            throw IngestError("interactions for user '" + user + "' are not time-sorted");
        if (i == 0 || e.timestamp > prev_ts + gap_limit) {
            sessions.push_back(RawSession{{}, e.timestamp});
        }
        sessions.back().items.push_back(e.item);
        prev_ts = e.timestamp;
    }
    return sessions;
}

void collapse_repeats(RawSession& session) {
    auto& items = session.items;
    items.erase(std::unique(items.begin(), items.end()), items.end());
}

std::vector<RawSession> enforce_length(const RawSession& session, std::size_t max_len) {
    const std::size_t l = session.items.size();
    if (l >= 2 * max_len) return {};
    if (l <= max_len) return {session};
    RawSession head{{session.items.begin(), session.items.begin() + max_len},
                    session.start_time};
    RawSession tail{{session.items.begin() + max_len, session.items.end()},
                    session.start_time};
    return {std::move(head), std::move(tail)};
}

namespace {

std::size_t train_count(std::size_t sessions, double train_fraction) {
    const auto up = static_cast<std::size_t>(
        std::ceil(train_fraction * static_cast<double>(sessions) - 1e-9));
    return std::min(up, sessions - 1);
}

}  // namespace

Corpus filter_and_split(std::map<std::string, std::vector<RawSession>> users,
                        double train_fraction) {
    // drop short sessions, then small users
    for (auto& [user, sessions] : users) {
        std::vector<RawSession> kept;
        kept.reserve(sessions.size());
        for (auto& s : sessions)
            if (s.items.size() >= 2) kept.push_back(std::move(s));
        sessions = std::move(kept);
    }
    for (auto it = users.begin(); it != users.end();) {
        if (it->second.size() < 3)
            it = users.erase(it);
        else
            ++it;
    }
    if (users.empty())
        throw IngestError("corpus is empty after preprocessing filters");

    Corpus corpus;
    // vocabulary order: first appearance in user-sorted, time-sorted traversal
    // of training sessions (std::map keeps users sorted)
    std::vector<std::pair<const std::string*, std::size_t>> split_at;
    for (auto& [user, sessions] : users) {
        std::stable_sort(sessions.begin(), sessions.end(),
                         [](const RawSession& a, const RawSession& b) {
                             return a.start_time < b.start_time;
                         });
        const std::size_t n_train = train_count(sessions.size(), train_fraction);
        for (std::size_t i = 0; i < n_train; ++i)
            for (const auto& item : sessions[i].items) corpus.vocab.add(item);
        split_at.emplace_back(&user, n_train);
    }

    std::size_t ui = 0;
    for (auto& [user, sessions] : users) {
        const std::size_t n_train = split_at[ui++].second;
        UserHistory hist;
        hist.user = user;
        for (std::size_t i = 0; i < sessions.size(); ++i) {
            Session mapped;
            mapped.start_time = sessions[i].start_time;
            if (i < n_train) {
                for (const auto& item : sessions[i].items)
                    mapped.items.push_back(corpus.vocab.lookup(item));
                hist.train_sessions.push_back(std::move(mapped));
            } else {
                // unseen items are dropped from test sessions entirely
                for (const auto& item : sessions[i].items) {
                    const ItemId id = corpus.vocab.lookup(item);
                    if (id != 0) mapped.items.push_back(id);
                }
                // a session may collapse below the usable minimum
                if (mapped.items.size() >= 2) hist.test_sessions.push_back(std::move(mapped));
            }
        }
        corpus.users.push_back(std::move(hist));
    }
    return corpus;
}

Corpus hold_one_out_split(const Corpus& corpus) {
    Corpus out;
    out.vocab = corpus.vocab;
    for (const auto& user : corpus.users) {
        UserHistory hist;
        hist.user = user.user;
        std::vector<Session> all;
        all.reserve(user.train_sessions.size() + user.test_sessions.size());
        all.insert(all.end(), user.train_sessions.begin(), user.train_sessions.end());
        all.insert(all.end(), user.test_sessions.begin(), user.test_sessions.end());
        if (all.empty()) continue;
        hist.test_sessions.push_back(all.back());
        all.pop_back();
        hist.train_sessions = std::move(all);
        out.users.push_back(std::move(hist));
    }
    return out;
}

CorpusStats corpus_stats(const Corpus& corpus) {
    CorpusStats s;
    s.num_users = corpus.users.size();
    s.num_items = corpus.vocab.size();
    for (const auto& user : corpus.users) {
        for (const auto* sessions : {&user.train_sessions, &user.test_sessions}) {
            s.num_sessions += sessions->size();
            for (const auto& sess : *sessions) s.num_events += sess.items.size();
        }
    }
    if (s.num_users > 0)
        s.sessions_per_user = static_cast<double>(s.num_sessions) / s.num_users;
    if (s.num_sessions > 0)
        s.avg_session_length = static_cast<double>(s.num_events) / s.num_sessions;
    return s;
}

PreprocessResult preprocess(std::vector<Interaction> interactions,
                            const PreprocessConfig& cfg) {
    std::map<std::string, std::vector<Interaction>> by_user;
    for (auto& e : interactions) by_user[e.user].push_back(std::move(e));
    interactions.clear();

    std::map<std::string, std::vector<RawSession>> sessions;
    for (auto& [user, events] : by_user) {
        std::stable_sort(events.begin(), events.end(),
                         [](const Interaction& a, const Interaction& b) {
                             return a.timestamp < b.timestamp;
                         });
        std::vector<RawSession> user_sessions;
        for (auto& raw : split_into_sessions(user, events, cfg.gap)) {
            collapse_repeats(raw);
            for (auto& part : enforce_length(raw, cfg.max_len))
                if (part.items.size() >= 2) user_sessions.push_back(std::move(part));
        }
        if (!user_sessions.empty()) sessions.emplace(user, std::move(user_sessions));
    }
    for (auto it = sessions.begin(); it != sessions.end();) {
        if (it->second.size() < 3)
            it = sessions.erase(it);
        else
            ++it;
    }
    if (sessions.empty())
        throw IngestError("corpus is empty after preprocessing filters");

    PreprocessResult result;
    auto& stats = result.pre_split_stats;
    std::unordered_map<std::string, bool> distinct;
    stats.num_users = sessions.size();
    for (const auto& [user, user_sessions] : sessions) {
        stats.num_sessions += user_sessions.size();
        for (const auto& s : user_sessions) {
            stats.num_events += s.items.size();
            for (const auto& item : s.items) distinct[item] = true;
        }
    }
    stats.num_items = distinct.size();
    stats.sessions_per_user = static_cast<double>(stats.num_sessions) / stats.num_users;
    stats.avg_session_length = static_cast<double>(stats.num_events) / stats.num_sessions;

    result.corpus = filter_and_split(std::move(sessions), cfg.train_fraction);
    return result;
}

// ---- ingestion ----

InputFormat parse_input_format(const std::string& name) {
    if (name == "tsv") return InputFormat::CanonicalTsv;
    if (name == "reddit-csv") return InputFormat::RedditCsv;
    if (name == "lastfm-tsv") return InputFormat::LastfmTsv;
    throw ConfigError("unknown input format '" + name + "' (expected tsv, reddit-csv or lastfm-tsv)");
}

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

// civil date -> days since 1970-01-01 (proleptic Gregorian)
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                         static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

// Accepts raw epoch seconds, "YYYY-MM-DD HH:MM:SS" or "YYYY-MM-DDTHH:MM:SS[Z]".
std::int64_t parse_timestamp(const std::string& text, std::size_t line_no) {
    if (text.empty())
        throw IngestError("line " + std::to_string(line_no) + ": empty timestamp");
    bool digits = true;
    for (char c : text)
        if (!std::isdigit(static_cast<unsigned char>(c))) { digits = false; break; }
    if (digits) return std::stoll(text);

    int y, mo, d, h, mi, s;
    char sep;
    if (std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &s) == 7 &&
        (sep == ' ' || sep == 'T')) {
        if (mo < 1 || mo > 12 || d < 1 || d > 31 + 0 * is_leap(y))
            throw IngestError("line " + std::to_string(line_no) + ": bad date '" + text + "'");
        return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s;
    }
    throw IngestError("line " + std::to_string(line_no) + ": unparseable timestamp '" + text + "'");
}

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delim, start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r')
        fields.back().pop_back();
    return fields;
}

bool looks_like_timestamp(const std::string& text) {
    try {
        parse_timestamp(text, 0);
        return true;
    } catch (const IngestError&) {
        return false;
    }
}

}  // namespace

std::vector<Interaction> read_interactions(const std::string& path, InputFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open input file '" + path + "'");

    std::vector<Interaction> out;
    std::string line;
    std::size_t line_no = 0;
    const char delim = format == InputFormat::RedditCsv ? ',' : '\t';
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto fields = split_line(line, delim);
        Interaction e;
        switch (format) {
            case InputFormat::CanonicalTsv:
            case InputFormat::RedditCsv: {
                if (fields.size() != 3)
                    throw IngestError("line " + std::to_string(line_no) + ": expected 3 fields, got " +
                                      std::to_string(fields.size()));
                // tolerate a header row
                if (first && !looks_like_timestamp(fields[2])) { first = false; continue; }
                e.user = fields[0];
                e.item = fields[1];
                e.timestamp = parse_timestamp(fields[2], line_no);
                break;
            }
            case InputFormat::LastfmTsv: {
                if (fields.size() < 4)
                    throw IngestError("line " + std::to_string(line_no) + ": expected >= 4 fields, got " +
                                      std::to_string(fields.size()));
                e.user = fields[0];
                e.item = fields[2].empty() ? fields[3] : fields[2];  // artist id, else artist name
                e.timestamp = parse_timestamp(fields[1], line_no);
                break;
            }
        }
        first = false;
        if (e.user.empty() || e.item.empty())
            throw IngestError("line " + std::to_string(line_no) + ": empty user or item");
        if (e.timestamp < 0)
            throw IngestError("line " + std::to_string(line_no) + ": negative timestamp");
        out.push_back(std::move(e));
    }
    if (out.empty()) throw IngestError("no interactions found in '" + path + "'");
    return out;
}

// ---- corpus file ----

namespace {

void write_sessions(std::ofstream& out, const std::string& user,
                    const std::vector<Session>& sessions) {
    for (const auto& s : sessions) {
        out << user << '\t' << s.start_time << '\t';
        for (std::size_t i = 0; i < s.items.size(); ++i) {
            if (i) out << ',';
            out << s.items[i];
        }
        out << '\n';
    }
}

}  // namespace

void write_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (std::size_t id = 1; id < corpus.vocab.names.size(); ++id)
        out << "#VOCAB\t" << id << '\t' << corpus.vocab.names[id] << '\n';
    for (const auto& user : corpus.users) {
        write_sessions(out, user.user, user.train_sessions);
        out << "#TEST\n";
        write_sessions(out, user.user, user.test_sessions);
    }
    if (!out) throw IoError("failed writing corpus to '" + path + "'");
}

Corpus read_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus file '" + path + "'");

    Corpus corpus;
    std::string line;
    std::size_t line_no = 0;
    bool in_test = false;
    UserHistory* current = nullptr;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line == "#TEST") {
            in_test = true;
            continue;
        }
        auto fields = split_line(line, '\t');
        if (fields.size() == 3 && fields[0] == "#VOCAB") {
            const ItemId id = corpus.vocab.add(fields[2]);
            if (id != std::stoi(fields[1]))
                throw FormatError("corpus line " + std::to_string(line_no) +
                                  ": vocabulary ids must be dense and ascending");
            continue;
        }
        if (fields.size() != 3)
            throw FormatError("corpus line " + std::to_string(line_no) + ": expected 3 fields");
        if (!current || current->user != fields[0]) {
            corpus.users.push_back(UserHistory{fields[0], {}, {}});
            current = &corpus.users.back();
            in_test = false;
        }
        Session s;
        s.start_time = std::stoll(fields[1]);
        std::size_t start = 0;
        const std::string& ids = fields[2];
        while (start < ids.size()) {
            std::size_t pos = ids.find(',', start);
            if (pos == std::string::npos) pos = ids.size();
            const long id = std::stol(ids.substr(start, pos - start));
            if (id < 1 || static_cast<std::size_t>(id) > corpus.vocab.size())
                throw FormatError("corpus line " + std::to_string(line_no) + ": item id " +
                                  std::to_string(id) + " outside vocabulary");
            s.items.push_back(static_cast<ItemId>(id));
            start = pos + 1;
        }
        if (s.items.empty())
            throw FormatError("corpus line " + std::to_string(line_no) + ": empty session");
        (in_test ? current->test_sessions : current->train_sessions).push_back(std::move(s));
    }
    if (corpus.users.empty()) throw FormatError("corpus file '" + path + "' has no sessions");
    return corpus;
}

std::string format_stats(const CorpusStats& s) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "users            %llu\n"
                  "sessions         %llu\n"
                  "sessions/user    %.1f\n"
                  "avg session len  %.1f\n"
                  "items            %llu\n",
                  static_cast<unsigned long long>(s.num_users),
                  static_cast<unsigned long long>(s.num_sessions), s.sessions_per_user,
                  s.avg_session_length, static_cast<unsigned long long>(s.num_items));
    return buf;
}

}  // namespace iirnn
