#include "iirnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "iirnn/error.hpp"
#include "iirnn/parallel.hpp"

namespace iirnn {

double recall_at_k(const std::vector<ItemId>& recs, ItemId target) {
    return std::find(recs.begin(), recs.end(), target) != recs.end() ? 1.0 : 0.0;
}

double mrr_at_k(const std::vector<ItemId>& recs, ItemId target) {
    for (std::size_t i = 0; i < recs.size(); ++i)
        if (recs[i] == target) return 1.0 / static_cast<double>(i + 1);
    return 0.0;
}

namespace {

struct CellSum {
    double recall = 0.0;
    double mrr = 0.0;
    std::uint64_t count = 0;

    void add(const CellSum& o) {
        recall += o.recall;
        mrr += o.mrr;
        count += o.count;
    }
};

// per-user partial sums: [ki][pi] cells plus per-k overall
struct UserAccum {
    std::vector<std::vector<CellSum>> cells;
    std::vector<CellSum> overall;

    UserAccum(std::size_t nk, std::size_t np)
        : cells(nk, std::vector<CellSum>(np)), overall(nk) {}
};

EvalCell finish(const CellSum& s) {
    EvalCell c;
    c.count = s.count;
    if (s.count > 0) {
        c.recall = s.recall / static_cast<double>(s.count);
        c.mrr = s.mrr / static_cast<double>(s.count);
    }
    return c;
}

}  // namespace

ModelReport evaluate(const Recommender& model, const Corpus& corpus, const EvalOptions& opts) {
    if (opts.ks.empty()) throw ConfigError("evaluate: at least one K is required");
    const std::size_t nk = opts.ks.size(), np = opts.positions.size();
    std::size_t kmax = 0;
    for (int k : opts.ks) {
        if (k < 1) throw ConfigError("evaluate: K must be >= 1");
        kmax = std::max(kmax, static_cast<std::size_t>(k));
    }

    std::vector<UserAccum> per_user(corpus.users.size(), UserAccum(nk, np));

    parallel_for(corpus.users.size(), opts.threads, [&](std::size_t u) {
        const UserHistory& user = corpus.users[u];
        if (user.test_sessions.empty()) return;
        auto worker = model.clone();
        worker->begin_user(u, user);
        UserAccum& acc = per_user[u];

        // per-session (step, k) results, folded into cells at session end
        std::vector<std::vector<std::pair<double, double>>> steps;
        for (const auto& session : user.test_sessions) {
            const auto& items = session.items;
            if (items.size() < 2) continue;
            worker->begin_session(session);
            steps.assign(items.size() - 1, {});
            for (std::size_t j = 1; j < items.size(); ++j) {
                worker->observe(items[j - 1]);
                const auto recs = worker->recommend(kmax);
                const ItemId target = items[j];
                double step_mrr = 0.0;
                for (std::size_t i = 0; i < recs.size(); ++i)
                    if (recs[i] == target) { step_mrr = 1.0 / static_cast<double>(i + 1); break; }
                auto& row = steps[j - 1];
                row.resize(nk);
                for (std::size_t ki = 0; ki < nk; ++ki) {
                    const std::size_t k = static_cast<std::size_t>(opts.ks[ki]);
                    const double rank_limit = step_mrr > 0.0 ? 1.0 / step_mrr : 0.0;
                    const bool hit = step_mrr > 0.0 && rank_limit <= static_cast<double>(k);
                    row[ki] = {hit ? 1.0 : 0.0, hit ? step_mrr : 0.0};
                }
            }
            worker->observe(items.back());
            worker->end_session();

            const std::size_t nsteps = items.size() - 1;
            for (std::size_t ki = 0; ki < nk; ++ki) {
                double run_recall = 0.0, run_mrr = 0.0;
                std::vector<double> pre_recall(nsteps), pre_mrr(nsteps);
                for (std::size_t j = 0; j < nsteps; ++j) {
                    run_recall += steps[j][ki].first;
                    run_mrr += steps[j][ki].second;
                    pre_recall[j] = run_recall;
                    pre_mrr[j] = run_mrr;
                }
                for (std::size_t pi = 0; pi < np; ++pi) {
                    const std::size_t n = static_cast<std::size_t>(opts.positions[pi]);
                    if (n < 1) continue;
                    const std::size_t upto = std::min(n, nsteps);
                    CellSum& cell = acc.cells[ki][pi];
                    if (opts.per_session_average) {
                        cell.recall += pre_recall[upto - 1] / static_cast<double>(upto);
                        cell.mrr += pre_mrr[upto - 1] / static_cast<double>(upto);
                        cell.count += 1;
                    } else {
                        cell.recall += pre_recall[upto - 1];
                        cell.mrr += pre_mrr[upto - 1];
                        cell.count += upto;
                    }
                }
                CellSum& all = acc.overall[ki];
                if (opts.per_session_average) {
                    all.recall += pre_recall[nsteps - 1] / static_cast<double>(nsteps);
                    all.mrr += pre_mrr[nsteps - 1] / static_cast<double>(nsteps);
                    all.count += 1;
                } else {
                    all.recall += pre_recall[nsteps - 1];
                    all.mrr += pre_mrr[nsteps - 1];
                    all.count += nsteps;
                }
            }
        }
    });

    UserAccum total(nk, np);
    for (const auto& acc : per_user) {
        for (std::size_t ki = 0; ki < nk; ++ki) {
            total.overall[ki].add(acc.overall[ki]);
            for (std::size_t pi = 0; pi < np; ++pi)
                total.cells[ki][pi].add(acc.cells[ki][pi]);
        }
    }

    ModelReport report;
    report.model = model.name();
    report.ks = opts.ks;
    report.positions = opts.positions;
    report.cells.assign(nk, std::vector<EvalCell>(np));
    report.overall.assign(nk, EvalCell{});
    for (std::size_t ki = 0; ki < nk; ++ki) {
        report.overall[ki] = finish(total.overall[ki]);
        for (std::size_t pi = 0; pi < np; ++pi)
            report.cells[ki][pi] = finish(total.cells[ki][pi]);
    }

    // sanity: 0 <= mrr <= recall <= 1 on every cell
    auto check = [](const EvalCell& c) {
        if (c.mrr < -1e-12 || c.mrr > c.recall + 1e-12 || c.recall > 1.0 + 1e-12)
            throw TrainingError("evaluate: metric invariant violated");
    };
    for (std::size_t ki = 0; ki < nk; ++ki) {
        check(report.overall[ki]);
        for (std::size_t pi = 0; pi < np; ++pi) check(report.cells[ki][pi]);
    }
    return report;
}

namespace {

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

void emit_report(const std::vector<ModelReport>& reports, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open report file '" + path + "' for writing");
    out << "model,k,position,recall,mrr,count\n";
    for (const auto& r : reports) {
        for (std::size_t ki = 0; ki < r.ks.size(); ++ki) {
            for (std::size_t pi = 0; pi < r.positions.size(); ++pi) {
                const auto& c = r.cells[ki][pi];
                out << r.model << ',' << r.ks[ki] << ',' << r.positions[pi] << ','
                    << fmt6(c.recall) << ',' << fmt6(c.mrr) << ',' << c.count << '\n';
            }
            const auto& c = r.overall[ki];
            out << r.model << ',' << r.ks[ki] << ",all," << fmt6(c.recall) << ','
                << fmt6(c.mrr) << ',' << c.count << '\n';
        }
    }
    if (!out) throw IoError("failed writing report to '" + path + "'");
}

void emit_coldstart(const std::vector<ModelReport>& reports, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open coldstart file '" + path + "' for writing");
    out << "model,n,recall_at_5\n";
    for (const auto& r : reports) {
        auto k5 = std::find(r.ks.begin(), r.ks.end(), 5);
        if (k5 == r.ks.end())
            throw ConfigError("coldstart output requires K=5 in the evaluated K list");
        const std::size_t ki = static_cast<std::size_t>(k5 - r.ks.begin());
        for (std::size_t pi = 0; pi < r.positions.size(); ++pi)
            out << r.model << ',' << r.positions[pi] << ','
                << fmt6(r.cells[ki][pi].recall) << '\n';
    }
    if (!out) throw IoError("failed writing coldstart curve to '" + path + "'");
}

std::string render_report_table(const ModelReport& r) {
    std::ostringstream out;
    out << r.model << "\n";
    char buf[160];
    for (std::size_t ki = 0; ki < r.ks.size(); ++ki) {
        std::snprintf(buf, sizeof(buf), "  K=%-3d recall %.4f  mrr %.4f  (%llu predictions)\n",
                      r.ks[ki], r.overall[ki].recall, r.overall[ki].mrr,
                      static_cast<unsigned long long>(r.overall[ki].count));
        out << buf;
    }
    return out.str();
}

}  // namespace iirnn
