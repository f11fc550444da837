#include "ontorag/evalkit.hpp"

#include "ontorag/errors.hpp"
#include "ontorag/tokenizer.hpp"

#include <algorithm>
#include <limits>

namespace ontorag {

namespace {

std::function<std::optional<std::string>(const json&)> exact_count(std::size_t n) {
    return [n](const json& reply) -> std::optional<std::string> {
        if (reply.size() != n) {
            return "expected exactly " + std::to_string(n) + " items, got " +
                   std::to_string(reply.size());
        }
        return std::nullopt;
    };
}

std::vector<std::string> strings_of(const json& reply) {
    std::vector<std::string> out;
    for (const auto& item : reply) out.push_back(trim(item.get<std::string>()));
    return out;
}

}  // namespace

std::vector<Question> generate_questions(Provider& provider, const TemplateStore& templates,
                                         const std::string& description, const QuestionPlan& plan) {
    if (trim(description).empty()) throw InvalidArgument("dataset description is empty");
    if (plan.personas == 0 || plan.tasks == 0 || plan.questions == 0) {
        throw InvalidArgument("question plan counts must be positive");
    }
    const auto personas = strings_of(complete_structured(
        provider, templates, "personas",
        {{"input", description}, {"description", description}, {"count", std::to_string(plan.personas)}},
        exact_count(plan.personas)));

    std::vector<Question> out;
    for (const auto& persona : personas) {
        const auto tasks = strings_of(complete_structured(
            provider, templates, "tasks",
            {{"input", persona}, {"description", description}, {"count", std::to_string(plan.tasks)}},
            exact_count(plan.tasks)));
        for (const auto& task : tasks) {
            const auto questions = strings_of(complete_structured(
                provider, templates, "questions",
                {{"input", persona},
                 {"persona", persona},
                 {"task", task},
                 {"description", description},
                 {"count", std::to_string(plan.questions)}},
                exact_count(plan.questions)));
            for (const auto& text : questions) {
                out.push_back({"q" + zero_pad(out.size(), 3), persona, task, text});
            }
        }
    }
    return out;
}

ClaimSet extract_claims(Provider& provider, const TemplateStore& templates,
                        const std::string& answer_id, const std::string& answer_text) {
    ClaimSet out{answer_id, {}};
    if (trim(answer_text).empty()) return out;
    const json reply = complete_structured(provider, templates, "extract_claims", {{"input", answer_text}});
    std::set<std::string> seen;
    for (auto& c : strings_of(reply)) {
        if (!c.empty() && seen.insert(c).second) out.claims.push_back(std::move(c));
    }
    return out;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l_distance(const std::string& a, const std::string& b) {
    const auto ta = token_strings(a, true, true);
    const auto tb = token_strings(b, true, true);
    if (ta.empty() && tb.empty()) return 0.0;
    if (ta.empty() || tb.empty()) return 1.0;
    const double lcs = static_cast<double>(lcs_length(ta, tb));
    if (lcs == 0.0) return 1.0;
    const double p = lcs / static_cast<double>(tb.size());
    const double r = lcs / static_cast<double>(ta.size());
    return 1.0 - 2.0 * p * r / (p + r);
}

ClusterSet cluster_by_distance(const std::vector<std::vector<double>>& distance,
                               std::span<const std::string> labels, double threshold) {
    if (threshold < 0.0 || threshold > 1.0) throw InvalidArgument("cluster threshold must be in [0, 1]");
    const std::size_t n = distance.size();
    if (labels.size() != n) throw InvalidArgument("labels and distance matrix differ in size");

    struct Cluster {
        std::vector<std::size_t> members;
        std::size_t smallest;  // index of the lexicographically smallest label
        bool alive = true;
    };
    std::vector<Cluster> clusters(n);
    // sum[i][j]: total pairwise distance between clusters i and j.
    std::vector<std::vector<double>> sum = distance;
    for (std::size_t i = 0; i < n; ++i) clusters[i] = {{i}, i, true};

    auto label_less = [&](std::size_t x, std::size_t y) {
        return labels[x] != labels[y] ? labels[x] < labels[y] : x < y;
    };
    auto key = [&](std::size_t i, std::size_t j) {
        std::size_t a = clusters[i].smallest, b = clusters[j].smallest;
        if (label_less(b, a)) std::swap(a, b);
        return std::pair{a, b};
    };
    auto key_less = [&](std::pair<std::size_t, std::size_t> p, std::pair<std::size_t, std::size_t> q) {
        if (p.first != q.first) return label_less(p.first, q.first);
        return label_less(p.second, q.second);
    };

    for (;;) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = n, bj = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (!clusters[i].alive) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!clusters[j].alive) continue;
                const double avg = sum[i][j] / static_cast<double>(clusters[i].members.size() *
                                                                   clusters[j].members.size());
                if (avg < best || (avg == best && key_less(key(i, j), key(bi, bj)))) {
                    best = avg;
                    bi = i;
                    bj = j;
                }
            }
        }
        if (bi == n || best > threshold) break;
        Cluster& into = clusters[bi];
        Cluster& from = clusters[bj];
        into.members.insert(into.members.end(), from.members.begin(), from.members.end());
        if (label_less(from.smallest, into.smallest)) into.smallest = from.smallest;
        from.alive = false;
        for (std::size_t k = 0; k < n; ++k) {
            sum[bi][k] += sum[bj][k];
            sum[k][bi] = sum[bi][k];
        }
    }

    ClusterSet out;
    out.threshold = threshold;
    for (auto& c : clusters) {
        if (!c.alive) continue;
        std::sort(c.members.begin(), c.members.end());
        out.clusters.push_back(std::move(c.members));
    }
    std::sort(out.clusters.begin(), out.clusters.end());
    return out;
}

ClusterSet cluster_claims(std::span<const std::string> claims, double threshold) {
    const std::size_t n = claims.size();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            d[i][j] = d[j][i] = rouge_l_distance(claims[i], claims[j]);
        }
    }
    return cluster_by_distance(d, claims, threshold);
}

std::string to_string(Metric m) {
    switch (m) {
        case Metric::comprehensiveness: return "comprehensiveness";
        case Metric::diversity: return "diversity";
        case Metric::empowerment: return "empowerment";
        case Metric::directness: return "directness";
    }
    return "comprehensiveness";
}

Metric metric_from_string(const std::string& s) {
    for (Metric m : all_metrics()) {
        if (to_string(m) == s) return m;
    }
    throw InvalidArgument("unknown metric '" + s + "'");
}

std::vector<Metric> all_metrics() {
    return {Metric::comprehensiveness, Metric::diversity, Metric::empowerment, Metric::directness};
}

std::string to_string(Winner w) {
    switch (w) {
        case Winner::a: return "A";
        case Winner::b: return "B";
        case Winner::tie: return "tie";
    }
    return "tie";
}

Winner winner_from_string(const std::string& s) {
    if (s == "A") return Winner::a;
    if (s == "B") return Winner::b;
    if (s == "tie") return Winner::tie;
    throw InvalidArgument("unknown verdict '" + s + "'");
}

std::vector<JudgeVerdict> judge_pairwise(Provider& provider, const TemplateStore& templates,
                                         const JudgeRequest& request, Metric metric,
                                         std::size_t replicates, std::uint64_t seed) {
    if (trim(request.answer_a).empty() || trim(request.answer_b).empty()) {
        throw InvalidArgument("both answers must be non-empty");
    }
    std::vector<JudgeVerdict> out;
    for (std::size_t r = 0; r < replicates; ++r) {
        Rng rng(hash_combine(seed, request.question_id + '\n' + request.condition_a + '\n' +
                                       request.condition_b + '\n' + to_string(metric) + '\n' +
                                       std::to_string(r)));
        JudgeVerdict v;
        v.question_id = request.question_id;
        v.condition_a = request.condition_a;
        v.condition_b = request.condition_b;
        v.metric = metric;
        v.replicate = r;
        v.swapped = rng.below(2) == 1;
        const std::string& first = v.swapped ? request.answer_b : request.answer_a;
        const std::string& second = v.swapped ? request.answer_a : request.answer_b;
        try {
            const json reply = complete_structured(provider, templates, "judge_" + to_string(metric),
                                                   {{"input", request.question},
                                                    {"answer_1", first},
                                                    {"answer_2", second},
                                                    {"replicate", std::to_string(r + 1)}});
            const std::string w = reply.at("winner").get<std::string>();
            if (w == "tie") {
                v.winner = Winner::tie;
            } else if ((w == "1") != v.swapped) {
                v.winner = Winner::a;
            } else {
                v.winner = Winner::b;
            }
        } catch (const FormatError& e) {
            v.winner = Winner::tie;
            v.warning = std::string("unparseable verdict recorded as tie: ") + e.what();
        }
        out.push_back(std::move(v));
    }
    return out;
}

WinRateTable win_rates(std::span<const JudgeVerdict> verdicts) {
    // Points for the lexicographically first condition of each pair, and comparison count.
    std::map<std::tuple<std::string, std::string, Metric>, std::pair<double, std::size_t>> tally;
    for (const auto& v : verdicts) {
        const bool flip = v.condition_b < v.condition_a;
        const std::string& x = flip ? v.condition_b : v.condition_a;
        const std::string& y = flip ? v.condition_a : v.condition_b;
        double points = 0.5;
        if (v.winner == Winner::a) points = flip ? 0.0 : 1.0;
        if (v.winner == Winner::b) points = flip ? 1.0 : 0.0;
        auto& t = tally[{x, y, v.metric}];
        t.first += points;
        t.second += 1;
    }
    WinRateTable out;
    for (const auto& [key, t] : tally) {
        const auto& [x, y, metric] = key;
        const double rate = 100.0 * t.first / static_cast<double>(t.second);
        out[{x, y, metric}] = rate;
        out[{y, x, metric}] = 100.0 - rate;
    }
    return out;
}

json to_json(const Question& q) {
    return json{{"id", q.id}, {"persona", q.persona}, {"task", q.task}, {"text", q.text}};
}

Question question_from_json(const json& j) {
    Question q;
    q.id = j.at("id").get<std::string>();
    q.persona = j.value("persona", std::string());
    q.task = j.value("task", std::string());
    q.text = j.at("text").get<std::string>();
    if (trim(q.text).empty()) throw ValidationError("question " + q.id + " has empty text");
    return q;
}

json to_json(const JudgeVerdict& v) {
    json j{{"question_id", v.question_id},
           {"condition_a", v.condition_a},
           {"condition_b", v.condition_b},
           {"metric", to_string(v.metric)},
           {"replicate", v.replicate},
           {"winner", to_string(v.winner)},
           {"swapped", v.swapped}};
    if (!v.warning.empty()) j["warning"] = v.warning;
    return j;
}

JudgeVerdict verdict_from_json(const json& j) {
    JudgeVerdict v;
    v.question_id = j.at("question_id").get<std::string>();
    v.condition_a = j.at("condition_a").get<std::string>();
    v.condition_b = j.at("condition_b").get<std::string>();
    v.metric = metric_from_string(j.at("metric").get<std::string>());
    v.replicate = j.at("replicate").get<std::size_t>();
    v.winner = winner_from_string(j.at("winner").get<std::string>());
    v.swapped = j.value("swapped", false);
    v.warning = j.value("warning", std::string());
    return v;
}

json to_json(const WinRateTable& table) {
    json out = json::array();
    for (const auto& [key, rate] : table) {
        const auto& [x, y, metric] = key;
        out.push_back({{"condition", x}, {"opponent", y}, {"metric", to_string(metric)}, {"win_rate", rate}});
    }
    return out;
}

}  // namespace ontorag
