#pragma once

#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "ontorag/providers.hpp"
#include "ontorag/templates.hpp"

namespace ontorag {

struct Question {
    std::string id;
    std::string persona;
    std::string task;
    std::string text;
};

struct QuestionPlan {
    std::size_t personas = 5;
    std::size_t tasks = 5;
    std::size_t questions = 5;
};

/// personas -> tasks per persona -> questions per (persona, task); ids "q000", "q001", ...
std::vector<Question> generate_questions(Provider& provider, const TemplateStore& templates,
                                         const std::string& description, const QuestionPlan& plan);

struct ClaimSet {
    std::string answer_id;
    std::vector<std::string> claims;
};

/// Claims in reply order, exact duplicates removed. An empty answer makes no provider call.
ClaimSet extract_claims(Provider& provider, const TemplateStore& templates,
                        const std::string& answer_id, const std::string& answer_text);

/// Length of the longest common subsequence of two token sequences.
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// 1 - F(LCS) over lowercased, punctuation-free tokens. 0 when both are empty,
/// 1 when exactly one is.
double rouge_l_distance(const std::string& a, const std::string& b);

struct ClusterSet {
    /// Claim indices per cluster, each ascending; clusters ordered by smallest index.
    std::vector<std::vector<std::size_t>> clusters;
    double threshold = 0.5;
};

/// Average-linkage agglomerative clustering on ROUGE-L distance. Merges the closest pair
/// while its average distance is <= threshold; equal distances go to the pair whose
/// smallest claims are lexicographically smallest.
ClusterSet cluster_claims(std::span<const std::string> claims, double threshold = 0.5);

/// Same procedure on a precomputed symmetric distance matrix; `labels` order ties.
ClusterSet cluster_by_distance(const std::vector<std::vector<double>>& distance,
                               std::span<const std::string> labels, double threshold);

enum class Metric { comprehensiveness, diversity, empowerment, directness };
std::string to_string(Metric m);
Metric metric_from_string(const std::string& s);
std::vector<Metric> all_metrics();

enum class Winner { a, b, tie };
std::string to_string(Winner w);
Winner winner_from_string(const std::string& s);

struct JudgeVerdict {
    std::string question_id;
    std::string condition_a;
    std::string condition_b;
    Metric metric = Metric::comprehensiveness;
    std::size_t replicate = 0;
    Winner winner = Winner::tie;
    /// True when answer A was shown second.
    bool swapped = false;
    std::string warning;
};

struct JudgeRequest {
    std::string question_id;
    std::string question;
    std::string condition_a;
    std::string answer_a;
    std::string condition_b;
    std::string answer_b;
};

/// One verdict per replicate. The order the two answers are shown in is drawn per
/// replicate from `seed`; unparseable verdicts become ties with a warning.
std::vector<JudgeVerdict> judge_pairwise(Provider& provider, const TemplateStore& templates,
                                         const JudgeRequest& request, Metric metric,
                                         std::size_t replicates, std::uint64_t seed);

/// (condition, opponent, metric) -> percentage of comparisons the condition won, ties
/// counting half. Both orientations of every judged pair are present.
using WinRateTable = std::map<std::tuple<std::string, std::string, Metric>, double>;
WinRateTable win_rates(std::span<const JudgeVerdict> verdicts);

json to_json(const Question& q);
Question question_from_json(const json& j);
json to_json(const JudgeVerdict& v);
JudgeVerdict verdict_from_json(const json& j);
json to_json(const WinRateTable& table);

}  // namespace ontorag
