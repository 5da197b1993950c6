#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace rubricrl {

enum class CriterionSource { human, synthetic, elicited, universal };

const char* to_string(CriterionSource source);
CriterionSource criterion_source_from_string(std::string_view s);

// One weighted, binary-checkable statement. Positive weight rewards
// satisfaction, negative weight penalizes it.
struct Criterion {
    std::string id;
    std::string text;
    double weight = 0.0;
    CriterionSource source = CriterionSource::human;
};

// Allowed weight range for a dataset profile. Generalist rubrics use
// positive weights in [1,5]; expert rubrics use [-10,10] excluding 0.
struct WeightProfile {
    std::string name;
    double min_weight = 1.0;
    double max_weight = 5.0;
    bool allow_negative = false;

    static WeightProfile generalist();
    static WeightProfile expert();
    static WeightProfile for_domain(std::string_view domain);

    bool contains(double w) const;
    // Pulls an out-of-range weight to the nearest legal value. Never
    // returns 0.
    double clamp(double w) const;
};

struct Rubric {
    std::string prompt_id;
    std::vector<Criterion> criteria;

    std::size_t size() const { return criteria.size(); }
};

// Per-criterion binary verdicts, aligned positionally with a rubric.
struct GradeVector {
    std::vector<int> verdicts;
    std::vector<double> confidences;  // optional; empty or same length
};

struct PromptRecord {
    std::string prompt_id;
    std::string prompt_text;
    std::string domain;
    Rubric rubric;
};

struct Violation {
    std::string criterion_id;
    std::string message;
};

// Case-fold, collapse internal whitespace, strip trailing punctuation.
// Used for duplicate detection.
std::string normalize_text(std::string_view text);

// Weighted sum of verdicts normalized by total positive weight.
// Throws DataError on length mismatch or zero positive-weight mass.
double reduce_reward(const Rubric& rubric, const GradeVector& grades);

// Mechanical invariant checks; violations are data, not faults.
std::vector<Violation> validate_rubric(const Rubric& rubric, const WeightProfile& profile);

// Appends extras that do not duplicate (by normalized text) an existing
// criterion. Base order and content are preserved.
Rubric merge_rubrics(const Rubric& base, const std::vector<Criterion>& extra);

}  // namespace rubricrl
