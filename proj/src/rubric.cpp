#include "rubricrl/rubric.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

#include "rubricrl/errors.hpp"

namespace rubricrl {

const char* to_string(CriterionSource source) {
    switch (source) {
        case CriterionSource::human: return "human";
        case CriterionSource::synthetic: return "synthetic";
        case CriterionSource::elicited: return "elicited";
        case CriterionSource::universal: return "universal";
    }
    return "human";
}

CriterionSource criterion_source_from_string(std::string_view s) {
    if (s == "human") return CriterionSource::human;
    if (s == "synthetic") return CriterionSource::synthetic;
    if (s == "elicited") return CriterionSource::elicited;
    if (s == "universal") return CriterionSource::universal;
    throw DataError("unknown criterion source: " + std::string(s));
}

WeightProfile WeightProfile::generalist() {
    return WeightProfile{"generalist", 1.0, 5.0, false};
}

WeightProfile WeightProfile::expert() {
    return WeightProfile{"expert", -10.0, 10.0, true};
}

WeightProfile WeightProfile::for_domain(std::string_view domain) {
    return domain == "generalist" ? generalist() : expert();
}

bool WeightProfile::contains(double w) const {
    if (w == 0.0) return false;
    if (!allow_negative && w < 0.0) return false;
    return w >= min_weight && w <= max_weight;
}

double WeightProfile::clamp(double w) const {
    if (contains(w)) return w;
    if (!allow_negative) {
        return std::clamp(w, min_weight, max_weight);
    }
    if (w == 0.0) return max_weight > 0 ? std::min(1.0, max_weight) : min_weight;
    return std::clamp(w, min_weight, max_weight);
}

std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    while (!out.empty() && (out.back() == '.' || out.back() == '!' || out.back() == '?' ||
                            out.back() == ',' || out.back() == ';' || out.back() == ':')) {
        out.pop_back();
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

double reduce_reward(const Rubric& rubric, const GradeVector& grades) {
    if (grades.verdicts.size() != rubric.criteria.size()) {
        throw DataError("grade vector length " + std::to_string(grades.verdicts.size()) +
                        " does not match rubric size " + std::to_string(rubric.criteria.size()));
    }
    double numerator = 0.0;
    double positive_mass = 0.0;
    for (std::size_t k = 0; k < rubric.criteria.size(); ++k) {
        const double w = rubric.criteria[k].weight;
        numerator += w * grades.verdicts[k];
        if (w > 0.0) positive_mass += w;
    }
    if (positive_mass <= 0.0) {
        throw DataError("rubric has zero positive-weight mass; reward undefined");
    }
    return numerator / positive_mass;
}

std::vector<Violation> validate_rubric(const Rubric& rubric, const WeightProfile& profile) {
    std::vector<Violation> violations;
    std::unordered_set<std::string> seen_ids;
    double positive_mass = 0.0;
    for (const Criterion& c : rubric.criteria) {
        if (normalize_text(c.text).empty()) {
            violations.push_back({c.id, "empty text"});
        }
        if (c.weight == 0.0) {
            violations.push_back({c.id, "zero weight"});
        } else if (!profile.contains(c.weight)) {
            violations.push_back({c.id, "weight " + std::to_string(c.weight) + " out of range [" +
                                          std::to_string(profile.min_weight) + "," +
                                          std::to_string(profile.max_weight) + "] for profile " +
                                          profile.name});
        }
        if (!seen_ids.insert(c.id).second) {
            violations.push_back({c.id, "duplicate criterion id"});
        }
        if (c.weight > 0.0) positive_mass += c.weight;
    }
    if (rubric.criteria.empty()) {
        violations.push_back({"", "rubric has no criteria"});
    } else if (positive_mass <= 0.0) {
        violations.push_back({"", "no positive mass"});
    }
    return violations;
}

Rubric merge_rubrics(const Rubric& base, const std::vector<Criterion>& extra) {
    Rubric merged = base;
    std::unordered_set<std::string> seen;
    seen.reserve(base.criteria.size() + extra.size());
    for (const Criterion& c : base.criteria) {
        seen.insert(normalize_text(c.text));
    }
    for (const Criterion& c : extra) {
        if (seen.insert(normalize_text(c.text)).second) {
            merged.criteria.push_back(c);
        }
    }
    return merged;
}

}  // namespace rubricrl
