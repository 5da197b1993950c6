#include <doctest.h>

#include <cmath>

#include "rubricrl/errors.hpp"
#include "rubricrl/rng.hpp"
#include "rubricrl/rubric.hpp"

using namespace rubricrl;

namespace {

Rubric make_rubric(const std::vector<double>& weights) {
    Rubric rubric;
    rubric.prompt_id = "p";
    for (std::size_t k = 0; k < weights.size(); ++k) {
        rubric.criteria.push_back({"c" + std::to_string(k), "criterion " + std::to_string(k),
                                   weights[k], CriterionSource::human});
    }
    return rubric;
}

GradeVector make_grades(const std::vector<int>& verdicts) {
    GradeVector grades;
    grades.verdicts = verdicts;
    return grades;
}

// Independent oracle: literal weighted sum over positive-weight mass.
double reduce_oracle(const std::vector<double>& weights, const std::vector<int>& verdicts) {
    double numerator = 0.0, positive = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        numerator += weights[k] * verdicts[k];
        if (weights[k] > 0) positive += weights[k];
    }
    return numerator / positive;
}

struct RandomRubricInstance {
    std::vector<double> weights;
    std::vector<int> verdicts;
};

RandomRubricInstance random_instance(Rng& rng, const WeightProfile& profile) {
    RandomRubricInstance instance;
    const std::size_t d = 1 + rng.next_below(12);
    bool has_positive = false;
    for (std::size_t k = 0; k < d; ++k) {
        double w = rng.next_range(profile.min_weight, profile.max_weight);
        if (w == 0.0) w = 1.0;
        if (!profile.allow_negative) w = std::abs(w) < profile.min_weight ? profile.min_weight : w;
        if (w > 0) has_positive = true;
        instance.weights.push_back(w);
        instance.verdicts.push_back(static_cast<int>(rng.next_below(2)));
    }
    if (!has_positive) {
        instance.weights[0] = std::abs(instance.weights[0]);
        if (instance.weights[0] == 0.0) instance.weights[0] = 1.0;
    }
    return instance;
}

}  // namespace

TEST_CASE("reduce_reward worked examples") {
    CHECK(reduce_reward(make_rubric({9.0}), make_grades({1})) == doctest::Approx(1.0));
    CHECK(reduce_reward(make_rubric({9.0, 1.0}), make_grades({0, 0})) == doctest::Approx(0.0));
    CHECK(reduce_reward(make_rubric({9.0, -3.0, 1.0}), make_grades({1, 1, 0})) ==
          doctest::Approx(0.6));
}

TEST_CASE("reduce_reward error paths") {
    CHECK_THROWS_AS(reduce_reward(make_rubric({9.0, 1.0}), make_grades({1})), DataError);
    CHECK_THROWS_AS(reduce_reward(make_rubric({-3.0}), make_grades({1})), DataError);
}

TEST_CASE("reduce_reward matches the brute-force oracle") {
    for (const WeightProfile& profile : {WeightProfile::generalist(), WeightProfile::expert()}) {
        for (int i = 0; i < 300; ++i) {
            Rng rng = Rng::stream(11, i, profile.name);
            const RandomRubricInstance instance = random_instance(rng, profile);
            const double got = reduce_reward(make_rubric(instance.weights),
                                             make_grades(instance.verdicts));
            CHECK(std::abs(got - reduce_oracle(instance.weights, instance.verdicts)) < 1e-12);
        }
    }
}

TEST_CASE("reduce_reward is monotone in verdict flips") {
    for (int i = 0; i < 100; ++i) {
        Rng rng = Rng::stream(13, i, "mono");
        const RandomRubricInstance instance = random_instance(rng, WeightProfile::expert());
        const Rubric rubric = make_rubric(instance.weights);
        const double base = reduce_reward(rubric, make_grades(instance.verdicts));
        for (std::size_t k = 0; k < instance.verdicts.size(); ++k) {
            if (instance.verdicts[k] == 1) continue;
            auto flipped = instance.verdicts;
            flipped[k] = 1;
            const double after = reduce_reward(rubric, make_grades(flipped));
            if (instance.weights[k] > 0) {
                CHECK(after >= base);
            } else {
                CHECK(after <= base);
            }
        }
    }
}

TEST_CASE("reduce_reward respects its range bounds") {
    for (int i = 0; i < 100; ++i) {
        Rng rng = Rng::stream(17, i, "range");
        const RandomRubricInstance instance = random_instance(rng, WeightProfile::expert());
        const double r = reduce_reward(make_rubric(instance.weights),
                                       make_grades(instance.verdicts));
        double neg = 0.0, pos = 0.0;
        for (double w : instance.weights) (w < 0 ? neg : pos) += std::abs(w);
        CHECK(r <= 1.0 + 1e-12);
        CHECK(r >= -neg / pos - 1e-12);
    }
}

TEST_CASE("validate_rubric reports mechanical violations") {
    Rubric rubric = make_rubric({3.0});
    rubric.criteria[0].weight = 0.0;
    auto violations = validate_rubric(rubric, WeightProfile::generalist());
    REQUIRE(!violations.empty());
    CHECK(violations[0].message == "zero weight");

    rubric = make_rubric({7.0});
    violations = validate_rubric(rubric, WeightProfile::generalist());
    REQUIRE(!violations.empty());
    CHECK(violations[0].message.find("out of range") != std::string::npos);

    rubric = make_rubric({-2.0, -5.0});
    violations = validate_rubric(rubric, WeightProfile::expert());
    REQUIRE(!violations.empty());
    bool found = false;
    for (const Violation& v : violations) found |= v.message == "no positive mass";
    CHECK(found);

    CHECK(validate_rubric(make_rubric({3.0, 2.0}), WeightProfile::generalist()).empty());
}

TEST_CASE("validate_rubric flags duplicate ids and empty text") {
    Rubric rubric = make_rubric({2.0, 3.0});
    rubric.criteria[1].id = rubric.criteria[0].id;
    rubric.criteria[1].text = "   ";
    const auto violations = validate_rubric(rubric, WeightProfile::generalist());
    bool dup = false, empty = false;
    for (const Violation& v : violations) {
        dup |= v.message == "duplicate criterion id";
        empty |= v.message == "empty text";
    }
    CHECK(dup);
    CHECK(empty);
}

TEST_CASE("normalize_text folds case, whitespace and trailing punctuation") {
    CHECK(normalize_text("  The  Answer\tis   CO2. ") == "the answer is co2");
    CHECK(normalize_text("plain") == "plain");
    CHECK(normalize_text("!?") == "");
}

TEST_CASE("merge_rubrics keeps base and appends non-duplicates") {
    const Rubric base = make_rubric({1.0, 2.0, 3.0, 4.0, 5.0});

    CHECK(merge_rubrics(base, {}).criteria.size() == 5);

    std::vector<Criterion> extras = {
        {"x0", "new criterion zero", 2.0, CriterionSource::elicited},
        {"x1", "new criterion one", 2.0, CriterionSource::elicited},
        {"x2", "new criterion two", 2.0, CriterionSource::elicited},
    };
    const Rubric merged = merge_rubrics(base, extras);
    REQUIRE(merged.criteria.size() == 8);
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(merged.criteria[k].id == base.criteria[k].id);
        CHECK(merged.criteria[k].weight == base.criteria[k].weight);
    }
    CHECK(merged.criteria[5].source == CriterionSource::elicited);

    // Normalized-equal text gets dropped.
    const Rubric same = merge_rubrics(base, {{"x9", "  CRITERION 2 ", 1.0,
                                              CriterionSource::elicited}});
    CHECK(same.criteria.size() == 5);
}

TEST_CASE("merge_rubrics is idempotent for duplicate extras") {
    const Rubric base = make_rubric({1.0, 2.0});
    const std::vector<Criterion> extras = {
        {"x0", "an extra criterion", 2.0, CriterionSource::elicited}};
    const Rubric once = merge_rubrics(base, extras);
    const Rubric twice = merge_rubrics(once, extras);
    REQUIRE(once.criteria.size() == twice.criteria.size());
    for (std::size_t k = 0; k < once.criteria.size(); ++k) {
        CHECK(once.criteria[k].id == twice.criteria[k].id);
    }
}

TEST_CASE("weight profile clamping") {
    const WeightProfile expert = WeightProfile::expert();
    CHECK(expert.clamp(12.0) == 10.0);
    CHECK(expert.clamp(-12.0) == -10.0);
    CHECK(expert.clamp(-3.0) == -3.0);
    CHECK(expert.clamp(0.0) != 0.0);
    const WeightProfile generalist = WeightProfile::generalist();
    CHECK(generalist.clamp(7.0) == 5.0);
    CHECK(generalist.clamp(-2.0) == 1.0);
}
