#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "rubricrl/bench.hpp"
#include "rubricrl/errors.hpp"
#include "rubricrl/rng.hpp"

using namespace rubricrl;
using json = nlohmann::json;

namespace {

// O(n^2) concordance oracle: P(score_pos > score_neg) with ties at 1/2.
double auc_oracle(const std::vector<int>& labels, const std::vector<double>& scores) {
    double concordant = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) concordant += 1.0;
            else if (scores[i] == scores[j]) concordant += 0.5;
        }
    }
    return concordant / double(pairs);
}

// O(n^2) dominance oracle for the Pareto frontier.
std::vector<bool> frontier_oracle(const std::vector<ParetoPoint>& points) {
    std::vector<bool> on(points.size(), true);
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (i == j) continue;
            const bool no_worse = points[j].cost_per_sample <= points[i].cost_per_sample &&
                                  points[j].auc >= points[i].auc;
            const bool strictly_better = points[j].cost_per_sample < points[i].cost_per_sample ||
                                         points[j].auc > points[i].auc;
            if (no_worse && strictly_better) {
                on[i] = false;
                break;
            }
        }
    }
    return on;
}

BackendSpec priced_spec(const std::string& id, double in_rate, double out_rate) {
    BackendSpec spec;
    spec.id = id;
    spec.kind = BackendKind::mock_scripted;
    spec.pricing = {in_rate, out_rate};
    return spec;
}

UsageRecord usage_of(const std::string& backend_id, std::int64_t in_tokens,
                     std::int64_t out_tokens) {
    UsageRecord usage;
    usage.backend_id = backend_id;
    usage.input_tokens = in_tokens;
    usage.output_tokens = out_tokens;
    return usage;
}

GraderEvalRecord eval_record(const std::string& backend_id, const std::string& sample, int label,
                             double score, std::int64_t tokens) {
    GraderEvalRecord record;
    record.prompt_id = sample;
    record.response_id = sample + "-r";
    record.criterion_id = "c";
    record.human_label = label;
    record.grader_score = score;
    record.usage = usage_of(backend_id, tokens, tokens / 4);
    return record;
}

}  // namespace

TEST_CASE("roc_auc worked examples") {
    CHECK(roc_auc({1, 1, 0, 0}, {0.9, 0.8, 0.3, 0.1}) == doctest::Approx(1.0));
    CHECK(roc_auc({0, 0, 1, 1}, {0.9, 0.8, 0.3, 0.1}) == doctest::Approx(0.0));
    CHECK(std::abs(roc_auc({1, 0, 1, 0}, {0.9, 0.8, 0.7, 0.6}) - 0.75) < 1e-9);
    // All scores tied: no discrimination.
    CHECK(roc_auc({1, 0, 1, 0}, {0.5, 0.5, 0.5, 0.5}) == doctest::Approx(0.5));
}

TEST_CASE("roc_auc rejects degenerate inputs") {
    CHECK_THROWS_AS(roc_auc({1, 1}, {0.1, 0.2}), DataError);
    CHECK_THROWS_AS(roc_auc({0, 0}, {0.1, 0.2}), DataError);
    CHECK_THROWS_AS(roc_auc({1, 0}, {0.1}), DataError);
    CHECK_THROWS_AS(roc_auc({}, {}), DataError);
    CHECK_THROWS_AS(roc_auc({1, 2}, {0.1, 0.2}), DataError);
}

TEST_CASE("roc_auc matches the O(n^2) concordance oracle") {
    for (int i = 0; i < 200; ++i) {
        Rng rng = Rng::stream(41, i, "auc");
        const std::size_t n = 4 + rng.next_below(60);
        std::vector<int> labels(n);
        std::vector<double> scores(n);
        bool has_pos = false, has_neg = false;
        for (std::size_t k = 0; k < n; ++k) {
            labels[k] = static_cast<int>(rng.next_below(2));
            // Quantized scores force plenty of ties.
            scores[k] = double(rng.next_below(8)) / 8.0;
            (labels[k] == 1 ? has_pos : has_neg) = true;
        }
        if (!has_pos) labels[0] = 1;
        if (!has_neg) labels[1] = 0;
        CHECK(std::abs(roc_auc(labels, scores) - auc_oracle(labels, scores)) < 1e-9);
    }
}

TEST_CASE("roc_auc invariances: monotone transform and label negation") {
    Rng rng = Rng::stream(43, 0, "auc_inv");
    std::vector<int> labels(40);
    std::vector<double> scores(40);
    for (std::size_t k = 0; k < labels.size(); ++k) {
        labels[k] = static_cast<int>(rng.next_below(2));
        scores[k] = rng.next_double();
    }
    labels[0] = 1;
    labels[1] = 0;
    const double base = roc_auc(labels, scores);

    std::vector<double> transformed = scores;
    for (double& s : transformed) s = std::exp(3.0 * s) + 7.0;
    CHECK(roc_auc(labels, transformed) == doctest::Approx(base));

    std::vector<double> negated = scores;
    for (double& s : negated) s = -s;
    CHECK(roc_auc(labels, negated) == doctest::Approx(1.0 - base));
}

TEST_CASE("cost_per_sample worked examples") {
    std::map<std::string, BackendSpec> specs;
    specs["b"] = priced_spec("b", 1.0, 0.0);

    std::vector<UsageRecord> usages = {usage_of("b", 1000000, 0)};
    CHECK(cost_per_sample(usages, 100, specs) == doctest::Approx(0.01));
    CHECK(cost_per_sample({}, 5, specs) == 0.0);
    CHECK_THROWS_AS(cost_per_sample(usages, 0, specs), DataError);
    CHECK_THROWS_AS(cost_per_sample({usage_of("ghost", 1, 1)}, 1, specs), ConfigError);
}

TEST_CASE("pareto frontier worked example") {
    std::vector<ParetoPoint> points = {
        {"cheap_weak", 0.6, 0.001, false},
        {"mid", 0.8, 0.01, false},
        {"pricy_strong", 0.95, 0.1, false},
        {"dominated", 0.7, 0.05, false},   // worse than mid on both axes
        {"tied_cost_worse", 0.75, 0.01, false},
    };
    const auto out = pareto_frontier(points);
    REQUIRE(out.size() == 5);
    CHECK(out[0].on_frontier);
    CHECK(out[1].on_frontier);
    CHECK(out[2].on_frontier);
    CHECK_FALSE(out[3].on_frontier);
    CHECK_FALSE(out[4].on_frontier);
    // Input order preserved.
    CHECK(out[3].backend_id == "dominated");
}

TEST_CASE("pareto frontier matches the O(n^2) dominance oracle and ignores input order") {
    for (int i = 0; i < 200; ++i) {
        Rng rng = Rng::stream(47, i, "pareto");
        const std::size_t n = 1 + rng.next_below(20);
        std::vector<ParetoPoint> points;
        for (std::size_t k = 0; k < n; ++k) {
            ParetoPoint p;
            p.backend_id = "b" + std::to_string(k);
            // Quantized so equal costs and equal aucs occur often.
            p.auc = double(rng.next_below(6)) / 5.0;
            p.cost_per_sample = double(rng.next_below(5)) / 100.0;
            points.push_back(p);
        }
        const auto expected = frontier_oracle(points);
        const auto out = pareto_frontier(points);
        for (std::size_t k = 0; k < n; ++k) {
            CHECK(out[k].backend_id == points[k].backend_id);
            CHECK(out[k].on_frontier == expected[k]);
        }

        // Reversing the input must not change per-point membership.
        std::vector<ParetoPoint> reversed(points.rbegin(), points.rend());
        const auto out_rev = pareto_frontier(reversed);
        for (std::size_t k = 0; k < n; ++k) {
            CHECK(out_rev[n - 1 - k].on_frontier == out[k].on_frontier);
        }
    }
}

TEST_CASE("benchmark_graders builds the report and prefers cheaper ties") {
    std::map<std::string, BackendSpec> specs;
    specs["cheap"] = priced_spec("cheap", 0.1, 0.1);
    specs["pricy"] = priced_spec("pricy", 10.0, 10.0);

    std::map<std::string, std::vector<GraderEvalRecord>> records;
    for (int s = 0; s < 4; ++s) {
        const std::string sample = "p" + std::to_string(s);
        const int label = s < 2 ? 1 : 0;
        const double score = s < 2 ? 0.9 : 0.1;
        records["cheap"].push_back(eval_record("cheap", sample, label, score, 1000));
        records["pricy"].push_back(eval_record("pricy", sample, label, score, 1000));
    }
    const json report = benchmark_graders(records, specs);
    REQUIRE(report.at("backends").size() == 2);
    bool cheap_on = false, pricy_on = false;
    for (const auto& entry : report["backends"]) {
        CHECK(entry.at("auc").get<double>() == doctest::Approx(1.0));
        if (entry.at("id") == "cheap") cheap_on = entry.at("on_frontier").get<bool>();
        if (entry.at("id") == "pricy") pricy_on = entry.at("on_frontier").get<bool>();
    }
    CHECK(cheap_on);
    CHECK_FALSE(pricy_on);

    const std::string table = render_benchmark_table(report);
    CHECK(table.find("cheap") != std::string::npos);
    CHECK(table.find("auc") != std::string::npos);
}

TEST_CASE("benchmark_graders names the offending backend on single-class data") {
    std::map<std::string, BackendSpec> specs;
    specs["onesided"] = priced_spec("onesided", 0.1, 0.1);
    std::map<std::string, std::vector<GraderEvalRecord>> records;
    records["onesided"] = {eval_record("onesided", "p0", 1, 0.9, 10),
                           eval_record("onesided", "p1", 1, 0.8, 10)};
    try {
        benchmark_graders(records, specs);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("onesided") != std::string::npos);
    }
}

TEST_CASE("grader eval record loader validates fields") {
    const std::string path = "bench_records_test.jsonl";
    {
        std::ofstream out(path);
        out << R"({"prompt_id":"p1","response_id":"r1","criterion_id":"c1","human_label":1,)"
            << R"("grader_score":0.9,"backend_id":"b","input_tokens":100,"output_tokens":10})"
            << "\n\n";
        out << R"({"prompt_id":"p1","response_id":"r2","criterion_id":"c1","human_label":0,)"
            << R"("grader_score":0.2,"backend_id":"b"})"
            << "\n";
    }
    const auto records = load_grader_eval_records(path);
    REQUIRE(records.size() == 2);
    CHECK(records[0].usage.input_tokens == 100);
    CHECK(records[1].usage.input_tokens == 0);

    {
        std::ofstream out(path);
        out << R"({"prompt_id":"p1","response_id":"r1","criterion_id":"c1","human_label":2,)"
            << R"("grader_score":0.9,"backend_id":"b"})"
            << "\n";
    }
    try {
        load_grader_eval_records(path);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
    CHECK_THROWS_AS(load_grader_eval_records("no/such/records.jsonl"), DataError);
    std::remove(path.c_str());
}
