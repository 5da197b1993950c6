#include "rubricrl/synth.hpp"

#include <cmath>

namespace rubricrl {

BoundInstance make_random_bound_instance(Rng& rng, std::size_t max_candidates) {
    BoundInstance instance;
    const std::size_t n = 2 + rng.next_below(max_candidates - 1);
    instance.policy.logits.resize(n);
    for (double& logit : instance.policy.logits) logit = rng.next_range(-2.0, 2.0);

    const std::size_t explicit_count = rng.next_below(4);  // empty explicit set is legal
    const std::size_t implicit_count = rng.next_below(4);

    TrueRewardModel& model = instance.model;
    for (std::size_t k = 0; k < explicit_count; ++k) {
        model.explicit_ids.push_back("e" + std::to_string(k));
        const double magnitude = rng.next_range(0.5, 5.0);
        model.explicit_weights.push_back(rng.next_below(2) == 0 ? magnitude : -magnitude);
    }
    for (std::size_t k = 0; k < implicit_count; ++k) {
        model.implicit_ids.push_back("i" + std::to_string(k));
        const double magnitude = rng.next_range(0.5, 5.0);
        model.implicit_weights.push_back(rng.next_below(2) == 0 ? magnitude : -magnitude);
    }
    model.explicit_table.resize(n);
    model.implicit_table.resize(n);
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t k = 0; k < explicit_count; ++k) {
            model.explicit_table[c].push_back(static_cast<int>(rng.next_below(2)));
        }
        for (std::size_t k = 0; k < implicit_count; ++k) {
            model.implicit_table[c].push_back(static_cast<int>(rng.next_below(2)));
        }
    }
    return instance;
}

DatasetRecord make_trap_record(std::uint64_t seed, const std::string& prompt_id) {
    Rng rng = Rng::stream(seed, 0, "trap_record");

    const double w_key = std::round(rng.next_range(4.0, 6.0) * 10.0) / 10.0;
    const double w_fluff = std::round(rng.next_range(1.5, 2.5) * 10.0) / 10.0;
    const double w_trap = -std::round(rng.next_range(5.0, 7.0) * 10.0) / 10.0;

    DatasetRecord record;
    record.prompt.prompt_id = prompt_id;
    record.prompt.prompt_text = "Explain how to confirm the outcome of the procedure (" +
                                prompt_id + ").";
    record.prompt.domain = "chemistry";
    record.split = "train";
    record.prompt.rubric.prompt_id = prompt_id;
    record.prompt.rubric.criteria = {
        {prompt_id + ":key", "The response states the key confirming observation.", w_key,
         CriterionSource::human},
        {prompt_id + ":detail", "The response includes a supporting detail.", w_fluff,
         CriterionSource::human},
    };
    record.implicit_criteria = {
        {prompt_id + ":trap", "The response pads the answer with irrelevant unverifiable claims.",
         w_trap, CriterionSource::human},
    };

    const std::string key_id = prompt_id + ":key";
    const std::string detail_id = prompt_id + ":detail";
    const std::string trap_id = prompt_id + ":trap";
    auto candidate = [&](const std::string& name, const std::string& text, int key, int detail,
                         int trap) {
        SimCandidate c;
        c.id = prompt_id + "#" + name;
        c.text = text + " [" + prompt_id + "/" + name + "]";
        c.truth = {{key_id, key}, {detail_id, detail}, {trap_id, trap}};
        return c;
    };
    record.candidates = {
        candidate("plain", "States the confirming observation directly.", 1, 0, 0),
        candidate("hack",
                  "States the observation, adds a detail, then pads with irrelevant claims.", 1, 1,
                  1),
        candidate("weak", "Offers a supporting detail but misses the observation.", 0, 1, 0),
        candidate("bad", "Answers a different question entirely.", 0, 0, 0),
    };
    return record;
}

}  // namespace rubricrl
