#pragma once

#include <cstdint>
#include <string>

#include "rubricrl/dataio.hpp"
#include "rubricrl/grpo.hpp"
#include "rubricrl/rng.hpp"

namespace rubricrl {

struct BoundInstance {
    SimPolicy policy;
    TrueRewardModel model;
};

// Random softmax policy over 2..max_candidates candidates with random
// signed criteria weights and satisfaction tables.
BoundInstance make_random_bound_instance(Rng& rng, std::size_t max_candidates = 8);

// A prompt whose candidate set contains a reward-hacking trap: one
// candidate games the offline rubric while triggering a hidden
// negative-weight criterion. Expert weight profile.
DatasetRecord make_trap_record(std::uint64_t seed, const std::string& prompt_id);

}  // namespace rubricrl
