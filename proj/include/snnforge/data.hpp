#pragma once

#include <map>
#include <string>
#include <vector>

#include "snnforge/tensor.hpp"

namespace snnforge {

// In-memory sample collection. Inputs are expected to be normalized to [0,1]
// by the loaders/generators; labels index classes starting at 0.
struct Dataset {
    std::vector<Tensor> inputs;
    std::vector<int> labels;
    int num_classes = 0;
    std::string name;
    std::map<std::string, std::string> provenance;

    std::size_t size() const { return inputs.size(); }

    void validate() const;

    // Deterministic subsample without replacement; n >= size() returns a copy.
    Dataset subsample(std::size_t n, std::uint64_t seed) const;
};

}  // namespace snnforge
