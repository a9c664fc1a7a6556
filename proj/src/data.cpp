#include "snnforge/data.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace snnforge {

void Dataset::validate() const {
    if (inputs.size() != labels.size()) {
        throw DataError("dataset '" + name + "': " + std::to_string(inputs.size()) +
                        " inputs but " + std::to_string(labels.size()) + " labels");
    }
    for (int label : labels) {
        if (label < 0 || label >= num_classes) {
            throw DataError("dataset '" + name + "': label " + std::to_string(label) +
                            " outside [0, " + std::to_string(num_classes) + ")");
        }
    }
}

Dataset Dataset::subsample(std::size_t n, std::uint64_t seed) const {
    Dataset out;
    out.num_classes = num_classes;
    out.name = name;
    out.provenance = provenance;
    out.provenance["subsample_seed"] = std::to_string(seed);
    if (n >= size()) {
        out.inputs = inputs;
        out.labels = labels;
        return out;
    }
    std::vector<std::size_t> order(size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(n);
    std::sort(order.begin(), order.end());  // keep original sample order
    out.inputs.reserve(n);
    out.labels.reserve(n);
    for (std::size_t i : order) {
        out.inputs.push_back(inputs[i]);
        out.labels.push_back(labels[i]);
    }
    out.provenance["subsample_n"] = std::to_string(n);
    return out;
}

}  // namespace snnforge
