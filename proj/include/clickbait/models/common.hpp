#pragma once

#include <cstddef>
#include <span>

namespace clickbait::models {

struct ClassWeights {
    double negative = 1.0;
    double positive = 1.0;

    double operator[](int label) const { return label == 1 ? positive : negative; }
};

/// w_c = n / (2 n_c). Throws ValidationError unless both classes occur.
ClassWeights balanced_class_weights(std::span<const int> labels);

void check_labels(std::span<const int> labels, std::size_t rows);

} // namespace clickbait::models
