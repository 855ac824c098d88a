#pragma once

#include <cstddef>
#include <vector>

#include "corpus.hpp"
#include "random.hpp"

namespace rscope {

/// Court-style documents built from label-specific sentence templates, each with
/// exactly one annotated span. Output is grouped by label in class order.
std::vector<AnnotatedDocument> generate_synthetic(Seed seed, std::size_t per_class);

/// Same generator with an explicit document count per label.
std::vector<AnnotatedDocument> generate_synthetic(Seed seed, const LabelCounts& counts);

}  // namespace rscope
