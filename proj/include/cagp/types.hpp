#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cagp {

// Dense indices into the vocabulary built at load time.
using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
    EntityId head;
    RelationId relation;
    EntityId tail;

    friend bool operator==(const Triple&, const Triple&) = default;
    friend auto operator<=>(const Triple&, const Triple&) = default;
};

// Error taxonomy. The CLI maps InvalidInput/ParseError to exit code 2 and
// TrainingDiverged to exit code 3.
struct InvalidInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UndefinedMetric : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cagp
