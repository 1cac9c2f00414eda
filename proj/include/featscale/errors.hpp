#pragma once

#include <stdexcept>
#include <string>

namespace featscale {

struct NotPositiveDefinite : std::runtime_error {
    explicit NotPositiveDefinite(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatch : std::invalid_argument {
    explicit DimensionMismatch(const std::string& what) : std::invalid_argument(what) {}
};

struct NonFiniteInput : std::invalid_argument {
    explicit NonFiniteInput(const std::string& what) : std::invalid_argument(what) {}
};

struct GraphError : std::invalid_argument {
    explicit GraphError(const std::string& what) : std::invalid_argument(what) {}
};

struct TooFewBins : std::invalid_argument {
    explicit TooFewBins(const std::string& what) : std::invalid_argument(what) {}
};

struct NonConvergence : std::runtime_error {
    explicit NonConvergence(const std::string& what) : std::runtime_error(what) {}
};

struct BracketExhausted : std::runtime_error {
    explicit BracketExhausted(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigInvalid : std::invalid_argument {
    explicit ConfigInvalid(const std::string& what) : std::invalid_argument(what) {}
};

struct InputMissing : std::runtime_error {
    explicit InputMissing(const std::string& what) : std::runtime_error(what) {}
};

struct PipelineStageFailed : std::runtime_error {
    PipelineStageFailed(const std::string& stage, const std::string& what)
        : std::runtime_error("stage '" + stage + "': " + what), stage(stage) {}
    std::string stage;
};

}  // namespace featscale
