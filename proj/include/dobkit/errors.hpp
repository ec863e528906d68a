#pragma once

#include <stdexcept>
#include <string>

namespace dobkit {

struct SingularMass : std::runtime_error {
    explicit SingularMass(const std::string& what) : std::runtime_error(what) {}
};

struct NonFinite : std::runtime_error {
    explicit NonFinite(const std::string& what) : std::runtime_error(what) {}
};

struct InnovationSingular : std::runtime_error {
    explicit InnovationSingular(const std::string& what) : std::runtime_error(what) {}
};

struct NotPD : std::runtime_error {
    explicit NotPD(const std::string& what) : std::runtime_error(what) {}
};

struct TooShort : std::runtime_error {
    explicit TooShort(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown by the closed-loop runner with the failing step index attached.
struct RunError : std::runtime_error {
    long step;
    RunError(long step_, const std::string& what)
        : std::runtime_error("step " + std::to_string(step_) + ": " + what), step(step_) {}
};

}  // namespace dobkit
