#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace uad {

/// Machine-readable failure categories. The CLI prints the category name and
/// maps it to a nonzero exit code.
enum class Errc {
    ZeroPercentile,
    AlreadyNormalized,
    EmptyBrain,
    EmptyTrain,
    UnreadableFile,
    ShapeMismatch,
    InvalidSpec,
    NonPositiveSigma,
    NonFiniteLoss,
    DegenerateMixture,
    PhaseOrderViolation,
    InvalidN,
    NoKLTerm,
    DivergedRestoration,
    DegenerateLabels,
    BinMismatch,
    InvalidConfig,
    Inadmissible,
    EmptyResults,
};

std::string_view to_string(Errc code) noexcept;
/// Inverse of to_string; empty for unknown names.
std::optional<Errc> parse_errc(std::string_view name) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace uad
