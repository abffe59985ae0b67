#include "uad/error.hpp"

namespace uad {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::ZeroPercentile: return "ZeroPercentile";
        case Errc::AlreadyNormalized: return "AlreadyNormalized";
        case Errc::EmptyBrain: return "EmptyBrain";
        case Errc::EmptyTrain: return "EmptyTrain";
        case Errc::UnreadableFile: return "UnreadableFile";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::InvalidSpec: return "InvalidSpec";
        case Errc::NonPositiveSigma: return "NonPositiveSigma";
        case Errc::NonFiniteLoss: return "NonFiniteLoss";
        case Errc::DegenerateMixture: return "DegenerateMixture";
        case Errc::PhaseOrderViolation: return "PhaseOrderViolation";
        case Errc::InvalidN: return "InvalidN";
        case Errc::NoKLTerm: return "NoKLTerm";
        case Errc::DivergedRestoration: return "DivergedRestoration";
        case Errc::DegenerateLabels: return "DegenerateLabels";
        case Errc::BinMismatch: return "BinMismatch";
        case Errc::InvalidConfig: return "InvalidConfig";
        case Errc::Inadmissible: return "Inadmissible";
        case Errc::EmptyResults: return "EmptyResults";
    }
    return "Unknown";
}

std::optional<Errc> parse_errc(std::string_view name) noexcept {
    for (int i = 0; i <= static_cast<int>(Errc::EmptyResults); ++i) {
        const auto code = static_cast<Errc>(i);
        if (to_string(code) == name) return code;
    }
    return std::nullopt;
}

}  // namespace uad
