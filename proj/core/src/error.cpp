#include "oamfso/error.hpp"

namespace oamfso {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::invalid_argument: return "invalid_argument";
        case Errc::beam_too_large: return "beam_too_large";
        case Errc::grid_mismatch: return "grid_mismatch";
        case Errc::sampling_violation: return "sampling_violation";
        case Errc::zero_power: return "zero_power";
        case Errc::shape_mismatch: return "shape_mismatch";
        case Errc::empty_input: return "empty_input";
        case Errc::invalid_split: return "invalid_split";
        case Errc::missing_class: return "missing_class";
        case Errc::non_finite: return "non_finite";
        case Errc::io_error: return "io_error";
        case Errc::bad_magic: return "bad_magic";
        case Errc::unsupported_version: return "unsupported_version";
        case Errc::truncated: return "truncated";
        case Errc::header_mismatch: return "header_mismatch";
    }
    return "unknown";
}

}  // namespace oamfso
