#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace oamfso {

enum class Errc {
    invalid_argument,
    beam_too_large,
    grid_mismatch,
    sampling_violation,
    zero_power,
    shape_mismatch,
    empty_input,
    invalid_split,
    missing_class,
    non_finite,
    io_error,
    bad_magic,
    unsupported_version,
    truncated,
    header_mismatch,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

inline void require(bool cond, Errc code, const std::string& what) {
    if (!cond) throw Error(code, what);
}

}  // namespace oamfso
