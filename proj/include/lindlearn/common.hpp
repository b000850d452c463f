// Shared basic types: Pauli axes, error reporting, small numeric helpers.
#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace lindlearn {

using cplx = std::complex<double>;

inline constexpr double PI = 3.14159265358979323846;
inline constexpr double TWO_PI = 2.0 * PI;

// Exit codes used by the CLI; library errors carry one so main() can translate.
enum class ErrorCode : int {
    config = 2,     // bad configuration / input files
    numerical = 3,  // LP infeasibility, NaN, ill-conditioned fit, ...
};

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void fail_config(const std::string& msg) { throw Error(ErrorCode::config, msg); }
[[noreturn]] inline void fail_numerical(const std::string& msg) { throw Error(ErrorCode::numerical, msg); }

// Pauli axis labels. Values are fixed (used in arithmetic mod 3 and serialization).
enum class Axis : std::uint8_t { X = 0, Y = 1, Z = 2 };

inline char axis_char(Axis a) { return "XYZ"[static_cast<int>(a)]; }

inline Axis axis_from_char(char c) {
    switch (c) {
        case 'x': case 'X': return Axis::X;
        case 'y': case 'Y': return Axis::Y;
        case 'z': case 'Z': return Axis::Z;
        default: fail_config(std::string("invalid Pauli axis character '") + c + "'");
    }
}

// Cyclic successor: X->Y->Z->X. axis_plus(a,1) is the "next" axis.
inline Axis axis_plus(Axis a, int k) {
    return static_cast<Axis>((static_cast<int>(a) + k) % 3);
}

// Levi-Civita symbol over axes: +1 for (X,Y,Z) cyclic, -1 anticyclic, 0 otherwise.
inline int levi_civita(Axis a, Axis b, Axis c) {
    int i = static_cast<int>(a), j = static_cast<int>(b), k = static_cast<int>(c);
    if (i == j || j == k || i == k) return 0;
    return ((j - i + 3) % 3 == 1) ? 1 : -1;
}

inline int kron_delta(Axis a, Axis b) { return a == b ? 1 : 0; }

}  // namespace lindlearn
