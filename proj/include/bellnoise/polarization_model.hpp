#pragma once

// Classical linearly polarized waves seen by a rotated two-axis detector.
//
// A wave with polarization angle xi reaching a detector oriented at Phi is
// projected with effective angle theta = Phi - xi, where xi = 0 deg for a
// vertical wave and 90 deg for a horizontal one. Coincidence intensity is one
// half the square of the dot product of the two projected unit fields, i.e.
// 1/2 cos^2(theta_A - theta_B); a mismatched V/H pair therefore sees
// 1/2 sin^2 of the detector difference.
//
// Multiplying two independent Malus-law transmissions, cos^2(theta_A) *
// cos^2(theta_B), is NOT an equivalent detector model: it depends on the
// absolute orientations rather than on their difference and does not
// produce the 1/2 cos^2(theta_A - theta_B) coincidence law, so it is not
// offered here.

#include <bellnoise/noise_core.hpp>

#include <cmath>
#include <numbers>
#include <string_view>

namespace bellnoise {

/// cos and sin of an angle in degrees. The argument is reduced to
/// [-45, 45] about the nearest multiple of 90 before converting to radians,
/// so quarter turns evaluate exactly (cos 90 = 0, cos 180 = -1).
inline double cos_deg(double degrees) noexcept {
    const double x = std::fmod(degrees, 360.0);
    const double quarter = std::nearbyint(x / 90.0);
    const double rad = (x - 90.0 * quarter) * (std::numbers::pi / 180.0);
    switch (((static_cast<int>(quarter) % 4) + 4) % 4) {
    case 0: return std::cos(rad);
    case 1: return -std::sin(rad);
    case 2: return -std::cos(rad);
    default: return std::sin(rad);
    }
}

inline double sin_deg(double degrees) noexcept {
    const double x = std::fmod(degrees, 360.0);
    const double quarter = std::nearbyint(x / 90.0);
    const double rad = (x - 90.0 * quarter) * (std::numbers::pi / 180.0);
    switch (((static_cast<int>(quarter) % 4) + 4) % 4) {
    case 0: return std::sin(rad);
    case 1: return std::cos(rad);
    case 2: return -std::sin(rad);
    default: return -std::cos(rad);
    }
}

/// Orientation in degrees, stored normalized to [0, 360).
class Angle {
public:
    constexpr Angle() = default;

    static Angle degrees(double deg) {
        double x = std::fmod(deg, 360.0);
        if (x < 0.0) x += 360.0;
        if (x >= 360.0) x = 0.0; // fmod(-tiny) + 360 can round up to 360
        return Angle(x);
    }

    double deg() const noexcept { return deg_; }
    double rad() const noexcept { return deg_ * (std::numbers::pi / 180.0); }

    friend Angle operator+(Angle a, Angle b) { return degrees(a.deg_ + b.deg_); }
    friend Angle operator-(Angle a, Angle b) { return degrees(a.deg_ - b.deg_); }
    friend bool operator==(Angle, Angle) = default;
    friend auto operator<=>(Angle, Angle) = default;

private:
    constexpr explicit Angle(double deg) : deg_(deg) {}
    double deg_ = 0.0;
};

/// Unit field E = a_V cos(theta) + a_H sin(theta) in detector coordinates.
struct FieldVector {
    double e_v;
    double e_h;

    double dot(const FieldVector& other) const noexcept { return e_v * other.e_v + e_h * other.e_h; }
};

inline FieldVector field(Angle theta) noexcept { return {cos_deg(theta.deg()), sin_deg(theta.deg())}; }

/// p(A, B) = E_A . E_B, which reduces to cos(theta_A - theta_B).
inline double correlation_field(Angle theta_a, Angle theta_b) noexcept {
    return cos_deg(theta_a.deg() - theta_b.deg());
}

/// 1/2 p(A, B)^2 = 1/2 cos^2(theta_A - theta_B), in [0, 1/2].
inline double coincidence_intensity(Angle theta_a, Angle theta_b) noexcept {
    const double p = correlation_field(theta_a, theta_b);
    return 0.5 * p * p;
}

enum class OutcomeLabel { vv = 0, hh = 1, vh = 2, hv = 3 };

inline constexpr std::string_view to_string(OutcomeLabel label) noexcept {
    switch (label) {
    case OutcomeLabel::vv: return "VV";
    case OutcomeLabel::hh: return "HH";
    case OutcomeLabel::vh: return "VH";
    case OutcomeLabel::hv: return "HV";
    }
    return "?";
}

inline constexpr bool is_aligned(OutcomeLabel label) noexcept {
    return label == OutcomeLabel::vv || label == OutcomeLabel::hh;
}

struct TrialOutcome {
    OutcomeLabel label;
    double intensity;

    friend bool operator==(const TrialOutcome&, const TrialOutcome&) = default;
};

/// Polarization angle of the wave relative to the laboratory vertical.
inline Angle polarization_angle(Polarization p) {
    return Angle::degrees(p == Polarization::vertical ? 0.0 : 90.0);
}

inline constexpr OutcomeLabel outcome_label(const TrialPolarizations& trial) noexcept {
    const bool v1 = trial.pol1 == Polarization::vertical;
    const bool v2 = trial.pol2 == Polarization::vertical;
    if (v1 && v2) return OutcomeLabel::vv;
    if (!v1 && !v2) return OutcomeLabel::hh;
    return v1 ? OutcomeLabel::vh : OutcomeLabel::hv;
}

/// Coincidence intensity for one trial with detectors at theta_a and theta_b.
inline TrialOutcome trial_outcome(const TrialPolarizations& trial, Angle theta_a, Angle theta_b) {
    const double eff_a = theta_a.deg() - polarization_angle(trial.pol1).deg();
    const double eff_b = theta_b.deg() - polarization_angle(trial.pol2).deg();
    const double p = cos_deg(eff_a - eff_b);
    return {outcome_label(trial), 0.5 * p * p};
}

} // namespace bellnoise
