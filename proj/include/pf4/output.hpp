#pragma once

#include <cstdio>
#include <string>

#include "pf4/discretization.hpp"
#include "pf4/oracle1d.hpp"
#include "pf4/solver.hpp"

namespace pf4 {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kCurveHeader = "step,applied_mm,reaction_N,cmod_mm,iters,status";

/// One CSV line (without newline) in %.10e format.
std::string format_curve_row(const CurveRow& row);
/// Parses a line produced by format_curve_row.
CurveRow parse_curve_row(const std::string& line);

void write_curve_csv(const LoadCurve& curve, const std::string& path);
LoadCurve read_curve_csv(const std::string& path);

/// Appends rows as they arrive and flushes after each one.
class CurveWriter {
public:
    explicit CurveWriter(const std::string& path);
    ~CurveWriter();
    CurveWriter(const CurveWriter&) = delete;
    CurveWriter& operator=(const CurveWriter&) = delete;
    void append(const CurveRow& row);

private:
    std::FILE* f_ = nullptr;
    std::string path_;
};

/// Samples the fields on an s x s grid per element (element corners included)
/// and writes a legacy ASCII VTK unstructured grid of quads with POINT_DATA
/// `phi` and `displacement`.
void write_vtk(const SimState& state, const Mesh& mesh, const std::string& path, int samples = 2);

/// Writes x, phi, dphi, d2phi columns and a trailing comment with Gamma.
void write_profile_csv(const Profile1D& profile, const std::string& path);

}  // namespace pf4
