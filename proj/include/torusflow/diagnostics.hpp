#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "torusflow/field_io.hpp"
#include "torusflow/spectral.hpp"
#include "torusflow/trajectory.hpp"

namespace torusflow {

/// Per-snapshot scalar diagnostics. Fields without a value for the run kind
/// (Weber residual and iteration count on direct runs, vorticity in 3D) are
/// emitted as empty CSV cells.
struct DiagnosticsRow {
    double time = 0.0;
    double energy = 0.0;
    double sobolev_s = 0.0;
    double max_div = 0.0;
    double weber = 0.0;
    bool has_weber = false;
    double vorticity_l2 = 0.0;
    bool has_vorticity = false;
    int picard_iters = 0;
    bool has_picard = false;
};

inline DiagnosticsRow basic_diagnostics(double t, const VectorField& u, SobolevIndex s) {
    DiagnosticsRow row;
    row.time = t;
    row.energy = kinetic_energy(u);
    row.sobolev_s = sobolev_norm(u, s);
    row.max_div = max_divergence(u);
    if (u.grid().dim() == 2) {
        row.vorticity_l2 = l2_norm(curl_2d(u));
        row.has_vorticity = true;
    }
    return row;
}

inline void write_diagnostics_csv(const std::string& path, const std::vector<DiagnosticsRow>& rows) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open '" + path + "' for writing");
    out << "t,energy,sobolev_s,max_divergence,weber_residual,vorticity_l2,picard_iterations\n";
    for (const auto& r : rows) {
        out << g17(r.time) << ',' << g17(r.energy) << ',' << g17(r.sobolev_s) << ','
            << g17(r.max_div) << ',';
        if (r.has_weber) out << g17(r.weber);
        out << ',';
        if (r.has_vorticity) out << g17(r.vorticity_l2);
        out << ',';
        if (r.has_picard) out << r.picard_iters;
        out << '\n';
    }
    if (!out) throw io_error("failed writing '" + path + "'");
}

} // namespace torusflow
