// Command-line driver: circuit and field conditioning sweeps, frequency and
// transient field solves, CSV and VTK emission.

#include "eqstab/benchmark.hpp"
#include "eqstab/bicgstab.hpp"
#include "eqstab/circuit.hpp"
#include "eqstab/condest.hpp"
#include "eqstab/fem.hpp"
#include "eqstab/ilu0.hpp"
#include "eqstab/sparse_lu.hpp"
#include "eqstab/stabilize.hpp"
#include "eqstab/sweep.hpp"
#include "eqstab/timestep.hpp"
#include "eqstab/vtk.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>

namespace {

using namespace eqstab;

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    return out;
}

struct OutputTarget {
    std::optional<std::ofstream> file;
    std::ostream& stream() { return file ? *file : std::cout; }
};

OutputTarget make_output(const std::string& path) {
    OutputTarget t;
    if (!path.empty()) t.file = open_output(path);
    return t;
}

Norm parse_norm(const std::string& s) {
    if (s == "1") return Norm::One;
    if (s == "inf") return Norm::Inf;
    throw CLI::ValidationError("--norm must be 1 or inf");
}

std::array<Index, 3> parse_mesh(const std::string& s) {
    std::array<Index, 3> d{};
    char x1 = 0, x2 = 0;
    std::istringstream in(s);
    if (!(in >> d[0] >> x1 >> d[1] >> x2 >> d[2]) || x1 != 'x' || x2 != 'x' || d[0] < 1 || d[1] < 1 || d[2] < 1)
        throw CLI::ValidationError("--mesh expects NxNxN");
    return d;
}

struct ProblemOptions {
    std::string preset = "toy-capacitor";
    std::string config_path;
    std::string mesh_spec;

    [[nodiscard]] BenchmarkConfig resolve() const {
        BenchmarkConfig cfg = BenchmarkConfig::preset(preset);
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw std::runtime_error("cannot read config '" + config_path + "'");
            cfg = parse_config(in);
        }
        if (!mesh_spec.empty()) cfg.divisions = parse_mesh(mesh_spec);
        return cfg;
    }

    void attach(CLI::App* cmd) {
        cmd->add_option("--preset", preset, "named benchmark preset (toy-capacitor, toy-capacitor-fine)");
        cmd->add_option("--config", config_path, "key=value benchmark config file");
        cmd->add_option("--mesh", mesh_spec, "element divisions as NxNxN");
    }
};

std::vector<ScalingVariant> parse_variants(const std::vector<std::string>& names, double omega0,
                                           bool exact_blocks) {
    std::vector<ScalingVariant> out;
    for (const auto& n : names) {
        auto v = ScalingVariant::from_cli(n, omega0);
        v.exact_block_lu = exact_blocks;
        out.push_back(v);
    }
    return out;
}

int run_circuit_sweep(double resistance, double capacitance, SweepSpec spec, const std::string& out_path) {
    auto result = circuit_sweep(resistance, capacitance, spec);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    auto out = make_output(out_path);
    write_sweep_csv(out.stream(), "f_Hz", {"orig", "i", "iii"}, result.rows);
    return 0;
}

struct FieldSetup {
    BenchmarkConfig cfg;
    FieldProblem problem;
    ReducedSystem reduced;
    TwoBlockSystem blocks;
};

FieldSetup build_field(const ProblemOptions& opts) {
    FieldSetup s{opts.resolve(), {}, {}, {}};
    s.problem = build_problem(s.cfg);
    s.reduced = reduce_system(s.problem.mesh, s.problem.materials, s.problem.bc);
    s.blocks = partition(s.reduced, s.problem.mesh, s.problem.materials);
    return s;
}

int run_field_sweep(const ProblemOptions& opts, SweepSpec spec, const std::string& out_path) {
    auto setup = build_field(opts);
    auto rows = field_sweep(setup.blocks, spec);
    std::vector<std::string> labels;
    for (const auto& v : spec.variants) labels.push_back(v.label());
    auto out = make_output(out_path);
    write_sweep_csv(out.stream(), spec.axis == SweepSpec::Axis::dt_s ? "dt_s" : "f_Hz", labels, rows,
                    spec.solver == SweepSpec::Solver::bicgstab_ilu);
    return 0;
}

struct SolveOptions {
    std::string mode = "freq";
    std::string variant = "iv";
    std::string solver = "lu";
    bool use_ilu = false;
    bool exact_blocks = false;
    double omega0 = 0.0;
    double tol = 1e-12;
    int maxit = 20000;
    std::optional<double> freq_hz;
    std::optional<double> dt;
    double t_end = 0.0;
    int stride = 1;
    int vtk_stride = 0;
    std::string vtk_path;
    std::string out_path;
    std::string probe_spec;
};

Index probe_node(const HexMesh& mesh, const std::string& spec) {
    std::array<double, 3> p = {mesh.lengths()[0] / 2, mesh.lengths()[1] / 2, mesh.lengths()[2] / 2};
    if (!spec.empty()) {
        std::istringstream in(spec);
        if (!(in >> p[0] >> p[1] >> p[2])) throw std::runtime_error("--probe expects 'x y z'");
    }
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index n = 0; n < mesh.num_nodes(); ++n) {
        auto q = mesh.node_position(n);
        const double d = std::hypot(q[0] - p[0], q[1] - p[1], q[2] - p[2]);
        if (d < best_d) { best_d = d; best = n; }
    }
    return best;
}

void write_field_vtk(const std::string& path, const HexMesh& mesh, const MaterialMap& materials,
                     std::span<const Cplx> phi_nodes) {
    std::vector<double> phi_re = peak_field(phi_nodes);
    auto d = displacement_field(mesh, materials, phi_re);
    std::vector<VtkScalarField> points = {{"phi", phi_re}};
    std::vector<VtkScalarField> cells = {{"D_mag", d}};
    auto out = open_output(path);
    write_vtk_structured(out, mesh, points, cells);
}

int run_solve_freq(const FieldSetup& setup, const SolveOptions& opt) {
    const double f = opt.freq_hz.value_or(setup.cfg.frequency_hz);
    const double omega = 2.0 * std::numbers::pi * f;
    auto variant = ScalingVariant::from_cli(opt.variant, opt.omega0);
    variant.exact_block_lu = opt.exact_blocks;
    auto sc = scale_system(setup.blocks, variant, omega);

    std::vector<Cplx> xi;
    int iterations = 0;
    if (opt.solver == "bicgstab") {
        std::function<std::vector<Cplx>(std::span<const Cplx>)> pre;
        std::shared_ptr<Ilu0Preconditioner> ilu_p;
        if (sc.precond) {
            auto bp = sc.precond;
            pre = [bp](std::span<const Cplx> x) { return bp->apply(x); };
        } else if (opt.use_ilu) {
            ilu_p = std::make_shared<Ilu0Preconditioner>(ilu0(sc.A));
            pre = [ilu_p](std::span<const Cplx> x) { return ilu_p->solve(x); };
        }
        auto res = bicgstab(sc.A, sc.rhs, opt.tol, opt.maxit, pre);
        xi = res.x;
        iterations = res.iterations;
    } else {
        auto lu = lu_factor(sc.A);
        if (lu.singular())
            throw SingularMatrixError(
                "system matrix is singular at f = " + std::to_string(f) +
                " Hz with variant '" + variant.label() + "'; pick a stabilized variant (i-vi)");
        xi = solve_refined(sc.A, lu, sc.rhs);
    }

    auto rec = recover_solution(sc, xi);
    auto phi_nodes = setup.reduced.expand(rec.phi);
    auto d = displacement_field(setup.problem.mesh, setup.problem.materials, peak_field(phi_nodes));
    double dmin = d.empty() ? 0.0 : d[0], dmax = dmin;
    for (double v : d) { dmin = std::min(dmin, v); dmax = std::max(dmax, v); }

    // residual of the scaled system
    auto r = sc.A.multiply(xi);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = sc.rhs[i] - r[i];
    const double rel = norm2(sc.rhs) > 0 ? norm2(r) / norm2(sc.rhs) : 0.0;

    std::cout << "solve: mode=freq f=" << f << " Hz variant=" << variant.label()
              << " dofs=" << setup.reduced.num_dofs << " |D| min=" << dmin << " max=" << dmax
              << " iterations=" << iterations << " residual=" << rel
              << (rec.block2_defined ? "" : " (insulator potentials undefined at omega = 0)") << "\n";

    if (!opt.vtk_path.empty()) write_field_vtk(opt.vtk_path, setup.problem.mesh, setup.problem.materials, phi_nodes);
    return 0;
}

int run_solve_transient(const FieldSetup& setup, const SolveOptions& opt) {
    const double f = opt.freq_hz.value_or(setup.cfg.frequency_hz);
    const double omega = 2.0 * std::numbers::pi * f;
    const double dt = opt.dt.value_or(1.0 / (20.0 * f));
    const double t_end = opt.t_end > 0 ? opt.t_end : 2.0 / f;
    auto variant = ScalingVariant::from_cli(opt.variant, opt.omega0);
    variant.exact_block_lu = opt.exact_blocks;
    auto w = [omega](double t) { return std::sin(omega * t); };

    TransientSolver solver(setup.blocks, variant, dt);
    auto state = solver.initial_state(0.0, w(0.0));
    const Index probe = probe_node(setup.problem.mesh, opt.probe_spec);
    const int stride = std::max(opt.stride, 1);

    auto out = make_output(opt.out_path);
    out.stream() << "t,probe_phi,max_D,min_D\n";
    char buf[160];

    int step_count = 0;
    double dmin_last = 0, dmax_last = 0;
    const int nsteps = static_cast<int>(std::ceil(t_end / dt - 1e-12));
    for (int k = 0; k < nsteps; ++k) {
        auto next = solver.step(state, w(state.t), w(state.t + dt));
        state = std::move(next);
        ++step_count;
        if (step_count % stride == 0 || k == nsteps - 1) {
            auto phi_nodes = setup.reduced.expand(solver.recover(state), w(state.t));
            auto d = displacement_field(setup.problem.mesh, setup.problem.materials, peak_field(phi_nodes));
            dmin_last = d[0];
            dmax_last = d[0];
            for (double v : d) { dmin_last = std::min(dmin_last, v); dmax_last = std::max(dmax_last, v); }
            std::snprintf(buf, sizeof buf, "%.12e,%.12e,%.12e,%.12e\n", state.t,
                          phi_nodes[static_cast<std::size_t>(probe)].real(), dmax_last, dmin_last);
            out.stream() << buf;
            if (!opt.vtk_path.empty() && opt.vtk_stride > 0 && (step_count % opt.vtk_stride == 0)) {
                std::snprintf(buf, sizeof buf, "%s_%06d.vtk", opt.vtk_path.c_str(), step_count);
                write_field_vtk(buf, setup.problem.mesh, setup.problem.materials, phi_nodes);
            }
        }
    }
    std::cout << "solve: mode=transient f=" << f << " Hz dt=" << dt << " s steps=" << step_count
              << " variant=" << variant.label() << " final |D| min=" << dmin_last
              << " max=" << dmax_last << "\n";
    if (!opt.vtk_path.empty() && opt.vtk_stride == 0) {
        auto phi_nodes = setup.reduced.expand(solver.recover(state), w(state.t));
        write_field_vtk(opt.vtk_path + "_final.vtk", setup.problem.mesh, setup.problem.materials, phi_nodes);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"conditioning toolkit for resistive-capacitive circuit and "
                 "electroquasistatic field systems"};
    app.require_subcommand(1);

    // ---- circuit-sweep ----
    auto* circuit_cmd = app.add_subcommand("circuit-sweep", "closed-form conditioning of the RC benchmark");
    double resistance = 1.0, capacitance = 1e-12;
    SweepSpec circuit_spec;
    circuit_spec.min = 1e-20;
    circuit_spec.max = 1e40;
    circuit_spec.points = 61;
    std::string circuit_norm = "1", circuit_out;
    circuit_cmd->add_option("-R,--resistance", resistance, "resistance in Ohm");
    circuit_cmd->add_option("-C,--capacitance", capacitance, "capacitance in Farad");
    circuit_cmd->add_option("--fmin", circuit_spec.min, "lowest frequency in Hz");
    circuit_cmd->add_option("--fmax", circuit_spec.max, "highest frequency in Hz");
    circuit_cmd->add_option("--points", circuit_spec.points, "number of log-spaced grid points");
    circuit_cmd->add_option("--norm", circuit_norm, "condition-number norm: 1 or inf");
    circuit_cmd->add_flag("--include-static", circuit_spec.include_static, "add the f = 0 point");
    circuit_cmd->add_option("--out", circuit_out, "CSV output path (default stdout)");

    // ---- field-sweep ----
    auto* field_cmd = app.add_subcommand("field-sweep", "condition numbers of the field benchmark across a grid");
    ProblemOptions field_prob;
    field_prob.attach(field_cmd);
    std::string axis = "dt";
    SweepSpec field_spec;
    field_spec.min = 1e-10;
    field_spec.max = 1e10;
    field_spec.points = 41;
    std::vector<std::string> variant_names = {"orig", "i", "ii", "iii", "iv", "v", "vi"};
    std::string field_norm = "inf", field_solver = "lu", field_out;
    bool field_ilu = false, field_exact_blocks = false;
    double omega0 = 0.0;
    field_cmd->add_option("--axis", axis, "sweep axis: dt or freq");
    field_cmd->add_option("--min", field_spec.min, "grid minimum (s or Hz)");
    field_cmd->add_option("--max", field_spec.max, "grid maximum (s or Hz)");
    field_cmd->add_option("--points", field_spec.points, "number of log-spaced grid points");
    field_cmd->add_option("--variant", variant_names, "variants: orig,i,ii,iii,iv,v,vi,jacobi-l,jacobi-s")
        ->delimiter(',');
    field_cmd->add_option("--norm", field_norm, "condition-number norm: 1 or inf");
    field_cmd->add_option("--solver", field_solver, "lu or bicgstab (adds iteration columns)");
    field_cmd->add_flag("--ilu", field_ilu, "precondition bicgstab with ILU(0)");
    field_cmd->add_flag("--exact-blocks", field_exact_blocks, "apply block preconditioners by exact LU");
    field_cmd->add_option("--omega0", omega0, "fixed frequency (rad/s) of variant vi");
    field_cmd->add_flag("--include-static", field_spec.include_static,
                        "add the static point (omega = 0 / dt = infinity)");
    field_cmd->add_option("--out", field_out, "CSV output path (default stdout)");

    // ---- solve ----
    auto* solve_cmd = app.add_subcommand("solve", "solve the field benchmark and export phi and |D|");
    ProblemOptions solve_prob;
    solve_prob.attach(solve_cmd);
    SolveOptions sopt;
    int sample_stride = 1;
    double freq_in = 0.0, dt_in = 0.0;
    solve_cmd->add_option("--mode", sopt.mode, "freq or transient");
    solve_cmd->add_option("--variant", sopt.variant, "scaling variant");
    solve_cmd->add_option("--solver", sopt.solver, "lu or bicgstab");
    solve_cmd->add_flag("--ilu", sopt.use_ilu, "precondition bicgstab with ILU(0)");
    solve_cmd->add_flag("--exact-blocks", sopt.exact_blocks, "apply block preconditioners by exact LU");
    solve_cmd->add_option("--omega0", sopt.omega0, "fixed frequency (rad/s) of variant vi");
    solve_cmd->add_option("--tol", sopt.tol, "bicgstab relative tolerance");
    solve_cmd->add_option("--maxit", sopt.maxit, "bicgstab iteration cap");
    auto* freq_opt = solve_cmd->add_option("--freq", freq_in, "excitation frequency in Hz (overrides config)");
    auto* dt_opt = solve_cmd->add_option("--dt", dt_in, "time step in s (transient)");
    solve_cmd->add_option("--t-end", sopt.t_end, "end time in s (transient)");
    solve_cmd->add_option("--stride", sample_stride, "sampling stride in steps (transient)");
    solve_cmd->add_option("--vtk", sopt.vtk_path, "VTK output path (freq) or prefix (transient)");
    solve_cmd->add_option("--vtk-stride", sopt.vtk_stride, "write a VTK snapshot every N steps");
    solve_cmd->add_option("--probe", sopt.probe_spec, "probe point as 'x y z' (default: domain center)");
    solve_cmd->add_option("--out", sopt.out_path, "time-series CSV path (transient; default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (circuit_cmd->parsed()) {
            circuit_spec.norm = parse_norm(circuit_norm);
            return run_circuit_sweep(resistance, capacitance, circuit_spec, circuit_out);
        }
        if (field_cmd->parsed()) {
            if (axis == "dt") field_spec.axis = SweepSpec::Axis::dt_s;
            else if (axis == "freq") field_spec.axis = SweepSpec::Axis::frequency_hz;
            else throw CLI::ValidationError("--axis must be dt or freq");
            field_spec.norm = parse_norm(field_norm);
            if (field_solver == "bicgstab") field_spec.solver = SweepSpec::Solver::bicgstab_ilu;
            else if (field_solver != "lu") throw CLI::ValidationError("--solver must be lu or bicgstab");
            field_spec.variants = parse_variants(variant_names, omega0, field_exact_blocks);
            (void)field_ilu;  // bicgstab iteration columns always use ILU(0)
            return run_field_sweep(field_prob, field_spec, field_out);
        }
        if (solve_cmd->parsed()) {
            if (freq_opt->count() > 0) sopt.freq_hz = freq_in;
            if (dt_opt->count() > 0) sopt.dt = dt_in;
            sopt.stride = sample_stride;
            auto setup = build_field(solve_prob);
            if (sopt.mode == "freq") return run_solve_freq(setup, sopt);
            if (sopt.mode == "transient") return run_solve_transient(setup, sopt);
            throw CLI::ValidationError("--mode must be freq or transient");
        }
    } catch (const IncompatibleSourceError& e) {
        std::cerr << "error: " << e.what()
                  << "\nhint: remove impressed currents in the insulator or run at omega > 0\n";
        return 2;
    } catch (const SingularMatrixError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
