#include "uscatter/uscatter.h"

#include <cstring>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "uscatter/dynamics.hpp"
#include "uscatter/entropy.hpp"
#include "uscatter/error.hpp"
#include "uscatter/experiment.hpp"
#include "uscatter/generator.hpp"
#include "uscatter/kernel.hpp"
#include "uscatter/padic.hpp"
#include "uscatter/spectral.hpp"

struct us_grid {
  uscatter::Grid grid;
};
struct us_kernel {
  uscatter::KernelSpec spec;
};
struct us_generator {
  uscatter::Generator gen;
};

namespace {

using namespace uscatter;

thread_local std::string last_error;

template <class Fn>
us_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return US_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return static_cast<us_status>(e.code());
  } catch (const std::exception& e) {
    last_error = e.what();
    return US_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown failure";
    return US_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw Error(ErrorCode::InvalidArgument, std::string(what) + " is null");
}

LatticeFunction lattice(const Grid& grid, const double* values) {
  require(values, "values");
  return LatticeFunction(grid, std::vector<double>(values, values + grid.cell_count()));
}

Matrix square(const Grid& grid, const double* entries) {
  require(entries, "entries");
  const std::size_t n = grid.cell_count();
  Matrix m(n, n);
  std::memcpy(m.data().data(), entries, n * n * sizeof(double));
  return m;
}

void copy_out(const LatticeFunction& f, double* out) {
  require(out, "out");
  std::memcpy(out, f.values().data(), f.size() * sizeof(double));
}

EntropyFn entropy(us_entropy h, double param) {
  switch (h) {
    case US_H_LINEAR: return EntropyFn::linear();
    case US_H_ABS: return EntropyFn::abs();
    case US_H_SQUARE: return EntropyFn::square();
    case US_H_POS_PART_SQ: return EntropyFn::pos_part_sq(param);
    case US_H_NEG_PART_SQ: return EntropyFn::neg_part_sq(param);
    case US_H_SMOOTHED_SIGN: return EntropyFn::smoothed_sign(param);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown entropy kind");
}

template <class T>
void emit(T** out, T* value) {
  if (!out) {
    delete value;
    throw Error(ErrorCode::InvalidArgument, "out is null");
  }
  *out = value;
}

}  // namespace

extern "C" {

const char* us_last_error(void) { return last_error.c_str(); }

const char* us_status_name(us_status status) {
  if (status == US_OK) return "Ok";
  if (status == US_ERR_INTERNAL) return "Internal";
  return error_code_name(static_cast<ErrorCode>(status));
}

const char* us_version(void) { return "0.1.0"; }

us_status us_grid_new(int p, int n, int outer_level, int inner_level, us_grid** out) {
  return guarded([&] {
    emit(out, new us_grid{build_grid(p, n, outer_level, inner_level, max_cells_from_env())});
  });
}

void us_grid_free(us_grid* grid) { delete grid; }

size_t us_grid_cell_count(const us_grid* grid) { return grid ? grid->grid.cell_count() : 0; }

double us_grid_cell_measure(const us_grid* grid) { return grid ? grid->grid.cell_measure() : 0.0; }

us_status us_grid_cell_norm(const us_grid* grid, size_t index, double* out) {
  return guarded([&] {
    require(grid, "grid");
    require(out, "out");
    *out = cell_norm(grid->grid, cell_coords(grid->grid, index));
  });
}

us_status us_grid_integrate(const us_grid* grid, const double* values, double* out) {
  return guarded([&] {
    require(grid, "grid");
    require(out, "out");
    *out = integrate(grid->grid, lattice(grid->grid, values));
  });
}

us_status us_kernel_constant(double value, us_kernel** out) {
  return guarded([&] { emit(out, new us_kernel{KernelSpec::constant(value)}); });
}

us_status us_kernel_radial_power(double scale, double exponent, double diagonal, us_kernel** out) {
  return guarded([&] { emit(out, new us_kernel{KernelSpec::radial(power_profile(scale, exponent), diagonal, "power")}); });
}

us_status us_kernel_radial_indicator(double scale, double radius, us_kernel** out) {
  return guarded(
      [&] { emit(out, new us_kernel{KernelSpec::radial(indicator_profile(scale, radius), std::nullopt, "indicator")}); });
}

us_status us_kernel_table(const us_grid* grid, const double* entries, us_kernel** out) {
  return guarded([&] {
    require(grid, "grid");
    emit(out, new us_kernel{KernelSpec::table(square(grid->grid, entries))});
  });
}

us_status us_kernel_table_csv(const us_grid* grid, const char* path, us_kernel** out) {
  return guarded([&] {
    require(grid, "grid");
    require(path, "path");
    emit(out, new us_kernel{load_kernel_table_csv(path, grid->grid)});
  });
}

us_status us_kernel_projection(const us_grid* grid, const double* weight, const double* steady, double scale,
                               us_kernel** out) {
  return guarded([&] {
    require(grid, "grid");
    emit(out, new us_kernel{KernelSpec::projection(lattice(grid->grid, weight), lattice(grid->grid, steady), scale)});
  });
}

us_status us_kernel_symmetric(const us_grid* grid, const double* table, const double* steady, us_kernel** out) {
  return guarded([&] {
    require(grid, "grid");
    emit(out, new us_kernel{KernelSpec::symmetric(square(grid->grid, table), lattice(grid->grid, steady))});
  });
}

us_status us_kernel_detailed_balance(const us_grid* grid, const double* table, const double* steady,
                                     us_kernel** out) {
  return guarded([&] {
    require(grid, "grid");
    emit(out, new us_kernel{KernelSpec::detailed_balance(square(grid->grid, table), lattice(grid->grid, steady))});
  });
}

void us_kernel_free(us_kernel* kernel) { delete kernel; }

us_status us_kernel_matrix(const us_kernel* kernel, const us_grid* grid, double t, double* out) {
  return guarded([&] {
    require(kernel, "kernel");
    require(grid, "grid");
    require(out, "out");
    const KernelMatrix k = build_kernel_matrix(kernel->spec, grid->grid, t);
    std::memcpy(out, k.entries.data().data(), k.entries.rows() * k.entries.cols() * sizeof(double));
  });
}

us_status us_generator_new(const us_kernel* kernel, const us_grid* grid, us_k_mode mode, const double* analytic_k,
                           us_generator** out) {
  return guarded([&] {
    require(kernel, "kernel");
    require(grid, "grid");
    std::optional<LatticeFunction> k;
    if (analytic_k) k = lattice(grid->grid, analytic_k);
    const KMode m = mode == US_K_ANALYTIC ? KMode::Analytic : KMode::ColumnSum;
    emit(out, new us_generator{assemble(build_kernel_matrix(kernel->spec, grid->grid), m, k)});
  });
}

us_status us_generator_rescaled(const us_kernel* kernel, const us_grid* grid, int level, us_generator** out) {
  return guarded([&] {
    require(kernel, "kernel");
    require(grid, "grid");
    emit(out, new us_generator{rescale(kernel->spec, grid->grid, level)});
  });
}

void us_generator_free(us_generator* gen) { delete gen; }

size_t us_generator_size(const us_generator* gen) { return gen ? gen->gen.size() : 0; }

double us_generator_max_loss(const us_generator* gen) { return gen ? gen->gen.max_loss() : 0.0; }

us_status us_generator_apply(const us_generator* gen, const double* f, double* out) {
  return guarded([&] {
    require(gen, "generator");
    copy_out(apply(gen->gen, lattice(gen->gen.grid(), f)), out);
  });
}

us_status us_generator_apply_dual(const us_generator* gen, const double* phi, double* out) {
  return guarded([&] {
    require(gen, "generator");
    copy_out(apply_dual(gen->gen, lattice(gen->gen.grid(), phi)), out);
  });
}

us_status us_step_rk4(const us_generator* gen, const double* f, double dt, double* out) {
  return guarded([&] {
    require(gen, "generator");
    copy_out(step_rk4(gen->gen, lattice(gen->gen.grid(), f), dt), out);
  });
}

us_status us_expm_apply(const us_generator* gen, const double* f, double t, double tolerance, double* out) {
  return guarded([&] {
    require(gen, "generator");
    copy_out(expm_apply(gen->gen, lattice(gen->gen.grid(), f), t, tolerance), out);
  });
}

us_status us_picard(const us_generator* gen, const double* f, double t, int iterations, double* out) {
  return guarded([&] {
    require(gen, "generator");
    copy_out(picard_iterate(gen->gen, lattice(gen->gen.grid(), f), t, iterations), out);
  });
}

us_status us_evolve_rk4(const us_generator* gen, const double* f, double dt, double t_end, double* out) {
  return guarded([&] {
    require(gen, "generator");
    IntegratorSpec integ;
    integ.dt = dt;
    const Trajectory traj = evolve(gen->gen, lattice(gen->gen.grid(), f), integ, t_end, 1 << 30);
    copy_out(traj.states.back(), out);
  });
}

us_status us_steady_pair(const us_generator* gen, double* steady, double* dual) {
  return guarded([&] {
    require(gen, "generator");
    const SteadyPair pair = solve_steady_pair(gen->gen);
    copy_out(pair.steady, steady);
    copy_out(pair.dual, dual);
  });
}

us_status us_alpha(const us_generator* gen, const double* steady, const double* dual, double* alpha) {
  return guarded([&] {
    require(gen, "generator");
    require(alpha, "alpha");
    const Grid& g = gen->gen.grid();
    *alpha = estimate_alpha(gen->gen, lattice(g, steady), lattice(g, dual)).alpha;
  });
}

us_status us_relative_entropy(const us_generator* gen, const double* dual, const double* steady, const double* n,
                              us_entropy h, double param, double* out) {
  return guarded([&] {
    require(gen, "generator");
    require(out, "out");
    const Grid& g = gen->gen.grid();
    *out = relative_entropy(lattice(g, dual), lattice(g, steady), lattice(g, n), entropy(h, param));
  });
}

us_status us_gre_dissipation(const us_generator* gen, const double* dual, const double* steady, const double* n,
                             us_entropy h, double param, double* out) {
  return guarded([&] {
    require(gen, "generator");
    require(out, "out");
    const Grid& g = gen->gen.grid();
    *out = gre_dissipation_rhs(gen->gen, lattice(g, dual), lattice(g, steady), lattice(g, n), entropy(h, param));
  });
}

us_status us_fit_decay_rate(const double* times, const double* values, size_t count, double* out) {
  return guarded([&] {
    require(times, "times");
    require(values, "values");
    require(out, "out");
    *out = fit_decay_rate(std::span<const double>(times, count), std::span<const double>(values, count));
  });
}

int us_run_experiment(const char* subcommand, const char* config_path, const char* out_dir) {
  if (!subcommand || !config_path) {
    last_error = "InvalidArgument: subcommand and config path are required";
    std::cerr << last_error << '\n';
    return kExitError;
  }
  return run_experiment(subcommand, config_path, out_dir ? out_dir : ".", std::cout, std::cerr);
}

}  // extern "C"
