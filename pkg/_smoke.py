"""Dev smoke checks for the core numerics (not part of the deliverable)."""
import numpy as np
from spdelab import *
from spdelab.bspde import LinearBspdeProblem, solve_backward_fd, solve_closed_form, feynman_kac_mc
from spdelab.coeffs import CoefficientField
from spdelab.grids import WeightedGrid
from spdelab.operators import assemble_operator, assemble_adjoint, adjoint_residual
from spdelab.kernels import GaussianKernelParams, gaussian_density, build_two_phase_kernel

rng = np.random.default_rng(0)

def bump(c, w):
    return lambda x: np.exp(-((x - c) / w) ** 2)

print("== duality: smooth generic field ==")
fld = CoefficientField.smooth(
    rho=lambda x: 1.0 + 0.2 * np.sin(x / 5.0),
    a=lambda x: 1.0 + 0.3 * np.sin(x / 2.0),
    b=lambda x: 0.2 * np.cos(x / 3.0),
)
for n in (201, 401, 801):
    g = WeightedGrid.build(-10, 10, n, fld)
    A = assemble_operator(fld, g)
    As = assemble_adjoint(fld, g)
    phi = bump(-1.0, 1.2)(g.nodes)
    psi = bump(0.7, 1.0)(g.nodes)
    r = adjoint_residual(A, As, g, phi, psi)
    nrm = weighted_norm(phi, g) * weighted_norm(psi, g)
    print(f"  n={n}: residual={r:.3e}  rel={r/nrm:.3e}")

print("== duality: piecewise generic (rho jump too) ==")
fld2 = CoefficientField.piecewise(rho=(1.3, 0.8), a=(1.0, 2.5), b=(0.3, -0.2))
for n in (201, 401, 801):
    g = WeightedGrid.build(-10, 10, n, fld2)
    A = assemble_operator(fld2, g)
    As = assemble_adjoint(fld2, g)
    phi = bump(-0.4, 1.0)(g.nodes)
    psi = bump(0.5, 1.3)(g.nodes)
    r = adjoint_residual(A, As, g, phi, psi)
    nrm = weighted_norm(phi, g) * weighted_norm(psi, g)
    print(f"  n={n}: residual={r:.3e}  rel={r/nrm:.3e}")

print("== closed form vs FD (criterion-4 config) ==")
fldc = CoefficientField.constant(rho=1.0, a=1.0, b=0.5)   # sigma = 1
prob = LinearBspdeProblem(field=fldc, c=-0.2, gamma=0.3, f=None,
                          g=bump(0.0, 1.0), T=1.0)
g801 = WeightedGrid.build(-10, 10, 801, fldc)
sol = solve_backward_fd(prob, g801, 400)
uc, qc = solve_closed_form(prob, 0.0, g801.nodes)
err = np.max(np.abs(sol.u[0] - uc))
print(f"  sup err at t=0: {err:.3e}")
g1601 = WeightedGrid.build(-10, 10, 1601, fldc)
sol2 = solve_backward_fd(prob, g1601, 800)
uc2, _ = solve_closed_form(prob, 0.0, g1601.nodes)
err2 = np.max(np.abs(sol2.u[0] - uc2))
print(f"  refined: {err2:.3e}  ratio={err/err2:.2f}")

print("== g(y)=y exact identity ==")
prob_lin = LinearBspdeProblem(field=fldc, c=-0.2, gamma=0.3, f=None,
                              g=lambda y: y, T=1.0)
u, q = solve_closed_form(prob_lin, 0.25, 0.5)
sigma, b0, beta = prob_lin.constant_parameters()
tau = 0.75
ue = np.exp(-0.2 * tau) * (0.5 - beta * tau)
qe = sigma * np.exp(-0.2 * tau)
print(f"  u={u:.10f} vs {ue:.10f}  diff={abs(u-ue):.2e}")
print(f"  q={q:.10f} vs {qe:.10f}  diff={abs(q-qe):.2e}")

print("== kernel degenerate vs gaussian ==")
fldd = CoefficientField.piecewise(rho=(1, 1), a=(1.0, 1.0), b=(0.3, 0.3))
gk = WeightedGrid.build(-10, 10, 801, fldd)
ker = build_two_phase_kernel(fldd, gamma=0.2, tau=0.5, grid=gk, n_steps=200)
params = GaussianKernelParams.from_field(fldd, gamma=0.2)
dens = gaussian_density(params, 0.5, gk.nodes[:, None], gk.nodes[None, :])
print(f"  sup |kernel - gaussian| = {np.max(np.abs(ker.p - dens)):.3e}")
print(f"  max clipped mass = {ker.clipped_mass.max():.3e}")
mass = ker.p.T @ gk.quad_dx  # column masses
inner = slice(100, 701)
print(f"  interior column mass err = {np.max(np.abs(mass[inner]-1)):.3e}")

print("== MC piecewise: transformed vs naive vs FD ==")
fldp = CoefficientField.piecewise(rho=(1, 1), a=(1.0, 3.0), b=(0.2, -0.1))
probp = LinearBspdeProblem(field=fldp, c=0.0, gamma=0.0, f=None,
                           g=bump(0.5, 1.0), T=1.0)
gp = WeightedGrid.build(-10, 10, 801, fldp)
solp = solve_backward_fd(probp, gp, 400)
for x0 in (-0.5, 0.5):
    j = int(round((x0 + 10) / gp.h))
    fd = solp.u[0][j]
    mc_t, se_t = feynman_kac_mc(probp, 0.0, x0, 100000, 2000, seed=42)
    mc_n, se_n = feynman_kac_mc(probp, 0.0, x0, 100000, 2000, seed=42,
                                interface_scheme="naive")
    print(f"  x={x0}: FD={fd:.5f} MC_t={mc_t:.5f}±{se_t:.5f} (diff {abs(mc_t-fd):.5f})"
          f"  MC_naive={mc_n:.5f} (diff {abs(mc_n-fd):.5f})")
