"""Reference solver for the 2D heat problem on the unit square.

Solves u_t = 0.01 (u_xx + u_yy) with zero-Neumann boundaries and the sine
initial field, producing the training dataset and the t=1 evaluation grid
used to score trained networks.  The scheme is Crank-Nicolson in time with
the second-order 5-point Laplacian and ghost-node mirroring at the
boundaries.  That spatial operator is diagonalized exactly by the type-I
cosine basis, so each time step is applied as an exact per-mode update in
DCT-I space; this is the same linear-algebra update a sparse solve would
produce, without the solver cost.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.fft import dctn, idctn

DIFFUSIVITY = 0.01
SNAPSHOT_DT = 0.05

__all__ = [
    "DIFFUSIVITY",
    "HeatField",
    "initial_condition",
    "solve_heat",
    "discrete_mean",
    "sample_training_data",
    "reference_at_t1",
    "write_rows_csv",
    "read_rows_csv",
]


def initial_condition(x, y):
    """Initial temperature 0.5 [sin(4 pi x) + sin(4 pi y)]."""
    return 0.5 * (np.sin(4.0 * np.pi * x) + np.sin(4.0 * np.pi * y))


@dataclass
class HeatField:
    """Snapshots of the solution on a uniform grid.

    ``values[k, i, j]`` is u(times[k], coords[i], coords[j]).
    """

    times: np.ndarray
    coords: np.ndarray
    values: np.ndarray


def solve_heat(fine_n=101, fine_dt=5e-4, ic=None) -> HeatField:
    """March the Crank-Nicolson scheme and return 0.05-spaced snapshots.

    Parameters
    ----------
    fine_n : grid nodes per side (>= 64 for production datasets)
    fine_dt : time step (<= 1e-3); must divide the 0.05 snapshot spacing
    ic : optional initial condition callable f(x, y); defaults to the sine
        field of the reference problem

    Raises
    ------
    ValueError on resolution/step violations; RuntimeError if the field
    turns non-finite (instability signal).
    """
    fine_n = int(fine_n)
    if fine_n < 64:
        raise ValueError("fine_n must be at least 64")
    if not (0.0 < fine_dt <= 1e-3):
        raise ValueError("fine_dt must lie in (0, 1e-3]")
    steps_per_snap = SNAPSHOT_DT / fine_dt
    if abs(steps_per_snap - round(steps_per_snap)) > 1e-9:
        raise ValueError("fine_dt must divide the 0.05 snapshot spacing")
    steps_per_snap = int(round(steps_per_snap))
    if ic is None:
        ic = initial_condition

    coords = np.linspace(0.0, 1.0, fine_n)
    h = coords[1] - coords[0]
    xg, yg = np.meshgrid(coords, coords, indexing="ij")
    u0 = np.asarray(ic(xg, yg), dtype=float)

    # per-mode eigenvalues of the mirrored-ghost 5-point Laplacian
    lam = 2.0 * (np.cos(np.pi * np.arange(fine_n) / (fine_n - 1)) - 1.0) / h**2
    sig = 0.5 * fine_dt * DIFFUSIVITY * (lam[:, None] + lam[None, :])
    mult = (1.0 + sig) / (1.0 - sig)

    times = [0.0]
    snaps = [u0.copy()]
    u_hat = dctn(u0, type=1)
    for k in range(1, 21):
        for _ in range(steps_per_snap):
            u_hat *= mult
        u = idctn(u_hat, type=1)
        if not np.all(np.isfinite(u)):
            raise RuntimeError("heat solve produced non-finite values (unstable)")
        times.append(k * SNAPSHOT_DT)
        snaps.append(u)
    return HeatField(
        times=np.array(times), coords=coords, values=np.stack(snaps, axis=0)
    )


def discrete_mean(values2d) -> float:
    """Trapezoid-weighted spatial mean, the conserved functional of the
    zero-flux scheme."""
    values2d = np.asarray(values2d, dtype=float)
    n = values2d.shape[0]
    w = np.full(n, 1.0 / (n - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return float(w @ values2d @ w)


def _subsample_indices(fine_n, coarse_n):
    stride, rem = divmod(fine_n - 1, coarse_n - 1)
    if rem != 0:
        raise ValueError(
            f"grid with {fine_n} nodes cannot be subsampled to {coarse_n} exactly"
        )
    return np.arange(coarse_n) * stride


def sample_training_data(field: HeatField) -> np.ndarray:
    """Sample the 21 x 6 x 6 training lattice; returns rows (t, x, y, T).

    Rows are ordered time-major, then x, then y.  The fine grid must align
    with the 0.2-spaced lattice (fine_n - 1 divisible by 5).
    """
    if len(field.times) != 21:
        raise ValueError("field must hold the 21 snapshot times")
    idx = _subsample_indices(field.coords.size, 6)
    rows = []
    for k, t in enumerate(field.times):
        for i in idx:
            for j in idx:
                rows.append(
                    (t, field.coords[i], field.coords[j], field.values[k, i, j])
                )
    return np.array(rows)


def reference_at_t1(field: HeatField) -> np.ndarray:
    """The t=1 snapshot on the 26 x 26 scoring lattice (0.04 spacing)."""
    idx = _subsample_indices(field.coords.size, 26)
    return field.values[-1][np.ix_(idx, idx)].copy()


def write_rows_csv(path, rows, with_target=True):
    """Write (t, x, y[, T]) rows; the standard dataset interchange format."""
    rows = np.asarray(rows, dtype=float)
    header = ["t", "x", "y", "T"] if with_target else ["t", "x", "y"]
    if rows.shape[1] != len(header):
        raise ValueError(f"expected {len(header)} columns, got {rows.shape[1]}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) for v in row])


def read_rows_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    data = np.array(rows, dtype=float)
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ValueError(f"malformed dataset file {path}")
    return data
