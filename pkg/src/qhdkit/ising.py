"""Analog-implementation pipeline: Hamming and radix-2 encodings of box QPs
into Ising/QUBO coefficient sets, time-energy rescaling, sample decoding, the
relaxed grid reference evolution, and a dense transverse-field Ising
simulator used as a correctness oracle for the subspace encodings.

Bit conventions (fixed): computational basis states are indexed by integers
whose binary digits give the qubit values with qubit 0 as the most
significant bit; variable p of a d-variable problem owns the contiguous
qubit block [p*b, (p+1)*b). A sample bitstring is written in the same order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .dynamics import Schedule, Trajectory
from .errors import BlowupError, ResourceError, StabilityError
from .mesh import DIRICHLET, Mesh, WaveFunction, success_mask
from .objectives import QpInstance, qp_objective

#: dense 2^n feasibility cap for oracle-side constructions
DENSE_QUBITS_CAP = 14

#: grid-size cap for the relaxed reference evolution
RELAXED_GRID_CAP = 100_000


@dataclass(frozen=True)
class IsingModel:
    """E(z) = sum_j h_j z_j + sum_{j>k} J_{j,k} z_j z_k + offset, z in {-1,1}.

    J keys are strictly lower-triangular pairs (j, k) with j > k.
    """

    n: int
    h: np.ndarray
    J: dict
    offset: float = 0.0

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float).reshape(-1)
        if h.size != self.n:
            raise ValueError("h has wrong length")
        if not np.all(np.isfinite(h)) or not np.isfinite(self.offset):
            raise ValueError("coefficients must be finite")
        for (j, k), v in self.J.items():
            if not (0 <= k < j < self.n):
                raise ValueError(f"J key {(j, k)} is not lower-triangular")
            if not np.isfinite(v):
                raise ValueError("coefficients must be finite")
        object.__setattr__(self, "h", h)


@dataclass(frozen=True)
class QuboModel:
    """E(x) = sum_j q_j x_j + sum_{j<k} q_{j,k} x_j x_k + offset, x in {0,1}.

    Quadratic keys are strictly upper-triangular pairs (j, k) with j < k.
    """

    n: int
    linear: np.ndarray
    quadratic: dict
    offset: float = 0.0

    def __post_init__(self):
        lin = np.asarray(self.linear, dtype=float).reshape(-1)
        if lin.size != self.n:
            raise ValueError("linear has wrong length")
        if not np.all(np.isfinite(lin)) or not np.isfinite(self.offset):
            raise ValueError("coefficients must be finite")
        for (j, k), v in self.quadratic.items():
            if not (0 <= j < k < self.n):
                raise ValueError(
                    f"quadratic key {(j, k)} is not upper-triangular")
            if not np.isfinite(v):
                raise ValueError("coefficients must be finite")
        object.__setattr__(self, "linear", lin)


@dataclass(frozen=True)
class PrecisionLayout:
    """How a d-variable point maps to bits: x_p = precision . bits of block p.

    The precision entries sum to 1, which keeps every decodable value inside
    the unit box. The Hamming layout uses the uniform vector (value = block
    Hamming weight / bits); the radix-2 layout uses the sum-to-one binary
    weights (2^-(b-1), 2^-(b-1), 2^-(b-2), ..., 1/2).
    """

    dim: int
    bits_per_var: int
    precision: np.ndarray
    encoding: str

    def __post_init__(self):
        p = np.asarray(self.precision, dtype=float).reshape(-1)
        if p.size != self.bits_per_var:
            raise ValueError("precision vector has wrong length")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("precision entries must sum to 1")
        if self.encoding not in ("hamming", "radix2"):
            raise ValueError(f"unknown encoding {self.encoding!r}")
        object.__setattr__(self, "precision", p)

    @property
    def n(self) -> int:
        return self.dim * self.bits_per_var

    @staticmethod
    def hamming(dim: int, r: int) -> "PrecisionLayout":
        return PrecisionLayout(dim, r, np.full(r, 1.0 / r), "hamming")

    @staticmethod
    def radix2(dim: int, bits: int) -> "PrecisionLayout":
        if bits == 1:
            p = np.array([1.0])
        else:
            p = np.array([2.0 ** -(bits - 1)]
                         + [2.0 ** -(bits - i) for i in range(1, bits)])
        return PrecisionLayout(dim, bits, p, "radix2")


@dataclass(frozen=True)
class AnnealEnvelope:
    """Machine control functions on physical time plus the time dilation.

    ``a_over_h(t)`` and ``b_over_h(t)`` are the transverse-field and problem
    envelopes in frequency units; the emulated evolution reaches effective
    time ``time_dilation * t_f`` after physical duration ``t_f`` seconds.
    """

    time_dilation: float
    t_f: float
    a_over_h: object
    b_over_h: object

    def __post_init__(self):
        if self.time_dilation <= 0 or self.t_f <= 0:
            raise ValueError("time dilation and duration must be positive")

    @property
    def effective_time(self) -> float:
        return self.time_dilation * self.t_f


# ---------------------------------------------------------------------------
# Bit bookkeeping
# ---------------------------------------------------------------------------

def bit_table(n: int) -> np.ndarray:
    """(2^n, n) array of bits, qubit 0 in column 0 (most significant)."""
    idx = np.arange(2 ** n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.int8)


def block_weights(n: int, dim: int) -> np.ndarray:
    """(2^n, dim) Hamming weights of each variable's qubit block."""
    if n % dim != 0:
        raise ValueError("qubit count is not divisible by variable count")
    b = n // dim
    bits = bit_table(n)
    return np.stack([bits[:, p * b:(p + 1) * b].sum(axis=1)
                     for p in range(dim)], axis=1)


# ---------------------------------------------------------------------------
# Encodings
# ---------------------------------------------------------------------------

def relaxed_adjacency(r: int, d: int) -> sp.csr_matrix:
    """Weighted tridiagonal kinetic coupling extended by Kronecker sum.

    The per-axis entries are sqrt((j+1)(r-j)/r) between levels j and j+1;
    this is exactly the Hamming-subspace restriction of the transverse-field
    sum over r qubits scaled by 1/sqrt(r), so the subspace identities hold
    with zero defect (bit-flip symmetry forces the j <-> r-1-j symmetric
    profile).
    """
    if r < 1:
        raise ValueError("resolution must be >= 1")
    j = np.arange(r, dtype=float)
    w = np.sqrt((j + 1.0) * (r - j) / r)
    a1 = sp.diags([w, w], offsets=[1, -1], format="csr")
    eye = sp.identity(r + 1, format="csr")
    total = None
    for k in range(d):
        term = None
        for ax in range(d):
            block = a1 if ax == k else eye
            term = block if term is None else sp.kron(term, block, format="csr")
        total = term if total is None else total + term
    return total.tocsr()


def hamming_isometry(r: int, d: int) -> np.ndarray:
    """Column-orthonormal map from grid basis |j_1...j_d> to the tensor
    product of Hamming states over d blocks of r qubits (dense, dr <= 14)."""
    n = d * r
    if n > DENSE_QUBITS_CAP:
        raise ResourceError(
            f"dense isometry for {n} qubits exceeds the cap of "
            f"{DENSE_QUBITS_CAP}")
    weights = bit_table(r).sum(axis=1)
    v1 = np.zeros((2 ** r, r + 1))
    for j in range(r + 1):
        col = (weights == j)
        v1[col, j] = 1.0 / np.sqrt(math.comb(r, j))
    out = v1
    for _ in range(d - 1):
        out = np.kron(out, v1)
    return out


def hamming_encode_qp(qp: QpInstance, r: int) -> IsingModel:
    """Ising coefficients whose Hamming-subspace restriction is the grid
    discretization of the QP objective: variable p owns qubits
    p*r..(p+1)*r-1, with

        h_j = -[(sum_q Q_{p,q}) + 2 b_p] / (4 r)
        J_{j,k} = Q_{p,q} / (4 r^2)
        offset = (1/8)(1 + 1/r) sum_p Q_{p,p}
                 + (1/4) sum_{p>q} Q_{p,q} + (1/2) sum_p b_p.
    """
    if r < 1:
        raise ValueError("resolution must be >= 1")
    d = qp.dim
    Q = qp.Q.toarray()
    n = d * r
    row_sums = Q.sum(axis=1)
    h = np.zeros(n)
    for p in range(d):
        h[p * r:(p + 1) * r] = -(row_sums[p] + 2.0 * qp.b[p]) / (4.0 * r)
    J = {}
    for p in range(d):
        if Q[p, p] != 0.0:
            val = Q[p, p] / (4.0 * r * r)
            for j in range(p * r, (p + 1) * r):
                for k in range(p * r, j):
                    J[(j, k)] = val
        for q in range(p):
            if Q[p, q] != 0.0:
                val = Q[p, q] / (4.0 * r * r)
                for j in range(p * r, (p + 1) * r):
                    for k in range(q * r, (q + 1) * r):
                        J[(j, k)] = val
    offset = (0.125 * (1.0 + 1.0 / r) * np.trace(Q)
              + 0.25 * np.sum(np.tril(Q, -1))
              + 0.5 * qp.b.sum())
    return IsingModel(n=n, h=h, J=J, offset=float(offset))


def qp_to_qubo(qp: QpInstance, layout: PrecisionLayout) -> QuboModel:
    """Binary expansion x = P w of the QP objective, with the squares of
    binary variables absorbed into the linear terms."""
    if layout.dim != qp.dim:
        raise ValueError("layout and instance dimensions differ")
    p = layout.precision
    P = np.kron(np.eye(qp.dim), p[None, :])          # d x (d*b)
    M = P.T @ qp.Q.toarray() @ P
    linear = 0.5 * np.diag(M) + P.T @ qp.b
    quad = {}
    nb = layout.n
    for u in range(nb):
        for v in range(u + 1, nb):
            if M[u, v] != 0.0:
                quad[(u, v)] = float(M[u, v])
    return QuboModel(n=nb, linear=linear, quadratic=quad, offset=0.0)


def qubo_to_ising(m: QuboModel) -> IsingModel:
    """Substitute x = (1 - z)/2 with offset bookkeeping."""
    h = -0.5 * m.linear.copy()
    offset = m.offset + 0.5 * m.linear.sum()
    J = {}
    for (u, v), q in m.quadratic.items():
        J[(v, u)] = q / 4.0
        h[u] -= q / 4.0
        h[v] -= q / 4.0
        offset += q / 4.0
    return IsingModel(n=m.n, h=h, J=J, offset=float(offset))


def ising_to_qubo(m: IsingModel) -> QuboModel:
    """Inverse substitution z = 1 - 2x; round-trips are exact."""
    quad = {}
    lin = -2.0 * m.h.copy()
    offset = m.offset + m.h.sum()
    for (j, k), J in m.J.items():
        quad[(k, j)] = 4.0 * J
        lin[j] -= 2.0 * J
        lin[k] -= 2.0 * J
        offset += J
    return QuboModel(n=m.n, linear=lin, quadratic=quad, offset=float(offset))


def qubo_ising_convert(m):
    """Convert between the two coefficient formats (either direction)."""
    if isinstance(m, QuboModel):
        return qubo_to_ising(m)
    if isinstance(m, IsingModel):
        return ising_to_qubo(m)
    raise TypeError("expected a QuboModel or IsingModel")


def decode_samples(bits, layout: PrecisionLayout) -> np.ndarray:
    """Map bitstrings to points in [0,1]^d, one variable per bit block."""
    out = np.empty((len(bits), layout.dim))
    b = layout.bits_per_var
    for i, s in enumerate(bits):
        if len(s) != layout.n:
            raise ValueError(
                f"bitstring {s!r} has length {len(s)}, expected {layout.n}")
        arr = np.frombuffer(s.encode(), dtype=np.uint8) - ord("0")
        out[i] = arr.reshape(layout.dim, b) @ layout.precision
    return out


def ising_energies(model: IsingModel, include_offset: bool = True) -> np.ndarray:
    """Energies of all 2^n assignments (dense oracle, n <= 14 advised)."""
    if model.n > 20:
        raise ResourceError("energy table too large")
    z = 1.0 - 2.0 * bit_table(model.n)
    e = z @ model.h
    for (j, k), v in model.J.items():
        e += v * z[:, j] * z[:, k]
    if include_offset:
        e = e + model.offset
    return e


def qubo_energies(model: QuboModel, include_offset: bool = True) -> np.ndarray:
    if model.n > 20:
        raise ResourceError("energy table too large")
    x = bit_table(model.n).astype(float)
    e = x @ model.linear
    for (u, v), q in model.quadratic.items():
        e += q * x[:, u] * x[:, v]
    if include_offset:
        e = e + model.offset
    return e


def verify_subspace_encoding(H_dense, V, H_target, tol: float) -> dict:
    """Invariance and restriction checks of a candidate subspace encoding.

    leakage = max |(I - V V^T) H V| measures how much the big operator maps
    the encoded subspace outside itself; mismatch = max |V^T H V - H_target|
    measures how far the restriction is from the target operator.
    """
    H_dense = np.asarray(H_dense, dtype=float)
    V = np.asarray(V, dtype=float)
    H_target = (H_target.toarray() if sp.issparse(H_target)
                else np.asarray(H_target, dtype=float))
    HV = H_dense @ V
    leakage = float(np.max(np.abs(HV - V @ (V.T @ HV))))
    mismatch = float(np.max(np.abs(V.T @ HV - H_target)))
    return {"leakage": leakage, "mismatch": mismatch,
            "passed": bool(leakage <= tol and mismatch <= tol)}


# ---------------------------------------------------------------------------
# Time-energy rescaling
# ---------------------------------------------------------------------------

def anneal_rescale(sched: Schedule, r: int, machine) -> AnnealEnvelope:
    """Express a descent schedule as machine envelopes on physical time.

    ``machine`` is (A0_over_h, t_f): the transverse-field value at the start
    of the anneal in Hz and the physical duration in seconds. The time
    dilation is calibrated from the start of the schedule,
    lambda = (A(0)/h) / (r^{3/2} e^{phi_0}), and the envelopes follow
    A(t)/h = lambda r^{3/2} kinetic(lambda t), B(t)/h = 2 lambda
    potential(lambda t).
    """
    a0_over_h, t_f = machine
    e_phi0 = float(sched.kinetic_coeff(0.0))
    if e_phi0 <= 0:
        raise ValueError("schedule kinetic coefficient must be positive at 0")
    lam = a0_over_h / (r ** 1.5 * e_phi0)
    kin, pot = sched.kinetic_coeff, sched.potential_coeff

    def a_over_h(t):
        return lam * r ** 1.5 * kin(lam * t)

    def b_over_h(t):
        return 2.0 * lam * pot(lam * t)

    return AnnealEnvelope(time_dilation=lam, t_f=t_f, a_over_h=a_over_h,
                          b_over_h=b_over_h)


# ---------------------------------------------------------------------------
# Reference evolutions
# ---------------------------------------------------------------------------

def binomial_state(r: int, d: int) -> WaveFunction:
    """Per-axis amplitudes sqrt(C(r, j) / 2^r): the grid image of the
    uniform superposition over d blocks of r qubits."""
    mesh = Mesh(d, r, DIRICHLET)
    axis = np.sqrt(np.array([math.comb(r, j) for j in range(r + 1)])
                   / 2.0 ** r)
    amp = axis
    for _ in range(d - 1):
        amp = np.multiply.outer(amp, axis)
    return WaveFunction(mesh, amp.reshape(-1).astype(complex))


def relaxed_qhd_evolve(qp: QpInstance, r: int, sched: Schedule, T: float,
                       dt: float, *, t0: float = 0.0, snapshot_times=(),
                       x_star=None, success_radius: float = 0.1) -> Trajectory:
    """Strang-split evolution of the relaxed grid dynamics

        i d/dt phi = [-(kin(t) r^2 / 2) A'_d + pot(t) F_d] phi

    from the per-axis binomial state. The kinetic factor applies exact
    per-axis matrix exponentials of the relaxed coupling; coefficients are
    sampled at step midpoints. The r^2 factor restores the inverse squared
    cell width of the grid Laplacian; together with the 1/sqrt(r) inside the
    relaxed coupling it is what the transverse-field envelope's r^{3/2}
    realizes on the machine side.
    """
    d = qp.dim
    mesh = Mesh(d, r, DIRICHLET)
    if mesh.size > RELAXED_GRID_CAP:
        raise ResourceError(f"grid of {mesh.size} nodes exceeds the cap")
    fvals = np.asarray(qp_objective(qp)(mesh.node_coords())).reshape(mesh.shape)

    a1 = relaxed_adjacency(r, 1).toarray()
    evals, evecs = np.linalg.eigh(a1)

    psi = binomial_state(r, d).amplitudes.reshape(mesh.shape)
    smask = (success_mask(mesh, x_star, success_radius).reshape(mesh.shape)
             if x_star is not None else None)

    n_steps = int(round((T - t0) / dt))
    snap_steps = {}
    for ts in snapshot_times:
        m = (ts - t0) / dt
        if abs(m - round(m)) > 1e-6:
            raise ValueError(f"snapshot time {ts} is not on the step grid")
        snap_steps[int(round(m))] = float(ts)

    times, efs, sps, norms = [], [], [], []
    snaps, snap_ts = [], []
    for j in range(n_steps):
        tm = t0 + (j + 0.5) * dt
        half_pot = np.exp(-0.5j * dt * sched.potential_coeff(tm) * fvals)
        kin_phase = np.exp(1j * dt * sched.kinetic_coeff(tm)
                           * (r ** 2 / 2.0) * evals)
        psi = half_pot * psi
        for ax in range(d):
            psi = np.moveaxis(
                np.tensordot(evecs * kin_phase, np.tensordot(
                    evecs.T, psi, axes=(1, ax)), axes=(1, 0)), 0, ax)
        psi = half_pot * psi
        prob = np.abs(psi) ** 2
        nrm = float(prob.sum())
        if not np.isfinite(nrm):
            raise BlowupError(f"non-finite amplitudes at step {j}", step=j)
        times.append(t0 + (j + 1) * dt)
        norms.append(nrm)
        efs.append(float(np.sum(prob * fvals)) / nrm)
        sps.append(float(np.sum(prob[smask])) / nrm
                   if smask is not None else np.nan)
        if (j + 1) in snap_steps:
            snap_ts.append(snap_steps[j + 1])
            snaps.append(WaveFunction(mesh, (psi / np.sqrt(nrm)).reshape(-1)))
    if not snap_ts or abs(snap_ts[-1] - (t0 + n_steps * dt)) > 1e-9:
        snap_ts.append(t0 + n_steps * dt)
        snaps.append(WaveFunction(mesh, (psi / np.sqrt(
            np.sum(np.abs(psi) ** 2))).reshape(-1)))
    return Trajectory(times=np.array(times),
                      observables={"Ef": np.array(efs),
                                   "success_prob": np.array(sps),
                                   "norm": np.array(norms)},
                      snapshot_times=np.array(snap_ts), snapshots=snaps)


def simulate_ising_dense(model: IsingModel, env, t_f: float, dt: float, *,
                         n_vars: int = 1):
    """Dense state-vector evolution of the transverse-field Ising machine

        H(t)/h = -(A(t)/2h) sum_j sigma_x^(j) + (B(t)/2h) (h.z + J.zz)

    from the uniform superposition, using the same Strang splitting and
    midpoint coefficient sampling as the relaxed grid engine; each factor is
    an exact unitary (single-qubit rotations and diagonal phases). The
    programmable part carries no constant offset; relative to an encoded
    reference evolution that difference is a global phase and leaves all
    probabilities unchanged.

    Returns (final_state, marginals) where marginals[k][j] is the
    probability of block-k Hamming weight j.
    """
    n = model.n
    if n > DENSE_QUBITS_CAP:
        raise ResourceError(f"{n} qubits exceed the dense cap")
    if isinstance(env, AnnealEnvelope):
        a_fn, b_fn = env.a_over_h, env.b_over_h
    else:
        a_fn, b_fn = env
    diag = ising_energies(model, include_offset=False).reshape((2,) * n)

    psi = np.full((2,) * n, 2.0 ** (-n / 2.0), dtype=complex)
    n_steps = int(round(t_f / dt))
    check_every = max(1, n_steps // 50)
    for step in range(n_steps):
        tm = (step + 0.5) * dt
        a, b = a_fn(tm), b_fn(tm)
        half = np.exp(-0.5j * dt * (b / 2.0) * diag)
        psi = half * psi
        theta = dt * a / 2.0
        c, s = np.cos(theta), 1j * np.sin(theta)
        for q in range(n):
            moved = np.moveaxis(psi, q, 0)
            v0, v1 = moved[0].copy(), moved[1]
            moved[0] = c * v0 + s * v1
            moved[1] = s * v0 + c * v1
        psi = half * psi
        if (step + 1) % check_every == 0 or step + 1 == n_steps:
            nrm = float(np.sum(np.abs(psi) ** 2))
            if not np.isfinite(nrm):
                raise BlowupError(f"non-finite state at step {step}",
                                  step=step)
            if abs(nrm - 1.0) > 1e-8:
                raise StabilityError(
                    f"norm drift {abs(nrm - 1.0):.2e} at step {step}")
    flat = psi.reshape(-1)
    prob = np.abs(flat) ** 2
    weights = block_weights(n, n_vars)
    b_per = n // n_vars
    marginals = [np.bincount(weights[:, k], weights=prob,
                             minlength=b_per + 1)
                 for k in range(n_vars)]
    return flat, marginals


# ---------------------------------------------------------------------------
# Coefficient file format
# ---------------------------------------------------------------------------

def format_model(model, layout: PrecisionLayout = None) -> str:
    """Bit-exact text serialization: a header line, an optional layout
    comment, then one `<i> <j> <coeff>` line per term with i = j for linear
    terms and i < j for quadratic ones; shortest round-trip decimals."""
    lines = []
    if isinstance(model, QuboModel):
        lines.append(f"# qubo n={model.n} offset={float(model.offset)!r}")
        lin = model.linear
        quad = {(u, v): q for (u, v), q in model.quadratic.items()}
    elif isinstance(model, IsingModel):
        lines.append(f"# ising n={model.n} offset={float(model.offset)!r}")
        lin = model.h
        quad = {(k, j): v for (j, k), v in model.J.items()}
    else:
        raise TypeError("expected a QuboModel or IsingModel")
    if layout is not None:
        lines.append(f"# layout encoding={layout.encoding} vars={layout.dim} "
                     f"bits={layout.bits_per_var}")
    for i, v in enumerate(lin):
        if v != 0.0:
            lines.append(f"{i} {i} {float(v)!r}")
    for (u, v) in sorted(quad):
        lines.append(f"{u} {v} {float(quad[(u, v)])!r}")
    return "\n".join(lines) + "\n"


def parse_model(text: str):
    """Inverse of format_model; returns (model, layout_or_None)."""
    kind = None
    n = None
    offset = 0.0
    layout = None
    lin = None
    quad = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            fields = line[1:].split()
            if fields and fields[0] in ("qubo", "ising"):
                kind = fields[0]
                kv = dict(f.split("=", 1) for f in fields[1:])
                n = int(kv["n"])
                offset = float(kv.get("offset", "0.0"))
                lin = np.zeros(n)
            elif fields and fields[0] == "layout":
                kv = dict(f.split("=", 1) for f in fields[1:])
                layout_kind = kv["encoding"]
                d, b = int(kv["vars"]), int(kv["bits"])
                layout = (PrecisionLayout.hamming(d, b)
                          if layout_kind == "hamming"
                          else PrecisionLayout.radix2(d, b))
            continue
        i_s, j_s, v_s = line.split()
        i, j, v = int(i_s), int(j_s), float(v_s)
        if i == j:
            lin[i] = v
        else:
            quad[(min(i, j), max(i, j))] = v
    if kind is None:
        raise ValueError("missing model header line")
    if kind == "qubo":
        return QuboModel(n=n, linear=lin, quadratic=quad, offset=offset), layout
    J = {(v, u): val for (u, v), val in quad.items()}
    return IsingModel(n=n, h=lin, J=J, offset=offset), layout
