"""Command-line entry points.

Every command that writes files is deterministic given its seed: repeated
runs produce byte-identical CSV output.
"""

from __future__ import annotations

import argparse
import json
import pathlib
import sys

import numpy as np

from . import bench, classical, dynamics, ising, mesh, objectives, spectral


def _csv_write(path, header, rows):
    lines = [header]
    for row in rows:
        lines.append(",".join(repr(float(v)) if isinstance(v, float) else
                              str(v) for v in row))
    pathlib.Path(path).write_bytes(("\n".join(lines) + "\n").encode())


def _parse_schedule(name: str, stepsize: float, horizon: float):
    if name == "nesterov_nonconvex":
        return dynamics.make_schedule("nesterov_nonconvex", stepsize=stepsize)
    if name == "nesterov_three_param":
        return dynamics.make_schedule("nesterov_three_param")
    if name == "linear":
        return dynamics.make_schedule("linear_qaa", horizon=horizon)
    if name == "local_adiabatic":
        return dynamics.make_schedule("local_adiabatic", horizon=horizon)
    raise SystemExit(f"unknown schedule {name!r}")


def _parse_snapshots(text):
    return [float(t) for t in text.split(",")] if text else []


def cmd_simulate_qhd(args):
    f = objectives.get_objective(args.objective)
    grid = mesh.Mesh(f.dim, args.resolution, mesh.PERIODIC)
    sched = _parse_schedule(args.schedule, args.stepsize, args.T)
    traj = dynamics.qhd_evolve(grid, f, sched, args.T, args.dt,
                               snapshot_times=_parse_snapshots(args.snapshots))
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    obs = traj.observables
    _csv_write(out / "observables.csv", "t,Ef,success_prob,norm",
               zip(traj.times.tolist(), obs["Ef"].tolist(),
                   obs["success_prob"].tolist(), obs["norm"].tolist()))
    for t, state in zip(traj.snapshot_times, traj.snapshots):
        (out / f"snapshot_{t:g}.json").write_text(state.to_json())
    print(f"wrote {out / 'observables.csv'}")


def cmd_simulate_qaa(args):
    f = objectives.get_objective(args.objective)
    problem = dynamics.radix2_problem(f, args.bits)
    sched = _parse_schedule(args.schedule, 1e-3, args.T)
    traj = dynamics.qaa_evolve(problem.diag, sched, args.T, args.dt,
                               points=problem.points, x_star=f.minimizer)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    obs = traj.observables
    _csv_write(out / "observables.csv", "t,Ef,success_prob,norm",
               zip(traj.times.tolist(), obs["Ef"].tolist(),
                   obs["success_prob"].tolist(), obs["norm"].tolist()))
    print(f"wrote {out / 'observables.csv'}")


def cmd_classical(args):
    f = objectives.get_objective(args.objective)
    rng = np.random.default_rng(args.seed)
    traces = []
    for i in range(args.runs):
        x0 = rng.uniform(0.0, 1.0, size=f.dim)
        if args.algo == "nagd":
            traces.append(classical.nagd_run(f, x0, args.step, args.iters,
                                             project=args.projection))
        else:
            traces.append(classical.sgd_run(
                f, x0, args.step, args.iters, noise_sigma=args.noise_sigma,
                seed=args.seed + 1 + i, project=args.projection))
    frac, loss = classical.ensemble_stats(traces, f.minimizer, args.radius)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    times = args.step * np.arange(args.iters + 1)
    _csv_write(out / "ensemble.csv", "t,success_frac,mean_loss",
               zip(times.tolist(), frac.tolist(), loss.tolist()))
    print(f"wrote {out / 'ensemble.csv'}")


def cmd_spectrum(args):
    f = objectives.get_objective(args.objective)
    sched = _parse_schedule(args.schedule, args.stepsize, max(args.times))
    times = sorted(float(t) for t in args.times.split(","))
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    grid_p = mesh.Mesh(f.dim, args.resolution, mesh.PERIODIC)
    traj = dynamics.qhd_evolve(grid_p, f, sched, max(times), args.dt,
                               snapshot_times=times)
    spec_rows = []
    ratio_rows = []
    # three-phase spectra are read in the sine-mode basis of the
    # instantaneous vanishing-boundary Hamiltonian on the shared node grid
    grid_d = mesh.Mesh(f.dim, args.resolution, mesh.DIRICHLET)
    for t in times:
        e_phi, e_chi = sched.kinetic_coeff(t), sched.potential_coeff(t)
        hd = spectral.build_hamiltonian(grid_d, f, e_phi, e_chi)
        eig_d = spectral.lowest_eigenpairs(hd, max(args.levels, 2))
        probs, residual = spectral.probability_spectrum(
            traj.snapshot_at(t), eig_d)
        for nlev, pr in enumerate(probs[:args.levels]):
            spec_rows.append((t, nlev, float(pr)))
        spec_rows.append((t, -1, residual))
        e0, e1 = (float(v) for v in eig_d.eigenvalues[:2])
        ratio_rows.append((t, e0, e1, e1 / e0))
    _csv_write(out / "spectrum.csv", "t,n,prob", spec_rows)
    _csv_write(out / "ratios.csv", "t,E0,E1,ratio", ratio_rows)
    print(f"wrote {out / 'spectrum.csv'} and {out / 'ratios.csv'}")


def cmd_encode(args):
    qp = objectives.QpInstance.from_json(pathlib.Path(args.qp).read_text())
    if args.encoding == "hamming":
        layout = ising.PrecisionLayout.hamming(qp.dim, args.resolution)
    else:
        layout = ising.PrecisionLayout.radix2(qp.dim, args.bits)
    qubo = ising.qp_to_qubo(qp, layout)
    if args.encoding == "hamming" and args.format == "ising":
        model = ising.hamming_encode_qp(qp, args.resolution)
    elif args.format == "ising":
        model = ising.qubo_to_ising(qubo)
    else:
        model = qubo
    pathlib.Path(args.out).write_text(ising.format_model(model, layout))
    print(f"wrote {args.out}")


def cmd_anneal_sim(args):
    model, layout = ising.parse_model(pathlib.Path(args.model).read_text())
    if layout is None:
        raise SystemExit("model file carries no layout line; cannot decode")
    if isinstance(model, ising.QuboModel):
        model = ising.qubo_to_ising(model)
    sched = dynamics.make_schedule("nesterov_nonconvex",
                                   stepsize=args.stepsize) \
        if args.schedule == "nesterov_nonconvex" else \
        _parse_schedule(args.schedule, args.stepsize, args.tf)
    env = ising.anneal_rescale(sched, layout.bits_per_var,
                               (args.a0_over_h, args.tf)) \
        if args.physical else ising.AnnealEnvelope(
            time_dilation=1.0, t_f=args.tf,
            a_over_h=lambda t: layout.bits_per_var ** 1.5
            * sched.kinetic_coeff(t),
            b_over_h=lambda t: 2.0 * sched.potential_coeff(t))
    state, _ = ising.simulate_ising_dense(model, env, args.tf, args.dt,
                                          n_vars=layout.dim)
    prob = np.abs(state) ** 2
    rng = np.random.default_rng(args.seed)
    draws = rng.choice(prob.size, size=args.shots, p=prob / prob.sum())
    counts = {}
    for b in draws:
        counts[int(b)] = counts.get(int(b), 0) + 1
    energies = ising.ising_energies(model)
    rows = []
    for b in sorted(counts, key=lambda b: (-counts[b], b)):
        bits = format(b, f"0{model.n}b")
        point = ising.decode_samples([bits], layout)[0]
        rows.append((bits, counts[b],
                     " ".join(repr(float(x)) for x in point),
                     float(energies[b])))
    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _csv_write(out, "bitstring,count,decoded,energy", rows)
    print(f"wrote {out}")


def cmd_qp_gen(args):
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        qp = bench.generate_qp(args.dim, args.sparsity, args.seed + i)
        (out / f"instance_{i:03d}.json").write_text(qp.to_json())
    print(f"wrote {args.count} instances to {out}")


def cmd_bench(args):
    config = bench.ExperimentConfig.from_json(
        pathlib.Path(args.config).read_text())
    bench.run_experiment(config, args.out)
    print(f"wrote {pathlib.Path(args.out) / 'tts_summary.csv'}")


def cmd_tts(args):
    print(repr(bench.tts(args.tf, args.ps)))


def cmd_tcount(args):
    print(bench.tcount(args.dim, args.sparsity, args.iters, args.qubits))


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="qhdkit",
        description="Hamiltonian-descent simulation and encoding toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate-qhd", help="split-step descent evolution")
    p.add_argument("--objective", default="levy")
    p.add_argument("--resolution", type=int, default=128)
    p.add_argument("--schedule", default="nesterov_nonconvex")
    p.add_argument("--stepsize", type=float, default=1e-3)
    p.add_argument("--T", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--snapshots", default="")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate_qhd)

    p = sub.add_parser("simulate-qaa", help="baseline adiabatic evolution")
    p.add_argument("--objective", default="levy")
    p.add_argument("--bits", type=int, default=6)
    p.add_argument("--schedule", default="linear")
    p.add_argument("--T", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--snapshots", default="")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate_qaa)

    p = sub.add_parser("classical", help="gradient-descent ensembles")
    p.add_argument("--algo", choices=["nagd", "sgd"], required=True)
    p.add_argument("--objective", default="levy")
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--iters", type=int, default=10000)
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-sigma", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=0.1)
    p.add_argument("--projection", action=argparse.BooleanOptionalAction,
                   default=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_classical)

    p = sub.add_parser("spectrum", help="three-phase diagnostics")
    p.add_argument("--objective", default="levy")
    p.add_argument("--resolution", type=int, default=64)
    p.add_argument("--schedule", default="nesterov_nonconvex")
    p.add_argument("--stepsize", type=float, default=1e-3)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--times", required=True)
    p.add_argument("--levels", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("encode", help="emit annealer coefficient files")
    p.add_argument("--qp", required=True)
    p.add_argument("--encoding", choices=["hamming", "radix2"],
                   default="hamming")
    p.add_argument("--resolution", type=int, default=8)
    p.add_argument("--bits", type=int, default=4)
    p.add_argument("--format", choices=["ising", "qubo"], default="qubo")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("anneal-sim", help="dense Ising-machine emulation")
    p.add_argument("--model", required=True)
    p.add_argument("--schedule", default="nesterov_nonconvex")
    p.add_argument("--stepsize", type=float, default=1e-3)
    p.add_argument("--tf", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--shots", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--physical", action="store_true",
                   help="calibrate envelopes against the machine preset")
    p.add_argument("--a0-over-h", type=float, default=9.63e9)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_anneal_sim)

    p = sub.add_parser("qp-gen", help="random QP instances")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--sparsity", type=int, default=5)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_qp_gen)

    p = sub.add_parser("bench", help="full benchmark run from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("tts", help="time-to-solution metric")
    p.add_argument("--tf", type=float, required=True)
    p.add_argument("--ps", type=float, required=True)
    p.set_defaults(func=cmd_tts)

    p = sub.add_parser("tcount", help="digital T-gate resource estimate")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--sparsity", type=int, default=5)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--qubits", type=int, choices=[3, 16, 32], default=3)
    p.set_defaults(func=cmd_tcount)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
