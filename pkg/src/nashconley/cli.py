"""``nashconley`` command line: reproducible runs with JSON reports."""
from __future__ import annotations

import json
import sys
import time
from fractions import Fraction
from importlib import metadata
from pathlib import Path

import click
import numpy as np

from . import conley, dynamics, game, homology, ne_topology

EXIT_USAGE = 2
EXIT_INVARIANT = 3


class InvariantViolation(RuntimeError):
    pass


def _version() -> str:
    try:
        return "v" + metadata.version("nashconley")
    except metadata.PackageNotFoundError:
        return "v0+unknown"


def _emit(ctx: click.Context, command: str, params: dict, outputs: dict, verdicts: list[str], started: float):
    report = {
        "command": command,
        "parameters": params,
        "version": _version(),
        "wall_time": round(time.perf_counter() - started, 3),
        "outputs": outputs,
        "verdicts": verdicts,
    }
    out_dir = ctx.obj.get("out")
    if out_dir is not None:
        (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    if ctx.obj.get("json"):
        click.echo(json.dumps(report, indent=2))
    else:
        for v in verdicts:
            click.echo(v)
        if out_dir is not None:
            click.echo(f"report written to {out_dir / 'report.json'}")
    return report


def _common(fn):
    fn = click.option("--seed", type=int, default=0, show_default=True, help="Seed for sampled quantities.")(fn)
    fn = click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None, help="Directory for exports.")(fn)
    fn = click.option("--json", "as_json", is_flag=True, help="Print the full JSON report.")(fn)
    fn = click.option("--threads", type=int, default=1, show_default=True, help="Worker threads (computation is single-threaded; recorded).")(fn)
    return fn


def _setup(ctx, out, as_json):
    ctx.ensure_object(dict)
    ctx.obj["json"] = as_json
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    ctx.obj["out"] = out


def _load_game(km: bool, path: str | None) -> game.BimatrixGame:
    if km:
        return game.km_game()
    if path is None:
        raise click.UsageError("give a game file or --km")
    try:
        return game.BimatrixGame.load(path)
    except FileNotFoundError:
        click.echo(f"error: no such file: {path}", err=True)
        sys.exit(EXIT_USAGE)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        click.echo(f"error: cannot read game {path}: {exc}", err=True)
        sys.exit(EXIT_USAGE)


def _parse_profile(text: str, g: game.BimatrixGame) -> game.MixedProfile:
    try:
        xs, ys = text.split(";")
        return game.profile_from_strings(xs.split(","), ys.split(","))
    except ValueError as exc:
        raise click.BadParameter(f"expected 'x1,..,xm;y1,..,yn' ({exc})")


def _betti_verdict(b: homology.BettiProfile) -> str:
    t = b.as_tuple()
    shape = "circle-like" if t[:2] == (1, 1) and not any(t[2:]) else "ball-like" if t[0] == 1 and not any(t[1:]) else "other"
    return f"betti={t}: {shape}"


@click.group()
@click.version_option(_version(), prog_name="nashconley")
def main():
    """Nash equilibria, game dynamics and Conley indices on cubical grids."""


@main.command("analyze-game")
@click.argument("game_file", required=False)
@click.option("--km", is_flag=True, help="Use the Kohlberg-Mertens game.")
@_common
@click.pass_context
def analyze_game(ctx, game_file, km, seed, out, as_json, threads):
    """Support enumeration, deficit samples and (for KM) the dominance check."""
    started = time.perf_counter()
    g = _load_game(km, game_file)
    _setup(ctx, out, as_json)
    rep = game.support_enumeration(g)
    for p in rep.equilibria:
        if not game.is_epsilon_nash(g, p, 0):
            raise InvariantViolation("reported equilibrium fails the exact Nash test")
    rng = np.random.Generator(np.random.Philox(seed))
    samples = []
    for _ in range(5):
        x = rng.dirichlet(np.ones(g.m))
        y = rng.dirichlet(np.ones(g.n))
        p = dynamics.state_to_profile(np.concatenate([x, y]), g.m, 1000)
        samples.append({"profile": p.to_dict(), "deficit": str(game.deficit(g, p).total)})
    outputs = {"nash": rep.to_dict(), "deficit_samples": samples}
    if km:
        outputs["dominance_check"] = game.dominance_check_km()
    verdicts = [
        f"equilibria={rep.count} ({'odd' if rep.count % 2 else 'even'})",
        f"degenerate_flag={str(rep.degenerate_flag).lower()}",
    ]
    if out is not None:
        (out / "nash.json").write_text(rep.to_json() + "\n")
    _emit(ctx, "analyze-game", {"game_file": game_file, "km": km, "seed": seed}, outputs, verdicts, started)


FIELDS = ("replicator", "mwu", "star", "zero", "stable", "saddle", "repeller", "rotation", "limit-cycle", "double-well")


def _test_field(name: str):
    """Analytic test fields with their domain boxes."""
    box2 = [(-1, 1), (-1, 1)]
    return {
        "zero": (dynamics.zero_field(2), box2),
        "stable": (dynamics.linear_field([[-1, 0], [0, -1]]), box2),
        "saddle": (dynamics.linear_field([[1, 0], [0, -1]]), box2),
        "repeller": (dynamics.linear_field([[1, 0], [0, 1]]), box2),
        "rotation": (dynamics.rotation_field(), box2),
        "limit-cycle": (dynamics.limit_cycle_field(), [(-1.5, 1.5), (-1.5, 1.5)]),
        "double-well": (dynamics.double_well_field(), [(-1.5, 1.5)]),
    }[name]


def _build_field(field, km, game_file, target, c, eta):
    """Returns (vector field, grid factory, step map or None, game or None)."""
    if field in ("replicator", "mwu", "star"):
        g = _load_game(km, game_file)
        if field == "star":
            if target is None:
                rep = game.support_enumeration(g)
                if not rep.equilibria:
                    raise click.UsageError("no equilibrium found; pass --target")
                tgt = rep.equilibria[0]
            else:
                tgt = _parse_profile(target, g)
            try:
                f = dynamics.star_field(dynamics.StarDynamics(g, tgt, c))
            except ValueError as exc:
                raise click.BadParameter(str(exc))
        else:
            f = dynamics.replicator_field(g)
        step = dynamics.mwu_map(g, eta) if field == "mwu" else None
        return f, (lambda k: conley.simplex_product_grid([g.m - 1, g.n - 1], k)), step, g
    f, box = _test_field(field)
    return f, (lambda k: conley.build_grid(box, k)), None, None


def _field_options(fn):
    fn = click.option("--field", type=click.Choice(FIELDS), required=True)(fn)
    fn = click.option("--km", is_flag=True, help="Use the Kohlberg-Mertens game for game fields.")(fn)
    fn = click.option("--game", "game_file", type=str, default=None, help="Game JSON for game fields.")(fn)
    fn = click.option("--target", type=str, default=None, help="Star target 'x1,..;y1,..' (rational strings).")(fn)
    fn = click.option("--c", "c", type=float, default=1.0, show_default=True, help="Star speed constant.")(fn)
    fn = click.option("--eta", type=float, default=0.1, show_default=True, help="MWU step size.")(fn)
    return fn


def _graph_options(fn):
    fn = click.option("--k", type=int, default=16, show_default=True)(fn)
    fn = click.option("--tau", type=float, default=0.5, show_default=True)(fn)
    fn = click.option("--rho", type=float, default=0.0, show_default=True)(fn)
    fn = click.option("--samples", "s", type=int, default=1, show_default=True, help="Corners + center + s-1 extra points.")(fn)
    fn = click.option("-h", "--step", "h", type=float, default=1e-2, show_default=True)(fn)
    return fn


def _graph(field, km, game_file, target, c, eta, k, tau, rho, s, h, seed):
    f, make_grid, step, g = _build_field(field, km, game_file, target, c, eta)
    grid = make_grid(k)
    tg = conley.build_transition_graph(f, grid, tau, rho, s, h, seed, step_map=step)
    return f, grid, tg, conley.morse_graph(tg)


@main.command("morse")
@_field_options
@_graph_options
@_common
@click.pass_context
def morse(ctx, field, km, game_file, target, c, eta, k, tau, rho, s, h, seed, out, as_json, threads):
    """Transition graph and Morse graph of a field."""
    started = time.perf_counter()
    _setup(ctx, out, as_json)
    f, grid, tg, mg = _graph(field, km, game_file, target, c, eta, k, tau, rho, s, h, seed)
    sets = conley.morse_sets(mg, grid)
    outputs = {
        "cells": len(grid),
        "edges": len(tg.edges()),
        "recurrent_sccs": len(mg.recurrent),
        "morse_sets": [len(m) for m in sets],
        "recurrent_cells": len(mg.recurrent_cells),
        "sink_sources": len(tg.leaks(range(len(grid)))),
        "morse_order": mg.morse_order(),
    }
    if out is not None:
        tg.to_csv(out / "edges.csv")
        (out / "morse.json").write_text(mg.to_json(grid) + "\n")
    verdicts = [f"recurrent regions={len(sets)}", f"recurrent cells={len(mg.recurrent_cells)}"]
    params = dict(field=field, km=km, game=game_file, target=target, c=c, eta=eta, k=k, tau=tau, rho=rho, samples=s, h=h, seed=seed)
    _emit(ctx, "morse", params, outputs, verdicts, started)


@main.command("conley-index")
@_field_options
@_graph_options
@click.option("--pair-from-scc", "pair_from", type=int, default=None, help="Index of the Morse set (default: all).")
@_common
@click.pass_context
def conley_index_cmd(ctx, field, km, game_file, target, c, eta, k, tau, rho, s, h, pair_from, seed, out, as_json, threads):
    """Conley index H(N, L) of Morse sets (recurrent regions, numbered by smallest cell)."""
    started = time.perf_counter()
    _setup(ctx, out, as_json)
    f, grid, tg, mg = _graph(field, km, game_file, target, c, eta, k, tau, rho, s, h, seed)
    sets = conley.morse_sets(mg, grid)
    chosen = range(len(sets)) if pair_from is None else [pair_from]
    results, verdicts = [], []
    for i in chosen:
        if not 0 <= i < len(sets):
            raise click.BadParameter(f"Morse set {i} does not exist (found {len(sets)})")
        entry = {"morse_set": i, "cells": len(sets[i])}
        try:
            pair = conley.index_pair(tg, sets[i], mg)
            if not pair.check(tg):
                raise InvariantViolation("index pair failed its invariants")
            n, l = pair.complexes(grid)
            b = homology.relative_homology(n, l)
            entry.update({"N": len(pair.N), "L": len(pair.L), "index": b.to_dict()})
            verdicts.append(f"morse set {i}: index={b.as_tuple()}")
        except conley.IsolationError as exc:
            entry["error"] = str(exc)
            verdicts.append(f"morse set {i}: not isolated ({exc})")
        results.append(entry)
    params = dict(field=field, km=km, game=game_file, target=target, c=c, eta=eta, k=k, tau=tau, rho=rho, samples=s, h=h, pair_from_scc=pair_from, seed=seed)
    _emit(ctx, "conley-index", params, {"indices": results}, verdicts, started)


@main.command("eps-ne")
@click.argument("game_file", required=False)
@click.option("--km", is_flag=True)
@click.option("--eps-normalized", type=str, default=None, help="eps for utilities rescaled to [0,1].")
@click.option("--eps-raw", type=str, default=None, help="eps on raw payoffs.")
@click.option("--k", type=int, default=24, show_default=True)
@click.option("--mode", type=click.Choice(ne_topology.MODES), default="exact", show_default=True)
@click.option("--bisect", nargs=2, type=str, default=None, help="Bracket the b_1 transition between two normalized eps.")
@click.option("--width", type=str, default="1/100", show_default=True, help="Bisection bracket width (normalized).")
@click.option("--project", type=str, default=None, help="Direction d1,d2,d3,d4 for a 3-d projection export.")
@_common
@click.pass_context
def eps_ne(ctx, game_file, km, eps_normalized, eps_raw, k, mode, bisect, width, project, seed, out, as_json, threads):
    """Cells of NE_eps, their Betti numbers, bisection and point-cloud exports."""
    started = time.perf_counter()
    g = _load_game(km, game_file)
    _setup(ctx, out, as_json)
    params = dict(game=game_file, km=km, eps_normalized=eps_normalized, eps_raw=eps_raw, k=k, mode=mode, bisect=bisect, width=width, project=project, seed=seed)
    if bisect:
        res = ne_topology.transition_bisect(g, bisect[0], bisect[1], k, width, mode)
        verdict = f"transition bracket (normalized) = {res['bracket']}" if res["bracket"] else "no transition inside the interval"
        _emit(ctx, "eps-ne", params, res, [verdict], started)
        return
    if (eps_normalized is None) == (eps_raw is None):
        raise click.UsageError("give exactly one of --eps-normalized, --eps-raw")
    raw = ne_topology.normalized_to_raw(g, eps_normalized) if eps_normalized is not None else Fraction(eps_raw)
    region = ne_topology.eps_nash_region(g, raw, k, mode)
    verdicts = []
    if region.member_count == 0:
        outputs = region.report()
        verdicts.append("empty region at this resolution")
    else:
        b = ne_topology.region_homology(region)
        outputs = region.report(b)
        outputs["stats"] = region.stats
        verdicts.append(_betti_verdict(b))
    if out is not None and region.member_count:
        ne_topology.write_points_csv(out / "points.csv", region.centers(), ["x1", "x2", "y1", "y2"])
        if project:
            direction = [float(v) for v in project.split(",")]
            pts = ne_topology.project_3d(region, direction)
            ne_topology.write_points_csv(out / "projected.csv", pts, ["x", "y", "z"])
        (out / "region.json").write_text(json.dumps(outputs) + "\n")
    _emit(ctx, "eps-ne", params, outputs, verdicts, started)


@main.command("simulate")
@_field_options
@click.option("--x0", type=str, required=True, help="Start 'x1,..;y1,..' for game fields, 'a,b,..' otherwise.")
@click.option("-T", "T", type=float, default=10.0, show_default=True)
@click.option("-h", "--step", "h", type=float, default=1e-2, show_default=True)
@_common
@click.pass_context
def simulate(ctx, field, km, game_file, target, c, eta, x0, T, h, seed, out, as_json, threads):
    """Integrate one trajectory (or iterate MWU) and export ``trajectory.csv``."""
    started = time.perf_counter()
    _setup(ctx, out, as_json)
    f, _, step, g = _build_field(field, km, game_file, target, c, eta)
    if g is not None:
        start = _parse_profile(x0, g).as_float()
        m = g.m
    else:
        start = np.array([float(Fraction(v)) for v in x0.split(",")])
        m = len(start)
    if len(start) != f.dimension:
        raise click.BadParameter("x0 has the wrong dimension")
    if step is not None:
        count = int(round(T))
        states = dynamics.iterate_map(step, start, count)
        traj = dynamics.Trajectory(np.arange(count + 1, dtype=float), states, {"method": "mwu", "eta": eta})
    else:
        try:
            traj = dynamics.integrate(f, start, T, h)
        except dynamics.IntegrationError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INVARIANT)
    final = traj.final
    outputs = {"steps": len(traj.times) - 1, "final_state": [float(v) for v in final]}
    verdicts = [f"final state = {np.array2string(final, precision=6)}"]
    if g is not None:
        d = float(dynamics.float_deficit(g, final[None])[0])
        outputs["final_deficit"] = d
        verdicts.append(f"final deficit = {d:.3e}")
    if out is not None:
        traj.to_csv(out / "trajectory.csv", m if g is not None else None)
    params = dict(field=field, km=km, game=game_file, target=target, c=c, eta=eta, x0=x0, T=T, h=h, seed=seed)
    _emit(ctx, "simulate", params, outputs, verdicts, started)


def run():
    try:
        main(standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_USAGE)
    except click.Abort:
        sys.exit(1)
    except InvariantViolation as exc:
        click.echo(f"invariant violation: {exc}", err=True)
        sys.exit(EXIT_INVARIANT)


if __name__ == "__main__":
    run()
