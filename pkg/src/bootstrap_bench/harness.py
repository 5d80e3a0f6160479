"""Experiment orchestration: suite building, the (repetition, method, budget) grid,
aggregation and artifact writing.

Every random draw is derived from ``master_seed`` before any work starts, so
results do not depend on how cells are scheduled.
"""
import csv
import hashlib
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, datagen, dynamics, metrics, novelty
from .config import ExperimentConfig
from .errors import ConfigError
from .evaluation import evaluate_suite

ERRORS_FIELDS = ("env", "method", "budget", "horizon", "repetition", "trajectory_id",
                 "error", "diverged", "outcome_error")
HIST_BINS = 30


def suite_seed(master_seed):
    return datagen.derive_seed(master_seed, 1)


def data_seed(master_seed, rep, method):
    return datagen.derive_seed(master_seed, 3, rep, datagen.METHODS.index(method))


def model_seed(master_seed, rep, method, budget):
    return datagen.derive_seed(master_seed, 4, rep, datagen.METHODS.index(method), budget)


def archive_digest(archive):
    h = hashlib.sha256()
    for e in archive.entries:
        for a in e.policy.arrays() + [e.episode.states, e.episode.actions]:
            h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


def build_suite(config):
    """Run Novelty Search and keep ``suite_size`` archive entries as the evaluation suite."""
    seed = suite_seed(config.master_seed)
    t0 = time.perf_counter()
    archive = novelty.evolve(config.spec, config.ns, seed)
    entries = novelty.evaluation_suite(archive, config.suite_size, seed)
    meta = dict(archive.meta, suite_size=config.suite_size, archive_size=len(archive),
                seconds=time.perf_counter() - t0)
    return novelty.NsArchive(config.env, entries, meta)


def suite_path(config, out_dir):
    return Path(out_dir) / f"suite_{config.env}.npz"


def build_or_load_suite(config, out_dir):
    path = suite_path(config, out_dir)
    expected = {"config": asdict(config.ns), "seed": suite_seed(config.master_seed),
                "suite_size": config.suite_size}
    if path.exists():
        suite = novelty.load_archive(path)
        if all(suite.meta.get(k) == v for k, v in expected.items()) and suite.env == config.env:
            return suite
    suite = build_suite(config)
    novelty.save_archive(suite, path)
    return suite


@dataclass
class CellResult:
    rep: int
    method: str
    budget: int
    rows: list = field(default_factory=list)     # (horizon, trajectory_id, error, diverged, outcome_error)
    n_samples: int = 0
    mean_episode_length: float = 0.0
    train_nll: list = field(default_factory=list)
    seconds: float = 0.0


def cell_key(config, suite_digest, rep, method, budget):
    payload = {
        "env": config.env, "method": method, "budget": budget, "rep": rep,
        "data_seed": data_seed(config.master_seed, rep, method),
        "model_seed": model_seed(config.master_seed, rep, method, budget),
        "repeat_length": config.repeat_length, "train": asdict(config.train),
        "horizons": config.resolved_horizons(), "suite": suite_digest, "version": __version__,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def gather_cell(config, rep, method, budget):
    ds = datagen.gather(config.spec, method, budget, config.repeat_length,
                        data_seed(config.master_seed, rep, method))
    ds.meta.update(master_seed=config.master_seed, rep=rep, budget=budget)
    return ds


def train_cell(config, dataset):
    m = dataset.meta
    model = dynamics.fit(dataset, config.train,
                         model_seed(m["master_seed"], m["rep"], m["method"], m["budget"]))
    model.meta = {k: m[k] for k in ("env", "method", "budget", "rep", "master_seed")}
    return model


def evaluate_cell(config, model, suite):
    rows = evaluate_suite(model, config.spec, suite.entries, config.resolved_horizons())
    return [(r.horizon, r.trajectory_id, r.error, r.diverged, r.outcome_error) for r in rows]


def run_cell(config, suite, rep, method, budget):
    t0 = time.perf_counter()
    ds = gather_cell(config, rep, method, budget)
    model = train_cell(config, ds)
    rows = evaluate_cell(config, model, suite)
    return CellResult(rep, method, budget, rows, len(ds), float(np.mean(ds.episode_lengths)),
                      model.train_nll.tolist(), time.perf_counter() - t0)


def _cell_file(out_dir, rep, method, budget):
    return Path(out_dir) / "cells" / f"{method}_b{budget}_r{rep}.json"


def _load_cell(path, key):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, ValueError):
        return None
    if data.get("key") != key:
        return None
    res = data["result"]
    res["rows"] = [tuple(r) for r in res["rows"]]
    return CellResult(**res)


def _run_repetition(args):
    """Worker: every pending cell of one repetition.  Returns (results, failures)."""
    config_text, out_dir, rep, pending = args
    config = ExperimentConfig.from_text(config_text)
    suite = novelty.load_archive(suite_path(config, out_dir))
    digest = archive_digest(suite)
    results, failures = [], []
    for method, budget in pending:
        try:
            res = run_cell(config, suite, rep, method, budget)
        except Exception as exc:  # recorded in the manifest; the grid goes on
            failures.append({"rep": rep, "method": method, "budget": budget,
                             "error": f"{type(exc).__name__}: {exc}"})
            continue
        path = _cell_file(out_dir, rep, method, budget)
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump({"key": cell_key(config, digest, rep, method, budget), "result": asdict(res)}, fh)
        os.replace(tmp, path)
        results.append(res)
    return results, failures


def errors_csv(config, results):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ERRORS_FIELDS)
    order = {m: i for i, m in enumerate(config.methods)}
    for res in sorted(results, key=lambda r: (order[r.method], r.budget, r.rep)):
        for h, j, err, div, out_err in sorted(res.rows, key=lambda r: (r[0], r[1])):
            writer.writerow([config.env, res.method, res.budget, h, res.rep, j, repr(float(err)),
                             int(bool(div)), repr(float(out_err))])
    return buf.getvalue()


def read_errors_csv(text):
    """Parse errors.csv into ``{(env, method, budget, horizon): {rep: [(error, diverged)]}}``."""
    cells = {}
    for row in csv.DictReader(io.StringIO(text)):
        key = (row["env"], row["method"], int(row["budget"]), int(row["horizon"]))
        cells.setdefault(key, {}).setdefault(int(row["repetition"]), []).append(
            (float(row["error"]), bool(int(row["diverged"]))))
    return cells


def records_from_errors(text):
    records = []
    for (env, method, budget, horizon), reps in sorted(read_errors_csv(text).items()):
        per_rep = [[e for e, _ in reps[r]] for r in sorted(reps)]
        mean, std = metrics.aggregate(per_rep)
        div = sum(d for r in reps.values() for _, d in r)
        records.append(metrics.MetricsRecord(env, method, budget, horizon, mean, std,
                                             len(per_rep), div))
    return records


def write_report(errors_text, out_dir, budgets=None, horizons=None, methods=None):
    records = records_from_errors(errors_text)
    text, table = metrics.render_table(records, budgets, horizons, methods)
    out = Path(out_dir)
    (out / "table.txt").write_text(text, encoding="utf-8")
    (out / "table.csv").write_text(table, encoding="utf-8")
    return records


def _dim_labels(spec):
    if spec.name == "ball_in_cup":
        return ["rel_x", "rel_y", "rel_z"]
    return ["ee_x", "ee_y"]


def write_histograms(config, out_dir):
    """Histograms of the largest-budget datasets pooled over repetitions."""
    spec = config.spec
    budget = max(config.budgets)
    pooled = {}
    for method in config.methods:
        ds = [gather_cell(config, rep, method, budget) for rep in range(config.repetitions)]
        pooled[method] = (np.concatenate([d.states for d in ds]), np.concatenate([d.actions for d in ds]))
    written = []
    dims = [(lab, "state", d) for lab, d in zip(_dim_labels(spec), spec.outcome_dims)]
    dims += [(f"action_{i}", "action", i) for i in range(spec.action_dim)]
    out = Path(out_dir)
    for label, kind, idx in dims:
        if kind == "state":
            rng = (spec.state_low[idx], spec.state_high[idx])
        else:
            rng = (spec.action_low[idx], spec.action_high[idx])
        hists = {m: metrics.histogram((pooled[m][0] if kind == "state" else pooled[m][1])[:, idx],
                                      HIST_BINS, rng, label) for m in config.methods}
        stem = f"hist_{spec.name}_{label}"
        (out / f"{stem}.csv").write_text(metrics.histogram_csv(hists), encoding="utf-8")
        (out / f"{stem}.svg").write_text(
            metrics.histogram_svg(hists, f"{spec.name}: {label} (budget {budget})"), encoding="utf-8")
        written.append(f"{stem}.csv")
    boundary = {m: metrics.boundary_mass(pooled[m][1], spec, 0.1) for m in config.methods}
    return written, boundary


def run_experiment(config, jobs=1, out_dir=None, log=None):
    """Run the full grid; returns the manifest dict (also written to manifest.json)."""
    out = Path(out_dir or config.output_dir)
    try:
        (out / "cells").mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from None
    log = log or (lambda msg: None)
    timings = {}
    t0 = time.perf_counter()
    config_text = config.to_text()
    (out / "config.cfg").write_text(config_text, encoding="utf-8")

    suite = build_or_load_suite(config, out)
    digest = archive_digest(suite)
    timings["suite"] = time.perf_counter() - t0
    log(f"suite ready: {len(suite)} trajectories ({timings['suite']:.1f}s)")

    results, failures, pending_by_rep = [], [], {}
    for rep in range(config.repetitions):
        for method in config.methods:
            for budget in config.budgets:
                key = cell_key(config, digest, rep, method, budget)
                cached = _load_cell(_cell_file(out, rep, method, budget), key)
                if cached is not None:
                    results.append(cached)
                else:
                    pending_by_rep.setdefault(rep, []).append((method, budget))
    n_cached = len(results)
    tasks = [(config_text, str(out), rep, pending) for rep, pending in sorted(pending_by_rep.items())]
    t1 = time.perf_counter()
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_repetition, tasks))
    else:
        outcomes = []
        for task in tasks:
            outcomes.append(_run_repetition(task))
            log(f"repetition {task[2]} done ({time.perf_counter() - t1:.1f}s)")
    for res, fail in outcomes:
        results += res
        failures += fail
    timings["cells"] = time.perf_counter() - t1

    errors_text = errors_csv(config, results)
    (out / "errors.csv").write_text(errors_text, encoding="utf-8")
    artifacts = {"errors": "errors.csv", "suite": suite_path(config, out).name, "config": "config.cfg"}
    table_error = None
    try:
        write_report(errors_text, out, config.budgets, config.resolved_horizons(), config.methods)
        artifacts.update(table="table.csv", table_text="table.txt")
    except Exception as exc:
        table_error = str(exc)
    t2 = time.perf_counter()
    hist_files, boundary = write_histograms(config, out)
    artifacts["histograms"] = hist_files
    timings["histograms"] = time.perf_counter() - t2
    timings["total"] = time.perf_counter() - t0

    lengths = {}
    for m in config.methods:
        for b in config.budgets:
            vals = [r.mean_episode_length for r in results if r.method == m and r.budget == b]
            if vals:
                lengths[f"{m}/{b}"] = float(np.mean(vals))
    manifest = {
        "code_version": __version__,
        "config": config.to_flat(),
        "env_spec": config.spec.to_dict(),
        "seeds": {
            "master": config.master_seed,
            "suite": suite_seed(config.master_seed),
            "data": {f"{r}/{m}": data_seed(config.master_seed, r, m)
                     for r in range(config.repetitions) for m in config.methods},
            "model": {f"{r}/{m}/{b}": model_seed(config.master_seed, r, m, b)
                      for r in range(config.repetitions) for m in config.methods for b in config.budgets},
        },
        "suite_digest": digest,
        "artifacts": artifacts,
        "cells_cached": n_cached,
        "cells_run": len(results) - n_cached,
        "failures": failures,
        "table_error": table_error,
        "mean_episode_length": lengths,
        "boundary_mass": boundary,
        "timings_seconds": timings,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest
