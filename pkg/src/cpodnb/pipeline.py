"""Experiment orchestration: generate, train, evaluate, report.

Output directory layout::

    manifest.json
    ensembles/{train,test}.cpod
    train/lifting_w.npy, train/lifting_ubar.npy, train/spectrum_K1.csv
    train/K<K>/{train.json, tessellation.csv, spectra.csv, nb_model.csv,
                basis_<k>.npy, eigvals_<k>.npy}
    eval/K<K>/{eval.json, labels.csv, confusion.csv, errors.csv}
    report/{summary.json, summary.csv}
"""
from __future__ import annotations

import csv
import json
import logging
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import nbayes
from .burgers import (BlowUpError, BurgersFOM, LiftingData, build_lifting, ensemble_mean,
                      hat_strength, modified_ensemble, trig_strength)
from .config import PipelineConfig, load_schema
from .ensemble import Ensemble, load_ensemble, save_ensemble, trajectory_sq_norm
from .pod import PodBasis, export_spectrum_csv, pod_basis, select_dimension
from .rom import (RomFailure, build_reduced, solve_rom, space_time_error, stats_from_errors,
                  training_energy_identity, true_label)
from .seeding import derive_seed, stream
from .tgcvt import Tessellation, export_tessellation_csv, lloyd_tgcvt

log = logging.getLogger(__name__)


class MissingArtifactError(FileNotFoundError):
    pass


class SampleFailure(RuntimeError):
    def __init__(self, index: int, cause: Exception):
        super().__init__(f"sample {index}: {cause}")
        self.index = index


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_json(path: Path):
    if not path.exists():
        raise MissingArtifactError(f"missing artifact: {path}")
    return json.loads(path.read_text(encoding="utf-8"))


# -- generation -----------------------------------------------------------------

def sample_input(cfg: PipelineConfig, split: str, index: int):
    seed = derive_seed(cfg.master_seed, f"input/{split}", index)
    rng = np.random.default_rng(seed)
    t = cfg.fom.times
    if cfg.generator == "trig":
        eta = rng.standard_normal(2 * cfg.trig.N)
        return trig_strength(t, eta, cfg.trig.A0, cfg.trig.sigma, seed=seed)
    a = cfg.hat.heights[index % len(cfg.hat.heights)]
    return hat_strength(t, a, cfg.hat.sigma, rng.standard_normal(cfg.fom.m), seed=seed)


def generate_ensemble(cfg: PipelineConfig, split: str, n: int) -> Ensemble:
    fom = BurgersFOM(cfg.fom)
    trajs = []
    for i in range(n):
        try:
            trajs.append(fom.solve(sample_input(cfg, split, i)))
        except BlowUpError as exc:
            raise SampleFailure(i, exc) from exc
    return Ensemble(fom.grid, cfg.fom.time_grid(), trajs)


def cmd_generate(cfg: PipelineConfig, out) -> dict:
    out = Path(out)
    (out / "ensembles").mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    for split, n in (("train", cfg.n_train), ("test", cfg.n_test)):
        save_ensemble(generate_ensemble(cfg, split, n), out / "ensembles" / f"{split}.cpod")
    manifest = {
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "files": ["ensembles/train.cpod", "ensembles/test.cpod"],
    }
    _write_json(out / "manifest.json", manifest)
    _write_json(out / "timing" / "generate.json", {"seconds": time.perf_counter() - t0})
    return manifest


# -- training -------------------------------------------------------------------

def _load_split(out: Path, split: str) -> Ensemble:
    path = out / "ensembles" / f"{split}.cpod"
    if not path.exists():
        raise MissingArtifactError(f"missing artifact: {path}")
    return load_ensemble(path)


def stacked_snapshots(ensemble: Ensemble) -> np.ndarray:
    return ensemble.snapshot_array().reshape(-1, ensemble.grid.size)


def train_K(cfg: PipelineConfig, modified: Ensemble, K: int, dims: list[int]) -> tuple[Tessellation, nbayes.NaiveBayesModel | None, str | None]:
    tess = lloyd_tgcvt(modified, K, dims, max_iter=cfg.max_iter,
                       seed=derive_seed(cfg.master_seed, "cluster", K), restarts=cfg.restarts)
    try:
        model = nbayes.fit(modified.inputs(), tess.labels, K)
    except ValueError as exc:
        return tess, None, str(exc)
    return tess, model, None


def cmd_train(cfg: PipelineConfig, out) -> dict:
    out = Path(out)
    train = _load_split(out, "train")
    q = cfg.fom.stride
    w = build_lifting(cfg.fom)
    lifting = LiftingData(w, ensemble_mean(train, w, q))
    (out / "train").mkdir(parents=True, exist_ok=True)
    np.save(out / "train" / "lifting_w.npy", lifting.w)
    np.save(out / "train" / "lifting_ubar.npy", lifting.u_bar)
    modified = modified_ensemble(train, lifting, q)

    full = pod_basis(stacked_snapshots(modified), modified.grid, 0)
    export_spectrum_csv(full, out / "train" / "spectrum_K1.csv")
    shared_d = select_dimension(full.eigvals, cfg.energy_ratio)
    summary = {"shared_d": shared_d, "K": {}}
    for K in cfg.K_list:
        kdir = out / "train" / f"K{K}"
        kdir.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        try:
            tess, model, nb_error = train_K(cfg, modified, K, cfg.dims_for(K, shared_d))
        except ValueError as exc:
            info = {"K": K, "status": "failed", "reason": str(exc)}
            _write_json(kdir / "train.json", info)
            summary["K"][K] = info
            continue
        lhs, rhs, gap = training_energy_identity(modified, tess)
        info = {
            "K": K,
            "status": "ok" if model is not None else "failed",
            "dims": tess.dims,
            "populations": [int(v) for v in tess.populations],
            "energy": tess.energy,
            "energy_history": tess.energy_history,
            "energy_ratios": tess.energy_ratios,
            "iterations": tess.iterations,
            "converged": tess.converged,
            "reseeds": tess.reseeds,
            "energy_identity": {"lhs": lhs, "rhs": rhs, "gap": gap},
            "labels": [int(v) + 1 for v in tess.labels],
        }
        if nb_error:
            info["reason"] = f"classifier: {nb_error}"
        if cfg.generator == "hat":
            info["height_crosstab"] = height_crosstab(cfg, tess.labels, K)
        export_tessellation_csv(modified, tess, kdir / "tessellation.csv")
        with open(kdir / "spectra.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["cluster", "index", "eigenvalue"])
            for k, c in enumerate(tess.centroids):
                for j, v in enumerate(c.eigvals, start=1):
                    wr.writerow([k + 1, j, repr(float(v))])
        for k, c in enumerate(tess.centroids):
            np.save(kdir / f"basis_{k + 1}.npy", c.modes)
            np.save(kdir / f"eigvals_{k + 1}.npy", c.eigvals)
        if model is not None:
            nbayes.export_model_csv(model, kdir / "nb_model.csv")
        _write_json(kdir / "train.json", info)
        _write_json(out / "timing" / f"train_K{K}.json", {"seconds": time.perf_counter() - t0})
        summary["K"][K] = info
    _write_json(out / "train" / "train.json", {"shared_d": shared_d, "K_list": list(cfg.K_list)})
    return summary


def height_crosstab(cfg: PipelineConfig, labels, K: int) -> list[list[int]]:
    """Counts of cluster label (rows) against hat height index (columns)."""
    H = len(cfg.hat.heights)
    tab = np.zeros((K, H), dtype=int)
    for i, k in enumerate(labels):
        tab[k, i % H] += 1
    return tab.tolist()


def load_tessellation(out: Path, K: int, grid) -> tuple[dict, Tessellation]:
    kdir = out / "train" / f"K{K}"
    info = _read_json(kdir / "train.json")
    if info["status"] == "failed" and "labels" not in info:
        return info, None
    centroids = [PodBasis(np.load(kdir / f"basis_{k}.npy"), np.load(kdir / f"eigvals_{k}.npy"), grid)
                 for k in range(1, K + 1)]
    labels = np.array(info["labels"]) - 1
    return info, Tessellation(labels, centroids, info["energy"], info["iterations"], info["converged"])


# -- evaluation -----------------------------------------------------------------

def cmd_evaluate(cfg: PipelineConfig, out) -> dict:
    out = Path(out)
    test = _load_split(out, "test")
    q = cfg.fom.stride
    try:
        lifting = LiftingData(np.load(out / "train" / "lifting_w.npy"),
                              np.load(out / "train" / "lifting_ubar.npy"))
    except FileNotFoundError as exc:
        raise MissingArtifactError(f"missing artifact: {exc.filename}") from exc
    modified = modified_ensemble(test, lifting, q)
    norms = np.array([trajectory_sq_norm(tr, test.grid, test.time) for tr in test.trajectories])
    results = {}
    for K in cfg.K_list:
        edir = out / "eval" / f"K{K}"
        edir.mkdir(parents=True, exist_ok=True)
        info, tess = load_tessellation(out, K, test.grid)
        if info["status"] == "failed":
            res = {"K": K, "status": "failed", "reason": info.get("reason", "training failed")}
            _write_json(edir / "eval.json", res)
            results[K] = res
            continue
        t0 = time.perf_counter()
        model = nbayes.load_model_csv(out / "train" / f"K{K}" / "nb_model.csv")
        tie_rng = stream(cfg.master_seed, "nb-tie", K)
        predicted = nbayes.predict_batch(model, test.inputs(), tie_rng)
        truth = np.array([true_label(mt, tess) for mt in modified.trajectories])
        ops = [build_reduced(cfg.fom, c, lifting) for c in tess.centroids]

        cache: dict[tuple[int, int], float] = {}
        failed: set[int] = set()

        def err(i, k):
            if (i, k) not in cache:
                try:
                    r = solve_rom(ops[k], test[i].input, k)
                    cache[(i, k)] = space_time_error(test[i], r, ops[k], test.time)
                except RomFailure as exc:
                    log.warning("K=%d sample %d label %d: %s", K, i, k + 1, exc)
                    failed.add(i)
                    cache[(i, k)] = float("nan")
            return cache[(i, k)]

        e_true = np.array([err(i, k) for i, k in enumerate(truth)])
        e_pred = np.array([err(i, k) for i, k in enumerate(predicted)])
        keep = np.array([i not in failed for i in range(test.n)])
        cm = nbayes.confusion(truth, predicted, K)
        try:
            rate = nbayes.error_rate_estimate(cm, model.priors)
        except nbayes.UndefinedEstimateError as exc:
            log.warning("K=%d: %s", K, exc)
            rate = None
        s_true = stats_from_errors(e_true[keep], norms[keep]) if keep.any() else None
        s_pred = stats_from_errors(e_pred[keep], norms[keep]) if keep.any() else None
        res = {
            "K": K,
            "status": "ok" if keep.any() else "failed",
            "errors_true": s_true.row() if s_true else None,
            "errors_predicted": s_pred.row() if s_pred else None,
            "confusion": cm.counts.tolist(),
            "accuracy": cm.accuracy,
            "error_rate": rate,
            "excluded_samples": int((~keep).sum()),
        }
        with open(edir / "labels.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["sample", "true", "predicted", "error_true", "error_predicted"])
            for i in range(test.n):
                wr.writerow([i, truth[i] + 1, predicted[i] + 1, repr(float(e_true[i])), repr(float(e_pred[i]))])
        nbayes.export_confusion_csv(cm, edir / "confusion.csv")
        write_error_table(edir / "errors.csv", [(K, s_true, s_pred)])
        _write_json(edir / "eval.json", res)
        _write_json(out / "timing" / f"eval_K{K}.json", {"seconds": time.perf_counter() - t0})
        results[K] = res
    return results


def write_error_table(path, rows) -> None:
    """Columns mirror the paired true/predicted error tables."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["K", "E_true", "E_rel_true", "V_true", "V_rel_true",
                     "E_pred", "E_rel_pred", "V_pred", "V_rel_pred"])
        for K, st, sp in rows:
            cells = []
            for s in (st, sp):
                cells += [repr(v) for v in (s.E, s.E_rel, s.V, s.V_rel)] if s else [""] * 4
            wr.writerow([K] + cells)


# -- report ---------------------------------------------------------------------

def cmd_report(out) -> dict:
    out = Path(out)
    manifest = _read_json(out / "manifest.json")
    cfg = PipelineConfig.from_dict(manifest["config"])
    train_top = _read_json(out / "train" / "train.json")
    results = []
    for K in cfg.K_list:
        tinfo = _read_json(out / "train" / f"K{K}" / "train.json")
        einfo = _read_json(out / "eval" / f"K{K}" / "eval.json")
        row = {"K": K, "status": "ok" if tinfo["status"] == einfo["status"] == "ok" else "failed"}
        for key in ("dims", "populations", "energy", "energy_ratios", "iterations", "converged",
                    "energy_identity", "height_crosstab"):
            if key in tinfo:
                row[key] = tinfo[key]
        for key in ("errors_true", "errors_predicted", "confusion", "accuracy", "error_rate",
                    "excluded_samples"):
            if key in einfo and (einfo[key] is not None or key == "error_rate"):
                row[key] = einfo[key]
        reason = einfo.get("reason") or tinfo.get("reason")
        if reason:
            row["reason"] = reason
        results.append(row)
    wall = {}
    tdir = out / "timing"
    if tdir.exists():
        for p in sorted(tdir.glob("*.json")):
            wall[p.stem] = json.loads(p.read_text())["seconds"]
    summary = {
        "config_hash": manifest["config_hash"],
        "master_seed": cfg.master_seed,
        "generator": cfg.generator,
        "n_train": cfg.n_train,
        "n_test": cfg.n_test,
        "shared_d": train_top["shared_d"],
        "results": results,
        "wall_times": wall,
    }
    jsonschema.validate(summary, load_schema("summary"))
    _write_json(out / "report" / "summary.json", summary)
    with open(out / "report" / "summary.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["K", "status", "populations", "energy", "energy_ratios",
                     "E_true", "E_rel_true", "V_true", "V_rel_true",
                     "E_pred", "E_rel_pred", "V_pred", "V_rel_pred", "accuracy", "error_rate"])
        for r in results:
            cells = [r["K"], r["status"], " ".join(map(str, r.get("populations", []))),
                     repr(r["energy"]) if "energy" in r else "",
                     " ".join(repr(v) for v in r.get("energy_ratios", []))]
            for key in ("errors_true", "errors_predicted"):
                s = r.get(key)
                cells += [repr(s[c]) for c in ("E", "E_rel", "V", "V_rel")] if s else [""] * 4
            cells += [repr(r["accuracy"]) if "accuracy" in r else "",
                      "" if r.get("error_rate") is None else repr(r["error_rate"])]
            wr.writerow(cells)
    return summary


def run_all(cfg: PipelineConfig, out) -> dict:
    cmd_generate(cfg, out)
    cmd_train(cfg, out)
    cmd_evaluate(cfg, out)
    return cmd_report(out)
