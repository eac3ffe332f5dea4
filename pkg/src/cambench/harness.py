"""Batch orchestration behind the CLI: synthesis, evaluation, sweeps.

Work items run on a bounded worker pool keyed by sample index; results
are reduced in index order, so output bytes are identical for any pool
size. Output files are written via temp-then-rename and every textual
output embeds {config hash, seed, tool version}.
"""
from __future__ import annotations

import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__ as TOOL_VERSION
from . import _kernels
from . import causal as causal_mod
from . import metrics as metrics_mod
from . import robustness as robust_mod
from .config import canonical_json, config_hash
from .distort import ALL_FAMILIES, apply_distortion, parse_distort_arg
from .errors import CambenchError, FormatError
from .formats import read_cbsm
from .grid import normalize
from .manifest import MANIFEST_NAME, ManifestEntry, read_manifest, load_sample
from .qr.matrix import QrSpec, build_matrix, byte_capacity
from .qr.scene import SceneParams, compose_scene, make_negative
from .rng import TAG_DISTORT, TAG_SAMPLE, Stream, derive_seed
from .scorer_proto import ExternalScorer, serve

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2

SPLITS = ("train", "val", "test")

METRIC_CSV_COLUMNS = ("id", "method", "regime_tag", "distortion",
                      *metrics_mod.MetricReport.CSV_FIELDS)


def _write_atomic(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    if isinstance(data, bytes):
        tmp.write_bytes(data)
    else:
        tmp.write_text(data)
    tmp.replace(path)


def _meta(cfg: dict, command: str) -> dict:
    return {"command": command, "config_hash": config_hash(cfg),
            "seed": cfg["seed"], "tool_version": TOOL_VERSION}


def _write_run_record(cfg: dict, command: str, out_dir: Path) -> None:
    record = dict(_meta(cfg, command))
    record["config"] = cfg
    _write_atomic(out_dir / f"run_{command}.json",
                  canonical_json(record) + "\n")


def _parallel_map(fn, items, workers: int):
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _distortion_tag(provenance: dict) -> str:
    chain = provenance.get("distortions", [])
    return ";".join(f"{d['family']}:{d['severity']}" for d in chain)


# ----------------------------------------------------------------------
# synth


def _png_bytes(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(array, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def _image_png(image01: np.ndarray) -> bytes:
    levels = np.round(np.clip(image01, 0.0, 1.0) * 255.0).astype(np.uint8)
    return _png_bytes(levels)


def _mask_png(mask01: np.ndarray) -> bytes:
    return _png_bytes(np.where(mask01 > 0, 255, 0).astype(np.uint8))


def _positive_label(index: int, ratio: float) -> bool:
    return math.floor((index + 1) * ratio) > math.floor(index * ratio)


def _draw_background(kind: str, stream: Stream) -> dict:
    if kind == "flat":
        return {"kind": "flat", "level": stream.uniform(0.25, 0.75)}
    if kind == "gradient":
        return {"kind": "gradient", "start": stream.uniform(0.2, 0.8),
                "end": stream.uniform(0.2, 0.8),
                "angle_deg": stream.uniform(0.0, 360.0)}
    return {"kind": "blocks", "cell_px": stream.randint(8, 32)}


def build_sample(cfg: dict, index: int):
    """Synthesize one SampleRecord plus its split; pure in (cfg, index)."""
    seed = cfg["seed"]
    syn = cfg["synth"]
    h, w = syn["canvas"]
    stream = Stream(seed, TAG_SAMPLE, index)
    positive = _positive_label(index, syn["positive_ratio"])
    contrast = (stream.uniform(0.02, 0.2), stream.uniform(0.8, 0.98))
    scene_seed = derive_seed(seed, TAG_SAMPLE, index, 1)

    if positive:
        version = stream.choice(syn["versions"])
        level = stream.choice(syn["ecc_levels"])
        side = 17 + 4 * version
        feasible = [m for m in syn["module_px"] if (side + 8) * m <= min(h, w)]
        if not feasible:
            raise CambenchError(
                f"no module_px in {syn['module_px']} fits version {version} "
                f"on canvas {h}x{w}")
        module_px = stream.choice(feasible)
        lo, hi = syn["payload_len"]
        length = min(stream.randint(lo, hi), byte_capacity(version, level))
        payload = bytes(stream.randint(0, 255) for _ in range(length))
        spec = QrSpec(version=version, ecc_level=level, payload=payload,
                      mask_pattern=syn["mask_pattern"])
        quiet = 4 * module_px
        r0 = stream.randint(quiet, h - side * module_px - quiet)
        c0 = stream.randint(quiet, w - side * module_px - quiet)
        params = SceneParams(
            canvas=(h, w), module_px=module_px, origin=(r0, c0),
            background=_draw_background(stream.choice(syn["backgrounds"]), stream),
            contrast=contrast, seed=scene_seed)
        sample = compose_scene(build_matrix(spec), params)
    else:
        kind = stream.choice(syn["negative_kinds"])
        params = SceneParams(canvas=(h, w), module_px=3, origin=(0, 0),
                             background={"kind": "flat", "level": 0.5},
                             contrast=contrast, seed=scene_seed)
        sample = make_negative(kind, params)

    for pos, text in enumerate(syn["distort"]):
        family, severity, dseed = parse_distort_arg(text)
        base = dseed if dseed is not None else seed
        eff_seed = derive_seed(base, TAG_DISTORT, index, pos)
        sample = apply_distortion(sample, family, severity, eff_seed)

    u = stream.uniform()
    fractions = np.asarray(cfg["synth"]["split"], dtype=np.float64)
    fractions = fractions / fractions.sum()
    idx = int(np.searchsorted(np.cumsum(fractions), u, side="right"))
    split = SPLITS[min(idx, 2)]
    sample.sample_id = f"s{index:06d}"
    return sample, split


def _synth_sample(cfg: dict, index: int):
    """Build one sample and encode its dataset files."""
    sample, split = build_sample(cfg, index)
    files = {f"images/{sample.sample_id}.png": _image_png(sample.image)}
    mask_paths = {"finder_mask_path": None, "timing_mask_path": None,
                  "box_mask_path": None}
    if sample.label == 1:
        for name, mask in (("finder", sample.masks.finder),
                           ("timing", sample.masks.timing),
                           ("box", sample.masks.box)):
            rel = f"masks/{sample.sample_id}_{name}.png"
            files[rel] = _mask_png(mask)
            mask_paths[f"{name}_mask_path"] = rel
    entry = ManifestEntry(
        id=sample.sample_id, label=sample.label,
        image_path=f"images/{sample.sample_id}.png",
        split=split, provenance=sample.provenance, **mask_paths)
    return entry, files


def cmd_synth(cfg: dict) -> int:
    out_dir = Path(cfg["out_dir"])
    syn = cfg["synth"]
    results = _parallel_map(lambda i: _synth_sample(cfg, i),
                            range(syn["n"]), cfg["workers"])
    for entry, files in results:
        for rel, data in files.items():
            _write_atomic(out_dir / rel, data)
    manifest_text = "".join(entry.to_json() + "\n" for entry, _ in results)
    _write_atomic(out_dir / MANIFEST_NAME, manifest_text)
    _write_run_record(cfg, "synth", out_dir)
    n_pos = sum(1 for entry, _ in results if entry.label == 1)
    print(f"synth: wrote {syn['n']} samples ({n_pos} positive) to {out_dir}")
    return EXIT_OK


# ----------------------------------------------------------------------
# eval


def _saliency_path(saliency_dir: Path, sample_id: str, method: str) -> Path:
    return saliency_dir / f"{sample_id}.{method}.cbsm"


def _eval_one(task, root: Path, saliency_dir: Path, cfg: dict):
    entry, method = task
    try:
        sample = load_sample(entry, root)
        raw = read_cbsm(_saliency_path(saliency_dir, entry.id, method))
        if raw.shape != sample.image.shape:
            raise FormatError(
                f"saliency shape {raw.shape} != image {sample.image.shape}")
        if raw.min() < 0:
            raise FormatError("saliency contains negative values")
        sal = normalize(raw.astype(np.float64), cfg["epsilon"])
        penalty = metrics_mod.PenaltyParams(
            lam=cfg["eval"]["penalty_lambda"],
            alpha=cfg["eval"]["penalty_alpha"])
        report = metrics_mod.evaluate(sal, sample.masks,
                                      k=cfg["eval"]["k_quantiles"],
                                      penalty=penalty)
        return entry.id, method, report, None
    except (CambenchError, OSError) as exc:
        return entry.id, method, None, f"{type(exc).__name__}: {exc}"


def _summary_stats(rows) -> dict:
    out = {}
    for name in metrics_mod.MetricReport.CSV_FIELDS:
        if name == "degenerate":
            continue
        values = [getattr(r, name) for r in rows]
        mean, ci = robust_mod.mean_ci95(values)
        out[name] = {"mean": mean, "ci95": ci}
    return out


def cmd_eval(cfg: dict) -> int:
    ev = cfg["eval"]
    if not ev["manifest"] or not ev["saliency_dir"] or not ev["methods"]:
        raise CambenchError("eval needs manifest, saliency_dir and methods")
    _kernels.warmup()  # keep JIT compilation out of per-map latency
    manifest_path = Path(ev["manifest"])
    root = manifest_path.parent
    saliency_dir = Path(ev["saliency_dir"])
    out_dir = Path(cfg["out_dir"])
    entries = [e for e in read_manifest(manifest_path) if e.label == 1]
    tasks = sorted(((e, m) for e in entries for m in ev["methods"]),
                   key=lambda t: (t[0].id, t[1]))
    results = _parallel_map(
        lambda t: _eval_one(t, root, saliency_dir, cfg), tasks, cfg["workers"])

    meta = _meta(cfg, "eval")
    header = (f"# config_hash={meta['config_hash']} seed={meta['seed']} "
              f"tool_version={meta['tool_version']}\n")
    prov_by_id = {e.id: e.provenance for e in entries}

    jsonl_lines = []
    csv_lines = [header, ",".join(METRIC_CSV_COLUMNS) + "\n"]
    skip_lines = []
    ok_rows: dict[str, list] = {}
    for sample_id, method, report, error in results:
        distortion = _distortion_tag(prov_by_id[sample_id])
        if error is not None:
            skip_lines.append(canonical_json(
                {"id": sample_id, "method": method, "error": error}) + "\n")
            continue
        row = {"id": sample_id, "method": method,
               "regime_tag": ev["regime_tag"], "distortion": distortion}
        row.update(report.to_dict())
        jsonl_lines.append(canonical_json(row) + "\n")
        csv_lines.append(",".join(_fmt(row[c]) for c in METRIC_CSV_COLUMNS) + "\n")
        ok_rows.setdefault(method, []).append(report)

    _write_atomic(out_dir / "metrics.jsonl", header + "".join(jsonl_lines))
    _write_atomic(out_dir / "metrics.csv", "".join(csv_lines))
    summary = dict(meta)
    summary["methods"] = {m: _summary_stats(rows) for m, rows in
                          sorted(ok_rows.items())}
    summary["n_evaluated"] = sum(len(r) for r in ok_rows.values())
    summary["n_skipped"] = len(skip_lines)
    _write_atomic(out_dir / "summary.json", canonical_json(summary) + "\n")
    if skip_lines:
        _write_atomic(out_dir / "skips.jsonl", header + "".join(skip_lines))
    _write_run_record(cfg, "eval", out_dir)
    print(f"eval: {summary['n_evaluated']} reports, {len(skip_lines)} skipped")
    return EXIT_PARTIAL if skip_lines else EXIT_OK


# ----------------------------------------------------------------------
# robustness


def _robust_level(cfg, entries, root, family, severity, method, saliency_root):
    """Per-sample (bl, fmr, tmr) at one (family, severity) level, or None
    if any saliency file is missing (family skipped)."""
    sub = "clean" if severity == 0 else f"{family}/s{severity}"
    records = []
    for index, entry in enumerate(entries):
        path = Path(saliency_root) / sub / f"{entry.id}.{method}.cbsm"
        if not path.exists():
            return None
        sample = load_sample(entry, root)
        if severity > 0:
            eff = derive_seed(cfg["seed"], TAG_DISTORT,
                              ALL_FAMILIES.index(family), index)
            sample = apply_distortion(sample, family, severity, eff)
        raw = read_cbsm(path)
        sal = normalize(raw.astype(np.float64), cfg["epsilon"])
        fmr, tmr, bl = metrics_mod.mass_ratios(sal, sample.masks)
        records.append({"bl": bl, "fmr": fmr, "tmr": tmr})
    return records


def cmd_robustness(cfg: dict) -> int:
    rb = cfg["robustness"]
    if not rb["manifest"] or not rb["saliency_root"] or not rb["methods"]:
        raise CambenchError("robustness needs manifest, saliency_root and methods")
    _kernels.warmup()
    manifest_path = Path(rb["manifest"])
    root = manifest_path.parent
    out_dir = Path(cfg["out_dir"])
    entries = [e for e in read_manifest(manifest_path) if e.label == 1]
    severities = sorted(rb["severities"])
    j_max = max(severities)

    skipped = []
    per_method: dict[str, dict] = {}
    for method in rb["methods"]:
        series_list = []
        for family in rb["families"]:
            per_level = {}
            ok = True
            for severity in [0] + severities:
                records = _robust_level(cfg, entries, root, family, severity,
                                        method, rb["saliency_root"])
                if records is None:
                    ok = False
                    break
                per_level[severity / j_max] = records
            if not ok:
                skipped.append((method, family))
                print(f"robustness: skipping {family} for {method}: "
                      "missing saliency", file=sys.stderr)
                continue
            series_list.append(robust_mod.build_series(family, per_level))
        if series_list:
            summary = robust_mod.summarize(series_list)
            per_method[method] = {"series": [s.to_dict() for s in series_list],
                                  "summary": summary.to_dict()}

    meta = _meta(cfg, "robustness")
    header = (f"# config_hash={meta['config_hash']} seed={meta['seed']} "
              f"tool_version={meta['tool_version']}\n")
    payload = dict(meta)
    payload["methods"] = per_method
    payload["skipped"] = [list(s) for s in skipped]
    _write_atomic(out_dir / "robustness.json", canonical_json(payload) + "\n")

    csv_lines = [header, "method,family,severity,metric,mean,ci95,n\n"]
    for method, blob in sorted(per_method.items()):
        for series in blob["series"]:
            for metric in robust_mod.SWEEP_METRICS:
                for s, mean, ci, n in zip(series["severities"],
                                          series["means"][metric],
                                          series["cis"][metric],
                                          series["counts"]):
                    csv_lines.append(
                        f"{method},{series['family']},{_fmt(s)},{metric},"
                        f"{_fmt(mean)},{_fmt(ci)},{n}\n")
    _write_atomic(out_dir / "robustness.csv", "".join(csv_lines))

    for metric in robust_mod.SWEEP_METRICS:
        tsv = [header, "method\tfamily\tseverity\tmean\tci95\n"]
        for method, blob in sorted(per_method.items()):
            for series in blob["series"]:
                for s, mean, ci in zip(series["severities"],
                                       series["means"][metric],
                                       series["cis"][metric]):
                    tsv.append(f"{method}\t{series['family']}\t{_fmt(s)}\t"
                               f"{_fmt(mean)}\t{_fmt(ci)}\n")
        _write_atomic(out_dir / f"robustness_{metric}.tsv", "".join(tsv))

    _write_run_record(cfg, "robustness", out_dir)
    print(f"robustness: {len(per_method)} methods, {len(skipped)} family skips")
    return EXIT_PARTIAL if skipped else EXIT_OK


# ----------------------------------------------------------------------
# causal


def cmd_causal(cfg: dict) -> int:
    ca = cfg["causal"]
    if not ca["manifest"] or not ca["saliency_dir"] or not ca["method"]:
        raise CambenchError("causal needs manifest, saliency_dir and method")
    manifest_path = Path(ca["manifest"])
    root = manifest_path.parent
    out_dir = Path(cfg["out_dir"])
    entries = [e for e in read_manifest(manifest_path) if e.label == 1]

    def pairs():
        for entry in entries:
            sample = load_sample(entry, root)
            raw = read_cbsm(_saliency_path(Path(ca["saliency_dir"]),
                                           entry.id, ca["method"]))
            yield sample, normalize(raw.astype(np.float64), cfg["epsilon"])

    if ca["scorer"] == "external":
        if not ca["scorer_command"]:
            raise CambenchError("external scorer needs causal.scorer_command")
        scorer_cm = ExternalScorer(ca["scorer_command"])
    else:
        scorer_cm = None

    try:
        scorer = scorer_cm if scorer_cm is not None else causal_mod.SyntheticScorer()
        summary, records = causal_mod.causal_sweep(
            pairs(), scorer, fill=ca["occlusion_fill"], seed=cfg["seed"],
            id_steps=ca["id_steps"])
    finally:
        if scorer_cm is not None:
            scorer_cm.close()

    meta = _meta(cfg, "causal")
    header = (f"# config_hash={meta['config_hash']} seed={meta['seed']} "
              f"tool_version={meta['tool_version']}\n")
    payload = dict(meta)
    payload["summary"] = summary.to_dict()
    payload["method"] = ca["method"]
    _write_atomic(out_dir / "causal.json", canonical_json(payload) + "\n")
    lines = [canonical_json(r.to_dict()) + "\n" for r in records]
    _write_atomic(out_dir / "causal_records.jsonl", header + "".join(lines))
    _write_run_record(cfg, "causal", out_dir)
    print(f"causal: n={summary.n} rho_finder={summary.rho_finder} "
          f"rho_timing={summary.rho_timing}")
    return EXIT_OK


# ----------------------------------------------------------------------
# score-serve and report


def cmd_score_serve(cfg: dict) -> int:
    serve(causal_mod.SyntheticScorer())
    return EXIT_OK


def cmd_report(cfg: dict) -> int:
    out_dir = Path(cfg["out_dir"])
    sections = [f"# cambench report\n\nconfig_hash: `{config_hash(cfg)}`  \n"
                f"tool_version: {TOOL_VERSION}\n"]
    summary_path = out_dir / "summary.json"
    if summary_path.exists():
        summary = json.loads(summary_path.read_text())
        sections.append("\n## structural metrics (mean ± ci95)\n")
        for method, stats in summary.get("methods", {}).items():
            sections.append(f"\n### {method}\n\n| metric | mean | ci95 |\n"
                            "|---|---|---|\n")
            for name, val in stats.items():
                sections.append(
                    f"| {name} | {_fmt(val['mean'])} | {_fmt(val['ci95'])} |\n")
    rb_path = out_dir / "robustness.json"
    if rb_path.exists():
        blob = json.loads(rb_path.read_text())
        sections.append("\n## robustness\n\n| method | BL slope | FMR AURC | TMR AURC |\n"
                        "|---|---|---|---|\n")
        for method, data in blob.get("methods", {}).items():
            s = data["summary"]
            sections.append(f"| {method} | {_fmt(s['bl_slope'])} | "
                            f"{_fmt(s['fmr_aurc'])} | {_fmt(s['tmr_aurc'])} |\n")
    causal_path = out_dir / "causal.json"
    if causal_path.exists():
        blob = json.loads(causal_path.read_text())
        s = blob["summary"]
        sections.append(f"\n## causal alignment\n\nn={s['n']}  \n"
                        f"rho(FMR, delta_finder) = {s['rho_finder']}  \n"
                        f"rho(TMR, delta_timing) = {s['rho_timing']}\n")
    _write_atomic(out_dir / "report.md", "".join(sections))
    print(f"report: wrote {out_dir / 'report.md'}")
    return EXIT_OK
