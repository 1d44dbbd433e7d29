"""Batch design-load-case campaign runner.

Builds the case matrix (normal/extreme turbulence, mean winds around rated,
jointly sampled seed/direction cells), runs baseline and derating-controller
variants against identical wind field realisations, persists per-case results
atomically, derives the calibration artifacts (estimator bias table, derate
threshold tables) from the normal-turbulence baseline runs, and emits the
comparison report.

Layout of an output directory:

    fields/<hash>.bin          synthesized wind field cache
    cases/<case_id>/timeseries.csv
    cases/<case_id>/summary.json
    cases/<case_id>/meta.json  (timings; excluded from determinism guarantees)
    calibration/bias.json
    calibration/tlac.json
    report/…                   comparison tables (see compare())
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import analysis
from .controller import (BaselineController, TlacConfig, TlacController,
                         ThresholdTable, default_baseline_config, schedule_gains)
from .estimator import BiasTable, EstimatorConfig, WindEstimator, calibrate
from .surfaces import default_surface
from .turbine import (TurbineParams, TurbineState, aero_loads,
                      sample_blade_winds, step)
from .windfield import (GridSpec, TurbulenceSpec, field_cache_key, load_field,
                        save_field, synthesize, truth_series)

LOAD_CHANNELS = ("m_tower_fa", "m_oop_max", "m_hub_tilt")


@dataclass(frozen=True)
class DlcCase:
    model: str            # "NTM" | "ETM"
    mean_wind: float      # m/s
    seed_index: int       # 1-based
    direction: float      # deg
    duration: float = 700.0
    discard: float = 100.0
    variant: str = "baseline"  # "baseline" | "tlac"

    @property
    def field_id(self) -> str:
        d = int(round(self.direction))
        dir_tag = f"dm{-d}" if d < 0 else f"dp{d}"
        return f"{self.model.lower()}_u{int(round(self.mean_wind)):02d}_s{self.seed_index:02d}_{dir_tag}"

    @property
    def case_id(self) -> str:
        return f"{self.field_id}_{self.variant}"

    def seed(self, master_seed: int) -> int:
        digest = hashlib.sha256(f"{master_seed}:{self.field_id}".encode()).digest()
        return int.from_bytes(digest[:4], "little") & 0x7FFFFFFF


@dataclass(frozen=True)
class CampaignConfig:
    winds: tuple[float, ...] = (10.0, 12.0, 14.0)
    models: tuple[str, ...] = ("NTM", "ETM")
    n_cells: int = 3              # jointly sampled (seed, direction) cells per speed
    directions: tuple[float, ...] = (8.0, 0.0, -8.0)
    duration: float = 300.0      # s (desk scale; the full matrix uses 700 s)
    discard: float = 100.0       # s
    segment_s: float = 100.0
    master_seed: int = 42
    i_ref: float = 0.16
    v_ref: float = 50.0
    shear_exponent: float = 0.2
    grid_ny: int = 15
    grid_nz: int = 15
    dt_turbine: float = 0.02
    dt_control: float = 0.1
    dt_field: float = 0.25
    quantile: float = 0.8
    workers: int = 1
    strategy: str = "torque"

    def __post_init__(self):
        ratio = self.dt_control / self.dt_turbine
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("controller rate must be a multiple of the turbine rate")
        if self.duration <= self.discard:
            raise ValueError("duration must exceed the discarded interval")

    @classmethod
    def desk(cls, **overrides) -> "CampaignConfig":
        return cls(**overrides)

    @classmethod
    def full(cls, **overrides) -> "CampaignConfig":
        base = dict(n_cells=6, duration=700.0)
        base.update(overrides)
        return cls(**base)

    def grid(self) -> GridSpec:
        return GridSpec(ny=self.grid_ny, nz=self.grid_nz)

    def turbulence(self, case: DlcCase) -> TurbulenceSpec:
        return TurbulenceSpec(model=case.model, mean_wind=case.mean_wind,
                              i_ref=self.i_ref, v_ref=self.v_ref,
                              shear_exponent=self.shear_exponent,
                              direction=case.direction,
                              seed=case.seed(self.master_seed))


def build_matrix(cfg: CampaignConfig, variants: tuple[str, ...] = ("baseline",)) -> list[DlcCase]:
    """Deterministic cross product: models x winds x (seed, direction) cells x variants.

    Seed and direction are paired cells, not crossed, so the full-scale matrix
    reproduces the 6-cases-per-speed-per-model layout (18 + 18 in total).
    """
    cases = []
    for variant in variants:
        for model in cfg.models:
            for wind in cfg.winds:
                for cell in range(cfg.n_cells):
                    cases.append(DlcCase(
                        model=model, mean_wind=float(wind), seed_index=cell + 1,
                        direction=float(cfg.directions[cell % len(cfg.directions)]),
                        duration=cfg.duration, discard=cfg.discard, variant=variant))
    return cases


# ---------------------------------------------------------------------------
# single-case simulation

@dataclass
class CaseResult:
    case: DlcCase
    t: np.ndarray
    series: dict[str, np.ndarray]
    segments: list[analysis.SegmentRow]
    summary: dict
    failed: bool = False
    error: str = ""


def _get_field(case: DlcCase, cfg: CampaignConfig, out_dir: str | None):
    grid = cfg.grid()
    turb = cfg.turbulence(case)
    if out_dir is not None:
        key = field_cache_key(grid, turb, cfg.dt_field, case.duration)
        path = os.path.join(out_dir, "fields", f"{key}.bin")
        if os.path.exists(path):
            return load_field(path)
        fld = synthesize(grid, turb, dt=cfg.dt_field, duration=case.duration)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        tmp = path + ".tmp"
        save_field(fld, tmp)
        os.replace(tmp, path)
        return fld
    return synthesize(grid, turb, dt=cfg.dt_field, duration=case.duration)


def config_hash(case: DlcCase, cfg: CampaignConfig, params: TurbineParams,
                tlac_cfg: TlacConfig | None, bias: BiasTable | None) -> str:
    payload = {
        "case": asdict(case),
        "campaign": asdict(cfg),
        "turbine": asdict(params),
        "tlac": asdict(tlac_cfg) if tlac_cfg else None,
        "bias": asdict(bias) if bias else None,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def run_case(case: DlcCase, cfg: CampaignConfig, out_dir: str | None = None,
             params: TurbineParams | None = None, tlac_cfg: TlacConfig | None = None,
             bias: BiasTable | None = None, fld=None) -> CaseResult:
    """Fixed-step closed-loop simulation of one design load case.

    The turbine integrates at cfg.dt_turbine; estimator and controller run at
    cfg.dt_control with zero-order-held commands. The first ``case.discard``
    seconds are excluded from every statistic. Results are persisted
    atomically under ``out_dir`` when given.
    """
    t_wall = time.perf_counter()
    params = params or TurbineParams()
    surface = default_surface()
    base_cfg = default_baseline_config(params, surface)
    est_cfg = EstimatorConfig(sample_dt=cfg.dt_control)
    estimator = WindEstimator(params, surface, est_cfg, bias=bias)
    baseline = BaselineController(base_cfg)
    tlac = None
    if case.variant == "tlac":
        tlac = TlacController(tlac_cfg or TlacConfig(sample_dt=cfg.dt_control))

    if fld is None:
        fld = _get_field(case, cfg, out_dir)
    truth = truth_series(fld)

    dt = cfg.dt_turbine
    n_ctrl = int(round(cfg.dt_control / dt))
    n_steps = int(round(case.duration / dt))
    t_sim = np.arange(n_steps) * dt
    u_eff_t = np.interp(t_sim, truth.t, truth.u_eff).tolist()
    dh_t = np.interp(t_sim, truth.t, truth.delta_h).tolist()
    dv_t = np.interp(t_sim, truth.t, truth.delta_v).tolist()

    lam_star, _ = surface.cp_optimum()
    omega0 = min(lam_star * case.mean_wind / params.rotor_radius, params.rated_rotor_speed)
    state = TurbineState(azimuth=0.0, omega=max(omega0, 0.5), pitch=params.min_pitch)
    baseline.reset(params.min_pitch)
    command = baseline.step(state.omega, state.pitch, cfg.dt_control)

    rows: dict[str, list] = {k: [] for k in (
        "t", "u_eff", "delta_h", "delta_v", "delta",
        "u_hat_raw", "dv_hat_raw", "dh_hat_raw",
        "u_hat", "dv_hat", "dh_hat", "delta_hat", "est_degenerate",
        "omega", "pitch", "gen_torque", "power", "thrust",
        "m_oop1", "m_oop2", "m_oop3", "m_oop_max", "m_tower_fa", "m_hub_tilt",
        "tower_defl", "p_sp", "mode", "bound_stat")}

    failed = False
    error = ""
    p_sp, mode, bound = 1.0, "normal", "none"
    try:
        for k in range(n_steps):
            t = k * dt
            u_blades = sample_blade_winds(fld, t, state.azimuth, params.r_eq)
            rel = state.tower_vel
            loads = aero_loads(state, u_eff_t[k] - rel, u_blades - rel, params, surface)

            if k % n_ctrl == 0:
                estimate = estimator.update(t, loads.m_oop, state.pitch,
                                            state.omega, state.azimuth)
                boost = 1.0
                if tlac is not None:
                    p_sp, mode, bound = tlac.step(t, estimate)
                    kp, ki = schedule_gains(estimate.delta_hat, estimate.u_eff_hat,
                                            mode, 1.0, 1.0, tlac.cfg)
                    boost = kp
                command = baseline.step(state.omega, state.pitch, cfg.dt_control,
                                        p_sp=p_sp, gain_boost=boost,
                                        strategy=cfg.strategy)
                command.mode = mode

                rows["t"].append(t)
                rows["u_eff"].append(u_eff_t[k])
                rows["delta_h"].append(dh_t[k])
                rows["delta_v"].append(dv_t[k])
                rows["delta"].append(math.hypot(dh_t[k], dv_t[k]))
                rows["u_hat_raw"].append(estimator.last_raw[0])
                rows["dv_hat_raw"].append(estimator.last_raw[1])
                rows["dh_hat_raw"].append(estimator.last_raw[2])
                rows["u_hat"].append(estimate.u_eff_hat)
                rows["dv_hat"].append(estimate.delta_v_hat)
                rows["dh_hat"].append(estimate.delta_h_hat)
                rows["delta_hat"].append(estimate.delta_hat)
                rows["est_degenerate"].append(float(estimate.degenerate))
                rows["omega"].append(state.omega)
                rows["pitch"].append(state.pitch)
                rows["gen_torque"].append(command.gen_torque)
                rows["power"].append(command.gen_torque * params.gearbox_ratio * state.omega)
                rows["thrust"].append(loads.thrust)
                rows["m_oop1"].append(loads.m_oop[0])
                rows["m_oop2"].append(loads.m_oop[1])
                rows["m_oop3"].append(loads.m_oop[2])
                rows["m_oop_max"].append(analysis.signed_extreme(loads.m_oop))
                rows["m_tower_fa"].append(loads.m_tower_fa)
                rows["m_hub_tilt"].append(loads.m_hub_tilt)
                rows["tower_defl"].append(state.tower_defl)
                rows["p_sp"].append(p_sp)
                rows["mode"].append(mode)
                rows["bound_stat"].append(bound)

            state = step(state, loads, command.pitch, command.gen_torque, dt, params)
    except ArithmeticError as exc:
        failed = True
        error = str(exc)

    t_arr = np.asarray(rows.pop("t"))
    mode_col = rows.pop("mode")
    bound_col = rows.pop("bound_stat")
    series = {k: np.asarray(v) for k, v in rows.items()}
    series["mode"] = np.asarray(mode_col, dtype=object)
    series["bound_stat"] = np.asarray(bound_col, dtype=object)

    segments: list[analysis.SegmentRow] = []
    summary: dict = {"case": asdict(case), "case_id": case.case_id,
                     "config_hash": config_hash(case, cfg, params, tlac_cfg, bias),
                     "failed": failed, "error": error}
    if not failed and t_arr.size:
        scored = t_arr >= case.discard - 1e-9
        loads_sc = {name: series[name][scored] for name in LOAD_CHANNELS}
        truth_sc = {"u_eff": series["u_eff"][scored],
                    "delta": series["delta"][scored]}
        est_sc = {"delta": series["delta_hat"][scored]}
        segments = analysis.segment_stats(t_arr[scored], loads_sc, truth_sc,
                                          cfg.segment_s, est=est_sc)
        p_scored = series["p_sp"][scored]
        summary.update({
            "mean_power": float(np.mean(series["power"][scored])),
            "trigger_fraction": float(np.mean(p_scored < 1.0 - 1e-9)),
            "mean_p_sp": float(np.mean(p_scored)),
            "extremes": {name: analysis.signed_extreme(series[name][scored])
                         for name in LOAD_CHANNELS},
            "degenerate_fraction": float(np.mean(series["est_degenerate"][scored])),
            "segments": [
                {"index": s.index, "t0": s.t0, "t1": s.t1, "mean_wind": s.mean_wind,
                 "i_eff": s.i_eff, "delta_mean": s.delta_mean, "delta_std": s.delta_std,
                 "est_delta_mean": s.est_delta_mean, "est_delta_std": s.est_delta_std,
                 "extremes": s.extremes}
                for s in segments],
        })

    result = CaseResult(case=case, t=t_arr, series=series, segments=segments,
                        summary=summary, failed=failed, error=error)
    if out_dir is not None:
        persist_case(result, out_dir, wall_time=time.perf_counter() - t_wall)
    return result


# ---------------------------------------------------------------------------
# persistence

_CSV_COLUMNS = ("t", "u_eff", "delta_h", "delta_v", "delta",
                "u_hat_raw", "dv_hat_raw", "dh_hat_raw",
                "u_hat", "dv_hat", "dh_hat", "delta_hat", "est_degenerate",
                "omega", "pitch", "gen_torque", "power", "thrust",
                "m_oop1", "m_oop2", "m_oop3", "m_oop_max", "m_tower_fa",
                "m_hub_tilt", "tower_defl", "p_sp", "mode", "bound_stat")


def persist_case(result: CaseResult, out_dir: str, wall_time: float = 0.0) -> str:
    """Write timeseries.csv + summary.json, atomically (rename into place)."""
    final = os.path.join(out_dir, "cases", result.case.case_id)
    tmp = final + ".tmp"
    if os.path.exists(tmp):
        shutil.rmtree(tmp)
    os.makedirs(tmp)
    with open(os.path.join(tmp, "timeseries.csv"), "w") as fh:
        fh.write("# decimated case time series; one row per controller step\n")
        fh.write(",".join(_CSV_COLUMNS) + "\n")
        n = result.t.size
        cols = [result.t] + [result.series[c] for c in _CSV_COLUMNS[1:]]
        for i in range(n):
            cells = []
            for col in cols:
                v = col[i]
                cells.append(v if isinstance(v, str) else f"{v:.9g}")
            fh.write(",".join(cells) + "\n")
    with open(os.path.join(tmp, "summary.json"), "w") as fh:
        json.dump(result.summary, fh, indent=1, sort_keys=True)
    with open(os.path.join(tmp, "meta.json"), "w") as fh:
        json.dump({"wall_time_s": wall_time}, fh)
    if os.path.exists(final):
        shutil.rmtree(final)
    os.replace(tmp, final)
    return final


def load_summary(out_dir: str, case_id: str) -> dict:
    with open(os.path.join(out_dir, "cases", case_id, "summary.json")) as fh:
        return json.load(fh)


def load_timeseries(out_dir: str, case_id: str) -> dict[str, np.ndarray]:
    path = os.path.join(out_dir, "cases", case_id, "timeseries.csv")
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln and not ln.startswith("#")]
    names = lines[0].split(",")
    cols: dict[str, list] = {n: [] for n in names}
    for ln in lines[1:]:
        for name, cell in zip(names, ln.split(",")):
            cols[name].append(cell)
    out = {}
    for name, vals in cols.items():
        if name in ("mode", "bound_stat"):
            out[name] = np.asarray(vals, dtype=object)
        else:
            out[name] = np.asarray(vals, dtype=float)
    return out


# ---------------------------------------------------------------------------
# campaign orchestration

def _case_task(args):
    case, cfg, out_dir, tlac_blob, bias_blob = args
    tlac_cfg = None
    bias = None
    if tlac_blob is not None:
        raw = json.loads(tlac_blob)
        raw["threshold_avg"] = ThresholdTable(**raw["threshold_avg"])
        raw["threshold_std"] = ThresholdTable(**raw["threshold_std"])
        tlac_cfg = TlacConfig(**raw)
    if bias_blob is not None:
        bias = BiasTable(**json.loads(bias_blob))
    result = run_case(case, cfg, out_dir=out_dir, tlac_cfg=tlac_cfg, bias=bias)
    return result.case.case_id, result.failed, result.error


def _run_cases(cases, cfg: CampaignConfig, out_dir: str,
               tlac_cfg: TlacConfig | None = None, bias: BiasTable | None = None) -> list[tuple]:
    tlac_blob = json.dumps(asdict(tlac_cfg)) if tlac_cfg else None
    bias_blob = json.dumps(asdict(bias)) if bias else None
    tasks = [(case, cfg, out_dir, tlac_blob, bias_blob) for case in cases]
    if cfg.workers <= 1:
        results = [_case_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_case_task, tasks))
    return sorted(results)


def calibrate_campaign(out_dir: str, cfg: CampaignConfig) -> tuple[BiasTable, TlacConfig]:
    """Derive estimator bias and derate thresholds from NTM baseline runs.

    Chains the estimator calibration (raw estimate vs truth per wind bin) with
    the empirical quantile of bias-corrected per-segment shear statistics.
    Writes calibration/bias.json and calibration/tlac.json.
    """
    ntm_cases = [c for c in build_matrix(cfg) if c.model == "NTM"]
    missing = [c.case_id for c in ntm_cases
               if not os.path.exists(os.path.join(out_dir, "cases", c.case_id, "summary.json"))]
    if missing or not ntm_cases:
        raise FileNotFoundError(
            "calibration needs completed NTM baseline runs; missing: "
            + (", ".join(missing) if missing else "all"))

    runs = []
    per_bin_avg: dict[float, list[float]] = {w: [] for w in cfg.winds}
    per_bin_std: dict[float, list[float]] = {w: [] for w in cfg.winds}
    for case in ntm_cases:
        summary = load_summary(out_dir, case.case_id)
        if summary.get("failed"):
            continue
        ts = load_timeseries(out_dir, case.case_id)
        scored = ts["t"] >= case.discard - 1e-9
        runs.append((case.mean_wind,
                     {"u_eff": ts["u_hat_raw"][scored], "delta_v": ts["dv_hat_raw"][scored],
                      "delta_h": ts["dh_hat_raw"][scored]},
                     {"u_eff": ts["u_eff"][scored], "delta_v": ts["delta_v"][scored],
                      "delta_h": ts["delta_h"][scored]}))
    if not runs:
        raise FileNotFoundError("all NTM baseline runs failed; cannot calibrate")
    bias = calibrate(runs, bins=cfg.winds)

    for case in ntm_cases:
        summary = load_summary(out_dir, case.case_id)
        if summary.get("failed"):
            continue
        ts = load_timeseries(out_dir, case.case_id)
        scored = ts["t"] >= case.discard - 1e-9
        b_dv = float(np.interp(case.mean_wind, bias.bins, bias.delta_v))
        b_dh = float(np.interp(case.mean_wind, bias.bins, bias.delta_h))
        delta_corr = np.hypot(ts["dv_hat"][scored] - b_dv, ts["dh_hat"][scored] - b_dh)
        t_sc = ts["t"][scored]
        per_seg = int(round(cfg.segment_s / cfg.dt_control))
        for k in range(t_sc.size // per_seg):
            sl = slice(k * per_seg, (k + 1) * per_seg)
            d = delta_corr[sl]
            per_bin_avg[case.mean_wind].append(float(np.mean(d)))
            per_bin_std[case.mean_wind].append(float(np.std(d - d[0])))

    thr_avg, _ = analysis.quantile_threshold(per_bin_avg, cfg.quantile)
    thr_std, _ = analysis.quantile_threshold(per_bin_std, cfg.quantile)
    bins = sorted(cfg.winds)
    tlac_cfg = TlacConfig(
        threshold_avg=ThresholdTable(bins=list(bins), values=[thr_avg[b] for b in bins]),
        threshold_std=ThresholdTable(bins=list(bins), values=[thr_std[b] for b in bins]),
        sample_dt=cfg.dt_control, strategy=cfg.strategy)

    calib_dir = os.path.join(out_dir, "calibration")
    os.makedirs(calib_dir, exist_ok=True)
    bias.save(os.path.join(calib_dir, "bias.json"))
    tlac_cfg.save(os.path.join(calib_dir, "tlac.json"))
    return bias, tlac_cfg


def compare(out_dir: str, cfg: CampaignConfig) -> dict:
    """Baseline-vs-derating report: per-channel exceedance tables, the
    normal-turbulence mean-power ratio, and trigger rates per (model, wind).

    Writes report/report.txt plus plot-ready CSV tables; returns the report
    as a dict.
    """
    base_cases = build_matrix(cfg, variants=("baseline",))
    tlac_cases = build_matrix(cfg, variants=("tlac",))
    if [c.field_id for c in base_cases] != [c.field_id for c in tlac_cases]:
        raise ValueError("case matrices do not match")

    def collect(cases):
        out = {}
        for case in cases:
            path = os.path.join(out_dir, "cases", case.case_id, "summary.json")
            if not os.path.exists(path):
                raise FileNotFoundError(f"missing case result: {case.case_id}")
            out[case.field_id] = load_summary(out_dir, case.case_id)
        return out

    base = collect(base_cases)
    tlac = collect(tlac_cases)
    failed = sorted(fid for fid in base
                    if base[fid].get("failed") or tlac[fid].get("failed"))
    ok = [fid for fid in sorted(base) if fid not in failed]

    report: dict = {"n_cases": len(base), "n_failed": len(failed), "failed": failed,
                    "exceedance": {}, "ensemble_max": {}, "trigger_rates": {},
                    "power_ratio_ntm": None}

    rep_dir = os.path.join(out_dir, "report")
    os.makedirs(rep_dir, exist_ok=True)

    for model in cfg.models:
        fids = [f for f in ok if base[f]["case"]["model"] == model]
        for channel in LOAD_CHANNELS:
            curves = {}
            for name, summaries in (("baseline", base), ("tlac", tlac)):
                extremes = [seg["extremes"][channel]
                            for f in fids for seg in summaries[f]["segments"]]
                if len(extremes) >= 10:
                    curves[name] = analysis.exceedance(extremes, channel=channel,
                                                       case_set=f"{model}-{name}")
            if curves:
                path = os.path.join(rep_dir, f"exceedance_{model.lower()}_{channel}.csv")
                with open(path, "w") as fh:
                    fh.write("value,probability,case_set\n")
                    for name, curve in curves.items():
                        for v, p in zip(curve.values, curve.probabilities):
                            fh.write(f"{v:.9g},{p:.9g},{curve.case_set}\n")
                report["exceedance"][f"{model}_{channel}"] = {
                    name: {"values": curves[name].values.tolist(),
                           "probabilities": curves[name].probabilities.tolist()}
                    for name in curves}
                report["ensemble_max"][f"{model}_{channel}"] = {
                    name: float(np.max(curves[name].values)) for name in curves}

        for wind in cfg.winds:
            sel = [f for f in fids if base[f]["case"]["mean_wind"] == wind]
            if sel:
                report["trigger_rates"][f"{model}_{wind:g}"] = {
                    "baseline": float(np.mean([base[f]["trigger_fraction"] for f in sel])),
                    "tlac": float(np.mean([tlac[f]["trigger_fraction"] for f in sel])),
                }

    ntm_ok = [f for f in ok if base[f]["case"]["model"] == "NTM"]
    if ntm_ok:
        p_base = np.mean([base[f]["mean_power"] for f in ntm_ok])
        p_tlac = np.mean([tlac[f]["mean_power"] for f in ntm_ok])
        report["power_ratio_ntm"] = float(p_tlac / p_base)

    with open(os.path.join(rep_dir, "trigger_rates.csv"), "w") as fh:
        fh.write("model,wind,baseline,tlac\n")
        for key in sorted(report["trigger_rates"]):
            model, wind = key.rsplit("_", 1)
            r = report["trigger_rates"][key]
            fh.write(f"{model},{wind},{r['baseline']:.9g},{r['tlac']:.9g}\n")

    lines = [
        "campaign comparison report",
        f"cases: {report['n_cases']} per variant, failed: {report['n_failed']}",
        f"NTM mean power ratio (derating / baseline): {report['power_ratio_ntm']}",
        "",
        "ensemble extreme |load| per channel:",
    ]
    for key in sorted(report["ensemble_max"]):
        r = report["ensemble_max"][key]
        lines.append(f"  {key}: baseline={r.get('baseline')} tlac={r.get('tlac')}")
    lines.append("")
    lines.append("derate trigger window fraction:")
    for key in sorted(report["trigger_rates"]):
        r = report["trigger_rates"][key]
        lines.append(f"  {key}: baseline={r['baseline']:.4f} tlac={r['tlac']:.4f}")
    with open(os.path.join(rep_dir, "report.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return report


def run_campaign(cfg: CampaignConfig, out_dir: str) -> dict:
    """Full pipeline: baseline runs, calibration, derating runs, comparison."""
    os.makedirs(out_dir, exist_ok=True)
    base_results = _run_cases(build_matrix(cfg, variants=("baseline",)), cfg, out_dir)
    bias, tlac_cfg = calibrate_campaign(out_dir, cfg)
    tlac_results = _run_cases(build_matrix(cfg, variants=("tlac",)), cfg, out_dir,
                              tlac_cfg=tlac_cfg, bias=bias)
    report = compare(out_dir, cfg)
    report["case_status"] = {cid: ("failed: " + err if failed else "ok")
                             for cid, failed, err in base_results + tlac_results}
    return report
