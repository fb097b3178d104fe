"""Flat key=value configuration with section prefixes (e.g. ``engine.a=0.6``).

One authoritative defaults table covers every tunable; unknown keys are
rejected so typos fail loudly. The same format also describes simulation
scenarios (scene parameters plus gesture scripts).
"""

from __future__ import annotations

from .engine import GestureEngine
from .events import GESTURE_BY_LABEL
from .geometry import GeometryConfig
from .pipeline import GesturePipeline
from .resting import RestingDetector
from .simulator import GelScene, GestureScript, benchmark_scripts
from .tracking import BlobTracker


class ConfigError(ValueError):
    """Malformed config file, unknown key, or bad value."""


PIPELINE_DEFAULTS: dict[str, object] = {
    "geometry.px_per_mm": 2.5,
    "geometry.gel_radius_mm": 30.0,
    "geometry.marker_pitch_mm": 4.0,
    "geometry.marker_diameter_mm": 1.0,
    "geometry.marker_count": 177,
    "geometry.center_x": 173.0,
    "geometry.center_y": 130.0,
    "tracker.blob_sigma_px": 1.25,
    "tracker.gate_px": 5.0,
    "tracker.q_pos": 25.0,
    "tracker.q_vel": 1.0e6,
    "tracker.vel_half_life_ms": 150.0,
    "tracker.init_pos_var": 1.0,
    "tracker.init_vel_var": 1.0e4,
    "tracker.binarize_threshold": 128,
    "tracker.expected_count": 0,  # 0 disables the exact-count check
    "tracker.min_area": 2,
    "tracker.max_area": 200,
    "engine.a": 0.6,
    "engine.radius_px": 30.0,
    "engine.min_neighbors": 4,
    "engine.noise_floor_px": 0.45,
    "engine.peak_rel_floor": 0.5,
    "engine.peak_merge_radius_px": 48.0,
    "engine.w_scale": 1.0,
    "engine.w_rotation": 1.0,
    "engine.w_translation": 1.0,
    "engine.global_iters": 200,
    "engine.constrained_iters": 100,
    "rest.binarize_threshold": 128,
    "rest.chamfer_threshold": 0.2,
    "pipeline.batch_window_us": 10_000,
    "pipeline.reset_staleness_batches": 2,
    "pipeline.seed": 0,
    "pipeline.threaded_rest": 0,
}

SCENARIO_DEFAULTS: dict[str, object] = {
    "scene.background": 10,
    "scene.foreground": 230,
    "scene.contrast_threshold": 0.2,
    "scene.noise_rate": 0.0,
    "scene.substep_us": 1000,
    "duration_s": 0.0,  # 0 means derive from the last script
    "suite": "",  # "benchmark" generates a scripted suite
    "suite.seed": 0,
    "seed": -1,  # event-noise RNG seed; -1 derives one from the scripts
}

_SCRIPT_KEYS = {"type", "fingers", "peak_mm", "t_start_s", "attack_s", "hold_s",
                "release_s", "sigma_px", "push_dir", "speed_cap", "seed"}


def parse_kv_file(path) -> dict[str, str]:
    """Read ``key=value`` lines; '#' starts a comment; blanks ignored."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{ln}: expected key=value, got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key in out:
                raise ConfigError(f"{path}:{ln}: duplicate key {key!r}")
            out[key] = value.strip()
    return out


def _convert(key: str, raw: str, default):
    try:
        if isinstance(default, bool) or key.endswith("threaded_rest"):
            return raw.strip() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def resolve(defaults: dict[str, object], entries: dict[str, str],
            allow_extra=lambda k: False) -> dict[str, object]:
    cfg = dict(defaults)
    for key, raw in entries.items():
        if key in defaults:
            cfg[key] = _convert(key, raw, defaults[key])
        elif not allow_extra(key):
            raise ConfigError(f"unknown config key {key!r}")
        else:
            cfg[key] = raw
    return cfg


def load_pipeline_config(path=None, overrides: list[str] | None = None) -> dict[str, object]:
    entries = parse_kv_file(path) if path else {}
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, _, value = item.partition("=")
        entries[key.strip()] = value.strip()
    return resolve(PIPELINE_DEFAULTS, entries)


def geometry_from_config(cfg: dict[str, object]) -> GeometryConfig:
    return GeometryConfig(
        px_per_mm=cfg["geometry.px_per_mm"],
        gel_radius_mm=cfg["geometry.gel_radius_mm"],
        marker_pitch_mm=cfg["geometry.marker_pitch_mm"],
        marker_diameter_mm=cfg["geometry.marker_diameter_mm"],
        marker_count=int(cfg["geometry.marker_count"]),
        image_center=(cfg["geometry.center_x"], cfg["geometry.center_y"]))


def pipeline_from_config(cfg: dict[str, object]) -> GesturePipeline:
    tracker = BlobTracker(
        blob_sigma_px=cfg["tracker.blob_sigma_px"], gate_px=cfg["tracker.gate_px"],
        q_pos=cfg["tracker.q_pos"], q_vel=cfg["tracker.q_vel"],
        vel_half_life_ms=cfg["tracker.vel_half_life_ms"],
        init_pos_var=cfg["tracker.init_pos_var"], init_vel_var=cfg["tracker.init_vel_var"],
        binarize_threshold=cfg["tracker.binarize_threshold"],
        expected_count=int(cfg["tracker.expected_count"]) or None,
        min_area=cfg["tracker.min_area"], max_area=cfg["tracker.max_area"])
    engine = GestureEngine(
        a=cfg["engine.a"], radius_px=cfg["engine.radius_px"],
        min_neighbors=cfg["engine.min_neighbors"],
        noise_floor_px=cfg["engine.noise_floor_px"],
        peak_rel_floor=cfg["engine.peak_rel_floor"],
        peak_merge_radius_px=cfg["engine.peak_merge_radius_px"],
        w_scale=cfg["engine.w_scale"], w_rotation=cfg["engine.w_rotation"],
        w_translation=cfg["engine.w_translation"],
        global_iters=cfg["engine.global_iters"],
        constrained_iters=cfg["engine.constrained_iters"],
        px_per_mm=cfg["geometry.px_per_mm"], seed=cfg["pipeline.seed"])
    rest = RestingDetector(binarize_threshold=cfg["rest.binarize_threshold"],
                           chamfer_threshold=cfg["rest.chamfer_threshold"])
    return GesturePipeline(tracker=tracker, engine=engine, rest_detector=rest,
                           batch_window_us=int(cfg["pipeline.batch_window_us"]),
                           reset_staleness_batches=int(cfg["pipeline.reset_staleness_batches"]),
                           seed=int(cfg["pipeline.seed"]),
                           threaded_rest=bool(cfg["pipeline.threaded_rest"]))


def _parse_points(raw: str) -> tuple[tuple[float, float], ...]:
    pts = []
    for chunk in raw.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        x, _, y = chunk.partition(":")
        pts.append((float(x), float(y)))
    return tuple(pts)


def load_scenario(path) -> tuple[GelScene, list[GestureScript], int, int | None]:
    """Parse a scenario file: (scene, scripts, duration_us, noise_seed)."""
    entries = parse_kv_file(path)
    merged_defaults = {**SCENARIO_DEFAULTS,
                       **{k: v for k, v in PIPELINE_DEFAULTS.items()
                          if k.startswith("geometry.")}}
    cfg = resolve(merged_defaults, entries, allow_extra=lambda k: k.startswith("script."))
    geometry = geometry_from_config(cfg)
    scene = GelScene(geometry=geometry,
                     background=int(cfg["scene.background"]),
                     foreground=int(cfg["scene.foreground"]),
                     contrast_threshold=float(cfg["scene.contrast_threshold"]),
                     noise_rate=float(cfg["scene.noise_rate"]),
                     substep_us=int(cfg["scene.substep_us"]))
    duration_us = int(float(cfg["duration_s"]) * 1e6) or None

    scripts: list[GestureScript] = []
    if cfg["suite"] == "benchmark":
        if duration_us is None:
            raise ConfigError("suite=benchmark needs duration_s")
        scripts = benchmark_scripts(scene, duration_us, seed=int(cfg["suite.seed"]))
    elif cfg["suite"]:
        raise ConfigError(f"unknown suite {cfg['suite']!r}")

    by_index: dict[int, dict[str, str]] = {}
    for key, raw in entries.items():
        if not key.startswith("script."):
            continue
        parts = key.split(".")
        if len(parts) != 3 or parts[2] not in _SCRIPT_KEYS:
            raise ConfigError(f"unknown script key {key!r}")
        try:
            idx = int(parts[1])
        except ValueError as exc:
            raise ConfigError(f"bad script index in {key!r}") from exc
        by_index.setdefault(idx, {})[parts[2]] = raw
    for idx in sorted(by_index):
        sc = by_index[idx]
        try:
            gtype = GESTURE_BY_LABEL[sc["type"]]
        except KeyError as exc:
            raise ConfigError(f"script.{idx}: unknown gesture type "
                              f"{sc.get('type')!r}") from exc
        try:
            script = GestureScript(
                gesture_type=gtype,
                finger_centers=_parse_points(sc["fingers"]),
                peak_intensity_mm=float(sc["peak_mm"]),
                t_start_us=int(float(sc.get("t_start_s", 0)) * 1e6),
                attack_us=int(float(sc.get("attack_s", 0.4)) * 1e6),
                hold_us=int(float(sc.get("hold_s", 0.6)) * 1e6),
                release_us=int(float(sc.get("release_s", 0.4)) * 1e6),
                speed_cap_mm_s=float(sc.get("speed_cap", 210.0)),
                deformation_sigma_px=float(sc.get("sigma_px", 12.0)),
                push_direction=_parse_points(sc["push_dir"])[0] if "push_dir" in sc else (1.0, 0.0),
                seed=int(sc.get("seed", 0)))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"script.{idx}: {exc}") from exc
        scripts.append(script)
    seed = int(cfg["seed"])
    return scene, scripts, duration_us, (None if seed < 0 else seed)


def defaults_help_text() -> str:
    lines = ["pipeline config keys (key=default):"]
    for key, value in PIPELINE_DEFAULTS.items():
        lines.append(f"  {key}={value}")
    lines.append("scenario config keys (key=default):")
    for key, value in SCENARIO_DEFAULTS.items():
        lines.append(f"  {key}={value}")
    lines.append("  script.<i>.type / fingers (x:y;...) / peak_mm / t_start_s / attack_s"
                 " / hold_s / release_s / sigma_px / push_dir / speed_cap / seed")
    return "\n".join(lines)
