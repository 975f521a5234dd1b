"""Command-line interface.

The CLI is a thin client over the HTTP service: every subcommand builds a
request model and posts it. By default requests run against an in-process
ASGI transport (no network, same filesystem); pass --server to target a
running ``spilab serve`` instance that shares the workspace.

Exit codes: 0 success, 2 stage failure (message is ``[stage] ...``),
3 transport failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx


def make_client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        from starlette.testclient import TestClient

    from .service.app import app

    return TestClient(app)


def _expand_maps(maps_dir: str) -> list[str]:
    paths = sorted(str(p) for p in Path(maps_dir).glob("*.spim"))
    if not paths:
        print(f"[genmaps] no SPIM files in {maps_dir}", file=sys.stderr)
        raise SystemExit(2)
    return paths


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    try:
        resp = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        print(f"service unreachable: {exc}", file=sys.stderr)
        raise SystemExit(3)
    if resp.status_code != 200:
        try:
            detail = resp.json()["detail"]
            msg = f"[{detail['stage']}] {detail['error']}: {detail['message']}"
        except Exception:
            msg = f"[service] HTTP {resp.status_code}: {resp.text[:200]}"
        print(msg, file=sys.stderr)
        raise SystemExit(2)
    return resp.json()


def _emit(result: dict) -> None:
    print(json.dumps(result, indent=2))


def _load_config(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        print(f"[config] file not found: {path}", file=sys.stderr)
        raise SystemExit(2)
    except json.JSONDecodeError as exc:
        print(f"[config] invalid JSON in {path}: {exc}", file=sys.stderr)
        raise SystemExit(2)


def _parse_map_params(pairs: list[str]) -> list[dict]:
    out = []
    for pair in pairs:
        try:
            l, q = pair.split(":")
            out.append({"l": float(l), "q": int(q)})
        except ValueError:
            print(f"[genmaps] bad --map {pair!r}, expected L:Q", file=sys.stderr)
            raise SystemExit(2)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spilab",
        description="Single-pixel imaging simulation and reconstruction lab",
    )
    parser.add_argument("--server", help="base URL of a running service "
                        "(default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("genmaps", help="generate an image map stack (SPIM files)")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--map", action="append", required=True, metavar="L:Q",
                   help="characteristic size and levels; repeatable")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("patterns", help="build look-up matrices (SPIL)")
    p.add_argument("--maps", required=True, help="directory of SPIM files")
    p.add_argument("--beta", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=2)
    p.add_argument("--out", required=True, help="output SPIL path")
    p.add_argument("--report", help="balance report CSV path")

    p = sub.add_parser("scene", help="generate a sparse test scene (SPIF)")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--kind", choices=["lineart", "glyphs", "siemens"], required=True)
    p.add_argument("--seed", type=int, default=3)
    p.add_argument("--sparsity-max", type=float, default=0.05)
    p.add_argument("--glyphs", help="IDX glyph archive (synthetic set if omitted)")
    p.add_argument("--spokes", type=int, default=32)
    p.add_argument("--vignette", type=float, default=2.0)
    p.add_argument("--out", required=True, help="output SPIF path")
    p.add_argument("--pgm", help="also export an 8-bit PGM")

    p = sub.add_parser("simulate", help="simulate the detector (SPIV)")
    p.add_argument("--scene", required=True)
    p.add_argument("--maps", required=True)
    p.add_argument("--lookups", required=True)
    p.add_argument("--mode", choices=["raw", "complementary"], default="raw")
    p.add_argument("--snr-db", type=float)
    p.add_argument("--noise-seed", type=int, default=4)
    p.add_argument("--daq-bits", type=int)
    p.add_argument("--daq-full-scale", type=float)
    p.add_argument("--out", required=True)

    p = sub.add_parser("recon", help="stage-one reconstruction (SPIF)")
    p.add_argument("--measurements", required=True)
    p.add_argument("--maps", required=True)
    p.add_argument("--lookups", required=True)
    p.add_argument("--kind", choices=["backproject", "tikhonov"], default="backproject")
    p.add_argument("--alpha", type=float, default=1e-4)
    p.add_argument("--out", required=True)
    p.add_argument("--timing", help="timing JSON path")

    p = sub.add_parser("enhance", help="iterative empty-region enhancement (SPIF)")
    p.add_argument("--initial", required=True)
    p.add_argument("--measurements", required=True)
    p.add_argument("--maps", required=True)
    p.add_argument("--lookups", required=True)
    p.add_argument("--tau-rel", type=float, default=0.02)
    p.add_argument("--tau-abs", type=float, default=0.0)
    p.add_argument("--iters", type=int, default=5)
    p.add_argument("--stop-tol", type=float, default=1e-4)
    p.add_argument("--clamp01", action="store_true")
    p.add_argument("--allow-negative", action="store_true",
                   help="disable the non-negativity clamp")
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="enhancement report JSON path")

    p = sub.add_parser("metrics", help="PSNR/SSIM of a test image against a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)

    p = sub.add_parser("montage", help="side-by-side comparison strip (PGM + CSV)")
    p.add_argument("--ref", required=True)
    p.add_argument("images", nargs="*", help="images compared against the reference")
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="metric CSV path")

    p = sub.add_parser("pipeline", help="run the full pipeline from a config JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--workdir", required=True)
    p.add_argument("--jobs", type=int, help="parallel scene workers "
                   "(default: machine parallelism)")

    p = sub.add_parser("bench", help="repeat a pipeline run and report stage timings")
    p.add_argument("--config", required=True)
    p.add_argument("--workdir", required=True)
    p.add_argument("--repeats", type=int, default=3)

    p = sub.add_parser("arith", help="config arithmetic: pattern count, ratio, rate")
    p.add_argument("--config", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service.app import app

        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    with make_client(args.server) as client:
        if args.command == "genmaps":
            _emit(_post(client, "/v1/maps/generate", {
                "width": args.width,
                "height": args.height,
                "maps": _parse_map_params(args.map),
                "seed": args.seed,
                "out_dir": args.out,
            }))
        elif args.command == "patterns":
            _emit(_post(client, "/v1/patterns/build", {
                "map_files": _expand_maps(args.maps),
                "beta": args.beta,
                "seed": args.seed,
                "out_path": args.out,
                "report_csv": args.report,
            }))
        elif args.command == "scene":
            _emit(_post(client, "/v1/scenes/generate", {
                "width": args.width,
                "height": args.height,
                "scene": {
                    "kind": args.kind,
                    "seed": args.seed,
                    "sparsity_max": args.sparsity_max,
                    "glyphs_path": args.glyphs,
                    "spokes": args.spokes,
                    "vignette": args.vignette,
                },
                "out_path": args.out,
                "pgm_path": args.pgm,
            }))
        elif args.command == "simulate":
            _emit(_post(client, "/v1/simulate", {
                "scene_file": args.scene,
                "map_files": _expand_maps(args.maps),
                "lookups_file": args.lookups,
                "mode": args.mode,
                "snr_db": args.snr_db,
                "noise_seed": args.noise_seed,
                "daq_bits": args.daq_bits,
                "daq_full_scale": args.daq_full_scale,
                "out_path": args.out,
            }))
        elif args.command == "recon":
            _emit(_post(client, "/v1/reconstruct/initial", {
                "measurements_file": args.measurements,
                "map_files": _expand_maps(args.maps),
                "lookups_file": args.lookups,
                "kind": args.kind,
                "alpha": args.alpha,
                "out_path": args.out,
                "timing_path": args.timing,
            }))
        elif args.command == "enhance":
            _emit(_post(client, "/v1/reconstruct/enhance", {
                "initial_file": args.initial,
                "measurements_file": args.measurements,
                "map_files": _expand_maps(args.maps),
                "lookups_file": args.lookups,
                "tau_rel": args.tau_rel,
                "tau_abs": args.tau_abs,
                "iters": args.iters,
                "stop_tol": args.stop_tol,
                "clamp_nonneg": not args.allow_negative,
                "clamp01": args.clamp01,
                "out_path": args.out,
                "report_path": args.report,
            }))
        elif args.command == "metrics":
            _emit(_post(client, "/v1/metrics/compare", {
                "ref_file": args.ref,
                "test_file": args.test,
            }))
        elif args.command == "montage":
            _emit(_post(client, "/v1/montage", {
                "ref_file": args.ref,
                "image_files": args.images,
                "out_path": args.out,
                "csv_path": args.csv,
            }))
        elif args.command == "pipeline":
            _emit(_post(client, "/v1/pipeline/run", {
                "config": _load_config(args.config),
                "workdir": args.workdir,
                "jobs": args.jobs,
            }))
        elif args.command == "bench":
            _emit(_post(client, "/v1/bench/run", {
                "config": _load_config(args.config),
                "workdir": args.workdir,
                "repeats": args.repeats,
            }))
        elif args.command == "arith":
            _emit(_post(client, "/v1/config/arithmetic", {
                "config": _load_config(args.config),
            }))
    return 0


if __name__ == "__main__":
    sys.exit(main())
