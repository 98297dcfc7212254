"""Command-line client for the simulation service.

By default every subcommand talks to an in-process instance of the FastAPI
app over an ASGI transport (no sockets, fully deterministic); ``--server``
points the same requests at a remote instance.  Result files are always
written client-side under ``--out``.
"""

from __future__ import annotations

import argparse
import asyncio
import sys
from pathlib import Path

import httpx

from . import __version__
from .harness.results import sidecar_path, write_artifact

DEFAULT_OUT = Path("results")


class InProcessTransport(httpx.BaseTransport):
    """Synchronous bridge to an ASGI app (httpx's ASGITransport is
    async-only).  Each request runs the app on a fresh event loop and the
    response body is materialized before returning."""

    def __init__(self, app) -> None:
        self._asgi = httpx.ASGITransport(app=app)

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        async def call() -> httpx.Response:
            response = await self._asgi.handle_async_request(request)
            body = b"".join([chunk async for chunk in response.stream])
            await response.aclose()
            return httpx.Response(status_code=response.status_code,
                                  headers=response.headers, content=body)

        return asyncio.run(call())


def make_client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    from .service.app import create_app
    return httpx.Client(transport=InProcessTransport(create_app()),
                        base_url="http://goldnoma.local", timeout=None)


def add_common(p: argparse.ArgumentParser, trials: bool = True) -> None:
    p.add_argument("--config", type=Path, default=None,
                   help="scenario config file (flat key=value)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="single config override; repeatable")
    p.add_argument("--seed", type=int, default=None, help="master_seed override")
    if trials:
        p.add_argument("--trials", type=int, default=None, help="trials override")
    p.add_argument("--out", type=Path, default=DEFAULT_OUT,
                   help=f"output directory (default: {DEFAULT_OUT})")
    p.add_argument("--force", action="store_true",
                   help="overwrite results with a different config fingerprint")
    p.add_argument("--server", default=None,
                   help="remote service URL (default: run in-process)")


def scenario_payload(args: argparse.Namespace) -> dict:
    payload: dict = {"config": {}}
    if args.config is not None:
        payload["config_text"] = Path(args.config).read_text()
    for item in args.set:
        if "=" not in item:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        payload["config"][key.strip()] = value.strip()
    if args.seed is not None:
        payload["config"]["master_seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        payload["config"]["trials"] = args.trials
    return payload


def post(args: argparse.Namespace, path: str, payload: dict) -> dict:
    with make_client(args.server) as client:
        resp = client.post(path, json=payload)
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            raise SystemExit(f"error: {detail}")
        return resp.json()


def save_artifact(args: argparse.Namespace, body: dict, filename: str) -> Path:
    out_csv = args.out / filename
    try:
        write_artifact(out_csv, body["csv"], body["sidecar"], force=args.force)
    except FileExistsError as exc:
        raise SystemExit(f"error: {exc}") from exc
    print(f"wrote {out_csv} and {sidecar_path(out_csv)}")
    return out_csv


def parse_float_list(text: str | None) -> list[float] | None:
    if text is None:
        return None
    return [float(v) for v in text.split(",") if v.strip()]


def parse_int_list(text: str | None) -> list[int] | None:
    if text is None:
        return None
    return [int(v) for v in text.split(",") if v.strip()]


def cmd_ser_sweep(args: argparse.Namespace) -> int:
    payload = scenario_payload(args)
    payload["code_lengths"] = parse_int_list(args.lengths)
    body = post(args, "/sweeps/ser", payload)
    save_artifact(args, body, "ser_sweep.csv")
    return 0


def cmd_baseline_compare(args: argparse.Namespace) -> int:
    payload = scenario_payload(args)
    payload["snr_db"] = parse_float_list(args.snr)
    body = post(args, "/sweeps/baseline", payload)
    save_artifact(args, body, "baseline_compare.csv")
    return 0


def cmd_mse_scaling(args: argparse.Namespace) -> int:
    payload = scenario_payload(args)
    payload["user_counts"] = parse_int_list(args.users)
    payload["snr_db"] = args.snr
    body = post(args, "/sweeps/mse-scaling", payload)
    save_artifact(args, body, "mse_scaling.csv")
    return 0


def cmd_cpf_eval(args: argparse.Namespace) -> int:
    payload = scenario_payload(args)
    payload["snr_db"] = parse_float_list(args.snr)
    if args.predictions is not None:
        payload["prediction_csv"] = Path(args.predictions).read_text()
    body = post(args, "/sweeps/cpf-eval", payload)
    save_artifact(args, body, "cpf_eval.csv")
    return 0


def cmd_export_dataset(args: argparse.Namespace) -> int:
    payload = scenario_payload(args)
    payload["n_points"] = args.points
    payload["window"] = args.window
    payload["horizon"] = args.horizon
    body = post(args, "/datasets/export", payload)
    save_artifact(args, body, "training_dataset.csv")
    return 0


def cmd_gold_report(args: argparse.Namespace) -> int:
    payload = {"m": args.m, "max_pairs": args.max_pairs,
               "include_family": not args.no_family, "seed": args.seed or 0}
    body = post(args, "/gold/family-report", payload)
    args.out.mkdir(parents=True, exist_ok=True)
    report = args.out / f"gold_report_m{args.m}.txt"
    report.write_text(body["report_text"])
    written = [str(report)]
    if body.get("family_text"):
        family = args.out / f"gold_family_m{args.m}.txt"
        family.write_text(body["family_text"])
        written.append(str(family))
    print("wrote " + " and ".join(written))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import create_app
    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="goldnoma",
        description="Link-level downlink-NOMA simulations: Gold-sequence user "
                    "separation, two-phase channel estimation, SIC reception.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ser-sweep", help="SER vs SNR across code lengths")
    add_common(p)
    p.add_argument("--lengths", default=None,
                   help="comma-separated sequence degrees m (default 5,6,7)")
    p.set_defaults(func=cmd_ser_sweep)

    p = sub.add_parser("baseline-compare",
                       help="spread system vs unspread pilot-only baseline")
    add_common(p)
    p.add_argument("--snr", default=None,
                   help="comma-separated SNR grid in dB (default -20..0)")
    p.set_defaults(func=cmd_baseline_compare)

    p = sub.add_parser("mse-scaling",
                       help="matched-filter MSE vs user count with code reuse")
    add_common(p)
    p.add_argument("--users", default=None,
                   help="comma-separated user counts (default 2,40,...,100)")
    p.add_argument("--snr", type=float, default=20.0,
                   help="operating transmit SNR in dB (default 20)")
    p.set_defaults(func=cmd_mse_scaling)

    p = sub.add_parser("cpf-eval", help="raw vs refined estimation MSE")
    add_common(p)
    p.add_argument("--snr", default=None, help="comma-separated SNR grid in dB")
    p.add_argument("--predictions", type=Path, default=None,
                   help="external prediction CSV (trial,user,h_pred_real,h_pred_imag)")
    p.set_defaults(func=cmd_cpf_eval)

    p = sub.add_parser("export-dataset",
                       help="export the temporal training dataset CSV")
    add_common(p, trials=False)
    p.add_argument("--points", type=int, default=None, help="time steps to export")
    p.add_argument("--window", type=int, default=None, help="input window length")
    p.add_argument("--horizon", type=int, default=None, help="prediction horizon")
    p.set_defaults(func=cmd_export_dataset)

    p = sub.add_parser("gold-report", help="family export + correlation tables")
    p.add_argument("--m", type=int, default=5, help="sequence degree (5, 6, or 7)")
    p.add_argument("--max-pairs", type=int, default=200,
                   help="cap on sampled correlation pairs")
    p.add_argument("--no-family", action="store_true",
                   help="skip writing the family chip file")
    p.add_argument("--seed", type=int, default=0, help="pair-sampling seed")
    p.add_argument("--out", type=Path, default=DEFAULT_OUT,
                   help=f"output directory (default: {DEFAULT_OUT})")
    p.add_argument("--server", default=None,
                   help="remote service URL (default: run in-process)")
    p.set_defaults(func=cmd_gold_report)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
