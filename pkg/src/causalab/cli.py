"""Command-line front end; a thin client over the HTTP service.

Every experiment goes through the same POST /run and POST /sweep routes
the service exposes.  By default the app is called in process; --server
points the same client at a remote instance.  Exit codes: 0 when every
report check passes, 1 when a check fails, 2 for configuration problems.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import COMMANDS, ParamSpec

_CONFIG_KEYS = ("seed", "format")


class _CliError(Exception):
    """Client-side problem; reported on stderr with exit code 2."""


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_param_flags(parser: argparse.ArgumentParser, params: tuple[ParamSpec, ...]):
    for spec in params:
        if spec.kind is bool:
            parser.add_argument(
                _flag(spec.name),
                dest=spec.name,
                action=argparse.BooleanOptionalAction,
                default=None,
                help=f"default {spec.default}",
            )
        else:
            parser.add_argument(
                _flag(spec.name),
                dest=spec.name,
                type=spec.kind,
                choices=spec.choices,
                default=None,
                help=f"default {spec.default}",
            )


def _add_common_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--seed", type=int, default=None, help="rng seed; required for stochastic commands")
    parser.add_argument("--format", choices=("csv", "jsonl"), default=None)
    parser.add_argument("--output", default=None, help="write the report here instead of stdout")
    parser.add_argument("--config", default=None, help="JSON file with the same keys as the flags")
    parser.add_argument("--server", default=None, help="URL of a running service; default runs in process")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causalab",
        description="seeded experiments on no-signaling boxes, causal geometry and modular energy",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    for name, spec in COMMANDS.items():
        sub = subparsers.add_parser(name)
        _add_param_flags(sub, spec.params)
        _add_common_flags(sub)

    sweep_parser = subparsers.add_parser("sweep", help="run one command over a list of parameter values")
    sweep_sub = sweep_parser.add_subparsers(dest="sweep_command", required=True)
    for name, spec in COMMANDS.items():
        sub = sweep_sub.add_parser(name)
        sub.add_argument("--parameter", required=True, help="name of the parameter to vary")
        sub.add_argument("--values", required=True, help="comma-separated values")
        _add_param_flags(sub, spec.params)
        _add_common_flags(sub)

    serve_parser = subparsers.add_parser("serve", help="start the HTTP service")
    serve_parser.add_argument("--host", default="127.0.0.1")
    serve_parser.add_argument("--port", type=int, default=8000)

    return parser


def _load_config_file(path: str, command: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise _CliError(f"cannot read config file {path!r}: {exc}")
    if not isinstance(data, dict):
        raise _CliError(f"config file {path!r} must hold a JSON object")
    file_command = data.pop("command", None)
    if file_command is not None and file_command != command:
        raise _CliError(
            f"config file names command {file_command!r} but {command!r} was requested"
        )
    return data


def _collect(args: argparse.Namespace, command: str) -> tuple[dict, str, int | None]:
    """Merge config file and flags into (params, format, seed); flags win."""
    file_config = _load_config_file(args.config, command) if args.config else {}
    allowed = {p.name for p in COMMANDS[command].params}
    unknown = sorted(set(file_config) - allowed - set(_CONFIG_KEYS))
    if unknown:
        raise _CliError(f"config file has unknown keys: {unknown}")

    params = {k: v for k, v in file_config.items() if k in allowed}
    for name in allowed:
        value = getattr(args, name)
        if value is not None:
            params[name] = value
    seed = args.seed if args.seed is not None else file_config.get("seed")
    fmt = args.format or file_config.get("format") or "jsonl"
    return params, fmt, seed


def _post(server: str | None, path: str, payload: dict) -> tuple[int, dict]:
    if server:
        import httpx

        try:
            resp = httpx.post(server.rstrip("/") + path, json=payload, timeout=300.0)
        except httpx.HTTPError as exc:
            raise _CliError(f"cannot reach server {server!r}: {exc}")
        return resp.status_code, resp.json()

    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import create_app

    with TestClient(create_app()) as client:
        resp = client.post(path, json=payload)
        return resp.status_code, resp.json()


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _run_once(args: argparse.Namespace) -> int:
    command = args.command
    params, fmt, seed = _collect(args, command)
    payload = {"command": command, "format": fmt, "params": params}
    if seed is not None:
        payload["seed"] = seed
    status, body = _post(args.server, "/run", payload)
    if status != 200:
        raise _CliError(body.get("detail", f"server returned {status}"))
    _emit(body["rendered"], args.output)
    return 0 if body["passed"] else 1


def _run_sweep(args: argparse.Namespace) -> int:
    command = args.sweep_command
    params, _, seed = _collect(args, command)
    payload = {
        "command": command,
        "params": params,
        "parameter": args.parameter,
        "values": args.values.split(","),
    }
    if seed is not None:
        payload["seed"] = seed
    status, body = _post(args.server, "/sweep", payload)
    if status != 200:
        raise _CliError(body.get("detail", f"server returned {status}"))
    _emit(body["csv"], args.output)
    return 0


def _serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return _serve(args)
        if args.command == "sweep":
            return _run_sweep(args)
        return _run_once(args)
    except _CliError as exc:
        print(f"causalab: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
