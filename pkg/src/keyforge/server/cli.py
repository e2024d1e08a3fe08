"""``kf-server`` and ``kf-admin`` entry points.

Config is a JSON file::

    {
      "domains": ["sender.example"],
      "socket_path": "/tmp/kf.sock",
      "http_host": "127.0.0.1",
      "http_port": 8423,
      "public_dir": "./public",
      "keystore_path": "./keys.enc",
      "passphrase_env": "KF_PASSPHRASE",
      "space": {"layout": "uniform", "leaf_target": 70080, "depth": 7,
                "epoch_start": 1735689600, "chunk_seconds": 900},
      "delta_hat_seconds": 900,
      "expiry_interval_seconds": 900,
      "max_depth": 8
    }

The passphrase is read from the named environment variable; a literal
``"passphrase"`` field is honored for test fixtures.
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import sys
import threading

from ..errors import KeyForgeError, StorageError
from .httpd import HttpServer
from .rpc import RpcServer
from .service import KeyServerService, space_from_config
from .storage import KeyStore


def load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _passphrase(config: dict) -> str:
    if "passphrase" in config:
        return config["passphrase"]
    env = config.get("passphrase_env", "KF_PASSPHRASE")
    value = os.environ.get(env)
    if not value:
        raise StorageError(f"set the key store passphrase in ${env}")
    return value


def open_store(config: dict) -> KeyStore:
    return KeyStore(config["keystore_path"], _passphrase(config))


def build_service(config: dict, store: KeyStore, clock=None) -> KeyServerService:
    service = KeyServerService(public_dir=config["public_dir"], clock=clock)
    space = space_from_config(config["space"])
    for domain in config.get("domains", []):
        entry = store.domains.get(domain)
        if entry is None:
            raise StorageError(f"domain {domain} has no keys; run kf-admin gen-keys")
        service.register_domain(
            domain,
            seed=bytes.fromhex(entry["seed"]),
            request_seed=bytes.fromhex(entry["request_seed"]),
            space=space,
            delta_hat=int(config.get("delta_hat_seconds", 900)),
            expiry_interval=int(config.get("expiry_interval_seconds", 0)),
            max_depth=int(entry.get("max_depth", 8)),
            generation=int(entry.get("generation", 1)),
        )
    return service


def server_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="kf-server", description="run the key server")
    parser.add_argument("--config", required=True)
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        store = open_store(config)
        service = build_service(config, store)
    except (OSError, KeyForgeError, KeyError, ValueError) as exc:
        print(f"kf-server: {exc}", file=sys.stderr)
        return 2

    socket_path = config["socket_path"]
    if os.path.exists(socket_path):
        os.unlink(socket_path)
    rpc = RpcServer(socket_path, service)
    rpc.serve_in_thread()
    httpd = HttpServer((config.get("http_host", "127.0.0.1"),
                        int(config.get("http_port", 0))), service)
    httpd.serve_in_thread()
    for domain in service.domains:
        service.write_params(domain)

    stop = threading.Event()
    publisher = threading.Thread(target=service.run_publisher, args=(stop,), daemon=True)
    publisher.start()

    host, port = httpd.server_address[:2]
    print(f"kf-server: rpc on {socket_path}, http on {host}:{port}", file=sys.stderr)
    try:
        signal.sigwait({signal.SIGINT, signal.SIGTERM})
    except (KeyboardInterrupt, AttributeError):
        pass
    stop.set()
    rpc.shutdown()
    httpd.shutdown()
    return 0


def admin_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="kf-admin", description="key server administration")
    parser.add_argument("--config", required=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen-keys", help="create keys for a domain")
    p_gen.add_argument("--domain", required=True)

    p_rot = sub.add_parser("rotate", help="retire the current master key, start a new one")
    p_rot.add_argument("--domain", required=True)

    p_pub = sub.add_parser("publish-now", help="write due expiry info and params")
    p_pub.add_argument("--domain", default=None)
    p_pub.add_argument("--now", type=int, default=None, help="clock override (unix seconds)")

    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        store = open_store(config)
    except (OSError, KeyForgeError, KeyError, ValueError) as exc:
        print(f"kf-admin: {exc}", file=sys.stderr)
        return 2

    if args.command == "gen-keys":
        store.ensure_domain(args.domain, max_depth=int(config.get("max_depth", 8)))
        store.save()
        print(f"keys ready for {args.domain}")
        return 0

    if args.command == "rotate":
        try:
            entry = store.rotate(args.domain)
        except StorageError as exc:
            print(f"kf-admin: {exc}", file=sys.stderr)
            return 2
        store.save()
        print(f"rotated {args.domain} to generation {entry['generation']}")
        return 0

    # publish-now
    clock = (lambda: args.now) if args.now is not None else None
    try:
        service = build_service(config, store, clock=clock)
    except KeyForgeError as exc:
        print(f"kf-admin: {exc}", file=sys.stderr)
        return 2
    domains = [args.domain] if args.domain else list(service.domains)
    for domain in domains:
        params_path = service.write_params(domain)
        expiry_path = service.publish_expiry(domain, now=args.now)
        print(f"{domain}: params -> {params_path}; "
              f"expiry -> {expiry_path if expiry_path else '(nothing new)'}")
    return 0
